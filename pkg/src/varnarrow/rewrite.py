"""Rewriting with the equations modulo the axioms, to canonical form.

Every equation (variant or not) simplifies. The strategy is fixed to
leftmost-innermost with first-equation-in-module-order; for flattened
assoc/AC nodes an equation may rewrite an argument segment (contiguous run
under assoc, sub-multiset under assoc+comm), which realizes extension
matching. Each applied step is recorded for the instrumented view.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .errors import NonTermination
from .terms import (App, Subst, Term, Var, canonical, fresh_var,
                    fresh_index_of, positions, rename_apart, replace_at,
                    term_key, vars_of)
from .unify import match_term, matchable, unifiable

DEFAULT_STEP_LIMIT = 10_000


@dataclass(frozen=True)
class Position:
    """A subterm position; `segment` selects argument indices of a
    flattened assoc/AC node (None means the whole subterm)."""

    path: tuple[int, ...]
    segment: tuple[int, ...] | None = None

    def to_json(self):
        return {"path": list(self.path),
                "segment": list(self.segment) if self.segment is not None else None}


@dataclass(frozen=True)
class TraceStep:
    equation: str
    position: Position
    matcher: Subst
    before: Term
    after: Term


@dataclass
class RewriteTrace:
    steps: list[TraceStep] = field(default_factory=list)

    def labels(self) -> list[str]:
        return [s.equation for s in self.steps]

    def __len__(self):
        return len(self.steps)


def _is_flat(t: Term, th) -> bool:
    return isinstance(t, App) and th.is_assoc(t.op) and len(t.args) >= 2


def _segment_indices(t: App, th, proper_only=False):
    """Argument-index segments of a flat node, smallest first; the full
    segment (= the node itself) comes last unless proper_only."""
    n = len(t.args)
    out = []
    top = n if not proper_only else n - 1
    if th.is_comm(t.op):
        for size in range(2, top + 1):
            out.extend(combinations(range(n), size))
    else:
        for size in range(2, top + 1):
            for start in range(0, n - size + 1):
                out.append(tuple(range(start, start + size)))
    return out


def _segment_term(t: App, idxs, th) -> Term:
    return canonical(App(t.op, tuple(t.args[i] for i in idxs)), th)


def _replace_segment(t: App, idxs, new: Term, th) -> Term:
    chosen = set(idxs)
    rest = [a for i, a in enumerate(t.args) if i not in chosen]
    return canonical(App(t.op, tuple(rest + [new])), th)


# ---------------------------------------------------------------------------
# Normalization

def normalize(t: Term, th, limit: int = DEFAULT_STEP_LIMIT):
    """Canonical form of t under the theory's equations modulo the axioms,
    together with the full rewrite trace. Raises NonTermination past the
    step limit."""
    t = canonical(t, th)
    trace = RewriteTrace()
    while True:
        hit = _find_step(t, th)
        if hit is None:
            return t, trace
        pos, eq, matcher, replaced = hit
        after = canonical(replace_at(t, pos.path, replaced), th)
        trace.steps.append(TraceStep(eq.label, pos, matcher, t, after))
        t = after
        if len(trace.steps) > limit:
            raise NonTermination(
                f"no canonical form within {limit} rewrite steps; "
                "the equations are probably non-terminating")


def _eq_sides(eq, subject: Term, th):
    """The equation's sides, renamed apart when its variables collide with
    the subject's (matching would conflate equally-named variables)."""
    svars = set(vars_of(subject))
    if svars.isdisjoint(vars_of(eq.lhs)):
        return eq.lhs, eq.rhs
    base = max(fresh_index_of(subject), fresh_index_of(eq.lhs))
    (lhs, rhs), _ren, _nxt = rename_apart([eq.lhs, eq.rhs], th, base)
    return lhs, rhs


def _find_step(t: Term, th):
    """Leftmost-innermost redex: (position, equation, matcher, new subterm)."""
    if isinstance(t, Var):
        return None
    for i, a in enumerate(t.args):
        hit = _find_step(a, th)
        if hit is not None:
            pos, eq, m, replaced = hit
            return Position((i,) + pos.path, pos.segment), eq, m, replaced
    flat = _is_flat(t, th)
    for eq in th.eqs:
        lhs, rhs = _eq_sides(eq, t, th)
        if flat:
            # whole node first, then proper segments (extension matching)
            for idxs in [None] + _segment_indices(t, th, proper_only=True):
                subj = t if idxs is None else _segment_term(t, idxs, th)
                for m in match_term(lhs, subj, th):
                    new = m.apply(rhs, th)
                    if idxs is None:
                        return Position(()), eq, m, new
                    return Position((), idxs), eq, m, _replace_segment(t, idxs, new, th)
        else:
            for m in match_term(lhs, t, th):
                return Position(()), eq, m, m.apply(rhs, th)
    return None


def reducible(t: Term, th) -> bool:
    return _find_step(canonical(t, th), th) is not None


# ---------------------------------------------------------------------------
# Redex enumeration (rewriting and narrowing views of a term)

def find_redexes(t: Term, th, patterns, mode: str = "unify"):
    """All positions, including assoc segments / AC sub-multisets of
    flattened nodes, where some pattern applies.

    mode "unify": the pattern Ax-unifies with the (renamed-apart) subterm,
    i.e. a narrowing redex. mode "match": the pattern Ax-matches it.
    Returns (Position, subterm) pairs in preorder, segments smallest first.
    """
    t = canonical(t, th)
    base = fresh_index_of(t)
    for p in patterns:
        base = max(base, fresh_index_of(p))
    out = []
    for path, sub in positions(t):
        if isinstance(sub, Var):
            continue
        if _is_flat(sub, th):
            cands = [(idxs, _segment_term(sub, idxs, th))
                     for idxs in _segment_indices(sub, th, proper_only=True)]
            cands.append((None, sub))
        else:
            cands = [(None, sub)]
        for idxs, segterm in cands:
            if any(_applies(pat, segterm, th, mode, base) for pat in patterns):
                out.append((Position(path, idxs), segterm))
    return out


def _applies(pattern: Term, subject: Term, th, mode: str, base: int) -> bool:
    (renamed,), _ren, nxt = rename_apart([pattern], th, base)
    if mode == "match":
        return matchable(renamed, subject, th)
    return unifiable(renamed, subject, th, fresh=nxt + 1, assoc_detect=True)
