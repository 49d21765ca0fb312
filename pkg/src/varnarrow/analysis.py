"""Equational reasoning over terms and variant trees: homeomorphic
embedding, the termination whistle, closedness, the finite-variant-property
test, node comparison, and wildcard queries."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .errors import ParseError
from .parser import parse_term
from .rewrite import Position, find_redexes
from .terms import (App, Subst, Term, Var, canonical, fresh_var, positions,
                    rename_apart, term_key, vars_of)
from .unify import match_any, match_pairs, match_term

# ---------------------------------------------------------------------------
# Homeomorphic embedding modulo the axioms

def embeds(small: Term, big: Term, th) -> bool:
    """True when `small` (or an Ax-equal term) can be obtained from `big`
    by deleting symbols: variables embed kind-compatible variables, any
    term embeds by diving into an argument, and equal operators couple
    argument-wise (positionwise for free operators, order-respecting
    subsequence under assoc, multiset injection under assoc+comm)."""
    return _emb(canonical(small, th), canonical(big, th), th)


def _emb(s: Term, t: Term, th) -> bool:
    if isinstance(s, Var):
        if isinstance(t, Var):
            return th.sort_graph.same_kind(s.sort, t.sort)
        return any(_emb(s, a, th) for a in t.args)
    if isinstance(t, Var):
        return False
    if any(_emb(s, a, th) for a in t.args):
        return True
    if s.op != t.op:
        return False
    if th.is_assoc(s.op) and th.is_comm(s.op):
        return _inject(list(s.args), list(t.args), th)
    if th.is_assoc(s.op):
        return _subseq(list(s.args), list(t.args), th)
    if len(s.args) != len(t.args):
        return False
    if th.is_comm(s.op):
        (a1, a2), (b1, b2) = s.args, t.args
        return ((_emb(a1, b1, th) and _emb(a2, b2, th))
                or (_emb(a1, b2, th) and _emb(a2, b1, th)))
    return all(_emb(a, b, th) for a, b in zip(s.args, t.args))


def _inject(ss, ts, th):
    if not ss:
        return True
    s0 = ss[0]
    for i, t0 in enumerate(ts):
        if _emb(s0, t0, th) and _inject(ss[1:], ts[:i] + ts[i + 1:], th):
            return True
    return False


def _subseq(ss, ts, th):
    if not ss:
        return True
    if len(ss) > len(ts):
        return False
    if _emb(ss[0], ts[0], th) and _subseq(ss[1:], ts[1:], th):
        return True
    return _subseq(ss, ts[1:], th)


def whistle_check(branch: list[Term], new_term: Term, th) -> int | None:
    """Smallest index i such that branch[i] is embedded into new_term;
    None when no branch term is. `branch` runs root-to-parent."""
    for i, t in enumerate(branch):
        if embeds(t, new_term, th):
            return i
    return None


# ---------------------------------------------------------------------------
# Equational closedness

@dataclass
class ClosednessReport:
    closed: bool
    redexes: list[tuple[Position, Term]]
    uncovered: list[tuple[Position, Term]]


def is_closed(node_term: Term, root_term: Term, th) -> ClosednessReport:
    """A node is closed w.r.t. the tree root when every narrowing redex of
    its term (including assoc segments) Ax-matches the root. Unnarrowable
    terms are trivially closed."""
    node_term = canonical(node_term, th)
    lhss = [e.lhs for e in th.variant_eqs]
    redexes = find_redexes(node_term, th, lhss, mode="unify")
    base = max([0] + [_max_index(t) for t in (node_term, root_term)])
    ren = Subst({v: fresh_var("variant", v.sort, base + i + 1)
                 for i, v in enumerate(vars_of(root_term))})
    pattern = ren.apply(root_term, th)
    uncovered = [(pos, t) for pos, t in redexes
                 if not match_term(pattern, t, th)]
    return ClosednessReport(not uncovered, redexes, uncovered)


def _max_index(t: Term) -> int:
    from .terms import fresh_index_of
    return fresh_index_of(t)


# ---------------------------------------------------------------------------
# Finite variant property (semi-decision: true or uncertain, never false)

@dataclass
class OpVerdict:
    op: str
    status: str  # "finite" | "uncertain"
    count: int
    reason: str | None = None  # "bound" | "timeout" when uncertain
    flat_term: Term | None = None
    variants: list[tuple[Subst, Term]] | None = None


@dataclass
class FvpVerdict:
    per_op: dict[str, OpVerdict]
    overall: str  # "true" | "uncertain"

    def line_report(self, th) -> list[str]:
        from .parser import format_term
        lines = []
        for name, v in self.per_op.items():
            if v.status == "finite":
                lines.append(f"{name}: finite({v.count})")
            else:
                lines.append(f"{name}: uncertain(>={v.count}, {v.reason})")
        lines.append(f"FVP: {self.overall}")
        return lines


def check_fvp(th, max_variants: int = 100, timeout: float = 30.0) -> FvpVerdict:
    """Enumerate the variants of every flat term f(X1,...,Xn) with
    pairwise-distinct kind-level variables; finite when every enumeration
    exhausts within both limits."""
    from .tree import VariantTree

    per: dict[str, OpVerdict] = {}
    seen = []
    for d in th.ops:
        if d.name not in seen:
            seen.append(d.name)
    for name in seen:
        d = th.decls(name)[0]
        args = tuple(Var(f"X{i + 1}", th.sort_graph.kind_of(s))
                     for i, s in enumerate(d.arg_sorts))
        flat = canonical(App(name, args), th)
        tree = VariantTree(flat, th)
        report = tree.expand_variants(max_variants, timeout=timeout)
        count = len(tree.order)
        if report.criterion == "exhausted":
            nodes = tree.variants()
            per[name] = OpVerdict(name, "finite", count, flat_term=flat,
                                  variants=[(n.acc_subst, n.term) for n in nodes])
        else:
            per[name] = OpVerdict(name, "uncertain", min(count, max_variants),
                                  reason=report.criterion, flat_term=flat)
    overall = "true" if all(v.status == "finite" for v in per.values()) else "uncertain"
    return FvpVerdict(per, overall)


# ---------------------------------------------------------------------------
# Node comparison

@dataclass
class BindingDiff:
    var: Var
    left: Term | None
    right: Term | None
    equal: bool


@dataclass
class ComparisonReport:
    left_id: int
    right_id: int
    terms_ax_equal: bool
    terms_equal_mod_renaming: bool
    renaming: Subst | None
    binding_diffs: list[BindingDiff]
    substs_equal: bool
    left_subsumes_right: bool
    right_subsumes_left: bool


def renaming_witness(a: Term, b: Term, th) -> Subst | None:
    """A sort-preserving variable bijection sending a to b modulo Ax."""
    a = canonical(a, th)
    b = canonical(b, th)
    base = max(_max_index(a), _max_index(b))
    (pat,), ren, _nxt = rename_apart([a], th, base)
    back = {ren.get(v): v for v in vars_of(a)}
    bvars = set(vars_of(b))
    for m in match_term(pat, b, th):
        items = m.items()
        if not all(isinstance(t, Var) and v.sort == t.sort for v, t in items):
            continue
        image = {t for _v, t in items}
        if len(image) != len(items) or image != bvars:
            continue
        return Subst({back[v]: t for v, t in items})
    return None


def compare_nodes(a, b, th, root_vars) -> ComparisonReport:
    ren = renaming_witness(a.term, b.term, th)
    diffs = []
    all_equal = True
    for v in root_vars:
        ta = a.acc_subst.get(v, v)
        tb = b.acc_subst.get(v, v)
        eq = ta == tb
        all_equal = all_equal and eq
        diffs.append(BindingDiff(v, ta, tb, eq))

    def subsumes(n1, n2):
        pat = [n1.term] + [n1.acc_subst.get(v, v) for v in root_vars]
        subj = [n2.term] + [n2.acc_subst.get(v, v) for v in root_vars]
        base = max(_max_index(t) for t in pat + subj)
        renamed, _ren, _nxt = rename_apart(pat, th, base)
        return match_any(list(zip(renamed, subj)), th)

    return ComparisonReport(
        left_id=a.id,
        right_id=b.id,
        terms_ax_equal=canonical(a.term, th) == canonical(b.term, th),
        terms_equal_mod_renaming=ren is not None,
        renaming=ren,
        binding_diffs=diffs,
        substs_equal=all_equal,
        left_subsumes_right=subsumes(a, b),
        right_subsumes_left=subsumes(b, a),
    )


# ---------------------------------------------------------------------------
# Tree querying with wildcards

WILDCARD_SORT = "[*]"


def _is_wild(t: Term) -> bool:
    return isinstance(t, Var) and t.sort == WILDCARD_SORT


def _is_capture(t: Term) -> bool:
    return _is_wild(t) and t.name.startswith("?")


@dataclass(frozen=True)
class QueryPattern:
    text: str
    term: Term


@dataclass
class NodeMatches:
    node_id: int
    highlights: list[Position] = field(default_factory=list)
    match_positions: list[Position] = field(default_factory=list)


def parse_query(text: str, th) -> QueryPattern:
    """`_` matches one position silently, `?` matches and highlights; under
    an assoc operator a wildcard may absorb a whole argument segment."""
    if not text.strip():
        raise ParseError("empty query")
    raw = parse_term(text, th, wildcards=True, keep_order=True)
    return QueryPattern(text, raw)


def query_tree(tree, q: QueryPattern) -> list[NodeMatches]:
    th = tree.theory
    out = []
    for nid in tree.order:
        node = tree.nodes[nid]
        nm = NodeMatches(nid)
        seen_pos = set()
        seen_hl = set()
        for path, sub in positions(node.term):
            if isinstance(sub, Var) and not isinstance(q.term, Var):
                continue
            for caps in _qmatch(q.term, sub, path, th):
                pos = Position(path)
                if pos not in seen_pos:
                    seen_pos.add(pos)
                    nm.match_positions.append(pos)
                for c in caps:
                    if c not in seen_hl:
                        seen_hl.add(c)
                        nm.highlights.append(c)
        if nm.match_positions:
            out.append(nm)
    return out


def _qmatch(p: Term, t: Term, path, th):
    """Yield capture lists (each capture a Position of a `?` binding)."""
    if _is_wild(p):
        yield [Position(path)] if _is_capture(p) else []
        return
    if isinstance(p, Var):
        if p == t:
            yield []
        return
    if not isinstance(t, App) or p.op != t.op:
        return
    flat = th.is_assoc(p.op) and len(t.args) >= 2
    if flat:
        yield from _qmatch_flat(p, t, path, th)
        return
    if len(p.args) != len(t.args):
        return
    orders = [list(range(len(t.args)))]
    if th.is_comm(p.op) and len(t.args) == 2:
        orders.append([1, 0])
    for order in orders:
        yield from _qmatch_args(list(p.args), [t.args[i] for i in order],
                                [path + (i,) for i in order], th)


def _qmatch_args(pats, subs, paths, th):
    if not pats:
        yield []
        return
    for caps0 in _qmatch(pats[0], subs[0], paths[0], th):
        for caps1 in _qmatch_args(pats[1:], subs[1:], paths[1:], th):
            yield caps0 + caps1


def _qmatch_flat(p: App, t: App, path, th):
    """Flat-node matching. Under comm, concrete pattern arguments bind
    distinct subject arguments and wildcards then absorb the remaining
    arguments as contiguous segments of the canonical argument order, one
    non-empty segment per wildcard, in pattern order. Under plain assoc,
    the subject sequence splits into ordered blocks."""
    if len(p.args) > len(t.args):
        return
    if th.is_comm(p.op):
        yield from _qmatch_flat_comm(p, t, path, th)
    else:
        yield from _qmatch_flat_ordered(p, t, path, th)


def _seg_position(path, seg):
    if len(seg) == 1:
        return Position(path + (seg[0],))
    return Position(path, tuple(seg))


def _qmatch_flat_comm(p: App, t: App, path, th):
    concrete = [a for a in p.args if not _is_wild(a)]
    wilds = [a for a in p.args if _is_wild(a)]
    n = len(t.args)

    def absorb(ws, remaining, caps):
        if not ws:
            if not remaining:
                yield caps
            return
        if len(remaining) < len(ws):
            return
        w = ws[0]
        max_take = len(remaining) - (len(ws) - 1)
        for take in range(1, max_take + 1):
            seg = remaining[:take]
            if _is_capture(w):
                yield from absorb(ws[1:], remaining[take:],
                                  caps + [_seg_position(path, seg)])
            else:
                yield from absorb(ws[1:], remaining[take:], caps)

    def assign(ci, used, caps):
        if ci == len(concrete):
            remaining = [i for i in range(n) if i not in used]
            yield from absorb(wilds, remaining, caps)
            return
        for i in range(n):
            if i in used:
                continue
            for c in _qmatch(concrete[ci], t.args[i], path + (i,), th):
                yield from assign(ci + 1, used | {i}, caps + c)

    yield from assign(0, frozenset(), [])


def _qmatch_flat_ordered(p: App, t: App, path, th):
    n = len(t.args)

    def go(pi, sj, caps):
        if pi == len(p.args):
            if sj == n:
                yield caps
            return
        pat = p.args[pi]
        min_rest = len(p.args) - pi - 1
        if _is_wild(pat):
            for take in range(1, n - sj - min_rest + 1):
                seg = list(range(sj, sj + take))
                extra = [_seg_position(path, seg)] if _is_capture(pat) else []
                yield from go(pi + 1, sj + take, caps + extra)
            return
        if sj < n:
            for c in _qmatch(pat, t.args[sj], path + (sj,), th):
                yield from go(pi + 1, sj + 1, caps + c)

    yield from go(0, 0, [])
