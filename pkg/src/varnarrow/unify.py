"""Matching and unification modulo the supported axiom combinations.

Supported for unification: free, comm, assoc+comm (AC), assoc+comm+id (ACU).
Matching additionally handles assoc-only operators (contiguous-block
splitting); general assoc-only unification is undecidable and rejected,
but a bounded block-split variant is available internally for narrowing
redex detection.

AC/ACU unification follows the classic reduction: flatten both sides,
cancel common arguments (multiset union is cancellative), abstract the
remaining distinct arguments into slots of a linear Diophantine equation,
combine subsets of the minimal-solution basis into candidate assignments,
then discharge the constraints tying fresh atoms back to non-variable
arguments by recursive unification. Fresh atoms start at kind level and
are lowered to maximal proper sorts that make every binding well sorted.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import product

from .errors import ResourceLimit, UnsupportedAxioms
from .terms import (App, Subst, Term, Var, canonical, fresh_var, term_key,
                    term_size, vars_of)

DIOPH_CAP = 4096
_BASIS_LIMIT = 40  # subset combination can be exponential in the basis size
MINIMIZE_LIMIT = 50  # past this, skip the quadratic redundancy filter
FOLD_BUDGET_DEFAULT = 100_000  # search-step cap for one fold subsumption check


# ---------------------------------------------------------------------------
# Linear Diophantine systems

@dataclass
class DiophSystem:
    """Homogeneous linear system over non-negative integer unknowns.

    Each row holds one signed coefficient per unknown (left-hand side
    multiplicities positive, right-hand side negative). `zero_allowed`
    marks unknowns that downstream combination may set to zero (identity
    axiom); it does not affect the basis itself.
    """

    rows: list[tuple[int, ...]]
    zero_allowed: tuple[bool, ...] = ()
    cap: int | None = None


def solve_dioph(system: DiophSystem) -> list[tuple[int, ...]]:
    """Minimal non-zero non-negative solutions (Contejean-Devie search)."""
    rows = [tuple(r) for r in system.rows]
    if not rows:
        return []
    n = len(rows[0])
    cap = system.cap if system.cap is not None else DIOPH_CAP

    def defect(v):
        return tuple(sum(c * x for c, x in zip(row, v)) for row in rows)

    col = [tuple(row[i] for row in rows) for i in range(n)]

    def dot(a, b):
        return sum(x * y for x, y in zip(a, b))

    minimal: list[tuple[int, ...]] = []
    frontier = []
    for i in range(n):
        v = tuple(1 if j == i else 0 for j in range(n))
        frontier.append(v)
    seen = set(frontier)
    while frontier:
        next_frontier = []
        for v in frontier:
            if any(all(m[i] <= v[i] for i in range(n)) for m in minimal):
                continue
            d = defect(v)
            if all(x == 0 for x in d):
                minimal.append(v)
                if len(minimal) > cap:
                    raise ResourceLimit(
                        f"Diophantine basis exceeds cap of {cap} solutions")
                continue
            for i in range(n):
                # grow only in directions that reduce the defect
                if dot(d, col[i]) < 0:
                    w = tuple(x + (1 if j == i else 0) for j, x in enumerate(v))
                    if w not in seen:
                        seen.add(w)
                        next_frontier.append(w)
        frontier = next_frontier
    minimal = [m for m in minimal
               if not any(m2 != m and all(a <= b for a, b in zip(m2, m))
                          for m2 in minimal)]
    return sorted(minimal)


# ---------------------------------------------------------------------------
# Problems

@dataclass(frozen=True)
class UnifProblem:
    pairs: tuple[tuple[Term, Term], ...]
    mode: str = "unify"  # "unify" | "match" (right side frozen)


def _is_ac(op, th):
    return th.is_assoc(op) and th.is_comm(op)


def _check_axioms(pairs, th):
    def scan(t):
        if isinstance(t, App):
            if th.is_assoc(t.op) and not th.is_comm(t.op):
                raise UnsupportedAxioms(
                    f"unification modulo assoc-only operator {t.op} is unsupported")
            if th.identity_of(t.op) is not None and not _is_ac(t.op, th):
                raise UnsupportedAxioms(
                    f"identity without assoc+comm on {t.op} is unsupported")
            for a in t.args:
                scan(a)
    for l, r in pairs:
        scan(l)
        scan(r)


def _sort_fits(t: Term, sort: str, th) -> bool:
    return th.sort_graph.leq(th.least_sort(t), sort)


def _ac_args(t: Term, op: str, ident) -> list[Term]:
    """t as a multiset of op-arguments (empty for the identity element)."""
    if ident is not None and t == ident:
        return []
    if isinstance(t, App) and t.op == op:
        return list(t.args)
    return [t]


def _join_ac(op: str, args, ident, th) -> Term:
    if not args:
        return ident
    if len(args) == 1:
        return args[0]
    return canonical(App(op, tuple(args)), th)


# ---------------------------------------------------------------------------
# Unification

def unify_pairs(pairs, th, fresh=1, assoc_detect=False, minimize=True) -> list[Subst]:
    """Complete set of unifiers modulo the declared axioms.

    Fresh `#n` variables are numbered from `fresh`, which must exceed every
    fresh index already present in the input. Redundant unifiers (instances
    of another returned one) are filtered out unless minimize=False; the
    result list is deterministic, sorted by the term order of the bindings.
    """
    pairs = [(canonical(l, th), canonical(r, th)) for l, r in pairs]
    if not assoc_detect:
        _check_axioms(pairs, th)
    input_vars = []
    for l, r in pairs:
        for v in vars_of(l) + vars_of(r):
            if v not in input_vars:
                input_vars.append(v)
    out = []
    seen = set()
    for sigma, _cnt in _solve(pairs, Subst(), fresh, th, assoc_detect):
        for refined in _refine_sorts(sigma, th, fresh):
            final = Subst({v: t for v, t in refined.items() if v in set(input_vars)})
            if final not in seen:
                seen.add(final)
                out.append(final)
    if minimize and 1 < len(out) <= MINIMIZE_LIMIT:
        out = _minimize_unifiers(out, input_vars, th)
    out.sort(key=Subst.sort_key)
    return out


def _minimize_unifiers(sols, input_vars, th):
    """Drop unifiers that are Ax-instances of another returned one (keeping
    the first of each renaming-equivalent pair); completeness is preserved,
    redundancy shrinks downstream trees. Subsumption is transitive, so a
    dropped witness is always covered by some retained generalizer."""
    from .terms import rename_apart, term_size

    tuples = [[s.get(v, v) for v in input_vars] for s in sols]
    sizes = [[term_size(t) for t in tup] for tup in tuples]
    patterns = [rename_apart(tup, th, 0, var_class="internal")[0]
                for tup in tuples]
    memo: dict[tuple[int, int], bool] = {}

    def subsumes(i, j):
        # does sols[i] generalize sols[j]?
        key = (i, j)
        if key not in memo:
            if any(a > b for a, b in zip(sizes[i], sizes[j])):
                memo[key] = False
            else:
                memo[key] = match_any(list(zip(patterns[i], tuples[j])), th)
        return memo[key]

    n = len(sols)
    keep = []
    for j in range(n):
        redundant = any(
            i != j and subsumes(i, j) and (i < j or not subsumes(j, i))
            for i in range(n))
        if not redundant:
            keep.append(j)
    return [sols[j] for j in keep]


def unify_terms(l: Term, r: Term, th, fresh=1) -> list[Subst]:
    return unify_pairs([(l, r)], th, fresh)


def unifiable(l: Term, r: Term, th, fresh=1, assoc_detect=False) -> bool:
    pairs = [(canonical(l, th), canonical(r, th))]
    if not assoc_detect:
        _check_axioms(pairs, th)
    for sigma, _ in _solve(pairs, Subst(), fresh, th, assoc_detect):
        if _refine_sorts(sigma, th, fresh):
            return True
    return False


def _solve(pairs, sigma, counter, th, ad):
    if not pairs:
        yield sigma, counter
        return
    l = sigma.apply(pairs[0][0], th)
    r = sigma.apply(pairs[0][1], th)
    rest = pairs[1:]
    if l == r:
        yield from _solve(rest, sigma, counter, th, ad)
        return

    top = None
    if isinstance(l, App) and _is_ac(l.op, th):
        top = l.op
    if isinstance(r, App) and _is_ac(r.op, th):
        if top is None:
            top = r.op
        elif r.op != top:
            # two different AC tops: only an identity collapse can reconcile
            if th.identity_of(r.op) is not None:
                top = r.op
            elif th.identity_of(top) is None:
                return
    if top is not None:
        yield from _solve_ac(top, l, r, rest, sigma, counter, th, ad)
        return

    l_assoc = isinstance(l, App) and th.is_assoc(l.op) and not th.is_comm(l.op)
    r_assoc = isinstance(r, App) and th.is_assoc(r.op) and not th.is_comm(r.op)
    if (l_assoc or r_assoc) and isinstance(l, App) and isinstance(r, App):
        if l.op != r.op:
            return
        yield from _solve_assoc_blocks(l, r, rest, sigma, counter, th, ad)
        return

    if isinstance(l, Var) or isinstance(r, Var):
        yield from _bind_var(l, r, rest, sigma, counter, th, ad)
        return

    if l.op != r.op or len(l.args) != len(r.args):
        return
    if th.is_comm(l.op):
        (a1, a2), (b1, b2) = l.args, r.args
        yield from _solve([(a1, b1), (a2, b2)] + rest, sigma, counter, th, ad)
        yield from _solve([(a1, b2), (a2, b1)] + rest, sigma, counter, th, ad)
        return
    yield from _solve(list(zip(l.args, r.args)) + rest, sigma, counter, th, ad)


def _occurs(v: Var, t: Term) -> bool:
    if isinstance(t, Var):
        return t == v
    return any(_occurs(v, a) for a in t.args)


def _bind_var(l, r, rest, sigma, counter, th, ad):
    graph = th.sort_graph
    if isinstance(l, Var) and isinstance(r, Var):
        if not graph.same_kind(l.sort, r.sort):
            return
        if graph.leq(r.sort, l.sort):
            yield from _solve(rest, sigma.bind(l, r, th), counter, th, ad)
        elif graph.leq(l.sort, r.sort):
            yield from _solve(rest, sigma.bind(r, l, th), counter, th, ad)
        else:
            # incomparable sorts: meet at each maximal common lower bound
            kind = graph.kind_of(l.sort)
            lower = [s for s in graph.sorts_in_kind(kind)
                     if graph.leq(s, l.sort) and graph.leq(s, r.sort)]
            maximal = [s for s in lower
                       if not any(t != s and graph.leq(s, t) for t in lower)]
            for s in maximal:
                z = fresh_var("unif", s, counter)
                s2 = sigma.bind(l, z, th).bind(r, z, th)
                yield from _solve(rest, s2, counter + 1, th, ad)
        return
    v, t = (l, r) if isinstance(l, Var) else (r, l)
    if _occurs(v, t):
        return
    yield from _solve(rest, sigma.bind(v, t, th), counter, th, ad)


def _solve_assoc_blocks(l, r, rest, sigma, counter, th, ad):
    """Bounded assoc-only unification: pair the shorter side's arguments
    with contiguous blocks of the longer side. Complete only for matching;
    used for narrowing-redex detection."""
    if len(l.args) > len(r.args):
        l, r = r, l
    short, long_ = list(l.args), list(r.args)
    op = l.op

    def splits(k, args):
        if k == 1:
            yield [args]
            return
        for i in range(1, len(args) - k + 2):
            for tail in splits(k - 1, args[i:]):
                yield [args[:i]] + tail

    for blocks in splits(len(short), long_):
        new_pairs = []
        for p, block in zip(short, blocks):
            t = block[0] if len(block) == 1 else canonical(App(op, tuple(block)), th)
            new_pairs.append((p, t))
        yield from _solve(new_pairs + rest, sigma, counter, th, ad)


def _solve_ac(op, l, r, rest, sigma, counter, th, ad):
    ident = th.identity_of(op)
    acu = ident is not None
    left = Counter(_ac_args(l, op, ident))
    right = Counter(_ac_args(r, op, ident))
    common = left & right
    left -= common
    right -= common
    if not left and not right:
        yield from _solve(rest, sigma, counter, th, ad)
        return
    slots = sorted(set(left) | set(right), key=term_key)
    coeff = tuple(left[s] - right[s] for s in slots)
    alien = [not isinstance(s, Var) for s in slots]
    if not acu:
        # a lone surplus on one side can never vanish without an identity
        if all(c >= 0 for c in coeff) or all(c <= 0 for c in coeff):
            return
    basis = solve_dioph(DiophSystem([coeff]))
    if len(basis) > _BASIS_LIMIT:
        raise ResourceLimit(
            f"AC unification basis of size {len(basis)} exceeds the supported bound")
    kind = th.sort_graph.kind_of(th.decls(op)[0].range_sort)
    n = len(slots)

    def emit(chosen):
        totals = [sum(v[i] for v in chosen) for i in range(n)]
        for i in range(n):
            if alien[i] and totals[i] != 1:
                return
            if not alien[i] and totals[i] == 0 and not acu:
                return
        atoms = []
        cnt = counter
        for _v in chosen:
            atoms.append(fresh_var("unif", kind, cnt))
            cnt += 1
        sig = sigma
        constraints = []
        ok = True
        for i, s in enumerate(slots):
            content = []
            for v, z in zip(chosen, atoms):
                content.extend([z] * v[i])
            if alien[i]:
                constraints.append((content[0], s))
            else:
                t = _join_ac(op, sorted(content, key=term_key), ident, th)
                if _occurs(s, t):
                    ok = False
                    break
                sig = sig.bind(s, t, th)
        if ok:
            yield from _solve(constraints + rest, sig, cnt, th, ad)

    def subsets(i, chosen, totals):
        if i == len(basis):
            yield from emit(chosen)
            return
        yield from subsets(i + 1, chosen, totals)
        v = basis[i]
        new_totals = [a + b for a, b in zip(totals, v)]
        if all(not alien[j] or new_totals[j] <= 1 for j in range(n)):
            yield from subsets(i + 1, chosen + [v], new_totals)

    yield from subsets(0, [], [0] * n)


# ---------------------------------------------------------------------------
# Sort refinement of kind-level fresh atoms

def _refine_sorts(sigma: Subst, th, fresh_start: int) -> list[Subst]:
    """Lower kind-level fresh atoms to maximal proper sorts that make every
    binding well sorted; drop the solution when none exists."""
    graph = th.sort_graph
    items = sigma.items()
    atoms = []
    seen = set()
    for _v, t in items:
        for u in vars_of(t):
            if (u not in seen and u.var_class == "unif"
                    and u.sort.startswith("[")
                    and int(u.name[1:]) >= fresh_start
                    and u not in sigma):
                seen.add(u)
                atoms.append(u)
    atoms.sort(key=term_key)

    def valid(bindings) -> bool:
        return all(_sort_fits(t, v.sort, th) for v, t in bindings)

    if not atoms:
        return [sigma] if valid(items) else []

    # singleton bindings pin an atom's sort from above; enumerate only below
    bounds = {a: [a.sort] for a in atoms}
    for v, t in items:
        if isinstance(t, Var) and t in bounds:
            bounds[t].append(v.sort)
    choice_lists = []
    for a in atoms:
        opts = [s for s in [a.sort] + sorted(graph.sorts_in_kind(a.sort),
                                             key=lambda s: (-_depth(graph, s), s))
                if all(graph.leq(s, b) or s == b for b in bounds[a])]
        if not opts:
            return []
        choice_lists.append(opts)

    # only bindings that mention a refinement atom need re-checking
    atom_set = set(atoms)
    fixed, floating = [], []
    for v, t in items:
        if any(u in atom_set for u in vars_of(t)):
            floating.append((v, t))
        else:
            fixed.append((v, t))
    if not valid(fixed):
        return []

    def instantiate(combo):
        ren = Subst({a: Var(a.name, s) for a, s in zip(atoms, combo) if s != a.sort})
        return [(v, ren.apply(t, th)) for v, t in floating]

    # the pointwise-largest assignment dominates every other one; when it
    # is valid it is the unique maximal choice
    top = tuple(opts[0] for opts in choice_lists)
    top_cand = instantiate(top)
    if valid(top_cand):
        return [Subst(dict(fixed) | dict(top_cand))]

    valid_assignments = []
    for combo in product(*choice_lists):
        cand = instantiate(combo)
        if valid(cand):
            valid_assignments.append((combo, cand))
    if not valid_assignments:
        return []

    def geq(c1, c2):
        return all(graph.leq(b, a) or a == b for a, b in zip(c1, c2))

    out = []
    for combo, cand in valid_assignments:
        if not any(c2 != combo and geq(c2, combo)
                   for c2, _ in valid_assignments):
            out.append(Subst(dict(fixed) | dict(cand)))
    return out


def _depth(graph, sort):
    # position in the subsort chain; used only for deterministic ordering
    return sum(1 for s in graph.sorts if graph.leq(s, sort))


# ---------------------------------------------------------------------------
# Matching (subject side frozen)

def match_pairs(pairs, th) -> list[Subst]:
    """Complete set of matchers sigma with pattern*sigma =Ax subject.

    Subject variables are frozen: only the variables occurring on the
    pattern side are bindable, so a pattern variable may be sent to a
    subject variable without opening the latter."""
    pairs = [(canonical(p, th), canonical(s, th)) for p, s in pairs]
    open_vars = frozenset(v for p, _s in pairs for v in vars_of(p))
    out = []
    seen = set()
    for sigma in _msolve(pairs, Subst(), th, open_vars, _Steps(None)):
        if sigma not in seen:
            seen.add(sigma)
            out.append(sigma)
    out.sort(key=Subst.sort_key)
    return out


def match_term(pattern: Term, subject: Term, th) -> list[Subst]:
    return match_pairs([(pattern, subject)], th)


def matchable(pattern: Term, subject: Term, th) -> bool:
    return match_any([(pattern, subject)], th)


class MatchBudget(Exception):
    """Raised internally when a bounded existence check runs too long."""


class _Steps:
    __slots__ = ("left",)

    def __init__(self, left):
        self.left = left

    def tick(self):
        if self.left is not None:
            self.left -= 1
            if self.left < 0:
                raise MatchBudget


def match_any(pairs, th, budget=None) -> bool:
    """Existence of a simultaneous matcher, with early exit. Pairs with the
    fewest open variables run first so their bindings rigidify the rest.
    With a budget, gives up (raises MatchBudget) after that many search
    steps."""
    pairs = [(canonical(p, th), canonical(s, th)) for p, s in pairs]
    open_vars = frozenset(v for p, _s in pairs for v in vars_of(p))
    pairs.sort(key=lambda ps: (sum(1 for v in vars_of(ps[0]) if v in open_vars),
                               term_size(ps[0])))
    steps = _Steps(budget)
    for _ in _msolve(pairs, Subst(), th, open_vars, steps):
        return True
    return False


def _msolve(pairs, sigma, th, open_, steps):
    if not pairs:
        yield sigma
        return
    p = sigma.apply(pairs[0][0], th)
    s = pairs[0][1]
    rest = pairs[1:]
    yield from _match_one(p, s, rest, sigma, th, open_, steps)


def _match_one(p, s, rest, sigma, th, open_, steps):
    steps.tick()
    if p == s:
        yield from _msolve(rest, sigma, th, open_, steps)
        return
    if isinstance(p, Var):
        if p in open_ and _sort_fits(s, p.sort, th):
            yield from _msolve(rest, sigma.bind(p, s, th), th, open_, steps)
        return
    if isinstance(p, App):
        ident = th.identity_of(p.op)
        if _is_ac(p.op, th):
            if isinstance(s, App) and s.op == p.op:
                subj = list(s.args)
            elif ident is not None:
                subj = _ac_args(s, p.op, ident)
            else:
                return
            yield from _match_ac(p.op, list(p.args), Counter(subj), rest,
                                 sigma, th, open_, steps)
            return
        if isinstance(s, Var):
            return
        if th.is_assoc(p.op):
            if s.op != p.op:
                return
            yield from _match_assoc(p.op, list(p.args), list(s.args), rest,
                                    sigma, th, open_, steps)
            return
        if p.op != s.op or len(p.args) != len(s.args):
            return
        if th.is_comm(p.op):
            (a1, a2), (b1, b2) = p.args, s.args
            yield from _msolve([(a1, b1), (a2, b2)] + rest, sigma, th, open_, steps)
            yield from _msolve([(a1, b2), (a2, b1)] + rest, sigma, th, open_, steps)
            return
        yield from _msolve(list(zip(p.args, s.args)) + rest, sigma, th, open_, steps)


def _contains_open(t, open_):
    if isinstance(t, Var):
        return t in open_
    return any(_contains_open(a, open_) for a in t.args)


def _match_ac(op, pats, subj: Counter, rest, sigma, th, open_, steps):
    ident = th.identity_of(op)
    acu = ident is not None
    # re-apply the substitution: earlier bindings may have made args rigid
    flat = []
    for p in pats:
        flat.extend(_ac_args(sigma.apply(p, th), op, ident))
    steps.tick()
    vars_ = sorted((p for p in flat if isinstance(p, Var) and p in open_),
                   key=term_key)
    rigids = sorted((p for p in flat if not (isinstance(p, Var) and p in open_)),
                    key=term_key)

    # closed arguments match only equal subject elements: consume them
    # multiset-wise in one step
    closed = Counter(p for p in rigids if not _contains_open(p, open_))
    if closed:
        left = subj.copy()
        for t, k in closed.items():
            left[t] -= k
            if left[t] < 0:
                return
        rigids = [p for p in rigids if _contains_open(p, open_)]
        subj = +left

    if rigids:
        p0 = rigids[0]
        remaining = rigids[1:] + vars_
        for s0 in sorted(subj, key=term_key):
            if subj[s0] <= 0:
                continue
            for sig2 in _match_one(p0, s0, [], sigma, th, open_, steps):
                left = subj.copy()
                left[s0] -= 1
                yield from _match_ac(op, remaining, +left, rest, sig2, th,
                                     open_, steps)
        return
    if vars_:
        x = vars_[0]
        m = sum(1 for v in vars_ if v == x)
        remaining = [v for v in vars_ if v != x]
        distinct = sorted(subj, key=term_key)
        counts = [subj[d] for d in distinct]
        if not remaining:
            # the last variable's content is forced
            if any(c % m for c in counts):
                return
            content = []
            for d, c in zip(distinct, counts):
                content.extend([d] * (c // m))
            if not content and not acu:
                return
            t = _join_ac(op, sorted(content, key=term_key), ident, th)
            if _sort_fits(t, x.sort, th):
                yield from _msolve(rest, sigma.bind(x, t, th), th, open_, steps)
            return
        need = len(remaining) if not acu else 0
        total_subj = sum(counts)
        maxima = [c // m for c in counts]
        for combo in product(*(range(mx + 1) for mx in maxima)):
            total = sum(combo)
            if total == 0 and not acu:
                continue
            if total_subj - m * total < need:
                continue
            content = []
            for d, k in zip(distinct, combo):
                content.extend([d] * k)
            t = _join_ac(op, sorted(content, key=term_key), ident, th)
            if not _sort_fits(t, x.sort, th):
                continue
            left = subj.copy()
            for d, k in zip(distinct, combo):
                left[d] -= m * k
            yield from _match_ac(op, remaining, +left, rest,
                                 sigma.bind(x, t, th), th, open_, steps)
        return
    if not +subj:
        yield from _msolve(rest, sigma, th, open_, steps)


def _match_assoc(op, pats, subj: list, rest, sigma, th, open_, steps):
    def go(pi, sj, sig):
        steps.tick()
        if pi == len(pats):
            if sj == len(subj):
                yield from _msolve(rest, sig, th, open_, steps)
            return
        p = sig.apply(pats[pi], th)
        min_rest = len(pats) - pi - 1
        if isinstance(p, App) and p.op == op:
            k = len(p.args)
            if sj + k <= len(subj) - min_rest and list(subj[sj:sj + k]) == list(p.args):
                yield from go(pi + 1, sj + k, sig)
            return
        if isinstance(p, Var) and p in open_:
            for ln in range(1, len(subj) - sj - min_rest + 1):
                block = subj[sj:sj + ln]
                t = block[0] if ln == 1 else canonical(App(op, tuple(block)), th)
                if _sort_fits(t, p.sort, th):
                    yield from go(pi + 1, sj + ln, sig.bind(p, t, th))
            return
        if sj < len(subj):
            for sig2 in _match_one(p, subj[sj], [], sig, th, open_, steps):
                yield from go(pi + 1, sj + 1, sig2)

    yield from go(0, 0, sigma)


def solve_problem(problem: UnifProblem, th, fresh=1) -> list[Subst]:
    if problem.mode == "match":
        return match_pairs(list(problem.pairs), th)
    return unify_pairs(list(problem.pairs), th, fresh)
