"""Order-sorted signatures: sort graphs, operator declarations, theories.

A Theory bundles the sort graph, the operator declarations (with their
assoc/comm/identity axioms) and the (variant) equations of one parsed
functional module. All values are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SignatureError
from .terms import App, Subst, Term, Var, canonical, vars_of


def is_kind(sort: str) -> bool:
    return sort.startswith("[") and sort.endswith("]")


class SortGraph:
    """Declared sorts plus the direct subsort pairs, with the derived
    partial order and the partition of sorts into kinds."""

    def __init__(self, sorts, subsorts=()):
        self.sorts: tuple[str, ...] = tuple(sorts)
        self.subsorts: frozenset[tuple[str, str]] = frozenset(subsorts)
        for lo, hi in self.subsorts:
            for s in (lo, hi):
                if s not in self.sorts:
                    raise SignatureError(f"subsort declaration uses undeclared sort {s}")
        self._leq = self._closure()
        self._kind = self._kinds()

    def _closure(self):
        leq = {(s, s) for s in self.sorts}
        leq |= self.subsorts
        changed = True
        while changed:
            changed = False
            for a, b in list(leq):
                for c, d in list(leq):
                    if b == c and (a, d) not in leq:
                        leq.add((a, d))
                        changed = True
        for a, b in leq:
            if a != b and (b, a) in leq:
                raise SignatureError(f"subsort cycle through {a} and {b}")
        return leq

    def _kinds(self):
        # connected components of the subsort relation; the kind of a
        # component is written "[T]" with T its first-declared maximal sort
        parent = {s: s for s in self.sorts}

        def find(s):
            while parent[s] != s:
                parent[s] = parent[parent[s]]
                s = parent[s]
            return s

        for a, b in self.subsorts:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        comps: dict[str, list[str]] = {}
        for s in self.sorts:
            comps.setdefault(find(s), []).append(s)
        kind_of = {}
        for members in comps.values():
            maximal = [s for s in members
                       if not any(s != t and (s, t) in self._leq for t in members)]
            rep = min(maximal, key=self.sorts.index)
            for s in members:
                kind_of[s] = f"[{rep}]"
        return kind_of

    def leq(self, a: str, b: str) -> bool:
        """a <= b where either side may be a kind; a kind sits above every
        sort of its component and is comparable only with itself."""
        if is_kind(b):
            return self.kind_of(a) == b
        if is_kind(a):
            return False
        return (a, b) in self._leq

    def kind_of(self, sort: str) -> str:
        if is_kind(sort):
            return sort
        if sort not in self._kind:
            raise SignatureError(f"unknown sort {sort}")
        return self._kind[sort]

    def same_kind(self, a: str, b: str) -> bool:
        return self.kind_of(a) == self.kind_of(b)

    def sorts_in_kind(self, kind: str) -> list[str]:
        return [s for s in self.sorts if self._kind[s] == kind]

    def has(self, sort: str) -> bool:
        if is_kind(sort):
            return any(k == sort for k in self._kind.values())
        return sort in self._kind


@dataclass(frozen=True)
class OpDecl:
    name: str
    arg_sorts: tuple[str, ...]
    range_sort: str
    assoc: bool = False
    comm: bool = False
    identity: Term | None = None

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)


@dataclass(frozen=True)
class Equation:
    label: str
    lhs: Term
    rhs: Term
    is_variant: bool = False


@dataclass
class Theory:
    name: str
    sort_graph: SortGraph
    ops: list[OpDecl]
    var_table: dict[str, str] = field(default_factory=dict)
    eqs: list[Equation] = field(default_factory=list)

    def __post_init__(self):
        self._by_name: dict[str, list[OpDecl]] = {}
        for d in self.ops:
            self._by_name.setdefault(d.name, []).append(d)
        self._axioms: dict[str, tuple[bool, bool, Term | None]] = {}
        for nm, decls in self._by_name.items():
            first = decls[0]
            for d in decls[1:]:
                if (d.assoc, d.comm, d.identity) != (first.assoc, first.comm, first.identity):
                    raise SignatureError(f"overloaded declarations of {nm} disagree on axioms")
                if d.arity != first.arity:
                    raise SignatureError(f"overloaded declarations of {nm} disagree on arity")
                for i, (a, b) in enumerate(zip(d.arg_sorts, first.arg_sorts)):
                    if not self.sort_graph.same_kind(a, b):
                        raise SignatureError(f"overloads of {nm} differ in kind at position {i}")
                if not self.sort_graph.same_kind(d.range_sort, first.range_sort):
                    raise SignatureError(f"overloads of {nm} differ in range kind")
            self._axioms[nm] = (first.assoc, first.comm, None)
        # identity terms are canonicalized once axioms are known
        for nm, decls in self._by_name.items():
            first = decls[0]
            if first.identity is not None:
                ident = canonical(first.identity, self)
                a, c, _ = self._axioms[nm]
                self._axioms[nm] = (a, c, ident)
        self._validate()

    # -- axiom accessors -------------------------------------------------

    def is_assoc(self, op: str) -> bool:
        ax = self._axioms.get(op)
        return ax[0] if ax else False

    def is_comm(self, op: str) -> bool:
        ax = self._axioms.get(op)
        return ax[1] if ax else False

    def identity_of(self, op: str) -> Term | None:
        ax = self._axioms.get(op)
        return ax[2] if ax else None

    def decls(self, op: str) -> list[OpDecl]:
        return self._by_name.get(op, [])

    def has_op(self, op: str) -> bool:
        return op in self._by_name

    @property
    def variant_eqs(self) -> list[Equation]:
        return [e for e in self.eqs if e.is_variant]

    # -- validation ------------------------------------------------------

    def _validate(self):
        for d in self.ops:
            for s in d.arg_sorts + (d.range_sort,):
                if not (is_kind(s) and self.sort_graph.has(s)) and s not in self.sort_graph.sorts:
                    raise SignatureError(f"operator {d.name} uses undeclared sort {s}")
            if d.assoc:
                if d.arity != 2:
                    raise SignatureError(f"assoc operator {d.name} must be binary")
                k = self.sort_graph.kind_of(d.range_sort)
                for s in d.arg_sorts:
                    if self.sort_graph.kind_of(s) != k:
                        raise SignatureError(f"assoc operator {d.name} mixes kinds")
            if d.identity is not None:
                if vars_of(d.identity):
                    raise SignatureError(f"identity of {d.name} must be ground")
                ls = self.least_sort(d.identity)
                if self.sort_graph.kind_of(ls) != self.sort_graph.kind_of(d.range_sort):
                    raise SignatureError(f"identity of {d.name} lies outside its kind")
        for e in self.eqs:
            if isinstance(e.lhs, Var):
                raise SignatureError(f"equation [{e.label}] has a bare variable left-hand side")
            lv = set(vars_of(e.lhs))
            for v in vars_of(e.rhs):
                if v not in lv:
                    raise SignatureError(
                        f"equation [{e.label}] uses {v} on the right only")

    # -- sorts of terms ---------------------------------------------------

    def check_term(self, t: Term):
        """Kind-level well-formedness; raises SignatureError."""
        if isinstance(t, Var):
            if not self.sort_graph.has(t.sort):
                raise SignatureError(f"variable {t} has unknown sort {t.sort}")
            return
        decls = self.decls(t.op)
        if not decls:
            raise SignatureError(f"unknown operator {t.op}")
        d = decls[0]
        n = len(t.args)
        if n != d.arity and not (d.assoc and n >= 2):
            raise SignatureError(f"operator {t.op} applied to {n} arguments")
        for a in t.args:
            self.check_term(a)

    def least_sort(self, t: Term) -> str:
        """Least sort of t under the subsort order, or its kind when no
        proper sort applies (identity stripping happens first). Memoized:
        terms are immutable and theories never change."""
        t = canonical(t, self)
        cache = getattr(self, "_ls_cache", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_ls_cache", cache)
        hit = cache.get(t)
        if hit is None:
            hit = self._ls(t)
            cache[t] = hit
        return hit

    def _ls(self, t: Term) -> str:
        if isinstance(t, Var):
            return t.sort
        decls = self.decls(t.op)
        if not decls:
            raise SignatureError(f"unknown operator {t.op}")
        if not t.args:
            return self._min_sort([d.range_sort for d in decls if d.arity == 0],
                                  decls[0].range_sort)
        arg_sorts = [self.least_sort(a) for a in t.args]
        if len(arg_sorts) > 2 and decls[0].assoc:
            cur = arg_sorts[0]
            for nxt in arg_sorts[1:]:
                cur = self._binary_sort(t.op, cur, nxt)
            return cur
        if len(arg_sorts) == 2:
            return self._binary_sort(t.op, arg_sorts[0], arg_sorts[1])
        return self._app_sort(t.op, arg_sorts)

    def _binary_sort(self, op, s1, s2):
        orders = [(s1, s2)]
        if self.is_comm(op):
            orders.append((s2, s1))
        candidates = []
        for a, b in orders:
            candidates.extend(self._match_decls(op, [a, b]))
        return self._min_sort(candidates, self.decls(op)[0].range_sort)

    def _app_sort(self, op, arg_sorts):
        return self._min_sort(self._match_decls(op, arg_sorts),
                              self.decls(op)[0].range_sort)

    def _match_decls(self, op, arg_sorts):
        out = []
        for d in self.decls(op):
            if d.arity != len(arg_sorts):
                continue
            if all(self.sort_graph.leq(s, ds) for s, ds in zip(arg_sorts, d.arg_sorts)):
                out.append(d.range_sort)
        return out

    def _min_sort(self, candidates, fallback_range):
        if not candidates:
            return self.sort_graph.kind_of(fallback_range)
        minimal = [s for s in candidates
                   if not any(t != s and self.sort_graph.leq(t, s) for t in candidates)]
        # preregular signatures have a unique minimum; fall back to the kind
        first = minimal[0]
        if all(s == first for s in minimal):
            return first
        return self.sort_graph.kind_of(fallback_range)
