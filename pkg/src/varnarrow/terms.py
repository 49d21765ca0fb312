"""Order-sorted terms, canonical forms modulo axioms, and substitutions.

Terms are immutable. The canonical representation flattens arguments of
associative operators into a single variadic node, strips arguments equal to
the operator's identity element, and sorts the argument list of assoc+comm
operators under the fixed total term order. Equality modulo the declared
axioms is then plain structural equality of canonical forms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union


@dataclass(frozen=True, eq=False)
class Var:
    """A sorted variable; `sort` is a sort name or a kind written "[S]"."""

    name: str
    sort: str

    def __post_init__(self):
        object.__setattr__(self, "_h", hash((self.name, self.sort)))

    def __hash__(self):
        return self._h

    def __eq__(self, other):
        if self is other:
            return True
        return (type(other) is Var and self._h == other._h
                and self.name == other.name and self.sort == other.sort)

    @property
    def var_class(self) -> str:
        """"user", "unif" (#n, from built-in unification) or "variant" (%n)."""
        if self.name.startswith("#"):
            return "unif"
        if self.name.startswith("%"):
            return "variant"
        return "user"

    def __str__(self):
        return f"{self.name}:{self.sort}"


@dataclass(frozen=True, eq=False)
class App:
    op: str
    args: tuple["Term", ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "_h", hash((self.op, self.args)))

    def __hash__(self):
        return self._h

    def __eq__(self, other):
        if self is other:
            return True
        return (type(other) is App and self._h == other._h
                and self.op == other.op and self.args == other.args)

    def __str__(self):
        if not self.args:
            return self.op
        return f"{self.op}({', '.join(str(a) for a in self.args)})"


Term = Union[Var, App]


# ---------------------------------------------------------------------------
# Total term order (fixed repo-wide; canonical AC argument order depends on it)

_CLASS_RANK = {"user": 0, "unif": 1, "variant": 2}
_FRESH_NAME = re.compile(r"^[#%](\d+)$")


def _name_key(name: str):
    m = _FRESH_NAME.match(name)
    if m:
        return (0, int(m.group(1)), name)
    return (1, 0, name)


_KEY_CACHE: dict = {}


def term_key(t: Term):
    """Sort key realizing the total order: variables before applications,
    variables by class then name then sort, applications by operator name,
    arity, then argument-wise recursion. Memoized (terms are immutable)."""
    k = _KEY_CACHE.get(t)
    if k is None:
        if isinstance(t, Var):
            k = (0, _CLASS_RANK[t.var_class], _name_key(t.name), t.sort)
        else:
            k = (1, t.op, len(t.args), tuple(term_key(a) for a in t.args))
        _KEY_CACHE[t] = k
    return k


def compare_terms(a: Term, b: Term) -> int:
    ka, kb = term_key(a), term_key(b)
    return (ka > kb) - (ka < kb)


# ---------------------------------------------------------------------------
# Canonical representation

def canonical(t: Term, th) -> Term:
    """Unique representative of t's Ax-equivalence class.

    `th` only needs `is_assoc(op)`, `is_comm(op)` and `identity_of(op)`.
    Idempotent; every engine operation keeps terms in this form. Results
    are memoized on the theory (terms are immutable).
    """
    if isinstance(t, Var):
        return t
    cache = getattr(th, "_canon_cache", None)
    if cache is None:
        cache = {}
        try:
            th._canon_cache = cache
        except AttributeError:
            pass
    hit = cache.get(t)
    if hit is not None:
        return hit
    out = _canonical_uncached(t, th)
    cache[t] = out
    cache[out] = out
    return out


def _canonical_uncached(t: App, th) -> Term:
    args = [canonical(a, th) for a in t.args]
    assoc = th.is_assoc(t.op)
    if assoc:
        flat = []
        for a in args:
            if isinstance(a, App) and a.op == t.op:
                flat.extend(a.args)
            else:
                flat.append(a)
        args = flat
    ident = th.identity_of(t.op)
    if ident is not None:
        args = [a for a in args if a != ident]
        if not args:
            return ident
    if assoc and len(args) == 1:
        return args[0]
    if th.is_comm(t.op):
        args = sorted(args, key=term_key)
    return App(t.op, tuple(args))


def ax_equal(t1: Term, t2: Term, th) -> bool:
    return canonical(t1, th) == canonical(t2, th)


# ---------------------------------------------------------------------------
# Structural helpers

def vars_of(t: Term) -> list[Var]:
    """Variables of t in first-occurrence (preorder) order, without duplicates."""
    out: list[Var] = []
    seen = set()

    def walk(u):
        if isinstance(u, Var):
            if u not in seen:
                seen.add(u)
                out.append(u)
        else:
            for a in u.args:
                walk(a)

    walk(t)
    return out


def positions(t: Term) -> Iterator[tuple[tuple[int, ...], Term]]:
    """All positions of t in preorder, as (path, subterm) pairs."""
    stack = [((), t)]
    while stack:
        path, u = stack.pop(0)
        yield path, u
        if isinstance(u, App):
            stack[0:0] = [(path + (i,), a) for i, a in enumerate(u.args)]


def subterm_at(t: Term, path: tuple[int, ...]) -> Term:
    for i in path:
        t = t.args[i]
    return t


def replace_at(t: Term, path: tuple[int, ...], s: Term) -> Term:
    """Replace the subterm at `path` with s (caller re-canonicalizes)."""
    if not path:
        return s
    i = path[0]
    args = list(t.args)
    args[i] = replace_at(args[i], path[1:], s)
    return App(t.op, tuple(args))


def replace_segment(t: App, indices: tuple[int, ...], s: Term) -> App:
    """Replace the flat-node arguments at `indices` by the single term s."""
    keep = [a for i, a in enumerate(t.args) if i not in set(indices)]
    return App(t.op, tuple(keep + [s]))


def term_size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    return 1 + sum(term_size(a) for a in t.args)


# ---------------------------------------------------------------------------
# Substitutions

class Subst:
    """Immutable finite map from variables to canonical terms."""

    __slots__ = ("_m",)

    def __init__(self, mapping=None):
        self._m = dict(mapping) if mapping else {}

    @classmethod
    def of(cls, *pairs):
        return cls(dict(pairs))

    def get(self, v: Var, default=None):
        return self._m.get(v, default)

    def __contains__(self, v):
        return v in self._m

    def __bool__(self):
        return bool(self._m)

    def __len__(self):
        return len(self._m)

    def __eq__(self, other):
        return isinstance(other, Subst) and self._m == other._m

    def __hash__(self):
        return hash(frozenset(self._m.items()))

    def domain(self) -> set[Var]:
        return set(self._m)

    def items(self):
        """Bindings in deterministic (term order of the variable) order."""
        return sorted(self._m.items(), key=lambda kv: term_key(kv[0]))

    def _touches(self, t: Term) -> bool:
        if isinstance(t, Var):
            return t in self._m
        return any(self._touches(a) for a in t.args)

    def apply(self, t: Term, th) -> Term:
        if isinstance(t, Var):
            return self._m.get(t, t)
        if not self._m or not self._touches(t):
            return t
        return canonical(App(t.op, tuple(self.apply(a, th) for a in t.args)), th)

    def bind(self, v: Var, t: Term, th) -> "Subst":
        """Extend with v -> t, applying the new binding to existing ranges."""
        one = Subst({v: t})
        m = {x: one.apply(u, th) for x, u in self._m.items()}
        m[v] = t
        return Subst(m)

    def compose(self, other: "Subst", th) -> "Subst":
        """sigma = self;other so that sigma(t) == other(self(t))."""
        m = {x: other.apply(u, th) for x, u in self._m.items()}
        for y, u in other._m.items():
            if y not in m:
                m[y] = u
        return Subst(m)

    def restrict(self, keep) -> "Subst":
        keep = set(keep)
        return Subst({x: u for x, u in self._m.items() if x in keep})

    def sort_key(self):
        """Deterministic key for ordering lists of substitutions."""
        return tuple((term_key(v), term_key(t)) for v, t in self.items())

    def __repr__(self):
        inner = ", ".join(f"{v} -> {t}" for v, t in self.items())
        return "{" + inner + "}"


IDENTITY_SUBST = Subst()


# ---------------------------------------------------------------------------
# Fresh variables

_CLASS_PREFIX = {"unif": "#", "variant": "%", "internal": "!"}


def fresh_var(var_class: str, sort: str, counter: int) -> Var:
    """`#n:Sort` (unification) or `%n:Sort` (variant generation); the
    `internal` class (!n) never escapes matching helpers."""
    if counter < 1:
        raise ValueError("fresh-variable counters start at 1")
    return Var(f"{_CLASS_PREFIX[var_class]}{counter}", sort)


def rename_apart(terms, th, base: int, var_class: str = "variant"):
    """Rename every variable of `terms` to a fresh one numbered from base+1,
    preserving sorts. Returns (renamed terms, renaming, next index). Used to
    keep pattern-side variables disjoint from a subject's before matching."""
    seen: list[Var] = []
    have = set()
    for t in terms:
        for v in vars_of(t):
            if v not in have:
                have.add(v)
                seen.append(v)
    ren = Subst({v: fresh_var(var_class, v.sort, base + i + 1)
                 for i, v in enumerate(seen)})
    return [ren.apply(t, th) for t in terms], ren, base + len(seen)


def fresh_index_of(obj) -> int:
    """Largest fresh-variable index (# or %) appearing in a term or Subst."""
    best = 0

    def scan(t):
        nonlocal best
        if isinstance(t, Var):
            m = _FRESH_NAME.match(t.name)
            if m:
                best = max(best, int(m.group(1)))
        else:
            for a in t.args:
                scan(a)

    if isinstance(obj, Subst):
        for v, t in obj.items():
            scan(v)
            scan(t)
    else:
        scan(obj)
    return best
