"""Folding variant narrowing trees.

A tree is rooted at the renamed, normalized input term. Expanding a node
unifies every non-variable subterm with the renamed-apart left-hand side of
each variant equation, instantiates, normalizes, and keeps the child unless
an already-retained node subsumes it (folding). Subsumption of (t2, s2) by
(t1, s1) holds when one simultaneous Ax-matcher sends t1 to t2 and every
root-variable binding of s1 to the corresponding binding of s2; computed
variant substitutions are kept equationally normalized, which is what makes
folding close the finite-variant theories.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

from .errors import InvalidExpansion
from .rewrite import Position, RewriteTrace, normalize
from .terms import (App, Subst, Term, Var, canonical, fresh_index_of,
                    fresh_var, positions, rename_apart, replace_at, term_size,
                    vars_of)
from .theory import Theory
from .unify import (FOLD_BUDGET_DEFAULT as FOLD_BUDGET, MatchBudget,
                    match_any, match_pairs, unifiable, unify_pairs)
from . import analysis


@dataclass
class EdgeInfo:
    equation: str
    unifier: Subst  # restricted to the variables of the parent term
    position: Position
    trace: RewriteTrace


@dataclass
class VariantNode:
    id: int
    term: Term
    acc_subst: Subst  # over the user's root variables
    fresh_index: int
    parent_id: int | None
    depth: int
    more_flag: bool = False
    edge: EdgeInfo | None = None
    narrowable: bool = False
    expanded: bool = False
    embedded_ancestor: int | None = None
    closed: bool | None = None

    @property
    def tag(self) -> str:
        return f"V{self.id}"


@dataclass
class InputRecord:
    term: Term
    trace: RewriteTrace


@dataclass
class ExpansionReport:
    criterion: str  # exhausted | bound | whistle | timeout
    expanded: list[int] = field(default_factory=list)
    added: list[int] = field(default_factory=list)
    whistles: list[tuple[int, int]] = field(default_factory=list)  # (node, ancestor)


class FoldEvent:
    __slots__ = ("parent_id", "equation", "folded_by")

    def __init__(self, parent_id, equation, folded_by):
        self.parent_id = parent_id
        self.equation = equation
        self.folded_by = folded_by


class VariantTree:
    """One folding-variant-narrowing tree; single-owner, not thread safe."""

    def __init__(self, term: Term, theory: Theory):
        self.theory = theory
        theory.check_term(term)
        self.user_term = canonical(term, theory)
        self.root_vars: list[Var] = vars_of(self.user_term)
        renaming = {v: fresh_var("unif", v.sort, i + 1)
                    for i, v in enumerate(self.root_vars)}
        self.renaming = Subst(renaming)
        renamed = self.renaming.apply(self.user_term, theory)
        root_term, trace = normalize(renamed, theory)
        self.input: InputRecord | None = None
        if len(trace) > 0:
            self.input = InputRecord(renamed, trace)
        self.nodes: dict[int, VariantNode] = {}
        self.order: list[int] = []
        self.levels: dict[int, list[int]] = {}
        self.frontier: deque[int] = deque()
        self.fold_log: list[FoldEvent] = []
        self._sig_index: dict = {}
        self.fresh_counter = max(len(self.root_vars), fresh_index_of(root_term)) + 1
        root = VariantNode(
            id=0,
            term=root_term,
            acc_subst=Subst(renaming),
            fresh_index=max(fresh_index_of(root_term),
                            fresh_index_of(Subst(renaming))),
            parent_id=None,
            depth=0,
        )
        self._attach(root)

    # -- plumbing ---------------------------------------------------------

    def _attach(self, node: VariantNode):
        node.narrowable = self._narrowable(node.term)
        level = self.levels.setdefault(node.depth, [])
        if level:
            self.nodes[level[-1]].more_flag = True
        node.more_flag = False
        level.append(node.id)
        self.nodes[node.id] = node
        self.order.append(node.id)
        if node.narrowable:
            self.frontier.append(node.id)

    def node(self, node_id: int) -> VariantNode:
        if node_id not in self.nodes:
            raise KeyError(f"no node V{node_id}")
        return self.nodes[node_id]

    def branch_terms(self, node: VariantNode) -> list[Term]:
        """Root-to-parent terms of the node's branch."""
        chain = []
        cur = node.parent_id
        while cur is not None:
            n = self.nodes[cur]
            chain.append(n.term)
            cur = n.parent_id
        chain.reverse()
        return chain

    def _narrowable(self, term: Term) -> bool:
        th = self.theory
        base = max(self.fresh_counter, fresh_index_of(term) + 1)
        for path, sub in positions(term):
            if isinstance(sub, Var):
                continue
            for eq in th.variant_eqs:
                (lhs,), _ren, nxt = rename_apart([eq.lhs], th, base)
                if unifiable(sub, lhs, th, fresh=nxt + 1):
                    return True
        return False

    def _candidates(self, term: Term):
        """Narrowing steps of a term: (path, equation, unifier, rhs)."""
        th = self.theory
        base = self.fresh_counter
        for path, sub in positions(term):
            if isinstance(sub, Var):
                continue
            for eq in th.variant_eqs:
                eq_vars = vars_of(eq.lhs)
                ren = Subst({v: fresh_var("variant", v.sort, base + i)
                             for i, v in enumerate(eq_vars)})
                lhs = ren.apply(eq.lhs, th)
                rhs = ren.apply(eq.rhs, th)
                for u in unify_pairs([(sub, lhs)], th, fresh=base + len(eq_vars)):
                    yield path, eq, u, rhs

    # -- folding ----------------------------------------------------------

    def _fold_pattern(self, node: VariantNode):
        """The node's variant as a matching pattern tuple, renamed into the
        internal (!n) namespace so it can never conflate with subject
        variables of another branch. Cached per node, with sizes for a
        cheap pre-filter."""
        pat = getattr(node, "_pattern", None)
        if pat is None:
            raw = [node.term] + [node.acc_subst.get(v, v) for v in self.root_vars]
            renamed, _ren, _nxt = rename_apart(raw, self.theory, 0,
                                               var_class="internal")
            pat = (renamed, [term_size(t) for t in renamed])
            node._pattern = pat
        return pat

    def fold_check(self, term: Term, acc: Subst) -> int | None:
        """Id of a retained node whose variant subsumes (term, acc), if any.

        Subsumption: one simultaneous Ax-matcher over the term pair and all
        root-variable binding pairs; the pattern side lives in a disjoint
        variable namespace so fresh indices reused across branches cannot
        conflate."""
        th = self.theory
        subj = [term] + [acc.get(v, v) for v in self.root_vars]
        # with an identity axiom a pattern variable may vanish, so pattern
        # sizes bound subject sizes only in identity-free theories
        prefilter = not any(d.identity is not None for d in th.ops)
        sizes = [term_size(t) for t in subj]
        for nid in self.order:
            pat, psizes = self._fold_pattern(self.nodes[nid])
            if prefilter and any(a > b for a, b in zip(psizes, sizes)):
                continue
            try:
                if match_any(list(zip(pat, subj)), th, budget=FOLD_BUDGET):
                    return nid
            except MatchBudget:
                # give up on this subsumer; keeping the candidate is sound
                continue
        return None

    # -- expansion ----------------------------------------------------------

    def expand_node(self, node_id: int) -> list[VariantNode]:
        th = self.theory
        node = self.node(node_id)
        if node.expanded or not node.narrowable:
            raise InvalidExpansion(f"node V{node_id} is not expandable")
        node.expanded = True
        try:
            self.frontier.remove(node_id)
        except ValueError:
            pass
        parent_vars = set(vars_of(node.term))
        added = []
        max_used = self.fresh_counter - 1
        for path, eq, unifier, rhs in self._candidates(node.term):
            raw = canonical(replace_at(node.term, path, rhs), th)
            _step_term, trace = normalize(unifier.apply(raw, th), th)
            acc0 = node.acc_subst.compose(unifier, th)
            acc = Subst({v: normalize(acc0.get(v, v), th)[0] for v in self.root_vars})
            # the variant term is recomputed from the root so that
            # normalize(root * acc) equals it by construction, even on
            # theories that are only ground-confluent
            child_term, _ = normalize(acc.apply(self.user_term, th), th)
            # renaming-equivalent candidates collapse before the fold check;
            # the index is tree-global (foldability only grows)
            sig_src = [child_term] + [acc.get(v, v) for v in self.root_vars]
            sig = tuple(rename_apart(sig_src, th, 0, var_class="internal")[0])
            known = self._sig_index.get(sig)
            if known is not None:
                self.fold_log.append(FoldEvent(node_id, eq.label, known))
                continue
            used = max(fresh_index_of(child_term), fresh_index_of(acc),
                       fresh_index_of(unifier))
            max_used = max(max_used, used)
            subsumer = self.fold_check(child_term, acc)
            if subsumer is not None:
                self._sig_index[sig] = subsumer
                self.fold_log.append(FoldEvent(node_id, eq.label, subsumer))
                continue
            child = VariantNode(
                id=len(self.order),
                term=child_term,
                acc_subst=acc,
                fresh_index=max(fresh_index_of(child_term), fresh_index_of(acc)),
                parent_id=node_id,
                depth=node.depth + 1,
                edge=EdgeInfo(eq.label, unifier.restrict(parent_vars),
                              Position(path), trace),
            )
            # the counter must clear the child's indices before its
            # narrowability probe renames equations apart
            self.fresh_counter = max(self.fresh_counter, used + 1)
            self._attach(child)
            self._sig_index[sig] = child.id
            added.append(child)
        self.fresh_counter = max(self.fresh_counter, max_used + 1)
        return added

    def expand_depth(self, k: int, timeout: float | None = None) -> ExpansionReport:
        """Unfold down to the depth-k frontier."""
        report = ExpansionReport("exhausted")
        deadline = time.monotonic() + timeout if timeout else None
        while self.frontier:
            if deadline and time.monotonic() > deadline:
                report.criterion = "timeout"
                return report
            head = self.nodes[self.frontier[0]]
            if head.depth >= k:
                report.criterion = "bound"
                return report
            report.expanded.append(head.id)
            report.added.extend(n.id for n in self.expand_node(head.id))
        return report

    def expand_variants(self, n: int | None, timeout: float | None = None) -> ExpansionReport:
        """Expand until at least n variants exist (None = until exhaustion)."""
        report = ExpansionReport("exhausted")
        deadline = time.monotonic() + timeout if timeout else None
        while self.frontier:
            if n is not None and len(self.order) >= n:
                report.criterion = "bound"
                return report
            if deadline and time.monotonic() > deadline:
                report.criterion = "timeout"
                return report
            head = self.frontier[0]
            report.expanded.append(head)
            report.added.extend(c.id for c in self.expand_node(head))
        return report

    def expand_embedding(self, timeout: float | None = None) -> ExpansionReport:
        """Unfold until the homeomorphic-embedding whistle stops every
        branch that does not end in an unnarrowable leaf.

        A new node whose term embeds a previous term of its branch gets the
        green flag and the earliest such ancestor; the branch stops (the
        node stays out of the frontier) when the embedded ancestor is a
        proper descendant of the root, the root being the most general
        input pattern. Closedness is checked automatically on whistled
        nodes.
        """
        th = self.theory
        report = ExpansionReport("exhausted")
        deadline = time.monotonic() + timeout if timeout else None
        while self.frontier:
            if deadline and time.monotonic() > deadline:
                report.criterion = "timeout"
                return report
            head = self.frontier[0]
            report.expanded.append(head)
            parent = self.nodes[head]
            branch = self.branch_terms(parent) + [parent.term]
            branch_ids = []
            cur = parent
            while cur is not None:
                branch_ids.append(cur.id)
                cur = self.nodes[cur.parent_id] if cur.parent_id is not None else None
            branch_ids.reverse()
            for child in self.expand_node(head):
                report.added.append(child.id)
                hit = analysis.whistle_check(branch, child.term, th)
                if hit is not None:
                    child.embedded_ancestor = branch_ids[hit]
                stop = analysis.whistle_check(branch[1:], child.term, th)
                if stop is not None:
                    report.whistles.append((child.id, branch_ids[stop + 1]))
                    child.closed = analysis.is_closed(
                        child.term, self.nodes[0].term, th).closed
                    if child.narrowable:
                        try:
                            self.frontier.remove(child.id)
                        except ValueError:
                            pass
        if report.whistles:
            report.criterion = "whistle"
        return report

    # -- variant enumeration ----------------------------------------------

    def variants(self):
        """Retained nodes in generation (BFS) order."""
        return [self.nodes[i] for i in self.order]


def init_tree(term: Term, theory: Theory) -> VariantTree:
    return VariantTree(term, theory)


def stream_variants(term: Term, theory: Theory):
    """Incremental variant delivery in generation order; runs forever on
    non-FVP inputs, so callers bound or interrupt it."""
    tree = VariantTree(term, theory)
    i = 0
    while True:
        while i < len(tree.order):
            yield tree.nodes[tree.order[i]]
            i += 1
        if not tree.frontier:
            return
        tree.expand_node(tree.frontier[0])


def get_variants(term: Term, theory: Theory, bound: int | None = None):
    """The `get variants [n]` command: (nodes, tree). Unbounded enumeration
    terminates only for finite-variant inputs."""
    tree = VariantTree(term, theory)
    tree.expand_variants(bound)
    nodes = tree.variants()
    if bound is not None:
        nodes = nodes[:bound]
    return nodes, tree
