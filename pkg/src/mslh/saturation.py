"""Ordered resolution with selection, deciding mslH clause sets.

The strategy is a Knuth-Bendix-style ordering (all symbol weights 1, fresh
extraction predicates maximal) with selection of all negative extraction-
predicate literals.  On fragment inputs saturation halts: either with a
refutation proof DAG or with a saturated set that stands for a (possibly
infinite) model.

Refutations can be enumerated fairly by iterative deepening on the term
depth of derived clauses; proofs are self-contained DAGs checkable by an
independent verifier.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .terms import (
    Atom,
    Clause,
    FreshNames,
    Subst,
    Term,
    Var,
    App,
    atom_depth,
    classify,
    compose,
    is_tautology,
    mgu,
    restrict,
    subst_atom,
    subst_clause,
    variant_key,
)


class NotMslhError(ValueError):
    pass


class ResourceExhausted(Exception):
    pass


# ---------------------------------------------------------------------------
# Term and atom ordering (KBO-style: weight, then precedence, then args)


def _weight(x: Atom | Term) -> int:
    if isinstance(x, Var):
        return 1
    return 1 + sum(_weight(a) for a in x.args)


def _var_counts(x: Atom | Term) -> dict[str, int]:
    out: dict[str, int] = {}

    def walk(t: Atom | Term) -> None:
        if isinstance(t, Var):
            out[t.name] = out.get(t.name, 0) + 1
        else:
            for a in t.args:
                walk(a)

    walk(x)
    return out


def _fn_rank(name: str) -> tuple:
    if name.startswith("f_"):
        return (2, name)
    return (1, name)


def _pred_rank(name: str) -> tuple:
    if name.startswith(("s_", "d_")):
        return (3, name)
    if name == "t":
        return (2, name)
    return (1, name)


def term_greater(s: Term, u: Term) -> bool:
    cs, cu = _var_counts(s), _var_counts(u)
    if any(cs.get(v, 0) < n for v, n in cu.items()):
        return False
    ws, wu = _weight(s), _weight(u)
    if ws != wu:
        return ws > wu
    if isinstance(s, Var) or isinstance(u, Var):
        return False
    if s.fn != u.fn:
        return _fn_rank(s.fn) > _fn_rank(u.fn)
    for a, b in zip(s.args, u.args):
        if a == b:
            continue
        return term_greater(a, b)
    return False


def atom_greater(a: Atom, b: Atom) -> bool:
    ca, cb = _var_counts(a), _var_counts(b)
    if any(ca.get(v, 0) < n for v, n in cb.items()):
        return False
    wa, wb = _weight(a), _weight(b)
    if wa != wb:
        return wa > wb
    if a.pred != b.pred:
        return _pred_rank(a.pred) > _pred_rank(b.pred)
    for s, u in zip(a.args, b.args):
        if s == u:
            continue
        return term_greater(s, u)
    return False


def ground_atom_key(a: Atom) -> tuple:
    """Total deterministic key consistent with atom_greater on ground atoms."""
    return (_weight(a), _pred_rank(a.pred), tuple(str(t) for t in a.args), str(a))


# ---------------------------------------------------------------------------
# Proof objects


@dataclass(frozen=True)
class ProofNode:
    rule: str                       # "input" | "resolution" | "factoring"
    conclusion: Clause
    nid: int = field(compare=False, default=-1)
    # resolution
    left: Optional["ProofNode"] = None      # positive premise
    right: Optional["ProofNode"] = None     # negative premise
    sigma_left: Optional[Subst] = None
    sigma_right: Optional[Subst] = None
    pos_index: int = -1             # resolved literal in left.conclusion.pos
    neg_index: int = -1             # resolved literal in right.conclusion.neg
    # factoring
    parent: Optional["ProofNode"] = None
    sigma: Optional[Subst] = None
    merged: tuple[int, int] = (-1, -1)

    def __hash__(self) -> int:
        return id(self)

    def __eq__(self, other: object) -> bool:
        return self is other


@dataclass
class Refutation:
    root: ProofNode
    inputs: list[Clause]
    s_discipline: bool = False

    def nodes(self) -> list[ProofNode]:
        """All distinct nodes of the DAG, parents before children."""
        seen: dict[int, ProofNode] = {}

        def walk(n: ProofNode) -> None:
            if id(n) in seen:
                return
            for p in (n.left, n.right, n.parent):
                if p is not None:
                    walk(p)
            seen[id(n)] = n

        walk(self.root)
        return list(seen.values())

    def depth(self) -> int:
        return max((clause_depth(n.conclusion) for n in self.nodes()), default=0)

    def skeleton(self) -> tuple:
        return _skeleton(self.root)


def _skeleton(n: ProofNode) -> tuple:
    if n.rule == "input":
        return ("in", n.conclusion.cid)
    if n.rule == "resolution":
        return ("res", _skeleton(n.left), _skeleton(n.right), n.pos_index, n.neg_index)
    return ("fct", _skeleton(n.parent), n.merged)


@dataclass
class Saturated:
    clauses: list[Clause]


@dataclass
class ResourceOut:
    reason: str


SaturationResult = Refutation | Saturated | ResourceOut


def clause_depth(c: Clause) -> int:
    return max((atom_depth(a) for a in c.atoms()), default=0)


# ---------------------------------------------------------------------------
# Proof checking


class ProofError(ValueError):
    pass


def check_refutation(r: Refutation) -> None:
    """Re-derive every node conclusion from its parents; raise on mismatch."""
    input_keys = {variant_key(c) for c in r.inputs}
    if not r.root.conclusion.is_empty:
        raise ProofError("root is not the empty clause")
    for n in r.nodes():
        if n.rule == "input":
            if variant_key(n.conclusion) not in input_keys:
                raise ProofError(f"input node not among inputs: {n.conclusion}")
        elif n.rule == "resolution":
            left = subst_clause(n.left.conclusion, n.sigma_left)
            right = subst_clause(n.right.conclusion, n.sigma_right)
            if n.pos_index >= len(left.pos) or n.neg_index >= len(right.neg):
                raise ProofError("resolved literal index out of range")
            if left.pos[n.pos_index] != right.neg[n.neg_index]:
                raise ProofError(
                    f"resolved atoms differ: {left.pos[n.pos_index]} vs "
                    f"{right.neg[n.neg_index]}")
            expect = Clause(
                left.neg + _drop(right.neg, n.neg_index),
                _drop(left.pos, n.pos_index) + right.pos)
            if expect != n.conclusion:
                raise ProofError(f"bad resolvent: {expect} vs {n.conclusion}")
        elif n.rule == "factoring":
            parent = subst_clause(n.parent.conclusion, n.sigma)
            i, j = n.merged
            if i >= len(parent.pos) or j >= len(parent.pos):
                raise ProofError("merged literal index out of range")
            if parent.pos[i] != parent.pos[j]:
                raise ProofError("merged literals differ")
            expect = Clause(parent.neg, _drop(parent.pos, j))
            if expect != n.conclusion:
                raise ProofError(f"bad factor: {expect} vs {n.conclusion}")
        else:
            raise ProofError(f"unknown rule {n.rule}")


def _drop(atoms: tuple[Atom, ...], i: int) -> tuple[Atom, ...]:
    return atoms[:i] + atoms[i + 1:]


# ---------------------------------------------------------------------------
# Saturation proper


@dataclass
class Limits:
    max_clauses: int = 50_000
    max_steps: int = 1_000_000
    max_depth: Optional[int] = None     # cap on derived clause depth


class _Saturation:
    def __init__(self, inputs: list[Clause], limits: Limits,
                 selected_preds: frozenset[str], collect_all: bool):
        self.limits = limits
        self.selected = selected_preds
        self.collect_all = collect_all
        self.inputs = inputs
        self.nodes: list[ProofNode] = []
        self.active: list[ProofNode] = []
        self.passive: list[ProofNode] = []
        self.variants: set[tuple] = set()
        self.refutations: list[ProofNode] = []
        self.steps = 0
        self._removed: set[int] = set()
        for c in inputs:
            self._add(ProofNode("input", c, nid=len(self.nodes)))

    # -- clause admission ---------------------------------------------------

    def _add(self, node: ProofNode) -> None:
        c = node.conclusion
        if c.is_empty:
            self.refutations.append(node)
            return
        if is_tautology(c):
            return
        if self.limits.max_depth is not None and node.rule != "input" \
                and clause_depth(c) > self.limits.max_depth:
            return
        key = variant_key(c)
        if key in self.variants:
            return
        if self._forward_subsumed(c):
            return
        self._backward_subsume(c)
        self.variants.add(key)
        self.nodes.append(node)
        self.passive.append(node)
        if len(self.nodes) > self.limits.max_clauses:
            raise ResourceExhausted("clause limit")

    def _forward_subsumed(self, c: Clause) -> bool:
        return any(subsumes(d.conclusion, c)
                   for d in itertools.chain(self.active, self.passive))

    def _backward_subsume(self, c: Clause) -> None:
        for store in (self.active, self.passive):
            for d in list(store):
                if subsumes(c, d.conclusion):
                    store.remove(d)
                    self._removed.add(id(d))
                    self.variants.discard(variant_key(d.conclusion))

    # -- the loop -----------------------------------------------------------

    def run(self) -> SaturationResult:
        while self.passive:
            given = self.passive.pop(0)
            partners = self.active + [given]
            self.active.append(given)
            for other in partners:
                self._infer(given, other)
                if other is not given:
                    self._infer(other, given)
                if self.refutations and not self.collect_all:
                    return self._refutation(self.refutations[0])
        if self.refutations:
            return self._refutation(self.refutations[0])
        return Saturated([n.conclusion for n in self.active])

    def _refutation(self, root: ProofNode) -> Refutation:
        return Refutation(root, self.inputs, bool(self.selected))

    def all_refutations(self) -> list[Refutation]:
        return [self._refutation(r) for r in self.refutations]

    # -- inference ----------------------------------------------------------

    def _infer(self, pos_premise: ProofNode, neg_premise: ProofNode) -> None:
        """All resolution inferences with the given premise orientation."""
        left, right = pos_premise.conclusion, neg_premise.conclusion
        if not left.pos or not right.neg:
            return
        if self._selection(left):
            return  # a clause with selected literals only resolves on them
        sel = self._selection(right)
        for ip, a in enumerate(left.pos):
            for ineg, b in enumerate(right.neg):
                if a.pred != b.pred:
                    continue
                if sel and ineg not in sel:
                    continue
                self.steps += 1
                if self.steps > self.limits.max_steps:
                    raise ResourceExhausted("inference step limit")
                self._resolve(pos_premise, ip, neg_premise, ineg, bool(sel))

    def _selection(self, c: Clause) -> list[int]:
        return [i for i, a in enumerate(c.neg) if a.pred in self.selected]

    def _resolve(self, ln: ProofNode, ip: int, rn: ProofNode, ineg: int,
                 neg_selected: bool) -> None:
        left, right = ln.conclusion, rn.conclusion
        gen = FreshNames(left.variables() + right.variables())
        rho_l: Subst = {v: Var(gen.fresh("u")) for v in left.variables()}
        rho_r: Subst = {v: Var(gen.fresh("u")) for v in right.variables()}
        a = subst_atom(left.pos[ip], rho_l)
        b = subst_atom(right.neg[ineg], rho_r)
        mu = mgu(a, b)
        if mu is None:
            return
        sl, sr = compose(rho_l, mu), compose(rho_r, mu)
        left_i, right_i = subst_clause(left, sl), subst_clause(right, sr)
        # ordering checks on the instantiated premises
        if not self._strictly_maximal(left_i.pos[ip], left_i):
            return
        if not neg_selected and not self._maximal(right_i.neg[ineg], right_i):
            return
        raw = Clause(left_i.neg + _drop(right_i.neg, ineg),
                     _drop(left_i.pos, ip) + right_i.pos)
        canon: Subst = {v: Var(f"v{i}") for i, v in enumerate(raw.variables())}
        node = ProofNode(
            "resolution", subst_clause(raw, canon), nid=len(self.nodes),
            left=ln, right=rn,
            sigma_left=restrict(compose(sl, canon), left.variables()),
            sigma_right=restrict(compose(sr, canon), right.variables()),
            pos_index=ip, neg_index=ineg)
        self._add(node)

    def _strictly_maximal(self, a: Atom, c: Clause) -> bool:
        seen_self = False
        for x in c.atoms():
            if x == a:
                if seen_self:
                    return False
                seen_self = True
            elif atom_greater(x, a):
                return False
        return True

    def _maximal(self, a: Atom, c: Clause) -> bool:
        return not any(atom_greater(x, a) for x in c.atoms())


def subsumes(c: Clause, d: Clause) -> bool:
    """True iff some instance of ``c`` is a sub-multiset of ``d``."""
    if len(c.neg) > len(d.neg) or len(c.pos) > len(d.pos):
        return False

    def go(pats: list[Atom], targets: tuple[Atom, ...], used: frozenset[int],
           sub: Subst, rest: Optional[tuple[list[Atom], tuple[Atom, ...]]]) -> bool:
        if not pats:
            if rest is None:
                return True
            return go(rest[0], rest[1], frozenset(), sub, None)
        from .terms import match_atom
        p = pats[0]
        for i, t in enumerate(targets):
            if i in used:
                continue
            got = match_atom(subst_atom(p, sub), t)
            if got is None:
                continue
            if go(pats[1:], targets, used | {i}, compose(sub, got), rest):
                return True
        return False

    return go(list(c.neg), d.neg, frozenset(), {}, (list(c.pos), d.pos))


# ---------------------------------------------------------------------------
# Public entry points


def saturate(clauses: list[Clause], limits: Optional[Limits] = None,
             selected_preds: Optional[frozenset[str]] = None) -> SaturationResult:
    """Decide an mslH clause set: Refutation, Saturated, or ResourceOut."""
    flags = classify(clauses)
    if not flags.is_mslh:
        raise NotMslhError(f"input is not in the fragment: {flags}")
    sat = _Saturation(clauses, limits or Limits(),
                      selected_preds or _default_selection(clauses), False)
    try:
        return sat.run()
    except ResourceExhausted as e:
        return ResourceOut(str(e))


def leaf_s_discipline(clauses: list[Clause], limits: Optional[Limits] = None,
                      selected_preds: Optional[frozenset[str]] = None
                      ) -> SaturationResult:
    """Saturation under the leaf-only discipline for extraction predicates.

    Negative extraction literals are selected and positive ones are maximal
    in the ordering, so resolutions on them keep at least one input parent;
    refutations are tagged so core extraction records the resolved pairs.
    """
    result = saturate(clauses, limits, selected_preds or _default_selection(clauses))
    if isinstance(result, Refutation):
        result.s_discipline = True
    return result


def enumerate_refutations(clauses: list[Clause], depth_budget: int,
                          limits: Optional[Limits] = None,
                          selected_preds: Optional[frozenset[str]] = None,
                          s_discipline: bool = False) -> Iterator[Refutation]:
    """Distinct refutations by increasing derived-clause depth bound.

    Iterative deepening: each depth bound saturates to closure, collecting
    every empty-clause derivation; proofs are deduplicated by DAG skeleton
    across rounds.  Raises ResourceExhausted when limits run out.
    """
    flags = classify(clauses)
    if not flags.is_mslh:
        raise NotMslhError(f"input is not in the fragment: {flags}")
    selected = selected_preds or _default_selection(clauses)
    seen: set[tuple] = set()
    for cap in range(depth_budget + 1):
        lim = Limits(**{**(limits or Limits()).__dict__, "max_depth": cap})
        sat = _Saturation(clauses, lim, selected, True)
        sat.run()
        batch = [r for r in sat.all_refutations() if r.skeleton() not in seen]
        batch.sort(key=lambda r: r.depth())
        for r in batch:
            seen.add(r.skeleton())
            r.s_discipline = s_discipline or bool(selected)
            yield r


def _default_selection(clauses: list[Clause]) -> frozenset[str]:
    preds = {a.pred for c in clauses for a in c.atoms()}
    return frozenset(p for p in preds if p.startswith(("s_", "d_")))


# ---------------------------------------------------------------------------
# DOT export


def refutation_to_dot(r: Refutation) -> str:
    lines = ["digraph refutation {", '  node [shape=box, fontname="monospace"];']
    ids = {id(n): i for i, n in enumerate(r.nodes())}
    for n in r.nodes():
        label = str(n.conclusion) if not n.conclusion.is_empty else "[]"
        label = label.replace('"', r"\"")
        lines.append(f'  n{ids[id(n)]} [label="{label}\\n({n.rule})"];')
    for n in r.nodes():
        if n.rule == "resolution":
            for parent, sigma in ((n.left, n.sigma_left), (n.right, n.sigma_right)):
                s = ", ".join(f"{v}:={t}" for v, t in sorted(sigma.items()))
                s = s.replace('"', r"\"")
                lines.append(
                    f'  n{ids[id(parent)]} -> n{ids[id(n)]} [label="{s}"];')
        elif n.rule == "factoring":
            lines.append(f"  n{ids[id(n.parent)]} -> n{ids[id(n)]};")
    lines.append("}")
    return "\n".join(lines)
