"""Over-approximation of clause sets into the decidable mslH fragment.

Five clause transformations are applied in a fixed preference order:

* pairing     -- non-Horn clauses with more than two positive literals are
                 normalized to exactly two via fresh definition predicates
* monadic     -- n-ary atoms ``p(t1..tn)`` become ``t(f_p(t1..tn))``
* horn        -- a two-positive clause keeps one positive literal
* linear      -- a repeated variable in the positive literal is split
* shallow     -- a nested subterm of the positive literal is extracted into a
                 fresh unary predicate

Every application is recorded as a step with ancestor/produced clause ids;
the resulting trace is the spine used by lifting and refinement.  Linear runs
before shallow so that a repeated variable under an extraction survives as an
explicit split step: lifting can then fail (and refinement fire) on the split
variable rather than inside an extraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .terms import (
    App,
    Atom,
    Clause,
    ClassifyFlags,
    FreshNames,
    Position,
    Signature,
    Subst,
    Term,
    Var,
    atom_vars,
    classify,
    clause,
    depth,
    subst_atom,
    subst_clause,
    replace_at,
    term_at,
    term_positions,
    term_vars,
    var_positions,
)


class RuleNotApplicable(ValueError):
    pass


PROJECTION_PRED = "t"


# ---------------------------------------------------------------------------
# Steps


@dataclass(frozen=True)
class PairingStep:
    kind = "pairing"
    ancestor: int
    produced: tuple[int, int]
    pred: str                      # fresh definition predicate d_k
    pair_vars: tuple[str, ...]     # variables threaded through d_k


@dataclass(frozen=True)
class MonadicStep:
    kind = "monadic"
    ancestor: int
    produced: tuple[int]
    pred: str                      # the projected predicate
    fn: str                        # its projection function f_pred


@dataclass(frozen=True)
class HornStep:
    kind = "horn"
    ancestor: int
    produced: tuple[int]
    keep_index: int                # positive literal kept (0-based)


@dataclass(frozen=True)
class LinearStep:
    kind = "linear"
    ancestor: int
    produced: tuple[int]
    var: str
    fresh_var: str
    p: Position                    # a remaining occurrence of var
    q: Position                    # the occurrence replaced by fresh_var
    gamma_duplicated: bool


@dataclass(frozen=True)
class ShallowStep:
    kind = "shallow"
    ancestor: int
    produced: tuple[int, int]      # (clause with the hole, defining clause)
    pred: str                      # fresh unary predicate s_k
    fresh_var: str
    pos: Position                  # where the subterm was extracted
    gamma1: tuple[int, ...]        # indices of neg atoms kept with the hole
    gamma2: tuple[int, ...]        # indices of neg atoms kept with the subterm


ApproxStep = PairingStep | MonadicStep | HornStep | LinearStep | ShallowStep

_KIND_ORDER = {"pairing": 0, "monadic": 1, "horn": 2, "linear": 3, "shallow": 4}


@dataclass
class ApproxTrace:
    initial: list[Clause]
    steps: list[ApproxStep] = field(default_factory=list)
    final: list[Clause] = field(default_factory=list)
    signature: Signature = field(default_factory=Signature)

    def s_predicates(self) -> set[str]:
        out = {s.pred for s in self.steps if isinstance(s, ShallowStep)}
        out |= {s.pred for s in self.steps if isinstance(s, PairingStep)}
        return out

    def projections(self) -> dict[str, str]:
        return {s.pred: s.fn for s in self.steps if isinstance(s, MonadicStep)}

    def resolve_root(self, cid: int) -> int:
        """Follow ancestor links back to a clause id of the initial set."""
        parents = {}
        for s in self.steps:
            for p in s.produced:
                parents[p] = s.ancestor
        while cid in parents:
            cid = parents[cid]
        return cid

    def sets(self) -> list[list[Clause]]:
        """Clause-set snapshots: sets()[k] is the set before step k."""
        snaps = [list(self.initial)]
        cur = list(self.initial)
        for s in self.steps:
            cur = apply_step(cur, s)
            snaps.append(list(cur))
        return snaps

    def clause_by_id(self, cid: int) -> Clause:
        for snap in (self.initial, self.final):
            for c in snap:
                if c.cid == cid:
                    return c
        for s in self.sets():
            for c in s:
                if c.cid == cid:
                    return c
        raise KeyError(f"no clause with id {cid} in trace")


# ---------------------------------------------------------------------------
# Single-step constructions (shared by the driver and trace replay)


def _replace_clause(clauses: list[Clause], ancestor: int,
                    produced: list[Clause]) -> list[Clause]:
    out = []
    found = False
    for c in clauses:
        if c.cid == ancestor:
            found = True
            continue
        out.append(c)
    if not found:
        raise RuleNotApplicable(f"ancestor clause {ancestor} not in set")
    out.extend(produced)
    return out


def build_pairing(c: Clause, pred: str, pair_vars: tuple[str, ...],
                  ids: tuple[int, int]) -> tuple[Clause, Clause]:
    if len(c.pos) <= 2:
        raise RuleNotApplicable("pairing needs more than two positive literals")
    e1, e2, rest = c.pos[0], c.pos[1], c.pos[2:]
    d_atom = Atom(pred, tuple(Var(v) for v in pair_vars))
    c1 = Clause(c.neg, (d_atom,) + rest, ids[0])
    c2 = Clause((d_atom,), (e1, e2), ids[1])
    return c1, c2


def build_monadic(c: Clause, pred: str, fn: str, cid: int) -> Clause:
    def proj(a: Atom) -> Atom:
        if a.pred == pred:
            return Atom(PROJECTION_PRED, (App(fn, a.args),))
        return a

    if not any(a.pred == pred for a in c.atoms()):
        raise RuleNotApplicable(f"clause has no {pred} atom")
    return Clause(tuple(proj(a) for a in c.neg), tuple(proj(a) for a in c.pos), cid)


def build_horn(c: Clause, keep_index: int, cid: int) -> Clause:
    if c.is_horn:
        raise RuleNotApplicable("clause is already Horn")
    if not 0 <= keep_index < len(c.pos):
        raise RuleNotApplicable(f"no positive literal at index {keep_index}")
    return Clause(c.neg, (c.pos[keep_index],), cid)


def build_linear(c: Clause, x: str, fresh_var: str, p: Position, q: Position,
                 cid: int) -> tuple[Clause, bool]:
    if len(c.pos) != 1:
        raise RuleNotApplicable("linear split needs exactly one positive literal")
    e = c.pos[0]
    occ = var_positions(e, x)
    if p == q or p not in occ or q not in occ:
        raise RuleNotApplicable(f"positions {p}, {q} are not distinct occurrences of {x}")
    new_e = replace_at(e, q, Var(fresh_var))
    assert isinstance(new_e, Atom)
    if x in {v for a in c.neg for v in atom_vars(a)}:
        dup = tuple(subst_atom(a, {x: Var(fresh_var)}) for a in c.neg)
        neg = dup + c.neg
        duplicated = True
    else:
        neg = c.neg
        duplicated = False
    return Clause(neg, (new_e,), cid), duplicated


def build_shallow(c: Clause, pos: Position, pred: str, fresh_var: str,
                  gamma1: tuple[int, ...], gamma2: tuple[int, ...],
                  ids: tuple[int, int]) -> tuple[Clause, Clause]:
    if len(c.pos) != 1:
        raise RuleNotApplicable("extraction needs exactly one positive literal")
    if len(pos) < 1:
        raise RuleNotApplicable("cannot extract at the atom itself")
    e = c.pos[0]
    s = term_at(e, pos)
    if isinstance(s, Var):
        raise RuleNotApplicable("cannot extract a variable")
    if set(gamma1) | set(gamma2) != set(range(len(c.neg))):
        raise RuleNotApplicable("split does not cover the negative literals")
    hole = replace_at(e, pos, Var(fresh_var))
    assert isinstance(hole, Atom)
    g1 = tuple(c.neg[i] for i in gamma1)
    g2 = tuple(c.neg[i] for i in gamma2)
    c1 = Clause((Atom(pred, (Var(fresh_var),)),) + g1, (hole,), ids[0])
    c2 = Clause(g2, (Atom(pred, (s,)),), ids[1])
    return c1, c2


def apply_step(clauses: list[Clause], step: ApproxStep) -> list[Clause]:
    """Replay one recorded step on a clause set."""
    anc = next(c for c in clauses if c.cid == step.ancestor)
    if isinstance(step, PairingStep):
        produced = list(build_pairing(anc, step.pred, step.pair_vars, step.produced))
    elif isinstance(step, MonadicStep):
        produced = [build_monadic(anc, step.pred, step.fn, step.produced[0])]
    elif isinstance(step, HornStep):
        produced = [build_horn(anc, step.keep_index, step.produced[0])]
    elif isinstance(step, LinearStep):
        c, _ = build_linear(anc, step.var, step.fresh_var, step.p, step.q,
                            step.produced[0])
        produced = [c]
    elif isinstance(step, ShallowStep):
        produced = list(build_shallow(anc, step.pos, step.pred, step.fresh_var,
                                      step.gamma1, step.gamma2, step.produced))
    else:  # pragma: no cover
        raise TypeError(step)
    return _replace_clause(clauses, step.ancestor, produced)


def replay(trace: ApproxTrace) -> list[Clause]:
    cur = list(trace.initial)
    for s in trace.steps:
        cur = apply_step(cur, s)
    return cur


# ---------------------------------------------------------------------------
# Public single-rule operations


def monadic_step(clauses: list[Clause], pred: str,
                 fn: Optional[str] = None) -> tuple[list[Clause], list[MonadicStep]]:
    """Replace every ``pred`` atom by its projection, one step per clause."""
    arities = {len(a.args) for c in clauses for a in c.atoms() if a.pred == pred}
    if not arities:
        raise RuleNotApplicable(f"predicate {pred} does not occur")
    if max(arities) <= 1:
        raise RuleNotApplicable(f"predicate {pred} is monadic")
    fn = fn or f"f_{pred}"
    next_id = _next_id(clauses)
    out, steps = list(clauses), []
    for c in list(out):
        if any(a.pred == pred for a in c.atoms()):
            new = build_monadic(c, pred, fn, next_id)
            out = _replace_clause(out, c.cid, [new])
            steps.append(MonadicStep(c.cid, (next_id,), pred, fn))
            next_id += 1
    return out, steps


def horn_step(clauses: list[Clause], c: Clause,
              keep_index: int = 0) -> tuple[list[Clause], HornStep]:
    next_id = _next_id(clauses)
    new = build_horn(c, keep_index, next_id)
    return (_replace_clause(clauses, c.cid, [new]),
            HornStep(c.cid, (next_id,), keep_index))


def linear_step(clauses: list[Clause], c: Clause, x: str, p: Position,
                q: Position, fresh_var: Optional[str] = None
                ) -> tuple[list[Clause], LinearStep]:
    gen = FreshNames(_all_vars(clauses))
    fresh = fresh_var or gen.fresh(x)
    next_id = _next_id(clauses)
    new, duplicated = build_linear(c, x, fresh, p, q, next_id)
    step = LinearStep(c.cid, (next_id,), x, fresh, p, q, duplicated)
    return _replace_clause(clauses, c.cid, [new]), step


def shallow_step(clauses: list[Clause], c: Clause, pos: Position,
                 split: Optional[tuple[tuple[int, ...], tuple[int, ...]]] = None,
                 pred: Optional[str] = None, fresh_var: Optional[str] = None
                 ) -> tuple[list[Clause], ShallowStep]:
    gen_v = FreshNames(_all_vars(clauses))
    gen_s = FreshNames(_all_symbols(clauses))
    spred = pred or gen_s.fresh("s_")
    fresh = fresh_var or gen_v.fresh("y")
    if split is None:
        split = default_split(c, pos, fresh)
    next_id = _next_id(clauses)
    c1, c2 = build_shallow(c, pos, spred, fresh, split[0], split[1],
                           (next_id, next_id + 1))
    step = ShallowStep(c.cid, (next_id, next_id + 1), spred, fresh, pos,
                       split[0], split[1])
    return _replace_clause(clauses, c.cid, [c1, c2]), step


def default_split(c: Clause, pos: Position, fresh_var: str
                  ) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Greedy split of the negative literals around an extraction.

    An atom follows the extracted subterm when it shares variables with it,
    and stays with the literal-with-hole when it shares variables there; atoms
    sharing with both go to both sides, atoms sharing with neither stay left.
    The goal is to keep ``vars(gamma2, s) & vars(gamma1, e[hole])`` small.
    """
    e = c.pos[0]
    s = term_at(e, pos)
    s_vars = set(term_vars(s))
    hole = replace_at(e, pos, Var(fresh_var))
    assert isinstance(hole, Atom)
    e_vars = set(atom_vars(hole)) - {fresh_var}
    g1, g2 = [], []
    for i, atom in enumerate(c.neg):
        vs = set(atom_vars(atom))
        to_2 = bool(vs & s_vars)
        to_1 = bool(vs & e_vars) or not to_2
        if to_1:
            g1.append(i)
        if to_2:
            g2.append(i)
    return tuple(g1), tuple(g2)


# ---------------------------------------------------------------------------
# The full transformation


def approximate(clauses: Iterable[Clause],
                signature: Optional[Signature] = None
                ) -> tuple[list[Clause], ApproxTrace]:
    """Transform a clause set into the mslH fragment, recording the trace."""
    work = _with_ids(list(clauses))
    sig = (signature or Signature.of(work, reserved=True)).copy()
    trace = ApproxTrace(initial=list(work), signature=sig)
    gen_sym = FreshNames(list(sig.functions) + list(sig.predicates))
    gen_var = FreshNames(_all_vars(work))
    next_id = _next_id(work)

    def record(step: ApproxStep, new_clauses: list[Clause]) -> None:
        nonlocal work
        work = _replace_clause(work, step.ancestor, new_clauses)
        trace.steps.append(step)

    # pairing: reduce >2 positive literals to exactly two
    while True:
        c = next((c for c in work if len(c.pos) > 2), None)
        if c is None:
            break
        pair_vars = _occurrence_vars(c.pos[0], c.pos[1])
        dpred = gen_sym.fresh("d_")
        sig.add_predicate(dpred, len(pair_vars), reserved=True)
        c1, c2 = build_pairing(c, dpred, pair_vars, (next_id, next_id + 1))
        record(PairingStep(c.cid, (next_id, next_id + 1), dpred, pair_vars), [c1, c2])
        next_id += 2

    # monadic: project every n-ary predicate, in first-occurrence order
    for pred in _nonmonadic_preds(work):
        fn = f"f_{pred}"
        sig.add_function(fn, sig.predicates[pred], reserved=True)
        sig.add_predicate(PROJECTION_PRED, 1, reserved=True)
        for c in list(work):
            if any(a.pred == pred for a in c.atoms()):
                new = build_monadic(c, pred, fn, next_id)
                record(MonadicStep(c.cid, (next_id,), pred, fn), [new])
                next_id += 1

    # horn: keep the first positive literal of each two-positive clause
    while True:
        c = next((c for c in work if len(c.pos) == 2), None)
        if c is None:
            break
        new = build_horn(c, 0, next_id)
        record(HornStep(c.cid, (next_id,), 0), [new])
        next_id += 1

    # linear: split repeated variables in positive literals
    while True:
        c = next((c for c in work if c.pos and _duplicate_var(c.pos[0])), None)
        if c is None:
            break
        x = _duplicate_var(c.pos[0])
        occ = var_positions(c.pos[0], x)
        fresh = gen_var.fresh(x)
        new, duplicated = build_linear(c, x, fresh, occ[0], occ[-1], next_id)
        record(LinearStep(c.cid, (next_id,), x, fresh, occ[0], occ[-1], duplicated),
               [new])
        next_id += 1

    # shallow: extract nested subterms of positive literals
    while True:
        target = next(((c, i) for c in work for i, arg in
                       enumerate(c.pos[0].args if c.pos else (), start=1)
                       if depth(arg) >= 2), None)
        if target is None:
            break
        c, arg_index = target
        pos = _extraction_position(c.pos[0], arg_index)
        spred = gen_sym.fresh("s_")
        sig.add_predicate(spred, 1, reserved=True)
        fresh = gen_var.fresh("y")
        split = default_split(c, pos, fresh)
        c1, c2 = build_shallow(c, pos, spred, fresh, split[0], split[1],
                               (next_id, next_id + 1))
        record(ShallowStep(c.cid, (next_id, next_id + 1), spred, fresh, pos,
                           split[0], split[1]), [c1, c2])
        next_id += 2

    flags = classify(work)
    assert flags.is_mslh, f"approximation failed to reach the fragment: {flags}"
    trace.final = list(work)
    trace.signature = sig
    return list(work), trace


def _extraction_position(e: Atom, arg_index: int) -> Position:
    """Deepest proper complex subterm of the argument, leftmost on ties."""
    best: Optional[tuple[int, Position]] = None
    for pos, sub in term_positions(e):
        if len(pos) < 2 or pos[0] != arg_index or isinstance(sub, Var):
            continue
        d = depth(sub)
        if best is None or d > best[0]:
            best = (d, pos)
    assert best is not None, "argument of depth >= 2 has a complex proper subterm"
    return best[1]


def _duplicate_var(e: Atom) -> Optional[str]:
    seen: set[str] = set()
    for v in atom_vars(e):
        if v in seen:
            return v
        seen.add(v)
    return None


def _nonmonadic_preds(clauses: list[Clause]) -> list[str]:
    out: dict[str, None] = {}
    for c in clauses:
        for a in c.atoms():
            if len(a.args) > 1:
                out.setdefault(a.pred)
    return list(out)


def _occurrence_vars(*atoms: Atom) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for at in atoms:
        for v in atom_vars(at):
            seen.setdefault(v)
    return tuple(seen)


def _with_ids(clauses: list[Clause]) -> list[Clause]:
    used = {c.cid for c in clauses if c.cid >= 0}
    next_free = max(used, default=-1) + 1
    out = []
    for c in clauses:
        if c.cid < 0:
            c = c.with_id(next_free)
            next_free += 1
        out.append(c)
    if len({c.cid for c in out}) != len(out):
        raise ValueError("duplicate clause ids")
    return out


def _next_id(clauses: list[Clause]) -> int:
    return max((c.cid for c in clauses), default=-1) + 1


def _all_vars(clauses: list[Clause]) -> list[str]:
    out: list[str] = []
    for c in clauses:
        out.extend(c.variables())
    return out


def _all_symbols(clauses: list[Clause]) -> list[str]:
    sig = Signature.of(clauses, reserved=True)
    return list(sig.functions) + list(sig.predicates)


# ---------------------------------------------------------------------------
# Projection and its inverse


class MalformedProjection(ValueError):
    pass


def project_atom(a: Atom, pred: str, fn: str) -> Atom:
    if a.pred == pred:
        return Atom(PROJECTION_PRED, (App(fn, a.args),))
    return a


def unproject_atom(a: Atom, pred: str, fn: str) -> Atom:
    is_projection = (a.pred == PROJECTION_PRED and len(a.args) == 1
                     and isinstance(a.args[0], App) and a.args[0].fn == fn)
    for arg in a.args:
        for p, sub in term_positions(arg):
            if isinstance(sub, App) and sub.fn == fn and not (is_projection and p == ()):
                raise MalformedProjection(
                    f"{fn} occurs outside a {PROJECTION_PRED} projection in {a}")
    if is_projection:
        head = a.args[0]
        assert isinstance(head, App)
        return Atom(pred, head.args)
    return a


def project(clauses: Iterable[Clause], pred: str, fn: Optional[str] = None) -> list[Clause]:
    fn = fn or f"f_{pred}"
    return [Clause(tuple(project_atom(a, pred, fn) for a in c.neg),
                   tuple(project_atom(a, pred, fn) for a in c.pos),
                   c.cid, c.name) for c in clauses]


def unproject(clauses: Iterable[Clause], pred: str, fn: Optional[str] = None) -> list[Clause]:
    fn = fn or f"f_{pred}"
    return [Clause(tuple(unproject_atom(a, pred, fn) for a in c.neg),
                   tuple(unproject_atom(a, pred, fn) for a in c.pos),
                   c.cid, c.name) for c in clauses]
