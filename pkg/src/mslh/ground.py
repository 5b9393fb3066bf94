"""Ground brute-force oracle: Herbrand enumeration and a DPLL satisfiability check.

This is the independent second route used by core validation and the test
suites; it never feeds the main saturation path.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Optional

from .terms import (
    App,
    Atom,
    Clause,
    Signature,
    Subst,
    Term,
    all_substitutions,
    depth,
    is_tautology,
    subst_clause,
)


class OracleBudgetExceeded(Exception):
    """Raised when the brute-force expansion grows past its instance budget."""


def herbrand_terms(sig: Signature, max_depth: int) -> list[Term]:
    """All ground terms over ``sig`` of depth <= max_depth, deterministically ordered."""
    if not sig.constants():
        raise ValueError("Herbrand enumeration needs at least one constant")
    if max_depth < 1:
        return []
    levels: list[list[Term]] = [[App(c) for c in sig.constants()]]
    for d in range(2, max_depth + 1):
        smaller = [t for lvl in levels for t in lvl]
        level: list[Term] = []
        for fn, arity in sorted(sig.functions.items()):
            if arity == 0:
                continue
            for combo in itertools.product(smaller, repeat=arity):
                if 1 + max(depth(c) for c in combo) == d:
                    level.append(App(fn, combo))
        levels.append(level)
    out = [t for lvl in levels for t in lvl]
    return sorted(out, key=lambda t: (depth(t), str(t)))


def ground_instances(c: Clause, terms: list[Term], budget: Optional[int] = None) -> list[Clause]:
    vs = c.variables()
    if budget is not None and len(terms) ** len(vs) > budget:
        raise OracleBudgetExceeded(f"{len(terms)}^{len(vs)} instances of {c}")
    return [subst_clause(c, s) for s in all_substitutions(vs, terms)]


def herbrand_expand(clauses: Iterable[Clause], sig: Signature, max_depth: int,
                    budget: int = 200_000) -> list[Clause]:
    terms = herbrand_terms(sig, max_depth)
    out: list[Clause] = []
    for c in clauses:
        out.extend(ground_instances(c, terms, budget))
        if len(out) > budget:
            raise OracleBudgetExceeded(f"more than {budget} ground instances")
    return out


# ---------------------------------------------------------------------------
# Ground satisfiability via DPLL with unit propagation


def ground_sat(clauses: Iterable[Clause]) -> bool:
    """Decide satisfiability of ground clauses (propositional reading)."""
    atoms: dict[Atom, int] = {}

    def lit(a: Atom, positive: bool) -> int:
        idx = atoms.setdefault(a, len(atoms) + 1)
        return idx if positive else -idx

    cnf: list[frozenset[int]] = []
    for c in clauses:
        if is_tautology(c):
            continue
        cl = frozenset(itertools.chain((lit(a, True) for a in c.pos),
                                       (lit(a, False) for a in c.neg)))
        cnf.append(cl)

    def dpll(cls: list[frozenset[int]], assignment: dict[int, bool]) -> bool:
        # unit propagation
        while True:
            unit = None
            simplified: list[frozenset[int]] = []
            for cl in cls:
                resolved = False
                remaining: list[int] = []
                for l in cl:
                    val = assignment.get(abs(l))
                    if val is None:
                        remaining.append(l)
                    elif val == (l > 0):
                        resolved = True
                        break
                if resolved:
                    continue
                if not remaining:
                    return False
                if len(remaining) == 1:
                    unit = remaining[0]
                simplified.append(frozenset(remaining))
            cls = simplified
            if unit is None:
                break
            assignment = dict(assignment)
            assignment[abs(unit)] = unit > 0
        if not cls:
            return True
        branch = min(abs(l) for l in cls[0])
        for val in (True, False):
            trial = dict(assignment)
            trial[branch] = val
            if dpll(cls, trial):
                return True
        return False

    return dpll(cnf, {})


def herbrand_unsat(clauses: Iterable[Clause], sig: Signature, max_depth: int,
                   budget: int = 200_000) -> bool:
    """True iff the depth-bounded Herbrand expansion is unsatisfiable.

    A True answer certifies unsatisfiability of the first-order set; False
    only means "not refuted at this depth".
    """
    return not ground_sat(herbrand_expand(clauses, sig, max_depth, budget))
