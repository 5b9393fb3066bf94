"""Syntactic foundation: terms, atoms, clauses, substitutions, unification.

Clauses are implications ``neg -> pos`` over multisets of atoms.  Everything
here is immutable; substitutions are plain dicts from variable names to terms
and are applied/composed by module functions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional


# ---------------------------------------------------------------------------
# Terms and atoms


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class App:
    fn: str
    args: tuple["Term", ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.fn
        return f"{self.fn}({', '.join(map(str, self.args))})"


Term = Var | App


@dataclass(frozen=True, slots=True)
class Atom:
    pred: str
    args: tuple[Term, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({', '.join(map(str, self.args))})"


def const(name: str) -> App:
    return App(name)


def depth(t: Term) -> int:
    """Term depth: variables have depth 0, applications 1 + max over args."""
    if isinstance(t, Var):
        return 0
    if not t.args:
        return 1
    return 1 + max(depth(a) for a in t.args)


def atom_depth(a: Atom) -> int:
    return max((depth(t) for t in a.args), default=0)


def term_vars(t: Term) -> list[str]:
    """Variable names of a term, in occurrence order, with duplicates."""
    if isinstance(t, Var):
        return [t.name]
    out: list[str] = []
    for a in t.args:
        out.extend(term_vars(a))
    return out


def atom_vars(a: Atom) -> list[str]:
    out: list[str] = []
    for t in a.args:
        out.extend(term_vars(t))
    return out


def is_linear_term(t: Term) -> bool:
    vs = term_vars(t)
    return len(vs) == len(set(vs))


def subterms(t: Term) -> Iterator[Term]:
    """All subterm occurrences of ``t``, including ``t`` itself (pre-order)."""
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from subterms(a)


# ---------------------------------------------------------------------------
# Positions (1-based argument indices; for atoms the first index selects the
# argument slot, the rest descend into the term)

Position = tuple[int, ...]


class PositionError(ValueError):
    pass


def term_at(host: Atom | Term, pos: Position) -> Term:
    """Subterm of an atom or term at ``pos``; raises on invalid positions."""
    cur: Atom | Term = host
    for i in pos:
        args = cur.args if isinstance(cur, (Atom, App)) else ()
        if not 1 <= i <= len(args):
            raise PositionError(f"no subterm at position {pos} in {host}")
        cur = args[i - 1]
    if isinstance(cur, Atom):
        raise PositionError(f"position {pos} does not address a term in {host}")
    return cur


def replace_at(host: Atom | Term, pos: Position, s: Term) -> Atom | Term:
    """Replace the single occurrence at ``pos`` by ``s``; other positions untouched."""
    if not pos:
        if isinstance(host, Atom):
            raise PositionError("cannot replace an atom by a term")
        return s
    if isinstance(host, Var):
        raise PositionError(f"no subterm at position {pos} in {host}")
    i = pos[0]
    if not 1 <= i <= len(host.args):
        raise PositionError(f"no subterm at position {pos} in {host}")
    new_args = tuple(
        replace_at(a, pos[1:], s) if k == i - 1 else a  # type: ignore[misc]
        for k, a in enumerate(host.args)
    )
    if isinstance(host, Atom):
        return Atom(host.pred, new_args)
    return App(host.fn, new_args)


def term_positions(host: Atom | Term) -> Iterator[tuple[Position, Term]]:
    """All term positions inside an atom or term, in lexicographic order."""

    def walk(t: Term, prefix: Position) -> Iterator[tuple[Position, Term]]:
        yield prefix, t
        if isinstance(t, App):
            for i, a in enumerate(t.args, start=1):
                yield from walk(a, prefix + (i,))

    if isinstance(host, Atom):
        for i, a in enumerate(host.args, start=1):
            yield from walk(a, (i,))
    else:
        yield from walk(host, ())


def var_positions(host: Atom | Term, name: str) -> list[Position]:
    return [p for p, t in term_positions(host) if isinstance(t, Var) and t.name == name]


# ---------------------------------------------------------------------------
# Clauses


@dataclass(frozen=True)
class Clause:
    """An implication ``neg -> pos`` over atom multisets.

    ``cid`` is an identity label used for ancestor/origin bookkeeping; it does
    not participate in structural equality.  Duplicate literals are preserved.
    """

    neg: tuple[Atom, ...]
    pos: tuple[Atom, ...]
    cid: int = field(default=-1, compare=False)
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_key", clause_key(self))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Clause):
            return NotImplemented
        return self._key == other._key  # type: ignore[attr-defined]

    def __hash__(self) -> int:
        return hash(self._key)  # type: ignore[attr-defined]

    @property
    def is_empty(self) -> bool:
        return not self.neg and not self.pos

    @property
    def is_horn(self) -> bool:
        return len(self.pos) <= 1

    def atoms(self) -> Iterator[Atom]:
        yield from self.neg
        yield from self.pos

    def variables(self) -> list[str]:
        """Variable names in occurrence order, deduplicated."""
        seen: dict[str, None] = {}
        for a in self.atoms():
            for v in atom_vars(a):
                seen.setdefault(v)
        return list(seen)

    def with_id(self, cid: int, name: str = "") -> "Clause":
        return Clause(self.neg, self.pos, cid, name or self.name)

    def __str__(self) -> str:
        lhs = ", ".join(map(str, self.neg))
        rhs = ", ".join(map(str, self.pos))
        return f"{lhs} -> {rhs}".strip()


def clause_key(c: Clause) -> tuple:
    """Multiset-equality key: sorted printed literals per side."""
    return (tuple(sorted(map(str, c.neg))), tuple(sorted(map(str, c.pos))))


def clause(neg: Iterable[Atom] = (), pos: Iterable[Atom] = (), cid: int = -1,
           name: str = "") -> Clause:
    return Clause(tuple(neg), tuple(pos), cid, name)


def is_tautology(c: Clause) -> bool:
    return any(a in c.pos for a in c.neg)


def condense_duplicates(c: Clause) -> Clause:
    """Drop duplicate literal occurrences (keeps first occurrence order)."""

    def dedup(atoms: tuple[Atom, ...]) -> tuple[Atom, ...]:
        seen: dict[Atom, None] = {}
        for a in atoms:
            seen.setdefault(a)
        return tuple(seen)

    return Clause(dedup(c.neg), dedup(c.pos), c.cid, c.name)


# ---------------------------------------------------------------------------
# Signature


class ReservedSymbolError(ValueError):
    pass


RESERVED_PREFIXES = ("f_", "s_", "d_")
RESERVED_NAMES = ("t",)


def is_reserved(symbol: str) -> bool:
    return symbol in RESERVED_NAMES or symbol.startswith(RESERVED_PREFIXES)


@dataclass
class Signature:
    """Function and predicate symbols with arities, plus fresh-name machinery.

    Fresh symbols introduced by the approximation live in a reserved namespace
    (names ``t``, ``f_*``, ``s_*``, ``d_*``) that the parser rejects in inputs.
    """

    functions: dict[str, int] = field(default_factory=dict)
    predicates: dict[str, int] = field(default_factory=dict)

    def add_function(self, name: str, arity: int, reserved: bool = False) -> None:
        if not reserved and is_reserved(name):
            raise ReservedSymbolError(f"function symbol {name!r} is reserved")
        old = self.functions.get(name)
        if old is not None and old != arity:
            raise ValueError(f"arity clash for function {name!r}: {old} vs {arity}")
        self.functions[name] = arity

    def add_predicate(self, name: str, arity: int, reserved: bool = False) -> None:
        if not reserved and is_reserved(name):
            raise ReservedSymbolError(f"predicate symbol {name!r} is reserved")
        old = self.predicates.get(name)
        if old is not None and old != arity:
            raise ValueError(f"arity clash for predicate {name!r}: {old} vs {arity}")
        self.predicates[name] = arity

    def constants(self) -> list[str]:
        return sorted(n for n, k in self.functions.items() if k == 0)

    def register_clause(self, c: Clause, reserved: bool = False) -> None:
        for a in c.atoms():
            self.add_predicate(a.pred, len(a.args), reserved)
            for t in a.args:
                for s in subterms(t):
                    if isinstance(s, App):
                        self.add_function(s.fn, len(s.args), reserved)

    def copy(self) -> "Signature":
        return Signature(dict(self.functions), dict(self.predicates))

    @classmethod
    def of(cls, clauses: Iterable[Clause], reserved: bool = False) -> "Signature":
        sig = cls()
        for c in clauses:
            sig.register_clause(c, reserved)
        return sig


class FreshNames:
    """Deterministic fresh-name source, avoiding an explicit set of used names."""

    def __init__(self, used: Iterable[str] = ()) -> None:
        self._used = set(used)
        self._counters: dict[str, int] = {}

    def avoid(self, names: Iterable[str]) -> None:
        self._used.update(names)

    def fresh(self, prefix: str) -> str:
        n = self._counters.get(prefix, 0)
        while f"{prefix}{n}" in self._used:
            n += 1
        self._counters[prefix] = n + 1
        name = f"{prefix}{n}"
        self._used.add(name)
        return name


# ---------------------------------------------------------------------------
# Substitutions

Subst = dict[str, Term]


def subst_term(t: Term, s: Subst) -> Term:
    if isinstance(t, Var):
        return s.get(t.name, t)
    if not t.args:
        return t
    return App(t.fn, tuple(subst_term(a, s) for a in t.args))


def subst_atom(a: Atom, s: Subst) -> Atom:
    return Atom(a.pred, tuple(subst_term(t, s) for t in a.args))


def subst_clause(c: Clause, s: Subst) -> Clause:
    return Clause(tuple(subst_atom(a, s) for a in c.neg),
                  tuple(subst_atom(a, s) for a in c.pos), c.cid, c.name)


def compose(s1: Subst, s2: Subst) -> Subst:
    """``compose(s1, s2)`` applies as s1 then s2; identity bindings dropped."""
    out: Subst = {}
    for v, t in s1.items():
        t2 = subst_term(t, s2)
        if not (isinstance(t2, Var) and t2.name == v):
            out[v] = t2
    for v, t in s2.items():
        if v not in s1 and not (isinstance(t, Var) and t.name == v):
            out[v] = t
    return out


def restrict(s: Subst, names: Iterable[str]) -> Subst:
    keep = set(names)
    return {v: t for v, t in s.items() if v in keep}


def is_renaming(s: Subst) -> bool:
    """True iff the substitution maps variables injectively to variables."""
    images = [t for t in s.values()]
    if not all(isinstance(t, Var) for t in images):
        return False
    names = [t.name for t in images]  # type: ignore[union-attr]
    return len(names) == len(set(names))


def is_ground_term(t: Term) -> bool:
    return not term_vars(t)


def is_ground_clause(c: Clause) -> bool:
    return not c.variables()


# ---------------------------------------------------------------------------
# Unification and matching


def occurs(name: str, t: Term) -> bool:
    return name in term_vars(t)


def mgu_terms(pairs: list[tuple[Term, Term]]) -> Optional[Subst]:
    """Most general unifier of term pairs, with occurs check; idempotent result."""
    sub: Subst = {}
    work = list(pairs)
    while work:
        a, b = work.pop()
        a, b = subst_term(a, sub), subst_term(b, sub)
        if a == b:
            continue
        if isinstance(a, Var):
            if occurs(a.name, b):
                return None
            bind = {a.name: b}
            sub = compose(sub, bind)
        elif isinstance(b, Var):
            if occurs(b.name, a):
                return None
            sub = compose(sub, {b.name: a})
        else:
            if a.fn != b.fn or len(a.args) != len(b.args):
                return None
            work.extend(zip(a.args, b.args))
    return sub


def mgu(a: Atom | Term, b: Atom | Term) -> Optional[Subst]:
    """Unify two atoms or two terms.  Returns None when not unifiable."""
    if isinstance(a, Atom) != isinstance(b, Atom):
        return None
    if isinstance(a, Atom) and isinstance(b, Atom):
        if a.pred != b.pred or len(a.args) != len(b.args):
            return None
        return mgu_terms(list(zip(a.args, b.args)))
    return mgu_terms([(a, b)])


def match_term(pattern: Term, target: Term, sub: Optional[Subst] = None) -> Optional[Subst]:
    """One-way matching: extends ``sub`` so that pattern*sub == target."""
    sub = dict(sub) if sub else {}

    def go(p: Term, t: Term) -> bool:
        if isinstance(p, Var):
            bound = sub.get(p.name)
            if bound is None:
                sub[p.name] = t
                return True
            return bound == t
        if isinstance(t, Var) or p.fn != t.fn or len(p.args) != len(t.args):
            return False
        return all(go(pa, ta) for pa, ta in zip(p.args, t.args))

    return sub if go(pattern, target) else None


def match_atom(pattern: Atom, target: Atom, sub: Optional[Subst] = None) -> Optional[Subst]:
    if pattern.pred != target.pred or len(pattern.args) != len(target.args):
        return None
    sub = dict(sub) if sub else {}
    for p, t in zip(pattern.args, target.args):
        got = match_term(p, t, sub)
        if got is None:
            return None
        sub = got
    return sub


def _match_multiset(patterns: tuple[Atom, ...], targets: tuple[Atom, ...],
                    sub: Subst, unifying: bool) -> Optional[Subst]:
    """Backtracking multiset correspondence between two atom tuples."""
    if len(patterns) != len(targets):
        return None
    if not patterns:
        return sub
    p, rest = patterns[0], patterns[1:]
    used: set[int] = set()
    for i, t in enumerate(targets):
        if i in used:
            continue
        if unifying:
            step = mgu(subst_atom(p, sub), subst_atom(t, sub))
            nxt = compose(sub, step) if step is not None else None
        else:
            nxt = match_atom(p, t, sub)
        if nxt is None:
            continue
        remaining = targets[:i] + targets[i + 1:]
        if unifying:
            got = _match_multiset(rest, remaining, nxt, True)
        else:
            got = _match_multiset(rest, remaining, nxt, False)
        if got is not None:
            return got
    return None


def match_instance(general: Clause, candidate: Clause) -> Optional[Subst]:
    """Substitution sigma with general*sigma == candidate (multiset-equal sides)."""
    sub = _match_multiset(general.neg, candidate.neg, {}, unifying=False)
    if sub is None:
        return None
    return _match_multiset(general.pos, candidate.pos, sub, unifying=False)


def unify_clauses(c1: Clause, c2: Clause) -> Optional[Subst]:
    """Simultaneous unifier making the two clauses multiset-equal."""
    sub = _match_multiset(c1.neg, c2.neg, {}, unifying=True)
    if sub is None:
        return None
    return _match_multiset(c1.pos, c2.pos, sub, unifying=True)


# ---------------------------------------------------------------------------
# Renaming and skeletons


def rename_clause(c: Clause, gen: FreshNames, prefix: str = "v") -> tuple[Clause, Subst]:
    ren: Subst = {v: Var(gen.fresh(prefix)) for v in c.variables()}
    return subst_clause(c, ren), ren


def rename_apart(c1: Clause, c2: Clause) -> tuple[Clause, Clause]:
    """Rename ``c2`` away from ``c1`` (c1 is left untouched)."""
    gen = FreshNames(c1.variables() + c2.variables())
    c2r, _ = rename_clause(c2, gen)
    return c1, c2r


def canonical_clause(c: Clause, prefix: str = "v") -> Clause:
    """Variables renamed to ``v0, v1, ...`` in first-occurrence order."""
    ren: Subst = {v: Var(f"{prefix}{i}") for i, v in enumerate(c.variables())}
    return subst_clause(c, ren)


def variant_key(c: Clause) -> tuple:
    """Key identifying clauses up to variable renaming (and literal order)."""
    # Sort literals by a variable-blind shape first, then canonicalize.
    def shape(a: Atom) -> str:
        return str(subst_atom(a, {v: Var("_") for v in atom_vars(a)}))

    neg = tuple(sorted(c.neg, key=lambda a: (shape(a), str(a))))
    pos = tuple(sorted(c.pos, key=lambda a: (shape(a), str(a))))
    return clause_key(canonical_clause(Clause(neg, pos)))


def skeleton(t: Term, gen: Optional[FreshNames] = None) -> Term:
    """Same function-symbol tree with every variable occurrence made distinct."""
    gen = gen or FreshNames()

    def go(u: Term) -> Term:
        if isinstance(u, Var):
            return Var(gen.fresh(u.name + "_"))
        return App(u.fn, tuple(go(a) for a in u.args))

    return go(t)


def have_common_instances(s: Term, t: Term) -> bool:
    """True iff the two terms, renamed apart, are unifiable."""
    gen = FreshNames(term_vars(s) + term_vars(t))
    ren: Subst = {v: Var(gen.fresh("r")) for v in set(term_vars(t))}
    return mgu_terms([(s, subst_term(t, ren))]) is not None


# ---------------------------------------------------------------------------
# Structural classification


@dataclass(frozen=True)
class ClassifyFlags:
    monadic: bool
    shallow: bool
    linear: bool
    horn: bool

    @property
    def is_mslh(self) -> bool:
        return self.monadic and self.shallow and self.linear and self.horn


def positive_duplicate_count(c: Clause) -> int:
    """Number of surplus variable occurrences over the positive literals."""
    counts: dict[str, int] = {}
    for a in c.pos:
        for v in atom_vars(a):
            counts[v] = counts.get(v, 0) + 1
    return sum(n - 1 for n in counts.values() if n > 1)


def classify(clauses: Iterable[Clause]) -> ClassifyFlags:
    """Fragment membership flags.

    Depth and linearity are judged on positive literals only: negative
    literals may stay deep and non-linear without affecting decidability,
    and the approximation never rewrites them.
    """
    monadic = shallow = linear = horn = True
    for c in clauses:
        for a in c.atoms():
            if len(a.args) > 1:
                monadic = False
        for a in c.pos:
            if any(depth(t) > 1 for t in a.args):
                shallow = False
        if positive_duplicate_count(c) > 0:
            linear = False
        if not c.is_horn:
            horn = False
    return ClassifyFlags(monadic, shallow, linear, horn)


# ---------------------------------------------------------------------------
# Small helpers shared by the oracle and tests


def all_substitutions(variables: list[str], terms: list[Term]) -> Iterator[Subst]:
    """Every mapping of the given variables into the given terms."""
    for combo in itertools.product(terms, repeat=len(variables)):
        yield dict(zip(variables, combo))
