"""Shared builders for tests: a tiny DSL for terms, atoms and clauses."""

from __future__ import annotations

import itertools
import re
from typing import Optional

from mslh.terms import (
    App,
    Atom,
    Clause,
    Subst,
    Term,
    Var,
    clause,
    match_instance,
    subst_clause,
)


_TOKEN = re.compile(r"[A-Za-z0-9_']+|[(),]")


def t(text: str) -> Term:
    """Parse a term: lowercase-leading names are symbols, the rest variables."""
    tokens = _TOKEN.findall(text.replace(" ", ""))
    term, rest = _parse_term(tokens)
    assert not rest, f"trailing tokens in {text!r}: {rest}"
    return term


def _parse_term(tokens: list[str]) -> tuple[Term, list[str]]:
    head, rest = tokens[0], tokens[1:]
    if head[0].islower() or head[0].isdigit():
        if rest and rest[0] == "(":
            args, rest = _parse_args(rest[1:])
            return App(head, tuple(args)), rest
        return App(head), rest
    return Var(head.lower()), rest


def _parse_args(tokens: list[str]) -> tuple[list[Term], list[str]]:
    args: list[Term] = []
    while True:
        term, tokens = _parse_term(tokens)
        args.append(term)
        sep, tokens = tokens[0], tokens[1:]
        if sep == ")":
            return args, tokens
        assert sep == ","


def a(text: str) -> Atom:
    """Parse an atom, e.g. ``p(X, g(X))`` (variables uppercase)."""
    tokens = _TOKEN.findall(text.replace(" ", ""))
    pred, rest = tokens[0], tokens[1:]
    if not rest:
        return Atom(pred)
    assert rest[0] == "("
    args, rest = _parse_args(rest[1:])
    assert not rest
    return Atom(pred, tuple(args))


def cl(text: str, cid: int = -1) -> Clause:
    """Parse a clause ``p(X), q(X) -> r(X)``; either side may be empty."""
    lhs, _, rhs = text.partition("->")

    def side(s: str) -> list[Atom]:
        s = s.strip()
        if not s:
            return []
        parts: list[str] = []
        depth = 0
        cur = ""
        for ch in s:
            if ch == "," and depth == 0:
                parts.append(cur)
                cur = ""
                continue
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            cur += ch
        parts.append(cur)
        return [a(p) for p in parts]

    return clause(side(lhs), side(rhs), cid)


def cls(*texts: str) -> list[Clause]:
    return [cl(s, cid=i) for i, s in enumerate(texts)]


def clause_set_equal(xs, ys) -> bool:
    """Multiset equality of clause collections (structural, id-blind)."""
    xs, ys = list(xs), list(ys)
    if len(xs) != len(ys):
        return False
    remaining = list(ys)
    for x in xs:
        for i, y in enumerate(remaining):
            if x == y:
                del remaining[i]
                break
        else:
            return False
    return True


def clause_sets_isomorphic(xs, ys, rename_prefixes: tuple[str, ...] = ("s_", "d_", "f_")) -> bool:
    """Equality modulo per-clause variable renaming and a global bijection on
    reserved fresh symbols (prefix classes are respected)."""
    xs, ys = list(xs), list(ys)
    if len(xs) != len(ys):
        return False

    def fresh_symbols(cs) -> list[str]:
        out: dict[str, None] = {}
        for c in cs:
            for at in c.atoms():
                if at.pred == "t" or at.pred.startswith(rename_prefixes):
                    out.setdefault(at.pred)
                for term in at.args:
                    for s in _apps(term):
                        if s == "t" or s.startswith(rename_prefixes):
                            out.setdefault(s)
        return list(out)

    def _apps(term: Term):
        if isinstance(term, App):
            yield term.fn
            for arg in term.args:
                yield from _apps(arg)

    sx, sy = fresh_symbols(xs), fresh_symbols(ys)
    if len(sx) != len(sy):
        return False

    def compatible(u: str, v: str) -> bool:
        pu = next((p for p in rename_prefixes if u.startswith(p)), "t")
        pv = next((p for p in rename_prefixes if v.startswith(p)), "t")
        return pu == pv

    def rename_set(cs, mapping: dict[str, str]):
        def rt(term: Term) -> Term:
            if isinstance(term, Var):
                return term
            return App(mapping.get(term.fn, term.fn), tuple(rt(x) for x in term.args))

        def ra(atom: Atom) -> Atom:
            return Atom(mapping.get(atom.pred, atom.pred), tuple(rt(x) for x in atom.args))

        return [Clause(tuple(ra(x) for x in c.neg), tuple(ra(x) for x in c.pos))
                for c in cs]

    for perm in itertools.permutations(sy):
        if not all(compatible(u, v) for u, v in zip(sx, perm)):
            continue
        mapped = rename_set(xs, dict(zip(sx, perm)))
        if _variant_multiset_equal(mapped, ys):
            return True
    return False


def _variant_multiset_equal(xs, ys) -> bool:
    remaining = list(ys)
    for x in xs:
        for i, y in enumerate(remaining):
            if variants(x, y):
                del remaining[i]
                break
        else:
            return False
    return not remaining


def variants(c1: Clause, c2: Clause) -> bool:
    """True iff the clauses are equal up to variable renaming."""
    s1 = match_instance(c1, c2)
    s2 = match_instance(c2, c1)
    return s1 is not None and s2 is not None


def instance_of(general: Clause, candidate: Clause) -> bool:
    return match_instance(general, candidate) is not None
