"""
Constructive ordinals below epsilon-zero, in Cantor normal form.

A finite ordinal is a plain ``int``. An infinite one is an ``Ordinal`` holding a
non-empty tuple of ``(exponent, coefficient)`` terms, exponents strictly decreasing,
followed by a natural remainder. Exponents are themselves ordinals.
"""
import re
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union


class OrdinalError(ValueError):
    """Raised on ill-formed ordinals or ill-formed constructions."""


@dataclass(frozen=True)
class Ordinal:
    terms: Tuple[Tuple["Ord", int], ...]
    rem: int = 0

    def __str__(self) -> str:
        return render_ordinal(self)


Ord = Union[int, Ordinal]


def _is_nat(o) -> bool:
    return isinstance(o, int) and not isinstance(o, bool) and o >= 0


def ord_wellformed(o) -> bool:
    """True iff ``o`` is a natural or a well-formed Cantor normal form."""
    if _is_nat(o):
        return True
    if not isinstance(o, Ordinal) or not isinstance(o.terms, tuple) or not o.terms:
        return False
    if not _is_nat(o.rem):
        return False
    previous = None
    for term in o.terms:
        if not isinstance(term, tuple) or len(term) != 2:
            return False
        exp, coeff = term
        if not ord_wellformed(exp) or exp == 0:
            return False
        if not _is_nat(coeff) or coeff < 1:
            return False
        if previous is not None and _compare(exp, previous) >= 0:
            return False
        previous = exp
    return True


def _compare(a: Ord, b: Ord) -> int:
    # assumes both well-formed
    a_nat, b_nat = isinstance(a, int), isinstance(b, int)
    if a_nat and b_nat:
        return (a > b) - (a < b)
    if a_nat:
        return -1
    if b_nat:
        return 1
    for (exp_a, coeff_a), (exp_b, coeff_b) in zip(a.terms, b.terms):
        c = _compare(exp_a, exp_b)
        if c:
            return c
        if coeff_a != coeff_b:
            return 1 if coeff_a > coeff_b else -1
    if len(a.terms) != len(b.terms):
        return 1 if len(a.terms) > len(b.terms) else -1
    return (a.rem > b.rem) - (a.rem < b.rem)


def _require(*ordinals) -> None:
    for o in ordinals:
        if not ord_wellformed(o):
            raise OrdinalError(f"ill-formed ordinal: {o!r}")


def ord_lt(a: Ord, b: Ord) -> bool:
    _require(a, b)
    return _compare(a, b) < 0


def ord_le(a: Ord, b: Ord) -> bool:
    _require(a, b)
    return _compare(a, b) <= 0


def leading_exponent(o: Ord) -> Ord:
    """Leading exponent of ``o``; naturals count as exponent 0."""
    return 0 if isinstance(o, int) else o.terms[0][0]


def make_ord(exp: Ord, coeff: int, rest: Ord) -> Ord:
    """
    Build omega^exp * coeff + rest.

    Args:
        exp: exponent, strictly above the leading exponent of ``rest``
        coeff: positive natural coefficient
        rest: the lower-order part

    Returns:
        The well-formed ordinal.
    """
    _require(exp, rest)
    if not _is_nat(coeff) or coeff < 1:
        raise OrdinalError(f"coefficient must be a positive natural, got {coeff!r}")
    if _compare(exp, leading_exponent(rest)) <= 0:
        raise OrdinalError(
            f"exponent {render_ordinal(exp)} is not above the leading exponent of {render_ordinal(rest)}"
        )
    if isinstance(rest, int):
        return Ordinal(((exp, coeff),), rest)
    return Ordinal(((exp, coeff),) + rest.terms, rest.rem)


def ord_nat_pair(o: Ord, n: int) -> Ord:
    """Lexicographic pair (o, n) packed as one ordinal."""
    _require(o)
    if not _is_nat(n):
        raise OrdinalError(f"second component must be a natural, got {n!r}")
    return make_ord(o + 1 if isinstance(o, int) else o, 1, n)


def nats_to_ord(n: int, nats: Sequence[int]) -> Ord:
    """
    First-aligned encoding of a list of naturals.

    Position i of ``nats`` gets exponent n - i and coefficient 1 + nats[i]; missing
    positions down to exponent 1 get coefficient 1.
    """
    if not _is_nat(n):
        raise OrdinalError(f"length bound must be a natural, got {n!r}")
    if n == 0:
        return 0
    if len(nats) > n:
        raise OrdinalError(f"{len(nats)} naturals do not fit under {n} exponents")
    if any(not _is_nat(v) for v in nats):
        raise OrdinalError(f"not a list of naturals: {list(nats)!r}")
    terms = tuple((n - i, 1 + (nats[i] if i < len(nats) else 0)) for i in range(n))
    return Ordinal(terms, 0)


def render_ordinal(o: Ord) -> str:
    """Render as ``w^<exp>*<coeff> + ... + <rem>``; non-natural exponents are parenthesized."""
    if isinstance(o, int):
        return str(o)
    parts = []
    for exp, coeff in o.terms:
        exp_text = str(exp) if isinstance(exp, int) else f"({render_ordinal(exp)})"
        parts.append(f"w^{exp_text}*{coeff}")
    parts.append(str(o.rem))
    return " + ".join(parts)


_TOKEN = re.compile(r"\s*(w\^|\d+|[()*+])")


def _tokenize(text: str) -> List[str]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if not match:
            raise OrdinalError(f"cannot parse ordinal at {text[pos:]!r}")
        tokens.append(match.group(1))
        pos = match.end()
    return tokens


def parse_ordinal(text: str) -> Ord:
    """Parse the textual form produced by ``render_ordinal``."""
    tokens = _tokenize(text)
    value, pos = _parse_sum(tokens, 0)
    if pos != len(tokens):
        raise OrdinalError(f"trailing input in ordinal {text!r}")
    _require(value)
    return value


def _parse_sum(tokens: List[str], pos: int) -> Tuple[Ord, int]:
    terms = []
    while pos < len(tokens) and tokens[pos] == "w^":
        pos += 1
        if pos < len(tokens) and tokens[pos] == "(":
            exp, pos = _parse_sum(tokens, pos + 1)
            if pos >= len(tokens) or tokens[pos] != ")":
                raise OrdinalError("unbalanced parentheses in ordinal")
            pos += 1
        else:
            exp, pos = _parse_nat(tokens, pos)
        if pos >= len(tokens) or tokens[pos] != "*":
            raise OrdinalError("expected '*' after exponent")
        coeff, pos = _parse_nat(tokens, pos + 1)
        terms.append((exp, coeff))
        if pos >= len(tokens) or tokens[pos] != "+":
            raise OrdinalError("expected '+' before the remainder")
        pos += 1
    rem, pos = _parse_nat(tokens, pos)
    if not terms:
        return rem, pos
    return Ordinal(tuple(terms), rem), pos


def _parse_nat(tokens: List[str], pos: int) -> Tuple[int, int]:
    if pos >= len(tokens) or not tokens[pos].isdigit():
        raise OrdinalError("expected a natural number")
    return int(tokens[pos]), pos + 1
