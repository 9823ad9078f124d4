"""Integer dilation sequences: generalized Fibonacci rows, Wythoff pairs, Binet.

Wythoff pairs are computed with exact integer arithmetic. For integer ``m``,
``floor(m * phi) = (m + isqrt(5 m^2)) // 2`` because ``sqrt(5) m`` is never an
integer, so no floating-point floor can misround.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

SQRT5 = math.sqrt(5.0)
PHI = (1.0 + SQRT5) / 2.0
PSI = (1.0 - SQRT5) / 2.0
LOG_PHI = math.log(PHI)


class EmptySequenceError(ValueError):
    """No element of the requested family fits under the window cap."""


@dataclass(frozen=True)
class GoldenConstants:
    phi: float = PHI
    psi: float = PSI


class FibParams(NamedTuple):
    a: int
    b: int


@dataclass(frozen=True)
class DilationSequence:
    elements: tuple
    rule: str
    params: tuple
    cap: int

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    def __getitem__(self, k):
        return self.elements[k]


def floor_phi_multiple(m):
    """Exact ``floor(m * phi)`` for a nonnegative integer ``m``."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    return (m + math.isqrt(5 * m * m)) // 2


def generalized_fibonacci(a, b, w):
    """Alg. 1 of the construction: ``[a, b, a+b, ...]`` while the next term is ``<= w``.

    The two seeds are kept even when they exceed ``w``; window filtering is the
    caller's job. ``Fib(0, 0)`` is the constant zero sequence and is returned
    as ``[0, 0]`` instead of looping forever.
    """
    if w < 1:
        raise ValueError("window cap w must be >= 1")
    if a < 0 or b < 0:
        raise ValueError("initial elements must be nonnegative")
    seq = [a, b]
    if a == 0 and b == 0:
        return DilationSequence(tuple(seq), "fib", (a, b), w)
    while seq[-1] + seq[-2] <= w:
        seq.append(seq[-1] + seq[-2])
    return DilationSequence(tuple(seq), "fib", (a, b), w)


def wythoff_pair(i):
    """Initial pair of row ``i`` of the Wythoff array: ``(floor(m phi), floor(m phi^2))`` with ``m = floor(i phi)``."""
    if i < 1:
        raise ValueError("row index must be >= 1")
    m = floor_phi_multiple(i)
    a = floor_phi_multiple(m)
    # phi^2 = phi + 1, so floor(m phi^2) = floor(m phi) + m
    b = a + m
    assert a <= b
    return FibParams(a, b)


def modified_wythoff_pair(i):
    """Row ``i`` of the Wythoff array stepped two terms backwards."""
    a, b = wythoff_pair(i)
    b_m = b - a
    a_m = a - b_m
    return FibParams(a_m, b_m)


def fib_term(a, b, n):
    """n-th term (1-based) of ``Fib(a, b)`` by the integer recurrence."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return a
    prev, cur = a, b
    for _ in range(n - 2):
        prev, cur = cur, prev + cur
    return cur


def _checked(value, a, b, n):
    if not math.isfinite(value):
        raise OverflowError(f"Fib({a},{b}) term {n} exceeds the float range")
    return value


def binet(a, b, n):
    """Closed form of the n-th term of ``Fib(a, b)``, valid for ``n >= 2``.

    ``f_n = (b - a psi)/sqrt5 * phi^(n-1) + (a phi - b)/sqrt5 * psi^(n-1)``
    """
    if n < 2:
        raise ValueError("this form needs n >= 2; use binet_first_form for n = 1")
    try:
        value = (b - a * PSI) / SQRT5 * PHI ** (n - 1) + (a * PHI - b) / SQRT5 * PSI ** (n - 1)
    except OverflowError as exc:
        raise OverflowError(f"Fib({a},{b}) term {n} exceeds the float range") from exc
    return _checked(value, a, b, n)


def binet_first_form(a, b, n):
    """Closed form valid for every ``n >= 1``:
    ``f_n = (a - (b-a) psi)/sqrt5 * phi^n + ((b-a) phi - a)/sqrt5 * psi^n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    try:
        value = (a - (b - a) * PSI) / SQRT5 * PHI**n + ((b - a) * PHI - a) / SQRT5 * PSI**n
    except OverflowError as exc:
        raise OverflowError(f"Fib({a},{b}) term {n} exceeds the float range") from exc
    return _checked(value, a, b, n)


FAMILY_RULES = ("fib", "linear", "linear-shifted", "power", "poly")


def family_sequence(rule, param, w):
    """Ablation dilation families, capped at ``w``.

    ``param`` per rule: ``linear`` c; ``linear-shifted`` (c, shift);
    ``power`` base; ``poly`` exponent; ``fib`` (a, b).
    The result is strictly increasing and every element is ``<= w``.
    """
    if w < 1:
        raise ValueError("window cap w must be >= 1")
    if rule == "linear":
        c = int(param)
        if c < 1:
            raise ValueError("linear step c must be >= 1")
        elements = list(range(c, w + 1, c))
        params = (c,)
    elif rule == "linear-shifted":
        c, shift = (int(p) for p in param)
        if c < 1 or shift < 0:
            raise ValueError("need c >= 1 and shift >= 0")
        elements = list(range(c + shift, w + 1, c))
        params = (c, shift)
    elif rule == "power":
        base = int(param)
        if base < 2:
            raise ValueError("power base must be >= 2")
        elements, x = [], base
        while x <= w:
            elements.append(x)
            x *= base
        params = (base,)
    elif rule == "poly":
        e = int(param)
        if e not in (2, 3):
            raise ValueError("poly exponent must be 2 or 3")
        elements, n = [], 1
        while n**e <= w:
            elements.append(n**e)
            n += 1
        params = (e,)
    elif rule == "fib":
        a, b = (int(p) for p in param)
        raw = generalized_fibonacci(a, b, w).elements
        elements = sorted({x for x in raw if 1 <= x <= w})
        params = (a, b)
    else:
        raise ValueError(f"unknown rule {rule!r}; expected one of {FAMILY_RULES}")
    if not elements:
        raise EmptySequenceError(f"{rule}{params} has no element <= {w}")
    return DilationSequence(tuple(elements), rule, params, w)
