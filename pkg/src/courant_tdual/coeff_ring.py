"""
Exact scalar functions on the base torus T^m.

A ``TrigScalar`` is a finite Fourier sum

    f(x) = sum_k  c_k(t) cos(2 pi k.x) + s_k(t) sin(2 pi k.x)

on coordinates x in [0,1)^m, where every coefficient is a polynomial with
rational coefficients in a formal symbol ``t`` standing for 2*pi.  Keeping
2*pi symbolic makes partial derivatives exact: d/dx_a cos(2 pi k.x) equals
-t*k_a*sin(2 pi k.x), and no floating point ever enters the core.

Only frequency vectors k that are lexicographically >= 0 are stored; the
sign of a negative frequency is folded into the coefficients.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

Rational = Union[int, Fraction]

COS = 0
SIN = 1

# internal key: (frequency vector, COS|SIN, power of t)
_Key = Tuple[Tuple[int, ...], int, int]


class NonConstantTauContent(ValueError):
    """The constant Fourier mode carries positive powers of t."""


def _normalize(kappa: Tuple[int, ...], kind: int, coeff: Fraction):
    """Fold a frequency into the lexicographically nonnegative half."""
    for v in kappa:
        if v > 0:
            return kappa, coeff
        if v < 0:
            neg = tuple(-w for w in kappa)
            return neg, (coeff if kind == COS else -coeff)
    # zero frequency: sin(0) = 0
    if kind == SIN:
        return kappa, Fraction(0)
    return kappa, coeff


def _is_lex_nonneg(kappa: Sequence[int]) -> bool:
    for v in kappa:
        if v != 0:
            return v > 0
    return True


class TrigScalar:
    """Immutable element of Q[t] (x) {cos, sin}(2 pi k.x).

    Instances behave like numbers: they support ``+``, ``-``, ``*`` with each
    other and with ``int``/``Fraction``, equality, hashing and truth testing
    (``bool(f)`` is False exactly for the zero function).
    """

    __slots__ = ("dim", "_terms", "_hash")

    def __init__(self, dim: int, terms: Optional[Dict[_Key, Fraction]] = None):
        if dim < 0:
            raise ValueError("dimension must be nonnegative")
        self.dim = dim
        self._terms: Dict[_Key, Fraction] = terms if terms is not None else {}
        self._hash = None

    # -- construction -----------------------------------------------------

    @classmethod
    def _from_raw(cls, dim: int, raw: Dict[_Key, Fraction]) -> "TrigScalar":
        out = cls.__new__(cls)
        out.dim = dim
        out._terms = {k: v for k, v in raw.items() if v != 0}
        out._hash = None
        return out

    @classmethod
    def zero(cls, dim: int) -> "TrigScalar":
        return cls(dim, {})

    @classmethod
    def const(cls, dim: int, value: Rational) -> "TrigScalar":
        value = Fraction(value)
        if value == 0:
            return cls(dim, {})
        return cls(dim, {((0,) * dim, COS, 0): value})

    @classmethod
    def tau(cls, dim: int, power: int = 1, coeff: Rational = 1) -> "TrigScalar":
        """The monomial coeff * t^power (t stands for 2*pi)."""
        coeff = Fraction(coeff)
        if coeff == 0:
            return cls(dim, {})
        return cls(dim, {((0,) * dim, COS, power): coeff})

    @classmethod
    def cos(cls, dim: int, kappa: Sequence[int], coeff: Rational = 1, power: int = 0) -> "TrigScalar":
        return cls._mode(dim, kappa, COS, coeff, power)

    @classmethod
    def sin(cls, dim: int, kappa: Sequence[int], coeff: Rational = 1, power: int = 0) -> "TrigScalar":
        return cls._mode(dim, kappa, SIN, coeff, power)

    @classmethod
    def _mode(cls, dim, kappa, kind, coeff, power) -> "TrigScalar":
        kappa = tuple(int(v) for v in kappa)
        if len(kappa) != dim:
            raise ValueError(f"frequency {kappa} does not match dimension {dim}")
        kappa, c = _normalize(kappa, kind, Fraction(coeff))
        if c == 0:
            return cls(dim, {})
        return cls(dim, {(kappa, kind, power): c})

    def _coerce(self, other) -> "TrigScalar":
        if isinstance(other, TrigScalar):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        if isinstance(other, (int, Fraction)):
            return TrigScalar.const(self.dim, other)
        return NotImplemented

    # -- queries ----------------------------------------------------------

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        """True when f is a rational constant (no modes, no powers of t)."""
        zero = (0,) * self.dim
        return all(k == (zero, COS, 0) for k in self._terms)

    def constant_value(self) -> Fraction:
        """The rational value of a constant scalar."""
        if not self.is_constant():
            raise ValueError("scalar is not a rational constant")
        return self._terms.get(((0,) * self.dim, COS, 0), Fraction(0))

    def items(self) -> Iterator[Tuple[_Key, Fraction]]:
        return iter(sorted(self._terms.items()))

    def modes(self) -> Dict[Tuple[int, ...], Tuple[Dict[int, Fraction], Dict[int, Fraction]]]:
        """Frequency -> (cos polynomial, sin polynomial), polynomials as power -> coeff."""
        out: Dict[Tuple[int, ...], Tuple[Dict[int, Fraction], Dict[int, Fraction]]] = {}
        for (kappa, kind, power), c in self._terms.items():
            pair = out.setdefault(kappa, ({}, {}))
            pair[kind][power] = c
        return out

    def tau_degree(self) -> int:
        return max((p for (_, _, p) in self._terms), default=-1)

    def harmonic_part(self) -> Fraction:
        """Mean value over the torus (unit volume).

        Raises ``NonConstantTauContent`` when the constant mode carries a
        positive power of t, which cannot arise from exact derivatives of
        well-formed inputs.
        """
        zero = (0,) * self.dim
        value = Fraction(0)
        for (kappa, kind, power), c in self._terms.items():
            if kappa != zero:
                continue
            if power > 0:
                raise NonConstantTauContent(
                    f"constant mode has t-degree {power} with coefficient {c}")
            value += c
        return value

    # -- arithmetic -------------------------------------------------------

    def __neg__(self) -> "TrigScalar":
        return TrigScalar._from_raw(self.dim, {k: -v for k, v in self._terms.items()})

    def __add__(self, other) -> "TrigScalar":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not other._terms:
            return self
        if not self._terms:
            return other
        out = dict(self._terms)
        for k, v in other._terms.items():
            s = out.get(k, 0) + v
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        return TrigScalar(self.dim, out)

    __radd__ = __add__

    def __sub__(self, other) -> "TrigScalar":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "TrigScalar":
        return (-self) + other

    def scale(self, c: Rational) -> "TrigScalar":
        c = Fraction(c)
        if c == 0:
            return TrigScalar(self.dim, {})
        if c == 1:
            return self
        return TrigScalar(self.dim, {k: v * c for k, v in self._terms.items()})

    def __mul__(self, other) -> "TrigScalar":
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if not isinstance(other, TrigScalar):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        a, b = self._terms, other._terms
        if not a or not b:
            return TrigScalar(self.dim, {})
        zero = (0,) * self.dim
        out: Dict[_Key, Fraction] = {}

        def put(kappa, kind, power, c):
            kappa, c = _normalize(kappa, kind, c)
            if c == 0:
                return
            key = (kappa, kind, power)
            s = out.get(key, 0) + c
            if s:
                out[key] = s
            else:
                out.pop(key, None)

        for (k1, s1, p1), c1 in a.items():
            for (k2, s2, p2), c2 in b.items():
                p = p1 + p2
                c = c1 * c2
                if k1 == zero:          # cos(0) = 1
                    put(k2, s2, p, c)
                    continue
                if k2 == zero:
                    put(k1, s1, p, c)
                    continue
                h = c / 2
                kp = tuple(x + y for x, y in zip(k1, k2))
                km = tuple(x - y for x, y in zip(k1, k2))
                if s1 == COS and s2 == COS:
                    put(kp, COS, p, h)
                    put(km, COS, p, h)
                elif s1 == SIN and s2 == SIN:
                    put(km, COS, p, h)
                    put(kp, COS, p, -h)
                elif s1 == SIN:
                    put(kp, SIN, p, h)
                    put(km, SIN, p, h)
                else:
                    put(kp, SIN, p, h)
                    put(km, SIN, p, -h)
        return TrigScalar(self.dim, out)

    __rmul__ = __mul__

    def partial(self, axis: int) -> "TrigScalar":
        """Exact partial derivative along coordinate ``axis``."""
        if not 0 <= axis < self.dim:
            raise IndexError(f"axis {axis} out of range for dimension {self.dim}")
        out: Dict[_Key, Fraction] = {}
        for (kappa, kind, power), c in self._terms.items():
            ka = kappa[axis]
            if ka == 0:
                continue
            if kind == COS:
                out[(kappa, SIN, power + 1)] = out.get((kappa, SIN, power + 1), 0) - c * ka
            else:
                out[(kappa, COS, power + 1)] = out.get((kappa, COS, power + 1), 0) + c * ka
        return TrigScalar._from_raw(self.dim, out)

    # -- comparison -------------------------------------------------------

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = TrigScalar.const(self.dim, other)
        if not isinstance(other, TrigScalar):
            return NotImplemented
        return self.dim == other.dim and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.dim, frozenset(self._terms.items())))
        return self._hash

    # -- numerics (test oracles only) ------------------------------------

    def evaluate(self, x: Sequence[float], tau: float = 2 * math.pi) -> float:
        """Floating point value at a point; used only by numerical oracles."""
        total = 0.0
        for (kappa, kind, power), c in self._terms.items():
            phase = 2 * math.pi * sum(k * xi for k, xi in zip(kappa, x))
            base = math.cos(phase) if kind == COS else math.sin(phase)
            total += float(c) * tau ** power * base
        return total

    # -- text -------------------------------------------------------------

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for kappa, (cp, sp) in sorted(self.modes().items()):
            for poly, name in ((cp, "cos"), (sp, "sin")):
                if not poly:
                    continue
                ptxt = format_poly(poly)
                if not any(kappa):
                    parts.append(f"({ptxt})")
                else:
                    parts.append(f"({ptxt})*{name}{list(kappa)}")
        return " + ".join(parts)

    def to_json(self) -> dict:
        modes = []
        for kappa, (cp, sp) in sorted(self.modes().items()):
            entry = {"k": list(kappa), "cos": format_poly(cp)}
            if any(kappa):
                entry["sin"] = format_poly(sp)
            modes.append(entry)
        return {"modes": modes}

    @classmethod
    def from_json(cls, dim: int, doc) -> "TrigScalar":
        if isinstance(doc, (int, str)):
            return cls._from_raw(dim, {((0,) * dim, COS, p): c for p, c in parse_poly(str(doc)).items()})
        if not isinstance(doc, dict) or "modes" not in doc:
            raise ValueError(f"malformed scalar document: {doc!r}")
        raw: Dict[_Key, Fraction] = {}
        for entry in doc["modes"]:
            kappa = tuple(int(v) for v in entry["k"])
            if len(kappa) != dim:
                raise ValueError(f"frequency {list(kappa)} does not match dimension {dim}")
            if not _is_lex_nonneg(kappa):
                raise ValueError(f"frequency {list(kappa)} is not lexicographically nonnegative")
            for kind, field in ((COS, "cos"), (SIN, "sin")):
                if field not in entry:
                    continue
                for p, c in parse_poly(str(entry[field])).items():
                    kk, cc = _normalize(kappa, kind, c)
                    if cc:
                        raw[(kk, kind, p)] = raw.get((kk, kind, p), 0) + cc
        return cls._from_raw(dim, raw)


def format_rational(c: Fraction) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_poly(poly: Dict[int, Fraction]) -> str:
    """Render a polynomial in t as ``a0 + a1*t + a2*t^2``."""
    if not poly:
        return "0"
    parts = []
    for p in sorted(poly):
        c = format_rational(poly[p])
        if p == 0:
            parts.append(c)
        elif p == 1:
            parts.append(f"{c}*t")
        else:
            parts.append(f"{c}*t^{p}")
    return " + ".join(parts)


_TERM = re.compile(r"^\s*([+-]?\d+(?:/\d+)?)\s*(?:\*\s*t(?:\s*\^\s*(\d+))?)?\s*$")


def parse_poly(text: str) -> Dict[int, Fraction]:
    """Inverse of :func:`format_poly`; also accepts ``-`` as a separator."""
    text = text.strip()
    if not text:
        raise ValueError("empty polynomial")
    # turn binary minus into "+ -"
    text = re.sub(r"(?<=[\dt])\s*-\s*", " + -", text)
    out: Dict[int, Fraction] = {}
    for chunk in text.split("+"):
        if not chunk.strip():
            continue
        m = _TERM.match(chunk)
        if not m:
            raise ValueError(f"cannot parse polynomial term {chunk!r}")
        c = Fraction(m.group(1))
        if "t" in chunk:
            p = int(m.group(2)) if m.group(2) else 1
        else:
            p = 0
        out[p] = out.get(p, 0) + c
    return {p: c for p, c in out.items() if c != 0}


def as_scalar(dim: int, value) -> TrigScalar:
    """Coerce ``int``/``Fraction``/``TrigScalar`` to a ``TrigScalar``."""
    if isinstance(value, TrigScalar):
        return value
    return TrigScalar.const(dim, value)


def is_zero(value) -> bool:
    return not value


def random_scalar(rng, dim: int, max_freq: int = 1, n_modes: int = 2,
                  max_num: int = 3, allow_tau: bool = False) -> TrigScalar:
    """A small random scalar for property tests (``rng`` is a ``random.Random``)."""
    f = TrigScalar.const(dim, rng.randint(-max_num, max_num))
    for _ in range(n_modes):
        kappa = [rng.randint(-max_freq, max_freq) for _ in range(dim)]
        c = Fraction(rng.randint(-max_num, max_num), rng.randint(1, 2))
        power = rng.randint(0, 1) if allow_tau else 0
        if rng.random() < 0.5:
            f = f + TrigScalar.cos(dim, kappa, c, power)
        else:
            f = f + TrigScalar.sin(dim, kappa, c, power)
    return f
