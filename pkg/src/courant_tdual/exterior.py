"""
The invariant de Rham complex of a torus bundle over a torus.

Invariant forms on the total space of a principal torus bundle with
connection are polynomials in the base coframe ``dx_a`` and the connection
forms ``theta_i`` with coefficients that are functions on the base.  The
differential is fixed by ``d(dx_a) = 0`` and ``d(theta_i) = F_i`` with ``F_i``
a closed basic 2-form.  The correspondence space of a T-duality carries two
families of connection forms, ``theta`` and ``theta~``.

Generators are ordered ``dx_1 < ... < dx_m < theta_1 < ... < theta~_1 < ...``
and a monomial is stored as a bitmask over that order.  Every sign in the
package follows from this order.

The frame ``X_p`` dual to the coframe (horizontal lifts of the coordinate
fields, then the fundamental vertical fields) is the global frame used
wherever a formula needs one.  Its brackets are
``[X_a, X_b] = -F_i(X_a, X_b) X_i``, all others vanish.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .coeff_ring import TrigScalar, as_scalar

DX = "dx"
THETA = "theta"
THETA_TILDE = "thetaTilde"

_PREFIX = {DX: "dx", THETA: "th", THETA_TILDE: "tt"}


def popcount(x: int) -> int:
    return bin(x).count("1")


def bits(mask: int) -> List[int]:
    out = []
    p = 0
    while mask:
        if mask & 1:
            out.append(p)
        mask >>= 1
        p += 1
    return out


@lru_cache(maxsize=None)
def wedge_sign(a: int, b: int) -> int:
    """Sign of (monomial a) ^ (monomial b) relative to the sorted monomial a|b.

    Returns 0 when the monomials share a generator.
    """
    if a & b:
        return 0
    swaps = 0
    for j in bits(b):
        swaps += popcount(a >> (j + 1))
    return -1 if swaps & 1 else 1


def transpose_sign(degree: int) -> int:
    return -1 if (degree * (degree - 1) // 2) & 1 else 1


@dataclass(frozen=True)
class Generator:
    """A fiber generator: its name, kind and curvature (basic 2-form).

    ``curvature`` maps a base bitmask (two ``dx`` bits) to its coefficient.
    """
    name: str
    kind: str
    curvature: Tuple[Tuple[int, TrigScalar], ...] = ()

    def curvature_dict(self) -> Dict[int, TrigScalar]:
        return dict(self.curvature)


class ComplexSignature:
    """Generators of an invariant complex and their differentials."""

    def __init__(self, base_dim: int, fibers: Sequence[Generator] = ()):
        self.base_dim = base_dim
        fibers = tuple(fibers)
        kinds = [g.kind for g in fibers]
        if any(k not in (THETA, THETA_TILDE) for k in kinds):
            raise ValueError("fiber generators must be theta or thetaTilde")
        if kinds != sorted(kinds, key=lambda k: 0 if k == THETA else 1):
            raise ValueError("theta generators must precede thetaTilde generators")
        base_mask = (1 << base_dim) - 1
        for g in fibers:
            for mask, c in g.curvature:
                if mask & ~base_mask or popcount(mask) != 2:
                    raise ValueError(f"curvature of {g.name} is not a basic 2-form")
                if c.dim != base_dim:
                    raise ValueError(f"curvature of {g.name} has wrong base dimension")
            if not _is_closed_basic(base_dim, g.curvature):
                raise ValueError(f"curvature of {g.name} is not closed")
        self.fibers = fibers
        self.names = tuple(f"dx{a + 1}" for a in range(base_dim)) + tuple(g.name for g in fibers)
        if len(set(self.names)) != len(self.names):
            raise ValueError("generator names must be distinct")
        self.n = len(self.names)
        self.index = {name: p for p, name in enumerate(self.names)}
        self.kinds = (DX,) * base_dim + tuple(kinds)
        self.base_mask = base_mask
        self.full_mask = (1 << self.n) - 1
        self._curv: Dict[int, Dict[int, TrigScalar]] = {
            base_dim + i: g.curvature_dict() for i, g in enumerate(fibers)}
        self._key = (base_dim, tuple((g.name, g.kind, tuple(sorted(g.curvature, key=lambda t: t[0])))
                                     for g in fibers))

    # -- construction -----------------------------------------------------

    @classmethod
    def torus_bundle(cls, base_dim: int, curvatures: Sequence[Mapping[int, TrigScalar]],
                     kind: str = THETA) -> "ComplexSignature":
        prefix = _PREFIX[kind]
        gens = [Generator(f"{prefix}{i + 1}", kind, _clean_curv(c)) for i, c in enumerate(curvatures)]
        return cls(base_dim, gens)

    def mask_of_kind(self, kind: str) -> int:
        return sum(1 << p for p, k in enumerate(self.kinds) if k == kind)

    def fiber_positions(self, kind: Optional[str] = None) -> List[int]:
        return [p for p, k in enumerate(self.kinds) if k != DX and (kind is None or k == kind)]

    def curvature(self, p: int) -> Dict[int, TrigScalar]:
        return self._curv.get(p, {})

    def without(self, kind: str) -> "ComplexSignature":
        return ComplexSignature(self.base_dim, [g for g in self.fibers if g.kind != kind])

    def base(self) -> "ComplexSignature":
        return ComplexSignature(self.base_dim, ())

    def join(self, other: "ComplexSignature") -> "ComplexSignature":
        """Correspondence space: theta generators of self, thetaTilde of other."""
        if other.base_dim != self.base_dim:
            raise ValueError("base dimensions differ")
        gens = [g for g in self.fibers if g.kind == THETA] + [g for g in other.fibers if g.kind == THETA_TILDE]
        return ComplexSignature(self.base_dim, gens)

    def __eq__(self, other) -> bool:
        return isinstance(other, ComplexSignature) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"ComplexSignature({', '.join(self.names)})"

    def to_json(self) -> dict:
        return {
            "base_dim": self.base_dim,
            "generators": [
                {"name": g.name, "kind": g.kind,
                 "curvature": _terms_json(self.base_dim, self.names, g.curvature_dict())}
                for g in self.fibers],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ComplexSignature":
        m = int(doc["base_dim"])
        base_names = {f"dx{a + 1}": a for a in range(m)}
        gens = []
        for g in doc.get("generators", []):
            curv = _terms_from_json(m, base_names, g.get("curvature", []))
            gens.append(Generator(g["name"], g["kind"], _clean_curv(curv)))
        return cls(m, gens)


def _is_closed_basic(dim: int, terms) -> bool:
    out: Dict[int, TrigScalar] = {}
    for mask, c in terms:
        for a in range(dim):
            bit = 1 << a
            if mask & bit:
                continue
            da = c.partial(a)
            if not da:
                continue
            key = mask | bit
            v = da if wedge_sign(bit, mask) > 0 else -da
            out[key] = out[key] + v if key in out else v
    return all(not v for v in out.values())


def _clean_curv(curv: Mapping[int, TrigScalar]) -> Tuple[Tuple[int, TrigScalar], ...]:
    return tuple(sorted(((mask, c) for mask, c in curv.items() if c), key=lambda t: t[0]))


def _terms_json(dim: int, names: Sequence[str], terms: Mapping[int, TrigScalar]) -> list:
    out = []
    for mask in sorted(terms, key=lambda m: (popcount(m), bits(m))):
        c = terms[mask]
        if c:
            out.append({"gens": [names[p] for p in bits(mask)], "coeff": c.to_json()})
    return out


def _terms_from_json(dim: int, index: Mapping[str, int], doc) -> Dict[int, TrigScalar]:
    out: Dict[int, TrigScalar] = {}
    for t in doc:
        gens = t["gens"]
        mask = 0
        for name in gens:
            if name not in index:
                raise ValueError(f"unknown generator {name!r}")
            mask |= 1 << index[name]
        if popcount(mask) != len(gens):
            continue  # repeated generator: the monomial vanishes
        # the listed order may differ from the canonical one
        sign = _order_sign([index[nm] for nm in gens])
        c = TrigScalar.from_json(dim, t["coeff"])
        if sign < 0:
            c = -c
        out[mask] = out.get(mask, TrigScalar.zero(dim)) + c
    return {k: v for k, v in out.items() if v}


def _order_sign(seq: Sequence[int]) -> int:
    inv = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return -1 if inv & 1 else 1


class InvariantForm:
    """An element of the invariant complex: bitmask -> coefficient on the base."""

    __slots__ = ("sig", "terms")

    def __init__(self, sig: ComplexSignature, terms: Optional[Dict[int, TrigScalar]] = None):
        self.sig = sig
        self.terms: Dict[int, TrigScalar] = {k: v for k, v in (terms or {}).items() if v}

    # -- construction -----------------------------------------------------

    @classmethod
    def zero(cls, sig: ComplexSignature) -> "InvariantForm":
        return cls(sig, {})

    @classmethod
    def scalar(cls, sig: ComplexSignature, f) -> "InvariantForm":
        return cls(sig, {0: as_scalar(sig.base_dim, f)})

    @classmethod
    def monomial(cls, sig: ComplexSignature, names: Sequence[str], coeff=1) -> "InvariantForm":
        """The wedge of the named generators in the given order, times ``coeff``."""
        idx = [sig.index[n] for n in names]
        if len(set(idx)) != len(idx):
            return cls(sig, {})
        mask = sum(1 << p for p in idx)
        c = as_scalar(sig.base_dim, coeff)
        if _order_sign(idx) < 0:
            c = -c
        return cls(sig, {mask: c})

    @classmethod
    def generator(cls, sig: ComplexSignature, p: int, coeff=1) -> "InvariantForm":
        return cls(sig, {1 << p: as_scalar(sig.base_dim, coeff)})

    def _new(self, terms: Dict[int, TrigScalar]) -> "InvariantForm":
        out = InvariantForm.__new__(InvariantForm)
        out.sig = self.sig
        out.terms = terms
        return out

    # -- queries ----------------------------------------------------------

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, mask: int) -> TrigScalar:
        return self.terms.get(mask, TrigScalar.zero(self.sig.base_dim))

    def degrees(self) -> List[int]:
        return sorted({popcount(m) for m in self.terms})

    def degree_part(self, p: int) -> "InvariantForm":
        return self._new({m: c for m, c in self.terms.items() if popcount(m) == p})

    def is_basic(self) -> bool:
        return all(not (m & ~self.sig.base_mask) for m in self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, InvariantForm):
            return NotImplemented
        return self.sig == other.sig and self.terms == other.terms

    def __hash__(self):
        return hash((self.sig, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda m: (popcount(m), bits(m))):
            word = "^".join(self.sig.names[p] for p in bits(m)) or "1"
            parts.append(f"[{self.terms[m]!r}] {word}")
        return " + ".join(parts)

    # -- linear structure -------------------------------------------------

    def __add__(self, other: "InvariantForm") -> "InvariantForm":
        if not isinstance(other, InvariantForm):
            return NotImplemented
        _check_sig(self, other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out[m] + c if m in out else c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return self._new(out)

    def __neg__(self) -> "InvariantForm":
        return self._new({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "InvariantForm") -> "InvariantForm":
        return self + (-other)

    def __mul__(self, f) -> "InvariantForm":
        """Multiplication by a scalar function (``TrigScalar``, ``int``, ``Fraction``)."""
        if isinstance(f, InvariantForm):
            return self.wedge(f)
        if isinstance(f, (int, Fraction)):
            if f == 0:
                return self._new({})
            return self._new({m: c * f for m, c in self.terms.items()})
        if isinstance(f, TrigScalar):
            if not f:
                return self._new({})
            out = {}
            for m, c in self.terms.items():
                p = c * f
                if p:
                    out[m] = p
            return self._new(out)
        return NotImplemented

    __rmul__ = __mul__

    # -- algebra ----------------------------------------------------------

    def wedge(self, other: "InvariantForm") -> "InvariantForm":
        _check_sig(self, other)
        out: Dict[int, TrigScalar] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                s = wedge_sign(m1, m2)
                if not s:
                    continue
                p = c1 * c2
                if s < 0:
                    p = -p
                key = m1 | m2
                q = out[key] + p if key in out else p
                if q:
                    out[key] = q
                else:
                    out.pop(key, None)
        return self._new(out)

    def __xor__(self, other: "InvariantForm") -> "InvariantForm":
        return self.wedge(other)

    def d(self) -> "InvariantForm":
        """Exterior derivative in the invariant complex."""
        out: Dict[int, TrigScalar] = {}
        for m, c in self.terms.items():
            for key, v in d_term(self.sig, m, c):
                q = out[key] + v if key in out else v
                if q:
                    out[key] = q
                else:
                    out.pop(key, None)
        return self._new(out)

    def interior(self, vec: Sequence) -> "InvariantForm":
        """Contraction with the vector field sum_p vec[p] X_p."""
        out: Dict[int, TrigScalar] = {}
        for p, vp in enumerate(vec):
            if not vp:
                continue
            for key, v in interior_frame_terms(self, p):
                v = v * vp
                q = out[key] + v if key in out else v
                if q:
                    out[key] = q
                else:
                    out.pop(key, None)
        return self._new(out)

    def contract(self, p: int) -> "InvariantForm":
        """Contraction with the frame field X_p."""
        out: Dict[int, TrigScalar] = {}
        for key, v in interior_frame_terms(self, p):
            q = out[key] + v if key in out else v
            if q:
                out[key] = q
            else:
                out.pop(key, None)
        return self._new(out)

    def lie(self, vec: Sequence) -> "InvariantForm":
        """Lie derivative along an invariant vector field (Cartan formula)."""
        return self.interior(vec).d() + self.d().interior(vec)

    def evaluate(self, *vectors: Sequence) -> TrigScalar:
        """Value of a p-form on p vector fields (determinant convention)."""
        form = self
        for vec in vectors:
            form = form.interior(vec)
        # i_{Y} i_{X} w = w(X, Y); contracting in order X then Y yields that
        return form.coeff(0) if form.terms else TrigScalar.zero(self.sig.base_dim)

    def transpose(self) -> "InvariantForm":
        return self._new({m: (c if transpose_sign(popcount(m)) > 0 else -c) for m, c in self.terms.items()})

    def top(self) -> "InvariantForm":
        full = self.sig.full_mask
        return self._new({m: c for m, c in self.terms.items() if m == full})

    def top_coeff(self) -> TrigScalar:
        return self.coeff(self.sig.full_mask)

    def integrate(self) -> Fraction:
        """Integral of the top-degree part (unit base and fiber volumes)."""
        return self.top_coeff().harmonic_part()

    def fiber_integrate(self, kind: str = THETA) -> "InvariantForm":
        """Integrate over the fibers of the given kind.

        The fiber monomial is moved to the far right with the sign of the
        permutation; terms of lower fiber degree are discarded.
        """
        fmask = self.sig.mask_of_kind(kind)
        target = self.sig.without(kind)
        remap = _remap_positions(self.sig, target)
        out: Dict[int, TrigScalar] = {}
        for m, c in self.terms.items():
            if m & fmask != fmask:
                continue
            rest = m & ~fmask
            s = wedge_sign(rest, fmask)
            key = _apply_remap(rest, remap)
            out[key] = -c if s < 0 else c
        return InvariantForm(target, out)

    def embed(self, target: ComplexSignature) -> "InvariantForm":
        """Pullback along a projection: inclusion of generators by name."""
        remap = _remap_positions(self.sig, target)
        if any(v is None for p, v in remap.items()):
            raise ValueError("target signature lacks generators of the source")
        for p in self.sig.fiber_positions():
            q = remap[p]
            if target.curvature(q) != self.sig.curvature(p):
                raise ValueError(f"curvature of {self.sig.names[p]} differs in target signature")
        return InvariantForm(target, {_apply_remap(m, remap): c for m, c in self.terms.items()})

    def restrict(self, target: ComplexSignature) -> "InvariantForm":
        """Inverse of :meth:`embed` on forms that only use target generators."""
        inv = _remap_positions(target, self.sig)
        back = {q: p for p, q in inv.items()}
        out = {}
        for m, c in self.terms.items():
            key = 0
            for q in bits(m):
                if q not in back:
                    raise ValueError(f"form uses generator {self.sig.names[q]} absent from target")
                key |= 1 << back[q]
            out[key] = c
        return InvariantForm(target, out)

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {"terms": _terms_json(self.sig.base_dim, self.sig.names, self.terms)}

    @classmethod
    def from_json(cls, sig: ComplexSignature, doc) -> "InvariantForm":
        terms = doc["terms"] if isinstance(doc, dict) else doc
        return cls(sig, _terms_from_json(sig.base_dim, sig.index, terms))


def _check_sig(a: InvariantForm, b: InvariantForm) -> None:
    if a.sig is not b.sig and a.sig != b.sig:
        raise ValueError(f"signature mismatch: {a.sig} vs {b.sig}")


def _remap_positions(src: ComplexSignature, dst: ComplexSignature) -> Dict[int, Optional[int]]:
    if src.base_dim != dst.base_dim:
        raise ValueError("base dimensions differ")
    return {p: dst.index.get(name) for p, name in enumerate(src.names)}


def _apply_remap(mask: int, remap: Mapping[int, Optional[int]]) -> int:
    out = 0
    for p in bits(mask):
        q = remap[p]
        if q is None:
            raise ValueError("generator missing in target")
        out |= 1 << q
    return out


def d_term(sig: ComplexSignature, mask: int, c: TrigScalar):
    """Terms (mask, coeff) of d(c * monomial)."""
    out = []
    # derivative of the coefficient
    for a in range(sig.base_dim):
        bit = 1 << a
        if mask & bit:
            continue
        da = c.partial(a)
        if not da:
            continue
        s = wedge_sign(bit, mask)
        out.append((mask | bit, da if s > 0 else -da))
    # derivative of the generators: d(theta_p) = F_p, F_p even
    if mask & ~sig.base_mask:
        for pos, p in enumerate(bits(mask)):
            curv = sig.curvature(p)
            if not curv:
                continue
            rest = mask & ~(1 << p)
            sgn = -1 if pos & 1 else 1
            for fm, fc in curv.items():
                s = wedge_sign(fm, rest)
                if not s:
                    continue
                v = c * fc
                if s * sgn < 0:
                    v = -v
                out.append((fm | rest, v))
    return out


def interior_frame_terms(form: InvariantForm, p: int):
    """Terms of i_{X_p} form."""
    bit = 1 << p
    out = []
    for m, c in form.terms.items():
        if not m & bit:
            continue
        pos = popcount(m & (bit - 1))
        out.append((m & ~bit, -c if pos & 1 else c))
    return out


# -- helpers on families of forms ------------------------------------------

def zero_vector(sig: ComplexSignature) -> Tuple[TrigScalar, ...]:
    z = TrigScalar.zero(sig.base_dim)
    return tuple(z for _ in range(sig.n))


def frame_vector(sig: ComplexSignature, p: int, coeff=1) -> Tuple[TrigScalar, ...]:
    z = TrigScalar.zero(sig.base_dim)
    return tuple(as_scalar(sig.base_dim, coeff) if q == p else z for q in range(sig.n))


def apply_vector(sig: ComplexSignature, vec: Sequence, f: TrigScalar) -> TrigScalar:
    """Derivative of a basic function along an invariant vector field."""
    out = TrigScalar.zero(sig.base_dim)
    for a in range(sig.base_dim):
        if vec[a]:
            out = out + vec[a] * f.partial(a)
    return out


def vector_bracket(sig: ComplexSignature, X: Sequence, Y: Sequence) -> Tuple[TrigScalar, ...]:
    """Lie bracket of invariant vector fields.

    Uses e([X,Y]) = X(e(Y)) - Y(e(X)) - de(X,Y) for every coframe element e.
    """
    Xf = InvariantForm.zero(sig)
    out = []
    for p in range(sig.n):
        v = apply_vector(sig, X, Y[p]) - apply_vector(sig, Y, X[p])
        curv = sig.curvature(p)
        if curv:
            F = InvariantForm(sig, dict(curv))
            v = v - F.evaluate(X, Y)
        out.append(v)
    return tuple(out)


def vector_to_json(vec: Sequence[TrigScalar]) -> list:
    return [c.to_json() for c in vec]


def one_form_from_components(sig: ComplexSignature, comps: Sequence) -> InvariantForm:
    return InvariantForm(sig, {1 << p: as_scalar(sig.base_dim, c) for p, c in enumerate(comps)})


def form_exp(beta: InvariantForm) -> InvariantForm:
    """exp(beta) for an even form (finite sum)."""
    sig = beta.sig
    out = InvariantForm.scalar(sig, 1)
    term = InvariantForm.scalar(sig, 1)
    k = 0
    while True:
        k += 1
        term = term.wedge(beta) * Fraction(1, k)
        if not term:
            break
        out = out + term
    return out
