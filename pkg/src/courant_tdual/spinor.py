"""
Invariant spinors of a standard Courant algebroid.

The spinor bundle of ``T*M + G + TM`` is ``Lambda T*M (x) S_g`` (graded
tensor product), with the density factors trivialized by the fixed
orientation.  An :class:`InvariantSpinor` stores the coefficient of
``(monomial) (x) (Fock basis state)`` for every pair.

Clifford action: ``gamma_{xi + r + X}(w (x) s) = (i_X w + xi ^ w) (x) s
+ (-1)^{|w|} w (x) r.s``.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .coeff_ring import TrigScalar, as_scalar
from .courant import (CourantData, IsoData, Section, apply_scalar_matrix, matrix_at, one_form_at,
                      pair_scalars, zero_scalar_matrix)
from .exterior import (THETA, THETA_TILDE, ComplexSignature, InvariantForm, apply_vector, bits, d_term,
                       frame_vector, popcount, transpose_sign, wedge_sign, _remap_positions, _apply_remap)
from .qla import (NotNilpotent, QuadraticLieAlgebra, SpinorModule, mat_id, mat_mul, matrix_exp_nilpotent,
                  clifford_exp)

Key = Tuple[int, int]


class UnsupportedK(ValueError):
    """The Lie algebra part of an isomorphism has no supported spin lift."""


class SpinorSpace:
    """The spinor module of one Courant algebroid model: signature plus Fock module."""

    def __init__(self, sig: ComplexSignature, g: QuadraticLieAlgebra):
        self.sig = sig
        self.g = g
        self.module: Optional[SpinorModule] = g.spinors if g.n else None
        self.fock_size = self.module.size if self.module else 1

    def basis(self) -> List["InvariantSpinor"]:
        """Constant spinors monomial (x) state: a spanning set of the invariant spinors over functions."""
        out = []
        for mask in range(1 << self.sig.n):
            for st in range(self.fock_size):
                out.append(InvariantSpinor(self, {(mask, st): TrigScalar.const(self.sig.base_dim, 1)}))
        return out

    def zero(self) -> "InvariantSpinor":
        return InvariantSpinor(self, {})

    def __eq__(self, other) -> bool:
        return isinstance(other, SpinorSpace) and self.sig == other.sig and self.g == other.g

    def __hash__(self):
        return hash((self.sig, self.g))


def _acc(out: Dict[Key, TrigScalar], key: Key, v: TrigScalar) -> None:
    if not v:
        return
    if key in out:
        s = out[key] + v
        if s:
            out[key] = s
        else:
            del out[key]
    else:
        out[key] = v


class InvariantSpinor:
    """Finite sum of coeff * (form monomial) (x) (Fock basis state)."""

    __slots__ = ("space", "terms")

    def __init__(self, space: SpinorSpace, terms: Optional[Dict[Key, TrigScalar]] = None):
        self.space = space
        self.terms = {k: v for k, v in (terms or {}).items() if v}

    @property
    def sig(self) -> ComplexSignature:
        return self.space.sig

    @classmethod
    def from_form(cls, space: SpinorSpace, form: InvariantForm, state: int = 0) -> "InvariantSpinor":
        return cls(space, {(m, state): c for m, c in form.terms.items()})

    def _new(self, terms) -> "InvariantSpinor":
        out = InvariantSpinor.__new__(InvariantSpinor)
        out.space = self.space
        out.terms = terms
        return out

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        return isinstance(other, InvariantSpinor) and self.space == other.space and self.terms == other.terms

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (m, st) in sorted(self.terms):
            word = "^".join(self.sig.names[p] for p in bits(m)) or "1"
            parts.append(f"[{self.terms[(m, st)]!r}] {word}|{st:b}>")
        return " + ".join(parts)

    def __add__(self, other: "InvariantSpinor") -> "InvariantSpinor":
        out = dict(self.terms)
        for k, v in other.terms.items():
            _acc(out, k, v)
        return self._new(out)

    def __neg__(self) -> "InvariantSpinor":
        return self._new({k: -v for k, v in self.terms.items()})

    def __sub__(self, other: "InvariantSpinor") -> "InvariantSpinor":
        return self + (-other)

    def __mul__(self, f) -> "InvariantSpinor":
        if isinstance(f, (int, Fraction)):
            if f == 0:
                return self._new({})
            return self._new({k: v * f for k, v in self.terms.items()})
        if isinstance(f, TrigScalar):
            out = {}
            for k, v in self.terms.items():
                p = v * f
                if p:
                    out[k] = p
            return self._new(out)
        return NotImplemented

    __rmul__ = __mul__

    def component(self, state: int) -> InvariantForm:
        """The form multiplying a Fock basis state."""
        return InvariantForm(self.sig, {m: c for (m, st), c in self.terms.items() if st == state})

    def states(self) -> List[int]:
        return sorted({st for (_, st) in self.terms})

    def parity_parts(self) -> Dict[int, "InvariantSpinor"]:
        out: Dict[int, Dict[Key, TrigScalar]] = {}
        for (m, st), c in self.terms.items():
            out.setdefault((popcount(m) + popcount(st)) & 1, {})[(m, st)] = c
        return {p: self._new(t) for p, t in out.items()}

    # -- elementary operators ----------------------------------------------

    def wedge_left(self, form: InvariantForm) -> "InvariantSpinor":
        """alpha ^ (w (x) s) = (alpha ^ w) (x) s."""
        out: Dict[Key, TrigScalar] = {}
        for (m, st), c in self.terms.items():
            for fm, fc in form.terms.items():
                s = wedge_sign(fm, m)
                if not s:
                    continue
                v = fc * c
                _acc(out, (fm | m, st), v if s > 0 else -v)
        return self._new(out)

    def interior(self, X: Sequence) -> "InvariantSpinor":
        out: Dict[Key, TrigScalar] = {}
        for p, xp in enumerate(X):
            if not xp:
                continue
            bit = 1 << p
            for (m, st), c in self.terms.items():
                if not m & bit:
                    continue
                pos = popcount(m & (bit - 1))
                v = c * xp
                _acc(out, (m & ~bit, st), -v if pos & 1 else v)
        return self._new(out)

    def fock(self, M: Sequence[Sequence], odd: bool) -> "InvariantSpinor":
        """w (x) s -> (-1)^{|M||w|} w (x) M s for a Clifford element of the given parity."""
        out: Dict[Key, TrigScalar] = {}
        n = len(M)
        for (m, st), c in self.terms.items():
            sgn = -1 if (odd and popcount(m) & 1) else 1
            for row in range(n):
                x = M[row][st]
                if not x:
                    continue
                v = c * x
                _acc(out, (m, row), v if sgn > 0 else -v)
        return self._new(out)

    def form_parity_sign(self) -> "InvariantSpinor":
        """w (x) s -> (-1)^{|w|} w (x) s."""
        return self._new({(m, st): (-c if popcount(m) & 1 else c) for (m, st), c in self.terms.items()})

    def d_forms(self) -> "InvariantSpinor":
        """d applied to the form of every Fock component (coefficients included)."""
        out: Dict[Key, TrigScalar] = {}
        sig = self.sig
        for (m, st), c in self.terms.items():
            for key, v in d_term(sig, m, c):
                _acc(out, (key, st), v)
        return self._new(out)

    def transform_forms(self, f: Callable[[InvariantForm], InvariantForm], target: SpinorSpace) -> "InvariantSpinor":
        out: Dict[Key, TrigScalar] = {}
        for st in self.states():
            w = f(self.component(st))
            for m, c in w.terms.items():
                _acc(out, (m, st), c)
        return InvariantSpinor(target, out)

    # -- serialization --------------------------------------------------------

    def to_json(self) -> list:
        sig = self.sig
        h = self.space.module.h if self.space.module else 0
        out = []
        for (m, st) in sorted(self.terms, key=lambda k: (popcount(k[0]), bits(k[0]), k[1])):
            out.append({"gens": [sig.names[p] for p in bits(m)], "fock": [i + 1 for i in range(h) if st >> i & 1],
                        "coeff": self.terms[(m, st)].to_json()})
        return out

    @classmethod
    def from_json(cls, space: SpinorSpace, doc: list) -> "InvariantSpinor":
        sig = space.sig
        out: Dict[Key, TrigScalar] = {}
        for t in doc:
            w = InvariantForm.from_json(sig, [{"gens": t["gens"], "coeff": t["coeff"]}])
            fock = [int(i) for i in t.get("fock", [])]
            h = space.module.h if space.module else 0
            if any(i < 1 or i > h for i in fock):
                raise ValueError("Fock index out of range")
            st = 0
            sign = 1
            # the listed wedge order of Fock generators may differ from the canonical one
            for i in fock:
                bit = 1 << (i - 1)
                if st & bit:
                    sign = 0
                    break
                if popcount(st >> i) & 1:
                    sign = -sign
                st |= bit
            if not sign:
                continue
            for m, c in w.terms.items():
                _acc(out, (m, st), c if sign > 0 else -c)
        return cls(space, out)


# -- Clifford action ---------------------------------------------------------

def gamma(u: Section, s: InvariantSpinor) -> InvariantSpinor:
    """Clifford action of an invariant section."""
    out = s.interior(u.X) + s.wedge_left(u.xi)
    if s.space.module is not None and any(u.r):
        M = s.space.module.gamma(u.r)
        out = out + s.fock(M, odd=True)
    return out


def fock_pairing_matrix(space: SpinorSpace):
    if space.module is None:
        return [[Fraction(1)]]
    return space.module.pairing_matrix


def spinor_pairing(s: InvariantSpinor, t: InvariantSpinor) -> InvariantForm:
    """<w (x) s, w~ (x) s~> = (-1)^{|s|(|w|+|w~|)} (w^t ^ w~)_top <s, s~>."""
    sig = s.sig
    P = fock_pairing_matrix(s.space)
    full = sig.full_mask
    out = TrigScalar.zero(sig.base_dim)
    for (m1, s1), c1 in s.terms.items():
        m2 = full & ~m1
        for (mm, s2), c2 in t.terms.items():
            if mm != m2:
                continue
            p = P[s1][s2]
            if not p:
                continue
            sign = wedge_sign(m1, m2) * transpose_sign(popcount(m1))
            if (popcount(s1) & 1) and ((popcount(m1) + popcount(m2)) & 1):
                sign = -sign
            v = c1 * c2 * p
            out = out + (v if sign > 0 else -v)
    return InvariantForm(sig, {full: out})


def integrated_pairing(s: InvariantSpinor, t: InvariantSpinor) -> Fraction:
    return spinor_pairing(s, t).integrate()


# -- the canonical Dirac generating operator ---------------------------------

class DiracOperator:
    """The canonical Dirac generating operator of invariant data."""

    def __init__(self, data: CourantData):
        self.data = data
        self.space = SpinorSpace(data.sig, data.g)
        sig, g = data.sig, data.g
        self.coframe = [InvariantForm.generator(sig, p) for p in range(sig.n)]
        mod = self.space.module
        if mod is not None:
            self.conn_lifts = [mod.lift(data.conn_at(frame_vector(sig, p))) for p in range(sig.n)]
            self.cartan = mod.cartan_matrix
        else:
            self.conn_lifts = []
            self.cartan = None

    def __call__(self, s: InvariantSpinor) -> InvariantSpinor:
        data = self.data
        out = s.d_forms() - s.wedge_left(data.H)
        mod = self.space.module
        if mod is None:
            return out
        for p, L in enumerate(self.conn_lifts):
            if any(x for row in L for x in row):
                out = out + s.fock(L, odd=False).wedge_left(self.coframe[p])
        # the two terms carrying (-1)^{|w|+1}
        extra = s.fock(self.cartan, odd=False) * Fraction(1, 4)
        for j, Rj in enumerate(data.R):
            if Rj:
                extra = extra + s.fock(mod.gammas[j], odd=False).wedge_left(Rj)
        return out - extra.form_parity_sign()


def dirac(data: CourantData, s: InvariantSpinor) -> InvariantSpinor:
    return DiracOperator(data)(s)


def spinor_action(data: CourantData, p: int, s: InvariantSpinor) -> InvariantSpinor:
    """Infinitesimal torus action of the fiber generator at position p on an invariant spinor.

    Lie derivatives of invariant forms vanish, so only the Clifford part
    lift(nabla_{X_p}) - 1/2 omega_{A_p} = lift(conn(X_p) + A_p) remains.
    """
    mod = s.space.module
    if mod is None:
        return s.space.zero()
    D = data.conn_at(frame_vector(data.sig, p))
    A = data.action_at(p)
    total = [[x + y for x, y in zip(r1, r2)] for r1, r2 in zip(D, A)]
    return s.fock(mod.lift(total), odd=False)


# -- pullback and pushforward -----------------------------------------------

def pullback_spinor(s: InvariantSpinor, target: SpinorSpace) -> InvariantSpinor:
    remap = _remap_positions(s.sig, target.sig)
    out = {}
    for (m, st), c in s.terms.items():
        out[(_apply_remap(m, remap), st)] = c
    return InvariantSpinor(target, out)


def pushforward_spinor(s: InvariantSpinor, kind: str, target: Optional[SpinorSpace] = None) -> InvariantSpinor:
    """Integrate over the fibers of one kind, with the sign (-1)^{r|s| + n r + r(r-1)/2}."""
    sig = s.sig
    r = len(sig.fiber_positions(kind))
    tsig = sig.without(kind)
    if target is None:
        target = SpinorSpace(tsig, s.space.g)
    n = tsig.n
    out: Dict[Key, TrigScalar] = {}
    for st in s.states():
        w = s.component(st).fiber_integrate(kind)
        e = r * (popcount(st) & 1) + n * r + r * (r - 1) // 2
        for m, c in w.terms.items():
            _acc(out, (m, st), -c if e & 1 else c)
    return InvariantSpinor(target, out)


# -- spin lifts of isomorphisms -----------------------------------------------

def _phi_operator(I: IsoData, space: SpinorSpace):
    """x = -sum_p gamma_{alpha_p} gamma_{Phi(X_p)} as a function on spinors."""
    sig, g = I.sig, I.g
    mod = space.module
    terms = []
    for p in range(sig.n):
        phi = I.phi_at(frame_vector(sig, p))
        if any(phi):
            terms.append((InvariantForm.generator(sig, p), mod.gamma(phi)))

    def apply(s: InvariantSpinor) -> InvariantSpinor:
        out = s.space.zero()
        for alpha, G in terms:
            out = out - s.fock(G, odd=True).wedge_left(alpha)
        return out

    return apply, bool(terms)


class SpinLift:
    """I_S = e^{-beta} ^ o exp(x_Phi) o K^S."""

    def __init__(self, I: IsoData, space: SpinorSpace, K_log: Optional[Sequence[Sequence]] = None):
        self.I = I
        self.space = space
        g = I.g
        n = g.n
        self.exp_beta = _form_exp(-I.beta)
        self.k_lift = None
        if n:
            if I.K != mat_id(n):
                if K_log is None:
                    raise UnsupportedK("K is not the identity and no logarithm was supplied")
                D = [[Fraction(x) for x in row] for row in K_log]
                try:
                    expD = matrix_exp_nilpotent(D)
                except NotNilpotent as exc:
                    raise UnsupportedK("the logarithm of K is not nilpotent") from exc
                if expD != I.K:
                    raise UnsupportedK("exp of the supplied logarithm differs from K")
                L = space.module.lift(D)
                try:
                    self.k_lift = matrix_exp_nilpotent(L, bound=space.module.size)
                except NotNilpotent as exc:
                    raise UnsupportedK("spin lift of the logarithm is not nilpotent") from exc
            self.phi_apply, self.has_phi = _phi_operator(I, space)
        else:
            self.has_phi = False

    def __call__(self, s: InvariantSpinor) -> InvariantSpinor:
        if self.k_lift is not None:
            s = s.fock(self.k_lift, odd=False)
        if self.has_phi:
            s = clifford_exp(self.phi_apply, s, bound=2 * self.I.sig.n + 2)
        if self.exp_beta.terms != {0: TrigScalar.const(self.space.sig.base_dim, 1)}:
            s = s.wedge_left(self.exp_beta)
        return s


def _form_exp(beta: InvariantForm) -> InvariantForm:
    from .exterior import form_exp
    return form_exp(beta)


def spin_lift(I: IsoData, space: SpinorSpace, K_log=None) -> SpinLift:
    return SpinLift(I, space, K_log)


# -- graded commutators -----------------------------------------------------

def dirac_double_bracket(D: DiracOperator, u: Section, v: Section, s: InvariantSpinor) -> InvariantSpinor:
    """[[D, gamma_u], gamma_v] s with graded commutators (D, gamma odd)."""

    def Du(t):
        return D(gamma(u, t)) + gamma(u, D(t))

    return Du(gamma(v, s)) - gamma(v, Du(s))
