"""
T-duality for invariant standard Courant algebroids over torus bundles.

Given data ``E`` over ``M -> B`` built from base data, :func:`dualize`
produces the dual data over ``M~ -> B`` (dual curvatures ``K_i``), the
isomorphism ``F = (beta, id, Phi)`` between the pullbacks to the
correspondence space ``N = M x_B M~`` and the maps ``tau`` (spinors) and
``rho`` (sections).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from .coeff_ring import TrigScalar, as_scalar
from .courant import (CourantData, IsoData, Residual, Section, all_zero, build_from_base_data, decompose,
                      iso_relations, pair_scalars, pair_form_scalar, pair_wedge,
                      transport_data, zero_forms)
from .exterior import THETA, THETA_TILDE, ComplexSignature, InvariantForm, bits, frame_vector, popcount
from .qla import QuadraticLieAlgebra, mat_id
from .spinor import (DiracOperator, InvariantSpinor, SpinorSpace, pullback_spinor, pushforward_spinor,
                     spin_lift, spinor_action)


class NotClosed(ValueError):
    def __init__(self, index: int, residual: InvariantForm):
        super().__init__(f"K_{index + 1} is not closed: dK = {residual!r}")
        self.index = index
        self.residual = residual


class NotIntegral(ValueError):
    def __init__(self, index: int, offending: Dict[str, Fraction]):
        super().__init__(f"K_{index + 1} is not integral: {offending}")
        self.index = index
        self.offending = offending


class SingularSystem(ValueError):
    """The lift system for rho is singular (the isomorphism is degenerate)."""


class NotInvariantInput(ValueError):
    """A spinor passed to tau is not invariant under the torus."""


# -- base data recovered from invariant data ---------------------------------

@dataclass
class BaseData:
    """The pieces of invariant data that the duality construction uses."""
    sig: ComplexSignature
    g: QuadraticLieAlgebra
    r: List[List[TrigScalar]]
    rfrak: List[InvariantForm]
    omega_B: List[List[InvariantForm]]
    H3: InvariantForm
    H2: List[InvariantForm]
    F: List[InvariantForm]


def base_data(data: CourantData) -> BaseData:
    """Recover r_i, rfrak, nabla^B, H3 and H2 (all on the base) from invariant data."""
    dec = decompose(data)
    g, sig = data.g, data.sig
    base = sig.base()
    k = len(dec.fibers)
    r = [g.ad_inverse(A) if g.n else [] for A in dec.A]
    r = [[as_scalar(sig.base_dim, x) for x in ri] for ri in r]
    rfrak = []
    for c in range(g.n):
        v = dec.R2[c]
        for i in range(k):
            if r[i][c]:
                v = v + dec.F[i] * r[i][c]
        rfrak.append(v.restrict(base))
    omega_B = [[x.restrict(base) for x in row] for row in dec.conn_theta]
    return BaseData(base, g, r, rfrak, omega_B, dec.H3.restrict(base), [h.restrict(base) for h in dec.H2],
                    [f.restrict(base) for f in dec.F])


# -- K forms ------------------------------------------------------------------

@dataclass
class KForm:
    form: InvariantForm
    closed: bool
    integral: bool
    offending: Dict[str, Fraction] = field(default_factory=dict)


def harmonic_coefficients(form: InvariantForm) -> Dict[str, Fraction]:
    """Harmonic (constant, tau-free) coefficient of each monomial of a basic form."""
    out = {}
    for m, c in sorted(form.terms.items()):
        h = c.harmonic_part()
        if h:
            out["^".join(form.sig.names[p] for p in bits(m))] = h
    return out


def k_forms(bd: BaseData) -> List[InvariantForm]:
    g, dim = bd.g, bd.sig.base_dim
    out = []
    for i, ri in enumerate(bd.r):
        v = bd.H2[i]
        if g.n:
            v = v + pair_form_scalar(g, bd.rfrak, ri, bd.sig) * 2
            for j, rj in enumerate(bd.r):
                c = pair_scalars(g, ri, rj, dim)
                if c:
                    v = v - bd.F[j] * c
        out.append(v)
    return out


def compute_k_forms(data: CourantData, strict: bool = True) -> List[KForm]:
    """K_i = H2^i + 2 <rfrak, r_i> - <r_i, r_j> F_j, checked closed and integral."""
    bd = base_data(data)
    ks = k_forms(bd)
    out = []
    for i, K in enumerate(ks):
        dK = K.d()
        bad = {name: h for name, h in harmonic_coefficients(K).items() if h.denominator != 1}
        out.append(KForm(K, not dK, not bad, bad))
        if strict and dK:
            raise NotClosed(i, dK)
        if strict and bad:
            raise NotIntegral(i, bad)
    return out


# -- the duality package --------------------------------------------------------

@dataclass
class DualityPackage:
    source: CourantData
    dual: CourantData
    F: IsoData
    r_tilde: List[List[TrigScalar]]

    @property
    def N(self) -> ComplexSignature:
        return self.F.sig

    @property
    def g(self) -> QuadraticLieAlgebra:
        return self.source.g

    def source_pullback(self) -> CourantData:
        return self.source.pullback(self.N)

    def dual_pullback(self) -> CourantData:
        return self.dual.pullback(self.N)

    def to_json(self) -> dict:
        return {"kind": "duality-package", "source": self.source.to_json(), "dual": self.dual.to_json(),
                "correspondence": self.N.to_json(), "F": self.F.to_json(),
                "rTilde": [[x.to_json() for x in ri] for ri in self.r_tilde]}

    @classmethod
    def from_json(cls, doc: dict) -> "DualityPackage":
        if doc.get("kind") != "duality-package":
            raise ValueError("not a duality package document")
        source = CourantData.from_json(doc["source"])
        dual = CourantData.from_json(doc["dual"])
        N = ComplexSignature.from_json(doc["correspondence"])
        F = IsoData.from_json(N, source.g, doc["F"])
        dim = N.base_dim
        rt = [[TrigScalar.from_json(dim, x) for x in ri] for ri in doc.get("rTilde", [])]
        return cls(source, dual, F, rt)


def correspondence_space(M: ComplexSignature, Mt: ComplexSignature) -> ComplexSignature:
    return M.join(Mt)


def dualize(data: CourantData, r_tilde: Optional[Sequence[Sequence]] = None, name: Optional[str] = None,
            check: bool = True) -> DualityPackage:
    """Build the T-dual data and the isomorphism F on the correspondence space."""
    ks = compute_k_forms(data, strict=True)
    bd = base_data(data)
    g, base = bd.g, bd.sig
    dim = base.base_dim
    k = len(ks)
    if r_tilde is None:
        r_tilde = [[0] * g.n for _ in range(k)]
    r_tilde = [[as_scalar(dim, x) for x in ri] for ri in r_tilde]
    if len(r_tilde) != k or any(len(ri) != g.n for ri in r_tilde):
        raise ValueError("rTilde needs one g-valued section per fiber")
    K = [kf.form.restrict(base) for kf in ks]
    # dual H2 pieces
    H2t = []
    for i in range(k):
        v = bd.F[i]
        if g.n:
            v = v - pair_form_scalar(g, bd.rfrak, r_tilde[i], base) * 2
            for j in range(k):
                c = pair_scalars(g, r_tilde[i], r_tilde[j], dim)
                if c:
                    v = v + K[j] * c
        H2t.append(v)
    dual = build_from_base_data(g, dim, K, r_tilde, H3=bd.H3, H2=H2t, omega_B=bd.omega_B if g.n else None,
                                kind=THETA_TILDE, name=name if name is not None else (data.name + "~" if data.name else ""),
                                check=check)
    N = correspondence_space(data.sig, dual.sig)
    th = [InvariantForm.generator(N, p) for p in N.fiber_positions(THETA)]
    tt = [InvariantForm.generator(N, p) for p in N.fiber_positions(THETA_TILDE)]
    beta = InvariantForm.zero(N)
    for i in range(k):
        for j in range(k):
            f = (pair_scalars(g, bd.r[i], r_tilde[j], dim) if g.n else TrigScalar.zero(dim)) - int(i == j)
            if f:
                beta = beta + th[i].wedge(tt[j]) * f
    Phi = zero_forms(N, g.n)
    for c in range(g.n):
        v = Phi[c]
        for i in range(k):
            if r_tilde[i][c]:
                v = v + tt[i] * r_tilde[i][c]
            if bd.r[i][c]:
                v = v - th[i] * bd.r[i][c]
        Phi[c] = v
    F = IsoData(N, g, beta, mat_id(g.n), Phi)
    return DualityPackage(data, dual, F, r_tilde)


# -- verification -----------------------------------------------------------------

def _det(M: List[List[TrigScalar]], dim: int) -> TrigScalar:
    n = len(M)
    if n == 0:
        return TrigScalar.const(dim, 1)
    if n == 1:
        return M[0][0]
    out = TrigScalar.zero(dim)
    for j in range(n):
        if not M[0][j]:
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * _det(minor, dim)
        out = out + (term if j % 2 == 0 else -term)
    return out


def nondegeneracy_matrix(F: IsoData) -> List[List[TrigScalar]]:
    """Entries beta(X~_a, X_b) - <Phi(X~_a), Phi(X_b)> on the two kinds of fiber directions."""
    N, g = F.sig, F.g
    dim = N.base_dim
    th = N.fiber_positions(THETA)
    tt = N.fiber_positions(THETA_TILDE)
    out = []
    for a in tt:
        Xa = frame_vector(N, a)
        pa = F.phi_at(Xa)
        row = []
        for b in th:
            Xb = frame_vector(N, b)
            v = F.beta.evaluate(Xa, Xb)
            if g.n:
                v = v - pair_scalars(g, pa, F.phi_at(Xb), dim)
            row.append(v)
        out.append(row)
    return out


@dataclass
class DualityReport:
    residuals: List[Residual]
    determinant: TrigScalar

    @property
    def ok(self) -> bool:
        return all_zero(self.residuals) and self.determinant.is_constant() and self.determinant.constant_value() == 1

    def to_json(self) -> dict:
        return {"residuals": [r.to_json() for r in self.residuals], "determinant": self.determinant.to_json(),
                "ok": self.ok}


def chern_class_residual(pkg: DualityPackage) -> Dict[str, Fraction]:
    """Harmonic part of sum_i F_i ^ K_i - <rfrak ^ rfrak> (zero in cohomology)."""
    bd = base_data(pkg.source)
    g, base = bd.g, bd.sig
    K = [InvariantForm(base, dict(pkg.dual.sig.curvature(p))) for p in pkg.dual.sig.fiber_positions()]
    v = InvariantForm.zero(base)
    for Fi, Ki in zip(bd.F, K):
        v = v + Fi.wedge(Ki)
    if g.n:
        v = v - pair_wedge(g, bd.rfrak, bd.rfrak)
    return harmonic_coefficients(v)


def verify_duality(pkg: DualityPackage) -> DualityReport:
    """Relations of F between the pullbacks, its action compatibility and nondegeneracy."""
    F = pkg.F
    src = pkg.source_pullback()
    dst = pkg.dual_pullback()
    res = list(iso_relations(F, src, dst))
    if F.g.n:
        moved = transport_data(F, src)
        diff = []
        for A, B in zip(moved.action, dst.action):
            diff.extend(a - b for ra, rb in zip(A, B) for a, b in zip(ra, rb))
        res.append(Residual("iso-action", diff))
        res.append(Residual("K-automorphism", F.automorphism_residual()))
    res.append(Residual("chern-classes", list(chern_class_residual(pkg).values())))
    M = nondegeneracy_matrix(F)
    det = _det(M, F.sig.base_dim)
    return DualityReport(res, det)


# -- tau and rho ------------------------------------------------------------------

class DualityMaps:
    """tau and rho of a duality package, with the operators they are built from cached."""

    def __init__(self, pkg: DualityPackage, K_log=None):
        self.pkg = pkg
        g = pkg.g
        self.space_M = SpinorSpace(pkg.source.sig, g)
        self.space_N = SpinorSpace(pkg.N, g)
        self.space_Mt = SpinorSpace(pkg.dual.sig, g)
        self.lift = spin_lift(pkg.F, self.space_N, K_log)
        self._nondeg = None

    def tau(self, s: InvariantSpinor, check_invariant: bool = True) -> InvariantSpinor:
        data = self.pkg.source
        if check_invariant:
            for p in data.sig.fiber_positions():
                if spinor_action(data, p, s):
                    raise NotInvariantInput(f"spinor is not invariant along {data.sig.names[p]}")
        up = pullback_spinor(s, self.space_N)
        return pushforward_spinor(self.lift(up), THETA, self.space_Mt)

    def rho(self, u: Section) -> Section:
        pkg = self.pkg
        F, N, g = pkg.F, pkg.N, pkg.g
        dim = N.base_dim
        M, Mt = pkg.source.sig, pkg.dual.sig
        th = N.fiber_positions(THETA)
        tt = N.fiber_positions(THETA_TILDE)
        # pull u back with the lift X^ having no theta~ components
        Xh = [TrigScalar.zero(dim) for _ in range(N.n)]
        for p, x in enumerate(u.X):
            Xh[N.index[M.names[p]]] = x
        base = Section(N, u.xi.embed(N), list(u.r), Xh)
        img = F.apply(base)
        # theta components of the T* part are affine in the theta~ components y
        rhs = [-img.xi.coeff(1 << b) for b in th]
        cols = []
        for a in tt:
            e = Section(N, InvariantForm.zero(N), [TrigScalar.zero(dim)] * g.n, frame_vector(N, a))
            fe = F.apply(e)
            cols.append([fe.xi.coeff(1 << b) for b in th])
        # matrix A[b][a] y_a = rhs_b
        A = [[cols[a][b] for a in range(len(tt))] for b in range(len(th))]
        y = _solve(A, rhs, dim)
        for a, p in enumerate(tt):
            Xh[p] = Xh[p] + y[a]
        img = F.apply(Section(N, u.xi.embed(N), list(u.r), Xh))
        leftover = [img.xi.coeff(1 << b) for b in th]
        if any(leftover):
            raise SingularSystem("lift did not make the 1-form basic")
        xi = img.xi.restrict(Mt)
        X = [Xh[N.index[name]] for name in Mt.names]
        return Section(Mt, xi, img.r, X)


def _solve(A: List[List[TrigScalar]], b: List[TrigScalar], dim: int) -> List[TrigScalar]:
    """Solve A y = b over the coefficient ring when det A is a nonzero constant (Cramer's rule)."""
    n = len(A)
    det = _det(A, dim)
    if not det.is_constant() or det.constant_value() == 0:
        raise SingularSystem(f"lift system has determinant {det!r}")
    inv = Fraction(1) / det.constant_value()
    out = []
    for i in range(n):
        Ai = [row[:i] + [b[r]] + row[i + 1:] for r, row in enumerate(A)]
        out.append(_det(Ai, dim) * inv)
    return out


def tau(pkg: DualityPackage, s: InvariantSpinor) -> InvariantSpinor:
    return DualityMaps(pkg).tau(s)


def rho(pkg: DualityPackage, u: Section) -> Section:
    return DualityMaps(pkg).rho(u)
