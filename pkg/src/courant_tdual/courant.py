"""
Standard Courant algebroids over torus bundles in the invariant model.

A standard Courant algebroid ``T*M + G + TM`` is given by a quadratic Lie
algebra bundle ``G`` (trivialized, fiber ``g``), a metric connection
``nabla = d + conn`` preserving the bracket, a ``g``-valued 2-form ``R`` and a
3-form ``H``.  Everything here is invariant under the torus, so all of it
lives in the invariant complex of :mod:`courant_tdual.exterior`.

Matrices act on column vectors: ``(nabla r)^j = d r^j + sum_l conn[j][l] r^l``.
The torus action is recorded by constant skew derivations ``A_a`` with
``A_a = -conn(X_a)`` on the vertical frame fields; the basic part
``conn + sum_a theta_a A_a`` is the connection ``nabla^theta``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .coeff_ring import TrigScalar, as_scalar
from .exterior import (DX, THETA, THETA_TILDE, ComplexSignature, InvariantForm, apply_vector, bits,
                       frame_vector, popcount, vector_bracket, wedge_sign)
from .qla import QuadraticLieAlgebra, mat_inv, mat_is_zero, mat_mul

FormVec = List[InvariantForm]
FormMat = List[List[InvariantForm]]
ScalarMat = List[List[TrigScalar]]


class AdNotIso(ValueError):
    """The adjoint map of the Lie algebra is not onto the skew derivations."""


class ReducedRelationsViolated(ValueError):
    """Base data violate the reduced compatibility relations."""

    def __init__(self, message: str, residuals: Sequence["Residual"] = ()):
        super().__init__(message)
        self.residuals = list(residuals)


# -- residual reports ------------------------------------------------------

def _value_is_zero(v) -> bool:
    if isinstance(v, (list, tuple)):
        return all(_value_is_zero(x) for x in v)
    if isinstance(v, Section):
        return v.is_zero()
    return not v


def _value_to_json(v):
    from .coeff_ring import format_rational
    if isinstance(v, (list, tuple)):
        return [_value_to_json(x) for x in v]
    if isinstance(v, InvariantForm):
        return v.to_json()
    if isinstance(v, TrigScalar):
        return v.to_json()
    if isinstance(v, (int, Fraction)):
        return format_rational(Fraction(v))
    if hasattr(v, "to_json"):
        return v.to_json()
    raise TypeError(f"cannot serialize residual value of type {type(v).__name__}")


@dataclass
class Residual:
    """A named residual; the check passes iff every entry is exactly zero."""
    name: str
    value: object

    @property
    def is_zero(self) -> bool:
        return _value_is_zero(self.value)

    def to_json(self) -> dict:
        return {"name": self.name, "isZero": self.is_zero, "value": _value_to_json(self.value)}


def all_zero(residuals: Iterable[Residual]) -> bool:
    return all(r.is_zero for r in residuals)


def nonzero_names(residuals: Iterable[Residual]) -> List[str]:
    return [r.name for r in residuals if not r.is_zero]


# -- g-valued forms --------------------------------------------------------

def zero_forms(sig: ComplexSignature, n: int) -> FormVec:
    return [InvariantForm.zero(sig) for _ in range(n)]


def zero_form_matrix(sig: ComplexSignature, n: int) -> FormMat:
    return [[InvariantForm.zero(sig) for _ in range(n)] for _ in range(n)]


def zero_scalar_matrix(dim: int, n: int) -> ScalarMat:
    return [[TrigScalar.zero(dim) for _ in range(n)] for _ in range(n)]


def scalar_matrix(dim: int, M: Sequence[Sequence]) -> ScalarMat:
    return [[as_scalar(dim, x) for x in row] for row in M]


def one_form_at(form: InvariantForm, X: Sequence) -> TrigScalar:
    """Value of a 1-form on a vector field."""
    out = TrigScalar.zero(form.sig.base_dim)
    for mask, c in form.terms.items():
        if popcount(mask) != 1:
            continue
        p = mask.bit_length() - 1
        if X[p]:
            out = out + c * X[p]
    return out


def forms_at(P: FormVec, *vectors) -> List[TrigScalar]:
    return [p.evaluate(*vectors) for p in P]


def matrix_at(M: FormMat, X: Sequence) -> ScalarMat:
    return [[one_form_at(x, X) for x in row] for row in M]


def apply_matrix(M: Sequence[Sequence], P: FormVec) -> FormVec:
    """(M P)^j = sum_l M[j][l] P^l for a function-valued matrix M."""
    out = []
    for row in M:
        acc = InvariantForm.zero(P[0].sig) if P else None
        for m, p in zip(row, P):
            if m and p:
                acc = acc + p * m
        out.append(acc)
    return out


def apply_scalar_matrix(M: Sequence[Sequence], r: Sequence[TrigScalar], dim: int) -> List[TrigScalar]:
    out = []
    for row in M:
        acc = TrigScalar.zero(dim)
        for m, x in zip(row, r):
            if m and x:
                acc = acc + x * m
        out.append(acc)
    return out


def form_matrix_apply(M: FormMat, P: FormVec) -> FormVec:
    """(M ^ P)^j = sum_l M[j][l] ^ P^l."""
    out = []
    for row in M:
        acc = InvariantForm.zero(P[0].sig)
        for m, p in zip(row, P):
            if m and p:
                acc = acc + m.wedge(p)
        out.append(acc)
    return out


def form_matrix_times_scalars(M: FormMat, r: Sequence[TrigScalar]) -> FormVec:
    out = []
    for row in M:
        acc = InvariantForm.zero(row[0].sig)
        for m, x in zip(row, r):
            if m and x:
                acc = acc + m * x
        out.append(acc)
    return out


def form_matrix_wedge(A: FormMat, B: FormMat) -> FormMat:
    n = len(A)
    out = zero_form_matrix(A[0][0].sig, n) if n else []
    for i in range(n):
        for k in range(n):
            if not A[i][k]:
                continue
            for j in range(n):
                if B[k][j]:
                    out[i][j] = out[i][j] + A[i][k].wedge(B[k][j])
    return out


def form_matrix_add(A: FormMat, B: FormMat) -> FormMat:
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def form_matrix_sub(A: FormMat, B: FormMat) -> FormMat:
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def form_matrix_d(A: FormMat) -> FormMat:
    return [[a.d() for a in row] for row in A]


def form_matrix_conj(K: Sequence[Sequence[Fraction]], M: FormMat, Kinv: Sequence[Sequence[Fraction]]) -> FormMat:
    """K M K^{-1} for constant K."""
    n = len(M)
    sig = M[0][0].sig if n else None
    tmp = [[InvariantForm.zero(sig) for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for k in range(n):
            if not K[i][k]:
                continue
            for j in range(n):
                if M[k][j]:
                    tmp[i][j] = tmp[i][j] + M[k][j] * K[i][k]
    out = [[InvariantForm.zero(sig) for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for k in range(n):
            if not tmp[i][k]:
                continue
            for j in range(n):
                if Kinv[k][j]:
                    out[i][j] = out[i][j] + tmp[i][k] * Kinv[k][j]
    return out


def forms_matrix_from_scalar(sig: ComplexSignature, form: InvariantForm, M: Sequence[Sequence]) -> FormMat:
    """form (x) M as a matrix of forms."""
    return [[form * as_scalar(sig.base_dim, x) if x else InvariantForm.zero(sig) for x in row] for row in M]


def pair_wedge(g: QuadraticLieAlgebra, P: FormVec, Q: FormVec) -> InvariantForm:
    """<P ^ Q> = sum g_jk P^j ^ Q^k."""
    out = InvariantForm.zero(P[0].sig) if P else None
    if out is None:
        return InvariantForm.zero(Q[0].sig) if Q else None
    for j in range(g.n):
        if not P[j]:
            continue
        for k in range(g.n):
            if g.gram[j][k] and Q[k]:
                out = out + P[j].wedge(Q[k]) * g.gram[j][k]
    return out


def pair_form_scalar(g: QuadraticLieAlgebra, P: FormVec, s: Sequence[TrigScalar], sig: ComplexSignature) -> InvariantForm:
    """<P, s> for a g-valued form P and a g-valued function s."""
    out = InvariantForm.zero(sig)
    for j in range(g.n):
        if not P[j]:
            continue
        for k in range(g.n):
            if g.gram[j][k] and s[k]:
                out = out + P[j] * (s[k] * g.gram[j][k])
    return out


def pair_scalars(g: QuadraticLieAlgebra, r: Sequence, s: Sequence, dim: int) -> TrigScalar:
    out = TrigScalar.zero(dim)
    for j in range(g.n):
        if not r[j]:
            continue
        for k in range(g.n):
            if g.gram[j][k] and s[k]:
                out = out + r[j] * s[k] * g.gram[j][k]
    return out


def bracket_wedge(g: QuadraticLieAlgebra, P: FormVec, Q: FormVec) -> FormVec:
    """[P ^ Q]^k = sum c_ij^k P^i ^ Q^j."""
    sig = P[0].sig
    out = zero_forms(sig, g.n)
    for i in range(g.n):
        if not P[i]:
            continue
        for j in range(g.n):
            if not Q[j]:
                continue
            w = None
            for k in range(g.n):
                c = g.c[i][j][k]
                if c:
                    if w is None:
                        w = P[i].wedge(Q[j])
                    out[k] = out[k] + w * c
    return out


def bracket_form_scalar(g: QuadraticLieAlgebra, P: FormVec, s: Sequence[TrigScalar]) -> FormVec:
    """[P, s] for a g-valued form P and a g-valued function s."""
    sig = P[0].sig
    out = zero_forms(sig, g.n)
    for i in range(g.n):
        if not P[i]:
            continue
        for j in range(g.n):
            if not s[j]:
                continue
            for k in range(g.n):
                c = g.c[i][j][k]
                if c:
                    out[k] = out[k] + P[i] * (s[j] * c)
    return out


def ad_forms(g: QuadraticLieAlgebra, P: FormVec) -> FormMat:
    """Matrix of ad_P: entry [k][j] = sum_i c_ij^k P^i."""
    sig = P[0].sig
    out = zero_form_matrix(sig, g.n)
    for i in range(g.n):
        if not P[i]:
            continue
        for j in range(g.n):
            for k in range(g.n):
                c = g.c[i][j][k]
                if c:
                    out[k][j] = out[k][j] + P[i] * c
    return out


def ad_scalars(g: QuadraticLieAlgebra, r: Sequence[TrigScalar], dim: int) -> ScalarMat:
    out = zero_scalar_matrix(dim, g.n)
    for i in range(g.n):
        if not r[i]:
            continue
        for j in range(g.n):
            for k in range(g.n):
                c = g.c[i][j][k]
                if c:
                    out[k][j] = out[k][j] + r[i] * c
    return out


def scalar_matrix_mul(A: ScalarMat, B: ScalarMat, dim: int) -> ScalarMat:
    n = len(A)
    out = zero_scalar_matrix(dim, n)
    for i in range(n):
        for k in range(n):
            if not A[i][k]:
                continue
            for j in range(n):
                if B[k][j]:
                    out[i][j] = out[i][j] + A[i][k] * B[k][j]
    return out


def scalar_matrix_commutator(A: ScalarMat, B: ScalarMat, dim: int) -> ScalarMat:
    ab = scalar_matrix_mul(A, B, dim)
    ba = scalar_matrix_mul(B, A, dim)
    return [[x - y for x, y in zip(r1, r2)] for r1, r2 in zip(ab, ba)]


def scalar_matrix_sub(A, B) -> ScalarMat:
    return [[x - y for x, y in zip(r1, r2)] for r1, r2 in zip(A, B)]


def scalar_matrix_add(A, B) -> ScalarMat:
    return [[x + y for x, y in zip(r1, r2)] for r1, r2 in zip(A, B)]


def d_forms(P: FormVec) -> FormVec:
    return [p.d() for p in P]


def embed_forms(P: FormVec, target: ComplexSignature) -> FormVec:
    return [p.embed(target) for p in P]


def cartan_3form(g: QuadraticLieAlgebra, Phi: FormVec) -> InvariantForm:
    """c_3(X, Y, Z) = <Phi(X), [Phi(Y), Phi(Z)]> as a 3-form."""
    sig = Phi[0].sig
    out = InvariantForm.zero(sig)
    n = g.n
    for i in range(n):
        if not Phi[i]:
            continue
        for j in range(n):
            if not Phi[j]:
                continue
            for l in range(n):
                if not Phi[l]:
                    continue
                # <e_i, [e_j, e_l]>
                c = sum((g.gram[i][k] * g.c[j][l][k] for k in range(n) if g.c[j][l][k]), Fraction(0))
                if c:
                    out = out + Phi[i].wedge(Phi[j]).wedge(Phi[l]) * (c / 6)
    return out


# -- the data --------------------------------------------------------------

class CourantData:
    """Data (g, nabla, R, H) of an invariant standard Courant algebroid.

    ``conn``: n x n matrix of invariant 1-forms; ``action``: one constant
    skew derivation (n x n matrix of scalars) per fiber generator, in the
    order of ``sig.fiber_positions()``; ``R``: n invariant 2-forms;
    ``H``: an invariant 3-form.
    """

    def __init__(self, sig: ComplexSignature, g: QuadraticLieAlgebra, conn: FormMat,
                 action: Sequence[Sequence[Sequence]], R: FormVec, H: InvariantForm, name: str = ""):
        self.sig = sig
        self.g = g
        dim = sig.base_dim
        self.conn = [list(row) for row in conn]
        fibers = sig.fiber_positions()
        if len(action) != len(fibers):
            raise ValueError(f"expected {len(fibers)} action derivations, got {len(action)}")
        self.action = [scalar_matrix(dim, A) for A in action]
        self.R = list(R)
        self.H = H
        self.name = name
        if len(self.R) != g.n or len(self.conn) != g.n or any(len(r) != g.n for r in self.conn):
            raise ValueError("connection/curvature shape does not match the Lie algebra")

    @property
    def dim(self) -> int:
        return self.sig.base_dim

    def action_at(self, p: int) -> ScalarMat:
        """The derivation A attached to the fiber generator at position p."""
        return self.action[self.sig.fiber_positions().index(p)]

    def replace(self, **kw) -> "CourantData":
        args = dict(sig=self.sig, g=self.g, conn=self.conn, action=self.action, R=self.R, H=self.H, name=self.name)
        args.update(kw)
        return CourantData(**args)

    # -- connection calculus ------------------------------------------------

    def conn_at(self, X: Sequence) -> ScalarMat:
        return matrix_at(self.conn, X)

    def nabla(self, X: Sequence, r: Sequence[TrigScalar]) -> List[TrigScalar]:
        """nabla_X r."""
        cx = self.conn_at(X)
        out = []
        for j in range(self.g.n):
            v = apply_vector(self.sig, X, r[j])
            for l in range(self.g.n):
                if cx[j][l] and r[l]:
                    v = v + cx[j][l] * r[l]
            out.append(v)
        return out

    def nabla_form(self, r: Sequence[TrigScalar]) -> FormVec:
        """nabla r as a g-valued 1-form."""
        sig = self.sig
        out = []
        for j in range(self.g.n):
            v = InvariantForm.scalar(sig, r[j]).d()
            for l in range(self.g.n):
                if self.conn[j][l] and r[l]:
                    v = v + self.conn[j][l] * r[l]
            out.append(v)
        return out

    def d_nabla(self, P: FormVec) -> FormVec:
        """Exterior covariant derivative of a g-valued form."""
        return [a + b for a, b in zip(d_forms(P), form_matrix_apply(self.conn, P))]

    def curvature(self) -> FormMat:
        """R^nabla = d conn + conn ^ conn."""
        return form_matrix_add(form_matrix_d(self.conn), form_matrix_wedge(self.conn, self.conn))

    def R_at(self, X: Sequence, Y: Sequence) -> List[TrigScalar]:
        return [r.evaluate(X, Y) for r in self.R]

    def iR(self, X: Sequence) -> FormVec:
        return [r.interior(X) for r in self.R]

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        sig = self.sig
        return {
            "kind": "courant-data",
            "name": self.name,
            "signature": sig.to_json(),
            "algebra": self.g.to_json(),
            "connection": [[c.to_json() for c in row] for row in self.conn],
            "action": [[[x.to_json() for x in row] for row in A] for A in self.action],
            "R": [r.to_json() for r in self.R],
            "H": self.H.to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CourantData":
        sig = ComplexSignature.from_json(doc["signature"])
        g = QuadraticLieAlgebra.from_json(doc["algebra"])
        n = g.n
        conn_doc = doc.get("connection")
        if conn_doc is None:
            conn = zero_form_matrix(sig, n)
        else:
            conn = [[InvariantForm.from_json(sig, c) for c in row] for row in conn_doc]
        nfib = len(sig.fiber_positions())
        act_doc = doc.get("action")
        if act_doc is None:
            action = [zero_scalar_matrix(sig.base_dim, n) for _ in range(nfib)]
        else:
            action = [[[TrigScalar.from_json(sig.base_dim, x) for x in row] for row in A] for A in act_doc]
        R_doc = doc.get("R")
        R = zero_forms(sig, n) if R_doc is None else [InvariantForm.from_json(sig, r) for r in R_doc]
        H = InvariantForm.from_json(sig, doc.get("H", {"terms": []}))
        return cls(sig, g, conn, action, R, H, name=doc.get("name", ""))

    # -- models ---------------------------------------------------------------

    def pullback(self, target: ComplexSignature) -> "CourantData":
        """Pullback to a bundle whose complex contains this one (e.g. the correspondence space)."""
        n = self.g.n
        conn = [[c.embed(target) for c in row] for row in self.conn]
        action = []
        mine = {self.sig.names[p]: A for p, A in zip(self.sig.fiber_positions(), self.action)}
        for p in target.fiber_positions():
            name = target.names[p]
            action.append(mine.get(name, zero_scalar_matrix(self.dim, n)))
        return CourantData(target, self.g, conn, action, embed_forms(self.R, target), self.H.embed(target),
                           name=self.name)

    def __eq__(self, other) -> bool:
        return (isinstance(other, CourantData) and self.sig == other.sig and self.g == other.g
                and self.conn == other.conn and self.action == other.action and self.R == other.R
                and self.H == other.H)


def check_compatibility(data: CourantData) -> List[Residual]:
    """Residuals of dH = <R ^ R>, d^nabla R = 0 and R^nabla = ad_R."""
    g = data.g
    res1 = data.H.d() - pair_wedge(g, data.R, data.R) if g.n else data.H.d()
    res2 = data.d_nabla(data.R) if g.n else []
    res3 = form_matrix_sub(data.curvature(), ad_forms(g, data.R)) if g.n else []
    return [Residual("dH-RR", res1), Residual("dnabla-R", res2), Residual("Rnabla-adR", res3)]


def _derivation_residual(g: QuadraticLieAlgebra, A: ScalarMat, dim: int) -> list:
    out = []
    for i in range(g.n):
        for j in range(g.n):
            ei, ej = g.basis_vector(i), g.basis_vector(j)
            lhs = apply_scalar_matrix(A, [as_scalar(dim, x) for x in g.bracket(ei, ej)], dim)
            Aei = [A[k][i] for k in range(g.n)]
            Aej = [A[k][j] for k in range(g.n)]
            t1 = g.bracket(Aei, [as_scalar(dim, x) for x in ej])
            t2 = g.bracket([as_scalar(dim, x) for x in ei], Aej)
            out.append([as_scalar(dim, a) - b - c for a, b, c in zip(lhs, t1, t2)])
    return out


def _skew_residual(g: QuadraticLieAlgebra, A: ScalarMat, dim: int) -> ScalarMat:
    n = g.n
    out = zero_scalar_matrix(dim, n)
    for i in range(n):
        for j in range(n):
            v = TrigScalar.zero(dim)
            for k in range(n):
                if A[k][i] and g.gram[k][j]:
                    v = v + A[k][i] * g.gram[k][j]
                if A[k][j] and g.gram[i][k]:
                    v = v + A[k][j] * g.gram[i][k]
            out[i][j] = v
    return out


def check_action_compat(data: CourantData) -> List[Residual]:
    """Residuals of the conditions on the torus action.

    For every fiber generator X_a: A_a is a skew derivation, agrees with
    -nabla_{X_a} on invariant sections, satisfies
    nabla_X A_a = ad_{R(X_a, X)} for all frame fields X, and is parallel for
    the flat partial connection (``[nabla_{X_b} + A_b, A_a] = 0``).
    """
    sig, g, dim = data.sig, data.g, data.dim
    out: List[Residual] = []
    fibers = sig.fiber_positions()
    if g.n == 0:
        return [Residual("action-trivial", [])]
    frames = [frame_vector(sig, q) for q in range(sig.n)]
    for a, p in enumerate(fibers):
        name = sig.names[p]
        A = data.action[a]
        Xp = frames[p]
        out.append(Residual(f"conn-A[{name}]", scalar_matrix_add(data.conn_at(Xp), A)))
        out.append(Residual(f"A-skew[{name}]", _skew_residual(g, A, dim)))
        out.append(Residual(f"A-derivation[{name}]", _derivation_residual(g, A, dim)))
        nab = []
        for q in range(sig.n):
            X = frames[q]
            dA = [[apply_vector(sig, X, x) for x in row] for row in A]
            term = scalar_matrix_add(dA, scalar_matrix_commutator(data.conn_at(X), A, dim))
            adR = ad_scalars(g, data.R_at(Xp, X), dim)
            nab.append(scalar_matrix_sub(term, adR))
        out.append(Residual(f"nabla-A[{name}]", nab))
        cor = []
        for b, q in enumerate(fibers):
            Bq = scalar_matrix_add(data.conn_at(frames[q]), data.action[b])
            cor.append(scalar_matrix_commutator(Bq, A, dim))
        out.append(Residual(f"cor-A[{name}]", cor))
    return out


# -- sections and the Dorfman bracket -------------------------------------

class Section:
    """An invariant section xi + r + X of T*M + G + TM."""

    __slots__ = ("sig", "xi", "r", "X")

    def __init__(self, sig: ComplexSignature, xi: Optional[InvariantForm] = None,
                 r: Optional[Sequence] = None, X: Optional[Sequence] = None, gdim: int = 0):
        dim = sig.base_dim
        self.sig = sig
        self.xi = xi if xi is not None else InvariantForm.zero(sig)
        if r is None:
            r = [0] * gdim
        self.r = tuple(as_scalar(dim, x) for x in r)
        if X is None:
            X = [0] * sig.n
        self.X = tuple(as_scalar(dim, x) for x in X)
        if len(self.X) != sig.n:
            raise ValueError("vector part has wrong length")
        if self.xi.degrees() not in ([], [1]):
            raise ValueError("xi must be a 1-form")

    def __add__(self, other: "Section") -> "Section":
        return Section(self.sig, self.xi + other.xi, [a + b for a, b in zip(self.r, other.r)],
                       [a + b for a, b in zip(self.X, other.X)])

    def __sub__(self, other: "Section") -> "Section":
        return Section(self.sig, self.xi - other.xi, [a - b for a, b in zip(self.r, other.r)],
                       [a - b for a, b in zip(self.X, other.X)])

    def scale(self, f) -> "Section":
        f = as_scalar(self.sig.base_dim, f)
        return Section(self.sig, self.xi * f, [a * f for a in self.r], [a * f for a in self.X])

    def __eq__(self, other) -> bool:
        return (isinstance(other, Section) and self.sig == other.sig and self.xi == other.xi
                and self.r == other.r and self.X == other.X)

    def is_zero(self) -> bool:
        return not self.xi and not any(self.r) and not any(self.X)

    def __repr__(self) -> str:
        return f"Section(xi={self.xi!r}, r={list(self.r)!r}, X={list(self.X)!r})"

    def to_json(self) -> dict:
        return {"xi": self.xi.to_json(), "r": [c.to_json() for c in self.r],
                "X": {self.sig.names[p]: c.to_json() for p, c in enumerate(self.X) if c}}

    @classmethod
    def from_json(cls, sig: ComplexSignature, gdim: int, doc: dict) -> "Section":
        dim = sig.base_dim
        xi = InvariantForm.from_json(sig, doc.get("xi", {"terms": []}))
        r = [TrigScalar.from_json(dim, c) for c in doc.get("r", [])] or [0] * gdim
        if len(r) != gdim:
            raise ValueError("g-part has wrong length")
        X = [TrigScalar.zero(dim)] * sig.n
        X = list(X)
        for name, c in doc.get("X", {}).items():
            if name not in sig.index:
                raise ValueError(f"unknown frame field {name!r}")
            X[sig.index[name]] = TrigScalar.from_json(dim, c)
        return cls(sig, xi, r, X)

    def embed(self, target: ComplexSignature) -> "Section":
        """Pullback of the form part and horizontal lift (same frame coefficients) of the vector part."""
        X = [TrigScalar.zero(self.sig.base_dim)] * target.n
        X = list(X)
        for p, c in enumerate(self.X):
            X[target.index[self.sig.names[p]]] = c
        return Section(target, self.xi.embed(target), self.r, X)


def section_pairing(g: QuadraticLieAlgebra, u: Section, v: Section) -> TrigScalar:
    """<u, v> = 1/2 (xi(Y) + eta(X)) + <r, s>."""
    dim = u.sig.base_dim
    out = (one_form_at(u.xi, v.X) + one_form_at(v.xi, u.X)) * Fraction(1, 2)
    return out + pair_scalars(g, u.r, v.r, dim)


def dorfman(data: CourantData, u: Section, v: Section) -> Section:
    """The Dorfman bracket [u, v] of invariant sections."""
    sig, g, dim = data.sig, data.g, data.dim
    X, Y = u.X, v.X
    r, s = u.r, v.r
    vec = vector_bracket(sig, X, Y)
    # G-part: R(X, Y) + nabla_X s - nabla_Y r + [r, s]
    gpart = [TrigScalar.zero(dim) for _ in range(g.n)]
    if g.n:
        RXY = data.R_at(X, Y)
        nXs = data.nabla(X, s)
        nYr = data.nabla(Y, r)
        rs = g.bracket(r, s)
        gpart = [a + b - c + as_scalar(dim, d) for a, b, c, d in zip(RXY, nXs, nYr, rs)]
    # T*-part
    xi = data.H.interior(X).interior(Y)
    xi = xi + v.xi.lie(X) - u.xi.d().interior(Y)
    if g.n:
        xi = xi - pair_form_scalar(g, data.iR(X), s, sig) * 2
        xi = xi + pair_form_scalar(g, data.iR(Y), r, sig) * 2
        xi = xi + pair_form_scalar(g, data.nabla_form(r), s, sig) * 2
    return Section(sig, xi, gpart, vec)


def anchor_derivative(sig: ComplexSignature, u: Section, f: TrigScalar) -> TrigScalar:
    return apply_vector(sig, u.X, f)


def random_section(rng, sig: ComplexSignature, gdim: int, max_freq: int = 1, n_modes: int = 1,
                   density: float = 0.6) -> Section:
    """A random invariant section with small trigonometric coefficients."""
    from .coeff_ring import random_scalar
    dim = sig.base_dim

    def coef():
        if rng.random() > density:
            return TrigScalar.zero(dim)
        return random_scalar(rng, dim, max_freq=max_freq, n_modes=n_modes, max_num=2)

    xi = InvariantForm(sig, {1 << p: coef() for p in range(sig.n)})
    return Section(sig, xi, [coef() for _ in range(gdim)], [coef() for _ in range(sig.n)])


# -- isomorphisms ---------------------------------------------------------

class IsoData:
    """A fiber-preserving isomorphism (beta, K, Phi) between standard Courant algebroids.

    ``K`` is a constant automorphism of the quadratic Lie algebra; ``Phi``
    is a g-valued 1-form given by its n components.
    """

    def __init__(self, sig: ComplexSignature, g: QuadraticLieAlgebra, beta: Optional[InvariantForm] = None,
                 K: Optional[Sequence[Sequence]] = None, Phi: Optional[FormVec] = None):
        self.sig = sig
        self.g = g
        n = g.n
        self.beta = beta if beta is not None else InvariantForm.zero(sig)
        if self.beta.degrees() not in ([], [2]):
            raise ValueError("beta must be a 2-form")
        self.K = [[Fraction(x) for x in row] for row in K] if K is not None else \
            [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
        self.Phi = list(Phi) if Phi is not None else zero_forms(sig, n)
        if len(self.Phi) != n:
            raise ValueError("Phi has wrong length")

    @classmethod
    def identity(cls, sig: ComplexSignature, g: QuadraticLieAlgebra) -> "IsoData":
        return cls(sig, g)

    @property
    def K_inv(self):
        return mat_inv(self.K) if self.g.n else []

    def automorphism_residual(self) -> Fraction:
        """Largest defect of K preserving the bracket and the scalar product."""
        g, K = self.g, self.K
        worst = Fraction(0)
        cols = [[K[a][i] for a in range(g.n)] for i in range(g.n)]
        for i in range(g.n):
            for j in range(g.n):
                worst = max(worst, abs(g.pair(cols[i], cols[j]) - g.gram[i][j]))
                lhs = [sum((K[a][b] * g.c[i][j][b] for b in range(g.n)), Fraction(0)) for a in range(g.n)]
                rhs = g.bracket(cols[i], cols[j])
                worst = max([worst] + [abs(x - Fraction(y)) for x, y in zip(lhs, rhs)])
        return worst

    def phi_at(self, X: Sequence) -> List[TrigScalar]:
        return [one_form_at(p, X) for p in self.Phi]

    def phi_star(self, s: Sequence[TrigScalar]) -> InvariantForm:
        """The 1-form X -> <s, Phi(X)>."""
        return pair_form_scalar(self.g, self.Phi, s, self.sig)

    def phi_star_phi(self) -> List[List[TrigScalar]]:
        """Matrix (Phi* Phi)(X_p, X_q) = <Phi(X_p), Phi(X_q)> on the frame."""
        sig = self.sig
        vals = [self.phi_at(frame_vector(sig, p)) for p in range(sig.n)]
        return [[pair_scalars(self.g, vals[p], vals[q], sig.base_dim) for q in range(sig.n)] for p in range(sig.n)]

    def apply(self, u: Section) -> Section:
        """I(eta + r + X) = eta + (K r - 2 Phi* K r) + (i_X beta - Phi*Phi(X) + Phi(X) + X)."""
        sig, g, dim = self.sig, self.g, sig_dim(self.sig)
        Kr = apply_scalar_matrix(self.K, u.r, dim)
        xi = u.xi - self.phi_star(Kr) * 2
        xi = xi + self.beta.interior(u.X)
        phiX = self.phi_at(u.X)
        xi = xi - self.phi_star(phiX)
        r = [a + b for a, b in zip(Kr, phiX)]
        return Section(sig, xi, r, u.X)

    def compose(self, first: "IsoData") -> "IsoData":
        """self o first (apply ``first``, then ``self``)."""
        g = self.g
        K3 = mat_mul(self.K, first.K)
        K2Phi1 = apply_matrix(self.K, first.Phi) if g.n else []
        Phi3 = [a + b for a, b in zip(self.Phi, K2Phi1)]
        beta3 = first.beta + self.beta
        if g.n:
            beta3 = beta3 + pair_wedge(g, self.Phi, K2Phi1)
        return IsoData(self.sig, g, beta3, K3, Phi3)

    def inverse(self) -> "IsoData":
        Kinv = self.K_inv
        Phi = [p * -1 for p in apply_matrix(Kinv, self.Phi)] if self.g.n else []
        return IsoData(self.sig, self.g, -self.beta, Kinv, Phi)

    def __eq__(self, other) -> bool:
        return (isinstance(other, IsoData) and self.sig == other.sig and self.beta == other.beta
                and self.K == other.K and self.Phi == other.Phi)

    def to_json(self) -> dict:
        from .coeff_ring import format_rational
        return {"beta": self.beta.to_json(), "K": [[format_rational(x) for x in row] for row in self.K],
                "Phi": [p.to_json() for p in self.Phi]}

    @classmethod
    def from_json(cls, sig: ComplexSignature, g: QuadraticLieAlgebra, doc: dict) -> "IsoData":
        K = doc.get("K")
        K = [[Fraction(x) for x in row] for row in K] if K is not None else None
        Phi = doc.get("Phi")
        Phi = [InvariantForm.from_json(sig, p) for p in Phi] if Phi is not None else None
        return cls(sig, g, InvariantForm.from_json(sig, doc.get("beta", {"terms": []})), K, Phi)


def sig_dim(sig: ComplexSignature) -> int:
    return sig.base_dim


def transport_connection(I: IsoData, data: CourantData) -> FormMat:
    """nabla2 = K nabla1 K^{-1} - ad_Phi."""
    g = data.g
    return form_matrix_sub(form_matrix_conj(I.K, data.conn, I.K_inv), ad_forms(g, I.Phi))


def transport_data(I: IsoData, data: CourantData) -> CourantData:
    """The unique target data making I an isomorphism of standard Courant algebroids."""
    g, sig, dim = data.g, data.sig, data.dim
    if g.n == 0:
        H2 = data.H - I.beta.d()
        return data.replace(H=H2)
    conn2 = transport_connection(I, data)
    c2 = [x * Fraction(1, 2) for x in bracket_wedge(g, I.Phi, I.Phi)]
    KR1 = apply_matrix(I.K, data.R)
    dPhi = [a + b for a, b in zip(d_forms(I.Phi), form_matrix_apply(conn2, I.Phi))]
    R2 = [a - b - c for a, b, c in zip(KR1, dPhi, c2)]
    H2 = data.H - I.beta.d() - pair_wedge(g, [a + b for a, b in zip(KR1, R2)], I.Phi) + cartan_3form(g, I.Phi)
    Kinv = I.K_inv
    Ks = scalar_matrix(dim, I.K)
    Kis = scalar_matrix(dim, Kinv)
    action2 = []
    for p, A in zip(sig.fiber_positions(), data.action):
        KAK = scalar_matrix_mul(scalar_matrix_mul(Ks, A, dim), Kis, dim)
        action2.append(scalar_matrix_add(KAK, ad_scalars(g, I.phi_at(frame_vector(sig, p)), dim)))
    return CourantData(sig, g, conn2, action2, R2, H2, name=data.name)


def iso_relations(I: IsoData, d1: CourantData, d2: CourantData) -> List[Residual]:
    """Residuals of the three relations making I : d1 -> d2 an isomorphism."""
    g = d1.g
    if g.n == 0:
        return [Residual("iso-conn", []), Residual("iso-R", []),
                Residual("iso-H", d1.H - d2.H - I.beta.d())]
    con = form_matrix_sub(d2.conn, transport_connection(I, d1))
    KR1 = apply_matrix(I.K, d1.R)
    c2 = [x * Fraction(1, 2) for x in bracket_wedge(g, I.Phi, I.Phi)]
    dPhi = d2.d_nabla(I.Phi)
    rel2 = [a - b - c - e for a, b, c, e in zip(KR1, d2.R, dPhi, c2)]
    rel3 = (d1.H - d2.H - I.beta.d() - pair_wedge(g, [a + b for a, b in zip(KR1, d2.R)], I.Phi)
            + cartan_3form(g, I.Phi))
    return [Residual("iso-conn", con), Residual("iso-R", rel2), Residual("iso-H", rel3)]


def second_relation_from_first(g: QuadraticLieAlgebra, conn1: FormMat, K: Sequence[Sequence],
                               Phi: FormVec) -> Residual:
    """Residual of K R1 - R2 - d^{nabla2} Phi - c2 when nabla2 is defined by the first relation.

    Both R_i are read off from the curvatures through ad (R^{nabla_i} = ad_{R_i}),
    which needs ad to be an isomorphism.
    """
    sig = conn1[0][0].sig
    d1 = CourantData(sig, g, conn1, [zero_scalar_matrix(sig.base_dim, g.n) for _ in sig.fiber_positions()],
                     zero_forms(sig, g.n), InvariantForm.zero(sig))
    I = IsoData(sig, g, None, K, Phi)
    conn2 = transport_connection(I, d1)
    R1 = base_curvature_element(g, conn1)
    R2 = base_curvature_element(g, conn2)
    d2 = d1.replace(conn=conn2, R=R2)
    KR1 = apply_matrix(I.K, R1)
    c2 = [x * Fraction(1, 2) for x in bracket_wedge(g, Phi, Phi)]
    dPhi = d2.d_nabla(Phi)
    return Residual("iso-R", [a - b - c - e for a, b, c, e in zip(KR1, R2, dPhi, c2)])


# -- decomposition by fiber degree ----------------------------------------

@dataclass
class Decomposition:
    """Pieces of H and R by fiber degree, with the action and nabla^theta.

    All pieces are basic forms stored in the signature of the data.
    """
    sig: ComplexSignature
    g: QuadraticLieAlgebra
    fibers: List[int]
    F: FormVec
    H3: InvariantForm
    H2: FormVec
    H1: List[FormVec]
    H0: List[List[List[TrigScalar]]]
    R2: FormVec
    R1: List[FormVec]
    R0: List[List[List[TrigScalar]]]
    A: List[ScalarMat]
    conn_theta: FormMat

    def to_json(self) -> dict:
        names = [self.sig.names[p] for p in self.fibers]
        k = len(self.fibers)
        return {
            "fibers": names,
            "H3": self.H3.to_json(),
            "H2": [h.to_json() for h in self.H2],
            "H1": [[self.H1[i][j].to_json() for j in range(k)] for i in range(k)],
            "H0": [[[self.H0[i][j][s].to_json() for s in range(k)] for j in range(k)] for i in range(k)],
            "R2": [r.to_json() for r in self.R2],
            "R1": [[r.to_json() for r in self.R1[i]] for i in range(k)],
            "R0": [[[c.to_json() for c in self.R0[i][j]] for j in range(k)] for i in range(k)],
        }


def _theta_pieces(form: InvariantForm, fibers: List[int]) -> Dict[int, InvariantForm]:
    """Split a form as sum theta_f ^ b_f (f a fiber monomial, b basic); returns f -> b_f."""
    fmask = sum(1 << p for p in fibers)
    out: Dict[int, Dict[int, TrigScalar]] = {}
    for m, c in form.terms.items():
        f = m & fmask
        b = m & ~fmask
        # sorted monomial = b ^ theta_f = (-1)^{|b||f|} theta_f ^ b
        s = -1 if (popcount(b) * popcount(f)) & 1 else 1
        out.setdefault(f, {})[b] = c if s > 0 else -c
    return {f: InvariantForm(form.sig, t) for f, t in out.items()}


def _scalar_of(form: Optional[InvariantForm], dim: int) -> TrigScalar:
    if form is None:
        return TrigScalar.zero(dim)
    return form.coeff(0)


def decompose(data: CourantData, kind: Optional[str] = None) -> Decomposition:
    """Split H and R by degree in the fiber generators of one kind."""
    sig, g, dim = data.sig, data.g, data.dim
    kinds = {sig.kinds[p] for p in sig.fiber_positions()}
    if kind is None:
        if len(kinds) > 1:
            raise ValueError("signature mixes theta and thetaTilde; pass kind explicitly")
        kind = kinds.pop() if kinds else THETA
    fibers = sig.fiber_positions(kind)
    if len(fibers) != len(sig.fiber_positions()):
        raise ValueError("decomposition expects a bundle with a single kind of fiber generator")
    k = len(fibers)
    F = [InvariantForm(sig, dict(sig.curvature(p))) for p in fibers]
    zero = InvariantForm.zero(sig)
    hp = _theta_pieces(data.H, fibers)

    def piece(pieces, idx):
        mask = 0
        for i in idx:
            mask |= 1 << fibers[i]
        return pieces.get(mask, zero), _order_sign_local(idx)

    H3 = hp.get(0, zero)
    H2 = [piece(hp, [i])[0] for i in range(k)]
    H1 = [[zero for _ in range(k)] for _ in range(k)]
    H0 = [[[TrigScalar.zero(dim) for _ in range(k)] for _ in range(k)] for _ in range(k)]
    for i, j in itertools.permutations(range(k), 2):
        b, s = piece(hp, sorted([i, j]))
        sgn = _perm_parity([i, j])
        H1[i][j] = b * Fraction(sgn, 2)
    for idx in itertools.permutations(range(k), 3):
        b, _ = piece(hp, sorted(idx))
        H0[idx[0]][idx[1]][idx[2]] = _scalar_of(b, dim) * Fraction(_perm_parity(list(idx)), 6)
    R2, R1, R0 = [], [[zero] * g.n for _ in range(k)], [[[TrigScalar.zero(dim)] * g.n for _ in range(k)] for _ in range(k)]
    R1 = [list(x) for x in R1]
    R0 = [[list(x) for x in row] for row in R0]
    for c in range(g.n):
        rp = _theta_pieces(data.R[c], fibers)
        R2.append(rp.get(0, zero))
        for i in range(k):
            R1[i][c] = piece(rp, [i])[0]
        for i, j in itertools.permutations(range(k), 2):
            b, _ = piece(rp, sorted([i, j]))
            R0[i][j][c] = _scalar_of(b, dim) * Fraction(_perm_parity([i, j]), 2)
    A = [data.action[data.sig.fiber_positions().index(p)] for p in fibers]
    conn_theta = []
    fmask = sum(1 << p for p in fibers)
    for row in data.conn:
        conn_theta.append([InvariantForm(sig, {m: c for m, c in x.terms.items() if not m & fmask}) for x in row])
    return Decomposition(sig, g, fibers, F, H3, H2, H1, H0, R2, R1, R0, A, conn_theta)


def _order_sign_local(idx: Sequence[int]) -> int:
    return _perm_parity(list(idx))


def _perm_parity(seq: Sequence[int]) -> int:
    inv = sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b])
    return -1 if inv & 1 else 1


DECOMP_EQUATIONS = ("E0:dH3", "E1:dH2", "E2:dH1", "E3:dH0", "E4:R0R0", "E5:dR2", "E6:dR1",
                    "E7:AR1", "E8:AR0", "E9:Rtheta", "E10:adR0", "E11:nablaA")


def check_decomp_equations(dec: Decomposition) -> List[Residual]:
    """Residuals of the twelve equations satisfied by the fiber-degree pieces.

    Returned in the order of ``DECOMP_EQUATIONS``; each value is a list over
    the free fiber indices.
    """
    sig, g = dec.sig, dec.g
    dim = sig.base_dim
    k = len(dec.fibers)
    n = g.n
    zero = InvariantForm.zero(sig)
    F, H2, H1, H0 = dec.F, dec.H2, dec.H1, dec.H0
    R2, R1, R0, A = dec.R2, dec.R1, dec.R0, dec.A
    ct = dec.conn_theta

    def pw(P, Q):
        return pair_wedge(g, P, Q) if n else zero

    def pfs(P, s):
        return pair_form_scalar(g, P, s, sig) if n else zero

    def d_theta(P):
        return [a + b for a, b in zip(d_forms(P), form_matrix_apply(ct, P))] if n else []

    def nabla_theta(r):
        out = []
        for j in range(n):
            v = InvariantForm.scalar(sig, r[j]).d()
            for l in range(n):
                if ct[j][l] and r[l]:
                    v = v + ct[j][l] * r[l]
            out.append(v)
        return out

    def scal_forms(P, f):
        return [p * f for p in P]

    def add(P, Q):
        return [a + b for a, b in zip(P, Q)]

    def sub(P, Q):
        return [a - b for a, b in zip(P, Q)]

    def scal_vec_times_form(r, form):
        return [form * c if c else zero for c in r]

    # E0
    e0 = H3_d = dec.H3.d()
    for i in range(k):
        e0 = e0 + H2[i].wedge(F[i])
    e0 = e0 - pw(R2, R2)
    # E1
    e1 = []
    for p in range(k):
        v = H2[p].d()
        for i in range(k):
            v = v + H1[p][i].wedge(F[i]) * 2
        v = v + pw(R2, R1[p]) * 2
        e1.append(v)
    # E2
    e2 = []
    for p in range(k):
        for q in range(k):
            v = H1[p][q].d()
            for i in range(k):
                v = v + F[i] * (H0[i][p][q] * 3)
            v = v - pfs(R2, R0[p][q]) * 2 + pw(R1[p], R1[q])
            e2.append(v)
    # E3
    e3 = []
    for p, q, s in itertools.product(range(k), repeat=3):
        v = InvariantForm.scalar(sig, H0[p][q][s]).d() * 3
        v = v + (pfs(R1[s], R0[p][q]) + pfs(R1[q], R0[s][p]) + pfs(R1[p], R0[q][s])) * 2
        e3.append(v)
    # E4: sum <R0^ij, R0^pq> theta_i theta_j theta_p theta_q
    e4 = zero
    thetas = [InvariantForm.generator(sig, p) for p in dec.fibers]
    for i, j, p, q in itertools.product(range(k), repeat=4):
        c = pair_scalars(g, R0[i][j], R0[p][q], dim) if n else TrigScalar.zero(dim)
        if c:
            e4 = e4 + thetas[i].wedge(thetas[j]).wedge(thetas[p]).wedge(thetas[q]) * c
    # E5
    e5 = d_theta(R2)
    for i in range(k):
        e5 = add(e5, [r.wedge(F[i]) for r in R1[i]])
    # E6
    e6 = []
    for p in range(k):
        v = add(d_theta(R1[p]), apply_matrix(A[p], R2) if n else [])
        for i in range(k):
            v = add(v, scal_vec_times_form(R0[p][i], F[i] * 2))
        e6.append(v)
    # E7
    e7 = []
    for p in range(k):
        for q in range(k):
            v = sub(apply_matrix(A[p], R1[q]), apply_matrix(A[q], R1[p])) if n else []
            v = sub(v, scal_forms(nabla_theta(R0[p][q]), 2))
            e7.append(v)
    # E8
    e8 = []
    for p, q, s in itertools.product(range(k), repeat=3):
        v = [a + b + c for a, b, c in zip(apply_scalar_matrix(A[s], R0[p][q], dim),
                                         apply_scalar_matrix(A[q], R0[s][p], dim),
                                         apply_scalar_matrix(A[p], R0[q][s], dim))]
        e8.append(v)
    # E9
    e9 = []
    if n:
        Rt = form_matrix_add(form_matrix_d(ct), form_matrix_wedge(ct, ct))
        for i in range(k):
            Rt = form_matrix_sub(Rt, forms_matrix_from_scalar(sig, F[i], A[i]))
        e9 = form_matrix_sub(Rt, ad_forms(g, R2))
    # E10
    e10 = []
    for i in range(k):
        for j in range(k):
            adr = ad_scalars(g, R0[i][j], dim)
            com = scalar_matrix_commutator(A[i], A[j], dim)
            e10.append([[x - y * Fraction(1, 2) for x, y in zip(r1, r2)] for r1, r2 in zip(adr, com)])
    # E11
    e11 = []
    for i in range(k):
        if not n:
            e11.append([])
            continue
        dA = [[InvariantForm.scalar(sig, x).d() for x in row] for row in A[i]]
        Aform = [[InvariantForm.scalar(sig, x) for x in row] for row in A[i]]
        comm = form_matrix_sub(form_matrix_wedge(ct, Aform), form_matrix_wedge(Aform, ct))
        e11.append(form_matrix_sub(form_matrix_add(dA, comm), ad_forms(g, R1[i])))
    vals = [e0, e1, e2, e3, e4, e5, e6, e7, e8, e9, e10, e11]
    return [Residual(name, v) for name, v in zip(DECOMP_EQUATIONS, vals)]


# -- construction from data on the base ------------------------------------

def base_curvature_element(g: QuadraticLieAlgebra, omega_B: FormMat) -> FormVec:
    """The g-valued 2-form r with R^B = ad_r, where R^B is the curvature of d + omega_B."""
    RB = form_matrix_add(form_matrix_d(omega_B), form_matrix_wedge(omega_B, omega_B))
    sig = omega_B[0][0].sig
    masks = set()
    for row in RB:
        for x in row:
            masks.update(x.terms)
    out: List[Dict[int, TrigScalar]] = [dict() for _ in range(g.n)]
    for m in masks:
        D = [[x.coeff(m) for x in row] for row in RB]
        u = g.ad_inverse(D)
        for j in range(g.n):
            if u[j]:
                out[j][m] = u[j]
    rfrak = [InvariantForm(sig, t) for t in out]
    diff = form_matrix_sub(ad_forms(g, rfrak), RB)
    if any(x for row in diff for x in row):
        raise ValueError("curvature of the base connection is not inner")
    return rfrak


def check_skew_derivation_forms(g: QuadraticLieAlgebra, M: FormMat) -> bool:
    """Every coefficient matrix of a matrix of forms is a skew derivation."""
    masks = set()
    for row in M:
        for x in row:
            masks.update(x.terms)
    dim = M[0][0].sig.base_dim if M else 0
    for m in masks:
        D = [[x.coeff(m) for x in row] for row in M]
        if any(x for row in _skew_residual(g, D, dim) for x in row):
            return False
        if any(x for blk in _derivation_residual(g, D, dim) for x in blk):
            return False
    return True


def reduced_relations(g: QuadraticLieAlgebra, sig: ComplexSignature, omega_B: FormMat, r: Sequence[Sequence],
                      H3: InvariantForm, H2: FormVec, H1: List[FormVec], c: Sequence, rfrak: FormVec) -> List[Residual]:
    """Residuals of the three relations on the base data."""
    k = len(r)
    F = [InvariantForm(sig, dict(sig.curvature(p))) for p in sig.fiber_positions()]
    dim = sig.base_dim
    zero = InvariantForm.zero(sig)
    n = g.n
    base = CourantData(sig.base(), g, [[x.restrict(sig.base()) for x in row] for row in omega_B], [],
                       zero_forms(sig.base(), n), InvariantForm.zero(sig.base())) if n else None

    def nab(ri):
        if not n:
            return []
        return embed_forms(base.nabla_form(ri), sig)

    nr = [nab(ri) for ri in r]
    K = k_forms_from_pieces(g, sig, H2, r, rfrak)
    rr1 = H3.d() + sum((K[i].wedge(F[i]) for i in range(k)), zero)
    if n:
        rr1 = rr1 - pair_wedge(g, rfrak, rfrak)
    rr2 = []
    for p in range(k):
        v = H2[p].d()
        for i in range(k):
            t = (pair_form_scalar(g, nr[p], r[i], sig) if n else zero) - H1[p][i]
            v = v - t.wedge(F[i]) * 2
        if n:
            v = v + pair_wedge(g, rfrak, nr[p]) * 2
        rr2.append(v)
    rr3 = []
    for p in range(k):
        for q in range(k):
            v = H1[p][q].d()
            for i in range(k):
                if c[i][p][q]:
                    v = v + F[i] * (3 * Fraction(c[i][p][q]))
            if n:
                br = [as_scalar(dim, x) for x in g.bracket(r[p], r[q])]
                v = v - pair_form_scalar(g, rfrak, br, sig) + pair_wedge(g, nr[p], nr[q])
            rr3.append(v)
    return [Residual("reduced-H3", rr1), Residual("reduced-H2", rr2), Residual("reduced-H1", rr3)]


def k_forms_from_pieces(g: QuadraticLieAlgebra, sig: ComplexSignature, H2: FormVec, r: Sequence[Sequence],
                        rfrak: FormVec) -> FormVec:
    """K_i = H2^i + 2 <rfrak, r_i> - <r_i, r_j> F_j."""
    k = len(r)
    dim = sig.base_dim
    F = [InvariantForm(sig, dict(sig.curvature(p))) for p in sig.fiber_positions()]
    out = []
    for i in range(k):
        v = H2[i]
        if g.n:
            v = v + pair_form_scalar(g, rfrak, r[i], sig) * 2
            for j in range(k):
                c = pair_scalars(g, r[i], r[j], dim)
                if c:
                    v = v - F[j] * c
        out.append(v)
    return out


def build_from_base_data(g: QuadraticLieAlgebra, base_dim: int, curvatures: Sequence, r: Sequence[Sequence],
                         H3=None, H2: Optional[Sequence] = None, omega_B: Optional[FormMat] = None,
                         H1: Optional[Sequence[Sequence]] = None, c: Optional[Sequence] = None,
                         kind: str = THETA, name: str = "", check: bool = True) -> CourantData:
    """Assemble invariant (nabla, R, H) on a torus bundle from data on the base.

    ``curvatures``: one basic 2-form per fiber (``InvariantForm`` on the base
    or a dict mask -> scalar); ``r``: one g-valued function per fiber;
    ``H3``, ``H2``: basic forms on the base; ``omega_B``: matrix of basic
    1-forms (default flat).  ``H1`` overrides the default antisymmetric
    choice and ``c`` adds constants to ``H0``.
    """
    n = g.n
    k = len(curvatures)
    base = ComplexSignature(base_dim, ())
    curv_dicts = [dict(F.terms) if isinstance(F, InvariantForm) else dict(F) for F in curvatures]
    sig = ComplexSignature.torus_bundle(base_dim, curv_dicts, kind)
    dim = base_dim
    if n and not g.ad_is_isomorphism():
        raise AdNotIso("ad: g -> Der(g) is not an isomorphism")
    r = [[as_scalar(dim, x) for x in ri] for ri in r]
    if len(r) != k:
        raise ValueError("need one section r_i per fiber")
    if omega_B is None:
        omega_B = zero_form_matrix(base, n)
    omega_B = [[x if x.sig == base else x.restrict(base) for x in row] for row in omega_B]
    if n and not check_skew_derivation_forms(g, omega_B):
        raise ValueError("base connection is not valued in skew derivations")
    zero = InvariantForm.zero(sig)

    def lift(x):
        if x is None:
            return zero
        if isinstance(x, InvariantForm):
            return x.embed(sig) if x.sig != sig else x
        raise TypeError("expected an InvariantForm")

    H3 = lift(H3)
    H2 = [lift(x) for x in (H2 if H2 is not None else [None] * k)]
    omega = [[x.embed(sig) for x in row] for row in omega_B]
    rfrak = embed_forms(base_curvature_element(g, omega_B), sig) if n else []
    tmp = CourantData(sig, g, omega, [zero_scalar_matrix(dim, n) for _ in range(k)], zero_forms(sig, n), zero) if n else None
    nr = [tmp.nabla_form(ri) for ri in r] if n else [[] for _ in range(k)]
    if c is None:
        c = [[[0] * k for _ in range(k)] for _ in range(k)]
    c = [[[Fraction(x) for x in row] for row in blk] for blk in c]
    if H1 is None:
        H1 = [[(pair_form_scalar(g, nr[i], r[j], sig) - pair_form_scalar(g, nr[j], r[i], sig)) * Fraction(1, 2)
               if n else zero for j in range(k)] for i in range(k)]
    else:
        H1 = [[lift(x) for x in row] for row in H1]
    thetas = [InvariantForm.generator(sig, p) for p in sig.fiber_positions()]
    if check:
        res = reduced_relations(g, sig, omega, r, H3, H2, H1, c, rfrak)
        bad = [x for x in res if not x.is_zero]
        if bad:
            raise ReducedRelationsViolated("reduced relations violated: " + ", ".join(x.name for x in bad), res)
    # R
    R = []
    for col in range(n):
        v = rfrak[col]
        for i in range(k):
            F_i = InvariantForm(sig, dict(curv_dicts[i]))
            if r[i][col]:
                v = v - F_i * r[i][col]
            v = v + thetas[i].wedge(nr[i][col])
        for i in range(k):
            for j in range(k):
                br = g.bracket(r[i], r[j])
                if br[col]:
                    v = v + thetas[i].wedge(thetas[j]) * (as_scalar(dim, br[col]) * Fraction(1, 2))
        R.append(v)
    # H
    H = H3
    for i in range(k):
        H = H + thetas[i].wedge(H2[i])
        for j in range(k):
            H = H + thetas[i].wedge(thetas[j]).wedge(H1[i][j])
            for s in range(k):
                h0 = as_scalar(dim, c[i][j][s])
                if n:
                    br = [as_scalar(dim, x) for x in g.bracket(r[i], r[j])]
                    h0 = h0 - pair_scalars(g, br, r[s], dim) * Fraction(1, 3)
                if h0:
                    H = H + thetas[i].wedge(thetas[j]).wedge(thetas[s]) * h0
    # connection
    conn = [list(row) for row in omega]
    action = []
    for i in range(k):
        adr = ad_scalars(g, r[i], dim)
        action.append(adr)
        for a in range(n):
            for b in range(n):
                if adr[a][b]:
                    conn[a][b] = conn[a][b] - thetas[i] * adr[a][b]
    return CourantData(sig, g, conn if n else [], action if n else [[] for _ in range(k)], R, H, name=name)
