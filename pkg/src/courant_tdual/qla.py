"""
Quadratic Lie algebras of neutral signature and their spinor modules.

A ``QuadraticLieAlgebra`` is given by structure constants ``c[i][j][k]``
(``[e_i, e_j] = sum_k c[i][j][k] e_k``) and a Gram matrix.  When the Gram
matrix splits over the rationals we pick a Witt basis ``w_1..w_h, w'_1..w'_h``
(both halves isotropic, ``<w_i, w'_j> = delta_ij``) and realize the
irreducible Clifford module as the Fock space ``S = Lambda W``: ``w_i`` acts
by exterior multiplication and ``w'_i`` by twice the contraction, so that
``gamma_v^2 = <v, v>``.

Conventions fixed here and used everywhere else:

* a bivector ``omega`` acts on vectors by ``omega(r) = -1/2 [omega, r]_Cl``;
* the spinor lift of a skew derivation ``D`` is ``-1/2 omega_D``, i.e. the
  unique trace-free operator with ``[D^S, gamma_r] = gamma_{D r}``;
* the Fock pairing is ``<a, b> = (a^t ^ b)_top`` with respect to
  ``w_1 ^ ... ^ w_h``; it pairs the vacuum positively with the top state.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .exterior import bits, popcount, wedge_sign, transpose_sign

Matrix = List[List[Fraction]]


class NoWittBasis(ValueError):
    """The Gram matrix admits no rational Witt basis we can find."""


class NotSkew(ValueError):
    """An endomorphism is not skew-symmetric for the scalar product."""


class NotNilpotent(ValueError):
    """A Clifford exponential does not terminate within its bound."""


# -- small exact linear algebra --------------------------------------------

def mat_zero(r: int, c: Optional[int] = None) -> Matrix:
    return [[Fraction(0)] * (r if c is None else c) for _ in range(r)]


def mat_id(n: int) -> Matrix:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def mat_mul(a: Sequence[Sequence], b: Sequence[Sequence]) -> list:
    n, m, p = len(a), len(b), len(b[0]) if b else 0
    out = []
    for i in range(n):
        row = []
        ai = a[i]
        for j in range(p):
            s = 0
            for k in range(m):
                if ai[k] and b[k][j]:
                    s = s + ai[k] * b[k][j]
            row.append(s)
        out.append(row)
    return out


def mat_add(a, b) -> list:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_sub(a, b) -> list:
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_scale(a, c) -> list:
    return [[x * c for x in row] for row in a]


def mat_vec(a, v) -> list:
    out = []
    for row in a:
        s = 0
        for x, y in zip(row, v):
            if x and y:
                s = s + x * y
        out.append(s)
    return out


def mat_transpose(a) -> list:
    return [list(r) for r in zip(*a)]


def mat_is_zero(a) -> bool:
    return all(not x for row in a for x in row)


def mat_det(a: Sequence[Sequence[Fraction]]) -> Fraction:
    m = [[Fraction(x) for x in row] for row in a]
    n = len(m)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det *= m[col][col]
        inv = 1 / m[col][col]
        for r in range(col + 1, n):
            f = m[r][col] * inv
            if f:
                for c in range(col, n):
                    m[r][c] -= f * m[col][c]
    return det


def mat_inv(a: Sequence[Sequence[Fraction]]) -> Matrix:
    n = len(a)
    m = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        m[col], m[piv] = m[piv], m[col]
        inv = 1 / m[col][col]
        m[col] = [x * inv for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [row[n:] for row in m]


def rank(rows: Sequence[Sequence[Fraction]]) -> int:
    m = [[Fraction(x) for x in row] for row in rows]
    if not m:
        return 0
    r = 0
    ncol = len(m[0])
    for col in range(ncol):
        piv = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][col]
        for i in range(len(m)):
            if i != r and m[i][col] != 0:
                f = m[i][col] * inv
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        r += 1
        if r == len(m):
            break
    return r


def nullspace(rows: Sequence[Sequence[Fraction]], ncol: int) -> List[List[Fraction]]:
    """Basis of {x : rows . x = 0}."""
    m = [[Fraction(x) for x in row] for row in rows]
    pivots = []
    r = 0
    for col in range(ncol):
        piv = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][col]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col] != 0:
                f = m[i][col]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(col)
        r += 1
    free = [c for c in range(ncol) if c not in pivots]
    basis = []
    for fcol in free:
        v = [Fraction(0)] * ncol
        v[fcol] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -m[i][fcol]
        basis.append(v)
    return basis


def _rational_sqrt(q: Fraction) -> Optional[Fraction]:
    if q < 0:
        return None
    import math
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def find_witt_basis(gram: Sequence[Sequence[Fraction]]) -> Tuple[Matrix, Matrix]:
    """Rational Witt basis of a neutral form, or ``NoWittBasis``.

    Repeatedly finds a rational isotropic vector in the current orthogonal
    complement, pairs it with a partner and splits off the hyperbolic plane.
    """
    n = len(gram)
    g = [[Fraction(x) for x in row] for row in gram]

    def ip(u, v):
        return sum(u[i] * g[i][j] * v[j] for i in range(n) for j in range(n) if u[i] and v[j])

    space = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    ws, wps = [], []
    while space:
        iso = None
        for u in space:
            if ip(u, u) == 0:
                iso = u
                break
        if iso is None:
            for u, v in itertools.combinations(space, 2):
                a, b, c = ip(u, u), ip(v, v), ip(u, v)
                # a + 2ct + bt^2 = 0
                if b == 0:
                    if c != 0:
                        t = -a / (2 * c)
                        iso = [x + t * y for x, y in zip(u, v)]
                        break
                    continue
                root = _rational_sqrt(c * c - a * b)
                if root is None:
                    continue
                t = (-c + root) / b
                iso = [x + t * y for x, y in zip(u, v)]
                if any(iso):
                    break
                iso = None
        if iso is None:
            raise NoWittBasis("no rational isotropic vector found in the remaining subspace")
        partner = next((u for u in space if ip(iso, u) != 0), None)
        if partner is None:
            raise NoWittBasis("form is degenerate")
        s = ip(iso, partner)
        partner = [x / s for x in partner]
        q = ip(partner, partner)
        partner = [x - q / 2 * y for x, y in zip(partner, iso)]
        ws.append(iso)
        wps.append(partner)
        # orthogonal complement of span(iso, partner) inside span(space)
        new = []
        for u in space:
            u2 = [x - ip(u, partner) * y - ip(u, iso) * z for x, y, z in zip(u, iso, partner)]
            new.append(u2)
        # keep a basis
        basis = []
        for u in new:
            if rank(basis + [u]) > len(basis):
                basis.append(u)
        space = basis
    if len(ws) * 2 != n:
        raise NoWittBasis("form is not of neutral signature")
    return ws, wps


class QuadraticLieAlgebra:
    """Structure constants plus a neutral invariant scalar product."""

    def __init__(self, c: Sequence, gram: Sequence[Sequence], witt: Optional[Tuple[Sequence, Sequence]] = None,
                 name: str = ""):
        self.n = len(gram)
        n = self.n
        self.name = name
        self.c = [[[Fraction(c[i][j][k]) for k in range(n)] for j in range(n)] for i in range(n)] if n else []
        self.gram = [[Fraction(x) for x in row] for row in gram]
        if n and mat_det(self.gram) == 0:
            raise ValueError("Gram matrix is degenerate")
        self.gram_inv = mat_inv(self.gram) if n else []
        self._witt = None
        if witt is not None:
            ws = [[Fraction(x) for x in v] for v in witt[0]]
            wps = [[Fraction(x) for x in v] for v in witt[1]]
            self._witt = (ws, wps)

    # -- examples -------------------------------------------------------------

    @classmethod
    def zero(cls) -> "QuadraticLieAlgebra":
        return cls([], [], name="zero")

    @classmethod
    def abelian(cls, gram: Sequence[Sequence]) -> "QuadraticLieAlgebra":
        n = len(gram)
        return cls([[[0] * n for _ in range(n)] for _ in range(n)], gram, name="abelian")

    @classmethod
    def so3_semidirect_dual(cls) -> "QuadraticLieAlgebra":
        """so(3) x so(3)* with the duality pairing <(x, a), (y, b)> = a(y) + b(x).

        Basis e_1, e_2, e_3 of so(3) ([e_i, e_j] = eps_ijk e_k) followed by the
        dual basis f_1, f_2, f_3, on which so(3) acts by the coadjoint action.
        """
        n = 6
        c = [[[0] * n for _ in range(n)] for _ in range(n)]
        for i, j, k in itertools.permutations(range(3)):
            eps = _levi_civita(i, j, k)
            c[i][j][k] += eps
            # [e_i, f_j] = eps_ijk f_k (coadjoint action of so(3) on its dual)
            c[i][3 + j][3 + k] += eps
            c[3 + j][i][3 + k] -= eps
        gram = [[0] * n for _ in range(n)]
        for i in range(3):
            gram[i][3 + i] = gram[3 + i][i] = 1
        witt = ([[int(j == i) for j in range(n)] for i in range(3)],
                [[int(j == 3 + i) for j in range(n)] for i in range(3)])
        return cls(c, gram, witt, name="so3-semidirect-dual")

    # -- structure ------------------------------------------------------------

    def bracket(self, u: Sequence, v: Sequence) -> list:
        n = self.n
        out = [0] * n
        for i in range(n):
            if not u[i]:
                continue
            for j in range(n):
                if not v[j]:
                    continue
                p = u[i] * v[j]
                cij = self.c[i][j]
                for k in range(n):
                    if cij[k]:
                        out[k] = out[k] + p * cij[k]
        return out

    def pair(self, u: Sequence, v: Sequence):
        s = 0
        for i in range(self.n):
            if not u[i]:
                continue
            for j in range(self.n):
                if self.gram[i][j] and v[j]:
                    s = s + u[i] * v[j] * self.gram[i][j]
        return s

    def ad(self, u: Sequence) -> list:
        """Matrix of ad_u: column j is [u, e_j]."""
        n = self.n
        out = [[0] * n for _ in range(n)]
        for i in range(n):
            if not u[i]:
                continue
            for j in range(n):
                cij = self.c[i][j]
                for k in range(n):
                    if cij[k]:
                        out[k][j] = out[k][j] + u[i] * cij[k]
        return out

    def basis_vector(self, i: int) -> List[Fraction]:
        return [Fraction(int(j == i)) for j in range(self.n)]

    def dual_basis_vector(self, i: int) -> List[Fraction]:
        """The vector e~_i with <e_j, e~_i> = delta_ij."""
        return [self.gram_inv[k][i] for k in range(self.n)]

    def jacobi_residual(self) -> Fraction:
        worst = Fraction(0)
        n = self.n
        for i, j, k in itertools.combinations(range(n), 3):
            a, b, c = self.basis_vector(i), self.basis_vector(j), self.basis_vector(k)
            t = [x + y + z for x, y, z in zip(self.bracket(a, self.bracket(b, c)),
                                            self.bracket(b, self.bracket(c, a)),
                                            self.bracket(c, self.bracket(a, b)))]
            worst = max([worst] + [abs(Fraction(x)) for x in t])
        return worst

    def antisymmetry_residual(self) -> Fraction:
        n = self.n
        return max([Fraction(0)] + [abs(self.c[i][j][k] + self.c[j][i][k])
                                    for i in range(n) for j in range(n) for k in range(n)])

    def invariance_residual(self) -> Fraction:
        n = self.n
        worst = Fraction(0)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    u, v, w = self.basis_vector(i), self.basis_vector(j), self.basis_vector(k)
                    t = self.pair(self.bracket(u, v), w) + self.pair(v, self.bracket(u, w))
                    worst = max(worst, abs(Fraction(t)))
        return worst

    def signature(self) -> Tuple[int, int]:
        """(positive, negative) inertia via exact LDL^T with pivoting."""
        import copy
        m = copy.deepcopy(self.gram)
        n = self.n
        pos = neg = 0
        idx = list(range(n))
        while idx:
            piv = next((i for i in idx if m[i][i] != 0), None)
            if piv is None:
                # find off-diagonal pair and rotate
                pair = next(((i, j) for i in idx for j in idx if i != j and m[i][j] != 0), None)
                if pair is None:
                    break
                i, j = pair
                # replace e_i by e_i + e_j
                for k in range(n):
                    m[i][k] += m[j][k]
                for k in range(n):
                    m[k][i] += m[k][j]
                continue
            d = m[piv][piv]
            if d > 0:
                pos += 1
            else:
                neg += 1
            for i in idx:
                if i == piv:
                    continue
                f = m[i][piv] / d
                if f:
                    for k in idx:
                        m[i][k] -= f * m[piv][k]
            for i in idx:
                m[i][piv] = m[piv][i] = Fraction(0) if i != piv else m[piv][piv]
            idx.remove(piv)
        return pos, neg

    def is_neutral(self) -> bool:
        p, q = self.signature()
        return p == q and p + q == self.n

    def cartan_tensor(self, i: int, j: int, k: int) -> Fraction:
        """C(e_i, e_j, e_k) = <[e_i, e_j], e_k>."""
        return sum((self.c[i][j][l] * self.gram[l][k] for l in range(self.n)), Fraction(0))

    def derivation_basis(self) -> List[Matrix]:
        """Basis of skew-symmetric derivations (as n x n matrices)."""
        n = self.n
        if n == 0:
            return []
        rows = []
        # unknown D[a][b], index a*n + b ; D e_j = sum_a D[a][j] e_a
        N = n * n
        for i in range(n):
            for j in range(n):
                # D[e_i,e_j] - [De_i, e_j] - [e_i, De_j] = 0, component k
                for k in range(n):
                    row = [Fraction(0)] * N
                    for l in range(n):
                        if self.c[i][j][l]:
                            row[k * n + l] += self.c[i][j][l]
                    for a in range(n):
                        # [D e_i, e_j]_k = sum_a D[a][i] c[a][j][k]
                        if self.c[a][j][k]:
                            row[a * n + i] -= self.c[a][j][k]
                        if self.c[i][a][k]:
                            row[a * n + j] -= self.c[i][a][k]
                    rows.append(row)
                # skewness: <D e_i, e_j> + <e_i, D e_j> = 0
                row = [Fraction(0)] * N
                for a in range(n):
                    row[a * n + i] += self.gram[a][j]
                    row[a * n + j] += self.gram[i][a]
                rows.append(row)
        sols = nullspace(rows, N)
        return [[[v[a * n + b] for b in range(n)] for a in range(n)] for v in sols]

    def ad_is_isomorphism(self) -> bool:
        """ad: g -> skew Der(g) is bijective (exact rank computation)."""
        n = self.n
        if n == 0:
            return True
        ads = [self.ad(self.basis_vector(i)) for i in range(n)]
        flat = [[x for row in a for x in row] for a in ads]
        if rank(flat) != n:
            return False
        return len(self.derivation_basis()) == n

    @cached_property
    def _ad_left_inverse(self):
        """Rows selecting n independent matrix entries of ad, and the inverse map."""
        n = self.n
        ads = [self.ad(self.basis_vector(i)) for i in range(n)]
        entries = [(a, b) for a in range(n) for b in range(n)]
        chosen: List[Tuple[int, int]] = []
        rows: List[List[Fraction]] = []
        for (a, b) in entries:
            row = [ads[i][a][b] for i in range(n)]
            if rank(rows + [row]) > len(rows):
                rows.append(row)
                chosen.append((a, b))
            if len(rows) == n:
                break
        if len(rows) != n:
            raise ValueError("ad is not injective")
        return chosen, mat_inv(rows)

    def ad_inverse(self, D: Sequence[Sequence]) -> list:
        """The u with ad_u = D (D must be inner; entries may be functions)."""
        if self.n == 0:
            return []
        chosen, inv = self._ad_left_inverse
        vals = [D[a][b] for (a, b) in chosen]
        return mat_vec(inv, vals)

    # -- spinors --------------------------------------------------------------

    @cached_property
    def witt(self) -> Tuple[Matrix, Matrix]:
        if self._witt is not None:
            return self._witt
        if self.n == 0:
            return [], []
        return find_witt_basis(self.gram)

    @cached_property
    def spinors(self) -> "SpinorModule":
        return SpinorModule(self)

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        from .coeff_ring import format_rational
        n = self.n
        doc = {
            "dim": n,
            "c": [[[format_rational(self.c[i][j][k]) for k in range(n)] for j in range(n)] for i in range(n)],
            "gram": [[format_rational(x) for x in row] for row in self.gram],
        }
        if self._witt is not None:
            doc["witt"] = [[[format_rational(x) for x in v] for v in half] for half in self._witt]
        if self.name:
            doc["name"] = self.name
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "QuadraticLieAlgebra":
        n = int(doc["dim"])
        c = doc.get("c") or [[[0] * n for _ in range(n)] for _ in range(n)]
        c = [[[Fraction(x) for x in r2] for r2 in r1] for r1 in c]
        gram = [[Fraction(x) for x in row] for row in doc.get("gram", [])]
        if len(gram) != n or any(len(r) != n for r in gram):
            raise ValueError("gram matrix has wrong shape")
        if len(c) != n:
            raise ValueError("structure constants have wrong shape")
        witt = doc.get("witt")
        if witt is not None:
            witt = ([[Fraction(x) for x in v] for v in witt[0]], [[Fraction(x) for x in v] for v in witt[1]])
        return cls(c, gram, witt, name=doc.get("name", ""))

    def __eq__(self, other) -> bool:
        return (isinstance(other, QuadraticLieAlgebra) and self.n == other.n
                and self.c == other.c and self.gram == other.gram)

    def __hash__(self):
        return hash((self.n, str(self.gram)))


def _levi_civita(i: int, j: int, k: int) -> int:
    if len({i, j, k}) < 3:
        return 0
    perm = [i, j, k]
    inv = sum(1 for a in range(3) for b in range(a + 1, 3) if perm[a] > perm[b])
    return -1 if inv & 1 else 1


class SpinorModule:
    """Fock model of the irreducible Cl(g)-module."""

    def __init__(self, g: QuadraticLieAlgebra):
        self.g = g
        self.h = g.n // 2
        self.size = 1 << self.h
        ws, wps = g.witt
        self.ws, self.wps = ws, wps
        # coordinates of e_k in the Witt basis: e_k = sum a_ki w_i + b_ki w'_i
        self._a = [[g.pair(g.basis_vector(k), wps[i]) for i in range(self.h)] for k in range(g.n)]
        self._b = [[g.pair(g.basis_vector(k), ws[i]) for i in range(self.h)] for k in range(g.n)]
        self.gammas = [self._gamma_matrix(k) for k in range(g.n)]

    def witt_residual(self) -> Fraction:
        g = self.g
        worst = Fraction(0)
        for i in range(self.h):
            for j in range(self.h):
                worst = max(worst, abs(g.pair(self.ws[i], self.ws[j])), abs(g.pair(self.wps[i], self.wps[j])),
                            abs(g.pair(self.ws[i], self.wps[j]) - int(i == j)))
        return worst

    def parity(self, state: int) -> int:
        return popcount(state) & 1

    # elementary operators on basis states
    def _wedge(self, i: int, state: int):
        bit = 1 << i
        if state & bit:
            return None
        s = -1 if popcount(state & (bit - 1)) & 1 else 1
        return state | bit, s

    def _contract(self, i: int, state: int):
        bit = 1 << i
        if not state & bit:
            return None
        s = -1 if popcount(state & (bit - 1)) & 1 else 1
        return state & ~bit, s

    def _gamma_matrix(self, k: int) -> Matrix:
        m = mat_zero(self.size)
        for st in range(self.size):
            for i in range(self.h):
                a, b = self._a[k][i], self._b[k][i]
                if a:
                    r = self._wedge(i, st)
                    if r:
                        m[r[0]][st] += a * r[1]
                if b:
                    r = self._contract(i, st)
                    if r:
                        m[r[0]][st] += 2 * b * r[1]
        return m

    def gamma(self, v: Sequence) -> list:
        """Clifford action matrix of a vector (entries may be functions)."""
        out = [[0] * self.size for _ in range(self.size)]
        for k, vk in enumerate(v):
            if not vk:
                continue
            gk = self.gammas[k]
            for r in range(self.size):
                for c in range(self.size):
                    if gk[r][c]:
                        out[r][c] = out[r][c] + vk * gk[r][c]
        return out

    def quantize(self, indices: Sequence[int]) -> Matrix:
        """Antisymmetrized Clifford product of basis vectors e_{i1} ... e_{ip}."""
        p = len(indices)
        out = mat_zero(self.size)
        if p == 0:
            return mat_id(self.size)
        count = 0
        for perm in itertools.permutations(range(p)):
            sgn = _perm_sign(perm)
            prod = mat_id(self.size)
            for q in perm:
                prod = mat_mul(prod, self.gammas[indices[q]])
            out = mat_add(out, mat_scale(prod, sgn))
            count += 1
        return mat_scale(out, Fraction(1, count))

    def bivector_matrix(self, omega: Dict[Tuple[int, int], Fraction]) -> Matrix:
        """Clifford matrix of sum_{i<j} omega[(i,j)] e_i ^ e_j."""
        out = mat_zero(self.size)
        for (i, j), c in omega.items():
            if c:
                out = mat_add(out, mat_scale(self.quantize([i, j]), c))
        return out

    @cached_property
    def cartan_matrix(self) -> Matrix:
        """Clifford matrix of the Cartan 3-form, indices raised with the metric."""
        g = self.g
        out = mat_zero(self.size)
        for i, j, k in itertools.combinations(range(g.n), 3):
            c = cartan_component_raised(g, i, j, k)
            if c:
                out = mat_add(out, mat_scale(self.quantize([i, j, k]), c))
        return out

    @cached_property
    def lift_basis(self) -> List[List[Matrix]]:
        """L[j][i] = 1/4 gamma_j gamma(e~_i); lift(D) = sum_ji D[j][i] L[j][i]."""
        g = self.g
        dual = [self.gamma(g.dual_basis_vector(i)) for i in range(g.n)]
        return [[mat_scale(mat_mul(self.gammas[j], dual[i]), Fraction(1, 4)) for i in range(g.n)]
                for j in range(g.n)]

    def lift(self, D: Sequence[Sequence]) -> list:
        """Spinor lift of a skew derivation (entries may be functions)."""
        out = [[0] * self.size for _ in range(self.size)]
        L = self.lift_basis
        for j in range(self.g.n):
            for i in range(self.g.n):
                dji = D[j][i]
                if not dji:
                    continue
                lji = L[j][i]
                for r in range(self.size):
                    for c in range(self.size):
                        if lji[r][c]:
                            out[r][c] = out[r][c] + dji * lji[r][c]
        return out

    @cached_property
    def pairing_matrix(self) -> Matrix:
        """<a, b> = (a^t ^ b)_top on basis states, normalized (see module docstring)."""
        full = self.size - 1
        m = mat_zero(self.size)
        for a in range(self.size):
            b = full & ~a
            s = wedge_sign(a, b) * transpose_sign(popcount(a))
            m[a][b] = Fraction(s) * self.pairing_scale
        return m

    @cached_property
    def pairing_scale(self) -> Fraction:
        """Positive scale making det = 1 (h > 1) or -1 (h = 1); here always 1."""
        full = self.size - 1
        raw = mat_zero(self.size)
        for a in range(self.size):
            raw[a][full & ~a] = Fraction(wedge_sign(a, full & ~a) * transpose_sign(popcount(a)))
        det = mat_det(raw)
        target = Fraction(-1) if self.h == 1 else Fraction(1)
        ratio = target / det
        # c^(2^h) = ratio must have a positive rational root; the raw Fock
        # pairing already has determinant +-1 of the right sign
        if ratio != 1:
            raise ValueError(f"unexpected Fock pairing determinant {det}")
        return Fraction(1)

    def pair(self, s: Sequence, t: Sequence):
        m = self.pairing_matrix
        out = 0
        for a in range(self.size):
            if not s[a]:
                continue
            for b in range(self.size):
                if m[a][b] and t[b]:
                    out = out + s[a] * t[b] * m[a][b]
        return out


def cartan_component_raised(g: QuadraticLieAlgebra, i: int, j: int, k: int) -> Fraction:
    """C(e~_i, e~_j, e~_k) for the metric dual basis."""
    n = g.n
    gi = g.gram_inv
    total = Fraction(0)
    for a in range(n):
        if not gi[i][a]:
            continue
        for b in range(n):
            if not gi[j][b]:
                continue
            for c in range(n):
                if not gi[k][c]:
                    continue
                total += gi[i][a] * gi[j][b] * gi[k][c] * g.cartan_tensor(a, b, c)
    return total


def cartan_form(g: QuadraticLieAlgebra) -> Dict[Tuple[int, int, int], Fraction]:
    """The Cartan 3-form as an element of Lambda^3 g: {(i<j<k): coefficient}."""
    out = {}
    for i, j, k in itertools.combinations(range(g.n), 3):
        c = cartan_component_raised(g, i, j, k)
        if c:
            out[(i, j, k)] = c
    return out


def bivector_of_derivation(g: QuadraticLieAlgebra, A: Sequence[Sequence[Fraction]]) -> Dict[Tuple[int, int], Fraction]:
    """The bivector omega with A(r) = -1/2 [omega, r]_Cl for all r.

    With the identification (u ^ v)(r) = <u, r> v - <v, r> u this is
    omega = 1/2 sum_i e~_i ^ A(e_i).
    """
    n = g.n
    A = [[Fraction(x) for x in row] for row in A]
    for i in range(n):
        for j in range(n):
            s = g.pair(mat_vec(A, g.basis_vector(i)), g.basis_vector(j)) + g.pair(g.basis_vector(i), mat_vec(A, g.basis_vector(j)))
            if s != 0:
                raise NotSkew(f"<A e_{i}, e_{j}> + <e_{i}, A e_{j}> = {s}")
    T = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        dual = g.dual_basis_vector(i)
        for l in range(n):
            if not dual[l]:
                continue
            for j in range(n):
                if A[j][i]:
                    T[l][j] += Fraction(1, 2) * dual[l] * A[j][i]
    out = {}
    for l in range(n):
        for j in range(l + 1, n):
            v = T[l][j] - T[j][l]
            if v:
                out[(l, j)] = v
    return out


def _perm_sign(perm: Sequence[int]) -> int:
    inv = sum(1 for a in range(len(perm)) for b in range(a + 1, len(perm)) if perm[a] > perm[b])
    return -1 if inv & 1 else 1


def clifford_exp(apply: Callable, s, bound: int, is_zero: Callable = lambda x: not x):
    """sum_p x^p s / p! for a nilpotent operator ``apply`` (finite sum).

    Raises ``NotNilpotent`` when x^p s is still nonzero after ``bound`` steps.
    """
    total = s
    term = s
    for p in range(1, bound + 2):
        term = apply(term)
        if is_zero(term):
            return total
        term = term * Fraction(1, p)
        total = total + term
    raise NotNilpotent(f"Clifford powers did not vanish within {bound} steps")


def matrix_exp_nilpotent(x: Sequence[Sequence[Fraction]], bound: Optional[int] = None) -> Matrix:
    """exp of a nilpotent rational matrix; raises NotNilpotent otherwise."""
    n = len(x)
    bound = n if bound is None else bound
    out = mat_id(n)
    term = mat_id(n)
    for p in range(1, bound + 2):
        term = mat_scale(mat_mul(term, x), Fraction(1, p))
        if mat_is_zero(term):
            return out
        out = mat_add(out, term)
    raise NotNilpotent("matrix is not nilpotent within the dimension bound")
