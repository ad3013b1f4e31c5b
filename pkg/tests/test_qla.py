from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from courant_tdual.qla import (NotNilpotent, QuadraticLieAlgebra, find_witt_basis, mat_add, mat_id, mat_mul,
                               mat_scale, mat_sub, mat_vec, matrix_exp_nilpotent)

G = QuadraticLieAlgebra.so3_semidirect_dual()
S = G.spinors
vectors = st.lists(st.integers(-3, 3), min_size=6, max_size=6)


def comm(a, b):
    return mat_sub(mat_mul(a, b), mat_mul(b, a))


@st.composite
def skew(draw):
    # D = G^{-1} A with A antisymmetric; here the Gram matrix is its own inverse
    n = G.n
    A = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            A[i][j] = Fraction(draw(st.integers(-2, 2)))
            A[j][i] = -A[i][j]
    return mat_mul(G.gram, A)


def test_structure_residuals():
    assert G.jacobi_residual() == 0
    assert G.antisymmetry_residual() == 0
    assert G.invariance_residual() == 0
    assert G.signature() == (3, 3)
    assert G.ad_is_isomorphism()


def test_bracket_oracle():
    # [e1, e2] = e3 in so(3); so(3) acts on so(3)* by the coadjoint action
    assert G.bracket([1, 0, 0, 0, 0, 0], [0, 1, 0, 0, 0, 0]) == [0, 0, 1, 0, 0, 0]
    assert G.bracket([0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 1, 0]) == [0] * 6
    assert G.pair([1, 0, 0, 0, 0, 0], [0, 0, 0, 1, 0, 0]) == 1


@given(vectors)
def test_ad_inverse(u):
    assert G.ad_inverse(G.ad(u)) == [Fraction(x) for x in u]


@given(vectors, vectors)
def test_clifford_relation(u, v):
    gu, gv = S.gamma(u), S.gamma(v)
    anti = mat_add(mat_mul(gu, gv), mat_mul(gv, gu))
    assert anti == mat_scale(mat_id(S.size), 2 * G.pair(u, v))


@given(skew(), vectors)
def test_lift_intertwines_gamma(D, u):
    assert comm(S.lift(D), S.gamma(u)) == S.gamma(mat_vec(D, u))


@given(skew(), skew())
def test_lift_is_homomorphism(A, B):
    assert comm(S.lift(A), S.lift(B)) == S.lift(comm(A, B))


@given(vectors)
def test_cartan_form_is_invariant(u):
    assert comm(S.lift(G.ad(u)), S.cartan_matrix) == mat_scale(mat_id(S.size), 0)


def test_witt_basis():
    assert S.witt_residual() == 0
    ws, wps = find_witt_basis([[1, 0], [0, -1]])
    ab = QuadraticLieAlgebra.abelian([[1, 0], [0, -1]])
    assert ab.pair(ws[0], wps[0]) == 1
    assert ab.pair(ws[0], ws[0]) == 0


def test_pairing_oracle_h1():
    # hyperbolic plane: <1, w> = (1 ^ w)_top = 1 and <w, 1> = (w^t ^ 1)_top = 1, so det = -1
    P = QuadraticLieAlgebra.abelian([[0, 1], [1, 0]]).spinors.pairing_matrix
    assert P == [[0, 1], [1, 0]]


@given(vectors)
def test_gamma_preserves_pairing(u):
    P = S.pairing_matrix
    gu = S.gamma(u)
    # <gamma_u a, gamma_u b> = <u,u> <a, b>
    lhs = mat_mul(mat_mul([list(r) for r in zip(*gu)], P), gu)
    assert lhs == mat_scale(P, G.pair(u, u))


def test_matrix_exp():
    x = [[Fraction(x) for x in row] for row in G.ad([0, 0, 0, 1, 2, 0])]
    assert mat_mul(matrix_exp_nilpotent(x), matrix_exp_nilpotent(mat_scale(x, -1))) == mat_id(6)
    with pytest.raises(NotNilpotent):
        matrix_exp_nilpotent([[Fraction(x) for x in row] for row in G.ad([1, 0, 0, 0, 0, 0])])


def test_json_round_trip():
    assert QuadraticLieAlgebra.from_json(G.to_json()) == G
