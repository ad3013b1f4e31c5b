from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from courant_tdual.coeff_ring import TrigScalar, random_scalar
from courant_tdual.exterior import (THETA, THETA_TILDE, ComplexSignature, Generator, InvariantForm,
                                    apply_vector, form_exp, frame_vector, vector_bracket)

from support import rform

M = 3
SIG = ComplexSignature.torus_bundle(M, [{0b011: TrigScalar.cos(M, [1, 1, 0])}, {0b110: TrigScalar.const(M, 2)}])
seeds = st.randoms(use_true_random=False)


def rvec(rng, sig=SIG):
    return tuple(random_scalar(rng, sig.base_dim, 1, 1, 2) if rng.random() < 0.6 else TrigScalar.zero(sig.base_dim)
                 for _ in range(sig.n))


def hom(rng, degree):
    return rform(rng, SIG, degree)


@given(seeds)
def test_d_squared_is_zero(rng):
    w = rform(rng, SIG)
    assert w.d().d().is_zero()


@given(seeds, st.integers(0, 3), st.integers(0, 3))
def test_leibniz(rng, p, q):
    a, b = hom(rng, p), hom(rng, q)
    assert a.wedge(b).d() == a.d().wedge(b) + a.wedge(b.d()) * (-1) ** p


@given(seeds, st.integers(0, 3), st.integers(0, 3))
def test_graded_commutative(rng, p, q):
    a, b = hom(rng, p), hom(rng, q)
    assert a.wedge(b) == b.wedge(a) * (-1) ** (p * q)


@given(seeds, st.integers(1, 3))
def test_interior_antiderivation(rng, p):
    a, b = hom(rng, p), rform(rng, SIG)
    X = rvec(rng)
    assert a.wedge(b).interior(X) == a.interior(X).wedge(b) + a.wedge(b.interior(X)) * (-1) ** p
    assert a.interior(X).interior(X).is_zero()


@given(seeds)
def test_lie_commutes_with_d(rng):
    w, X = rform(rng, SIG), rvec(rng)
    assert w.d().lie(X) == w.lie(X).d()


@given(seeds)
def test_lie_interior_commutator(rng):
    # [L_X, i_Y] = i_[X,Y]: checks the frame brackets against the curvatures
    w, X, Y = rform(rng, SIG), rvec(rng), rvec(rng)
    assert w.interior(Y).lie(X) - w.lie(X).interior(Y) == w.interior(vector_bracket(SIG, X, Y))


@given(seeds)
def test_d_of_one_form_invariant_formula(rng):
    a, X, Y = hom(rng, 1), rvec(rng), rvec(rng)
    lhs = a.d().evaluate(X, Y)
    rhs = apply_vector(SIG, X, a.evaluate(Y)) - apply_vector(SIG, Y, a.evaluate(X)) - a.evaluate(vector_bracket(SIG, X, Y))
    assert lhs == rhs


def test_evaluate_determinant_convention():
    w = InvariantForm.monomial(SIG, ["dx1", "dx2"])
    X1, X2 = frame_vector(SIG, 0), frame_vector(SIG, 1)
    assert w.evaluate(X1, X2) == TrigScalar.const(M, 1)
    assert w.evaluate(X2, X1) == TrigScalar.const(M, -1)


def test_d_theta_is_curvature():
    th1 = InvariantForm.generator(SIG, 3)
    assert th1.d() == InvariantForm.monomial(SIG, ["dx1", "dx2"], TrigScalar.cos(M, [1, 1, 0]))
    th2 = InvariantForm.monomial(SIG, ["th2"])
    assert th2.d() == InvariantForm.monomial(SIG, ["dx2", "dx3"], 2)


def test_monomial_sign_from_order():
    assert InvariantForm.monomial(SIG, ["dx2", "dx1"]) == -InvariantForm.monomial(SIG, ["dx1", "dx2"])


def test_rejects_non_closed_curvature():
    with pytest.raises(ValueError):
        ComplexSignature.torus_bundle(M, [{0b011: TrigScalar.cos(M, [0, 0, 1])}])


def test_rejects_tilde_before_theta():
    g1 = Generator("tt1", THETA_TILDE, ())
    g2 = Generator("th1", THETA, ())
    with pytest.raises(ValueError):
        ComplexSignature(2, [g1, g2])


@given(seeds)
def test_form_exp_inverse(rng):
    b = hom(rng, 2)
    assert form_exp(b).wedge(form_exp(-b)) == InvariantForm.scalar(SIG, 1)


@given(seeds)
def test_embed_restrict_round_trip(rng):
    N = SIG.join(ComplexSignature.torus_bundle(M, [{0b101: TrigScalar.const(M, 1)}], kind=THETA_TILDE))
    w = rform(rng, SIG)
    assert w.embed(N).restrict(SIG) == w
    assert w.embed(N).d() == w.d().embed(N)


@given(seeds)
def test_json_round_trip(rng):
    w = rform(rng, SIG)
    assert InvariantForm.from_json(SIG, w.to_json()) == w
    assert ComplexSignature.from_json(SIG.to_json()) == SIG


def test_integrate_top_form():
    w = InvariantForm.monomial(SIG, ["dx1", "dx2", "dx3", "th1", "th2"], TrigScalar.cos(M, [1, 0, 0]) + Fraction(3, 2))
    assert w.integrate() == Fraction(3, 2)
