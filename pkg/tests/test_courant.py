import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from courant_tdual.coeff_ring import TrigScalar, random_scalar
from courant_tdual.courant import (CourantData, IsoData, Section, _theta_pieces, ad_forms, all_zero,
                                   anchor_derivative, build_from_base_data, check_action_compat,
                                   check_compatibility, check_decomp_equations, decompose, dorfman,
                                   iso_relations, random_section, section_pairing, transport_data)
from courant_tdual.exterior import ComplexSignature, InvariantForm, vector_bracket
from courant_tdual.qla import QuadraticLieAlgebra, matrix_exp_nilpotent

from support import EXAMPLES, example, rform

seeds = st.randoms(use_true_random=False)
names = st.sampled_from(["exact-flux-2", "heisenberg-1", "affine-so3"])


def sections(rng, data, k):
    return [random_section(rng, data.sig, data.g.n) for _ in range(k)]


def test_pairing_oracle():
    data = example("affine-so3").data
    sig = data.sig
    u = Section(sig, InvariantForm.monomial(sig, ["dx1"], 4), [1, 0, 0, 0, 0, 0], [0, 1, 0])
    v = Section(sig, InvariantForm.monomial(sig, ["dx2"], 6), [0, 0, 0, 3, 0, 0], [5, 0, 0])
    # 1/2 (4*5 + 6*1) + <e1, 3 f1>
    assert section_pairing(data.g, u, v) == TrigScalar.const(2, 16)


@pytest.mark.parametrize("name", EXAMPLES)
def test_examples_are_compatible(name):
    data = example(name).data
    assert all_zero(check_compatibility(data) + check_action_compat(data))


@given(seeds, names)
def test_anchor_is_bracket_of_vector_fields(rng, name):
    data = example(name).data
    u, v = sections(rng, data, 2)
    assert dorfman(data, u, v).X == vector_bracket(data.sig, u.X, v.X)


@given(seeds, names)
def test_jacobi(rng, name):
    data = example(name).data
    u, v, w = sections(rng, data, 3)
    lhs = dorfman(data, u, dorfman(data, v, w))
    rhs = dorfman(data, dorfman(data, u, v), w) + dorfman(data, v, dorfman(data, u, w))
    assert lhs == rhs


@given(seeds, names)
def test_metric_compatibility(rng, name):
    data = example(name).data
    g = data.g
    u, v, w = sections(rng, data, 3)
    lhs = anchor_derivative(data.sig, u, section_pairing(g, v, w))
    rhs = section_pairing(g, dorfman(data, u, v), w) + section_pairing(g, v, dorfman(data, u, w))
    assert lhs == rhs


@given(seeds, names)
def test_symmetric_part_is_exact(rng, name):
    data = example(name).data
    (u,) = sections(rng, data, 1)
    expect = Section(data.sig, InvariantForm.scalar(data.sig, section_pairing(data.g, u, u)).d(), gdim=data.g.n)
    assert dorfman(data, u, u) == expect


def test_jacobi_fails_without_compatibility():
    data = example("heterotic-so3").data
    sig = data.sig
    # d(cos(2 pi x1) dx2 ^ th1 ^ th2) has a nonzero top part
    bad = data.replace(H=data.H + InvariantForm.monomial(sig, ["dx2", "th1", "th2"], TrigScalar.cos(2, [1, 0])))
    assert not check_compatibility(bad)[0].is_zero
    rng = random.Random(1)
    failures = 0
    for _ in range(5):
        u, v, w = sections(rng, bad, 3)
        lhs = dorfman(bad, u, dorfman(bad, v, w))
        rhs = dorfman(bad, dorfman(bad, u, v), w) + dorfman(bad, v, dorfman(bad, u, w))
        failures += lhs != rhs
    assert failures


def _random_iso(rng, data):
    g, sig = data.g, data.sig
    K_log = [[Fraction(x) for x in row] for row in g.ad([0, 0, 0] + [rng.randint(-2, 2) for _ in range(3)])]
    Phi = [rform(rng, sig, 1) for _ in range(g.n)]
    return IsoData(sig, g, rform(rng, sig, 2), matrix_exp_nilpotent(K_log), Phi)


@given(seeds)
def test_isomorphism_preserves_structure(rng):
    d1 = example("affine-so3").data
    I = _random_iso(rng, d1)
    assert I.automorphism_residual() == 0
    d2 = transport_data(I, d1)
    assert all_zero(iso_relations(I, d1, d2))
    assert all_zero(check_compatibility(d2) + check_action_compat(d2))
    u, v = sections(rng, d1, 2)
    assert section_pairing(d1.g, I.apply(u), I.apply(v)) == section_pairing(d1.g, u, v)
    assert I.apply(dorfman(d1, u, v)) == dorfman(d2, I.apply(u), I.apply(v))


@given(seeds)
def test_compose_and_inverse(rng):
    d1 = example("affine-so3").data
    I, J = _random_iso(rng, d1), _random_iso(rng, d1)
    (u,) = sections(rng, d1, 1)
    assert J.compose(I).apply(u) == J.apply(I.apply(u))
    assert I.inverse().apply(I.apply(u)) == u


def test_theta_pieces_of_full_residual():
    # the basic piece of dH - <R ^ R> is E0, the theta_p piece is -E1[p], whether or not they vanish
    rng = random.Random(1)
    m = 3
    base = ComplexSignature(m, ())
    g = QuadraticLieAlgebra.so3_semidirect_dual()
    a = [InvariantForm(base, {1 << rng.randrange(m): random_scalar(rng, m, 1, 1, 2)}) if rng.random() < 0.5
         else InvariantForm.zero(base) for _ in range(6)]
    r = [[random_scalar(rng, m, 1, 1, 2) if rng.random() < 0.5 else 0 for _ in range(6)] for _ in range(2)]
    curv = [{3: TrigScalar.const(m, 1)}, {3: TrigScalar.cos(m, [1, 0, 0])}]
    data = build_from_base_data(g, m, curv, r, omega_B=ad_forms(g, a), check=False)
    dec = decompose(data)
    H3 = InvariantForm.monomial(data.sig, ["dx1", "dx2", "dx3"], TrigScalar.sin(m, [0, 1, 0]))
    H2 = InvariantForm.monomial(data.sig, ["dx1", "dx3"], TrigScalar.cos(m, [0, 1, 0])).wedge(
        InvariantForm.generator(data.sig, m))
    zero = InvariantForm.zero(data.sig)
    for d in (data, data.replace(H=data.H + H3 + H2)):
        pieces = _theta_pieces(check_compatibility(d)[0].value, dec.fibers)
        eqs = check_decomp_equations(decompose(d))
        assert not pieces.get(0, zero).is_zero() or not pieces.get(1 << dec.fibers[0], zero).is_zero()
        assert pieces.get(0, zero) == eqs[0].value
        for p, pos in enumerate(dec.fibers):
            assert pieces.get(1 << pos, zero) == -eqs[1].value[p]


@pytest.mark.parametrize("name", ["affine-so3", "heterotic-so3"])
def test_json_round_trip(name):
    data = example(name).data
    again = CourantData.from_json(data.to_json())
    assert again == data
    rng = random.Random(3)
    (u,) = sections(rng, data, 1)
    assert Section.from_json(data.sig, data.g.n, u.to_json()) == u
    I = _random_iso(rng, example("affine-so3").data)
    assert IsoData.from_json(I.sig, I.g, I.to_json()) == I
