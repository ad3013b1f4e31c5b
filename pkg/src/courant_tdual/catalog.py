"""
Built-in examples.

Every example is invariant data on a torus bundle over ``T^2`` together
with a default choice of the dual sections ``r~_i``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from .coeff_ring import TrigScalar
from .courant import CourantData, ad_forms, build_from_base_data
from .exterior import ComplexSignature, InvariantForm
from .qla import QuadraticLieAlgebra


@dataclass
class Example:
    name: str
    data: CourantData
    r_tilde: List[List]
    description: str


def _vol(base: ComplexSignature, coeff=1) -> InvariantForm:
    return InvariantForm.monomial(base, ["dx1", "dx2"], coeff)


def trivial() -> Example:
    """T^3 over T^2 with no twisting and no flux."""
    g = QuadraticLieAlgebra.zero()
    data = build_from_base_data(g, 2, [{}], [[]], name="trivial")
    return Example("trivial", data, [[]], "flat T^3 over T^2, H = 0")


def exact_flux(n: int = 1) -> Example:
    """T^3 over T^2 with H = n dx1^dx2^th1."""
    g = QuadraticLieAlgebra.zero()
    base = ComplexSignature(2, ())
    data = build_from_base_data(g, 2, [{}], [[]], H2=[_vol(base, n)], name=f"exact-flux-{n}")
    return Example(f"exact-flux-{n}", data, [[]], f"T^3 with {n} units of H-flux")


def heisenberg(n: int = 1) -> Example:
    """Heisenberg nilmanifold: circle bundle of degree n over T^2, H = 0."""
    g = QuadraticLieAlgebra.zero()
    data = build_from_base_data(g, 2, [{3: TrigScalar.const(2, n)}], [[]], name=f"heisenberg-{n}")
    return Example(f"heisenberg-{n}", data, [[]], f"degree {n} circle bundle over T^2, H = 0")


def affine_so3() -> Example:
    """so(3) x| so(3)* over the Heisenberg manifold with a null section r."""
    g = QuadraticLieAlgebra.so3_semidirect_dual()
    base = ComplexSignature(2, ())
    r = [[1, 0, 0, 0, 1, 0]]
    rr = g.pair(r[0], r[0])
    # K_1 = H2 - <r, r> F_1 = dx1^dx2
    data = build_from_base_data(g, 2, [{3: TrigScalar.const(2, 1)}], r, H2=[_vol(base, rr + 1)],
                                name="affine-so3")
    return Example("affine-so3", data, [[0, 1, 0, 1, 0, 0]], "so(3) x| so(3)* over a degree 1 circle bundle")


def heterotic_so3() -> Example:
    """Two fibers, a curved base connection and a nonconstant section r_1."""
    m = 2
    g = QuadraticLieAlgebra.so3_semidirect_dual()
    base = ComplexSignature(m, ())
    zero = InvariantForm.zero(base)
    dx1 = InvariantForm.monomial(base, ["dx1"])
    dx2 = InvariantForm.monomial(base, ["dx2"])
    omega = ad_forms(g, [dx1, zero, zero, zero, dx2, zero])
    r = [[1, 0, 0, 0, 0, TrigScalar.cos(m, [1, 0])], [0, 1, 0, 0, 1, 0]]
    curv = [{3: TrigScalar.const(m, 1)}, {}]
    # choose H2 so that the harmonic parts of K_1, K_2 are 2 and 0
    probe = build_from_base_data(g, m, curv, r, omega_B=omega, check=False)
    from .tdual import compute_k_forms
    ks = [kf.form for kf in compute_k_forms(probe, strict=False)]
    H2 = [_vol(base, 2 - ks[0].coeff(3).harmonic_part()), _vol(base, -ks[1].coeff(3).harmonic_part())]
    data = build_from_base_data(g, m, curv, r, H2=H2, omega_B=omega, name="heterotic-so3")
    rt = [[0, 0, TrigScalar.sin(m, [0, 1]), 1, 0, 0], [0, 0, 0, 0, 0, 1]]
    return Example("heterotic-so3", data, rt, "two fibers, curved base connection, nonconstant sections")


_FIXED: Dict[str, Callable[[], Example]] = {
    "trivial": trivial,
    "affine-so3": affine_so3,
    "heterotic-so3": heterotic_so3,
}

NAMES = ("trivial", "exact-flux-<n>", "heisenberg-<n>", "affine-so3", "heterotic-so3")


def get(name: str) -> Example:
    """Look up an example; ``exact-flux-<n>`` and ``heisenberg-<n>`` take an integer n."""
    if name in _FIXED:
        return _FIXED[name]()
    m = re.fullmatch(r"exact-flux-(-?\d+)", name)
    if m:
        return exact_flux(int(m.group(1)))
    m = re.fullmatch(r"heisenberg(?:-(-?\d+))?", name)
    if m:
        return heisenberg(int(m.group(1) or 1))
    raise KeyError(f"unknown example {name!r}; known: {', '.join(NAMES)}")


def standard_examples() -> List[Example]:
    """The examples every property suite runs on."""
    return [trivial(), exact_flux(1), exact_flux(2), exact_flux(3), heisenberg(1), affine_so3(), heterotic_so3()]
