"""Shared builders for the test modules: random forms, spinors and frame sections."""

from __future__ import annotations

import functools
import random
from fractions import Fraction
from typing import List

from courant_tdual import catalog
from courant_tdual.coeff_ring import TrigScalar, random_scalar
from courant_tdual.courant import Section
from courant_tdual.exterior import ComplexSignature, InvariantForm, frame_vector, popcount
from courant_tdual.spinor import InvariantSpinor, SpinorSpace
from courant_tdual.tdual import DualityMaps, dualize


def rform(rng: random.Random, sig: ComplexSignature, degree=None, density: float = 0.4) -> InvariantForm:
    """Random invariant form, homogeneous when ``degree`` is given."""
    terms = {}
    for m in range(1 << sig.n):
        if degree is not None and popcount(m) != degree:
            continue
        if rng.random() < density:
            terms[m] = random_scalar(rng, sig.base_dim, 1, 1, 2)
    return InvariantForm(sig, terms)


def rspinor(rng: random.Random, space: SpinorSpace, k: int = 4, dense: bool = False) -> InvariantSpinor:
    dim = space.sig.base_dim
    terms = {}
    for _ in range(k):
        key = (rng.randrange(1 << space.sig.n), rng.randrange(space.fock_size))
        c = random_scalar(rng, dim, 1, 1, 2)
        if dense:
            c = c + TrigScalar.const(dim, rng.randint(-3, 3))
        terms[key] = c
    return InvariantSpinor(space, terms)


def homogeneous_spinor(rng: random.Random, space: SpinorSpace, degree: int, parity: int) -> InvariantSpinor:
    """Random spinor of fixed form degree and Fock parity."""
    dim = space.sig.base_dim
    masks = [m for m in range(1 << space.sig.n) if popcount(m) == degree]
    states = [s for s in range(space.fock_size) if popcount(s) % 2 == parity]
    terms = {}
    for _ in range(3):
        terms[(rng.choice(masks), rng.choice(states))] = random_scalar(rng, dim, 1, 1, 2)
    return InvariantSpinor(space, terms)


def frame_sections(sig: ComplexSignature, gdim: int) -> List[Section]:
    """Every generator, every Lie algebra basis vector and every frame vector field."""
    out = [Section(sig, InvariantForm.generator(sig, p), gdim=gdim) for p in range(sig.n)]
    for j in range(gdim):
        r = [Fraction(int(i == j)) for i in range(gdim)]
        out.append(Section(sig, r=r))
    out += [Section(sig, X=frame_vector(sig, p), gdim=gdim) for p in range(sig.n)]
    return out


@functools.lru_cache(maxsize=None)
def example(name: str):
    return catalog.get(name)


@functools.lru_cache(maxsize=None)
def package(name: str):
    ex = example(name)
    return dualize(ex.data, ex.r_tilde or None)


@functools.lru_cache(maxsize=None)
def maps(name: str) -> DualityMaps:
    return DualityMaps(package(name))


EXAMPLES = ("trivial", "exact-flux-1", "exact-flux-2", "exact-flux-3", "heisenberg-1", "affine-so3",
            "heterotic-so3")
