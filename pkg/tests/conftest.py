import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import glflow as gl
from glflow.potential import (anharmonic_potential, exact_quadratic_model,
                              quadratic_potential)


@pytest.fixture(scope="session")
def interval_16():
    return gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 16)


@pytest.fixture(scope="session")
def interval_8():
    return gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 8)


@pytest.fixture(scope="session")
def square_8():
    return gl.build_lattice_domain(gl.box([(0.0, 1.0), (0.0, 1.0)]), 8)


@pytest.fixture(scope="session")
def quad_pot():
    return quadratic_potential(1.0)


@pytest.fixture(scope="session")
def anh_pot():
    return anharmonic_potential()


@pytest.fixture(scope="session")
def quad_model():
    return exact_quadratic_model(1.0, dim=1)


@pytest.fixture(scope="session")
def anharmonic_table_model(anh_pot):
    """Mollified Monte Carlo table backend for the anharmonic potential.

    Built once per session; the grid comfortably covers the gradients that
    occur in the solver tests, and the sampler budget keeps node standard
    errors near 1e-3.
    """
    from glflow.potential import mollify, model_from_table, tabulate_grad_sigma

    table = tabulate_grad_sigma(
        [np.linspace(-4.0, 4.0, 17)], anh_pot,
        dict(torus_side=16, step_size=1e-3, burn_in=4000, n_samples=4000,
             stride=4), seed=12)
    base = model_from_table(table, anh_pot.c_minus, anh_pot.c_plus)
    return mollify(base, 0.1)


def rand_field(domain, rng, support="dn"):
    mask = domain.mask_of(support)
    values = np.where(mask, rng.standard_normal(domain.box_shape), 0.0)
    return gl.HeightField(domain, support, values)
