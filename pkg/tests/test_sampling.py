import numpy as np
import pytest

from kgsys.functionals import NonlinearityParams, k0
from kgsys.sampling import (gaussian_bump, pair_with_k0_sign, random_field,
                            random_pair, random_phase)
from kgsys.spectral import make_grid

PARAMS = NonlinearityParams(beta=1.0)


def test_random_field_amplitude_and_determinism():
    g = make_grid(1, 64, 12.0)
    a = random_field(g, np.random.default_rng(7), amplitude=0.8)
    b = random_field(g, np.random.default_rng(7), amplitude=0.8)
    assert np.max(np.abs(a.values)) == pytest.approx(0.8, rel=1e-12)
    assert np.array_equal(a.values, b.values)
    c = random_field(g, np.random.default_rng(8), amplitude=0.8)
    assert not np.array_equal(a.values, c.values)


def test_random_pair_and_phase_shapes():
    g = make_grid(2, 16, 12.0)
    rng = np.random.default_rng(0)
    pair = random_pair(g, rng)
    assert pair.grid is g
    phase = random_phase(g, rng, 1.0, velocity_amplitude=0.1)
    assert np.max(np.abs(phase.v1.values)) == pytest.approx(0.1, rel=1e-12)


def test_gaussian_bump_periodic_center():
    g = make_grid(1, 64, 12.0)
    f = gaussian_bump(g, 1.0, 1.0, center=[11.5])
    # peak near the wrap-around; value at x = -12 is only 0.5 away
    left_val = f.values[0]
    assert left_val > 0.8


def test_pair_with_k0_sign():
    g = make_grid(1, 64, 12.0)
    rng = np.random.default_rng(1)
    pos = pair_with_k0_sign(g, rng, PARAMS, +1)
    assert k0(pos, PARAMS) > 0
    neg = pair_with_k0_sign(g, rng, PARAMS, -1)
    assert k0(neg, PARAMS) < 0
    with pytest.raises(ValueError):
        pair_with_k0_sign(g, rng, PARAMS, 0)
