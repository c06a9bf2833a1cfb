import numpy as np
import pytest

from kgsys.functionals import (DegenerateInputError, FieldPair,
                               NonlinearityParams, PhasePoint,
                               action_along_amplitude_scaling,
                               action_along_dilation,
                               conditional_inequality_check, energy,
                               energy_density, functional_report, g0, g2, k0,
                               k2, localized_virial, momentum,
                               quartic_integral, scaling_normalize,
                               static_action, zero_phase)
from kgsys.sampling import gaussian_bump, random_pair
from kgsys.spectral import ScalarField, derivative, make_grid, zero_field

PARAMS = NonlinearityParams(beta=1.5, mu1=1.0, mu2=0.8)


def _grid():
    return make_grid(1, 64, 12.0)


def _pair(seed=0, amplitude=1.0):
    rng = np.random.default_rng(seed)
    return random_pair(_grid(), rng, amplitude=amplitude, corr_length=1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        NonlinearityParams(beta=-0.1)
    with pytest.raises(ValueError):
        NonlinearityParams(mu1=0.0)
    with pytest.raises(ValueError):
        NonlinearityParams(mu2=-1.0)


def test_quartic_integral_matches_manual():
    g = _grid()
    a = gaussian_bump(g, 0.7, 1.0)
    b = gaussian_bump(g, 0.4, 1.5)
    pair = FieldPair(a, b)
    manual = np.sum(PARAMS.mu1 * a.values ** 4 + PARAMS.mu2 * b.values ** 4
                    + 2 * PARAMS.beta * a.values ** 2 * b.values ** 2) * g.dx
    assert quartic_integral(pair, PARAMS) == pytest.approx(manual, rel=1e-14)


def test_identities_g0_g2():
    pair = _pair(1)
    J = static_action(pair, PARAMS)
    assert g0(pair, PARAMS) == pytest.approx(J - k0(pair, PARAMS) / 4, rel=1e-12)
    assert g0(pair, PARAMS) == pytest.approx(pair.h1_norm_sq() / 4, rel=1e-12)
    assert g2(pair, PARAMS) == pytest.approx(J - k2(pair, PARAMS) / 3, rel=1e-12)


def test_scaling_families_reproduce_functionals():
    pair = _pair(2)
    h = 1e-6
    fd0 = (action_along_amplitude_scaling(pair, PARAMS, h)
           - action_along_amplitude_scaling(pair, PARAMS, -h)) / (2 * h)
    assert fd0 == pytest.approx(k0(pair, PARAMS), rel=1e-8)
    fd2 = (action_along_dilation(pair, PARAMS, h)
           - action_along_dilation(pair, PARAMS, -h)) / (2 * h)
    assert fd2 == pytest.approx(k2(pair, PARAMS), rel=1e-8)


def test_scaling_normalize_zeroes_k0():
    pair = _pair(3)
    lam = scaling_normalize(pair, PARAMS)
    scaled = pair.scaled(float(np.exp(lam)))
    assert abs(k0(scaled, PARAMS)) < 1e-10 * scaled.h1_norm_sq()


def test_scaling_normalize_degenerate():
    g = _grid()
    pair = FieldPair(zero_field(g), zero_field(g))
    with pytest.raises(DegenerateInputError):
        scaling_normalize(pair, PARAMS)


def test_energy_splits_into_action_and_kinetic():
    g = _grid()
    pair = _pair(4)
    v = gaussian_bump(g, 0.5, 2.0)
    phase = PhasePoint(pair, v, zero_field(g))
    kin = np.sum(v.values ** 2) * g.dx
    assert energy(phase, PARAMS) == pytest.approx(
        static_action(pair, PARAMS) + 0.5 * kin, rel=1e-12)


def test_momentum_of_standing_data_vanishes():
    g = _grid()
    phase = PhasePoint(_pair(5), zero_field(g), zero_field(g))
    assert np.max(np.abs(momentum(phase))) < 1e-14


def test_momentum_of_traveling_profile():
    g = _grid()
    u = gaussian_bump(g, 1.0, 1.5)
    du = derivative(u, 0)
    # v = -du/dx mimics rightward transport; P = <v, du> = -||du||^2
    phase = PhasePoint(FieldPair(u, zero_field(g)),
                       ScalarField(g, -du.values), zero_field(g))
    expected = -np.sum(du.values ** 2) * g.dx
    assert momentum(phase)[0] == pytest.approx(expected, rel=1e-12)


def test_energy_density_integrates_to_energy():
    g = _grid()
    phase = PhasePoint(_pair(6), gaussian_bump(g, 0.3, 1.0), zero_field(g))
    total = np.sum(energy_density(phase, PARAMS).values) * g.dx
    assert total == pytest.approx(energy(phase, PARAMS), rel=1e-12)


def test_localized_virial_validates_radius():
    g = _grid()
    phase = zero_phase(g)
    with pytest.raises(ValueError):
        localized_virial(phase, PARAMS, R=7.0)   # 2R exceeds the half-box
    out = localized_virial(PhasePoint(_pair(7), zero_field(g), zero_field(g)),
                           PARAMS, R=4.0)
    assert out.shape == (1,)


def test_functional_report_consistency():
    g = _grid()
    phase = PhasePoint(_pair(8), gaussian_bump(g, 0.2, 1.0), zero_field(g))
    rep = functional_report(phase, PARAMS)
    assert rep.G0 == pytest.approx(rep.J - rep.K0 / 4, rel=1e-12)
    assert rep.E >= rep.J
    d = rep.to_json_dict()
    assert set(d) == {"E", "J", "K0", "K2", "G0", "G2", "P", "H1sq"}


def test_conditional_inequality_branches():
    pair = _pair(9)
    lam = scaling_normalize(pair, PARAMS)
    h0 = 1e9                           # generous pass level for branch tests
    neg = conditional_inequality_check(pair.scaled(float(np.exp(lam + 0.5))),
                                       PARAMS, h0)
    assert neg.branch == "K0_negative" and neg.precondition_met
    pos = conditional_inequality_check(pair.scaled(float(np.exp(lam - 0.5))),
                                       PARAMS, h0)
    assert pos.branch == "K0_nonnegative" and pos.c0 > 0
    degen = conditional_inequality_check(pair, PARAMS, h0=-1.0)
    assert degen.branch == "degenerate" and not degen.precondition_met
