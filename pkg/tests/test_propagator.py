import numpy as np
import pytest

from kgsys.functionals import (FieldPair, NonlinearityParams, PhasePoint,
                               energy)
from kgsys.propagator import (STATUS_BLOWUP, STATUS_COMPLETED,
                              SnapshotDensityError, StepPolicy, data_radius,
                              duhamel_residual, evolve, free_evolve,
                              nonlinear_kick, pair_l6_norm,
                              strichartz_accumulator, wrap_time)
from kgsys.sampling import gaussian_bump, random_phase
from kgsys.spectral import ScalarField, field_from_function, make_grid, \
    zero_field

PARAMS = NonlinearityParams(beta=1.0)


def _grid():
    return make_grid(1, 128, 12.0)


def _small_phase(g, amp=0.2):
    return PhasePoint(FieldPair(gaussian_bump(g, amp, 1.5),
                                gaussian_bump(g, 0.5 * amp, 2.0)),
                      gaussian_bump(g, 0.1 * amp, 1.5), zero_field(g))


def test_free_evolve_single_mode_exact():
    g = _grid()
    k = 5.0 * np.pi / 12.0
    om = np.sqrt(1.0 + k * k)
    u0 = field_from_function(g, lambda x: np.cos(k * x))
    phase = PhasePoint(FieldPair(u0, zero_field(g)), zero_field(g),
                       zero_field(g))
    t = 0.7
    out = free_evolve(phase, t)
    expected = np.cos(om * t) * np.cos(k * g.axes[0])
    assert np.max(np.abs(out.pair.u1.values - expected)) < 1e-12
    expected_v = -om * np.sin(om * t) * np.cos(k * g.axes[0])
    assert np.max(np.abs(out.v1.values - expected_v)) < 1e-12


def test_free_evolve_group_property():
    g = _grid()
    rng = np.random.default_rng(0)
    phase = random_phase(g, rng, 0.5)
    back = free_evolve(free_evolve(phase, 1.3), -1.3)
    for a, b in zip(back.components(), phase.components()):
        assert np.max(np.abs(a.values - b.values)) < 1e-11


def test_free_evolve_conserves_h_norm():
    g = _grid()
    rng = np.random.default_rng(1)
    phase = random_phase(g, rng, 0.5)
    out = free_evolve(phase, 2.0)
    assert out.h_norm_sq() == pytest.approx(phase.h_norm_sq(), rel=1e-12)


def test_strang_second_order():
    g = _grid()
    phase = _small_phase(g, amp=0.4)
    ref = evolve(phase, 1.0, StepPolicy(dt_base=2.5e-4, diag_stride=10 ** 6,
                                        snapshot_stride=10 ** 6),
                 PARAMS).final_state

    def err(dt):
        out = evolve(phase, 1.0, StepPolicy(dt_base=dt, diag_stride=10 ** 6,
                                            snapshot_stride=10 ** 6),
                     PARAMS).final_state
        return max(np.max(np.abs(a.values - b.values)) for a, b in
                   zip(out.components(), ref.components()))

    e1, e2 = err(2e-2), err(1e-2)
    assert 3.0 < e1 / e2 < 5.0         # dt^2 convergence


def test_energy_and_momentum_conservation_short_run():
    g = _grid()
    phase = PhasePoint(FieldPair(gaussian_bump(g, 0.5, 1.5),
                                 gaussian_bump(g, 0.3, 2.0)),
                       gaussian_bump(g, 0.2, 1.5), zero_field(g))
    traj = evolve(phase, 2.0, StepPolicy(dt_base=2e-3, diag_stride=20), PARAMS)
    assert traj.status == STATUS_COMPLETED
    assert traj.energy_drift < 1e-6
    P = np.array([r.P for r in traj.reports])
    assert np.max(np.abs(P - P[0])) < 1e-12


def test_time_reversal():
    g = _grid()
    phase = _small_phase(g, amp=0.5)
    pol = StepPolicy(dt_base=5e-3, diag_stride=10 ** 6,
                     snapshot_stride=10 ** 6)
    end = evolve(phase, 2.0, pol, PARAMS).final_state
    back = PhasePoint(end.pair, ScalarField(g, -end.v1.values),
                      ScalarField(g, -end.v2.values))
    again = evolve(back, 2.0, pol, PARAMS).final_state
    assert np.max(np.abs(again.pair.u1.values - phase.pair.u1.values)) < 1e-9


def test_blowup_detection():
    g = _grid()
    big = PhasePoint(FieldPair(gaussian_bump(g, 6.0, 1.5),
                               gaussian_bump(g, 6.0, 1.5)),
                     zero_field(g), zero_field(g))
    traj = evolve(big, 5.0, StepPolicy(dt_base=1e-2, diag_stride=5), PARAMS)
    assert traj.status == STATUS_BLOWUP
    assert np.isfinite(traj.escape_time) and traj.escape_time < 5.0


def test_duhamel_residual():
    g = _grid()
    phase = _small_phase(g, amp=0.4)
    traj = evolve(phase, 1.0, StepPolicy(dt_base=2.5e-3, diag_stride=100,
                                         snapshot_stride=10), PARAMS)
    res = duhamel_residual(traj, [0.5, 1.0])
    assert res < 1e-4
    with pytest.raises(SnapshotDensityError):
        duhamel_residual(traj, [0.5 + 1e-3])   # off the snapshot grid


def test_duhamel_needs_enough_snapshots():
    g = _grid()
    phase = _small_phase(g)
    traj = evolve(phase, 0.5, StepPolicy(dt_base=1e-2, diag_stride=100,
                                         snapshot_stride=10 ** 6), PARAMS)
    with pytest.raises(SnapshotDensityError):
        duhamel_residual(traj, [0.5])


def test_strichartz_accumulator_monotone():
    g = _grid()
    phase = _small_phase(g)
    traj = evolve(phase, 1.0, StepPolicy(dt_base=1e-2, diag_stride=5), PARAMS)
    acc = strichartz_accumulator(traj)
    assert np.all(np.diff(acc) >= -1e-15)
    assert acc[-1] > 0.0


def test_kick_preserves_positions():
    g = _grid()
    phase = _small_phase(g)
    out = nonlinear_kick(phase, 0.1, PARAMS)
    assert np.array_equal(np.round(out.pair.u1.values, 12),
                          np.round(phase.pair.u1.values, 12))
    assert np.max(np.abs(out.v1.values - phase.v1.values)) > 0.0


def test_wrap_time_and_data_radius():
    g = _grid()
    phase = _small_phase(g)
    r = data_radius(phase)
    assert 0.0 < r < g.box_half_length
    assert wrap_time(phase) == pytest.approx(g.box_half_length - r)


def test_evolve_validates_horizon():
    g = _grid()
    with pytest.raises(ValueError):
        evolve(_small_phase(g), -1.0, StepPolicy(), PARAMS)


def test_policy_validation():
    with pytest.raises(ValueError):
        StepPolicy(dt_base=1e-4, dt_min=1e-2)


def test_pair_l6_norm_positive():
    g = _grid()
    assert pair_l6_norm(_small_phase(g)) > 0.0
