import numpy as np
import pytest

from kgsys.functionals import FieldPair, PhasePoint
from kgsys.profiles import (BoxOverflowError, BubbleSpec, _translate,
                            extract_profiles, orthogonality_check,
                            synthesize_sequence)
from kgsys.sampling import gaussian_bump
from kgsys.spectral import make_grid, zero_field


def _grid():
    return make_grid(1, 128, 12.0)


def _datum(grid, amp=1.0, width=0.8):
    return PhasePoint(FieldPair(gaussian_bump(grid, amp, width),
                                gaussian_bump(grid, 0.5 * amp, width)),
                      zero_field(grid), zero_field(grid))


def test_translate_requires_grid_alignment():
    g = _grid()
    ph = _datum(g)
    out = _translate(ph, [4.0 * g.dx])
    assert np.array_equal(out.pair.u1.values,
                          np.roll(ph.pair.u1.values, 4))
    with pytest.raises(ValueError):
        _translate(ph, [0.5 * g.dx])


def test_synthesize_rejects_box_overflow():
    g = _grid()
    n = 4
    shifts = (10.0 + np.arange(n, dtype=float)).reshape(-1, 1)
    with pytest.raises(BoxOverflowError):
        synthesize_sequence([BubbleSpec(_datum(g), np.zeros(n), shifts)],
                            0.0, n, g)


def test_synthesize_validates_shift_lengths():
    g = _grid()
    with pytest.raises(ValueError):
        synthesize_sequence([BubbleSpec(_datum(g), np.zeros(3),
                                        np.zeros((3, 1)))], 0.0, 4, g)


def test_single_bubble_recovery():
    g = _grid()
    n = 8
    dx = g.dx
    xs = (np.round((0.5 * np.arange(n)) / dx) * dx).reshape(-1, 1)
    seq = synthesize_sequence([BubbleSpec(_datum(g), np.zeros(n), xs)],
                              0.0, n, g, seed=0)
    dec = extract_profiles(seq, 2, 1e-3)
    assert len(dec.bubbles) == 1
    assert not dec.incomplete
    b = dec.bubbles[0]
    assert np.max(np.abs(b.x_shifts - xs)) < 1e-9
    assert np.all(b.t_shifts == 0.0)
    ref = _datum(g).h_norm_sq()
    assert b.energy_sq() == pytest.approx(ref, rel=0.02)
    assert dec.nu_series[0] > 1e-3
    assert dec.detection_constants[0] > 0.0


def test_extraction_idempotent_and_orthogonal():
    g = _grid()
    n = 8
    dx = g.dx
    xs = (np.round((0.4 * np.arange(n)) / dx) * dx).reshape(-1, 1)
    seq = synthesize_sequence([BubbleSpec(_datum(g), np.zeros(n), xs)],
                              1e-4, n, g, seed=1)
    dec = extract_profiles(seq, 2, 1e-2)
    rep = orthogonality_check(dec, seq)
    assert rep.defects[-1] < 0.03
    assert rep.trend_ok
    assert rep.remainder_lp[3] < 0.1
    again = extract_profiles(dec.remainders, 2, 1e-2)
    assert len(again.bubbles) == 0


def test_extract_profiles_flags_incompleteness():
    g = _grid()
    n = 6
    dx = g.dx
    x1 = (np.round((-3.0 - 0.3 * np.arange(n)) / dx) * dx).reshape(-1, 1)
    x2 = (np.round((3.0 + 0.3 * np.arange(n)) / dx) * dx).reshape(-1, 1)
    seq = synthesize_sequence(
        [BubbleSpec(_datum(g), np.zeros(n), x1),
         BubbleSpec(_datum(g, amp=0.6, width=1.0), np.zeros(n), x2)],
        0.0, n, g, seed=2)
    dec = extract_profiles(seq, 1, 1e-2)
    assert len(dec.bubbles) == 1
    assert dec.incomplete


def test_extract_profiles_rejects_empty_sequence():
    with pytest.raises(ValueError):
        extract_profiles([], 1, 1e-2)
