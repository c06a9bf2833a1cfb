"""Seeded generators of smooth random fields, pairs and phase points.

Fields are synthesized in Fourier space with Gaussian-decaying spectra, so
every sample is band-limited and periodic by construction.  The sign-targeted
pair generator places samples on either side of the K0 = 0 crossing of the
amplitude-scaling ray through a random pair.
"""

from __future__ import annotations

import numpy as np

from .functionals import (FieldPair, NonlinearityParams, PhasePoint, k0,
                          scaling_normalize)
from .spectral import ScalarField, SpectralGrid


def random_field(grid: SpectralGrid, rng: np.random.Generator,
                 amplitude: float = 1.0, corr_length: float = 1.0) -> ScalarField:
    """Smooth random field with spectrum ~ exp(-|k|^2 corr_length^2 / 2)."""
    shape = grid.k_sq.shape
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    coeffs *= np.exp(-0.5 * grid.k_sq * corr_length ** 2)
    vals = grid.irfft(coeffs)
    peak = np.max(np.abs(vals))
    if peak > 0:
        vals *= amplitude / peak
    return ScalarField(grid, vals)


def random_pair(grid: SpectralGrid, rng: np.random.Generator,
                amplitude: float = 1.0, corr_length: float = 1.0) -> FieldPair:
    return FieldPair(random_field(grid, rng, amplitude, corr_length),
                     random_field(grid, rng, amplitude, corr_length))


def random_phase(grid: SpectralGrid, rng: np.random.Generator,
                 amplitude: float = 1.0, velocity_amplitude: float | None = None,
                 corr_length: float = 1.0) -> PhasePoint:
    if velocity_amplitude is None:
        velocity_amplitude = amplitude
    return PhasePoint(random_pair(grid, rng, amplitude, corr_length),
                      random_field(grid, rng, velocity_amplitude, corr_length),
                      random_field(grid, rng, velocity_amplitude, corr_length))


def gaussian_bump(grid: SpectralGrid, amplitude: float, width: float,
                  center=None) -> ScalarField:
    """Periodized Gaussian bump (smooth, centered unless told otherwise)."""
    r = grid.radius(center)
    return ScalarField(grid, amplitude * np.exp(-r * r / (2.0 * width ** 2)))


def pair_with_k0_sign(grid: SpectralGrid, rng: np.random.Generator,
                      params: NonlinearityParams, sign: int,
                      margin: float = 0.2) -> FieldPair:
    """Random pair scaled to lie on the requested side of K0 = 0.

    The amplitude ray through a random pair crosses K0 = 0 exactly at the
    closed-form normalization; stepping `margin` in log-amplitude below
    (above) the crossing yields K0 > 0 (K0 < 0).
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    base = random_pair(grid, rng)
    lam_star = scaling_normalize(base, params)
    out = base.scaled(float(np.exp(lam_star - sign * margin)))
    # one safety re-check; the closed form makes failure a programming error
    if np.sign(k0(out, params)) != sign:
        raise RuntimeError("sign targeting failed")
    return out
