"""Variational and conserved quantities of the coupled cubic system.

Static functionals of a field pair (phi1, phi2):

    J  = 1/2 ||pair||_{H1xH1}^2 - 1/4 Phi
    K0 = ||pair||_{H1xH1}^2 - Phi            (amplitude-scaling derivative of J)
    K2 = sum ||grad phi_j||_2^2 - 3/4 Phi    (dilation derivative of J, d = 3)
    G0 = J - K0/4 = 1/4 ||pair||_{H1xH1}^2
    G2 = J - K2/3

with Phi = int(mu1 phi1^4 + mu2 phi2^4 + 2 beta phi1^2 phi2^2).  Dynamic
quantities (energy, momentum, energy density, localized virial) act on the
phase quadruple ((u1, v1), (u2, v2)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .spectral import (ScalarField, SpectralGrid, gradient_fields, l2_inner,
                       lebesgue_norm, lp_cutoff, derivative,
                       sobolev_h1_norm_sq, zero_field)


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True)
class NonlinearityParams:
    """Coupling beta >= 0 and self-focusing weights mu1, mu2 > 0."""

    beta: float = 1.0
    mu1: float = 1.0
    mu2: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.mu1 <= 0 or self.mu2 <= 0:
            raise ValueError("mu1, mu2 must be > 0")


@dataclass
class FieldPair:
    u1: ScalarField
    u2: ScalarField

    def __post_init__(self):
        if self.u1.grid is not self.u2.grid and self.u1.grid != self.u2.grid:
            raise ValueError("pair components must share one grid")

    @property
    def grid(self) -> SpectralGrid:
        return self.u1.grid

    def copy(self) -> "FieldPair":
        return FieldPair(self.u1.copy(), self.u2.copy())

    def scaled(self, c: float) -> "FieldPair":
        return FieldPair(ScalarField(self.grid, c * self.u1.values),
                         ScalarField(self.grid, c * self.u2.values))

    def h1_norm_sq(self) -> float:
        return sobolev_h1_norm_sq(self.u1) + sobolev_h1_norm_sq(self.u2)


@dataclass
class PhasePoint:
    """State ((u1, du1/dt), (u2, du2/dt)) in H x H."""

    pair: FieldPair
    v1: ScalarField
    v2: ScalarField

    @property
    def grid(self) -> SpectralGrid:
        return self.pair.grid

    def copy(self) -> "PhasePoint":
        return PhasePoint(self.pair.copy(), self.v1.copy(), self.v2.copy())

    def components(self) -> list:
        return [self.pair.u1, self.pair.u2, self.v1, self.v2]

    def h_norm_sq(self) -> float:
        """Squared H x H norm: H1 of positions plus L2 of velocities."""
        kin = lebesgue_norm(self.v1, 2) ** 2 + lebesgue_norm(self.v2, 2) ** 2
        return self.pair.h1_norm_sq() + kin

    def scaled(self, c: float) -> "PhasePoint":
        g = self.grid
        return PhasePoint(self.pair.scaled(c),
                          ScalarField(g, c * self.v1.values),
                          ScalarField(g, c * self.v2.values))


def zero_phase(grid: SpectralGrid) -> PhasePoint:
    return PhasePoint(FieldPair(zero_field(grid), zero_field(grid)),
                      zero_field(grid), zero_field(grid))


def quartic_integral(pair: FieldPair, params: NonlinearityParams) -> float:
    a, b = pair.u1.values, pair.u2.values
    dens = params.mu1 * a ** 4 + params.mu2 * b ** 4 \
        + 2.0 * params.beta * a ** 2 * b ** 2
    return float(np.sum(dens) * pair.grid.cell_volume)


def gradient_norm_sq(pair: FieldPair) -> float:
    total = 0.0
    for f in (pair.u1, pair.u2):
        total += sum(lebesgue_norm(df, 2) ** 2 for df in gradient_fields(f))
    return total


def static_action(pair: FieldPair, params: NonlinearityParams) -> float:
    """The action J of the static pair."""
    return 0.5 * pair.h1_norm_sq() - 0.25 * quartic_integral(pair, params)


def k0(pair: FieldPair, params: NonlinearityParams) -> float:
    return pair.h1_norm_sq() - quartic_integral(pair, params)


def k2(pair: FieldPair, params: NonlinearityParams) -> float:
    return gradient_norm_sq(pair) - 0.75 * quartic_integral(pair, params)


def g0(pair: FieldPair, params: NonlinearityParams) -> float:
    return static_action(pair, params) - 0.25 * k0(pair, params)


def g2(pair: FieldPair, params: NonlinearityParams) -> float:
    return static_action(pair, params) - k2(pair, params) / 3.0


def action_along_amplitude_scaling(pair: FieldPair, params: NonlinearityParams,
                                   lam: float) -> float:
    """J[e^lam * pair], exact in lam given the two base quadratures."""
    a = pair.h1_norm_sq()
    b = quartic_integral(pair, params)
    return 0.5 * np.exp(2.0 * lam) * a - 0.25 * np.exp(4.0 * lam) * b


def action_along_dilation(pair: FieldPair, params: NonlinearityParams,
                          lam: float) -> float:
    """J[e^{3 lam/2} pair(e^lam .)] via the continuum scaling identities."""
    grad_sq = gradient_norm_sq(pair)
    mass_sq = lebesgue_norm(pair.u1, 2) ** 2 + lebesgue_norm(pair.u2, 2) ** 2
    b = quartic_integral(pair, params)
    return 0.5 * (np.exp(2.0 * lam) * grad_sq + mass_sq) \
        - 0.25 * np.exp(3.0 * lam) * b


def energy(phase: PhasePoint, params: NonlinearityParams) -> float:
    kin = lebesgue_norm(phase.v1, 2) ** 2 + lebesgue_norm(phase.v2, 2) ** 2
    return static_action(phase.pair, params) + 0.5 * kin


def momentum(phase: PhasePoint) -> np.ndarray:
    """P_j = <v1, d_j u1> + <v2, d_j u2> with spectral derivatives."""
    dim = phase.grid.dim
    p = np.zeros(dim)
    for ax in range(dim):
        p[ax] = l2_inner(phase.v1, derivative(phase.pair.u1, ax)) \
            + l2_inner(phase.v2, derivative(phase.pair.u2, ax))
    return p


def energy_density(phase: PhasePoint, params: NonlinearityParams) -> ScalarField:
    """Local density e(t, x); integrates to the conserved energy."""
    g = phase.grid
    a, b = phase.pair.u1, phase.pair.u2
    dens = 0.5 * (a.values ** 2 + b.values ** 2
                  + phase.v1.values ** 2 + phase.v2.values ** 2)
    for f in (a, b):
        for df in gradient_fields(f):
            dens = dens + 0.5 * df.values ** 2
    dens = dens - 0.25 * (params.mu1 * a.values ** 4 + params.mu2 * b.values ** 4
                          + 2.0 * params.beta * a.values ** 2 * b.values ** 2)
    return ScalarField(g, dens)


def cutoff_field(grid: SpectralGrid, R: float, center=None) -> np.ndarray:
    """Smooth radial cutoff: 1 inside radius R, 0 beyond 2R."""
    return lp_cutoff(grid.radius(center) / R)


def localized_virial(phase: PhasePoint, params: NonlinearityParams, R: float,
                     center=None) -> np.ndarray:
    """Weighted first moment X_R of the energy density (one entry per axis)."""
    g = phase.grid
    if 2.0 * R > g.box_half_length:
        raise ValueError("2R must not exceed the box half-length")
    if center is None:
        center = np.zeros(g.dim)
    center = np.atleast_1d(np.asarray(center, dtype=float))
    chi = cutoff_field(g, R, center)
    e = energy_density(phase, params).values
    out = np.zeros(g.dim)
    for ax, coords in enumerate(g.meshgrid()):
        out[ax] = np.sum(chi * coords * e) * g.cell_volume
    return out


def scaling_normalize(pair: FieldPair, params: NonlinearityParams) -> float:
    """Closed-form root lam* of K0 along the amplitude-scaling ray.

    K0[e^lam pair] = e^{2 lam} a - e^{4 lam} b vanishes at
    lam* = log(a/b) / 2; K0 > 0 strictly below lam*.
    """
    a = pair.h1_norm_sq()
    b = quartic_integral(pair, params)
    if b <= 0.0 or a <= 0.0:
        raise DegenerateInputError(
            "quartic integral must be positive (nonzero pair required)")
    return 0.5 * np.log(a / b)


@dataclass
class FunctionalReport:
    E: float
    J: float
    K0: float
    K2: float
    G0: float
    G2: float
    P: np.ndarray
    h1_norm_sq: float

    def to_json_dict(self) -> dict:
        return {"E": self.E, "J": self.J, "K0": self.K0, "K2": self.K2,
                "G0": self.G0, "G2": self.G2,
                "P": [float(p) for p in np.atleast_1d(self.P)],
                "H1sq": self.h1_norm_sq}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def functional_report(phase: PhasePoint, params: NonlinearityParams) -> FunctionalReport:
    pair = phase.pair
    J = static_action(pair, params)
    K0v = k0(pair, params)
    K2v = k2(pair, params)
    return FunctionalReport(E=energy(phase, params), J=J, K0=K0v, K2=K2v,
                            G0=J - K0v / 4.0, G2=J - K2v / 3.0,
                            P=momentum(phase), h1_norm_sq=pair.h1_norm_sq())


@dataclass
class ConditionalInequalityReport:
    branch: str                 # "K0_negative" | "K0_nonnegative" | "degenerate"
    holds: bool
    c0: float                   # largest admissible constant (nonneg branch)
    slack: float                # inequality slack on the negative branch
    K0: float
    K2: float
    action_gap: float           # h0 - J
    precondition_met: bool


def conditional_inequality_check(pair: FieldPair, params: NonlinearityParams,
                                 h0: float,
                                 functional: str = "K0") -> ConditionalInequalityReport:
    """Evaluate the conditional trapping inequalities below the pass level.

    For pairs with J < h0: a negative K-value must satisfy -K >= 2 (h0 - J);
    a nonnegative one must dominate c * min(h0 - J, ||pair||^2) for some
    c > 0, whose largest admissible value is reported.
    """
    J = static_action(pair, params)
    K0v = k0(pair, params)
    K2v = k2(pair, params)
    K = K0v if functional == "K0" else K2v
    gap = h0 - J
    norm_sq = pair.h1_norm_sq()
    if gap <= 0.0:
        return ConditionalInequalityReport("degenerate", False, np.nan, np.nan,
                                           K0v, K2v, gap, False)
    if norm_sq < 1e-28:
        return ConditionalInequalityReport("degenerate", False, np.nan, np.nan,
                                           K0v, K2v, gap, False)
    if K < 0.0:
        slack = -K - 2.0 * gap
        return ConditionalInequalityReport("K0_negative", slack >= -1e-10 * max(1.0, abs(K)),
                                           np.nan, slack, K0v, K2v, gap, True)
    floor = min(gap, norm_sq)
    c = K / floor
    return ConditionalInequalityReport("K0_nonnegative", c > 0.0, c, np.nan,
                                       K0v, K2v, gap, True)
