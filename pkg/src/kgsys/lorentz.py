"""Lorentz boosts acting on stored space-time solution data.

A boost of rapidity lambda along axis j sends

    y0 = x0 cosh(lambda) + x_j sinh(lambda)
    y_j = x0 sinh(lambda) + x_j cosh(lambda)

and leaves the transverse coordinates alone.  The boosted field at a target
time is assembled by quintic (6-point Lagrange) interpolation in time through
a dense slab of snapshots and trigonometric interpolation along the boost
axis; the time derivative transforms by the chain rule,

    v' = cosh(lambda) v + sinh(lambda) d_j u,   both evaluated at (y0, y).

Everything here is kinematic: no re-simulation happens in the boosted frame.
On the periodic box the checks are valid only for data supported well away
from the boundary, which is enforced before any evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functionals import (FieldPair, NonlinearityParams, PhasePoint, energy,
                          momentum)
from .propagator import StepPolicy, evolve
from .spectral import ScalarField, SpectralGrid

MAX_RAPIDITY = 0.5


class SlabError(ValueError):
    pass


class SupportError(ValueError):
    pass


@dataclass(frozen=True)
class BoostParams:
    lam: float
    axis: int = 0

    def __post_init__(self):
        if abs(self.lam) > MAX_RAPIDITY:
            raise ValueError(f"|rapidity| must not exceed {MAX_RAPIDITY}")


@dataclass
class SpacetimeBlock:
    """Dense uniform-stride snapshots of one solution on [t_a, t_b]."""

    grid: SpectralGrid
    params: NonlinearityParams
    times: np.ndarray
    phases: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.phases):
            raise ValueError("times and phases must align")
        if len(self.times) < 6:
            raise ValueError("quintic interpolation needs at least 6 snapshots")
        dt = np.diff(self.times)
        if np.max(np.abs(dt - dt[0])) > 1e-9 * abs(dt[0]):
            raise ValueError("snapshot times must be uniform")

    @property
    def stride(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def t_a(self) -> float:
        return float(self.times[0])

    @property
    def t_b(self) -> float:
        return float(self.times[-1])

    def interpolation_error_estimate(self) -> float:
        """Stride-halving estimate of the quintic time-interpolation error.

        Interpolates each odd snapshot from the even ones and reports the
        worst sup-norm mismatch relative to the field scale.
        """
        coarse_idx = np.arange(0, len(self.times), 2)
        if len(coarse_idx) < 6:
            raise ValueError("too few snapshots for stride halving")
        scale = max(np.max(np.abs(p.pair.u1.values)) for p in self.phases)
        worst = 0.0
        arrays = [np.stack([self.phases[i].pair.u1.values for i in coarse_idx])]
        t_coarse = self.times[coarse_idx]
        for m in range(1, len(self.times) - 1, 2):
            vals = _quintic_time_interp(arrays[0], t_coarse, self.times[m])
            err = np.max(np.abs(vals - self.phases[m].pair.u1.values))
            worst = max(worst, err / max(scale, 1e-300))
        return worst


def make_block(phase: PhasePoint, params: NonlinearityParams, t_half: float,
               snapshot_dt: float, policy: StepPolicy | None = None) -> SpacetimeBlock:
    """Evolve both time directions from t = 0 and collect a uniform slab."""
    if policy is None:
        policy = StepPolicy(dt_base=5e-3, diag_stride=50)
    stride = max(1, int(round(snapshot_dt / policy.dt_base)))
    pol = StepPolicy(dt_base=policy.dt_base, dt_min=policy.dt_min,
                     amplitude_guard=policy.amplitude_guard,
                     tail_guard=policy.tail_guard,
                     snapshot_stride=stride, diag_stride=policy.diag_stride)
    fwd = evolve(phase, t_half, pol, params)
    g = phase.grid
    back_start = PhasePoint(phase.pair.copy(),
                            ScalarField(g, -phase.v1.values),
                            ScalarField(g, -phase.v2.values))
    bwd = evolve(back_start, t_half, pol, params)
    if fwd.status != "completed" or bwd.status != "completed":
        raise RuntimeError("slab evolution did not complete")

    def flip(p: PhasePoint) -> PhasePoint:
        return PhasePoint(p.pair.copy(), ScalarField(g, -p.v1.values),
                          ScalarField(g, -p.v2.values))

    times = np.concatenate([-bwd.snapshot_times[::-1], fwd.snapshot_times[1:]])
    phases = [flip(p) for p in bwd.snapshots[::-1]] + fwd.snapshots[1:]
    return SpacetimeBlock(grid=g, params=params, times=times, phases=phases)


def _quintic_time_interp(stack: np.ndarray, times: np.ndarray, t: float):
    """6-point Lagrange interpolation of a snapshot stack at scalar time t."""
    n = len(times)
    h = times[1] - times[0]
    m = int(np.floor((t - times[0]) / h)) - 2
    m = min(max(m, 0), n - 6)
    idx = np.arange(m, m + 6)
    ts = times[idx]
    out = np.zeros_like(stack[0])
    for a in range(6):
        w = 1.0
        for b in range(6):
            if b != a:
                w *= (t - ts[b]) / (ts[a] - ts[b])
        out = out + w * stack[idx[a]]
    return out


def check_support(block: SpacetimeBlock, margin_fraction: float = 0.15,
                  tol: float = 1e-5) -> None:
    """Require the solution to vanish near the box boundary for the whole slab.

    Boosts mix space into time, so the periodic wrap would otherwise leak
    spurious content into the transformed field.
    """
    g = block.grid
    L = g.box_half_length
    r = g.radius()
    outer = r > (1.0 - margin_fraction) * L
    worst = 0.0
    scale = 1e-300
    for p in block.phases[:: max(1, len(block.phases) // 16)]:
        for f in p.components():
            a = np.abs(f.values)
            scale = max(scale, float(np.max(a)))
            worst = max(worst, float(np.max(a[outer])))
    if worst > tol * scale:
        raise SupportError(
            f"boundary content {worst / scale:.2e} of field scale exceeds "
            f"{tol:.0e}; boost evaluation would wrap around the box")


def boost(block: SpacetimeBlock, bp: BoostParams,
          target_time: float = 0.0) -> PhasePoint:
    """Boosted phase at the target time of the new frame."""
    g = block.grid
    ax = bp.axis
    if not 0 <= ax < g.dim:
        raise ValueError("boost axis out of range")
    check_support(block)
    ch, sh = np.cosh(bp.lam), np.sinh(bp.lam)
    x = g.axes[ax]
    y0 = target_time * ch + x * sh          # per-slab-index source times
    y = target_time * sh + x * ch           # off-grid source coordinates
    if y0.min() < block.t_a - 1e-12 or y0.max() > block.t_b + 1e-12:
        raise SlabError(
            f"boost needs source times [{y0.min():.3f}, {y0.max():.3f}] but "
            f"the slab covers [{block.t_a:.3f}, {block.t_b:.3f}]")

    # full (two-sided) wavenumbers along the boost axis; Nyquist kept for
    # values, dropped for the derivative symbol
    n = g.points_per_axis
    L = g.box_half_length
    k_full = 2.0 * np.pi * np.fft.fftfreq(n, d=g.dx)
    k_deriv = k_full.copy()
    k_deriv[n // 2] = 0.0
    shape_k = [1] * g.dim
    shape_k[ax] = n

    stacks = {"u1": np.stack([p.pair.u1.values for p in block.phases]),
              "u2": np.stack([p.pair.u2.values for p in block.phases]),
              "v1": np.stack([p.v1.values for p in block.phases]),
              "v2": np.stack([p.v2.values for p in block.phases])}

    out = {name: np.empty(g.shape) for name in ("u1", "u2", "v1", "v2")}
    for i in range(n):
        sl = [slice(None)] * g.dim
        sl[ax] = slice(i, i + 1)
        sl = tuple(sl)
        mode_phase = (np.exp(1j * k_full * (y[i] + L)) / n).reshape(shape_k)
        vals = {}
        deriv = {}
        for name in ("u1", "u2", "v1", "v2"):
            ft = _quintic_time_interp(stacks[name], block.times, y0[i])
            fh = np.fft.fft(ft, axis=ax)
            vals[name] = np.real(np.sum(fh * mode_phase, axis=ax,
                                        keepdims=True))
            if name in ("u1", "u2"):
                dsym = (1j * k_deriv).reshape(shape_k)
                deriv[name] = np.real(np.sum(fh * dsym * mode_phase, axis=ax,
                                             keepdims=True))
        out["u1"][sl] = vals["u1"]
        out["u2"][sl] = vals["u2"]
        out["v1"][sl] = ch * vals["v1"] + sh * deriv["u1"]
        out["v2"][sl] = ch * vals["v2"] + sh * deriv["u2"]

    return PhasePoint(FieldPair(ScalarField(g, out["u1"]),
                                ScalarField(g, out["u2"])),
                      ScalarField(g, out["v1"]), ScalarField(g, out["v2"]))


def _phase_h_norm(p: PhasePoint) -> float:
    return float(np.sqrt(p.h_norm_sq()))


def _phase_diff(a: PhasePoint, b: PhasePoint) -> PhasePoint:
    g = a.grid
    return PhasePoint(
        FieldPair(ScalarField(g, a.pair.u1.values - b.pair.u1.values),
                  ScalarField(g, a.pair.u2.values - b.pair.u2.values)),
        ScalarField(g, a.v1.values - b.v1.values),
        ScalarField(g, a.v2.values - b.v2.values))


@dataclass
class RotationRow:
    lam: float
    E_boosted: float
    P_boosted: float
    E_predicted: float
    P_predicted: float
    rel_err: float


def energy_momentum_rotation_check(block: SpacetimeBlock, axis: int,
                                   lambdas) -> list:
    """Compare (E, P_j) of boosted data with the cosh/sinh rotation law."""
    params = block.params
    base = boost(block, BoostParams(0.0, axis), 0.0)
    E0 = energy(base, params)
    P0 = float(momentum(base)[axis])
    scale = max(abs(E0), abs(P0), 1e-300)
    rows = []
    for lam in lambdas:
        ph = boost(block, BoostParams(float(lam), axis), 0.0)
        Eb = energy(ph, params)
        Pb = float(momentum(ph)[axis])
        ch, sh = np.cosh(lam), np.sinh(lam)
        E_pred = E0 * ch + P0 * sh
        P_pred = E0 * sh + P0 * ch
        rel = max(abs(Eb - E_pred), abs(Pb - P_pred)) / scale
        rows.append(RotationRow(float(lam), Eb, Pb, E_pred, P_pred, rel))
    return rows


def dep_check(block: SpacetimeBlock, axis: int, h: float = 0.05) -> float:
    """Relative defect of the derivative relation dE/dlam at 0 = P_j."""
    params = block.params
    base = boost(block, BoostParams(0.0, axis), 0.0)
    P0 = float(momentum(base)[axis])
    E_plus = energy(boost(block, BoostParams(h, axis), 0.0), params)
    E_minus = energy(boost(block, BoostParams(-h, axis), 0.0), params)
    dE = (E_plus - E_minus) / (2.0 * h)
    scale = max(abs(P0), abs(energy(base, params)), 1e-300)
    return abs(dE - P0) / scale


def block_from_boost(block: SpacetimeBlock, bp: BoostParams, t_half: float,
                     stride: float) -> SpacetimeBlock:
    """Slab of the boosted solution, assembled kinematically frame-by-frame."""
    n_side = int(round(t_half / stride))
    times = stride * np.arange(-n_side, n_side + 1)
    phases = [boost(block, bp, float(t)) for t in times]
    return SpacetimeBlock(grid=block.grid, params=block.params,
                          times=times, phases=phases)


def group_law_defect(block: SpacetimeBlock, lam1: float, lam2: float,
                     axis: int = 0, inner_stride: float = 0.02) -> float:
    """Relative H x H mismatch between boost(lam1+lam2) and the composition."""
    direct = boost(block, BoostParams(lam1 + lam2, axis), 0.0)
    L = block.grid.box_half_length
    t_half = L * np.sinh(abs(lam2)) + 8.0 * inner_stride
    inner = block_from_boost(block, BoostParams(lam1, axis), t_half,
                             inner_stride)
    composed = boost(inner, BoostParams(lam2, axis), 0.0)
    num = _phase_h_norm(_phase_diff(composed, direct))
    return num / max(_phase_h_norm(direct), 1e-300)


def boosted_residual(block: SpacetimeBlock, bp: BoostParams,
                     sample_times=None, fd_dt: float = 0.01) -> float:
    """Sup-norm PDE defect of the boosted field on an interior slab.

    u_tt comes from a 4th-order centered difference of the boosted velocity
    (exact in the chain-rule sense), the Laplacian is spectral, and the
    defect is reported relative to the sup of the field scale.
    """
    g = block.grid
    params = block.params
    if sample_times is None:
        sample_times = np.linspace(-0.1, 0.1, 3)
    worst = 0.0
    for t in sample_times:
        center = boost(block, bp, float(t))
        nbrs = [boost(block, bp, float(t + s * fd_dt))
                for s in (-2, -1, 1, 2)]
        a = center.pair.u1.values
        b = center.pair.u2.values
        scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
        for comp, ucur in (("1", a), ("2", b)):
            stack = [p.v1.values if comp == "1" else p.v2.values
                     for p in nbrs]
            utt = (stack[0] - 8.0 * stack[1] + 8.0 * stack[2] - stack[3]) \
                / (12.0 * fd_dt)
            uh = g.rfft(ucur)
            lap = g.irfft(-g.k_sq * uh)
            if comp == "1":
                f = params.mu1 * a ** 3 + params.beta * b ** 2 * a
            else:
                f = params.mu2 * b ** 3 + params.beta * a ** 2 * b
            res = utt - lap + ucur - f
            worst = max(worst, float(np.max(np.abs(res))) / scale)
    return worst
