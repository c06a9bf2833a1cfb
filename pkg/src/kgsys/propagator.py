"""Free Klein-Gordon flow and the Strang split-step integrator.

The linear group is applied exactly in Fourier space through the symbols
cos(t <k>) and sin(t <k>)/<k>.  The nonlinear substep freezes the positions,
so it is the exact flow of the kick subsystem; composing
half-kick / free / half-kick gives a time-symmetric second-order scheme.
The cubic terms are evaluated pointwise and truncated by the 2/3 rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functionals import (FunctionalReport, NonlinearityParams, PhasePoint,
                          FieldPair)
from .spectral import ScalarField, SpectralGrid, lebesgue_norm, _spectral_weight

STATUS_RUNNING = "running"
STATUS_COMPLETED = "completed"
STATUS_BLOWUP = "blowup_detected"
STATUS_RESOLUTION = "resolution_exhausted"


class SnapshotDensityError(RuntimeError):
    pass


@dataclass
class StepPolicy:
    dt_base: float = 1e-2
    dt_min: float = 1e-5
    amplitude_guard: float = 25.0   # shrink dt once ||U||_inf passes this
    tail_guard: float = 0.35        # spectral-tail fraction ceiling
    snapshot_stride: int = 10
    diag_stride: int = 1

    def __post_init__(self):
        if self.dt_min > self.dt_base:
            raise ValueError("dt_min must not exceed dt_base")


@dataclass
class Trajectory:
    grid: SpectralGrid
    params: NonlinearityParams
    times: np.ndarray = None                 # diagnostic times
    reports: list = field(default_factory=list)
    linf: np.ndarray = None
    l6_pair: np.ndarray = None               # ||U(t)||_{L6 x L6}
    strichartz_running: np.ndarray = None
    snapshot_times: np.ndarray = None
    snapshots: list = field(default_factory=list)
    status: str = STATUS_RUNNING
    energy_drift: float = np.nan
    escape_time: float = np.nan

    @property
    def final_state(self) -> PhasePoint:
        return self.snapshots[-1]

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports])


class _SpectralState:
    """Fourier-side quadruple; physical positions cached per step."""

    def __init__(self, phase: PhasePoint):
        g = phase.grid
        self.grid = g
        self.u1 = g.rfft(phase.pair.u1.values)
        self.u2 = g.rfft(phase.pair.u2.values)
        self.v1 = g.rfft(phase.v1.values)
        self.v2 = g.rfft(phase.v2.values)
        self._w = _spectral_weight(g)
        self._bsq = 1.0 + g.k_sq
        # top third of the dealiased band: |k| >= (2/3) * k_dealias
        self._tail_shell = np.sqrt(g.k_sq) >= (4.0 / 9.0) * g.k_nyquist

    def to_phase(self) -> PhasePoint:
        g = self.grid
        return PhasePoint(
            FieldPair(ScalarField(g, g.irfft(self.u1)),
                      ScalarField(g, g.irfft(self.u2))),
            ScalarField(g, g.irfft(self.v1)),
            ScalarField(g, g.irfft(self.v2)))

    def free(self, t: float) -> None:
        g = self.grid
        om = g.bessel_symbol
        c = np.cos(t * om)
        s = np.sin(t * om) / om
        for attr_u, attr_v in (("u1", "v1"), ("u2", "v2")):
            u = getattr(self, attr_u)
            v = getattr(self, attr_v)
            setattr(self, attr_u, c * u + s * v)
            setattr(self, attr_v, -om * om * s * u + c * v)

    def kick(self, dt: float, params: NonlinearityParams):
        """v += dt * N(u) with u frozen; returns max |u| for the guard."""
        g = self.grid
        a = g.irfft(self.u1)
        b = g.irfft(self.u2)
        n1 = params.mu1 * a ** 3 + params.beta * b ** 2 * a
        n2 = params.mu2 * b ** 3 + params.beta * a ** 2 * b
        self.v1 = self.v1 + dt * (g.rfft(n1) * g.dealias_mask)
        self.v2 = self.v2 + dt * (g.rfft(n2) * g.dealias_mask)
        return max(np.max(np.abs(a)), np.max(np.abs(b)))

    def h_norm_sq(self) -> float:
        return self.guard_metrics()[0]

    def guard_metrics(self):
        """(H x H norm squared, spectral tail fraction) in one density pass."""
        dens = self._w * (self._bsq * (np.abs(self.u1) ** 2
                                       + np.abs(self.u2) ** 2)
                          + np.abs(self.v1) ** 2 + np.abs(self.v2) ** 2)
        total = float(np.sum(dens))
        if total == 0.0:
            return 0.0, 0.0
        return total, float(np.sum(dens[self._tail_shell])) / total

    def diagnostics(self, params: NonlinearityParams):
        """FunctionalReport plus (Linf, L6) computed without leaving Fourier.

        Only the quartic term needs the physical fields (two inverse
        transforms); every quadratic quantity is a weighted mode sum.
        """
        g = self.grid
        w = self._w
        pos_sq = np.abs(self.u1) ** 2 + np.abs(self.u2) ** 2
        h1sq = float(np.sum(w * (1.0 + g.k_sq) * pos_sq))
        grad_sq = float(np.sum(w * g.k_sq * pos_sq))
        kin = float(np.sum(w * (np.abs(self.v1) ** 2 + np.abs(self.v2) ** 2)))
        P = np.zeros(g.dim)
        for ax in range(g.dim):
            P[ax] = float(np.sum(w * np.real(
                np.conj(self.v1) * (1j * g.k_axes[ax]) * self.u1
                + np.conj(self.v2) * (1j * g.k_axes[ax]) * self.u2)))
        a = g.irfft(self.u1)
        b = g.irfft(self.u2)
        phi = float(np.sum(params.mu1 * a ** 4 + params.mu2 * b ** 4
                           + 2.0 * params.beta * a ** 2 * b ** 2)
                    * g.cell_volume)
        J = 0.5 * h1sq - 0.25 * phi
        K0 = h1sq - phi
        K2 = grad_sq - 0.75 * phi
        rep = FunctionalReport(E=J + 0.5 * kin, J=J, K0=K0, K2=K2,
                               G0=J - K0 / 4.0, G2=J - K2 / 3.0, P=P,
                               h1_norm_sq=h1sq)
        linf = max(np.max(np.abs(a)), np.max(np.abs(b)))
        l6 = float(np.sqrt((np.sum(a ** 6) * g.cell_volume) ** (1.0 / 3.0)
                           + (np.sum(b ** 6) * g.cell_volume) ** (1.0 / 3.0)))
        return rep, linf, l6

    def tail_fraction(self) -> float:
        """Fraction of the H x H energy in the top-third spectral shell."""
        return self.guard_metrics()[1]


def free_evolve(phase: PhasePoint, t: float) -> PhasePoint:
    """Exact linear group S(t) applied to the quadruple."""
    st = _SpectralState(phase)
    st.free(t)
    return st.to_phase()


def nonlinear_kick(phase: PhasePoint, dt: float,
                   params: NonlinearityParams) -> PhasePoint:
    st = _SpectralState(phase)
    st.kick(dt, params)
    out = st.to_phase()
    for f in out.components():
        f.check_finite()
    return out


def pair_l6_norm(phase: PhasePoint) -> float:
    return float(np.sqrt(lebesgue_norm(phase.pair.u1, 6) ** 2
                         + lebesgue_norm(phase.pair.u2, 6) ** 2))


def evolve(phase: PhasePoint, T: float, policy: StepPolicy,
           params: NonlinearityParams) -> Trajectory:
    """Advance to time T (or to blow-up / resolution loss) and log diagnostics."""
    if T <= 0:
        raise ValueError("T must be positive")
    g = phase.grid
    traj = Trajectory(grid=g, params=params)
    st = _SpectralState(phase)
    h_init = st.h_norm_sq()
    tail_init = st.tail_fraction()
    # data start with some truncation-level tail; flag only clear growth
    tail_limit = min(max(10.0 * tail_init, policy.tail_guard), 0.95)

    times, linf_list, l6_list, stri = [], [], [], []
    snap_times = []
    t = 0.0
    step = 0
    stri_integral = 0.0
    last_l6_cubed = None

    def log_diagnostics():
        nonlocal stri_integral, last_l6_cubed
        rep, linf, l6 = st.diagnostics(params)
        if times:
            dt_log = t - times[-1]
            stri_integral += 0.5 * dt_log * (last_l6_cubed + l6 ** 3)
        times.append(t)
        traj.reports.append(rep)
        linf_list.append(linf)
        l6_list.append(l6)
        stri.append(stri_integral ** (1.0 / 3.0))
        last_l6_cubed = l6 ** 3
        return linf

    def log_snapshot():
        snap_times.append(t)
        traj.snapshots.append(st.to_phase())

    linf_guard = log_diagnostics()
    log_snapshot()
    status = STATUS_RUNNING
    guard_stride = max(1, min(policy.diag_stride, 5))

    while t < T - 1e-12:
        dt = policy.dt_base
        if linf_guard > policy.amplitude_guard:
            dt = policy.dt_base * (policy.amplitude_guard / linf_guard) ** 2
        if dt < policy.dt_min:
            status = STATUS_BLOWUP
            traj.escape_time = t
            break
        dt = min(dt, T - t)

        st.kick(0.5 * dt, params)
        st.free(dt)
        linf_guard = st.kick(0.5 * dt, params)
        t += dt
        step += 1

        fast_growth = linf_guard > 2.0 * policy.amplitude_guard
        if step % guard_stride == 0 or fast_growth or t >= T - 1e-12:
            h_now, tail_now = st.guard_metrics()
            if not np.isfinite(h_now) or h_now > 100.0 * max(h_init, 1e-300):
                status = STATUS_BLOWUP
                traj.escape_time = t
                log_diagnostics()
                log_snapshot()
                break
            if tail_now > tail_limit:
                status = STATUS_RESOLUTION
                traj.escape_time = t
                log_diagnostics()
                log_snapshot()
                break

        if step % policy.diag_stride == 0 or t >= T - 1e-12:
            log_diagnostics()
        if step % policy.snapshot_stride == 0 or t >= T - 1e-12:
            log_snapshot()
    else:
        status = STATUS_COMPLETED

    traj.status = status
    traj.times = np.array(times)
    traj.linf = np.array(linf_list)
    traj.l6_pair = np.array(l6_list)
    traj.strichartz_running = np.array(stri)
    traj.snapshot_times = np.array(snap_times)
    if status == STATUS_COMPLETED:
        e = traj.series("E")
        scale = max(abs(e[0]), 1e-300)
        traj.energy_drift = float(np.max(np.abs(e - e[0])) / scale)
    return traj


def strichartz_accumulator(traj: Trajectory) -> np.ndarray:
    """Running (int ||U||_{L6xL6}^3 dt)^{1/3}; monotone nondecreasing."""
    return traj.strichartz_running.copy()


def _nonlinearity_hat(phase: PhasePoint, params: NonlinearityParams):
    g = phase.grid
    a = phase.pair.u1.values
    b = phase.pair.u2.values
    n1 = params.mu1 * a ** 3 + params.beta * b ** 2 * a
    n2 = params.mu2 * b ** 3 + params.beta * a ** 2 * b
    return (g.rfft(n1) * g.dealias_mask, g.rfft(n2) * g.dealias_mask)


def duhamel_residual(traj: Trajectory, sample_times) -> float:
    """Max relative H1 x H1 defect of the Duhamel representation.

    The integral term is evaluated by composite Simpson over the stored
    snapshots, so the snapshot grid must be uniform and dense enough
    (at least 5 snapshots up to each sample time, even interval count).
    """
    g = traj.grid
    ts = traj.snapshot_times
    if len(ts) < 5:
        raise SnapshotDensityError("need at least 5 stored snapshots")
    dt = np.diff(ts)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * dt[0]:
        raise SnapshotDensityError("snapshot grid must be uniform")
    h = dt[0]
    om = g.bessel_symbol
    w = _spectral_weight(g)
    nhat = [_nonlinearity_hat(ph, traj.params) for ph in traj.snapshots]
    u0 = traj.snapshots[0]
    u0h = (g.rfft(u0.pair.u1.values), g.rfft(u0.pair.u2.values))
    v0h = (g.rfft(u0.v1.values), g.rfft(u0.v2.values))

    worst = 0.0
    for t in sample_times:
        m = int(round((t - ts[0]) / h))
        if m < 4 or m >= len(ts) or abs(ts[m] - t) > 1e-9 * max(h, 1.0):
            raise SnapshotDensityError(
                f"sample time {t} not resolved by the snapshot grid")
        if m % 2 == 1:
            raise SnapshotDensityError(
                f"sample time {t} needs an even snapshot interval count")
        t_m = ts[m]
        # composite Simpson weights on 0..m
        wts = np.zeros(m + 1)
        wts[0] = wts[m] = h / 3.0
        wts[1:m:2] = 4.0 * h / 3.0
        wts[2:m:2] = 2.0 * h / 3.0
        defect_sq = 0.0
        norm_sq = 0.0
        for comp in (0, 1):
            integral = np.zeros_like(u0h[comp])
            for i in range(m + 1):
                integral = integral + wts[i] * np.sin((t_m - ts[i]) * om) / om \
                    * nhat[i][comp]
            lin = np.cos(t_m * om) * u0h[comp] + np.sin(t_m * om) / om * v0h[comp]
            target = traj.snapshots[m].pair.u1 if comp == 0 \
                else traj.snapshots[m].pair.u2
            th = g.rfft(target.values)
            defect_sq += float(np.sum(w * (1.0 + g.k_sq)
                                      * np.abs(th - lin - integral) ** 2))
            norm_sq += float(np.sum(w * (1.0 + g.k_sq) * np.abs(th) ** 2))
        worst = max(worst, np.sqrt(defect_sq / max(norm_sq, 1e-300)))
    return worst


def data_radius(phase: PhasePoint, fraction: float = 0.999) -> float:
    """Radius around the origin holding the given fraction of linear energy."""
    g = phase.grid
    dens = 0.5 * (phase.pair.u1.values ** 2 + phase.pair.u2.values ** 2
                  + phase.v1.values ** 2 + phase.v2.values ** 2)
    from .spectral import gradient_fields
    for f in (phase.pair.u1, phase.pair.u2):
        for df in gradient_fields(f):
            dens = dens + 0.5 * df.values ** 2
    r = g.radius().ravel()
    d = dens.ravel()
    order = np.argsort(r)
    csum = np.cumsum(d[order])
    total = csum[-1]
    if total <= 0.0:
        return 0.0
    idx = np.searchsorted(csum, fraction * total)
    return float(r[order][min(idx, len(r) - 1)])


def wrap_time(phase: PhasePoint, fraction: float = 0.999) -> float:
    """Time before unit-speed wrap-around contaminates box diagnostics."""
    return max(0.0, phase.grid.box_half_length - data_radius(phase, fraction))
