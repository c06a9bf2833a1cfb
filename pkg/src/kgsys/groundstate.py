"""Ground states of the coupled static system and the pass level h0.

Three layers:

* a radial shooting solver for the scalar cubic ground state S
  (S'' + (2/r) S' - S + S^3 = 0, used as the oracle for every candidate),
* closed-form candidate levels built from S (semitrivial and symmetric),
* a constrained grid minimizer: preconditioned descent on the action with
  per-iteration projection onto the K0 = 0 constraint, polished by a
  Newton-Krylov solve of the Euler-Lagrange system.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import newton_krylov
from scipy.optimize._nonlin import NoConvergence

from .functionals import (FieldPair, NonlinearityParams, k0, quartic_integral,
                          scaling_normalize, static_action)
from .spectral import (ScalarField, SpectralGrid, make_grid,
                       spectral_resample)


class ShootingError(RuntimeError):
    pass


@dataclass
class RadialProfile:
    r_max: float
    nodes: int
    r: np.ndarray
    values: np.ndarray
    deriv: np.ndarray
    center_value: float
    decay_rate: float
    residual: float

    def l2_sq(self) -> float:
        return 4.0 * np.pi * simpson(self.values ** 2 * self.r ** 2, x=self.r)

    def grad_sq(self) -> float:
        return 4.0 * np.pi * simpson(self.deriv ** 2 * self.r ** 2, x=self.r)

    def h1_sq(self) -> float:
        return self.l2_sq() + self.grad_sq()

    def quartic(self) -> float:
        return 4.0 * np.pi * simpson(self.values ** 4 * self.r ** 2, x=self.r)

    def action(self) -> float:
        return 0.5 * self.h1_sq() - 0.25 * self.quartic()


def _rhs(r: float, s: float, p: float):
    """Radial ODE as a first-order system; the r = 0 limit uses S''=(S-S^3)/3."""
    if r <= 0.0:
        return p, (s - s ** 3) / 3.0
    return p, s - s ** 3 - 2.0 * p / r


def _shoot(c: float, r_max: float, h: float, record: bool = False):
    """RK4 march from the center; classify undershoot/overshoot early.

    Returns (kind, S array, S' array); arrays are None unless record=True.
    """
    n = int(round(r_max / h)) + 1
    s, p = c, 0.0
    ss = np.empty(n) if record else None
    pp = np.empty(n) if record else None
    if record:
        ss[0], pp[0] = s, p
    kind = "decay"
    for i in range(1, n):
        r = (i - 1) * h
        k1s, k1p = _rhs(r, s, p)
        k2s, k2p = _rhs(r + 0.5 * h, s + 0.5 * h * k1s, p + 0.5 * h * k1p)
        k3s, k3p = _rhs(r + 0.5 * h, s + 0.5 * h * k2s, p + 0.5 * h * k2p)
        k4s, k4p = _rhs(r + h, s + h * k3s, p + h * k3p)
        s += h * (k1s + 2.0 * k2s + 2.0 * k3s + k4s) / 6.0
        p += h * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0
        if record:
            ss[i], pp[i] = s, p
        if s < 0.0:
            kind = "over"
            if not record:
                return kind, None, None
        elif kind == "decay" and p > 0.0 and s < 1.0:
            kind = "under"
            if not record:
                return kind, None, None
    return kind, ss, pp


@lru_cache(maxsize=8)
def _scalar_ground_state_cached(r_max: float, nodes: int, tol: float) -> RadialProfile:
    h = r_max / (nodes - 1)
    lo, hi = 2.0, 6.0
    klo, _, _ = _shoot(lo, r_max, h)
    khi, _, _ = _shoot(hi, r_max, h)
    if klo != "under" or khi != "over":
        raise ShootingError(
            f"bisection bracket failed on [{lo}, {hi}]: got ({klo}, {khi})")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        kind, _, _ = _shoot(mid, r_max, h)
        if kind == "over":
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-15 * mid:
            break
    c = 0.5 * (lo + hi)
    _, s, p = _shoot(c, r_max, h, record=True)
    r = np.linspace(0.0, r_max, nodes)

    # graft the exact linear far field A e^{-r}/r where the cubic term is
    # negligible, before the shooting instability can pollute the tail
    thresh = 1e-4 * c
    bad = np.where((s <= thresh) | (p > 0.0) | (s < 0.0))[0]
    if len(bad) == 0:
        raise ShootingError("profile never reached the far-field regime; "
                            "increase r_max")
    ig = int(bad[0])
    rg = r[ig]
    amp = s[ig] * rg * math.exp(rg)
    tail = r > rg
    s[tail] = amp * np.exp(-r[tail]) / r[tail]
    p[tail] = -amp * np.exp(-r[tail]) * (1.0 / r[tail] + 1.0 / r[tail] ** 2)

    # decay rate from the pre-graft ODE data: slope of log(r S)
    fit_lo = max(2.0, rg - 3.0)
    win = (r >= fit_lo) & (r <= rg)
    coef = np.polyfit(r[win], np.log(r[win] * s[win]), 1)
    decay_rate = -coef[0]

    # sup-norm ODE residual via 4th-order finite differences, skipping the
    # center, the graft junction and the outer boundary
    d2 = np.full_like(s, np.nan)
    d2[2:-2] = (-s[4:] + 16 * s[3:-1] - 30 * s[2:-2] + 16 * s[1:-3] - s[:-4]) \
        / (12.0 * h * h)
    res = np.abs(d2 + 2.0 / np.maximum(r, h) * p - s + s ** 3)
    ok = np.ones(nodes, dtype=bool)
    ok[r < 0.5] = False      # 2/r amplifies the FD error at the center
    ok[-4:] = False
    ok[max(0, ig - 3):ig + 4] = False
    residual = float(np.nanmax(res[ok]))
    if residual > tol:
        raise ShootingError(f"ODE residual {residual:.2e} above tol {tol:.1e}")
    return RadialProfile(r_max=r_max, nodes=nodes, r=r, values=s, deriv=p,
                         center_value=c, decay_rate=decay_rate,
                         residual=residual)


def scalar_ground_state(r_max: float = 20.0, nodes: int = 4000,
                        tol: float = 1e-6) -> RadialProfile:
    if r_max < 15.0:
        raise ValueError("r_max must be >= 15")
    if nodes < 2000:
        raise ValueError("nodes must be >= 2000")
    return _scalar_ground_state_cached(float(r_max), int(nodes), float(tol))


def candidate_levels(params: NonlinearityParams,
                     profile: RadialProfile | None = None) -> dict:
    """Closed-form action levels of the K0 = 0 candidates built from S."""
    if profile is None:
        profile = scalar_ground_state()
    j_scalar = profile.action()
    out = {"semitrivial": j_scalar / max(params.mu1, params.mu2)}
    if abs(params.mu1 - params.mu2) < 1e-14:
        out["symmetric"] = 2.0 * j_scalar / (params.mu1 + params.beta)
    return out


def radial_to_grid(profile: RadialProfile, grid: SpectralGrid,
                   amplitude: float = 1.0, center=None) -> ScalarField:
    r = grid.radius(center)
    vals = amplitude * np.interp(r, profile.r, profile.values, right=0.0)
    return ScalarField(grid, vals)


def candidate_pair(params: NonlinearityParams, grid: SpectralGrid,
                   kind: str, profile: RadialProfile | None = None) -> FieldPair:
    """Grid realization of a closed-form candidate (seed for the solver).

    Sampling the radial profile on a finite grid perturbs it off the
    K0 = 0 manifold, badly so at coarse resolution.  The gridded pair is
    therefore projected back by the unique amplitude rescaling that
    restores K0 = 0 exactly.
    """
    if profile is None:
        profile = scalar_ground_state()
    if kind == "semitrivial":
        mu = max(params.mu1, params.mu2)
        f = radial_to_grid(profile, grid, amplitude=1.0 / math.sqrt(mu))
        z = ScalarField(grid, np.zeros(grid.shape))
        pair = FieldPair(f, z) if params.mu1 >= params.mu2 else FieldPair(z, f)
    elif kind == "symmetric":
        mu = params.mu1
        c = math.sqrt(mu / (mu + params.beta)) / math.sqrt(mu)
        f = radial_to_grid(profile, grid, amplitude=c)
        pair = FieldPair(f, f.copy())
    else:
        raise ValueError(f"unknown candidate kind {kind!r}")
    quad = pair.h1_norm_sq()
    quartic = quad - k0(pair, params)
    if quartic > 0.0:
        pair = pair.scaled(math.sqrt(quad / quartic))
    return pair


@dataclass
class GroundState:
    pair: FieldPair
    level: float
    params: NonlinearityParams
    el_residual: float
    kind: str
    converged: bool

    def k0_value(self) -> float:
        return k0(self.pair, self.params)


def _nonlinearity(pair: FieldPair, params: NonlinearityParams):
    a, b = pair.u1.values, pair.u2.values
    return (params.mu1 * a ** 3 + params.beta * b ** 2 * a,
            params.mu2 * b ** 3 + params.beta * a ** 2 * b)


def el_defect(pair: FieldPair, params: NonlinearityParams) -> float:
    """Sup norm of (1 - Lap) Q_i - f_i(Q) over both components."""
    g = pair.grid
    f1, f2 = _nonlinearity(pair, params)
    d1 = g.irfft(g.rfft(pair.u1.values) * (1.0 + g.k_sq)) - f1
    d2 = g.irfft(g.rfft(pair.u2.values) * (1.0 + g.k_sq)) - f2
    return float(max(np.max(np.abs(d1)), np.max(np.abs(d2))))


def precond_action_gradient(pair: FieldPair, params: NonlinearityParams):
    """(1 - Lap)^{-1}-preconditioned gradient of the action J."""
    g = pair.grid
    f1, f2 = _nonlinearity(pair, params)
    g1 = pair.u1.values - g.irfft(g.rfft(f1) / (1.0 + g.k_sq))
    g2 = pair.u2.values - g.irfft(g.rfft(f2) / (1.0 + g.k_sq))
    return g1, g2


def _project(pair: FieldPair, params: NonlinearityParams) -> FieldPair:
    lam = scaling_normalize(pair, params)
    return pair.scaled(math.exp(lam))


def _descend(pair: FieldPair, params: NonlinearityParams,
             max_iter: int, grad_tol: float) -> FieldPair:
    g = pair.grid
    cur = _project(pair, params)
    j_cur = static_action(cur, params)
    tau = 0.3
    for _ in range(max_iter):
        g1, g2 = precond_action_gradient(cur, params)
        gnorm = math.sqrt((np.sum(g1 ** 2) + np.sum(g2 ** 2)) * g.cell_volume)
        scale = math.sqrt(max(cur.h1_norm_sq(), 1e-300))
        if gnorm < grad_tol * scale:
            break
        trial = FieldPair(ScalarField(g, cur.u1.values - tau * g1),
                          ScalarField(g, cur.u2.values - tau * g2))
        try:
            trial = _project(trial, params)
        except ValueError:
            tau *= 0.5
            continue
        j_new = static_action(trial, params)
        if j_new <= j_cur + 1e-14 * abs(j_cur):
            cur, j_cur = trial, j_new
            tau = min(0.5, tau * 1.1)
        else:
            tau *= 0.5
            if tau < 1e-6:
                break
    return cur


def _polish(pair: FieldPair, params: NonlinearityParams) -> FieldPair:
    """Newton-Krylov on the preconditioned Euler-Lagrange fixed point."""
    g = pair.grid
    shape = g.shape

    def func(x):
        p = FieldPair(ScalarField(g, x[0].reshape(shape).copy()),
                      ScalarField(g, x[1].reshape(shape).copy()))
        g1, g2 = precond_action_gradient(p, params)
        return np.stack([g1.ravel(), g2.ravel()])

    x0 = np.stack([pair.u1.values.ravel(), pair.u2.values.ravel()])
    try:
        sol = newton_krylov(func, x0, f_tol=1e-11, maxiter=40, method="lgmres")
    except (NoConvergence, ValueError):
        return pair
    return FieldPair(ScalarField(g, sol[0].reshape(shape).copy()),
                     ScalarField(g, sol[1].reshape(shape).copy()))


def _classify_kind(pair: FieldPair) -> str:
    from .spectral import sobolev_h1_norm
    n1 = sobolev_h1_norm(pair.u1)
    n2 = sobolev_h1_norm(pair.u2)
    hi, lo = max(n1, n2), min(n1, n2)
    if lo < 1e-3 * hi:
        return "semitrivial"
    if hi - lo < 1e-3 * hi:
        return "symmetric"
    return "coupled-asymmetric"


def _recenter(pair: FieldPair) -> FieldPair:
    """Translate the pair so its mass center sits at the origin.

    The center is the circular mean of the combined density (well defined on
    the torus); the shift is applied as an exact Fourier phase, so bubbles
    that descent left between grid nodes land symmetrically for the polish.
    """
    g = pair.grid
    rho = pair.u1.values ** 2 + pair.u2.values ** 2
    total = rho.sum()
    if total <= 0.0:
        return pair
    L = g.box_half_length
    shift = np.zeros(g.dim)
    for ax, coords in enumerate(g.meshgrid()):
        theta = np.pi * (coords + L) / L
        z = np.sum(rho * np.exp(1j * theta)) / total
        shift[ax] = np.angle(z) * L / np.pi - L
    if np.max(np.abs(shift)) < 1e-12:
        return pair
    phase = np.exp(1j * sum(k * s for k, s in zip(g.k_axes, shift)))
    out = []
    for f in (pair.u1, pair.u2):
        out.append(ScalarField(g, g.irfft(g.rfft(f.values) * phase)))
    return FieldPair(*out)


def _random_seed_pairs(grid: SpectralGrid, count: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    mesh = grid.meshgrid()
    L = grid.box_half_length
    pairs = []
    for _ in range(count):
        comps = []
        for _c in range(2):
            vals = np.zeros(grid.shape)
            for _b in range(rng.integers(1, 3)):
                center = rng.uniform(-0.2 * L, 0.2 * L, size=grid.dim)
                width = rng.uniform(1.0, 2.5)
                amp = rng.uniform(0.5, 2.0)
                r_sq = sum((ax - c) ** 2 for ax, c in zip(mesh, center))
                vals += amp * np.exp(-r_sq / (2.0 * width ** 2))
            comps.append(ScalarField(grid, vals))
        pairs.append(FieldPair(*comps))
    return pairs


def solve_ground_state(params: NonlinearityParams, grid: SpectralGrid,
                       tol: float = 1e-6, max_iter: int = 300,
                       n_random_seeds: int = 5, seed: int = 7) -> GroundState:
    """Constrained minimization of the action over the K0 <= 0 region.

    Projected preconditioned descent explores the basin structure from the
    analytic candidates and a few random bumps on a coarse companion grid;
    each limit is upsampled to the target grid and polished to the discrete
    Euler-Lagrange equation.  The lowest level whose defect passes `tol`
    wins.
    """
    if grid.box_half_length < 12.0:
        raise ValueError("box too small to resolve the ground-state decay")
    profile = scalar_ground_state()

    explore = grid
    if grid.points_per_axis > 32:
        explore = make_grid(grid.dim, 32, grid.box_half_length)

    seeds = [candidate_pair(params, explore, "semitrivial", profile)]
    if abs(params.mu1 - params.mu2) < 1e-14:
        seeds.append(candidate_pair(params, explore, "symmetric", profile))
    seeds.extend(_random_seed_pairs(explore, n_random_seeds, seed))

    limits = []
    for i, s in enumerate(seeds):
        try:
            # candidate seeds are near-stationary and need only a settle
            iters = 40 if i < 2 else max_iter
            cur = _descend(s, params, iters, grad_tol=1e-9)
        except ValueError:
            continue
        if cur.h1_norm_sq() < 1e-10:
            continue
        limits.append(cur)
    if not limits:
        raise RuntimeError("no seed produced a nonzero stationary pair")

    # keep one representative per level found on the coarse grid
    limits.sort(key=lambda p: static_action(p, params))
    kept = []
    for p in limits:
        lv = static_action(p, params)
        if all(abs(lv - static_action(q, params)) > 1e-6 * max(1.0, abs(lv))
               for q in kept):
            kept.append(p)

    best = None
    best_unconverged = None
    for p in kept[:3]:
        p = _recenter(p)
        if explore is not grid:
            p = FieldPair(spectral_resample(p.u1, grid),
                          spectral_resample(p.u2, grid))
        cur = _polish(p, params)
        if cur.h1_norm_sq() < 1e-10:
            continue
        defect = el_defect(cur, params)
        gs = GroundState(pair=cur, level=static_action(cur, params),
                         params=params, el_residual=defect,
                         kind=_classify_kind(cur), converged=defect <= tol)
        if gs.converged:
            if best is None or gs.level < best.level:
                best = gs
        else:
            if best_unconverged is None or gs.level < best_unconverged.level:
                best_unconverged = gs
    if best is not None:
        return best
    if best_unconverged is not None:
        return best_unconverged
    raise RuntimeError("polish stage lost every candidate")


_h0_cache: dict = {}
_h0_lock = threading.Lock()

DEFAULT_GRID_SPEC = (3, 108, 12.0)


def default_grid() -> SpectralGrid:
    return make_grid(*DEFAULT_GRID_SPEC)


def get_ground_state(params: NonlinearityParams,
                     grid: SpectralGrid | None = None) -> GroundState:
    if grid is None:
        grid = default_grid()
    key = (params.beta, params.mu1, params.mu2,
           grid.dim, grid.points_per_axis, grid.box_half_length)
    with _h0_lock:
        hit = _h0_cache.get(key)
    if hit is not None:
        return hit
    gs = solve_ground_state(params, grid)
    with _h0_lock:
        _h0_cache[key] = gs
    return gs


def clear_cache() -> None:
    with _h0_lock:
        _h0_cache.clear()


def h0(params: NonlinearityParams, grid: SpectralGrid | None = None) -> float:
    """Pass level: the best of the analytic candidates and the grid solve."""
    gs = get_ground_state(params, grid)
    cands = candidate_levels(params)
    return min(gs.level, min(cands.values()))
