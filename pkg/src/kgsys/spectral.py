"""Periodic Fourier discretization and multiplier calculus.

Fields live on the uniform grid of the box [-L, L)^d.  All derivative and
propagator symbols are diagonal in Fourier space; the mass-1 symbol
<k> = sqrt(1 + |k|^2) is precomputed once per grid.  The module also carries
the dyadic (Littlewood-Paley) block projectors and the Lebesgue / Sobolev /
Besov norms used as diagnostics throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.asarray(t, dtype=float)
    a = np.zeros_like(t)
    pos = t > 0
    a[pos] = np.exp(-1.0 / t[pos])
    b = np.zeros_like(t)
    neg = t < 1
    b[neg] = np.exp(-1.0 / (1.0 - t[neg]))
    return a / (a + b)


def lp_cutoff(xi: np.ndarray) -> np.ndarray:
    """Radial low-pass profile: identically 1 for |xi| <= 1, 0 for |xi| >= 2."""
    return _smooth_step(2.0 - np.abs(xi))


class SpectralGridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Uniform periodic grid on [-L, L)^dim with 2^m points per axis."""

    dim: int
    points_per_axis: int
    box_half_length: float
    # per-axis physical coordinates and full (rfft-layout) wavenumber arrays
    axes: tuple = field(repr=False, default=None)
    k_axes: tuple = field(repr=False, default=None)
    k_sq: np.ndarray = field(repr=False, default=None)
    bessel_symbol: np.ndarray = field(repr=False, default=None)
    dealias_mask: np.ndarray = field(repr=False, default=None)

    @property
    def n_points(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def dx(self) -> float:
        return 2.0 * self.box_half_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    @property
    def volume(self) -> float:
        return (2.0 * self.box_half_length) ** self.dim

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def k_nyquist(self) -> float:
        return np.pi * (self.points_per_axis // 2) / self.box_half_length

    def rfft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(values)

    def irfft(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(coeffs, s=self.shape, axes=range(self.dim))

    def meshgrid(self) -> list:
        return list(np.meshgrid(*self.axes, indexing="ij"))

    def radius(self, center=None) -> np.ndarray:
        """Periodic distance to `center` (defaults to the origin)."""
        if center is None:
            center = np.zeros(self.dim)
        center = np.atleast_1d(np.asarray(center, dtype=float))
        L = self.box_half_length
        r_sq = 0.0
        for ax, c in zip(self.meshgrid(), center):
            d = np.abs(ax - c)
            d = np.minimum(d, 2.0 * L - d)
            r_sq = r_sq + d * d
        return np.sqrt(r_sq)

    def max_lp_block(self) -> int:
        """Largest dyadic index with nonzero content below the Nyquist mode."""
        return int(np.ceil(np.log2(self.k_nyquist))) + 1

    def __eq__(self, other):
        # geometry determines the grid; the cached arrays follow from it
        return (isinstance(other, SpectralGrid)
                and self.dim == other.dim
                and self.points_per_axis == other.points_per_axis
                and self.box_half_length == other.box_half_length)

    def __hash__(self):
        return hash((self.dim, self.points_per_axis, self.box_half_length))


def make_grid(dim: int, points_per_axis: int, box_half_length: float) -> SpectralGrid:
    if dim not in (1, 2, 3):
        raise SpectralGridError(f"dim must be 1, 2 or 3, got {dim}")
    n = points_per_axis
    m = n
    while m % 2 == 0:
        m //= 2
    while m % 3 == 0:
        m //= 3
    # even 2-3-smooth sizes (48 = 2^4 * 3 included); odd or rough sizes rejected
    if n < 8 or n % 2 != 0 or m != 1:
        raise SpectralGridError(
            f"points_per_axis must be a power of two (or 3*2^m) >= 8, got {n}")
    if box_half_length <= 0:
        raise SpectralGridError("box_half_length must be positive")

    L = float(box_half_length)
    axes = tuple(-L + (2.0 * L / n) * np.arange(n) for _ in range(dim))
    # rfft layout: full fftfreq on leading axes, rfftfreq on the last
    k1 = 2.0 * np.pi * np.fft.fftfreq(n, d=2.0 * L / n)
    kr = 2.0 * np.pi * np.fft.rfftfreq(n, d=2.0 * L / n)
    per_axis = [k1] * (dim - 1) + [kr]
    mesh = np.meshgrid(*per_axis, indexing="ij")
    k_axes = tuple(mesh)
    k_sq = sum(k * k for k in mesh)
    bessel = np.sqrt(1.0 + k_sq)
    k_cut = (2.0 / 3.0) * np.pi * (n // 2) / L
    mask = np.ones_like(k_sq, dtype=bool)
    for k in mesh:
        mask &= np.abs(k) <= k_cut + 1e-12
    return SpectralGrid(dim=dim, points_per_axis=n, box_half_length=L,
                        axes=axes, k_axes=k_axes, k_sq=k_sq,
                        bessel_symbol=bessel, dealias_mask=mask)


@dataclass
class ScalarField:
    """Real scalar field sampled on a SpectralGrid."""

    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} != grid shape {self.grid.shape}")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def check_finite(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("field contains NaN/Inf")


@dataclass(frozen=True)
class LPBlockIndex:
    """Dyadic block index; j = 0 is the low-frequency ball."""

    j: int

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("block index must be nonnegative")


def zero_field(grid: SpectralGrid) -> ScalarField:
    return ScalarField(grid, np.zeros(grid.shape))


def field_from_function(grid: SpectralGrid, fn) -> ScalarField:
    return ScalarField(grid, np.asarray(fn(*grid.meshgrid()), dtype=float))


def apply_multiplier(field: ScalarField, symbol: np.ndarray) -> ScalarField:
    g = field.grid
    return ScalarField(g, g.irfft(g.rfft(field.values) * symbol))


def apply_bessel(field: ScalarField, s: float) -> ScalarField:
    """Multiply Fourier coefficients by <k>^s; s = +1 and -1 are inverses."""
    return apply_multiplier(field, field.grid.bessel_symbol ** s)


def derivative(field: ScalarField, axis: int) -> ScalarField:
    g = field.grid
    return ScalarField(g, g.irfft(g.rfft(field.values) * (1j * g.k_axes[axis])))


def gradient_fields(field: ScalarField) -> list:
    return [derivative(field, ax) for ax in range(field.grid.dim)]


def _block_symbol(grid: SpectralGrid, j: int) -> np.ndarray:
    kabs = np.sqrt(grid.k_sq)
    if j == 0:
        return lp_cutoff(kabs)
    return lp_cutoff(kabs / 2.0 ** j) - lp_cutoff(kabs / 2.0 ** (j - 1))


def lp_project(field: ScalarField, block: LPBlockIndex) -> ScalarField:
    """Littlewood-Paley piece of the field; zero above the grid Nyquist."""
    return apply_multiplier(field, _block_symbol(field.grid, block.j))


def lp_blocks(field: ScalarField) -> list:
    """All representable blocks; their sum reproduces the field."""
    return [lp_project(field, LPBlockIndex(j))
            for j in range(field.grid.max_lp_block() + 1)]


def spectral_resample(field: ScalarField, target: SpectralGrid) -> ScalarField:
    """Exact trigonometric interpolation onto a finer grid of the same box."""
    src = field.grid
    if target.dim != src.dim or target.box_half_length != src.box_half_length:
        raise ValueError("resampling requires the same box")
    n_old, n_new = src.points_per_axis, target.points_per_axis
    if n_new < n_old:
        raise ValueError("target grid must be at least as fine")
    if n_new == n_old:
        return field.copy()
    fh = np.fft.fftn(field.values)
    # drop the (negligible) Nyquist planes so mode sets embed cleanly
    out = np.zeros(target.shape, dtype=complex)
    half = n_old // 2
    for ax in range(src.dim):
        idx_lo = [slice(None)] * src.dim
        idx_lo[ax] = slice(half, half + 1)
        fh[tuple(idx_lo)] = 0.0
    lo = slice(0, half)
    hi_src = slice(n_old - half + 1, n_old)
    hi_dst = slice(n_new - half + 1, n_new)
    for corner in np.ndindex(*(2,) * src.dim):
        src_idx = tuple(lo if c == 0 else hi_src for c in corner)
        dst_idx = tuple(lo if c == 0 else hi_dst for c in corner)
        out[dst_idx] = fh[src_idx]
    vals = np.fft.ifftn(out).real * (n_new / n_old) ** src.dim
    return ScalarField(target, vals)


SNAPSHOT_MAGIC = b"KGDU"
SNAPSHOT_VERSION = 1


def write_field_snapshot(path, fields: list) -> None:
    """Write fields to the little-endian binary snapshot format.

    Header: magic "KGDU", version u32, dim u32, points u32,
    box_half_length f64, field count u32; then raw f64 arrays (row-major).
    """
    if not fields:
        raise ValueError("at least one field required")
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ValueError("all fields must share one grid")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        header = np.array([SNAPSHOT_VERSION, g.dim, g.points_per_axis],
                          dtype="<u4")
        fh.write(header.tobytes())
        fh.write(np.array([g.box_half_length], dtype="<f8").tobytes())
        fh.write(np.array([len(fields)], dtype="<u4").tobytes())
        for f in fields:
            fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field_snapshot(path) -> list:
    """Read a snapshot file back into a list of ScalarField."""
    with open(path, "rb") as fh:
        if fh.read(4) != SNAPSHOT_MAGIC:
            raise ValueError("not a field snapshot (bad magic)")
        version, dim, n = np.frombuffer(fh.read(12), dtype="<u4")
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        (L,) = np.frombuffer(fh.read(8), dtype="<f8")
        (count,) = np.frombuffer(fh.read(4), dtype="<u4")
        grid = make_grid(int(dim), int(n), float(L))
        out = []
        for _ in range(count):
            raw = np.frombuffer(fh.read(8 * grid.n_points), dtype="<f8")
            out.append(ScalarField(grid, raw.reshape(grid.shape).copy()))
    return out


def lebesgue_norm(field: ScalarField, p: float) -> float:
    """Rectangle-rule L^p norm (spectrally accurate for periodic fields)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    v = field.values
    if np.isinf(p):
        return float(np.max(np.abs(v)))
    return float((np.sum(np.abs(v) ** p) * field.grid.cell_volume) ** (1.0 / p))


def l2_inner(a: ScalarField, b: ScalarField) -> float:
    return float(np.sum(a.values * b.values) * a.grid.cell_volume)


def _spectral_weight(grid: SpectralGrid) -> np.ndarray:
    """Quadrature weights making sum(w |fhat|^2) = integral of |f|^2 (rfft layout)."""
    n = grid.points_per_axis
    w = np.full(grid.k_sq.shape, 2.0)
    # the k=0 and Nyquist planes of the last (real-fft) axis are not doubled
    w[..., 0] = 1.0
    w[..., -1] = 1.0
    return w * grid.volume / float(n ** (2 * grid.dim))


def sobolev_h1_norm_sq(field: ScalarField) -> float:
    g = field.grid
    fh = g.rfft(field.values)
    return float(np.sum(_spectral_weight(g) * (1.0 + g.k_sq) * np.abs(fh) ** 2))


def sobolev_h1_norm(field: ScalarField) -> float:
    return np.sqrt(sobolev_h1_norm_sq(field))


def l2_norm_spectral(field: ScalarField) -> float:
    """Plancherel-side L^2 norm; agrees with lebesgue_norm(field, 2)."""
    g = field.grid
    fh = g.rfft(field.values)
    return float(np.sqrt(np.sum(_spectral_weight(g) * np.abs(fh) ** 2)))


def besov_norm(field: ScalarField, sigma: float, p: float) -> float:
    """||P_0 f||_p + (sum_{j>=1} 2^{2 sigma j} ||P_j f||_p^2)^{1/2} on the grid."""
    if p < 2:
        raise ValueError("p must be >= 2")
    blocks = lp_blocks(field)
    low = lebesgue_norm(blocks[0], p)
    tail = sum(4.0 ** (sigma * j) * lebesgue_norm(b, p) ** 2
               for j, b in enumerate(blocks[1:], start=1))
    return low + np.sqrt(tail)
