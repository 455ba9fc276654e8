"""Sliding-window statistics of the anomaly and gradient fields.

Six per-cell indicators are extracted over clipped rectangular windows:

* sigma      — sample standard deviation of the window (mGal)
* roughness  — mean absolute first difference, averaged over the two
               axis directions (mGal)
* corr       — lag-1 autocorrelation, averaged over the two directions
* grad_sigma — sample standard deviation of the gradient magnitude
               (mGal per cell)
* skew       — third-moment skewness with an m,n-dependent constant
* entropy    — Shannon entropy (bits) of the min-shifted window mass

Windows are clipped at grid borders rather than padded; the effective
row/column counts (m, n) enter every formula. Degenerate cases (too-small
windows, zero variance) yield 0 and are flagged, keeping the feature cube
total. Conventions: rows index latitude (phi direction), columns index
longitude (lambda direction).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CenterOutOfBounds, GridTooSmall
from .grid import GravityGrid, GridSpec

VARIANCE_EPS = 1e-12

FEATURE_NAMES = ("sigma", "roughness", "corr", "grad_sigma", "skew", "entropy")


@dataclass(frozen=True)
class Window:
    """A border-clipped rectangular view of field values."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.size == 0:
            raise ValueError("window must be a non-empty 2-D array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("window values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GradientGrid:
    """Per-cell gradient magnitude of a gravity grid (mGal per cell)."""

    spec: GridSpec
    values: np.ndarray


@dataclass(frozen=True)
class FeatureCube:
    """Per-cell six-channel feature raster plus the window spec used.

    Channel arrays all have shape (n_lat, n_lon). `degenerate` marks
    cells where any statistic hit a 0/0 guard.
    """

    spec: GridSpec
    sigma: np.ndarray
    roughness: np.ndarray
    corr: np.ndarray
    grad_sigma: np.ndarray
    skew: np.ndarray
    entropy: np.ndarray
    half_m: int
    half_n: int
    degenerate: np.ndarray

    def channel(self, name: str) -> np.ndarray:
        if name not in FEATURE_NAMES:
            raise KeyError(f"unknown feature channel {name!r}")
        return getattr(self, name)

    def as_matrix(self) -> np.ndarray:
        """(n_cells, 6) matrix, cells in row-major grid order, channels
        in FEATURE_NAMES order."""
        return np.column_stack([getattr(self, nm).ravel() for nm in FEATURE_NAMES])


def _vals(w) -> np.ndarray:
    if isinstance(w, Window):
        return w.values
    return np.asarray(w, dtype=float)


def window_view(grid: GravityGrid, center: tuple[int, int], half_m: int, half_n: int) -> Window:
    """Clip the (2*half_m+1) x (2*half_n+1) neighborhood of `center` to
    the grid. `center` is (row, col) = (lat index, lon index)."""
    if half_m < 1 or half_n < 1:
        raise ValueError(f"half extents must be >= 1, got ({half_m}, {half_n})")
    i, j = center
    if not (0 <= i < grid.n_lat and 0 <= j < grid.n_lon):
        raise CenterOutOfBounds(
            f"center ({i}, {j}) outside grid {grid.n_lat}x{grid.n_lon}"
        )
    return Window(values=_clip_slice(grid.values, i, j, half_m, half_n))


def _clip_slice(arr: np.ndarray, i: int, j: int, half_m: int, half_n: int) -> np.ndarray:
    return arr[
        max(0, i - half_m) : min(arr.shape[0], i + half_m + 1),
        max(0, j - half_n) : min(arr.shape[1], j + half_n + 1),
    ]


def std_dev(w) -> float:
    """sqrt( sum((v - mean)^2) / (m*n - 1) ); 0 for single-cell windows."""
    v = _vals(w)
    mn = v.size
    if mn < 2:
        return 0.0
    d = v - v.mean()
    return float(np.sqrt(np.sum(d * d) / (mn - 1)))


def roughness(w) -> float:
    """Average of mean absolute first differences along columns (lambda)
    and rows (phi); an axis of length 1 contributes 0."""
    v = _vals(w)
    m, n = v.shape
    r_lambda = float(np.sum(np.abs(np.diff(v, axis=1))) / (m * (n - 1))) if n >= 2 else 0.0
    r_phi = float(np.sum(np.abs(np.diff(v, axis=0))) / ((m - 1) * n)) if m >= 2 else 0.0
    return 0.5 * (r_lambda + r_phi)


def correlation(w) -> float:
    """Average lag-1 autocorrelation along the two axes, sharing the
    window mean; clamped to [-1, 1]; 0 when the window variance is below
    1e-12."""
    v = _vals(w)
    m, n = v.shape
    d = v - v.mean()
    denom = float(np.sum(d * d))
    if denom / v.size < VARIANCE_EPS:
        return 0.0
    r_lambda = float(np.sum(d[:, :-1] * d[:, 1:]) / denom) if n >= 2 else 0.0
    r_phi = float(np.sum(d[:-1, :] * d[1:, :]) / denom) if m >= 2 else 0.0
    return 0.5 * (min(1.0, max(-1.0, r_lambda)) + min(1.0, max(-1.0, r_phi)))


def gradient_field(grid) -> GradientGrid:
    """Gradient magnitude sqrt(gx^2 + gy^2) per cell, central differences
    in the interior and one-sided at borders, in per-cell units."""
    if isinstance(grid, GravityGrid):
        vals, spec = grid.values, grid.spec
    else:
        vals = np.asarray(grid, dtype=float)
        spec = None
    if vals.ndim != 2 or vals.shape[0] < 2 or vals.shape[1] < 2:
        raise GridTooSmall(f"gradient needs at least 2x2 cells, got {vals.shape}")
    gy, gx = np.gradient(vals)
    s = np.hypot(gx, gy)
    return GradientGrid(spec=spec, values=s)


def gradient_std(w) -> float:
    """Sample standard deviation of a gradient-magnitude window; same
    form as std_dev applied to S."""
    return std_dev(w)


def skewness(w) -> float:
    """Third-moment skewness with the m,n normalization constant
    mn / ((m-1)(m-2)(n-1)(n-2)); 0 (flagged upstream) when m or n < 3 or
    the window standard deviation is below 1e-12."""
    v = _vals(w)
    m, n = v.shape
    if m < 3 or n < 3:
        return 0.0
    sigma = std_dev(v)
    if sigma < VARIANCE_EPS:
        return 0.0
    d = v - v.mean()
    const = (m * n) / ((m - 1) * (m - 2) * (n - 1) * (n - 2))
    return float(const * np.sum(d**3) / (sigma * sigma * sigma))


def diff_entropy(w) -> float:
    """Shannon entropy (bits) of the min-shifted window mass.

    P_ij = (v_ij - min + eps) / sum(v - min + eps), eps = 1e-12*(1+range),
    H = -sum P log2 P. A constant window gives the uniform distribution,
    hence exactly log2(m*n).
    """
    v = _vals(w)
    rng = float(v.max() - v.min())
    eps = 1e-12 * (1.0 + rng)
    shifted = v - v.min() + eps
    p = shifted / shifted.sum()
    # p > 0 by construction; 0*log2(0) cannot occur but guard anyway
    return float(-np.sum(np.where(p > 0, p * np.log2(p), 0.0)))


def _cell_stats(v: np.ndarray, sv: np.ndarray) -> tuple[float, float, float, float, float, float, bool]:
    """All six statistics for one cell's windows (v: anomaly, sv: gradient)."""
    m, n = v.shape
    sig = std_dev(v)
    degenerate = v.size < 2 or m < 3 or n < 3 or sig < VARIANCE_EPS
    return (
        sig,
        roughness(v),
        correlation(v),
        gradient_std(sv),
        skewness(v),
        diff_entropy(v),
        degenerate,
    )


def extract_features(
    grid: GravityGrid, half_m: int = 5, half_n: int = 5, threads: int = 1
) -> FeatureCube:
    """Extract all six statistics for every cell with identical windows.

    grad_sigma uses windows over the gradient magnitude field of the
    whole grid. Cells are independent, so the row-parallel path produces
    bit-identical output to the serial one.
    """
    s = gradient_field(grid).values
    v = grid.values
    n_lat, n_lon = v.shape
    out = [np.empty((n_lat, n_lon)) for _ in range(6)]
    degenerate = np.zeros((n_lat, n_lon), dtype=bool)

    def fill_row(i: int) -> None:
        for j in range(n_lon):
            wv = _clip_slice(v, i, j, half_m, half_n)
            ws = _clip_slice(s, i, j, half_m, half_n)
            *stats, flag = _cell_stats(wv, ws)
            for c in range(6):
                out[c][i, j] = stats[c]
            degenerate[i, j] = flag

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(n_lat)))
    else:
        for i in range(n_lat):
            fill_row(i)

    return FeatureCube(
        spec=grid.spec,
        sigma=out[0],
        roughness=out[1],
        corr=out[2],
        grad_sigma=out[3],
        skew=out[4],
        entropy=out[5],
        half_m=half_m,
        half_n=half_n,
        degenerate=degenerate,
    )


CUBE_CSV_HEADER = "lon,lat," + ",".join(FEATURE_NAMES)


def write_cube_csv(cube: FeatureCube, path: str) -> None:
    """Feature cube as CSV: lon,lat,sigma,roughness,corr,grad_sigma,skew,entropy."""
    lons = cube.spec.lons()
    lats = cube.spec.lats()
    mats = [getattr(cube, nm) for nm in FEATURE_NAMES]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CUBE_CSV_HEADER + "\n")
        for i in range(cube.spec.n_lat):
            for j in range(cube.spec.n_lon):
                row = ",".join(repr(float(mat[i, j])) for mat in mats)
                fh.write(f"{lons[j]!r},{lats[i]!r},{row}\n")
