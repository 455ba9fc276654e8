"""Semivariogram estimation, model fitting, and ordinary kriging.

The empirical semivariogram bins squared value differences by pair
distance; a parametric model (spherical, exponential, or gaussian — all
using the practical-range convention) is fitted to it by pair-count
weighted least squares; ordinary kriging then solves, per target point,
the (k+1) x (k+1) system over the k nearest samples with a Lagrange
multiplier enforcing unit weight sum.

Distances are planar Euclidean in degrees. gamma(0) = nugget by
convention, so the kriging matrix diagonal carries the nugget.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import NoPairsInRange, SingularSystem, TooFewBins, TooFewSamples
from .grid import GravityGrid, GridSpec, ScatterSamples

VARIOGRAM_KINDS = ("spherical", "exponential", "gaussian")

# Golden-section search constants
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EmpiricalVariogram:
    """Binned semivariance estimates: lag centers, gamma-hat, pair counts."""

    lags: np.ndarray
    gammas: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=float)
        gammas = np.asarray(self.gammas, dtype=float)
        counts = np.asarray(self.counts, dtype=int)
        if not (lags.shape == gammas.shape == counts.shape) or lags.ndim != 1:
            raise ValueError("lags, gammas, counts must be 1-D arrays of equal length")
        if lags.size and np.any(np.diff(lags) <= 0):
            raise ValueError("lag centers must be strictly increasing")
        if np.any(counts < 1) or np.any(gammas < 0):
            raise ValueError("retained bins need counts >= 1 and gamma >= 0")
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "counts", counts)

    @property
    def n_bins(self) -> int:
        return self.lags.size


@dataclass(frozen=True)
class VariogramModel:
    """Parametric semivariogram: gamma(0) = nugget, gamma(inf) = sill."""

    kind: str
    nugget: float
    sill: float
    range_: float
    degenerate: bool = False

    def __post_init__(self):
        if self.kind not in VARIOGRAM_KINDS:
            raise ValueError(f"unknown variogram kind {self.kind!r}")
        if self.nugget < 0 or self.sill < self.nugget or self.range_ <= 0:
            raise ValueError(
                f"need 0 <= nugget <= sill and range > 0, got "
                f"({self.nugget}, {self.sill}, {self.range_})"
            )

    def __call__(self, h) -> np.ndarray:
        return variogram_value(self.kind, self.nugget, self.sill, self.range_, h)


@dataclass(frozen=True)
class KrigeEstimate:
    value: float
    variance: float


def variogram_value(kind: str, nugget: float, sill: float, range_: float, h) -> np.ndarray:
    """Evaluate a semivariogram model at lag(s) h (elementwise)."""
    h = np.asarray(h, dtype=float)
    psill = sill - nugget
    if kind == "spherical":
        hr = np.minimum(h / range_, 1.0)
        out = nugget + psill * (1.5 * hr - 0.5 * hr**3)
    elif kind == "exponential":
        out = nugget + psill * (1.0 - np.exp(-3.0 * h / range_))
    elif kind == "gaussian":
        out = nugget + psill * (1.0 - np.exp(-3.0 * (h / range_) ** 2))
    else:
        raise ValueError(f"unknown variogram kind {kind!r}")
    return out


def empirical_variogram(
    samples: ScatterSamples, n_bins: int, max_lag: float
) -> EmpiricalVariogram:
    """Bin gamma-hat(h) = sum (z_i - z_j)^2 / (2 |N(h)|) over equal-width
    lag bins up to max_lag; empty bins are dropped.

    Raises TooFewSamples (< 2 samples) or NoPairsInRange (every pair
    farther than max_lag).
    """
    if len(samples) < 2:
        raise TooFewSamples(f"variogram needs >= 2 samples, got {len(samples)}")
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    if max_lag <= 0:
        raise ValueError(f"max_lag must be > 0, got {max_lag}")

    coords = samples.coords()
    z = samples.values
    iu, ju = np.triu_indices(len(samples), k=1)
    d = np.sqrt(np.sum((coords[iu] - coords[ju]) ** 2, axis=1))
    keep = d <= max_lag
    if not np.any(keep):
        raise NoPairsInRange(f"no sample pair within max_lag={max_lag}")
    d = d[keep]
    sq = (z[iu][keep] - z[ju][keep]) ** 2

    width = max_lag / n_bins
    idx = np.minimum((d / width).astype(int), n_bins - 1)
    lags, gammas, counts = [], [], []
    for b in range(n_bins):
        mask = idx == b
        cnt = int(np.count_nonzero(mask))
        if cnt == 0:
            continue
        lags.append((b + 0.5) * width)
        gammas.append(float(np.sum(sq[mask]) / (2.0 * cnt)))
        counts.append(cnt)
    return EmpiricalVariogram(
        lags=np.array(lags), gammas=np.array(gammas), counts=np.array(counts)
    )


def _golden_min(fn, lo: float, hi: float, iters: int = 80) -> float:
    """Golden-section minimum of a 1-D unimodal slice on [lo, hi]."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def fit_variogram(emp: EmpiricalVariogram, kind: str = "spherical") -> VariogramModel:
    """Fit (nugget, sill, range) by pair-count-weighted least squares.

    Derivative-free: a coarse scan over range initializes, then
    coordinate-wise golden-section refinement cycles the three parameters
    within their bounds (nugget in [0, max gamma], sill in
    [nugget, 2 max gamma], range in (0, 2 h_max]).

    An all-zero empirical variogram returns the flagged nugget-only
    model instead of failing. Raises TooFewBins for fewer than 3 bins.
    """
    if emp.n_bins < 3:
        raise TooFewBins(f"fit needs >= 3 occupied bins, got {emp.n_bins}")
    h = emp.lags
    g = emp.gammas
    w = emp.counts.astype(float)
    gmax = float(g.max())
    h_max = float(h[-1])
    if gmax <= 0.0:
        return VariogramModel(kind=kind, nugget=0.0, sill=0.0, range_=h_max, degenerate=True)

    def sse(nugget: float, sill: float, range_: float) -> float:
        resid = variogram_value(kind, nugget, sill, range_, h) - g
        return float(np.sum(w * resid * resid))

    range_hi = 2.0 * h_max
    range_lo = 1e-6 * h_max
    nugget = min(float(g[0]), gmax)
    sill = gmax

    # coarse scan picks a good range basin before local refinement
    scan = np.linspace(range_lo, range_hi, 33)
    range_ = float(scan[np.argmin([sse(nugget, sill, r) for r in scan])])

    best = sse(nugget, sill, range_)
    for _ in range(60):
        range_ = _golden_min(lambda r: sse(nugget, sill, r), range_lo, range_hi)
        sill = _golden_min(lambda s: sse(nugget, s, range_), nugget, 2.0 * gmax)
        nugget = _golden_min(lambda n: sse(n, max(sill, n), range_), 0.0, min(sill, gmax))
        sill = max(sill, nugget)
        cur = sse(nugget, sill, range_)
        if best - cur < 1e-12 * max(best, 1.0):
            best = cur
            break
        best = cur
    return VariogramModel(kind=kind, nugget=nugget, sill=sill, range_=range_)


def _solve_point(
    coords: np.ndarray,
    z: np.ndarray,
    model: VariogramModel,
    target: np.ndarray,
    neighbor_idx: np.ndarray,
) -> tuple[float, float, np.ndarray, float]:
    """Solve one ordinary kriging system over the given neighbor indices.

    Returns (estimate, variance, weights, lagrange multiplier).
    """
    pts = coords[neighbor_idx]
    zk = z[neighbor_idx]
    k = pts.shape[0]
    dmat = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2))
    d0 = np.sqrt(np.sum((pts - target) ** 2, axis=1))

    a = np.empty((k + 1, k + 1))
    a[:k, :k] = model(dmat)
    a[k, :k] = 1.0
    a[:k, k] = 1.0
    a[k, k] = 0.0
    b = np.empty(k + 1)
    b[:k] = model(d0)
    b[k] = 1.0

    sol = _solve_with_rescue(a, b, k, model, target)
    lam = sol[:k]
    mu = float(sol[k])
    est = float(lam @ zk)
    var = float(lam @ b[:k] + mu)
    if var < 0.0:
        if var < -1e-9:
            raise SingularSystem(
                f"kriging variance {var} below tolerance at ({target[0]}, {target[1]})"
            )
        var = 0.0
    return est, var, lam, mu


def _solve_with_rescue(
    a: np.ndarray, b: np.ndarray, k: int, model: VariogramModel, target: np.ndarray
) -> np.ndarray:
    jitter = 1e-10 * max(model.sill, 1.0)
    for attempt in range(2):
        try:
            sol = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            sol = None
        if sol is not None and np.all(np.isfinite(sol)):
            return sol
        # one documented rescue: diagonal jitter against duplicate or
        # collinear sample geometry
        a = a.copy()
        a[np.arange(k), np.arange(k)] += jitter
    raise SingularSystem(
        f"kriging system singular after diagonal regularization {jitter:g} "
        f"at ({target[0]}, {target[1]})"
    )


def krige_point(
    samples: ScatterSamples,
    model: VariogramModel,
    lon: float,
    lat: float,
    neighborhood_k: int = 16,
) -> KrigeEstimate:
    """Ordinary kriging estimate at one target from the k nearest samples.

    A target that coincides exactly with a sample under a zero-nugget
    model short-circuits to that sample's value with zero variance (the
    exact-interpolation limit of the system).
    """
    if len(samples) < 1:
        raise TooFewSamples("kriging needs at least one sample")
    if neighborhood_k < 1:
        raise ValueError(f"neighborhood_k must be >= 1, got {neighborhood_k}")
    coords = samples.coords()
    target = np.array([lon, lat], dtype=float)
    k = min(neighborhood_k, len(samples))
    tree = cKDTree(coords)
    dist, idx = tree.query(target, k=k)
    dist = np.atleast_1d(dist)
    idx = np.atleast_1d(idx)
    if model.nugget == 0.0 and dist[0] == 0.0:
        return KrigeEstimate(value=float(samples.values[idx[0]]), variance=0.0)
    est, var, _, _ = _solve_point(coords, samples.values, model, target, idx)
    return KrigeEstimate(value=est, variance=var)


def krige_weights(
    samples: ScatterSamples,
    model: VariogramModel,
    lon: float,
    lat: float,
    neighborhood_k: int = 16,
) -> tuple[np.ndarray, float]:
    """Solve the kriging system at one target and return (weights, mu).

    Exposes the raw solution for verification; prediction goes through
    krige_point.
    """
    coords = samples.coords()
    target = np.array([lon, lat], dtype=float)
    k = min(neighborhood_k, len(samples))
    tree = cKDTree(coords)
    _, idx = tree.query(target, k=k)
    idx = np.atleast_1d(idx)
    _, _, lam, mu = _solve_point(coords, samples.values, model, target, idx)
    return lam, mu


def krige_grid(
    samples: ScatterSamples,
    model: VariogramModel,
    grid_spec: GridSpec,
    neighborhood_k: int = 16,
    threads: int = 1,
) -> GravityGrid:
    """Krige every node of a target grid.

    Nodes are independent; the threaded path assembles results by index
    and is bit-identical to the serial one. Passing neighborhood_k >=
    len(samples) performs the global solve at every node. Solver errors
    propagate with the offending node's coordinates.
    """
    if len(samples) < 1:
        raise TooFewSamples("kriging needs at least one sample")
    coords = samples.coords()
    z = samples.values
    k = min(neighborhood_k, len(samples))
    tree = cKDTree(coords)
    lons = grid_spec.lons()
    lats = grid_spec.lats()
    out = np.empty((grid_spec.n_lat, grid_spec.n_lon))

    def fill_row(i: int) -> None:
        row_targets = np.column_stack([lons, np.full(grid_spec.n_lon, lats[i])])
        dists, idxs = tree.query(row_targets, k=k)
        dists = np.atleast_2d(dists.reshape(grid_spec.n_lon, -1))
        idxs = np.atleast_2d(idxs.reshape(grid_spec.n_lon, -1))
        for j in range(grid_spec.n_lon):
            if model.nugget == 0.0 and dists[j, 0] == 0.0:
                out[i, j] = z[idxs[j, 0]]
                continue
            est, _, _, _ = _solve_point(coords, z, model, row_targets[j], idxs[j])
            out[i, j] = est

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(grid_spec.n_lat)))
    else:
        for i in range(grid_spec.n_lat):
            fill_row(i)

    return GravityGrid(spec=grid_spec, values=out)
