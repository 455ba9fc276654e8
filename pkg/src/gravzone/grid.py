"""Gravity-anomaly grid data model, CSV ingestion, and synthetic fields.

The canonical layout is row-major and latitude-major ascending: row `i`
holds latitude ``lat0 + i * dlat``, column `j` holds longitude
``lon0 + j * dlon``, and flattening `values` row-major enumerates cells
by ascending latitude, then ascending longitude. Coordinates are planar
degrees; no projection or datum handling is attempted at this scale.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyInput,
    InvalidConfig,
    InvalidFraction,
    IrregularGrid,
    MalformedRecord,
)
from .sampling import make_rng, round_half_up

CSV_HEADER = "lon,lat,value"

# Relative tolerance for deciding that text coordinates lie on a regular
# grid: tight enough to reject real irregularity, loose enough to absorb
# decimal-text rounding.
SPACING_RTOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Extents and resolution of a regular lon/lat grid."""

    lon0: float
    lat0: float
    dlon: float
    dlat: float
    n_lon: int
    n_lat: int

    def __post_init__(self):
        if self.dlon <= 0 or self.dlat <= 0:
            raise InvalidConfig(f"grid spacing must be positive, got dlon={self.dlon}, dlat={self.dlat}")
        if self.n_lon < 2 or self.n_lat < 2:
            raise InvalidConfig(f"grid needs at least 2x2 cells, got {self.n_lon}x{self.n_lat}")

    @property
    def n_cells(self) -> int:
        return self.n_lon * self.n_lat

    def lons(self) -> np.ndarray:
        return self.lon0 + self.dlon * np.arange(self.n_lon)

    def lats(self) -> np.ndarray:
        return self.lat0 + self.dlat * np.arange(self.n_lat)


@dataclass(frozen=True)
class GravityGrid:
    """Regular raster of gravity-anomaly values (mGal).

    `values` has shape (n_lat, n_lon); see the module docstring for the
    orientation convention. Instances are immutable and thread-safe.
    """

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if vals.shape != (self.spec.n_lat, self.spec.n_lon):
            raise ValueError(
                f"values shape {vals.shape} does not match grid "
                f"{self.spec.n_lat}x{self.spec.n_lon}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must all be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_lon(self) -> int:
        return self.spec.n_lon

    @property
    def n_lat(self) -> int:
        return self.spec.n_lat

    def cell_coords(self) -> np.ndarray:
        """(n_cells, 2) array of (lon, lat) per cell in row-major order."""
        lon, lat = np.meshgrid(self.spec.lons(), self.spec.lats())
        return np.column_stack([lon.ravel(), lat.ravel()])


@dataclass(frozen=True)
class ScatterSamples:
    """Irregular point samples of the anomaly field."""

    lons: np.ndarray
    lats: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lons = np.asarray(self.lons, dtype=float)
        lats = np.asarray(self.lats, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if not (lons.shape == lats.shape == vals.shape) or lons.ndim != 1:
            raise ValueError("lons, lats, values must be 1-D arrays of equal length")
        if lons.size < 1:
            raise ValueError("at least one sample is required")
        coords = np.column_stack([lons, lats])
        if np.unique(coords, axis=0).shape[0] != lons.size:
            raise ValueError("duplicate (lon, lat) sample coordinates")
        for name, arr in (("lons", lons), ("lats", lats), ("values", vals)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "lons", lons)
        object.__setattr__(self, "lats", lats)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.lons.size

    def coords(self) -> np.ndarray:
        return np.column_stack([self.lons, self.lats])


@dataclass(frozen=True)
class Bump:
    """One Gaussian anomaly bump: amplitude (mGal) and width (degrees)."""

    lon: float
    lat: float
    amplitude: float
    width: float


@dataclass(frozen=True)
class SynthConfig:
    """Recipe for a synthetic anomaly field: Gaussian bumps on a linear
    trend plus optional white noise, all seeded."""

    grid_spec: GridSpec
    bumps: tuple[Bump, ...] = ()
    trend: tuple[float, float, float] = (0.0, 0.0, 0.0)
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for b in self.bumps:
            if b.width <= 0:
                raise InvalidConfig(f"bump width must be positive, got {b.width}")
        if self.noise_std < 0:
            raise InvalidConfig(f"noise_std must be >= 0, got {self.noise_std}")


def _parse_record(line_no: int, line: str) -> tuple[float, float, float]:
    parts = line.split(",")
    if len(parts) != 3:
        raise MalformedRecord(f"line {line_no}: expected 3 fields, got {len(parts)}")
    try:
        lon, lat, val = (float(p) for p in parts)
    except ValueError:
        raise MalformedRecord(f"line {line_no}: non-numeric field in {line!r}") from None
    if not all(np.isfinite([lon, lat, val])):
        raise MalformedRecord(f"line {line_no}: non-finite field in {line!r}")
    return lon, lat, val


def _as_text_lines(source) -> list[str]:
    """Accept bytes, a binary stream, a text stream, or a path string."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    elif hasattr(source, "read"):
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    else:
        raise TypeError(f"unsupported source type {type(source)!r}")
    return text.splitlines()


def _infer_axis(coords: np.ndarray, name: str) -> tuple[float, float, int]:
    """Infer (origin, spacing, count) for one axis from unique coordinates."""
    uniq = np.unique(coords)
    if uniq.size < 2:
        raise IrregularGrid(f"{name} axis has fewer than 2 distinct coordinates")
    diffs = np.diff(uniq)
    dmax = float(diffs.max())
    if dmax - float(diffs.min()) > SPACING_RTOL * dmax:
        raise IrregularGrid(
            f"{name} spacing is not uniform within {SPACING_RTOL:g} relative "
            f"(min {diffs.min()!r}, max {dmax!r})"
        )
    spacing = (float(uniq[-1]) - float(uniq[0])) / (uniq.size - 1)
    return float(uniq[0]), spacing, int(uniq.size)


def ingest_csv(source) -> GravityGrid:
    """Parse `lon,lat,value` CSV records into a validated GravityGrid.

    The records may arrive in any order; they are checked to cover a
    complete regular grid (one record per cell, uniform spacing within
    1e-9 relative) and reordered row-major by ascending lat then lon.

    Raises MalformedRecord, IrregularGrid, or EmptyInput.
    """
    lines = _as_text_lines(source)
    if not lines:
        raise EmptyInput("no content in input")
    if lines[0].strip() != CSV_HEADER:
        raise MalformedRecord(f"line 1: expected header {CSV_HEADER!r}, got {lines[0]!r}")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        records.append(_parse_record(i, line.strip()))
    if not records:
        raise EmptyInput("no data records after header")

    arr = np.array(records, dtype=float)
    lon0, dlon, n_lon = _infer_axis(arr[:, 0], "lon")
    lat0, dlat, n_lat = _infer_axis(arr[:, 1], "lat")
    if arr.shape[0] != n_lon * n_lat:
        raise IrregularGrid(
            f"{arr.shape[0]} records cannot fill a {n_lat}x{n_lon} grid "
            f"({n_lon * n_lat} cells)"
        )

    values = np.full((n_lat, n_lon), np.nan)
    for lon, lat, val in records:
        j = int(round((lon - lon0) / dlon))
        i = int(round((lat - lat0) / dlat))
        if not (0 <= i < n_lat and 0 <= j < n_lon):
            raise IrregularGrid(f"coordinate ({lon}, {lat}) falls outside the inferred grid")
        if abs(lon0 + j * dlon - lon) > SPACING_RTOL * max(abs(lon), 1.0) or abs(
            lat0 + i * dlat - lat
        ) > SPACING_RTOL * max(abs(lat), 1.0):
            raise IrregularGrid(f"coordinate ({lon}, {lat}) is off the inferred grid nodes")
        if not np.isnan(values[i, j]):
            raise IrregularGrid(f"duplicate record for cell ({lon}, {lat})")
        values[i, j] = val
    if np.isnan(values).any():
        raise IrregularGrid("grid has missing cells")

    spec = GridSpec(lon0=lon0, lat0=lat0, dlon=dlon, dlat=dlat, n_lon=n_lon, n_lat=n_lat)
    return GravityGrid(spec=spec, values=values)


def export_csv(grid: GravityGrid, stream) -> None:
    """Write a grid as `lon,lat,value` rows, row-major ascending lat then
    lon, LF line endings. Values use shortest round-trip decimal text, so
    ingest(export(g)) reproduces g's values bit-for-bit."""
    lons = grid.spec.lons()
    lats = grid.spec.lats()
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for i in range(grid.n_lat):
        for j in range(grid.n_lon):
            out.write(f"{lons[j]!r},{lats[i]!r},{grid.values[i, j]!r}\n")
    _write_text(stream, out.getvalue())


def read_grid_csv(path: str) -> GravityGrid:
    return ingest_csv(path)


def write_grid_csv(grid: GravityGrid, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        export_csv(grid, fh)


def read_samples_csv(source) -> ScatterSamples:
    """Parse `lon,lat,value` records as scatter samples (no regularity)."""
    lines = _as_text_lines(source)
    if not lines:
        raise EmptyInput("no content in input")
    if lines[0].strip() != CSV_HEADER:
        raise MalformedRecord(f"line 1: expected header {CSV_HEADER!r}, got {lines[0]!r}")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        records.append(_parse_record(i, line.strip()))
    if not records:
        raise EmptyInput("no data records after header")
    arr = np.array(records, dtype=float)
    return ScatterSamples(lons=arr[:, 0], lats=arr[:, 1], values=arr[:, 2])


def write_samples_csv(samples: ScatterSamples, stream) -> None:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for lon, lat, val in zip(samples.lons, samples.lats, samples.values):
        out.write(f"{lon!r},{lat!r},{val!r}\n")
    _write_text(stream, out.getvalue())


def _write_text(stream, text: str) -> None:
    if isinstance(stream, str):
        with open(stream, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    elif hasattr(stream, "write"):
        try:
            stream.write(text)
        except TypeError:
            stream.write(text.encode("utf-8"))
    else:
        raise TypeError(f"unsupported stream type {type(stream)!r}")


def synth_field(config: SynthConfig) -> GravityGrid:
    """Evaluate the synthetic anomaly field on its grid.

    value(lon, lat) = sum_k a_k * exp(-((lon-c_lon)^2 + (lat-c_lat)^2) / (2 w_k^2))
                      + a*lon + b*lat + c + eps,   eps ~ N(0, noise_std^2)

    Noise is drawn from a PCG64 generator seeded with `config.seed`, so a
    given config always produces the identical grid.
    """
    spec = config.grid_spec
    lon, lat = np.meshgrid(spec.lons(), spec.lats())
    vals = np.zeros_like(lon)
    for b in config.bumps:
        d2 = (lon - b.lon) ** 2 + (lat - b.lat) ** 2
        vals += b.amplitude * np.exp(-d2 / (2.0 * b.width**2))
    a, b_, c = config.trend
    vals += a * lon + b_ * lat + c
    if config.noise_std > 0:
        rng = make_rng(config.seed)
        vals = vals + config.noise_std * rng.standard_normal(vals.shape)
    return GravityGrid(spec=spec, values=vals)


def subsample(grid: GravityGrid, keep_fraction: float, seed: int) -> ScatterSamples:
    """Draw a uniform random subset of grid cells as scatter samples.

    Keeps exactly ``round_half_up(keep_fraction * n_cells)`` cells
    (minimum 1), without replacement, deterministic per seed. Selected
    cells are returned in row-major cell order.
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise InvalidFraction(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    n_cells = grid.spec.n_cells
    n_keep = max(1, round_half_up(keep_fraction * n_cells))
    rng = make_rng(seed)
    chosen = np.sort(rng.permutation(n_cells)[:n_keep])
    coords = grid.cell_coords()[chosen]
    flat = grid.values.ravel()[chosen]
    return ScatterSamples(lons=coords[:, 0], lats=coords[:, 1], values=flat)


def random_synth_config(
    seed: int,
    grid_spec: GridSpec,
    n_bumps: int = 3,
    amplitude_range: tuple[float, float] = (8.0, 30.0),
    width_fraction: tuple[float, float] = (0.08, 0.25),
    noise_std: float = 0.0,
    trend: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> SynthConfig:
    """Generate a seeded random SynthConfig with bumps inside the extents.

    Convenience for benchmark regions: bump centers land in the central
    80% of the grid, widths are the given fraction of the smaller extent.
    """
    rng = make_rng(seed)
    lon_span = grid_spec.dlon * (grid_spec.n_lon - 1)
    lat_span = grid_spec.dlat * (grid_spec.n_lat - 1)
    span = min(lon_span, lat_span)
    bumps = []
    for _ in range(n_bumps):
        lon = grid_spec.lon0 + lon_span * rng.uniform(0.1, 0.9)
        lat = grid_spec.lat0 + lat_span * rng.uniform(0.1, 0.9)
        amp = rng.uniform(*amplitude_range) * rng.choice([-1.0, 1.0])
        width = span * rng.uniform(*width_fraction)
        bumps.append(Bump(lon=lon, lat=lat, amplitude=amp, width=width))
    return SynthConfig(
        grid_spec=grid_spec,
        bumps=tuple(bumps),
        trend=trend,
        noise_std=noise_std,
        seed=seed,
    )
