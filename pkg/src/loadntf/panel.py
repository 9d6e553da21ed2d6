"""Observed load panel: normalization, temperature binning, tensor assembly.

The panel holds daily load curves ``loads[j, n, i]`` sampled on a common
intra-day grid, one daily mean temperature ``temps[j, n]`` and one discrete
consumption regime ``regimes[j, n]`` per (day, site).  Days can be missing
per site (``mask``).

``assemble_tensors`` turns the panel into the weighted tensor pair the solver
consumes: per (site, temperature bin, regime) cell, ``w`` is the square root
of the day count and ``x`` the average of the matching day curves, with the
0/0 = 0 convention for empty cells.  Averaging days inside a bin discards
their within-bin spread; that spread is a data-only constant, returned as a
diagnostic so objective values can be reported on the raw per-day scale:

    sum_{i,j,n} (load - model)^2  ==  |w o (x - model)|_F^2  +  constant

``functional_objective`` evaluates the left-hand side directly by summation
over days and serves as the independent check of that identity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from . import splinequad
from .errors import (
    DegenerateSiteError,
    GridTooCoarseError,
    InternalInconsistencyError,
    InvalidGridError,
    PanelFormatError,
)

if TYPE_CHECKING:  # pragma: no cover
    from .solver import FactorSet

DEFAULT_TEMP_RESOLUTION = 1.0
DAY_HOURS = 24.0


@dataclass
class LoadPanel:
    """Multi-site panel of daily load curves with covariates.

    Attributes
    ----------
    intraday_grid : (I,) float array, hours in [0, 24), strictly increasing.
    sites : list of site identifiers (length N).
    days : list of opaque day labels (length J).
    loads : (J, N, I) float array, kW or unitless after normalization.
    temps : (J, N) float array, daily mean temperature per (day, site).
    regimes : (J, N) int array, 1-based regime index.
    regime_count : number of regimes E.
    mask : (J, N) bool array, True where the day is observed.

    A day containing any non-finite load sample is dropped entirely (the
    whole (j, n) cell is masked); per-point missingness is not represented.
    """

    intraday_grid: np.ndarray
    sites: list[str]
    days: list[str]
    loads: np.ndarray
    temps: np.ndarray
    regimes: np.ndarray
    regime_count: int
    mask: np.ndarray

    def __post_init__(self):
        self.intraday_grid = np.asarray(self.intraday_grid, dtype=float)
        self.loads = np.asarray(self.loads, dtype=float)
        self.temps = np.asarray(self.temps, dtype=float)
        self.regimes = np.asarray(self.regimes, dtype=int)
        self.mask = np.asarray(self.mask, dtype=bool)

        grid = self.intraday_grid
        if grid.ndim != 1 or grid.size < 1:
            raise InvalidGridError("intraday grid must be a non-empty 1-d array")
        if grid[0] < 0 or grid[-1] >= DAY_HOURS or np.any(np.diff(grid) <= 0):
            raise InvalidGridError("intraday grid must be strictly increasing within [0, 24)")

        J, N, I = len(self.days), len(self.sites), grid.size
        if self.loads.shape != (J, N, I):
            raise ValueError(f"loads shape {self.loads.shape} != {(J, N, I)}")
        for name, arr in (("temps", self.temps), ("regimes", self.regimes), ("mask", self.mask)):
            if arr.shape != (J, N):
                raise ValueError(f"{name} shape {arr.shape} != {(J, N)}")

        # conservative missingness: one bad sample invalidates the day
        bad = ~np.all(np.isfinite(self.loads), axis=2)
        self.mask = self.mask & ~bad

        obs = self.mask
        if not np.all(np.isfinite(self.temps[obs])):
            raise ValueError("observed days must carry a finite temperature")
        if obs.any():
            r = self.regimes[obs]
            if r.min() < 1 or r.max() > self.regime_count:
                raise ValueError(f"regimes must lie in 1..{self.regime_count}")

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_days(self) -> int:
        return len(self.days)


@dataclass
class WeightedTensorPair:
    """Weight and data tensors of shape (I, K, E*N) plus their grid.

    ``w[i, k, m]`` is the square root of the number of days of site ``n`` in
    regime ``eps`` whose temperature fell in bin ``k`` (``m = (eps-1)*N + n``,
    constant in ``i``); ``x`` is the average load of those days, zero where
    ``w`` is zero.  ``within_bin_variance`` is the data-only constant that
    separates the per-day squared loss from the weighted tensor loss.
    """

    w: np.ndarray
    x: np.ndarray
    temp_grid: np.ndarray
    within_bin_variance: float


def normalize_by_daily_mean(panel: LoadPanel) -> tuple[LoadPanel, np.ndarray]:
    """Scale each site by its average daily consumption.

    The scale of site ``n`` is the mean over its observed days of the day's
    mean load.  Returns the normalized panel and the per-site scales that
    invert the transform.  Applying the normalization twice is a no-op.

    Raises
    ------
    DegenerateSiteError
        If a site has no observed day or a zero average consumption.
    """
    scales = np.empty(panel.n_sites)
    for n, site in enumerate(panel.sites):
        obs = panel.mask[:, n]
        if not obs.any():
            raise DegenerateSiteError(site, "no observed days")
        day_means = panel.loads[obs, n, :].mean(axis=1)
        scale = float(day_means.mean())
        if scale == 0.0:
            raise DegenerateSiteError(site, "all-zero load, cannot normalize")
        scales[n] = scale
    normalized = replace(panel, loads=panel.loads / scales[None, :, None])
    return normalized, scales


def snap_temperature(temps, resolution: float = DEFAULT_TEMP_RESOLUTION) -> np.ndarray:
    """Round temperatures to the nearest multiple of ``resolution``."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    return np.round(np.asarray(temps, dtype=float) / resolution) * resolution


def build_temperature_grid(panel: LoadPanel, resolution: float = DEFAULT_TEMP_RESOLUTION) -> np.ndarray:
    """Quantized grid of observed temperatures: sorted unique rounded values.

    Raises
    ------
    GridTooCoarseError
        If fewer than two distinct bins survive the rounding.
    """
    snapped = snap_temperature(panel.temps[panel.mask], resolution)
    grid = np.unique(snapped)
    if grid.size < 2:
        raise GridTooCoarseError(
            f"temperature grid has {grid.size} bin(s) at resolution {resolution}; need at least 2"
        )
    return grid


def temperature_bins(panel: LoadPanel, temp_grid: np.ndarray,
                     resolution: float = DEFAULT_TEMP_RESOLUTION) -> np.ndarray:
    """Map every observed temperature to its bin index on ``temp_grid``.

    Returns a (J, N) int array; masked cells hold -1.  A temperature whose
    rounded value is absent from the grid is an internal inconsistency (the
    grid is supposed to be built from the same panel and resolution).
    """
    temp_grid = np.asarray(temp_grid, dtype=float)
    bins = np.full(panel.temps.shape, -1, dtype=int)
    snapped = snap_temperature(panel.temps, resolution)
    js, ns = np.nonzero(panel.mask)
    idx = np.searchsorted(temp_grid, snapped[js, ns])
    idx = np.clip(idx, 0, temp_grid.size - 1)
    ok = temp_grid[idx] == snapped[js, ns]
    if not ok.all():
        j, n = js[~ok][0], ns[~ok][0]
        raise InternalInconsistencyError(
            f"temperature {panel.temps[j, n]} of (day {panel.days[j]!r}, site "
            f"{panel.sites[n]!r}) rounds off the grid"
        )
    bins[js, ns] = idx
    return bins


def assemble_tensors(panel: LoadPanel, temp_grid: np.ndarray,
                     resolution: float = DEFAULT_TEMP_RESOLUTION) -> WeightedTensorPair:
    """Aggregate the panel into the weighted tensor pair (w, x).

    Cells with no matching day get ``w = x = 0`` (the 0/0 = 0 convention).
    """
    temp_grid = np.asarray(temp_grid, dtype=float)
    I = panel.intraday_grid.size
    K = temp_grid.size
    N, E = panel.n_sites, panel.regime_count
    bins = temperature_bins(panel, temp_grid, resolution)

    counts = np.zeros((K, E * N))
    sums = np.zeros((I, K, E * N), order="F")
    js, ns = np.nonzero(panel.mask)
    for j, n in zip(js, ns):
        m = (panel.regimes[j, n] - 1) * N + n
        k = bins[j, n]
        counts[k, m] += 1.0
        sums[:, k, m] += panel.loads[j, n, :]

    w = np.broadcast_to(np.sqrt(counts), (I, K, E * N))
    w = np.asfortranarray(w)
    with np.errstate(invalid="ignore"):
        x = np.where(counts > 0, sums / np.where(counts > 0, counts, 1.0), 0.0)
    x = np.asfortranarray(x)

    # data-only constant: squared spread of the day curves around their bin mean
    var = 0.0
    for j, n in zip(js, ns):
        m = (panel.regimes[j, n] - 1) * N + n
        k = bins[j, n]
        var += float(np.sum((panel.loads[j, n, :] - x[:, k, m]) ** 2))
    return WeightedTensorPair(w=w, x=x, temp_grid=temp_grid, within_bin_variance=var)


def functional_objective(panel: LoadPanel, factors: "FactorSet", temp_grid: np.ndarray,
                         splines: splinequad.SplinePair, alpha: float, beta: float,
                         resolution: float = DEFAULT_TEMP_RESOLUTION) -> float:
    """Penalized per-day squared loss, evaluated by direct summation.

    This is the slow, definition-level evaluation over all observed
    ``(i, j, n)`` triples; it is the reference the tensor-space objective is
    checked against (they differ by the within-bin variance constant).
    """
    A, B, C = factors.A, factors.B, factors.C
    N = panel.n_sites
    if A.shape[0] != panel.intraday_grid.size:
        raise ValueError("factor A does not match the intraday grid")
    if B.shape[0] != np.asarray(temp_grid).size:
        raise ValueError("factor B does not match the temperature grid")
    bins = temperature_bins(panel, temp_grid, resolution)

    total = 0.0
    js, ns = np.nonzero(panel.mask)
    for j, n in zip(js, ns):
        m = (panel.regimes[j, n] - 1) * N + n
        model = A @ (B[bins[j, n], :] * C[m, :])
        total += float(np.sum((panel.loads[j, n, :] - model) ** 2))

    pen_a = sum(splinequad.penalty(splines.intraday, A[:, r]) for r in range(A.shape[1]))
    pen_b = sum(splinequad.penalty(splines.temperature, B[:, r]) for r in range(B.shape[1]))
    return total + alpha * pen_a + beta * pen_b


# ---------------------------------------------------------------------------
# CSV panel format
#
# loads:   site,day,time,load     (time as HH:MM)
# temps:   site,day,temp
# regimes: site,day,regime        (1-based)
#
# A (site, day) pair missing from any required file is a masked day.
# ---------------------------------------------------------------------------

def _parse_time(text: str, path: str, line: int) -> float:
    parts = text.strip().split(":")
    if len(parts) != 2:
        raise PanelFormatError(path, line, f"time {text!r} is not HH:MM")
    try:
        hh, mm = int(parts[0]), int(parts[1])
    except ValueError:
        raise PanelFormatError(path, line, f"time {text!r} is not HH:MM") from None
    if not (0 <= hh < 24 and 0 <= mm < 60):
        raise PanelFormatError(path, line, f"time {text!r} outside the day")
    return hh + mm / 60.0


def _format_time(hour: float) -> str:
    total = int(round(hour * 60.0))
    return f"{total // 60:02d}:{total % 60:02d}"


def _read_rows(path: str, expected_header: list[str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelFormatError(path, 1, "empty file") from None
        if [c.strip() for c in header] != expected_header:
            raise PanelFormatError(path, 1, f"expected header {','.join(expected_header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise PanelFormatError(path, lineno, f"expected {len(expected_header)} columns, got {len(row)}")
            yield lineno, row


def _parse_float(text: str, path: str, line: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise PanelFormatError(path, line, f"bad {what} value {text!r}") from None


def read_panel_csvs(loads_path: str, temps_path: str | None = None,
                    regimes_path: str | None = None) -> LoadPanel:
    """Read the long-format CSV panel into a :class:`LoadPanel`.

    Sites, days and intra-day times are the sorted unique values found in the
    loads file.  A day observed in the loads file but lacking a temperature
    (or regime, when a regime file is given) row is masked.  Without a
    temperature file all temperatures are 0; without a regime file there is a
    single regime.
    """
    cells: dict[tuple[str, str], dict[float, float]] = {}
    for lineno, row in _read_rows(loads_path, ["site", "day", "time", "load"]):
        site, day = row[0].strip(), row[1].strip()
        t = _parse_time(row[2], loads_path, lineno)
        val = _parse_float(row[3], loads_path, lineno, "load")
        cells.setdefault((site, day), {})[t] = val

    if not cells:
        raise PanelFormatError(loads_path, 2, "no data rows")
    sites = sorted({s for s, _ in cells})
    days = sorted({d for _, d in cells})
    grid = np.array(sorted({t for v in cells.values() for t in v}))

    J, N, I = len(days), len(sites), grid.size
    loads = np.zeros((J, N, I))
    mask = np.zeros((J, N), dtype=bool)
    site_idx = {s: n for n, s in enumerate(sites)}
    day_idx = {d: j for j, d in enumerate(days)}
    for (site, day), series in cells.items():
        if len(series) != I:
            continue  # partial day: masked
        j, n = day_idx[day], site_idx[site]
        loads[j, n, :] = [series[t] for t in grid]
        mask[j, n] = True

    temps = np.zeros((J, N))
    if temps_path is not None:
        temps[:] = np.nan
        for lineno, row in _read_rows(temps_path, ["site", "day", "temp"]):
            site, day = row[0].strip(), row[1].strip()
            val = _parse_float(row[2], temps_path, lineno, "temp")
            if site in site_idx and day in day_idx:
                temps[day_idx[day], site_idx[site]] = val
        mask &= np.isfinite(temps)

    regimes = np.ones((J, N), dtype=int)
    regime_count = 1
    if regimes_path is not None:
        seen = np.zeros((J, N), dtype=bool)
        for lineno, row in _read_rows(regimes_path, ["site", "day", "regime"]):
            site, day = row[0].strip(), row[1].strip()
            try:
                r = int(row[2])
            except ValueError:
                raise PanelFormatError(regimes_path, lineno, f"bad regime value {row[2]!r}") from None
            if r < 1:
                raise PanelFormatError(regimes_path, lineno, f"regime must be >= 1, got {r}")
            if site in site_idx and day in day_idx:
                regimes[day_idx[day], site_idx[site]] = r
                seen[day_idx[day], site_idx[site]] = True
        mask &= seen
        regime_count = int(regimes[mask].max()) if mask.any() else 1

    temps = np.where(np.isfinite(temps), temps, 0.0)
    return LoadPanel(intraday_grid=grid, sites=sites, days=days, loads=loads,
                     temps=temps, regimes=regimes, regime_count=regime_count, mask=mask)


def write_panel_csvs(panel: LoadPanel, loads_path: str, temps_path: str | None = None,
                     regimes_path: str | None = None) -> None:
    """Write a panel in the CSV format read by :func:`read_panel_csvs`.

    Values are written with 17 significant digits, so a write/read round
    trip reproduces the panel bit-exactly.
    """
    with open(loads_path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["site", "day", "time", "load"])
        for j, day in enumerate(panel.days):
            for n, site in enumerate(panel.sites):
                if not panel.mask[j, n]:
                    continue
                for i, u in enumerate(panel.intraday_grid):
                    out.writerow([site, day, _format_time(u), format(panel.loads[j, n, i], ".17g")])
    if temps_path is not None:
        with open(temps_path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["site", "day", "temp"])
            for j, day in enumerate(panel.days):
                for n, site in enumerate(panel.sites):
                    if panel.mask[j, n]:
                        out.writerow([site, day, format(panel.temps[j, n], ".17g")])
    if regimes_path is not None:
        with open(regimes_path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["site", "day", "regime"])
            for j, day in enumerate(panel.days):
                for n, site in enumerate(panel.sites):
                    if panel.mask[j, n]:
                        out.writerow([site, day, panel.regimes[j, n]])
