"""Synthetic load panels with planted smooth factors and site clusters.

Desk-scale generator used by the recovery, clustering and smooth-vs-baseline
tests.  Signatures are mixtures of raised-cosine bumps on [0, 24) (periodic
and smooth by construction), thermal activations are logistic ramps or
U-shapes over the temperature range, and site activations follow per-cluster
templates with multiplicative jitter.

Daily temperatures are a seasonal sinusoid plus noise, snapped to the
quantization resolution before the loads are generated; every day in a
(temperature bin, regime) cell therefore sees exactly the same model curve,
so a noiseless panel assembles into a tensor of exactly the planted rank.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .panel import LoadPanel, snap_temperature

THERMAL_KINDS = ("cold_ramp", "warm_ramp", "u_shape", "flat")


@dataclass
class PlantSpec:
    """Recipe for one synthetic panel.

    ``peak_hours`` lists one (center, width) bump per component; ``thermal_kinds``
    picks the temperature response per component.  Both default to a spread of
    distinct shapes.  ``templates`` holds one nonnegative activation template of
    length ``regime_count * rank`` per cluster; sites jitter multiplicatively
    around their cluster template by ``activation_jitter``.  ``noise_sd`` is
    relative to the mean generated load; noise is truncated at zero.
    """

    rank: int = 3
    intraday_points: int = 24
    n_sites: int = 24
    n_days: int = 90
    regime_count: int = 1
    temp_range: tuple[float, float] = (-5.0, 30.0)
    temp_resolution: float = 1.0
    peak_hours: tuple[tuple[float, float], ...] | None = None
    thermal_kinds: tuple[str, ...] | None = None
    n_clusters: int = 3
    templates: np.ndarray | None = None
    activation_jitter: float = 0.05
    noise_sd: float = 0.0
    shuffle_days: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1 or self.n_sites < 1 or self.n_days < 1:
            raise ValueError("rank, n_sites and n_days must be positive")
        if self.regime_count not in (1, 2):
            raise ValueError("the generator supports 1 or 2 regimes")
        if self.n_clusters > self.n_sites:
            raise ValueError("more clusters than sites")
        if self.temp_range[0] >= self.temp_range[1]:
            raise ValueError("empty temperature range")
        if self.peak_hours is None:
            self.peak_hours = tuple(
                (24.0 * (r + 0.5) / self.rank, 6.0 + 2.0 * (r % 3)) for r in range(self.rank)
            )
        if len(self.peak_hours) != self.rank:
            raise ValueError("need one (center, width) bump per component")
        if self.thermal_kinds is None:
            self.thermal_kinds = tuple(THERMAL_KINDS[r % len(THERMAL_KINDS)] for r in range(self.rank))
        if len(self.thermal_kinds) != self.rank:
            raise ValueError("need one thermal kind per component")
        for kind in self.thermal_kinds:
            if kind not in THERMAL_KINDS:
                raise ValueError(f"unknown thermal kind {kind!r}")
        if self.templates is None:
            self.templates = default_templates(self.n_clusters, self.regime_count, self.rank)
        self.templates = np.asarray(self.templates, float)
        if self.templates.shape != (self.n_clusters, self.regime_count * self.rank):
            raise ValueError(
                f"templates shape {self.templates.shape} != "
                f"{(self.n_clusters, self.regime_count * self.rank)}"
            )
        if np.any(self.templates < 0):
            raise ValueError("templates must be nonnegative")
        # clusters must stay separable despite the jitter
        if self.n_clusters > 1:
            gaps = [
                np.linalg.norm(self.templates[g] - self.templates[h])
                for g in range(self.n_clusters) for h in range(g)
            ]
            spread = self.activation_jitter * float(np.linalg.norm(self.templates, axis=1).max())
            if min(gaps) < 5.0 * spread:
                raise ValueError("cluster templates closer than 5x the activation jitter")


@dataclass
class PlantedTruth:
    """Ground truth accompanying a generated panel."""

    A: np.ndarray              # (I, R) signatures sampled on the intraday grid
    B: np.ndarray              # (K, R) thermal activations on temp_grid
    C: np.ndarray              # (E*N, R) site activations
    temp_grid: np.ndarray      # (K,) snapped temperatures present in the panel
    labels: np.ndarray         # (N,) planted cluster label per site
    templates: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


def default_templates(n_clusters: int, regime_count: int, rank: int) -> np.ndarray:
    """Well-separated nonnegative templates: a common base plus one strong
    component block per cluster (cycled when clusters exceed components)."""
    width = regime_count * rank
    templates = np.full((n_clusters, width), 0.3)
    for g in range(n_clusters):
        for e in range(regime_count):
            templates[g, e * rank + (g % rank)] += 1.5 + 0.3 * e
    return templates


def raised_cosine_bump(hours: np.ndarray, center: float, width: float) -> np.ndarray:
    """Smooth 24-periodic bump: 0.5*(1 + cos(pi d / halfwidth)) inside the
    window, 0 outside, with d the wrapped distance to the center."""
    d = np.abs((hours - center + 12.0) % 24.0 - 12.0)
    half = width / 2.0
    out = np.zeros_like(hours, dtype=float)
    inside = d < half
    out[inside] = 0.5 * (1.0 + np.cos(np.pi * d[inside] / half))
    return out


def thermal_curve(temps: np.ndarray, kind: str, temp_range: tuple[float, float]) -> np.ndarray:
    """Nonnegative smooth temperature response of the requested kind."""
    lo, hi = temp_range
    mid = (lo + hi) / 2.0
    scale = (hi - lo) / 8.0
    t = np.asarray(temps, float)
    if kind == "cold_ramp":
        return 1.0 / (1.0 + np.exp((t - mid) / scale))
    if kind == "warm_ramp":
        return 1.0 / (1.0 + np.exp(-(t - mid) / scale))
    if kind == "u_shape":
        lowside = 1.0 / (1.0 + np.exp((t - (mid - 2 * scale)) / scale))
        highside = 1.0 / (1.0 + np.exp(-(t - (mid + 2 * scale)) / scale))
        return lowside + highside
    if kind == "flat":
        return np.ones_like(t)
    raise ValueError(f"unknown thermal kind {kind!r}")


def generate(spec: PlantSpec) -> tuple[LoadPanel, PlantedTruth]:
    """Generate a panel from planted factors; returns panel and ground truth.

    Deterministic in ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    I, J, N, E, R = (spec.intraday_points, spec.n_days, spec.n_sites,
                     spec.regime_count, spec.rank)
    hours = 24.0 * np.arange(I) / I

    A = np.column_stack([
        raised_cosine_bump(hours, center, width) + 0.05
        for center, width in spec.peak_hours
    ])

    # seasonal temperatures, shared across sites, snapped to the bin grid
    lo, hi = spec.temp_range
    mid, amp = (lo + hi) / 2.0, (hi - lo) / 2.0 * 0.85
    season = mid + amp * np.sin(2.0 * np.pi * np.arange(J) / max(J, 2) - np.pi / 2)
    temps_day = season + rng.normal(0.0, (hi - lo) * 0.04, size=J)
    if spec.shuffle_days:
        temps_day = temps_day[rng.permutation(J)]
    temps = np.clip(np.tile(temps_day[:, None], (1, N)), lo, hi)
    temps = snap_temperature(temps, spec.temp_resolution)

    regimes = np.ones((J, N), dtype=int)
    if E == 2:
        weekend = (np.arange(J) % 7) >= 5
        regimes[weekend, :] = 2

    labels = rng.permutation(np.arange(N) % spec.n_clusters)
    C = np.empty((E * N, R))
    for n in range(N):
        jitter = 1.0 + spec.activation_jitter * rng.uniform(-1.0, 1.0, size=E * R)
        site_vec = spec.templates[labels[n]] * jitter
        for e in range(E):
            C[e * N + n, :] = site_vec[e * R:(e + 1) * R]

    loads = np.zeros((J, N, I))
    b_of_t = np.column_stack([
        thermal_curve(temps[:, 0], kind, spec.temp_range) for kind in spec.thermal_kinds
    ])  # (J, R); temperatures are shared across sites
    for n in range(N):
        act = C[(regimes[:, n] - 1) * N + n, :]          # (J, R)
        loads[:, n, :] = (b_of_t * act) @ A.T

    if spec.noise_sd > 0:
        sd = spec.noise_sd * float(loads.mean())
        loads = np.maximum(loads + rng.normal(0.0, sd, size=loads.shape), 0.0)

    panel = LoadPanel(
        intraday_grid=hours,
        sites=[f"site{n:03d}" for n in range(N)],
        days=[f"d{j:04d}" for j in range(J)],
        loads=loads,
        temps=temps,
        regimes=regimes,
        regime_count=E,
        mask=np.ones((J, N), dtype=bool),
    )

    temp_grid = np.unique(temps)
    B = np.column_stack([
        thermal_curve(temp_grid, kind, spec.temp_range) for kind in spec.thermal_kinds
    ])
    truth = PlantedTruth(A=A, B=B, C=C, temp_grid=temp_grid, labels=labels,
                         templates=spec.templates)
    return panel, truth
