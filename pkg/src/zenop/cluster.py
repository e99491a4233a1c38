"""Representative days and descriptive statistics of a scenario year."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.cluster import KMeans

from .domain import HOURS_PER_DAY, LOAD_ROLES, WEATHER_ROLES, Block, HourlyProfile
from .ingest import ScenarioYear

N_RESTARTS = 10


@dataclass
class ClusterSet:
    """k representative days with occurrence counts.

    ``day_assignment[i]`` is the cluster of day ``start_day + i``.
    """

    k: int
    centroids: dict[str, np.ndarray]  # role -> (k, 24)
    sigma: np.ndarray
    day_assignment: np.ndarray
    start_day: int = 0

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=int)
        self.day_assignment = np.asarray(self.day_assignment, dtype=int)
        if len(self.sigma) != self.k:
            raise ValueError("sigma length differs from k")
        if self.k and np.any(np.bincount(self.day_assignment, minlength=self.k) != self.sigma):
            raise ValueError("sigma does not match the day assignment")
        for role, c in self.centroids.items():
            if c.shape != (self.k, HOURS_PER_DAY):
                raise ValueError(f"centroid {role} has shape {c.shape}")

    @property
    def n_days(self) -> int:
        return int(self.sigma.sum())

    def to_profile(self) -> HourlyProfile:
        k = self.k

        def flat(role):
            return self.centroids[role].reshape(-1) if k else np.zeros(0)

        buildings = sorted({r.split(":")[0] for r in self.centroids if ":" in r})
        return HourlyProfile(
            spot=flat("spot"),
            co2_el=flat("co2_el"),
            temperature=flat("temperature"),
            irradiance=flat("irradiance"),
            loads={b: {r: flat(f"{b}:{r}") for r in LOAD_ROLES} for b in buildings},
            weight=np.repeat(self.sigma.astype(float), HOURS_PER_DAY),
            blocks=[Block(i * HOURS_PER_DAY, HOURS_PER_DAY, cyclic=True) for i in range(k)],
            hour=np.full(k * HOURS_PER_DAY, -1),
            cluster=np.repeat(np.arange(k), HOURS_PER_DAY),
        )

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "start_day": self.start_day,
            "sigma": self.sigma.tolist(),
            "day_assignment": self.day_assignment.tolist(),
            "centroids": {r: c.tolist() for r, c in self.centroids.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterSet":
        return cls(
            k=d["k"],
            centroids={r: np.asarray(c, dtype=float).reshape(d["k"], HOURS_PER_DAY) for r, c in d["centroids"].items()},
            sigma=np.asarray(d["sigma"], dtype=int),
            day_assignment=np.asarray(d["day_assignment"], dtype=int),
            start_day=d.get("start_day", 0),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ClusterSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _day_matrix(scenario: ScenarioYear, start_day: int) -> tuple[list[str], dict[str, np.ndarray]]:
    roles = scenario.roles()
    days = {r: scenario.series(r).reshape(-1, HOURS_PER_DAY)[start_day:] for r in roles}
    return roles, days


def _normalised_features(roles, days) -> np.ndarray:
    feats = []
    for r in roles:
        x = days[r]
        std = x.std()
        feats.append((x - x.mean()) / (std if std > 0 else 1.0))
    return np.hstack(feats)


def _relabel(labels: np.ndarray) -> np.ndarray:
    # clusters numbered by first occurrence, so results do not depend on k-means label order
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(labels.max() + 1, dtype=int)
    remap[np.unique(labels)[order]] = np.arange(len(order))
    return remap[labels]


def _from_labels(roles, days, labels, start_day) -> ClusterSet:
    labels = _relabel(labels)
    k = int(labels.max()) + 1
    sigma = np.bincount(labels, minlength=k)
    centroids = {r: np.vstack([days[r][labels == c].mean(axis=0) for c in range(k)]) for r in roles}
    return ClusterSet(k, centroids, sigma, labels, start_day)


def cluster_days(scenario: ScenarioYear, k: int, seed: int = 0, start_day: int = 0) -> ClusterSet:
    """k-means on per-role z-normalised daily profiles; centroids in original units."""
    n_days = scenario.n_days - start_day
    if k <= 0:
        raise ValueError("k must be positive")
    if k > n_days:
        raise ValueError(f"k={k} exceeds the {n_days} available days")
    roles, days = _day_matrix(scenario, start_day)
    if k == n_days:
        return _from_labels(roles, days, np.arange(n_days), start_day)
    feats = _normalised_features(roles, days)
    with warnings.catch_warnings():
        # identical days make k-means report fewer distinct clusters than k
        warnings.simplefilter("ignore")
        km = KMeans(n_clusters=k, n_init=N_RESTARTS, random_state=seed).fit(feats)
    return _from_labels(roles, days, _polish(feats, km.labels_), start_day)


def _polish(feats: np.ndarray, labels: np.ndarray, max_iter: int = 100) -> np.ndarray:
    """Lloyd steps until every day is nearest to the mean of its own cluster.

    k-means stops on a centroid tolerance, which can leave a few days closer
    to another cluster's mean; the centroids used downstream are exact means.
    """
    labels = _relabel(labels)
    for _ in range(max_iter):
        k = labels.max() + 1
        means = np.vstack([feats[labels == c].mean(axis=0) for c in range(k)])
        d2 = ((feats[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        own = d2[np.arange(len(labels)), labels]
        new = np.where(d2.min(axis=1) < own - 1e-12, d2.argmin(axis=1), labels)
        if np.array_equal(new, labels) or len(np.unique(new)) < k:
            break
        labels = new
    return labels


def recluster_remainder(scenario: ScenarioYear, start_day: int, k: int = 30, seed: int = 0) -> ClusterSet:
    """Cluster only the days from ``start_day`` to year end; empty set if none remain."""
    remaining = scenario.n_days - start_day
    if remaining <= 0:
        return ClusterSet(0, {r: np.zeros((0, HOURS_PER_DAY)) for r in scenario.roles()}, np.zeros(0), np.zeros(0),
                          start_day)
    return cluster_days(scenario, min(k, remaining), seed, start_day)


def within_cluster_ss(scenario: ScenarioYear, clusters: ClusterSet) -> float:
    roles, days = _day_matrix(scenario, clusters.start_day)
    feats = _normalised_features(roles, days)
    lab = clusters.day_assignment
    return float(sum(((feats[lab == c] - feats[lab == c].mean(axis=0)) ** 2).sum() for c in range(clusters.k)))


# --------------------------------------------------------------------------
# statistics


@dataclass
class BoxStats:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: np.ndarray


@dataclass
class SeriesStats:
    duration_curve: np.ndarray
    box: BoxStats
    bin_edges: np.ndarray
    density: np.ndarray


def series_stats(values, bins: int = 50) -> SeriesStats:
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    box = BoxStats(q1, med, q3, inside.min(), inside.max(), np.sort(v[(v < lo_fence) | (v > hi_fence)]))
    if np.ptp(v) == 0:
        edges = np.array([v[0] - 0.5, v[0] + 0.5])
        density = np.array([1.0])
    else:
        density, edges = np.histogram(v, bins=bins, density=True)
    return SeriesStats(np.sort(v)[::-1], box, edges, density)


def year_stats(scenario: ScenarioYear, roles=WEATHER_ROLES, bins: int = 50) -> dict[str, SeriesStats]:
    return {r: series_stats(scenario.series(r), bins) for r in roles}


def write_year_stats(stats: dict[str, SeriesStats], out_dir) -> list[Path]:
    """One CSV per role and chart type: duration, boxplot, density."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for role, s in stats.items():
        name = role.replace(":", "_")
        p = out / f"{name}_duration.csv"
        pd.DataFrame({"exceedance_hours": np.arange(1, len(s.duration_curve) + 1), "value": s.duration_curve}).to_csv(
            p, index=False
        )
        written.append(p)
        p = out / f"{name}_boxplot.csv"
        b = s.box
        rows = [("q1", b.q1), ("median", b.median), ("q3", b.q3), ("whisker_low", b.whisker_low),
                ("whisker_high", b.whisker_high)] + [("outlier", o) for o in b.outliers]
        pd.DataFrame(rows, columns=["stat", "value"]).to_csv(p, index=False)
        written.append(p)
        p = out / f"{name}_density.csv"
        pd.DataFrame({"bin_left": s.bin_edges[:-1], "bin_right": s.bin_edges[1:], "density": s.density}).to_csv(
            p, index=False
        )
        written.append(p)
    return written
