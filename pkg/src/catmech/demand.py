"""Demand populations, utility models, and the full-information benchmark.

A demand type is a point t in R^d.  Utilities are separable across resource
dimensions and peak at r = t, so the full-information allocation is the
identity map and the benchmark welfare is d * u_max for every population.
Two utility families are supported:

  quadratic-offset   u(t, r) = sum_i (u_max - (r_i - t_i)^2)
  quartic-perturbed  u(t, r) = sum_i (u_max - (r_i - t_i)^2 - kappa (r_i - t_i)^4)

The quadratic family has equal curvature constants (alpha = beta = 2); the
quartic family has alpha = 2 and beta = 2 + 12 * kappa * D^2 on the domain
|r_i - t_i| <= D, which makes the two-sided welfare bound strictly two-sided.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

QUADRATIC = "quadratic-offset"
QUARTIC = "quartic-perturbed"


@dataclass(frozen=True)
class UtilityModel:
    """Separable utility with an additive per-dimension offset.

    kind: QUADRATIC or QUARTIC.
    u_max: per-dimension utility at the optimum (keeps benchmark welfare positive).
    kappa: quartic coefficient (QUARTIC only).
    domain_halfwidth: bound D on |r_i - t_i| for the quartic family.
    """

    kind: str = QUADRATIC
    u_max: float = 1.0
    kappa: float = 0.0
    domain_halfwidth: float = 1.0

    def __post_init__(self):
        if self.kind not in (QUADRATIC, QUARTIC):
            raise ConfigError(f"unknown utility kind {self.kind!r}")
        if self.kind == QUARTIC:
            if self.kappa <= 0:
                raise ConfigError("quartic-perturbed utility requires kappa > 0")
            if self.domain_halfwidth <= 0:
                raise ConfigError("quartic-perturbed utility requires a positive domain half-width")

    @property
    def alpha(self) -> float:
        """Strong-concavity constant."""
        return 2.0

    @property
    def beta(self) -> float:
        """Gradient Lipschitz constant on the admissible domain."""
        if self.kind == QUADRATIC:
            return 2.0
        return 2.0 + 12.0 * self.kappa * self.domain_halfwidth ** 2


@dataclass(frozen=True)
class MixtureConfig:
    """Labeled Gaussian mixture over the demand space.

    means: (L, d) component means.  stds: (L, d) per-component, per-dimension
    standard deviations.  weights: (L,) mixing weights summing to one.
    """

    means: np.ndarray
    stds: np.ndarray
    weights: np.ndarray
    n_samples: int

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        stds = np.asarray(self.stds, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        object.__setattr__(self, "weights", weights)
        if means.ndim != 2:
            raise ConfigError("means must be an (L, d) array")
        if stds.shape != means.shape:
            raise ConfigError(f"stds shape {stds.shape} != means shape {means.shape}")
        if weights.shape != (means.shape[0],):
            raise ConfigError("weights must have one entry per component")
        if not np.all(np.isfinite(means)) or not np.all(np.isfinite(stds)):
            raise ConfigError("mixture parameters must be finite")
        if np.any(stds <= 0):
            raise ConfigError("component stds must be positive")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ConfigError(f"weights must sum to 1, got {float(weights.sum())!r}")
        if np.any(weights < 0):
            raise ConfigError("weights must be non-negative")
        if self.n_samples < 0:
            raise ConfigError("n_samples must be >= 0")

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class Population:
    """Sampled demand vectors with their traffic-type labels."""

    demands: np.ndarray          # (N, d)
    labels: np.ndarray           # (N,) ints in [0, L)
    seed: int
    n_label_classes: int = field(default=0)

    def __post_init__(self):
        demands = np.asarray(self.demands, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "demands", demands)
        object.__setattr__(self, "labels", labels)
        if demands.ndim != 2:
            raise ConfigError("demands must be an (N, d) array")
        if labels.shape != (demands.shape[0],):
            raise ConfigError("labels must have one entry per demand vector")
        n_classes = self.n_label_classes
        if n_classes == 0:
            n_classes = int(labels.max()) + 1 if labels.size else 0
            object.__setattr__(self, "n_label_classes", n_classes)
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise ConfigError("labels must lie in [0, n_label_classes)")

    @property
    def size(self) -> int:
        return self.demands.shape[0]

    @property
    def dim(self) -> int:
        return self.demands.shape[1]


def default_mixture(n_samples: int = 50_000, n_components: int = 5, dim: int = 4) -> MixtureConfig:
    """Default labeled mixture: one component near the centre of [0,1]^d and
    one pushed out along each axis, stds spread over 0.05-0.15, equal weights."""
    base = np.full((n_components, dim), 0.2)
    for k in range(1, n_components):
        base[k, (k - 1) % dim] = 0.8
    stds = np.linspace(0.05, 0.15, n_components)[:, None] * np.ones((1, dim))
    weights = np.full(n_components, 1.0 / n_components)
    return MixtureConfig(means=base, stds=stds, weights=weights, n_samples=n_samples)


def sample_population(cfg: MixtureConfig, seed: int) -> Population:
    """Draw cfg.n_samples labeled demand vectors, componentwise Gaussian.

    Bit-reproducible: the same (cfg, seed) always yields the same population.
    """
    rng = np.random.default_rng(seed)
    n, d = cfg.n_samples, cfg.dim
    if n == 0:
        return Population(demands=np.empty((0, d)), labels=np.empty(0, dtype=np.int64),
                          seed=seed, n_label_classes=cfg.n_components)
    labels = rng.choice(cfg.n_components, size=n, p=cfg.weights)
    noise = rng.standard_normal((n, d))
    demands = cfg.means[labels] + cfg.stds[labels] * noise
    return Population(demands=demands, labels=labels, seed=seed,
                      n_label_classes=cfg.n_components)


def fi_allocation(u: UtilityModel, t: np.ndarray) -> np.ndarray:
    """Full-information allocation for a single demand vector.

    Both supported families penalise |r - t| with an even, increasing
    per-dimension term, so the argmax is r = t exactly.
    """
    return np.array(t, dtype=float, copy=True)


def fi_allocations(u: UtilityModel, pop: Population) -> np.ndarray:
    """Full-information allocations for a whole population, shape (N, d)."""
    return np.array(pop.demands, dtype=float, copy=True)


def utility_eval(u: UtilityModel, t: np.ndarray, r: np.ndarray) -> float:
    """Utility of allocation r for demand type t."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if t.shape != r.shape:
        raise ValueError(f"dimension mismatch: t has shape {t.shape}, r has shape {r.shape}")
    dev = r - t
    if u.kind == QUARTIC:
        worst = float(np.max(np.abs(dev))) if dev.size else 0.0
        if worst > u.domain_halfwidth:
            raise ValueError(
                f"allocation outside utility domain: |r_i - t_i| = {worst} "
                f"> D = {u.domain_halfwidth}")
        return float(t.size * u.u_max - np.sum(dev ** 2) - u.kappa * np.sum(dev ** 4))
    return float(t.size * u.u_max - np.sum(dev ** 2))


def utility_profile_matrix(u: UtilityModel, demands: np.ndarray, profiles: np.ndarray) -> np.ndarray:
    """Utilities of every (agent, profile) pair, shape (N, K).

    Used by the mechanism evaluators; semantics match utility_eval, including
    the quartic domain check.
    """
    demands = np.asarray(demands, dtype=float)
    profiles = np.asarray(profiles, dtype=float)
    n, d = demands.shape
    k = profiles.shape[0]
    out = np.empty((n, k))
    for j in range(k):
        dev = profiles[j][None, :] - demands
        pen = np.sum(dev ** 2, axis=1)
        if u.kind == QUARTIC:
            worst = float(np.max(np.abs(dev))) if dev.size else 0.0
            if worst > u.domain_halfwidth:
                raise ValueError(
                    f"profile {j} outside utility domain: |r_i - t_i| = {worst} "
                    f"> D = {u.domain_halfwidth}")
            pen = pen + u.kappa * np.sum(dev ** 4, axis=1)
        out[:, j] = d * u.u_max - pen
    return out


def fi_welfare(u: UtilityModel, pop: Population) -> float:
    """Benchmark welfare: mean utility of the full-information allocation.

    Equals dim * u_max for both utility families (each agent sits at its
    optimum); still computed as a compensated sample mean so that the
    evaluation path matches the category-welfare path.
    """
    if pop.size == 0:
        raise ValueError("benchmark welfare is undefined for an empty population")
    per_agent = np.full(pop.size, pop.dim * u.u_max)
    return math.fsum(per_agent) / pop.size


def write_population_csv(pop: Population, path: str | Path) -> None:
    """Export as CSV with header label,t_0,...,t_{d-1} (full float precision)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["label"] + [f"t_{i}" for i in range(pop.dim)])
        for label, row in zip(pop.labels, pop.demands):
            w.writerow([int(label)] + [format(x, ".17g") for x in row])


def read_population_csv(path: str | Path, seed: int = 0) -> Population:
    """Inverse of write_population_csv."""
    path = Path(path)
    labels: list[int] = []
    rows: list[list[float]] = []
    with path.open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if not header or header[0] != "label":
            raise ConfigError(f"unexpected population header {header!r}")
        for rec in reader:
            labels.append(int(rec[0]))
            rows.append([float(x) for x in rec[1:]])
    demands = np.asarray(rows, dtype=float) if rows else np.empty((0, len(header) - 1))
    return Population(demands=demands, labels=np.asarray(labels, dtype=np.int64), seed=seed)
