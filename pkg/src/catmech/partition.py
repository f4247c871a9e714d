"""Category partitions over full-information allocations.

Two construction routes: k-means clustering of the allocation vectors
(nearest-centroid assignment) and the semantic baseline keyed on traffic-type
labels (by-label assignment).  Both deliver the conditional mean allocation
of their members as the category profile, so the aggregate within-category
variance eps is the single statistic the rest of the lab consumes.

The k-means sweep is warm-start nested: the solution at the next category
count is seeded with the previous converged profiles plus greedily added
farthest points, which guarantees eps is non-increasing along the sweep
(plain restarts cannot, because of local optima).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .demand import Population, UtilityModel, fi_allocation, fi_allocations
from .errors import ConfigError

NEAREST_CENTROID = "nearest-centroid"
BY_LABEL = "by-label"


@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 10
    max_iters: int = 100
    tol: float = 1e-8            # relative centroid-shift stop
    init: str = "kmeanspp"       # "kmeanspp" or "warm-start"
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.init not in ("kmeanspp", "warm-start"):
            raise ConfigError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class CategoryPartition:
    """K category profiles plus the statistics of the population they were built on."""

    n_categories: int
    centroids: np.ndarray        # (K, d) assignment anchors
    profiles: np.ndarray         # (K, d) conditional-mean allocations
    assignment_rule: str         # NEAREST_CENTROID or BY_LABEL
    member_counts: np.ndarray    # (K,)
    eps_k: np.ndarray            # (K,) within-category variances
    eps: float                   # probability-weighted aggregate
    probs: np.ndarray            # (K,) empirical category probabilities

    def __post_init__(self):
        if self.assignment_rule not in (NEAREST_CENTROID, BY_LABEL):
            raise ConfigError(f"unknown assignment rule {self.assignment_rule!r}")
        if self.centroids.shape != self.profiles.shape:
            raise ConfigError("centroids and profiles must have the same shape")
        if self.centroids.shape[0] != self.n_categories:
            raise ConfigError("centroid count must equal n_categories")
        total = float(self.probs.sum())
        if self.member_counts.sum() > 0 and abs(total - 1.0) > 1e-9:
            raise ConfigError(f"probs must sum to 1, got {total!r}")
        if np.any(self.eps_k < 0):
            raise ConfigError("eps_k must be non-negative")

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape (N, K); tiny negatives clipped."""
    d2 = (np.sum(points ** 2, axis=1)[:, None]
          - 2.0 * points @ centroids.T
          + np.sum(centroids ** 2, axis=1)[None, :])
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = _sq_dists(points, centers[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = points[idx]
        np.minimum(d2, _sq_dists(points, centers[j:j + 1]).ravel(), out=d2)
    return centers


def lloyd_iterate(points: np.ndarray, init_centroids: np.ndarray,
                  max_iters: int, tol: float) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd's algorithm from a given initialization.

    Returns (centroids, assignment, sse_history).  Assignment is
    nearest-centroid with smallest-index tie-break (argmin semantics); empty
    clusters are reseeded at the point currently farthest from its centroid,
    which keeps the per-iteration SSE non-increasing.
    """
    points = np.asarray(points, dtype=float)
    centroids = np.array(init_centroids, dtype=float, copy=True)
    k = centroids.shape[0]
    assignment = np.full(points.shape[0], -1, dtype=np.int64)
    sse_history: list[float] = []
    for _ in range(max_iters):
        d2 = _sq_dists(points, centroids)
        new_assignment = np.argmin(d2, axis=1)
        costs = d2[np.arange(points.shape[0]), new_assignment]
        counts = np.bincount(new_assignment, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            idx = int(np.argmax(costs))
            centroids[empty] = points[idx]
            new_assignment[idx] = empty
            costs[idx] = 0.0
        sse_history.append(float(costs.sum()))
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        old = centroids
        centroids = np.empty_like(old)
        for j in range(k):
            members = points[assignment == j]
            centroids[j] = members.mean(axis=0)
        shift = float(np.max(np.linalg.norm(centroids - old, axis=1)))
        scale = max(1.0, float(np.max(np.linalg.norm(old, axis=1))))
        if shift <= tol * scale:
            break
    # Final consistency pass so the reported assignment matches the reported
    # centroids (the loop may exit right after a centroid update).
    d2 = _sq_dists(points, centroids)
    assignment = np.argmin(d2, axis=1)
    counts = np.bincount(assignment, minlength=k)
    costs = d2[np.arange(points.shape[0]), assignment]
    for empty in np.flatnonzero(counts == 0):
        idx = int(np.argmax(costs))
        centroids[empty] = points[idx]
        assignment[idx] = empty
        costs[idx] = 0.0
    return centroids, assignment, sse_history


def _category_stats(phi: np.ndarray, assignment: np.ndarray, k: int,
                    profiles: np.ndarray | None = None):
    """Profiles (conditional means unless given), counts, probs, eps_k, eps."""
    n = phi.shape[0]
    counts = np.bincount(assignment, minlength=k)
    if profiles is None:
        profiles = np.zeros((k, phi.shape[1]))
        for j in range(k):
            if counts[j] > 0:
                profiles[j] = phi[assignment == j].mean(axis=0)
    sq = np.sum((phi - profiles[assignment]) ** 2, axis=1)
    eps_k = np.zeros(k)
    for j in range(k):
        if counts[j] > 0:
            eps_k[j] = float(sq[assignment == j].mean())
    probs = counts / n if n else np.zeros(k)
    eps = float(np.dot(probs, eps_k))
    return profiles, counts, probs, eps_k, eps


def kmeans_partition(points: np.ndarray, k: int, cfg: KMeansConfig,
                     warm_centroids: np.ndarray | None = None) -> CategoryPartition:
    """Best-of-restarts Lloyd clustering of allocation vectors.

    warm_centroids, when given, joins the restart pool as an extra candidate
    (it is the only candidate under init="warm-start").  Ties between
    candidates break toward the earlier one, so the result is independent of
    evaluation order.
    """
    points = np.asarray(points, dtype=float)
    if k < 1:
        raise ConfigError("category count must be >= 1")
    if points.shape[0] < k:
        raise ConfigError(f"cannot build {k} categories from {points.shape[0]} points")
    inits: list[np.ndarray] = []
    if warm_centroids is not None:
        warm = np.asarray(warm_centroids, dtype=float)
        if warm.shape != (k, points.shape[1]):
            raise ConfigError(f"warm centroids have shape {warm.shape}, expected {(k, points.shape[1])}")
        inits.append(warm)
    if cfg.init == "kmeanspp":
        seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
        for seq in seeds:
            inits.append(_kmeanspp_init(points, k, np.random.default_rng(seq)))
    if not inits:
        raise ConfigError("warm-start init requested without warm centroids")

    best: tuple[float, np.ndarray, np.ndarray] | None = None
    for init in inits:
        centroids, assignment, history = lloyd_iterate(points, init, cfg.max_iters, cfg.tol)
        sse = history[-1]
        if best is None or sse < best[0]:
            best = (sse, centroids, assignment)
    _, centroids, assignment = best
    profiles, counts, probs, eps_k, eps = _category_stats(points, assignment, k)
    return CategoryPartition(
        n_categories=k, centroids=centroids, profiles=profiles,
        assignment_rule=NEAREST_CENTROID, member_counts=counts,
        eps_k=eps_k, eps=eps, probs=probs)


def _grow_centroids(points: np.ndarray, centroids: np.ndarray, k_target: int) -> np.ndarray:
    """Extend a centroid set to k_target by repeatedly adding the point
    farthest from its nearest centroid (deterministic, smallest-index ties)."""
    centers = list(np.asarray(centroids, dtype=float))
    d2 = np.min(_sq_dists(points, np.asarray(centers)), axis=1)
    while len(centers) < k_target:
        idx = int(np.argmax(d2))
        centers.append(points[idx])
        np.minimum(d2, _sq_dists(points, points[idx][None, :]).ravel(), out=d2)
    return np.asarray(centers)


def kmeans_sweep(points: np.ndarray, k_list: list[int],
                 cfg: KMeansConfig) -> dict[int, CategoryPartition]:
    """Warm-start nested sweep over increasing category counts.

    Guarantees eps(k2) <= eps(k1) for consecutive sweep entries k1 < k2: the
    k2 run always sees a candidate built from the k1 profiles, whose starting
    SSE is already no worse than the k1 result.
    """
    ks = list(k_list)
    if not ks:
        raise ConfigError("empty category-count list")
    if any(k2 <= k1 for k1, k2 in zip(ks, ks[1:])):
        raise ConfigError("category-count list must be strictly increasing")
    points = np.asarray(points, dtype=float)
    out: dict[int, CategoryPartition] = {}
    prev: CategoryPartition | None = None
    for k in ks:
        seed_k = int(np.random.SeedSequence([cfg.seed, k]).generate_state(1)[0])
        cfg_k = replace(cfg, seed=seed_k)
        warm = None
        if prev is not None:
            warm = _grow_centroids(points, prev.profiles, k)
        out[k] = kmeans_partition(points, k, cfg_k, warm_centroids=warm)
        prev = out[k]
    return out


def semantic_partition(pop: Population, u: UtilityModel,
                       num_categories: int | None = None) -> CategoryPartition:
    """By-label partition: one category per traffic-type label.

    Empty label classes get zero probability, zero within-variance, and a
    zero profile.
    """
    k = num_categories if num_categories is not None else pop.n_label_classes
    if k < 1:
        raise ConfigError("population carries no label classes")
    if pop.size and int(pop.labels.max()) >= k:
        raise ConfigError("labels exceed the requested category count")
    phi = fi_allocations(u, pop)
    profiles, counts, probs, eps_k, eps = _category_stats(phi, pop.labels, k)
    return CategoryPartition(
        n_categories=k, centroids=profiles.copy(), profiles=profiles,
        assignment_rule=BY_LABEL, member_counts=counts,
        eps_k=eps_k, eps=eps, probs=probs)


def assign(p: CategoryPartition, u: UtilityModel, t: np.ndarray,
           label: int | None = None) -> int:
    """Category of a single agent under the partition's assignment rule.

    Nearest-centroid partitions assign by distance from the agent's
    full-information allocation, smallest index on ties.  By-label partitions
    need the agent's label (the demand vector alone does not determine it).
    """
    if p.assignment_rule == BY_LABEL:
        if label is None:
            raise ValueError("by-label partitions require the agent's label")
        if not 0 <= label < p.n_categories:
            raise ValueError(f"label {label} outside [0, {p.n_categories})")
        return int(label)
    phi = fi_allocation(u, t)
    d2 = _sq_dists(phi[None, :], p.centroids)
    return int(np.argmin(d2[0]))


def assign_population(p: CategoryPartition, u: UtilityModel, pop: Population) -> np.ndarray:
    """Vectorized assignment for every agent in the population."""
    if pop.dim != p.dim:
        raise ValueError(f"population dimension {pop.dim} != partition dimension {p.dim}")
    if p.assignment_rule == BY_LABEL:
        if pop.size and int(pop.labels.max()) >= p.n_categories:
            raise ValueError("population labels exceed the partition's category count")
        return np.array(pop.labels, copy=True)
    phi = fi_allocations(u, pop)
    return np.argmin(_sq_dists(phi, p.centroids), axis=1)


def within_variance(p: CategoryPartition, u: UtilityModel,
                    pop: Population) -> tuple[float, np.ndarray]:
    """Empirical within-category variance of the FI allocation about the
    partition's profiles, on the given population."""
    assignment = assign_population(p, u, pop)
    phi = fi_allocations(u, pop)
    _, _, probs, eps_k, eps = _category_stats(
        phi, assignment, p.n_categories, profiles=p.profiles)
    return eps, eps_k


def write_partition_csv(p: CategoryPartition, path: str | Path) -> None:
    """Export as CSV: k,prob,eps_k,profile_0..profile_{d-1} (full precision)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["k", "prob", "eps_k"] + [f"profile_{i}" for i in range(p.dim)])
        for j in range(p.n_categories):
            w.writerow([j, format(p.probs[j], ".17g"), format(p.eps_k[j], ".17g")]
                       + [format(x, ".17g") for x in p.profiles[j]])
