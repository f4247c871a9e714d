"""Mechanism evaluation: welfare gap, misreporting gain, information leakage.

Everything is driven by the aggregate within-category variance eps of the
partition on the evaluated population:

  * welfare gap:   alpha*eps/2W*  <=  delta  <=  beta*eps/2W*
  * misreporting:  E[max(0, gain)] <= W* * delta <= beta*eps/2
  * leakage:       I(T;R) <= I(T;C) <= H(C) <= log2 K

The first two hold exactly on the empirical distribution because the
profiles are the empirical conditional means; bootstrap standard errors are
provided for slack when comparing across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .demand import Population, UtilityModel, fi_allocations, fi_welfare, utility_profile_matrix
from .errors import ModelError
from .info import entropy_bits, joint_counts, mutual_information_bits
from .partition import CategoryPartition, assign_population, within_variance


@dataclass(frozen=True)
class WelfareReport:
    w_star: float
    w_cat: float
    delta: float           # relative welfare gap
    eps: float             # aggregate within-category variance
    lower_bound: float     # alpha * eps / (2 W*)
    upper_bound: float     # beta * eps / (2 W*)


@dataclass(frozen=True)
class GainReport:
    mean_raw: float        # mean of the signed best-alternative gain
    mean_clamped: float    # mean of max(0, gain)
    max_raw: float
    ic_bound: float        # beta * eps / 2


@dataclass(frozen=True)
class LeakageReport:
    nmi: float
    i_tc: float            # I(label; category), bits
    i_tr: float            # I(label; delivered profile), bits
    h_c: float             # H(category), bits
    log2_k: float


def _category_utilities(u: UtilityModel, p: CategoryPartition,
                        pop: Population) -> tuple[np.ndarray, np.ndarray]:
    """(assignment, per-agent utility of the assigned profile)."""
    assignment = assign_population(p, u, pop)
    phi = fi_allocations(u, pop)
    dev = p.profiles[assignment] - phi
    if u.kind == "quartic-perturbed":
        worst = float(np.max(np.abs(dev))) if dev.size else 0.0
        if worst > u.domain_halfwidth:
            raise ValueError(
                f"assigned profile outside utility domain: |r_i - t_i| = {worst} "
                f"> D = {u.domain_halfwidth}")
        pen = np.sum(dev ** 2, axis=1) + u.kappa * np.sum(dev ** 4, axis=1)
    else:
        pen = np.sum(dev ** 2, axis=1)
    return assignment, pop.dim * u.u_max - pen


def welfare_gap(u: UtilityModel, p: CategoryPartition, pop: Population) -> WelfareReport:
    """Relative welfare gap of the category mechanism plus its curvature bounds."""
    w_star = fi_welfare(u, pop)
    if w_star <= 0:
        raise ModelError(f"benchmark welfare must be positive, got {w_star}")
    _, u_cat = _category_utilities(u, p, pop)
    w_cat = math.fsum(u_cat) / pop.size
    eps, _ = within_variance(p, u, pop)
    delta = (w_star - w_cat) / w_star
    return WelfareReport(
        w_star=w_star, w_cat=w_cat, delta=delta, eps=eps,
        lower_bound=u.alpha * eps / (2.0 * w_star),
        upper_bound=u.beta * eps / (2.0 * w_star))


def _gain_array(u: UtilityModel, p: CategoryPartition, pop: Population) -> np.ndarray:
    """Signed best-alternative misreporting gain per agent."""
    assignment = assign_population(p, u, pop)
    utilities = utility_profile_matrix(u, pop.demands, p.profiles)
    rows = np.arange(pop.size)
    truthful = utilities[rows, assignment].copy()
    utilities[rows, assignment] = -np.inf
    best_alternative = utilities.max(axis=1)
    return best_alternative - truthful


def misreport_gain(u: UtilityModel, p: CategoryPartition, pop: Population) -> GainReport:
    """Expected maximum gain from declaring a different category."""
    if p.n_categories < 2:
        raise ValueError("misreporting needs at least two categories to choose from")
    gains = _gain_array(u, p, pop)
    eps, _ = within_variance(p, u, pop)
    return GainReport(
        mean_raw=math.fsum(gains) / pop.size,
        mean_clamped=math.fsum(np.maximum(gains, 0.0)) / pop.size,
        max_raw=float(gains.max()),
        ic_bound=u.beta * eps / 2.0)


def nmi_leakage(p: CategoryPartition, u: UtilityModel, pop: Population) -> LeakageReport:
    """Leakage of the category signal about the traffic-type label.

    The delivered allocation R is the profile of the declared category;
    distinct profiles induce a (possibly merging) coarsening of C, so
    I(T;R) is computed on the merged contingency table.  When no profiles
    coincide the coarsening is a relabeling and I(T;R) equals I(T;C).
    """
    labels = pop.labels
    n_labels = pop.n_label_classes
    assignment = assign_population(p, u, pop)
    k = p.n_categories
    joint_tc = joint_counts(labels, assignment, n_labels, k)

    h_t = entropy_bits(joint_tc.sum(axis=1))
    h_c = entropy_bits(joint_tc.sum(axis=0))
    i_tc = mutual_information_bits(joint_tc)

    profile_group: dict[bytes, int] = {}
    group_of = np.empty(k, dtype=np.int64)
    for j in range(k):
        key = p.profiles[j].tobytes()
        group_of[j] = profile_group.setdefault(key, len(profile_group))
    if len(profile_group) == k:
        i_tr = i_tc
    else:
        joint_tr = np.zeros((n_labels, len(profile_group)), dtype=np.int64)
        for j in range(k):
            joint_tr[:, group_of[j]] += joint_tc[:, j]
        # coarsening cannot raise information; min() strips float-rounding ties
        i_tr = min(mutual_information_bits(joint_tr), i_tc)

    denom = math.sqrt(h_t * h_c)
    nmi = 0.0 if denom == 0.0 else min(max(i_tc / denom, 0.0), 1.0)
    return LeakageReport(nmi=nmi, i_tc=i_tc, i_tr=i_tr, h_c=h_c, log2_k=math.log2(k))


def delta_standard_error(u: UtilityModel, p: CategoryPartition, pop: Population,
                         resamples: int = 200, seed: int = 0) -> float:
    """Bootstrap standard error of the relative welfare gap."""
    _, u_cat = _category_utilities(u, p, pop)
    u_fi = np.full(pop.size, pop.dim * u.u_max)
    rng = np.random.default_rng(seed)
    deltas = np.empty(resamples)
    for b in range(resamples):
        idx = rng.integers(0, pop.size, pop.size)
        w_star_b = float(u_fi[idx].mean())
        deltas[b] = (w_star_b - float(u_cat[idx].mean())) / w_star_b
    return float(deltas.std(ddof=1))


def gain_standard_error(u: UtilityModel, p: CategoryPartition, pop: Population,
                        resamples: int = 200, seed: int = 0) -> float:
    """Bootstrap standard error of the mean clamped misreporting gain."""
    clamped = np.maximum(_gain_array(u, p, pop), 0.0)
    rng = np.random.default_rng(seed)
    means = np.empty(resamples)
    for b in range(resamples):
        idx = rng.integers(0, pop.size, pop.size)
        means[b] = float(clamped[idx].mean())
    return float(means.std(ddof=1))
