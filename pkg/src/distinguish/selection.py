"""Choosing the number of clusters: gap statistic, risk-constrained
selection, and the validity indices used for comparison (silhouette,
adjusted Rand, split stability, prediction strength).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import cut_tree, fit_hclust, fit_kmeans, partition_to_gaussians
from .models import Partition, as_matrix
from .pmc import PmcSettings, pmc_mc
from .rng import derive_seed, stream

CLUSTERERS = ("kmeans", "hclust")


def _cluster(X: np.ndarray, K: int, method: str, seed: int | None,
             restarts: int = 10) -> Partition:
    if method == "kmeans":
        return fit_kmeans(X, K, restarts=restarts, seed=seed).partition
    if method == "hclust":
        return cut_tree(fit_hclust(X), K)
    raise ValueError(f"clusterer must be one of {CLUSTERERS}")


def _within_dispersion(X: np.ndarray, part: Partition) -> float:
    """Pooled within-cluster sum of squared distances to cluster means."""
    total = 0.0
    for k in range(part.K):
        S = X[part.labels == k]
        total += float(((S - S.mean(axis=0)) ** 2).sum())
    return total


def gap_statistic(X, clusterer: str = "kmeans",
                  k_range=range(1, 9), B: int = 50,
                  seed: int | None = None, restarts: int = 10
                  ) -> dict[int, tuple[float, float]]:
    """Gap and its standard error per K.

    gap(K) compares log within-cluster dispersion of the data against the
    mean over B reference datasets drawn uniformly over the feature-wise
    bounding box; the standard error carries the sqrt(1 + 1/B) factor.
    """
    V = as_matrix(X)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("k_range is empty")
    if B < 10:
        raise ValueError("B must be >= 10")
    lo, hi = V.min(axis=0), V.max(axis=0)
    refs = [lo + stream(seed, "gap-ref", b).random(V.shape) * (hi - lo)
            for b in range(B)]
    out: dict[int, tuple[float, float]] = {}
    for K in ks:
        part = _cluster(V, K, clusterer, derive_seed(seed, "gap-obs", K),
                        restarts)
        log_w = np.log(_within_dispersion(V, part))
        ref_log = np.empty(B)
        for b, R in enumerate(refs):
            rp = _cluster(R, K, clusterer,
                          derive_seed(seed, "gap-fit", (b << 12) | K),
                          restarts)
            ref_log[b] = np.log(_within_dispersion(R, rp))
        gap = float(ref_log.mean() - log_w)
        sd = float(ref_log.std(ddof=0) * np.sqrt(1.0 + 1.0 / B))
        out[K] = (gap, sd)
    return out


def argmax_gap(table: dict[int, tuple[float, float]]) -> int:
    """K with the largest gap; ties break toward the smaller K."""
    return max(sorted(table), key=lambda k: table[k][0])


@dataclass(frozen=True)
class SelectionResult:
    K: int
    infeasible: bool

    def to_dict(self) -> dict:
        return {"K": self.K, "infeasible": self.infeasible}


def select_k_constrained(scores: dict[int, float], pmc: dict[int, float],
                         tau: float) -> SelectionResult:
    """Minimize the loss subject to the risk staying at or below tau.

    `scores` is a smaller-is-better loss per K (use negative gap or
    negative BIC).  When no K satisfies the constraint the result carries
    the risk-minimizing K flagged infeasible.
    """
    if set(scores) != set(pmc):
        raise ValueError("scores and pmc must cover the same K values")
    ks = sorted(scores)
    feasible = [k for k in ks if pmc[k] <= tau]
    if feasible:
        return SelectionResult(min(feasible, key=lambda k: (scores[k], k)),
                               False)
    return SelectionResult(min(ks, key=lambda k: (pmc[k], k)), True)


def silhouette(X, part: Partition) -> float:
    """Mean silhouette width with Euclidean distances; singletons score 0."""
    V = as_matrix(X)
    if part.K < 2:
        raise ValueError("silhouette requires K >= 2")
    n = V.shape[0]
    D = np.sqrt(np.maximum(((V[:, None, :] - V[None]) ** 2).sum(axis=-1), 0.0))
    lab = part.labels
    sizes = np.bincount(lab, minlength=part.K)
    s = np.zeros(n)
    cluster_sums = np.zeros((n, part.K))
    for k in range(part.K):
        cluster_sums[:, k] = D[:, lab == k].sum(axis=1)
    for i in range(n):
        own = lab[i]
        if sizes[own] == 1:
            continue
        a = cluster_sums[i, own] / (sizes[own] - 1)
        others = [cluster_sums[i, k] / sizes[k]
                  for k in range(part.K) if k != own]
        b = min(others)
        denom = max(a, b)
        s[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(s.mean())


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected pair-counting agreement between two partitions."""
    la = a.labels if isinstance(a, Partition) else np.asarray(a, dtype=int)
    lb = b.labels if isinstance(b, Partition) else np.asarray(b, dtype=int)
    if la.size != lb.size:
        raise ValueError("partitions must have equal length")
    n = la.size
    _, ia = np.unique(la, return_inverse=True)
    _, ib = np.unique(lb, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1.0)

    def comb2(x):
        return (x * (x - 1.0) / 2.0).sum()

    sum_cells = comb2(table)
    sum_rows = comb2(table.sum(axis=1))
    sum_cols = comb2(table.sum(axis=0))
    total = n * (n - 1.0) / 2.0
    expected = sum_rows * sum_cols / total if total > 0 else 0.0
    max_index = (sum_rows + sum_cols) / 2.0
    denom = max_index - expected
    if denom == 0:
        return 1.0
    return float((sum_cells - expected) / denom)


def _centroids(X: np.ndarray, part: Partition) -> np.ndarray:
    return np.vstack([X[part.labels == k].mean(axis=0)
                      for k in range(part.K)])


def _nearest(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centroids[None]) ** 2).sum(axis=-1).argmin(axis=1)


def lange_stability(X, clusterer: str, K: int, reps: int = 20,
                    seed: int | None = None, restarts: int = 10) -> float:
    """Agreement between direct and transferred clusterings of half-splits.

    Each repetition splits the rows in two, clusters both halves, extends
    each half's clustering to the other by nearest centroid, and scores the
    adjusted Rand agreement with the direct clustering of that half.
    """
    V = as_matrix(X)
    if K < 2:
        raise ValueError("stability requires K >= 2")
    if reps < 2:
        raise ValueError("reps must be >= 2")
    n = V.shape[0]
    scores = []
    for r in range(reps):
        perm = stream(seed, "stability-split", r).permutation(n)
        halves = (perm[:n // 2], perm[n // 2:])
        parts = []
        cents = []
        for side, idx in enumerate(halves):
            part = _cluster(V[idx], K, clusterer,
                            derive_seed(seed, "stability-fit", 2 * r + side),
                            restarts)
            parts.append(part)
            cents.append(_centroids(V[idx], part))
        for src in (0, 1):
            dst = 1 - src
            induced = _nearest(V[halves[dst]], cents[src])
            scores.append(adjusted_rand_index(induced, parts[dst].labels))
    return float(np.mean(scores))


def prediction_strength(X, clusterer: str, K: int, reps: int = 20,
                        seed: int | None = None, restarts: int = 10) -> float:
    """Worst-cluster co-membership agreement across half-splits.

    For each split, test points are clustered directly and also classified
    by nearest training centroid; each test cluster is scored by the
    fraction of its point pairs kept together by the classifier, and the
    minimum over clusters is averaged over repetitions.
    """
    V = as_matrix(X)
    if K < 2:
        raise ValueError("prediction strength requires K >= 2")
    if reps < 2:
        raise ValueError("reps must be >= 2")
    n = V.shape[0]
    values = []
    for r in range(reps):
        perm = stream(seed, "ps-split", r).permutation(n)
        train, test = perm[:n // 2], perm[n // 2:]
        train_part = _cluster(V[train], K, clusterer,
                              derive_seed(seed, "ps-fit", 2 * r), restarts)
        test_part = _cluster(V[test], K, clusterer,
                             derive_seed(seed, "ps-fit", 2 * r + 1), restarts)
        transfer = _nearest(V[test], _centroids(V[train], train_part))
        worst = 1.0
        scored = False
        for c in range(test_part.K):
            members = np.nonzero(test_part.labels == c)[0]
            if members.size < 2:
                continue
            scored = True
            same = transfer[members][:, None] == transfer[members][None, :]
            pairs = members.size * (members.size - 1)
            agree = (same.sum() - members.size) / pairs
            worst = min(worst, agree)
        values.append(worst if scored else 1.0)
    return float(np.mean(values))


def selection_table(X, method: str = "kmeans", k_range=range(1, 9),
                    tau: float = 0.05, B: int = 50, reps: int = 20,
                    m_samples: int = 100000, seed: int | None = None,
                    restarts: int = 10, threads: int = 1) -> dict:
    """Per-K diagnostics table plus the risk-constrained selection.

    Rows carry gap, gap sd, risk of the fitted per-cluster Gaussians,
    silhouette, split stability, and prediction strength (the last three
    only for K >= 2).
    """
    V = as_matrix(X)
    ks = sorted(set(int(k) for k in k_range))
    gaps = gap_statistic(V, method, ks, B=B, seed=seed, restarts=restarts)
    rows = []
    pmc_by_k: dict[int, float] = {}
    for K in ks:
        part = _cluster(V, K, method, derive_seed(seed, "table-fit", K),
                        restarts)
        model = partition_to_gaussians(V, part)
        est = pmc_mc(model, None,
                     PmcSettings(m_samples=m_samples,
                                 seed=derive_seed(seed, "table-pmc", K)),
                     threads)
        pmc_by_k[K] = est.value
        row = {
            "K": K,
            "gap": gaps[K][0],
            "gap_sd": gaps[K][1],
            "pmc": est.value,
            "pmc_std_error": est.std_error,
            "silhouette": silhouette(V, part) if K >= 2 else None,
            "stability": lange_stability(V, method, K, reps=reps,
                                         seed=derive_seed(seed, "table-st", K),
                                         restarts=restarts) if K >= 2 else None,
            "prediction_strength": prediction_strength(
                V, method, K, reps=reps,
                seed=derive_seed(seed, "table-ps", K),
                restarts=restarts) if K >= 2 else None,
        }
        rows.append(row)
    scores = {K: -gaps[K][0] for K in ks}
    chosen = select_k_constrained(scores, pmc_by_k, tau)
    return {"rows": rows, "tau": tau, "selected_K": chosen.K,
            "infeasible": chosen.infeasible}
