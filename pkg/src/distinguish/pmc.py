"""The cluster distinguishability criterion: the Bayes risk of classifying
a random draw from a mixture back to its generating cluster.

Two decision rules are supported.  The randomized rule draws the label from
the posterior cluster probabilities and its risk has per-point summand
sum_k pi_k(x)(1 - pi_k(x)); the optimal rule takes the posterior argmax with
summand 1 - max_k pi_k(x).  The randomized rule admits an exact pairwise
decomposition: merging clusters i and j removes 2 E[pi_i pi_j] from the
risk, which is what the merge machinery in phm.py consumes.

Estimates are Monte Carlo over samples drawn from the mixture, with a
small-dimension quadrature route as an oracle.  All reductions that define
reported values are performed in a canonical (value-sorted) order, so a
relabeling of components that leaves the sample unchanged reproduces every
estimate bit-identically.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .models import ClusterConfiguration, McEstimate, MixtureModel, as_matrix
from .rng import stream

CHUNK = 16384

RULES = ("randomized", "optimal")


@dataclass(frozen=True)
class PmcSettings:
    """Estimation controls: sample count, seed, decision rule, quadrature."""

    m_samples: int = 100000
    seed: int | None = None
    rule: str = "randomized"
    quadrature: bool = False

    def __post_init__(self):
        if self.m_samples < 1000:
            raise ValueError("m_samples must be >= 1000")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")

    def to_dict(self) -> dict:
        return {"m_samples": self.m_samples, "seed": self.seed,
                "rule": self.rule, "quadrature": self.quadrature}

    @classmethod
    def from_dict(cls, d: dict) -> "PmcSettings":
        return cls(int(d.get("m_samples", 100000)), d.get("seed"),
                   str(d.get("rule", "randomized")),
                   bool(d.get("quadrature", False)))


def _sorted_sum(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Sum in ascending value order: canonical, hence order-independent."""
    return np.sort(a, axis=axis).sum(axis=axis)


def _sorted_mean(a: np.ndarray) -> float:
    return float(_sorted_sum(np.ravel(a)) / a.size)


def cluster_weights(model: MixtureModel, config: ClusterConfiguration
                    ) -> np.ndarray:
    """Per-cluster weights: sums of member component weights."""
    w = np.zeros(config.K)
    for k in range(config.K):
        members = config.members(k)
        w[k] = _sorted_sum(model.weights[list(members)])
    return w


def cluster_posterior_matrix(model: MixtureModel,
                             config: ClusterConfiguration | None,
                             X) -> np.ndarray:
    """(n, K) posterior cluster probabilities, log-space normalized.

    A cluster's posterior is the sum of its member components' posteriors.
    Per-row totals and per-cluster sums use value-sorted addend order.
    """
    X = np.atleast_2d(as_matrix(X))
    if config is None:
        config = ClusterConfiguration.singletons(model.kappa)
    a = np.log(model.weights) + model.log_component_densities(X)
    m = a.max(axis=1, keepdims=True)
    e = np.exp(a - m)
    total = _sorted_sum(e, axis=1)
    pi = np.empty((X.shape[0], config.K))
    for k in range(config.K):
        members = list(config.members(k))
        pi[:, k] = _sorted_sum(e[:, members], axis=1) / total
    return pi


def cluster_posteriors(model: MixtureModel,
                       config: ClusterConfiguration | None,
                       x) -> np.ndarray:
    """Posterior cluster probabilities at a single point."""
    return cluster_posterior_matrix(model, config, np.atleast_2d(x))[0]


def _summands(pi: np.ndarray, rule: str) -> np.ndarray:
    if rule == "randomized":
        return 1.0 - _sorted_sum(pi * pi, axis=1)
    if rule == "optimal":
        # argmax ties break toward the lowest cluster index (measure-zero
        # event for Gaussians); only the max value enters the risk
        return 1.0 - pi.max(axis=1)
    raise ValueError(f"rule must be one of {RULES}")


def sample_mixture(model: MixtureModel, m_samples: int,
                   seed: int | None = None, threads: int = 1
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Draw m_samples points from the mixture, stratified by component.

    Per-component counts are floor(M * alpha) with the remainder drawn
    multinomially; rows come out grouped by component, labels alongside.
    Standard normals are generated in fixed-size chunks whose RNG streams
    depend only on (seed, chunk index), so the sample is identical for any
    thread count.
    """
    alpha = model.weights
    base = np.floor(m_samples * alpha).astype(int)
    rest = m_samples - int(base.sum())
    if rest > 0:
        base = base + stream(seed, "mc-strata").multinomial(rest, alpha)
    labels = np.repeat(np.arange(model.kappa), base)
    X = np.empty((m_samples, model.p))
    chols = [c.chol for c in model.components]
    means = [c.mean for c in model.components]

    def fill(c: int) -> None:
        lo = c * CHUNK
        hi = min(lo + CHUNK, m_samples)
        z = stream(seed, "mc-chunk", c).standard_normal((hi - lo, model.p))
        lab = labels[lo:hi]
        for j in np.unique(lab):
            rows = lab == j
            X[lo:hi][rows] = means[j] + z[rows] @ chols[j].T
    n_chunks = (m_samples + CHUNK - 1) // CHUNK
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, range(n_chunks)))
    else:
        for c in range(n_chunks):
            fill(c)
    return X, labels


def pmc_from_sample(model: MixtureModel, config: ClusterConfiguration | None,
                    X, rule: str = "randomized") -> tuple[float, float]:
    """Risk estimate and standard error evaluated on a given sample."""
    pi = cluster_posterior_matrix(model, config, X)
    s = _summands(pi, rule)
    m = s.size
    value = _sorted_sum(s) / m
    if m > 1:
        d = s - value
        sd = np.sqrt(_sorted_sum(d * d) / (m - 1))
        se = float(sd / np.sqrt(m))
    else:
        se = 0.0
    return float(value), se


def pmc_mc(model: MixtureModel, config: ClusterConfiguration | None = None,
           settings: PmcSettings | None = None, threads: int = 1
           ) -> McEstimate:
    """Monte Carlo risk estimate under the configured decision rule."""
    if settings is None:
        settings = PmcSettings()
    if config is None:
        config = ClusterConfiguration.singletons(model.kappa)
    if config.K == 1:
        return McEstimate(0.0, 0.0, settings.m_samples, settings.seed)
    X, _ = sample_mixture(model, settings.m_samples, settings.seed, threads)
    value, se = pmc_from_sample(model, config, X, settings.rule)
    return McEstimate(value, se, settings.m_samples, settings.seed)


def pmc_quadrature(model: MixtureModel,
                   config: ClusterConfiguration | None = None,
                   rule: str = "randomized") -> float:
    """Adaptive quadrature for dimension 1 or 2, absolute tolerance 1e-8.

    Integrates density times per-point loss over a box covering every
    component mean plus/minus 10 standard deviations.
    """
    if model.p > 2:
        raise ValueError("quadrature unsupported for p > 2")
    if config is None:
        config = ClusterConfiguration.singletons(model.kappa)
    if config.K == 1:
        return 0.0
    means = np.array([c.mean for c in model.components])
    sds = np.array([np.sqrt(np.diag(c.covariance)) for c in model.components])
    lo = (means - 10.0 * sds).min(axis=0)
    hi = (means + 10.0 * sds).max(axis=0)

    def integrand_point(x) -> float:
        x = np.atleast_2d(x)
        a = np.log(model.weights) + model.log_component_densities(x)
        m = a.max()
        e = np.exp(a[0] - m)
        total = _sorted_sum(e)
        dens = float(np.exp(m) * total)
        pi = np.array([_sorted_sum(e[list(config.members(k))]) / total
                       for k in range(config.K)])
        if rule == "randomized":
            loss = 1.0 - _sorted_sum(pi * pi)
        elif rule == "optimal":
            loss = 1.0 - pi.max()
        else:
            raise ValueError(f"rule must be one of {RULES}")
        return dens * loss

    if model.p == 1:
        value, _ = integrate.quad(lambda x: integrand_point([x]),
                                  lo[0], hi[0], epsabs=1e-8, limit=200)
    else:
        value, _ = integrate.dblquad(
            lambda y, x: integrand_point([x, y]),
            lo[0], hi[0], lo[1], hi[1], epsabs=1e-8)
    return float(value)


@dataclass(frozen=True)
class DeltaMatrix:
    """Pairwise risk reductions from merging each cluster pair.

    `values` is the symmetric K x K matrix with tiny negative Monte Carlo
    noise clamped to zero; the clamp is presentation only.  `pmc` is the
    ascending upper-triangle sum of the unclamped entries and serves as the
    shared-sample risk estimate: the pairwise decomposition makes that sum
    the estimate by definition, keeping merge bookkeeping exact in floating
    point.  `raw` retains the unclamped entries for that bookkeeping.
    """

    values: np.ndarray
    m_samples: int
    seed: int | None
    pmc: float
    pmc_std_error: float
    raw: np.ndarray = field(repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "m_samples": self.m_samples,
                "seed": self.seed, "pmc": self.pmc,
                "pmc_std_error": self.pmc_std_error}

    @classmethod
    def from_dict(cls, d: dict) -> "DeltaMatrix":
        v = np.asarray(d["values"], dtype=float)
        return cls(v, int(d["m_samples"]), d.get("seed"), float(d["pmc"]),
                   float(d.get("pmc_std_error", 0.0)), v)

    def to_pairs_csv(self) -> str:
        """Heatmap-ready rows: cluster_i,cluster_j,delta."""
        K = self.values.shape[0]
        lines = ["cluster_i,cluster_j,delta"]
        for i in range(K):
            for j in range(i + 1, K):
                lines.append(f"{i},{j},{self.values[i, j]!r}")
        return "\n".join(lines) + "\n"


def delta_matrix(model: MixtureModel,
                 config: ClusterConfiguration | None = None,
                 settings: PmcSettings | None = None,
                 threads: int = 1) -> DeltaMatrix:
    """All pairwise merge reductions estimated from ONE shared sample.

    Only the randomized rule decomposes pairwise, so that rule is required.
    """
    if settings is None:
        settings = PmcSettings()
    if settings.rule != "randomized":
        raise ValueError("delta matrix requires the randomized rule")
    if config is None:
        config = ClusterConfiguration.singletons(model.kappa)
    K = config.K
    X, _ = sample_mixture(model, settings.m_samples, settings.seed, threads)
    pi = cluster_posterior_matrix(model, config, X)
    raw = np.zeros((K, K))
    for i in range(K):
        for j in range(i + 1, K):
            raw[i, j] = raw[j, i] = 2.0 * _sorted_mean(pi[:, i] * pi[:, j])
    total = float(_sorted_sum(raw[np.triu_indices(K, 1)])) if K > 1 else 0.0
    s = _summands(pi, "randomized")
    d = s - _sorted_sum(s) / s.size
    se = float(np.sqrt(_sorted_sum(d * d) / (s.size - 1)) / np.sqrt(s.size))
    clamped = np.maximum(raw, 0.0)
    np.fill_diagonal(clamped, 0.0)
    return DeltaMatrix(clamped, settings.m_samples, settings.seed,
                       float(total), se, raw)


def pmc_upper_bound(weights, rule: str = "randomized") -> float:
    """Risk ceiling attained when all clusters overlap completely."""
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if rule == "randomized":
        return float(np.sum(w * (1.0 - w)))
    if rule == "optimal":
        return float(1.0 - w.max())
    raise ValueError(f"rule must be one of {RULES}")


def pmc(model: MixtureModel, config: ClusterConfiguration | None = None,
        settings: PmcSettings | None = None, threads: int = 1) -> McEstimate:
    """Dispatch: quadrature when enabled in settings, Monte Carlo otherwise."""
    if settings is None:
        settings = PmcSettings()
    if settings.quadrature:
        value = pmc_quadrature(model, config, settings.rule)
        return McEstimate(max(value, 0.0), 0.0, 0, None)
    return pmc_mc(model, config, settings, threads)
