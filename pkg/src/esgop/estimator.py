"""Subspace estimation from reweighted smoothed gradients.

The pipeline estimates the central mean subspace of a multi-index model
from i.i.d. draws, assuming the covariate density is known (or separately
fitted).  For a probe location theta, the Gaussian integration-by-parts
identity turns ``h^-2 E[Y (X - theta)]`` under ``X ~ N(theta, h^2 I)`` into
the smoothed regression gradient at theta; importance weights
``rho_h(X; theta)`` convert design-distribution averages into exactly that
Gaussian average.  Cross products of two independent estimates per probe
are averaged into a surrogate matrix whose top-k eigenvectors estimate the
subspace.

Variants on the same skeleton:

* ``mean`` averages the per-probe cross products (the default),
* ``median_of_means`` picks the per-probe matrix whose operator-norm ball
  of minimal radius covers a majority of all probe matrices (robust to
  heavy-tailed responses),
* ``lle`` swaps the reweighted-mean gradient estimate for the slope of a
  kernel-weighted local linear regression (asymptotically equivalent),
* a plug-in mode replaces the known density ratio with one fitted on an
  unlabeled sample (see ``fit_plugin``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    ConditioningError,
    ConfigError,
    EstimationError,
    ParameterError,
    PartitionError,
    SupportError,
)
from .model import Dataset, DesignDistribution, gaussian_log_density
from .numkit import RngStream, operator_norm, sym_eigen

__all__ = [
    "EsgopConfig",
    "SmoothedGradientPair",
    "SubspaceEstimate",
    "RatioEstimatorSpec",
    "design_log_ratio",
    "gaussian_ratio_fit",
    "estimate_smoothed_gradient",
    "estimate_lle_gradient",
    "assemble_cross_outer",
    "mom_select",
    "fit",
    "fit_plugin",
    "bandwidth_for_bounded_support",
    "default_sigma_theta",
    "mom_partition_count",
]

VARIANTS = ("mean", "median_of_means", "plugin_ratio", "lle")

_SIGMA_THETA_LIMIT = 1.0 / math.sqrt(20.0)


@dataclass(frozen=True)
class EsgopConfig:
    """Hyperparameters of the estimation pipeline.

    ``sigma_theta < h / sqrt(20)`` is enforced by default because the
    error analysis needs it; set ``sigma_theta_override`` to experiment
    beyond that range.  ``bounded_support_mode`` accepts (and drops)
    out-of-support rows instead of raising, trading a small bias for
    applicability to truncated designs; pair it with
    ``bandwidth_for_bounded_support``.
    """

    h: float
    sigma_theta: float
    m: int
    k: int
    variant: str = "mean"
    seed: int = 0
    sigma_theta_override: bool = False
    bounded_support_mode: bool = False

    def __post_init__(self) -> None:
        if self.h <= 0:
            raise ParameterError(f"h must be > 0, got {self.h}")
        if self.sigma_theta <= 0:
            raise ParameterError(f"sigma_theta must be > 0, got {self.sigma_theta}")
        if self.m < 1:
            raise ParameterError(f"m must be >= 1, got {self.m}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if not self.sigma_theta_override and self.sigma_theta >= self.h * _SIGMA_THETA_LIMIT:
            raise ConfigError(
                f"sigma_theta >= h/sqrt(20) (got sigma_theta={self.sigma_theta}, "
                f"h={self.h}); pass sigma_theta_override=True to relax"
            )

    def validate_against(self, n: int, d: int) -> None:
        """Checks that need the dataset: n >= 2m and m <= n/(2d)."""
        if self.k > d:
            raise ParameterError(f"k={self.k} exceeds data dimension d={d}")
        if n < 2 * self.m:
            raise PartitionError(f"n={n} is too small for m={self.m} partitions (need n >= 2m)")
        if self.m > n / (2 * d):
            raise ConfigError(f"m > n/(2d) (m={self.m}, n={n}, d={d})")


@dataclass(frozen=True)
class SmoothedGradientPair:
    """Two independent gradient estimates at one probe location.

    ``beta1`` and ``beta2`` come from disjoint halves of the probe's data
    partition, so their cross product is unbiased for the outer product of
    the population smoothed gradient.
    """

    theta: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    n_used: int


@dataclass(frozen=True)
class SubspaceEstimate:
    """Estimated subspace basis plus spectral diagnostics."""

    u_hat: np.ndarray
    eigenvalues: np.ndarray
    eigengap: float
    m_hat: np.ndarray
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Gradient estimators
# ---------------------------------------------------------------------------

def design_log_ratio(design: DesignDistribution, h: float) -> Callable:
    """Log importance weight against a known design density."""
    def log_ratio(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return gaussian_log_density(x - theta, h) - design.log_density(x)
    return log_ratio


def _weighted_gradient(
    x: np.ndarray,
    y: np.ndarray,
    theta: np.ndarray,
    h: float,
    log_w: np.ndarray,
    drop_out_of_support: bool,
) -> tuple[np.ndarray, int, float]:
    """h^-2 mean of w * y * (x - theta); returns (beta, n_used, weight_sum)."""
    ok = np.isfinite(log_w)
    if not np.all(ok):
        if not drop_out_of_support:
            raise SupportError(
                f"{int(np.sum(~ok))} sample(s) outside the design support; "
                "enable bounded_support_mode to drop them"
            )
        x, y, log_w = x[ok], y[ok], log_w[ok]
    if x.shape[0] == 0:
        raise PartitionError("no usable samples in data half")
    w = np.exp(log_w)
    beta = (w * y) @ (x - theta) / (x.shape[0] * h * h)
    return beta, x.shape[0], float(np.sum(w))


def estimate_smoothed_gradient(
    data: Dataset,
    theta: np.ndarray,
    h: float,
    design: DesignDistribution,
    drop_out_of_support: bool = False,
) -> np.ndarray:
    """Unbiased estimate of the smoothed gradient at ``theta``.

    Computes ``h^-2 mean_i rho_h(X_i; theta) Y_i (X_i - theta)``.  Rows
    outside the design support raise SupportError unless
    ``drop_out_of_support`` is set (then they are excluded and the induced
    bias accepted).
    """
    if h <= 0:
        raise ParameterError(f"h must be > 0, got {h}")
    if data.n == 0:
        raise PartitionError("empty data half")
    theta = np.asarray(theta, dtype=float).ravel()
    log_w = design_log_ratio(design, h)(data.x, theta)
    beta, _, _ = _weighted_gradient(data.x, data.y, theta, h, log_w, drop_out_of_support)
    return beta


def estimate_lle_gradient(
    data: Dataset,
    theta: np.ndarray,
    h: float,
    design: DesignDistribution | None = None,
    log_weights: np.ndarray | None = None,
    drop_out_of_support: bool = False,
) -> np.ndarray:
    """Slope of a kernel-weighted local linear regression at ``theta``.

    The default kernel is the importance weight ``rho_h(x; theta)``; pass
    ``log_weights`` to use a different kernel (e.g. a plain Gaussian).
    Weights are rescaled by their maximum before solving, which leaves the
    slope unchanged but avoids underflow when theta sits far from the data.
    """
    if data.n < data.d + 2:
        raise PartitionError(f"local linear fit needs n >= d + 2, got n={data.n}, d={data.d}")
    theta = np.asarray(theta, dtype=float).ravel()
    if log_weights is None:
        if design is None:
            raise ParameterError("provide either a design or explicit log_weights")
        log_weights = design_log_ratio(design, h)(data.x, theta)
    ok = np.isfinite(log_weights)
    x, y, log_w = data.x, data.y, np.asarray(log_weights, dtype=float)
    if not np.all(ok):
        if not drop_out_of_support:
            raise SupportError(f"{int(np.sum(~ok))} sample(s) outside the design support")
        x, y, log_w = x[ok], y[ok], log_w[ok]
        if x.shape[0] < x.shape[1] + 2:
            raise PartitionError("too few in-support samples for a local linear fit")
    sqrt_w = np.exp(0.5 * (log_w - np.max(log_w)))
    centered = x - theta
    z = np.empty((x.shape[0], x.shape[1] + 1))
    z[:, 0] = 1.0
    z[:, 1:] = centered
    z *= sqrt_w[:, None]
    coef, _, rank, _ = np.linalg.lstsq(z, y * sqrt_w, rcond=None)
    if rank < x.shape[1] + 1:
        raise ConditioningError(
            f"weighted design matrix is rank deficient (rank {rank} < {x.shape[1] + 1})"
        )
    return coef[1:]


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def _partition_indices(n: int, cfg: EsgopConfig) -> np.ndarray:
    """Shuffle, trim to a multiple of 2m, and shape into (m, 2, half)."""
    usable = n - n % (2 * cfg.m)
    rng = RngStream(cfg.seed).child("split").generator()
    perm = rng.permutation(n)[:usable]
    return perm.reshape(cfg.m, 2, usable // (2 * cfg.m))


def _draw_thetas(d: int, cfg: EsgopConfig) -> np.ndarray:
    rng = RngStream(cfg.seed).child("theta").generator()
    return cfg.sigma_theta * rng.standard_normal((cfg.m, d))


def _compute_pairs(
    data: Dataset,
    cfg: EsgopConfig,
    thetas: np.ndarray,
    parts: np.ndarray,
    log_ratio: Callable,
    use_lle: bool = False,
) -> tuple[list[SmoothedGradientPair], dict]:
    pairs = []
    weight_sum = 0.0
    weight_count = 0
    n_dropped = 0
    for j in range(cfg.m):
        theta = thetas[j]
        betas = []
        n_used_min = parts.shape[2]
        for half in range(2):
            idx = parts[j, half]
            x, y = data.x[idx], data.y[idx]
            if use_lle:
                if x.shape[0] < x.shape[1] + 2:
                    raise PartitionError(
                        "halves too small for the lle variant (need half >= d + 2)"
                    )
                lw = log_ratio(x, theta)
                betas.append(
                    estimate_lle_gradient(
                        Dataset(x, y), theta, cfg.h,
                        log_weights=lw,
                        drop_out_of_support=cfg.bounded_support_mode,
                    )
                )
                weight_count += x.shape[0]
                weight_sum += float(np.sum(np.exp(lw[np.isfinite(lw)])))
                n_dropped += int(np.sum(~np.isfinite(lw)))
            else:
                lw = log_ratio(x, theta)
                beta, n_used, wsum = _weighted_gradient(
                    x, y, theta, cfg.h, lw, cfg.bounded_support_mode
                )
                betas.append(beta)
                n_used_min = min(n_used_min, n_used)
                weight_sum += wsum
                weight_count += n_used
                n_dropped += x.shape[0] - n_used
        pairs.append(SmoothedGradientPair(theta, betas[0], betas[1], n_used_min))
    stats = {
        "weight_mean": weight_sum / max(weight_count, 1),
        "n_dropped": n_dropped,
        "half_size": int(parts.shape[2]),
    }
    return pairs, stats


def assemble_cross_outer(b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
    """(1/2m) sum_j (b1_j b2_j' + b2_j b1_j'), exactly symmetric."""
    b1 = np.atleast_2d(b1)
    b2 = np.atleast_2d(b2)
    s = b1.T @ b2
    return (s + s.T) / (2.0 * b1.shape[0])


def mom_select(mats: list[np.ndarray]) -> tuple[int, float]:
    """Index and radius of the matrix whose operator-norm ball of smallest
    radius contains strictly more than half of all the matrices.

    The radius for candidate j is the ceil((m+1)/2)-th smallest of its
    distances to every matrix (itself included, at distance zero).
    """
    m = len(mats)
    dist = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            dist[i, j] = dist[j, i] = operator_norm(mats[i] - mats[j])
    need = math.ceil((m + 1) / 2)
    radii = np.sort(dist, axis=1)[:, need - 1]
    j_star = int(np.argmin(radii))
    return j_star, float(radii[j_star])


def _spectral_estimate(m_hat: np.ndarray, cfg: EsgopConfig, extra: dict) -> SubspaceEstimate:
    eig = sym_eigen(m_hat)
    lam = eig.eigenvalues
    gap = float(lam[cfg.k - 1] - (lam[cfg.k] if cfg.k < lam.size else 0.0))
    diagnostics = {
        "variant": cfg.variant,
        "eigengap_ratio": gap / lam[0] if lam[0] > 0 else 0.0,
        **extra,
    }
    return SubspaceEstimate(
        u_hat=eig.eigenvectors[:, : cfg.k],
        eigenvalues=lam,
        eigengap=gap,
        m_hat=m_hat,
        diagnostics=diagnostics,
    )


def _run_pipeline(data: Dataset, cfg: EsgopConfig, log_ratio: Callable) -> SubspaceEstimate:
    cfg.validate_against(data.n, data.d)
    thetas = _draw_thetas(data.d, cfg)
    parts = _partition_indices(data.n, cfg)
    pairs, stats = _compute_pairs(
        data, cfg, thetas, parts, log_ratio, use_lle=(cfg.variant == "lle")
    )
    b1 = np.stack([p.beta1 for p in pairs])
    b2 = np.stack([p.beta2 for p in pairs])
    if cfg.variant == "median_of_means":
        per_part = [assemble_cross_outer(b1[j][None, :], b2[j][None, :]) for j in range(cfg.m)]
        j_star, radius = mom_select(per_part)
        return _spectral_estimate(
            per_part[j_star], cfg, {**stats, "j_star": j_star, "radius": radius}
        )
    return _spectral_estimate(assemble_cross_outer(b1, b2), cfg, stats)


def fit(data: Dataset, design: DesignDistribution, cfg: EsgopConfig) -> SubspaceEstimate:
    """Run the full pipeline with a known design density.

    Draws m probe locations from N(0, sigma_theta^2 I_d), splits the data
    into m partitions of two halves each, estimates the smoothed gradient
    on every half, assembles the symmetrized cross products, and returns
    the top-k eigenvectors with spectral diagnostics.  Output is a pure
    function of ``(data, cfg)``.
    """
    if cfg.variant == "plugin_ratio":
        raise ConfigError("use fit_plugin for the plugin_ratio variant")
    return _run_pipeline(data, cfg, design_log_ratio(design, cfg.h))


# ---------------------------------------------------------------------------
# Plug-in density ratio
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatioEstimatorSpec:
    """How to obtain the density ratio when the design is unknown.

    ``kind`` is "gaussian_fit" (fit mean/covariance on the unlabeled sample
    and use the implied Gaussian density) or "injected" (use ``log_ratio``
    as given).  ``reference`` optionally provides the true design so the
    relative/absolute ratio errors can be reported.
    """

    kind: str = "gaussian_fit"
    log_ratio: Callable | None = None
    reference: DesignDistribution | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("gaussian_fit", "injected"):
            raise ConfigError(f"unknown ratio estimator kind {self.kind!r}")
        if self.kind == "injected" and self.log_ratio is None:
            raise ConfigError("injected ratio estimator needs a log_ratio callable")


def gaussian_ratio_fit(unlabeled: np.ndarray, h: float) -> Callable:
    """Fit a Gaussian to the unlabeled sample; return its log ratio."""
    x = np.atleast_2d(np.asarray(unlabeled, dtype=float))
    n, d = x.shape
    if n < 2:
        raise EstimationError("gaussian ratio fit needs at least 2 unlabeled points")
    mu = x.mean(axis=0)
    cov = np.cov(x.T, ddof=1).reshape(d, d)
    trace = float(np.trace(cov))
    if not np.isfinite(trace) or trace <= 0:
        raise EstimationError("degenerate covariance fit on the unlabeled sample")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        cov = cov + (1e-8 * trace / d) * np.eye(d)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise EstimationError("degenerate covariance fit on the unlabeled sample") from exc
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    const = -0.5 * d * math.log(2.0 * math.pi) - 0.5 * log_det

    def log_q(pts: np.ndarray) -> np.ndarray:
        z = solve_triangular(chol, (pts - mu).T, lower=True)
        return const - 0.5 * np.sum(z * z, axis=0)

    def log_ratio(pts: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return gaussian_log_density(pts - theta, h) - log_q(pts)

    return log_ratio


def fit_plugin(
    data: Dataset,
    unlabeled: np.ndarray,
    cfg: EsgopConfig,
    ratio_spec: RatioEstimatorSpec,
) -> SubspaceEstimate:
    """Pipeline with a fitted (or injected) density ratio.

    Identical arithmetic to :func:`fit` except that the importance weights
    come from ``ratio_spec``; injecting the true ratio therefore reproduces
    the mean variant bit for bit under the same seed.  Weight diagnostics
    (and, when a reference design is supplied, the relative fourth-moment
    and absolute squared error of the fitted ratio) are attached to the
    estimate; a warning flag is raised when the average weight strays far
    from 1.
    """
    if ratio_spec.kind == "injected":
        log_ratio = ratio_spec.log_ratio
    else:
        unlabeled = np.atleast_2d(np.asarray(unlabeled, dtype=float))
        if unlabeled.shape[0] == 0:
            raise EstimationError("plugin ratio needs a non-empty unlabeled sample")
        if unlabeled.shape[1] != data.d:
            raise ConfigError("unlabeled sample dimension differs from the data")
        log_ratio = gaussian_ratio_fit(unlabeled, cfg.h)

    base_cfg = cfg if cfg.variant == "mean" else EsgopConfig(
        h=cfg.h, sigma_theta=cfg.sigma_theta, m=cfg.m, k=cfg.k, variant="mean",
        seed=cfg.seed, sigma_theta_override=cfg.sigma_theta_override,
        bounded_support_mode=cfg.bounded_support_mode,
    )
    est = _run_pipeline(data, base_cfg, log_ratio)

    diagnostics = dict(est.diagnostics)
    diagnostics["variant"] = "plugin_ratio" if cfg.variant == "plugin_ratio" else cfg.variant
    wm = diagnostics.get("weight_mean", 1.0)
    diagnostics["ratio_warning"] = not (0.5 < wm < 2.0)
    if ratio_spec.reference is not None:
        truth = design_log_ratio(ratio_spec.reference, cfg.h)
        thetas = _draw_thetas(data.d, base_cfg)
        parts = _partition_indices(data.n, base_cfg)
        a_acc, b_acc, count = 0.0, 0.0, 0
        for j in range(base_cfg.m):
            idx = parts[j].ravel()
            x = data.x[idx]
            lw_hat = log_ratio(x, thetas[j])
            lw_true = truth(x, thetas[j])
            ok = np.isfinite(lw_hat) & np.isfinite(lw_true)
            rel = np.exp(lw_hat[ok] - lw_true[ok])
            diff = np.exp(lw_hat[ok]) - np.exp(lw_true[ok])
            a_acc += float(np.sum(rel**4))
            b_acc += float(np.sum(diff**2))
            count += int(np.sum(ok))
        diagnostics["a_n"] = a_acc / max(count, 1)
        diagnostics["b_n"] = b_acc / max(count, 1)
        if not 0.5 < diagnostics["a_n"] < 2.0:
            diagnostics["ratio_warning"] = True
    return SubspaceEstimate(
        u_hat=est.u_hat,
        eigenvalues=est.eigenvalues,
        eigengap=est.eigengap,
        m_hat=est.m_hat,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# Hyperparameter helpers
# ---------------------------------------------------------------------------

def bandwidth_for_bounded_support(support_radius: float, d: int, n: int) -> float:
    """Smoothing radius for a design supported on a ball.

    ``radius / (4 (sqrt(d) + sqrt(log n)))`` keeps essentially all of the
    probe Gaussian's mass inside the support, so the truncation bias decays
    faster than the statistical error.
    """
    if support_radius <= 0:
        raise ParameterError(f"support radius must be > 0, got {support_radius}")
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    return support_radius / (4.0 * (math.sqrt(d) + math.sqrt(math.log(n))))


def default_sigma_theta(h: float, d: int, r: int | None = None) -> float:
    """Probe spread minimizing the error prefactor.

    With a known polynomial degree ``r >= 2`` this is
    ``h sqrt((r-1) / (20(r-1) + 10d))``; otherwise (including degree-1
    links, whose smoothed gradients do not depend on the spread) the
    simulation default ``h / sqrt(20 + 10d)``.
    """
    if h <= 0:
        raise ParameterError(f"h must be > 0, got {h}")
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    if r is None or r < 2:
        return h / math.sqrt(20.0 + 10.0 * d)
    return h * math.sqrt((r - 1) / (20.0 * (r - 1) + 10.0 * d))


def mom_partition_count(delta: float) -> int:
    """Partition count giving failure probability ~delta for the
    median-of-means variant (m of roughly 8 log(1/delta))."""
    if not 0 < delta < 1:
        raise ParameterError(f"delta must be in (0, 1), got {delta}")
    return max(1, math.ceil(8.0 * math.log(1.0 / delta)))
