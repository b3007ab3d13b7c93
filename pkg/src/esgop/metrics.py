"""Subspace error metrics, moment diagnostics, and empirical rate fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DataError, ParameterError, ShapeError
from .estimator import EsgopConfig
from .model import DesignDistribution, MultiIndexModel, smoothed_index_gradient
from .numkit import RngStream, operator_norm, sym_eigen, thin_svd

__all__ = [
    "SubspaceDistanceReport",
    "subspace_distance",
    "MomentDiagnostics",
    "estimate_moments",
    "RateFit",
    "fit_rate",
]


@dataclass(frozen=True)
class SubspaceDistanceReport:
    """Two equivalent distances between column spaces.

    ``procrustes`` is the operator norm of ``U_hat R - U`` at the best
    orthogonal rotation R; ``sin_theta`` is the largest principal-angle
    sine.  They sandwich each other: sin_theta <= procrustes <=
    sqrt(2) sin_theta.
    """

    procrustes: float
    sin_theta: float
    optimal_rotation: np.ndarray


def _check_orthonormal(u: np.ndarray, name: str, tol: float = 1e-8) -> None:
    gram = u.T @ u
    if np.max(np.abs(gram - np.eye(u.shape[1]))) > tol:
        raise DataError(f"{name} does not have orthonormal columns (tolerance {tol})")


def subspace_distance(u_hat: np.ndarray, u: np.ndarray) -> SubspaceDistanceReport:
    """Distance between the column spaces of two orthonormal bases."""
    u_hat = np.asarray(u_hat, dtype=float)
    u = np.asarray(u, dtype=float)
    if u_hat.shape != u.shape:
        raise ShapeError(f"shape mismatch: {u_hat.shape} vs {u.shape}")
    if u_hat.ndim != 2 or u_hat.shape[0] < u_hat.shape[1]:
        raise ShapeError(f"expected tall (d, k) bases, got {u_hat.shape}")
    _check_orthonormal(u_hat, "u_hat")
    _check_orthonormal(u, "u")
    d, k = u.shape

    ls, _, rs = thin_svd(u_hat.T @ u)
    rotation = ls @ rs
    procrustes = operator_norm(u_hat @ rotation - u)

    if d == k:
        sin_theta = 0.0
    else:
        q, _ = np.linalg.qr(u, mode="complete")
        u_perp = q[:, k:]
        sin_theta = operator_norm(u_hat.T @ u_perp)
    return SubspaceDistanceReport(float(procrustes), float(min(sin_theta, 1.0)), rotation)


# ---------------------------------------------------------------------------
# Moment diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentDiagnostics:
    """Monte-Carlo estimates of the moment quantities the error analysis
    depends on, with block-jackknife standard errors.

    ``mu_rho`` is the fifth-moment norm of the importance weight at the
    origin, ``mu_f`` the sixth-moment norm of the link over the design,
    ``mu_delta`` the fourth-moment norm of the smoothed gradient over the
    probe distribution, and ``lambda_k_bar`` the k-th eigenvalue of the
    population outer-product matrix.  ``mu_rho_unstable`` flags a weight
    distribution too heavy-tailed for the estimate to be trusted.
    """

    mu_rho: float
    mu_rho_se: float
    mu_rho_unstable: bool
    mu_f: float
    mu_f_se: float
    mu_delta: float
    mu_delta_se: float
    lambda_k_bar: float
    lambda_k_bar_se: float


def _jackknife(block_values: np.ndarray) -> float:
    b = block_values.size
    if b < 2 or not np.all(np.isfinite(block_values)):
        return math.inf
    mean = block_values.mean()
    return float(math.sqrt((b - 1) / b * np.sum((block_values - mean) ** 2)))


def _power_mean_blocks(log_vals: np.ndarray, power: float, n_blocks: int) -> tuple[float, float, bool]:
    """(E exp(log_vals)^power)^(1/power) with leave-one-block-out spread."""
    n = log_vals.size
    blocks = np.array_split(log_vals * power, n_blocks)
    block_lse = np.array([logsumexp(b) for b in blocks])
    block_sizes = np.array([b.size for b in blocks], dtype=float)
    total = logsumexp(block_lse)
    estimate = math.exp((total - math.log(n)) / power)
    loo = np.empty(n_blocks)
    for i in range(n_blocks):
        rest = np.delete(block_lse, i)
        loo[i] = math.exp((logsumexp(rest) - math.log(n - block_sizes[i])) / power)
    se = _jackknife(loo)
    unstable = (not math.isfinite(estimate)) or (not math.isfinite(se)) or (
        estimate > 0 and se > 0.5 * estimate
    )
    return estimate, se, unstable


def estimate_moments(
    model: MultiIndexModel,
    design: DesignDistribution,
    cfg: EsgopConfig,
    mc_budget: int,
    stream: RngStream,
    n_theta: int = 1000,
    n_blocks: int = 20,
) -> MomentDiagnostics:
    """Monte-Carlo moment diagnostics at the configuration's (h, sigma_theta)."""
    if mc_budget < 10_000:
        raise ParameterError(f"mc_budget must be >= 10000, got {mc_budget}")
    h = cfg.h
    origin = np.zeros(model.d)

    # Weight and link moments share one design sample, drawn in chunks to
    # bound memory at large budgets.
    chunk = 1_000_000
    log_rho_parts, f_parts = [], []
    x_stream = stream.child("x")
    done = 0
    while done < mc_budget:
        take = min(chunk, mc_budget - done)
        x = design.sample(x_stream.child(done), take)
        log_rho_parts.append(
            -0.5 * model.d * math.log(2 * math.pi * h * h)
            - 0.5 * np.sum(x * x, axis=1) / (h * h)
            - design.log_density(x)
        )
        f_parts.append(model.link.evaluate(x @ model.u))
        done += take
    log_rho = np.concatenate(log_rho_parts)
    f_vals = np.concatenate(f_parts)

    mu_rho, mu_rho_se, unstable = _power_mean_blocks(log_rho, 5.0, n_blocks)
    with np.errstate(divide="ignore"):
        log_abs_f = np.log(np.abs(f_vals))
    log_abs_f = log_abs_f[np.isfinite(log_abs_f)]
    if log_abs_f.size == 0:
        mu_f, mu_f_se = 0.0, 0.0
    else:
        # zero link values contribute nothing to the sixth moment; correct
        # the denominator back to the full budget
        mu_f_raw, mu_f_se, _ = _power_mean_blocks(log_abs_f, 6.0, n_blocks)
        adjust = (log_abs_f.size / mc_budget) ** (1.0 / 6.0)
        mu_f, mu_f_se = mu_f_raw * adjust, mu_f_se * adjust

    thetas = cfg.sigma_theta * stream.child("theta").generator().standard_normal(
        (n_theta, model.d)
    )
    grads = np.stack(
        [
            smoothed_index_gradient(
                model.link, h, model.u.T @ t, mc_budget=10_000, stream=stream.child("mc", i)
            ).value
            for i, t in enumerate(thetas)
        ]
    )
    norms4 = np.sum(grads * grads, axis=1) ** 2
    mu_delta = float(np.mean(norms4) ** 0.25)
    delta_blocks = np.array([np.mean(b) ** 0.25 for b in np.array_split(norms4, 10)])
    mu_delta_se = _jackknife(delta_blocks)

    lam_blocks = []
    for block in np.array_split(grads, 10):
        c = block.T @ block / block.shape[0]
        lam_blocks.append(sym_eigen(0.5 * (c + c.T)).eigenvalues[model.k - 1])
    c_full = grads.T @ grads / n_theta
    lambda_k = float(sym_eigen(0.5 * (c_full + c_full.T)).eigenvalues[model.k - 1])
    lambda_k_se = _jackknife(np.asarray(lam_blocks))

    return MomentDiagnostics(
        mu_rho=mu_rho,
        mu_rho_se=mu_rho_se,
        mu_rho_unstable=unstable,
        mu_f=mu_f,
        mu_f_se=mu_f_se,
        mu_delta=mu_delta,
        mu_delta_se=mu_delta_se,
        lambda_k_bar=lambda_k,
        lambda_k_bar_se=lambda_k_se,
    )


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


def fit_rate(points: list[tuple[float, float]]) -> RateFit:
    """Least-squares slope of log(error) against log(n).

    Needs at least three points with strictly positive errors; a slope
    near -1/2 is the parametric-rate signature.
    """
    if len(points) < 3:
        raise ParameterError(f"rate fit needs >= 3 points, got {len(points)}")
    n = np.array([p[0] for p in points], dtype=float)
    err = np.array([p[1] for p in points], dtype=float)
    if np.any(n <= 0):
        raise ParameterError("sample sizes must be positive")
    if np.any(err <= 0):
        raise ParameterError("errors must be strictly positive for a log-log fit")
    lx, ly = np.log(n), np.log(err)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot < 1e-300 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(float(slope), float(intercept), r2)
