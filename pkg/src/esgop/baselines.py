"""Classical inverse- and forward-regression baselines.

Sliced inverse regression (slice means), sliced average second-moment
deviations, and a finite-sample expected-gradient-outer-product estimator.
Also includes the demonstration that slice-variance methods can assign
zero signal to a genuine index direction, using the purpose-built link
from :mod:`esgop.model`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError, ParameterError, PartitionError
from .estimator import (
    EsgopConfig,
    default_sigma_theta,
    estimate_lle_gradient,
    fit,
)
from .metrics import subspace_distance
from .model import (
    Dataset,
    gaussian_design,
    generate,
    model_preset,
    save_nu_inverse,
)
from .numkit import RngStream, operator_norm, sym_eigen

__all__ = [
    "SliceSpec",
    "BaselineEstimate",
    "sir",
    "save",
    "egop",
    "save_counterexample_demo",
]


@dataclass(frozen=True)
class SliceSpec:
    """Equal-count quantile slicing on the response."""

    n_slices: int = 10

    def __post_init__(self) -> None:
        if self.n_slices < 2:
            raise ParameterError(f"need at least 2 slices, got {self.n_slices}")


@dataclass(frozen=True)
class BaselineEstimate:
    method: str
    m_hat: np.ndarray
    u_hat: np.ndarray
    eigenvalues: np.ndarray
    info: dict = field(default_factory=dict)


def _slice_indices(y: np.ndarray, n_slices: int) -> list[np.ndarray]:
    # Equal-count slices on sort order; ties are split across boundaries,
    # which keeps every slice non-empty and only depends on Y's order.
    order = np.argsort(y, kind="stable")
    return np.array_split(order, n_slices)


def _whiten(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Center and whiten; returns (z, inverse square root of covariance)."""
    d = x.shape[1]
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    cov += (1e-8 * np.trace(cov) / d) * np.eye(d)
    eig = sym_eigen(cov)
    if eig.eigenvalues[-1] <= 0:
        raise ConditioningError("sample covariance is singular")
    w = eig.eigenvectors @ np.diag(eig.eigenvalues**-0.5) @ eig.eigenvectors.T
    return centered @ w, w


def _finish(method: str, m_hat: np.ndarray, k: int, info: dict) -> BaselineEstimate:
    m_hat = 0.5 * (m_hat + m_hat.T)
    eig = sym_eigen(m_hat)
    return BaselineEstimate(method, m_hat, eig.eigenvectors[:, :k], eig.eigenvalues, info)


def sir(data: Dataset, slices: SliceSpec, k: int) -> BaselineEstimate:
    """Sliced inverse regression: between-slice covariance of slice means."""
    if data.n < 2 * slices.n_slices:
        raise PartitionError(f"n={data.n} too small for {slices.n_slices} slices")
    if k > data.d:
        raise ParameterError(f"k={k} exceeds d={data.d}")
    z, w = _whiten(data.x)
    m_z = np.zeros((data.d, data.d))
    for idx in _slice_indices(data.y, slices.n_slices):
        mean = z[idx].mean(axis=0)
        m_z += (idx.size / data.n) * np.outer(mean, mean)
    return _finish("sir", w @ m_z @ w, k, {"n_slices": slices.n_slices})


def save(data: Dataset, slices: SliceSpec, k: int) -> BaselineEstimate:
    """Sliced average deviation of the conditional second moment.

    Uses the second-moment form E[(I - E[Z Z'|slice])^2] on whitened
    covariates, whose population value vanishes exactly on links that keep
    E[X X' | Y >= y] at the identity for every threshold.
    """
    if data.n < 2 * slices.n_slices:
        raise PartitionError(f"n={data.n} too small for {slices.n_slices} slices")
    if k > data.d:
        raise ParameterError(f"k={k} exceeds d={data.d}")
    z, w = _whiten(data.x)
    eye = np.eye(data.d)
    m_z = np.zeros((data.d, data.d))
    for idx in _slice_indices(data.y, slices.n_slices):
        zs = z[idx]
        second = zs.T @ zs / idx.size
        dev = eye - second
        m_z += (idx.size / data.n) * (dev @ dev)
    return _finish("save", w @ m_z @ w, k, {"n_slices": slices.n_slices})


def egop(
    data: Dataset,
    k: int,
    bandwidth: float,
    n_eval: int = 200,
    stream: RngStream | None = None,
) -> BaselineEstimate:
    """Average outer product of local-linear gradient estimates.

    Gradients are fitted at a random subsample of training points with a
    plain Gaussian kernel of the given bandwidth (no reweighting).
    Singular local fits are skipped and counted.
    """
    if bandwidth <= 0:
        raise ParameterError(f"bandwidth must be > 0, got {bandwidth}")
    if data.n < data.d + 2:
        raise PartitionError(f"n={data.n} too small for local fits in d={data.d}")
    if k > data.d:
        raise ParameterError(f"k={k} exceeds d={data.d}")
    if stream is None:
        stream = RngStream(0)
    n_eval = min(n_eval, data.n)
    pick = stream.generator().choice(data.n, size=n_eval, replace=False)
    m_hat = np.zeros((data.d, data.d))
    skipped = 0
    used = 0
    for i in pick:
        point = data.x[i]
        diff = data.x - point
        log_w = -0.5 * np.sum(diff * diff, axis=1) / (bandwidth * bandwidth)
        try:
            grad = estimate_lle_gradient(data, point, bandwidth, log_weights=log_w)
        except ConditioningError:
            skipped += 1
            continue
        m_hat += np.outer(grad, grad)
        used += 1
    if used == 0:
        raise ConditioningError("all local fits were singular")
    return _finish("egop", m_hat / used, k, {"n_eval": used, "skipped": skipped})


def save_counterexample_demo(
    n: int,
    stream: RngStream,
    moment_check_n: int = 1_000_000,
    n_slices: int = 10,
    h: float = 1.0,
    m: int = 15,
) -> dict:
    """Run the slice-blindness demonstration end to end.

    Generates the two-dimensional single-index model whose conditional
    second moment is constant in the response, then reports how much
    signal the slicing baselines see (operator norms of their matrices),
    the reweighted pipeline's subspace error, and a direct Monte-Carlo
    check that E[X X' | Y >= y] is the identity on a grid of thresholds.
    """
    if n < 10_000:
        raise ParameterError(f"demo needs n >= 10000, got {n}")
    model = model_preset("save-demo")
    design = gaussian_design(model.d)
    data = generate(model, design, n, stream.child("data"))

    slices = SliceSpec(n_slices)
    save_est = save(data, slices, 1)
    sir_est = sir(data, slices, 1)

    cfg = EsgopConfig(
        h=h,
        sigma_theta=default_sigma_theta(h, model.d),
        m=m,
        k=1,
        seed=stream.child("esgop").stream,
    )
    esgop_est = fit(data, design, cfg)
    esgop_err = subspace_distance(esgop_est.u_hat, model.u).procrustes

    check = generate(model, design, moment_check_n, stream.child("moments"))
    y_grid = [0.1, 0.3, 0.5, 0.7, 0.9]
    moment_rows = []
    for y0 in y_grid:
        sel = check.y >= y0
        xs = check.x[sel]
        second = xs.T @ xs / xs.shape[0]
        moment_rows.append(
            {
                "y": y0,
                "count": int(xs.shape[0]),
                "max_abs_dev": float(np.max(np.abs(second - np.eye(model.d)))),
                "interval": [y0, save_nu_inverse(y0)],
            }
        )

    return {
        "n": n,
        "moment_check_n": moment_check_n,
        "save_m_op": float(operator_norm(save_est.m_hat)),
        "sir_m_op": float(operator_norm(sir_est.m_hat)),
        "esgop_error": float(esgop_err),
        "esgop_eigengap": float(esgop_est.eigengap),
        "moment_checks": moment_rows,
        "moment_max_abs_dev": max(r["max_abs_dev"] for r in moment_rows),
    }
