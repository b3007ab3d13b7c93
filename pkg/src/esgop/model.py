"""Multi-index data generation, design distributions, and analytic oracles.

A multi-index model is a regression whose conditional mean depends on the
covariates only through a k-dimensional projection: ``E[Y|X] = f(U' X)``
with orthonormal ``U`` (d x k) and a link ``f``.  This module provides:

* link functions (polynomial links carry exact gradients and exact
  Gaussian-smoothed gradients, used as test oracles),
* design distributions with samplers and log-densities (all density work
  is done in log space so d ~ 10 does not underflow),
* the importance weight ``rho_h(x; theta)`` converting design-distribution
  averages into averages under ``N(theta, h^2 I)``,
* closed forms for the fifth-moment of the weight under Gaussian designs
  and for the minimum signal strength of a link,
* the even/odd-mixing link used to demonstrate that sliced average
  variance estimation can miss a genuine index direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.stats import chi2, norm

from .errors import (
    CapabilityError,
    DataError,
    ParameterError,
    ShapeError,
    SupportError,
)
from .numkit import RngStream, sample_cauchy, sample_gaussian, sym_eigen

__all__ = [
    "LinkFunction",
    "linear_link",
    "polynomial_link",
    "custom_link",
    "NoiseSpec",
    "DesignDistribution",
    "gaussian_design",
    "cauchy_design",
    "product_cauchy_design",
    "truncated_gaussian_design",
    "custom_design",
    "make_design",
    "Dataset",
    "MultiIndexModel",
    "generate",
    "gaussian_log_density",
    "density_ratio",
    "SmoothedGradient",
    "true_smoothed_gradient",
    "smoothed_index_gradient",
    "minimum_signal_strength",
    "moment_mu_rho_closed_form",
    "gaussian_interval_second_moment",
    "save_nu",
    "save_nu_inverse",
    "construct_save_counterexample_link",
    "model_preset",
    "MODEL_PRESETS",
]


# ---------------------------------------------------------------------------
# Link functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkFunction:
    """A link ``f: R^k -> R`` with optional gradient and monomial form.

    ``evaluate`` maps an (n, k) array of projected covariates to (n,)
    responses.  ``gradient`` (optional) maps (n, k) -> (n, k).  For
    polynomial links ``monomials`` holds ``(coefficient, exponents)`` pairs,
    which unlocks exact Gaussian-smoothed gradients.
    """

    k: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    monomials: tuple[tuple[float, tuple[int, ...]], ...] | None = None
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ParameterError(f"link dimension must be >= 1, got {self.k}")
        if self.monomials is not None:
            for _, exps in self.monomials:
                if len(exps) != self.k or any(e < 0 for e in exps):
                    raise ParameterError(f"bad monomial exponents {exps} for k={self.k}")

    @property
    def degree(self) -> int | None:
        if self.monomials is None:
            return None
        return max((sum(e) for _, e in self.monomials), default=0)


def _poly_eval(monomials, z: np.ndarray) -> np.ndarray:
    out = np.zeros(z.shape[0])
    for c, exps in monomials:
        term = np.full(z.shape[0], c)
        for j, e in enumerate(exps):
            if e:
                term = term * z[:, j] ** e
        out += term
    return out


def _poly_grad(monomials, k: int, z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    for c, exps in monomials:
        for i, e_i in enumerate(exps):
            if e_i == 0:
                continue
            term = np.full(z.shape[0], c * e_i)
            for j, e in enumerate(exps):
                p = e - 1 if j == i else e
                if p:
                    term = term * z[:, j] ** p
            out[:, i] += term
    return out


def polynomial_link(monomials, k: int, name: str = "polynomial") -> LinkFunction:
    """Build a polynomial link from ``(coefficient, exponents)`` pairs.

    Example: ``polynomial_link([(1.0, (2, 0, 0)), (1.0, (0, 1, 1))], k=3)``
    is ``f(z) = z1^2 + z2*z3``.
    """
    terms = tuple((float(c), tuple(int(e) for e in exps)) for c, exps in monomials)
    return LinkFunction(
        k=k,
        evaluate=lambda z: _poly_eval(terms, np.atleast_2d(z)),
        gradient=lambda z: _poly_grad(terms, k, np.atleast_2d(z)),
        monomials=terms,
        name=name,
    )


def linear_link(a: np.ndarray) -> LinkFunction:
    """Linear link ``f(z) = a . z``."""
    a = np.asarray(a, dtype=float).ravel()
    k = a.size
    monos = [(a[j], tuple(1 if i == j else 0 for i in range(k))) for j in range(k)]
    return polynomial_link(monos, k, name="linear")


def custom_link(
    k: int,
    evaluate: Callable[[np.ndarray], np.ndarray],
    gradient: Callable[[np.ndarray], np.ndarray] | None = None,
    name: str = "custom",
) -> LinkFunction:
    return LinkFunction(k=k, evaluate=evaluate, gradient=gradient, name=name)


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise on the response: none, Gaussian, or Student-t.

    The Student-t family exists to stress robust aggregation; it violates
    the subgaussian-tail condition the mean pipeline is analysed under.
    """

    family: str = "none"
    sigma_y: float = 0.0
    df: float | None = None

    def __post_init__(self) -> None:
        if self.family not in ("none", "gaussian", "student_t"):
            raise ParameterError(f"unknown noise family {self.family!r}")
        if self.sigma_y < 0:
            raise ParameterError(f"sigma_y must be >= 0, got {self.sigma_y}")
        if self.family == "student_t" and (self.df is None or self.df <= 1):
            raise ParameterError("student_t noise needs df > 1")

    @staticmethod
    def none() -> "NoiseSpec":
        return NoiseSpec("none", 0.0)

    @staticmethod
    def gaussian(sigma_y: float) -> "NoiseSpec":
        return NoiseSpec("gaussian", sigma_y)

    @staticmethod
    def student_t(df: float, scale: float) -> "NoiseSpec":
        return NoiseSpec("student_t", scale, df)

    def sample(self, stream: RngStream, n: int) -> np.ndarray:
        if self.family == "none" or self.sigma_y == 0.0:
            return np.zeros(n)
        g = stream.generator()
        if self.family == "gaussian":
            return self.sigma_y * g.standard_normal(n)
        return self.sigma_y * g.standard_t(self.df, size=n)


# ---------------------------------------------------------------------------
# Design distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignDistribution:
    """Covariate distribution: a sampler plus a log-density.

    ``log_density`` is vectorised, (n, d) -> (n,), and returns ``-inf``
    outside the support.
    """

    family: str
    d: int
    sample_fn: Callable[[RngStream, int], np.ndarray]
    log_density_fn: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    def sample(self, stream: RngStream, n: int) -> np.ndarray:
        if n < 1:
            raise ParameterError(f"n must be >= 1, got {n}")
        return self.sample_fn(stream, n)

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise ShapeError(f"points have dimension {x.shape[1]}, design has d={self.d}")
        return self.log_density_fn(x)


def gaussian_design(d: int, sigma: float = 1.0) -> DesignDistribution:
    if sigma <= 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    const = -0.5 * d * math.log(2.0 * math.pi * sigma * sigma)

    def logp(x: np.ndarray) -> np.ndarray:
        return const - 0.5 * np.sum(x * x, axis=1) / (sigma * sigma)

    return DesignDistribution(
        "gaussian", d,
        lambda stream, n: sample_gaussian(stream, n, d, 0.0, sigma),
        logp,
        {"sigma": sigma},
    )


def cauchy_design(d: int) -> DesignDistribution:
    """Isotropic standard Cauchy: a multivariate t with one degree of
    freedom.  Its density is bounded away from zero on compact sets much
    more generously than the coordinate-product variant, which keeps the
    importance weights bounded for every usable smoothing radius."""
    log_const = (
        math.lgamma((d + 1) / 2.0) - math.lgamma(0.5) - 0.5 * d * math.log(math.pi)
    )

    def sample(stream: RngStream, n: int) -> np.ndarray:
        g = stream.generator()
        z = g.standard_normal((n, d))
        w = g.chisquare(1, size=n)
        return z / np.sqrt(w)[:, None]

    def logp(x: np.ndarray) -> np.ndarray:
        return log_const - 0.5 * (d + 1) * np.log1p(np.sum(x * x, axis=1))

    return DesignDistribution("cauchy", d, sample, logp, {})


def product_cauchy_design(d: int) -> DesignDistribution:
    """Coordinatewise-independent standard Cauchy covariates."""
    def logp(x: np.ndarray) -> np.ndarray:
        return np.sum(-np.log(np.pi) - np.log1p(x * x), axis=1)

    return DesignDistribution(
        "product_cauchy", d,
        lambda stream, n: sample_cauchy(stream, n, d),
        logp,
        {},
    )


def truncated_gaussian_design(d: int, radius: float, sigma: float = 1.0) -> DesignDistribution:
    """Standard Gaussian (scale ``sigma``) conditioned on the ball ||x|| <= radius."""
    if radius <= 0:
        raise ParameterError(f"radius must be > 0, got {radius}")
    if sigma <= 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    log_mass = math.log(chi2.cdf((radius / sigma) ** 2, d))
    const = -0.5 * d * math.log(2.0 * math.pi * sigma * sigma) - log_mass

    def sample(stream: RngStream, n: int) -> np.ndarray:
        g = stream.generator()
        out = np.empty((n, d))
        filled = 0
        while filled < n:
            batch = g.standard_normal((max(n - filled, 64), d)) * sigma
            keep = batch[np.sum(batch * batch, axis=1) <= radius * radius]
            take = min(keep.shape[0], n - filled)
            out[filled:filled + take] = keep[:take]
            filled += take
        return out

    def logp(x: np.ndarray) -> np.ndarray:
        sq = np.sum(x * x, axis=1)
        vals = const - 0.5 * sq / (sigma * sigma)
        return np.where(sq <= radius * radius, vals, -np.inf)

    return DesignDistribution(
        "truncated_gaussian", d, sample, logp, {"radius": radius, "sigma": sigma}
    )


def custom_design(
    d: int,
    sample: Callable[[RngStream, int], np.ndarray],
    log_density: Callable[[np.ndarray], np.ndarray],
) -> DesignDistribution:
    return DesignDistribution("custom", d, sample, log_density, {})


def make_design(family: str, d: int, **params) -> DesignDistribution:
    """Design factory used by configs: gaussian, cauchy, or truncated_gaussian."""
    if family == "gaussian":
        return gaussian_design(d, params.get("sigma", 1.0))
    if family == "cauchy":
        return cauchy_design(d)
    if family == "product_cauchy":
        return product_cauchy_design(d)
    if family == "truncated_gaussian":
        if "radius" not in params:
            raise ParameterError("truncated_gaussian design needs a 'radius'")
        return truncated_gaussian_design(d, params["radius"], params.get("sigma", 1.0))
    raise ParameterError(f"unknown design family {family!r}")


# ---------------------------------------------------------------------------
# Model and data generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Covariates ``x`` (n, d) paired with responses ``y`` (n,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        if self.x.ndim != 2 or self.y.ndim != 1:
            raise ShapeError("x must be (n, d) and y must be (n,)")
        if self.x.shape[0] != self.y.shape[0]:
            raise ShapeError(
                f"row counts disagree: x has {self.x.shape[0]}, y has {self.y.shape[0]}"
            )
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise DataError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class MultiIndexModel:
    """Ground-truth model ``Y = f(U' X) + noise`` with orthonormal ``U``."""

    d: int
    k: int
    u: np.ndarray
    link: LinkFunction
    noise: NoiseSpec = field(default_factory=NoiseSpec.none)

    def __post_init__(self) -> None:
        if self.k > self.d:
            raise ParameterError(f"k={self.k} exceeds ambient dimension d={self.d}")
        if self.u.shape != (self.d, self.k):
            raise ShapeError(f"U must be ({self.d}, {self.k}), got {self.u.shape}")
        gram = self.u.T @ self.u
        if np.max(np.abs(gram - np.eye(self.k))) > 1e-10:
            raise ShapeError("U must have orthonormal columns (tolerance 1e-10)")
        if self.link.k != self.k:
            raise ShapeError(f"link expects k={self.link.k}, model has k={self.k}")

    def regression(self, x: np.ndarray) -> np.ndarray:
        """Noiseless conditional mean at the rows of ``x``."""
        return self.link.evaluate(np.atleast_2d(x) @ self.u)


def generate(
    model: MultiIndexModel,
    design: DesignDistribution,
    n: int,
    stream: RngStream,
) -> Dataset:
    """Draw ``n`` i.i.d. pairs: covariates from the design, responses from
    the model.  The same stream always yields the same dataset."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if design.d != model.d:
        raise ShapeError(f"design dimension {design.d} != model dimension {model.d}")
    x = design.sample(stream.child("x"), n)
    y = model.regression(x) + model.noise.sample(stream.child("noise"), n)
    return Dataset(x, y)


# ---------------------------------------------------------------------------
# Importance weights
# ---------------------------------------------------------------------------

def gaussian_log_density(v: np.ndarray, h: float) -> np.ndarray:
    """Log-density of N(0, h^2 I_d) at the rows of ``v``."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    d = v.shape[1]
    return -0.5 * d * math.log(2.0 * math.pi * h * h) - 0.5 * np.sum(v * v, axis=1) / (h * h)


def density_ratio(
    design: DesignDistribution,
    h: float,
    theta: np.ndarray,
    x: np.ndarray,
) -> float:
    """Importance weight ``rho_h(x; theta)``: the N(theta, h^2 I) density
    over the design density, evaluated in log space.

    Raises SupportError when ``x`` falls outside the design's support.
    """
    if h <= 0:
        raise ParameterError(f"h must be > 0, got {h}")
    theta = np.asarray(theta, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != theta.shape or x.size != design.d:
        raise ShapeError("x and theta must both have the design's dimension")
    logp = float(design.log_density(x[None, :])[0])
    if not np.isfinite(logp):
        raise SupportError("x lies outside the support of the design distribution")
    lognum = float(gaussian_log_density((x - theta)[None, :], h)[0])
    return float(np.exp(lognum - logp))


# ---------------------------------------------------------------------------
# Smoothed gradient oracles
# ---------------------------------------------------------------------------

def _gaussian_moments(mu: float, s2: float, pmax: int) -> list[float]:
    # E[W^p] for W ~ N(mu, s2); recursion m_p = mu m_{p-1} + (p-1) s2 m_{p-2}.
    m = [1.0, mu]
    for p in range(2, pmax + 1):
        m.append(mu * m[p - 1] + (p - 1) * s2 * m[p - 2])
    return m[: pmax + 1]


def _analytic_index_gradient(link: LinkFunction, h: float, mu: np.ndarray) -> np.ndarray:
    # Exact E[grad f(W)] for W ~ N(mu, h^2 I_k) and polynomial f: the
    # coordinates of W are independent, so each monomial factorises into
    # one-dimensional Gaussian moments.
    k = link.k
    pmax = max((max(exps) for _, exps in link.monomials), default=0)
    moments = [_gaussian_moments(float(mu[j]), h * h, pmax) for j in range(k)]
    out = np.zeros(k)
    for c, exps in link.monomials:
        for i, e_i in enumerate(exps):
            if e_i == 0:
                continue
            term = c * e_i * moments[i][e_i - 1]
            for j, e in enumerate(exps):
                if j != i and e:
                    term *= moments[j][e]
            out[i] += term
    return out


@dataclass(frozen=True)
class SmoothedGradient:
    """A smoothed-gradient value with provenance.

    ``method`` is "analytic" (exact, polynomial links), "mc_gradient"
    (Monte-Carlo average of the link gradient) or "mc_stein" (gradient-free
    Monte-Carlo using the Gaussian integration-by-parts identity).
    ``standard_error`` is per-coordinate and ``None`` for analytic values.
    """

    value: np.ndarray
    standard_error: np.ndarray | None
    method: str


def smoothed_index_gradient(
    link: LinkFunction,
    h: float,
    mu: np.ndarray,
    mc_budget: int | None = None,
    stream: RngStream | None = None,
) -> SmoothedGradient:
    """E[grad f(W)] for W ~ N(mu, h^2 I_k), exact where possible.

    For links without a monomial form, falls back to Monte-Carlo with the
    declared ``mc_budget``: averaging the gradient if one is available,
    otherwise the integration-by-parts estimate h^-2 E[f(W)(W - mu)].
    """
    if h <= 0:
        raise ParameterError(f"h must be > 0, got {h}")
    mu = np.asarray(mu, dtype=float).ravel()
    if mu.size != link.k:
        raise ShapeError(f"mu has size {mu.size}, link expects k={link.k}")
    if link.monomials is not None:
        return SmoothedGradient(_analytic_index_gradient(link, h, mu), None, "analytic")
    if mc_budget is None or mc_budget < 1:
        raise CapabilityError(
            "link has no closed-form smoothed gradient; pass an mc_budget"
        )
    if stream is None:
        stream = RngStream(0)
    w = mu + h * stream.generator().standard_normal((mc_budget, link.k))
    if link.gradient is not None:
        g = link.gradient(w)
        method = "mc_gradient"
    else:
        g = (link.evaluate(w)[:, None] * (w - mu)) / (h * h)
        method = "mc_stein"
    value = g.mean(axis=0)
    se = g.std(axis=0, ddof=1) / math.sqrt(mc_budget)
    return SmoothedGradient(value, se, method)


def true_smoothed_gradient(
    model: MultiIndexModel,
    h: float,
    theta: np.ndarray,
    mc_budget: int | None = None,
    stream: RngStream | None = None,
) -> SmoothedGradient:
    """The population smoothed gradient ``beta_h(theta)`` in ambient space.

    Equals ``U E[grad f(W)]`` with ``W ~ N(U' theta, h^2 I_k)``; the target
    the reweighted sample estimator is unbiased for.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != model.d:
        raise ShapeError(f"theta has size {theta.size}, model has d={model.d}")
    inner = smoothed_index_gradient(model.link, h, model.u.T @ theta, mc_budget, stream)
    se = None if inner.standard_error is None else np.abs(model.u) @ inner.standard_error
    return SmoothedGradient(model.u @ inner.value, se, inner.method)


def minimum_signal_strength(
    model: MultiIndexModel,
    mc_budget: int,
    stream: RngStream,
) -> float:
    """Smallest eigenvalue of E[grad f(Z) grad f(Z)'] over Z ~ N(0, I_k).

    This is the worst-direction second moment of the link gradient; it is
    strictly positive whenever the index space cannot be reduced further.
    """
    if mc_budget < 1:
        raise ParameterError(f"mc_budget must be >= 1, got {mc_budget}")
    link = model.link
    if link.monomials is not None:
        grad = lambda z: _poly_grad(link.monomials, link.k, z)
    elif link.gradient is not None:
        grad = link.gradient
    else:
        raise CapabilityError("minimum signal strength needs a link gradient")
    z = stream.generator().standard_normal((mc_budget, link.k))
    g = grad(z)
    c = (g.T @ g) / mc_budget
    return float(sym_eigen(0.5 * (c + c.T)).eigenvalues[-1])


def moment_mu_rho_closed_form(sigma: float, h: float, d: int) -> float:
    """Fifth-moment norm of the importance weight under a Gaussian design.

    For a N(0, sigma^2 I_d) design, (E rho^5)^(1/5) equals
    ``(5 h^8 / sigma^8 - 4 h^10 / sigma^10)^(-d/10)`` when
    ``h < sqrt(5) sigma / 2`` and is infinite beyond that threshold.
    """
    if sigma <= 0 or h <= 0:
        raise ParameterError("sigma and h must be > 0")
    if h >= math.sqrt(5.0) * sigma / 2.0:
        return math.inf
    r = h / sigma
    return float((5.0 * r**8 - 4.0 * r**10) ** (-d / 10.0))


# ---------------------------------------------------------------------------
# The sliced-average-variance counterexample link
# ---------------------------------------------------------------------------
#
# A single-index link f on a standard Gaussian covariate built so that the
# conditional second moment E[X X' | Y >= y] stays exactly I_2 for every
# threshold y: slice-variance methods see no signal at all, while the index
# direction is perfectly real.  The construction pairs each level set on
# [0, 1] with a matching tail level set via the decreasing map nu.

def gaussian_interval_second_moment(lo, hi):
    """E[Z^2 | Z in [lo, hi]] for standard normal Z (closed form)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    den = norm.cdf(hi) - norm.cdf(lo)
    num = lo * norm.pdf(lo) - hi * norm.pdf(hi)
    return 1.0 + num / den


_SAVE_Z_MAX = 50.0


@lru_cache(maxsize=1)
def _nu_interpolant() -> PchipInterpolator:
    # nu(z) solves E[Z^2 | Z in [nu(z), z]] = 1, equivalent to
    # nu * pdf(nu) = z * pdf(z); t pdf(t) is increasing on [0, 1] and
    # decreasing beyond, so the root is unique.  Tabulated on a log-spaced
    # grid and interpolated with a monotone cubic.
    zs = np.geomspace(1.0, _SAVE_Z_MAX, 10_000)
    targets = zs * norm.pdf(zs)
    roots = np.empty_like(zs)
    for i, t in enumerate(targets):
        if t <= 0.0:
            roots[i] = 0.0
        else:
            roots[i] = brentq(lambda a: a * norm.pdf(a) - t, 0.0, 1.0, xtol=1e-15)
    return PchipInterpolator(zs, roots, extrapolate=False)


def save_nu(z) -> np.ndarray:
    """The pairing map nu: [1, inf) -> (0, 1], decreasing, nu(1) = 1."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 1.0):
        raise ParameterError("nu is defined on [1, inf)")
    out = np.empty(z.shape)
    inside = z <= _SAVE_Z_MAX
    if np.any(inside):
        out[inside] = _nu_interpolant()(z[inside])
    if np.any(~inside):
        # asymptotic root of a*pdf(a) = z*pdf(z) for tiny right side
        zt = z[~inside]
        out[~inside] = zt * np.exp(-0.5 * zt * zt)
    return out


def save_nu_inverse(a: float) -> float:
    """Inverse of the pairing map: the z >= 1 with nu(z) = a, a in (0, 1]."""
    if not 0.0 < a <= 1.0:
        raise ParameterError(f"nu inverse is defined on (0, 1], got {a}")
    target = a * norm.pdf(a)
    return float(brentq(lambda z: z * norm.pdf(z) - target, 1.0, _SAVE_Z_MAX, xtol=1e-13))


def construct_save_counterexample_link() -> LinkFunction:
    """The single-index link that zeroes out slice-variance estimators.

    With base function f0(z) = z on [0, 1]:
    f(z) = 0 for z < 0, z on [0, 1], and nu(z) for z > 1.
    """

    def evaluate(z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)[:, 0]
        out = np.zeros(z.shape)
        mid = (z >= 0.0) & (z <= 1.0)
        out[mid] = z[mid]
        tail = z > 1.0
        if np.any(tail):
            out[tail] = save_nu(z[tail])
        return out

    return LinkFunction(k=1, evaluate=evaluate, name="save-counterexample")


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _basis_u(d: int, k: int) -> np.ndarray:
    return np.eye(d)[:, :k].copy()


def _preset_fig1(d: int | None, noise: NoiseSpec) -> MultiIndexModel:
    d = 10 if d is None else d
    if d < 3:
        raise ParameterError("the quadratic-plus-cross preset needs d >= 3")
    link = polynomial_link([(1.0, (2, 0, 0)), (1.0, (0, 1, 1))], k=3, name="z1^2+z2*z3")
    return MultiIndexModel(d, 3, _basis_u(d, 3), link, noise)


def _preset_save_demo(d: int | None, noise: NoiseSpec) -> MultiIndexModel:
    d = 2 if d is None else d
    if d < 1:
        raise ParameterError("save-demo needs d >= 1")
    return MultiIndexModel(d, 1, _basis_u(d, 1), construct_save_counterexample_link(), noise)


def _preset_phase_retrieval(d: int | None, noise: NoiseSpec) -> MultiIndexModel:
    d = 10 if d is None else d
    link = polynomial_link([(1.0, (2,))], k=1, name="z^2")
    return MultiIndexModel(d, 1, _basis_u(d, 1), link, noise)


def _preset_cubic(d: int | None, noise: NoiseSpec) -> MultiIndexModel:
    d = 10 if d is None else d
    link = polynomial_link([(1.0, (3,))], k=1, name="z^3")
    return MultiIndexModel(d, 1, _basis_u(d, 1), link, noise)


MODEL_PRESETS = {
    "paper-fig1": _preset_fig1,
    "save-demo": _preset_save_demo,
    "phase-retrieval": _preset_phase_retrieval,
    "cubic": _preset_cubic,
}


def model_preset(
    name: str,
    d: int | None = None,
    noise: NoiseSpec | None = None,
) -> MultiIndexModel:
    """Instantiate a named model preset (see ``MODEL_PRESETS`` for ids)."""
    if name not in MODEL_PRESETS:
        known = ", ".join(sorted(MODEL_PRESETS))
        raise ParameterError(f"unknown model preset {name!r}; known presets: {known}")
    return MODEL_PRESETS[name](d, noise if noise is not None else NoiseSpec.none())
