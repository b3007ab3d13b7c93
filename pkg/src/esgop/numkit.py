"""Dense linear algebra and reproducible sampling kernel.

Thin wrappers around LAPACK (via numpy) that pin down the conventions the
rest of the package relies on: descending spectra, a deterministic
eigenvector sign, and counter-based random streams keyed by
``(seed, stream)`` so that parallel replicates reproduce bit-for-bit
regardless of scheduling.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError, ShapeError

__all__ = [
    "RngStream",
    "SymEigen",
    "mix64",
    "sym_eigen",
    "thin_svd",
    "operator_norm",
    "sample_gaussian",
    "sample_cauchy",
]


def mix64(*parts: int | str) -> int:
    """Collapse a tuple of ints/strings into a stable 64-bit value.

    Used to derive substream ids and per-cell seeds.  blake2b keeps the
    mapping platform independent (unlike the salted builtin ``hash``).
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, str):
            h.update(b"s" + part.encode("utf-8"))
        else:
            h.update(b"i" + int(part).to_bytes(8, "little", signed=False))
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Identical ``(seed, stream)`` pairs yield identical sequences on every
    platform; distinct stream ids give statistically independent sequences.
    Backed by the Philox counter-based bit generator, so streams can be
    handed to worker processes without coordination.
    """

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not 0 <= int(value) < 2**64:
                raise ParameterError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *tags: int | str) -> "RngStream":
        """Derive an independent substream labelled by ``tags``."""
        return RngStream(self.seed, mix64(self.stream, *tags))


@dataclass(frozen=True)
class SymEigen:
    """Spectral decomposition with eigenvalues sorted descending.

    Column ``i`` of ``eigenvectors`` pairs with ``eigenvalues[i]``.  Each
    eigenvector is signed so its largest-magnitude entry is positive (ties
    broken by lowest index), which makes repeated decompositions bit-stable.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise DataError(f"{what} contains non-finite entries")


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made positive; np.argmax picks
    # the lowest index on ties.
    lead = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[lead, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eigen(a: np.ndarray, rel_tol: float = 1e-12) -> SymEigen:
    """Full spectral decomposition of a symmetric matrix.

    Parameters
    ----------
    a : (n, n) array
        Symmetric to within ``rel_tol`` relative to its largest entry.

    Returns
    -------
    SymEigen with descending eigenvalues and sign-fixed orthonormal columns.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    _check_finite(a, "matrix")
    scale = max(1.0, float(np.max(np.abs(a))))
    if float(np.max(np.abs(a - a.T))) > rel_tol * scale:
        raise ShapeError("matrix is not symmetric within tolerance")
    sym = 0.5 * (a + a.T)
    values, vectors = np.linalg.eigh(sym)
    order = np.argsort(values)[::-1]  # stable descending
    return SymEigen(values[order], _fix_signs(vectors[:, order]))


def thin_svd(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``a = u @ diag(s) @ vt`` with singular values descending."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got ndim={a.ndim}")
    _check_finite(a, "matrix")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return u, s, vt


def operator_norm(a: np.ndarray) -> float:
    """Largest singular value."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    _, s, _ = thin_svd(a)
    return float(s[0])


def sample_gaussian(
    stream: RngStream,
    n: int,
    d: int,
    mean: np.ndarray | float = 0.0,
    scale: float = 1.0,
) -> np.ndarray:
    """Draw ``n`` i.i.d. rows from N(mean, scale^2 * I_d)."""
    if n < 1 or d < 1:
        raise ParameterError(f"n and d must be positive, got n={n}, d={d}")
    if not scale > 0:
        raise ParameterError(f"scale must be > 0, got {scale}")
    out = stream.generator().standard_normal((n, d))
    out *= scale
    out += np.asarray(mean, dtype=float)
    return out


def sample_cauchy(stream: RngStream, n: int, d: int) -> np.ndarray:
    """Draw ``n`` rows with i.i.d. standard Cauchy coordinates."""
    if n < 1 or d < 1:
        raise ParameterError(f"n and d must be positive, got n={n}, d={d}")
    return stream.generator().standard_cauchy((n, d))
