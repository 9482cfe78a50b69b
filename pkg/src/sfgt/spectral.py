"""Normalized Laplacian, symmetric eigendecomposition, and the graph
Fourier transform.

The decomposition contract is fixed by invariants rather than by the
algorithm: eigenvalues ascending in [0, 2], orthonormal eigenvectors, a
deterministic sign convention (first component above 1e-12 in magnitude is
positive, scanning by index), and column order within exactly-equal
eigenvalue groups fixed by descending lexicographic comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, adjacency, degrees

SYMMETRY_TOL = 1e-10
EIGENVALUE_SLACK = 1e-8
ZERO_EIGENVALUE_TOL = 1e-8
SIGN_SCAN_TOL = 1e-12


class NumericalError(RuntimeError):
    """A numerical routine failed or received non-finite input."""


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a normalized graph Laplacian.

    ``eigenvalues`` are nondecreasing in [0, 2]; column k of
    ``eigenvectors`` belongs to ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


def normalized_laplacian(g: Graph) -> np.ndarray:
    """L = I - D^{-1/2} A D^{-1/2}.

    Zero-degree nodes use the convention D^{-1/2}[i, i] = 0, so their
    row/column equals the identity row (eigenvalue 1, classified
    low-frequency downstream).
    """
    a = adjacency(g)
    deg = degrees(g).astype(np.float64)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    lap = np.eye(g.n) - (inv_sqrt[:, None] * a) * inv_sqrt[None, :]
    return (lap + lap.T) / 2.0


def _normalize_signs(u: np.ndarray) -> np.ndarray:
    out = u.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        lead = np.flatnonzero(np.abs(col) > SIGN_SCAN_TOL)
        if lead.size and col[lead[0]] < 0:
            out[:, k] = -col
    return out


def _order_ties(lam: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Within groups of exactly-equal eigenvalues, order columns by
    descending lexicographic comparison (makes eigh(I) return U = I)."""
    out = u.copy()
    start = 0
    n = lam.shape[0]
    while start < n:
        stop = start + 1
        while stop < n and lam[stop] == lam[start]:
            stop += 1
        if stop - start > 1:
            cols = sorted(
                (tuple(out[:, k]) for k in range(start, stop)), reverse=True
            )
            for k, col in enumerate(cols):
                out[:, start + k] = col
        start = stop
    return out


def eig_sym(lap: np.ndarray) -> SpectralDecomposition:
    """Full eigendecomposition L = U diag(lam) U^T of a symmetric matrix.

    Raw eigenvalues must lie within +-1e-8 of [0, 2]; they are clamped to
    the interval afterwards so downstream threshold rules see no jitter.
    """
    lap = np.asarray(lap, dtype=np.float64)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {lap.shape}")
    if not np.all(np.isfinite(lap)):
        raise NumericalError("non-finite entries in Laplacian")
    asym = float(np.max(np.abs(lap - lap.T))) if lap.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    try:
        lam, u = np.linalg.eigh((lap + lap.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    if lam[0] < -EIGENVALUE_SLACK or lam[-1] > 2.0 + EIGENVALUE_SLACK:
        raise NumericalError(
            f"raw eigenvalues outside [0, 2] beyond tolerance: "
            f"[{lam[0]:.3e}, {lam[-1]:.3e}]"
        )
    lam = np.clip(lam, 0.0, 2.0)
    u = _order_ties(lam, _normalize_signs(u))
    lam.setflags(write=False)
    u.setflags(write=False)
    return SpectralDecomposition(eigenvalues=lam, eigenvectors=u)


def decompose(g: Graph) -> SpectralDecomposition:
    """Eigendecomposition of the normalized Laplacian of ``g``."""
    return eig_sym(normalized_laplacian(g))


def _check_rows(dec: SpectralDecomposition, x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != dec.n:
        raise ValueError(f"{name} must be {dec.n} x d, got shape {x.shape}")
    return x


def gft(dec: SpectralDecomposition, x: np.ndarray) -> np.ndarray:
    """Graph Fourier transform: xhat = U^T x, column-wise per feature."""
    return dec.eigenvectors.T @ _check_rows(dec, x, "signal")


def igft(dec: SpectralDecomposition, xhat: np.ndarray) -> np.ndarray:
    """Inverse graph Fourier transform: x = U xhat."""
    return dec.eigenvectors @ _check_rows(dec, xhat, "spectrum")


def spectral_filter(dec: SpectralDecomposition, kernel: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Spectral convolution U diag(kernel) U^T x."""
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.shape != (dec.n,):
        raise ValueError(f"kernel must have length {dec.n}, got shape {kernel.shape}")
    x = _check_rows(dec, x, "signal")
    return dec.eigenvectors @ (kernel[:, None] * (dec.eigenvectors.T @ x))


def zero_eigenvalue_multiplicity(dec: SpectralDecomposition, tol: float = ZERO_EIGENVALUE_TOL) -> int:
    """Count of eigenvalues at most ``tol``.

    For graphs without isolated nodes this equals the number of connected
    components; an isolated node contributes eigenvalue 1 instead (see
    :func:`normalized_laplacian`), so in general the count equals
    components minus isolated nodes.
    """
    return int(np.count_nonzero(dec.eigenvalues <= tol))


def orthogonality_defect(dec: SpectralDecomposition) -> float:
    """max |U^T U - I|, the orthonormality violation."""
    u = dec.eigenvectors
    return float(np.max(np.abs(u.T @ u - np.eye(dec.n))))


def reconstruction_defect(dec: SpectralDecomposition, lap: np.ndarray) -> float:
    """max |U diag(lam) U^T - L|, the reconstruction violation."""
    u = dec.eigenvectors
    rebuilt = (u * dec.eigenvalues[None, :]) @ u.T
    return float(np.max(np.abs(rebuilt - lap)))
