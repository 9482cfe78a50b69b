"""Structure-frequency mask pipeline.

From a Laplacian decomposition and node features: low/high frequency band
masks at the eigenvalue-1 threshold, band-limited features, per-node band
energies, the structural matrix S[i, j] = lam_i + lam_j, the energy filter
F[i, j] = (e_low[i] + e_high[j]) / E, and the refined attention mask
M = ReLU(S * F).

Spectral index k is aligned to node row k under the ascending eigenvalue
ordering. The mask is computed once from input features and reused across
attention layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .spectral import SpectralDecomposition, decompose

LOW_FREQUENCY_THRESHOLD = 1.0
ENERGY_EPSILON = 1e-12

MASK_MODES = ("full", "structure-only", "none")


@dataclass(frozen=True)
class FrequencyMasks:
    """Complementary 0/1 indicators of the low and high frequency bands."""

    m_low: np.ndarray
    m_high: np.ndarray


@dataclass(frozen=True)
class EnergyProfile:
    """Per-node band energies and their grand total."""

    e_low: np.ndarray
    e_high: np.ndarray
    total: float


@dataclass(frozen=True)
class StructureFrequencyMask:
    """The three n x n matrices of the pipeline: S, F, and M."""

    structure: np.ndarray
    filter: np.ndarray
    mask: np.ndarray


def frequency_masks(lam: np.ndarray) -> FrequencyMasks:
    """Band indicators: m_low[i] = 1 iff lam[i] <= 1 (inclusive)."""
    lam = np.asarray(lam, dtype=np.float64)
    m_low = (lam <= LOW_FREQUENCY_THRESHOLD).astype(np.float64)
    return FrequencyMasks(m_low=m_low, m_high=1.0 - m_low)


def structural_matrix(lam: np.ndarray) -> np.ndarray:
    """S[i, j] = lam[i] + lam[j]; symmetric, entries in [0, 4]."""
    lam = np.asarray(lam, dtype=np.float64)
    return lam[:, None] + lam[None, :]


def band_features(
    dec: SpectralDecomposition, x: np.ndarray, masks: FrequencyMasks
) -> tuple[np.ndarray, np.ndarray]:
    """Band-limited features X_low = U((U^T X) * m_low) and the high
    counterpart; the two sum back to X because the masks partition."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != dec.n:
        raise ValueError(f"features must be {dec.n} x d, got shape {x.shape}")
    xhat = dec.eigenvectors.T @ x
    x_low = dec.eigenvectors @ (masks.m_low[:, None] * xhat)
    x_high = dec.eigenvectors @ (masks.m_high[:, None] * xhat)
    return x_low, x_high


def energy_profile(x_low: np.ndarray, x_high: np.ndarray) -> EnergyProfile:
    """Per-node squared feature sums per band, plus their grand total E."""
    x_low = np.asarray(x_low, dtype=np.float64)
    x_high = np.asarray(x_high, dtype=np.float64)
    if x_low.shape != x_high.shape:
        raise ValueError(f"band shapes differ: {x_low.shape} vs {x_high.shape}")
    e_low = np.sum(x_low * x_low, axis=1)
    e_high = np.sum(x_high * x_high, axis=1)
    return EnergyProfile(e_low=e_low, e_high=e_high, total=float(e_low.sum() + e_high.sum()))


def filter_matrix(ep: EnergyProfile) -> np.ndarray:
    """F[i, j] = (e_low[i] + e_high[j]) / E, entries in [0, 1].

    When E <= 1e-12 (zero-feature graphs) F degrades to all-ones so the
    mask falls back to structure-only instead of dividing by zero.
    """
    n = ep.e_low.shape[0]
    if ep.total <= ENERGY_EPSILON:
        return np.ones((n, n), dtype=np.float64)
    return (ep.e_low[:, None] + ep.e_high[None, :]) / ep.total


def refine_mask(s: np.ndarray, f: np.ndarray) -> np.ndarray:
    """M = ReLU(S * F) elementwise.

    Both factors are nonnegative, so the ReLU only guards against negative
    round-off.
    """
    s = np.asarray(s, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if s.shape != f.shape:
        raise ValueError(f"shape mismatch: {s.shape} vs {f.shape}")
    return np.maximum(0.0, s * f)


def binary_eigenvalue_mask(lam: np.ndarray) -> np.ndarray:
    """Diagnostic 0/1 matrix whose row i is all-ones iff lam[i] <= 1.

    Not used by :func:`build_mask`; the refinement formula consumes the
    structural matrix S instead.
    """
    m_low = frequency_masks(lam).m_low
    n = m_low.shape[0]
    return np.tile(m_low[:, None], (1, n))


def structure_frequency_mask(
    g: Graph, x: np.ndarray | None = None, mode: str = "full"
) -> StructureFrequencyMask:
    """Compute the S, F, M bundle for ``g`` under the given mode.

    full: M = ReLU(S * F). structure-only: F replaced by all-ones, so
    M = ReLU(S). none: M is all-ones (plain transformer attention); S is
    still reported, F is all-ones.
    """
    if mode not in MASK_MODES:
        raise ValueError(f"mode must be one of {MASK_MODES}, got {mode!r}")
    dec = decompose(g)
    s = structural_matrix(dec.eigenvalues)
    if mode == "full":
        if x is None:
            raise ValueError("mode 'full' requires node features")
        masks = frequency_masks(dec.eigenvalues)
        x_low, x_high = band_features(dec, x, masks)
        f = filter_matrix(energy_profile(x_low, x_high))
    else:
        f = np.ones((g.n, g.n), dtype=np.float64)
    if mode == "none":
        m = np.ones((g.n, g.n), dtype=np.float64)
    else:
        m = refine_mask(s, f)
    return StructureFrequencyMask(structure=s, filter=f, mask=m)


def build_mask(g: Graph, x: np.ndarray | None = None, mode: str = "full") -> np.ndarray:
    """The refined attention mask M for ``g`` (see
    :func:`structure_frequency_mask` for the per-mode definitions)."""
    return structure_frequency_mask(g, x, mode).mask
