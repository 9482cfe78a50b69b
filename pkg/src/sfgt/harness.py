"""Synthetic datasets, a toy full-batch training loop, the low-resource
protocol, the ablation runner, and the invariant suite.

The optimizer is plain gradient descent so the analytic backward pass
stays auditable end to end; there is no claim of matching any benchmark
accuracy. Reports are byte-deterministic for fixed seeds and configs.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import attention, masks, spectral
from .attention import AttentionParams, ModelConfig
from .graphs import (
    Graph,
    GraphDataset,
    Split,
    component_count,
    features_or_zeros,
    isolated_count,
)

SYNTHETIC_KINDS = ("dense-vs-sparse", "two-community", "path-vs-cycle")

FEATURE_DIM = 4
FEATURE_NOISE = 0.1

COMMUNITY_P_IN = 0.85
COMMUNITY_P_OUT = 0.05
DENSE_P = 0.8
SPARSE_P = 0.2


class DivergenceError(RuntimeError):
    """Training loss became non-finite; carries the losses seen so far."""

    def __init__(self, message: str, losses: tuple[float, ...]) -> None:
        super().__init__(message)
        self.losses = losses


@dataclass(frozen=True)
class TrainConfig:
    """Toy training protocol knobs, including the low-resource fraction."""

    epochs: int = 50
    lr: float = 1e-2
    fraction: float = 1.0
    seed: int = 0
    mask_mode: str = "full"

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError(f"fraction must lie in (0, 1], got {self.fraction}")
        if self.mask_mode not in masks.MASK_MODES:
            raise ValueError(f"mask_mode must be one of {masks.MASK_MODES}")


@dataclass(frozen=True)
class RunReport:
    """Everything one training run produced, JSON-serializable."""

    losses: tuple[float, ...]
    train_accuracy: float | None
    val_accuracy: float | None
    test_accuracy: float | None
    seed: int
    train_graphs_used: int
    train_indices: tuple[int, ...]
    train_config: dict
    model_config: dict

    def to_json(self) -> str:
        doc = {
            "losses": list(self.losses),
            "train_accuracy": self.train_accuracy,
            "val_accuracy": self.val_accuracy,
            "test_accuracy": self.test_accuracy,
            "seed": self.seed,
            "train_graphs_used": self.train_graphs_used,
            "train_indices": list(self.train_indices),
            "train_config": self.train_config,
            "model_config": self.model_config,
        }
        return json.dumps(doc, indent=2) + "\n"


def subset_size(train_size: int, fraction: float) -> int:
    """Low-resource arithmetic: ceil(fraction * train_size)."""
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    return math.ceil(fraction * train_size)


def _er_edges(rng: np.random.Generator, n: int, p: float) -> set[tuple[int, int]]:
    return {
        (i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p
    }


def _sbm_edges(rng: np.random.Generator, n: int, p_in: float, p_out: float) -> set[tuple[int, int]]:
    half = n // 2
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            p = p_in if (i < half) == (j < half) else p_out
            if rng.random() < p:
                edges.add((i, j))
    return edges


def _matched_er_p(n: int, p_in: float, p_out: float) -> float:
    half = n // 2
    in_pairs = half * (half - 1) // 2 + (n - half) * (n - half - 1) // 2
    out_pairs = half * (n - half)
    total = n * (n - 1) // 2
    return (p_in * in_pairs + p_out * out_pairs) / total


def _path_edges(n: int) -> set[tuple[int, int]]:
    return {(i, i + 1) for i in range(n - 1)}


def _synthetic_features(rng: np.random.Generator, g_edges: set[tuple[int, int]], n: int) -> np.ndarray:
    deg = np.zeros(n)
    for i, j in g_edges:
        deg[i] += 1
        deg[j] += 1
    base = deg / max(n - 1, 1)
    return np.tile(base[:, None], (1, FEATURE_DIM)) + FEATURE_NOISE * rng.standard_normal((n, FEATURE_DIM))


def gen_synthetic(
    kind: str, count: int = 24, n_range: tuple[int, int] = (8, 16), seed: int = 0
) -> GraphDataset:
    """Two-class synthetic dataset whose classes differ by the named
    structural property; features are normalized degree plus seeded noise.

    Classes alternate by index, so the dataset is exactly balanced.
    """
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"kind must be one of {SYNTHETIC_KINDS}, got {kind!r}")
    if count < 4 or count % 2:
        raise ValueError(f"count must be an even number >= 4, got {count}")
    lo, hi = n_range
    if lo < 3 or hi < lo:
        raise ValueError(f"invalid node-count range {n_range}")
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(count):
        n = int(rng.integers(lo, hi + 1))
        label = i % 2
        if kind == "dense-vs-sparse":
            edges = _er_edges(rng, n, DENSE_P if label == 0 else SPARSE_P)
        elif kind == "two-community":
            if label == 0:
                edges = _sbm_edges(rng, n, COMMUNITY_P_IN, COMMUNITY_P_OUT)
            else:
                edges = _er_edges(rng, n, _matched_er_p(n, COMMUNITY_P_IN, COMMUNITY_P_OUT))
        else:  # path-vs-cycle
            edges = _path_edges(n)
            if label == 1:
                edges = edges | {(0, n - 1)}
        features = _synthetic_features(rng, edges, n)
        graphs.append(Graph(n=n, edges=frozenset(edges), features=features, label=label))
    order = [int(i) for i in rng.permutation(count)]
    n_val = max(1, count // 5)
    n_test = max(1, count // 5)
    split = Split(
        train=tuple(order[: count - n_val - n_test]),
        val=tuple(order[count - n_val - n_test : count - n_test]),
        test=tuple(order[count - n_test :]),
    )
    return GraphDataset(graphs=tuple(graphs), num_classes=2, split=split)


def _prepare(ds: GraphDataset, indices: tuple[int, ...], mcfg: ModelConfig, mask_mode: str):
    """(features, mask, label) per index, masks computed once per graph."""
    prepared = []
    for idx in indices:
        g = ds.graphs[idx]
        if g.label is None:
            raise ValueError(f"graph {idx} has no label")
        x = features_or_zeros(g, mcfg.feature_dim)
        if x.shape[1] != mcfg.feature_dim:
            raise ValueError(
                f"graph {idx} has feature dim {x.shape[1]}, model expects {mcfg.feature_dim}"
            )
        prepared.append((x, masks.build_mask(g, x, mask_mode), g.label))
    return prepared


def _accuracy(prepared, params: AttentionParams, mcfg: ModelConfig) -> float | None:
    if not prepared:
        return None
    hits = 0
    for x, mask, label in prepared:
        logits, _ = attention.forward_with_mask(x, mask, params, mcfg)
        hits += int(np.argmax(logits) == label)
    return hits / len(prepared)


def train(ds: GraphDataset, cfg: TrainConfig, mcfg: ModelConfig) -> RunReport:
    """Full-batch gradient descent on cross-entropy.

    The training subset is the first ceil(fraction * |train|) graphs of a
    seeded shuffle of the train split. Per-epoch losses are recorded
    before each update; a non-finite loss raises :class:`DivergenceError`.
    """
    if not ds.split.train:
        raise ValueError("dataset has an empty train split")
    rng = np.random.default_rng(cfg.seed)
    shuffled = [ds.split.train[int(i)] for i in rng.permutation(len(ds.split.train))]
    used = tuple(shuffled[: subset_size(len(ds.split.train), cfg.fraction)])

    train_set = _prepare(ds, used, mcfg, cfg.mask_mode)
    val_set = _prepare(ds, ds.split.val, mcfg, cfg.mask_mode)
    test_set = _prepare(ds, ds.split.test, mcfg, cfg.mask_mode)

    params = attention.init_params(mcfg)
    losses: list[float] = []
    for _ in range(cfg.epochs):
        total = 0.0
        grad_sum = attention.zeros_like_params(params)
        for x, mask, label in train_set:
            loss, grads = attention.loss_and_gradients(x, mask, params, mcfg, label)
            total += loss
            grad_sum = attention.add_scaled(grad_sum, grads, 1.0)
        mean_loss = total / len(train_set)
        if not math.isfinite(mean_loss):
            raise DivergenceError(
                f"loss diverged at epoch {len(losses) + 1}: {mean_loss}", tuple(losses)
            )
        losses.append(mean_loss)
        params = attention.add_scaled(params, grad_sum, -cfg.lr / len(train_set))

    return RunReport(
        losses=tuple(losses),
        train_accuracy=_accuracy(train_set, params, mcfg),
        val_accuracy=_accuracy(val_set, params, mcfg),
        test_accuracy=_accuracy(test_set, params, mcfg),
        seed=cfg.seed,
        train_graphs_used=len(used),
        train_indices=used,
        train_config=asdict(cfg),
        model_config=asdict(mcfg),
    )


def run_ablation(
    ds: GraphDataset,
    cfg: TrainConfig,
    mcfg: ModelConfig,
    modes: tuple[str, ...] = masks.MASK_MODES,
) -> list[tuple[str, RunReport]]:
    """One run per mask mode with identical seeds, initialization, data
    order, and hyperparameters, isolating the mask's effect."""
    return [(mode, train(ds, replace(cfg, mask_mode=mode), mcfg)) for mode in modes]


def reference_unmasked_attention(
    q: np.ndarray, k: np.ndarray, v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Plain attention without any mask arithmetic, used as the reduction
    reference for the all-ones mask."""
    scores = (q @ k.T) / np.sqrt(q.shape[1])
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    attn = e / e.sum(axis=1, keepdims=True)
    return attn @ v, attn


def finite_difference_gradients(
    x: np.ndarray,
    mask: np.ndarray,
    params: AttentionParams,
    cfg: ModelConfig,
    target: int,
    step: float = 1e-5,
) -> AttentionParams:
    """Central finite differences of the cross-entropy loss for every
    parameter entry; the oracle for the analytic backward pass."""

    def loss() -> float:
        logits, _ = attention.forward_with_mask(x, mask, params, cfg)
        return attention.cross_entropy(logits, target)

    fd = attention.zeros_like_params(params)
    for (_, arr), (_, out) in zip(attention.named_arrays(params), attention.named_arrays(fd)):
        flat = arr.ravel()
        flat_out = out.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            plus = loss()
            flat[idx] = orig - step
            minus = loss()
            flat[idx] = orig
            flat_out[idx] = (plus - minus) / (2.0 * step)
    return fd


def max_relative_gradient_error(analytic: AttentionParams, fd: AttentionParams) -> float:
    """max over entries of |a - b| / max(1, |a|, |b|)."""
    worst = 0.0
    for (_, a), (_, b) in zip(attention.named_arrays(analytic), attention.named_arrays(fd)):
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        worst = max(worst, float(np.max(np.abs(a - b) / denom)) if a.size else 0.0)
    return worst


# ---------------------------------------------------------------------------
# invariant suite

INVARIANT_TOLERANCES = {
    "eigen-range": 0.0,
    "orthogonality": 1e-8,
    "reconstruction": 1e-8,
    "zero-multiplicity": 0.0,
    "connectivity-gap": 0.0,
    "parseval": 1e-10,
    "band-reconstruction": 1e-10,
    "energy-total": 1e-10,
    "sign-invariance": 1e-10,
    "matrix-bounds": 0.0,
    "row-stochastic": 1e-12,
    "all-ones-reduction": 1e-12,
    "mask-zeroing": 0.0,
    "determinism": 0.0,
    "gradient-check": 1e-4,
}


@dataclass(frozen=True)
class InvariantReport:
    """One PASS/FAIL line per invariant, plus the overall verdict."""

    lines: tuple[str, ...]
    all_passed: bool

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _rel(err: float, ref: float) -> float:
    return err / ref if ref > 0 else err


def gradient_check_model(seed: int = 0, mask_mode: str = "full") -> float:
    """Max relative gradient error of the stock 4-node, d=3, H=2, L=2
    check model under the given mask mode."""
    rng = np.random.default_rng(seed)
    g = Graph(n=4, edges=frozenset({(0, 1), (1, 2), (2, 3), (0, 3)}))
    x = rng.standard_normal((4, 3))
    cfg = ModelConfig(
        feature_dim=3, hidden_dim=4, head_dim=2, heads=2, layers=2,
        num_classes=2, mask_mode=mask_mode, seed=seed,
    )
    params = attention.init_params(cfg)
    mask = masks.build_mask(g, x, mask_mode)
    _, grads = attention.loss_and_gradients(x, mask, params, cfg, target=1)
    fd = finite_difference_gradients(x, mask, params, cfg, target=1)
    return max_relative_gradient_error(grads, fd)


def invariant_suite(seed: int = 0, trials: int = 100) -> InvariantReport:
    """Run every mathematical invariant over seeded random instances.

    The report has one "PASS/FAIL name detail" line per invariant;
    failures are report content, not exceptions.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {name: 0.0 for name in INVARIANT_TOLERANCES}
    connected_seen = 0

    for _ in range(trials):
        n = int(rng.integers(1, 31))
        p = float(rng.choice([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]))
        g = Graph(n=n, edges=frozenset(_er_edges(rng, n, p)))
        x = rng.standard_normal((n, 3))
        lap = spectral.normalized_laplacian(g)
        dec = spectral.eig_sym(lap)
        lam = dec.eigenvalues

        range_violation = max(
            float(max(-lam.min(initial=0.0), lam.max(initial=0.0) - 2.0, 0.0)),
            float(np.max(np.maximum(lam[:-1] - lam[1:], 0.0), initial=0.0)),
        )
        worst["eigen-range"] = max(worst["eigen-range"], range_violation)
        worst["orthogonality"] = max(worst["orthogonality"], spectral.orthogonality_defect(dec))
        worst["reconstruction"] = max(
            worst["reconstruction"], spectral.reconstruction_defect(dec, lap)
        )

        expected_zeros = component_count(g) - isolated_count(g)
        worst["zero-multiplicity"] += float(
            spectral.zero_eigenvalue_multiplicity(dec) != expected_zeros
        )
        if n >= 2 and component_count(g) == 1:
            connected_seen += 1
            worst["connectivity-gap"] += float(lam[0] > 1e-8 or lam[1] <= 1e-6)

        xhat = spectral.gft(dec, x)
        ref = float(np.sum(x * x))
        worst["parseval"] = max(worst["parseval"], _rel(abs(float(np.sum(xhat * xhat)) - ref), ref))

        fm = masks.frequency_masks(lam)
        x_low, x_high = masks.band_features(dec, x, fm)
        worst["band-reconstruction"] = max(
            worst["band-reconstruction"], float(np.max(np.abs(x_low + x_high - x)))
        )
        ep = masks.energy_profile(x_low, x_high)
        worst["energy-total"] = max(worst["energy-total"], _rel(abs(ep.total - ref), ref))

        s = masks.structural_matrix(lam)
        f = masks.filter_matrix(ep)
        m = masks.refine_mask(s, f)
        bounds_violation = max(
            float(max(-s.min(), s.max() - 4.0, 0.0)),
            float(max(-f.min(), f.max() - 1.0, 0.0)),
            float(max(-m.min(), m.max() - 4.0, 0.0)),
        )
        worst["matrix-bounds"] = max(worst["matrix-bounds"], bounds_violation)

        # flipping an eigenvector sign must not move any derived quantity
        flip = int(rng.integers(0, n))
        u_flipped = dec.eigenvectors.copy()
        u_flipped[:, flip] = -u_flipped[:, flip]
        dec_flipped = spectral.SpectralDecomposition(eigenvalues=lam, eigenvectors=u_flipped)
        xl2, xh2 = masks.band_features(dec_flipped, x, fm)
        ep2 = masks.energy_profile(xl2, xh2)
        sign_drift = max(
            float(np.max(np.abs(ep2.e_low - ep.e_low))),
            float(np.max(np.abs(ep2.e_high - ep.e_high))),
            float(np.max(np.abs(masks.filter_matrix(ep2) - f))),
            float(np.max(np.abs(masks.refine_mask(s, masks.filter_matrix(ep2)) - m))),
        )
        worst["sign-invariance"] = max(worst["sign-invariance"], sign_drift)

        q = rng.standard_normal((n, 4))
        k = rng.standard_normal((n, 4))
        v = rng.standard_normal((n, 4))
        out, attn = attention.masked_attention_forward(q, k, v, m)
        worst["row-stochastic"] = max(
            worst["row-stochastic"], float(np.max(np.abs(attn.sum(axis=1) - 1.0)))
        )

        ones = np.ones((n, n))
        out_masked, attn_masked = attention.masked_attention_forward(q, k, v, ones)
        out_ref, attn_ref = reference_unmasked_attention(q, k, v)
        worst["all-ones-reduction"] = max(
            worst["all-ones-reduction"],
            float(np.max(np.abs(out_masked - out_ref))),
            float(np.max(np.abs(attn_masked - attn_ref))),
        )

        zero_mask = m.copy()
        i, j = int(rng.integers(0, n)), int(rng.integers(0, n))
        zero_mask[i, j] = 0.0
        scores = attention.attention_scores(q, k, zero_mask)
        _, attn_zeroed = attention.masked_attention_forward(q, k, v, zero_mask)
        # multiplicative semantics: score pinned to 0, weight not pruned
        worst["mask-zeroing"] += float(scores[i, j] != 0.0 or attn_zeroed[i, j] <= 0.0)

        dec_again = spectral.eig_sym(lap)
        worst["determinism"] += float(
            not np.array_equal(dec_again.eigenvalues, lam)
            or not np.array_equal(dec_again.eigenvectors, dec.eigenvectors)
        )

    worst["gradient-check"] = gradient_check_model(seed=seed)

    lines = []
    all_passed = True
    for name, tolerance in INVARIANT_TOLERANCES.items():
        value = worst[name]
        passed = value <= tolerance
        all_passed = all_passed and passed
        scope = f"trials={connected_seen}" if name == "connectivity-gap" else f"trials={trials}"
        lines.append(
            f"{'PASS' if passed else 'FAIL'} {name} {scope} worst={value:.3e} tol={tolerance:.3e}"
        )
    return InvariantReport(lines=tuple(lines), all_passed=all_passed)
