import dataclasses
import math

import numpy as np
import pytest

from sfgt import attention, spectral
from sfgt.attention import ModelConfig, init_params, named_arrays
from sfgt.graphs import Graph, GraphDataset, degrees
from sfgt.harness import (
    INVARIANT_TOLERANCES,
    DivergenceError,
    TrainConfig,
    gen_synthetic,
    invariant_suite,
    run_ablation,
    subset_size,
    train,
)

MCFG = ModelConfig(
    feature_dim=4, hidden_dim=8, head_dim=4, heads=2, layers=2, num_classes=2, seed=0
)


def _zero_features(ds: GraphDataset) -> GraphDataset:
    graphs = tuple(
        Graph(n=g.n, edges=g.edges, features=np.zeros_like(g.features), label=g.label)
        for g in ds.graphs
    )
    return GraphDataset(graphs=graphs, num_classes=ds.num_classes, split=ds.split)


class TestGenSynthetic:
    def test_dense_vs_sparse_counts(self):
        ds = gen_synthetic("dense-vs-sparse", count=8, n_range=(10, 10), seed=0)
        labels = [g.label for g in ds.graphs]
        assert labels.count(0) == 4 and labels.count(1) == 4
        dense = np.mean([len(g.edges) for g in ds.graphs if g.label == 0])
        sparse = np.mean([len(g.edges) for g in ds.graphs if g.label == 1])
        assert dense > sparse

    def test_deterministic(self):
        a = gen_synthetic("two-community", count=8, seed=3)
        b = gen_synthetic("two-community", count=8, seed=3)
        assert a == b
        c = gen_synthetic("two-community", count=8, seed=4)
        assert a != c

    def test_feature_shape(self):
        ds = gen_synthetic("dense-vs-sparse", count=4, seed=0)
        assert ds.feature_dim == 4
        for g in ds.graphs:
            assert g.features.shape == (g.n, 4)

    def test_path_vs_cycle_structure(self):
        ds = gen_synthetic("path-vs-cycle", count=4, n_range=(5, 5), seed=1)
        for g in ds.graphs:
            deg = degrees(g)
            if g.label == 0:
                assert sorted(deg.tolist()) == [1, 1, 2, 2, 2]
            else:
                assert deg.tolist() == [2] * 5

    def test_two_community_has_smaller_spectral_gap(self):
        ds = gen_synthetic("two-community", count=24, n_range=(10, 16), seed=0)
        gaps = {0: [], 1: []}
        for g in ds.graphs:
            gaps[g.label].append(float(spectral.decompose(g).eigenvalues[1]))
        assert np.mean(gaps[0]) < np.mean(gaps[1])

    def test_split_partitions_dataset(self):
        ds = gen_synthetic("dense-vs-sparse", count=20, seed=0)
        all_indices = sorted(ds.split.train + ds.split.val + ds.split.test)
        assert all_indices == list(range(20))
        assert ds.split.val and ds.split.test

    def test_invalid_arguments(self):
        with pytest.raises(ValueError, match="kind"):
            gen_synthetic("rings", count=4)
        with pytest.raises(ValueError, match="even"):
            gen_synthetic("dense-vs-sparse", count=5)
        with pytest.raises(ValueError, match="count"):
            gen_synthetic("dense-vs-sparse", count=2)
        with pytest.raises(ValueError, match="range"):
            gen_synthetic("dense-vs-sparse", count=4, n_range=(10, 4))


class TestSubsetSize:
    @pytest.mark.parametrize(
        "fraction,expected", [(0.05, 4), (0.10, 8), (0.25, 20), (1.0, 80)]
    )
    def test_protocol_fractions_on_80(self, fraction, expected):
        assert subset_size(80, fraction) == expected

    def test_always_at_least_one(self):
        assert subset_size(3, 0.01) == 1

    def test_bounds(self):
        with pytest.raises(ValueError):
            subset_size(10, 0.0)
        with pytest.raises(ValueError):
            subset_size(10, 1.5)


class TestTrain:
    def test_zero_learning_rate_keeps_loss_constant(self):
        ds = gen_synthetic("dense-vs-sparse", count=8, seed=0)
        cfg = TrainConfig(epochs=5, lr=0.0, seed=0)
        report = train(ds, cfg, MCFG)
        assert len(set(report.losses)) == 1

    def test_loss_decreases_on_dense_vs_sparse(self):
        ds = gen_synthetic("dense-vs-sparse", count=24, seed=0)
        cfg = TrainConfig(epochs=50, lr=1e-2, seed=0)
        report = train(ds, cfg, MCFG)
        assert report.losses[-1] <= report.losses[0]
        assert all(math.isfinite(l) for l in report.losses)

    def test_fraction_selects_ceil(self):
        ds = gen_synthetic("dense-vs-sparse", count=24, seed=0)  # 16 train graphs
        cfg = TrainConfig(epochs=1, fraction=0.05, seed=0)
        report = train(ds, cfg, MCFG)
        assert report.train_graphs_used == math.ceil(0.05 * 16) == 1
        assert len(report.train_indices) == 1
        assert set(report.train_indices) <= set(ds.split.train)

    def test_report_is_byte_deterministic(self):
        ds = gen_synthetic("two-community", count=8, seed=1)
        cfg = TrainConfig(epochs=3, lr=1e-2, seed=5)
        a = train(ds, cfg, MCFG).to_json().encode()
        b = train(ds, cfg, MCFG).to_json().encode()
        assert a == b

    def test_accuracies_in_range(self):
        ds = gen_synthetic("path-vs-cycle", count=8, seed=2)
        report = train(ds, TrainConfig(epochs=2, seed=0), MCFG)
        for acc in (report.train_accuracy, report.val_accuracy, report.test_accuracy):
            assert acc is not None and 0.0 <= acc <= 1.0

    def test_divergence_raises(self, monkeypatch):
        ds = gen_synthetic("dense-vs-sparse", count=4, seed=0)

        def nan_loss(logits, target):
            return float("nan")

        monkeypatch.setattr(attention, "cross_entropy", nan_loss)
        with pytest.raises(DivergenceError) as excinfo:
            train(ds, TrainConfig(epochs=3, seed=0), MCFG)
        assert excinfo.value.losses == ()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(fraction=0.0)
        with pytest.raises(ValueError):
            TrainConfig(mask_mode="bogus")

    def test_empty_train_split_rejected(self):
        ds = gen_synthetic("dense-vs-sparse", count=4, seed=0)
        empty = GraphDataset(
            graphs=ds.graphs,
            num_classes=2,
            split=dataclasses.replace(ds.split, train=()),
        )
        with pytest.raises(ValueError, match="train split"):
            train(empty, TrainConfig(epochs=1), MCFG)


class TestAblation:
    def test_one_report_per_mode_with_shared_init(self):
        ds = gen_synthetic("dense-vs-sparse", count=12, seed=1)
        cfg = TrainConfig(epochs=2, lr=1e-2, seed=3)
        reports = run_ablation(ds, cfg, MCFG)
        assert [mode for mode, _ in reports] == ["full", "structure-only", "none"]
        # identical parameter initialization: the model config is shared
        for (_, a), (_, b) in zip(named_arrays(init_params(MCFG)), named_arrays(init_params(MCFG))):
            assert np.array_equal(a, b)
        first_losses = [rep.losses[0] for _, rep in reports]
        assert len(set(first_losses)) == 3  # the mask enters the forward pass

    def test_structure_only_equals_full_on_zero_features(self):
        ds = _zero_features(gen_synthetic("dense-vs-sparse", count=8, seed=2))
        cfg = TrainConfig(epochs=3, lr=1e-2, seed=2)
        reports = dict(run_ablation(ds, cfg, MCFG, modes=("full", "structure-only")))
        assert reports["full"].losses == reports["structure-only"].losses
        assert reports["full"].test_accuracy == reports["structure-only"].test_accuracy
        assert reports["full"].train_indices == reports["structure-only"].train_indices


class TestInvariantSuite:
    def test_default_run_passes(self):
        report = invariant_suite(seed=0, trials=40)
        assert report.all_passed
        assert all(line.startswith("PASS") for line in report.lines)
        assert len(report.lines) == len(INVARIANT_TOLERANCES)

    def test_fixed_seed_reproduces_report(self):
        a = invariant_suite(seed=9, trials=10)
        b = invariant_suite(seed=9, trials=10)
        assert a.text() == b.text()

    def test_injected_fault_fails_orthogonality(self):
        dec = spectral.decompose(Graph(n=4, edges=frozenset({(0, 1), (2, 3)})))
        perturbed = spectral.SpectralDecomposition(
            eigenvalues=dec.eigenvalues, eigenvectors=dec.eigenvectors + 1e-3
        )
        defect = spectral.orthogonality_defect(perturbed)
        assert defect > INVARIANT_TOLERANCES["orthogonality"]

    def test_trials_validated(self):
        with pytest.raises(ValueError):
            invariant_suite(trials=0)
