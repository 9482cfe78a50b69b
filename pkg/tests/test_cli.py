import json

import numpy as np
import pytest

from sfgt import attention, harness, spectral
from sfgt.cli import (
    EXIT_DIVERGENCE,
    EXIT_INPUT,
    EXIT_INVARIANT,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    run,
)
from sfgt.graphs import Graph, GraphDataset, Split, serialize_dataset
from sfgt.harness import InvariantReport
from sfgt.masks import build_mask
from sfgt.spectral import NumericalError

K2_WITH_FEATURES = "# n 2\n0 1\n#features\n1.0\n0.0\n"
K2_BARE = "# n 2\n0 1\n"


def read_csv_matrix(path) -> np.ndarray:
    rows = [
        [float(tok) for tok in line.split(",")]
        for line in path.read_text().splitlines()
        if line.strip()
    ]
    return np.array(rows)


@pytest.fixture
def k2_file(tmp_path):
    path = tmp_path / "k2.txt"
    path.write_text(K2_WITH_FEATURES)
    return path


@pytest.fixture
def dataset_dir(tmp_path):
    rng = np.random.default_rng(0)
    graphs = []
    for k in range(3):
        n = 3 + k
        edges = frozenset((i, i + 1) for i in range(n - 1))
        graphs.append(Graph(n=n, edges=edges, features=rng.standard_normal((n, 2)), label=k % 2))
    ds = GraphDataset(graphs=tuple(graphs), num_classes=2, split=Split((0, 1), (2,), ()))
    root = tmp_path / "ds"
    serialize_dataset(ds, root, "tu-batch")
    return root, ds


class TestSpectrumCommand:
    def test_csv_outputs(self, k2_file, tmp_path):
        out = tmp_path / "out"
        assert run(["spectrum", "--graph", str(k2_file), "--out", str(out), "--no-figures"]) == EXIT_OK
        assert (out / "eigenvalues.csv").read_text() == "0,2\n"
        vectors = read_csv_matrix(out / "eigenvectors.csv")
        s = 1 / np.sqrt(2)
        assert np.allclose(vectors, [[s, s], [s, -s]], atol=1e-10)
        lap = read_csv_matrix(out / "laplacian.csv")
        assert np.allclose(lap, [[1, -1], [-1, 1]], atol=1e-10)

    def test_json_output(self, k2_file, tmp_path):
        out = tmp_path / "out"
        assert run(["spectrum", "--graph", str(k2_file), "--out", str(out),
                    "--format", "json", "--no-figures"]) == EXIT_OK
        doc = json.loads((out / "spectrum.json").read_text())
        assert set(doc) >= {"eigenvalues", "eigenvectors"}
        assert doc["eigenvalues"] == [0.0, 2.0]

    def test_missing_file_exit_1(self, tmp_path, capsys):
        code = run(["spectrum", "--graph", str(tmp_path / "none.txt"), "--out", str(tmp_path / "o"),
                    "--no-figures"])
        assert code == EXIT_INPUT
        assert "error" in capsys.readouterr().err

    def test_deterministic_bytes(self, k2_file, tmp_path):
        for name in ("a", "b"):
            run(["spectrum", "--graph", str(k2_file), "--out", str(tmp_path / name), "--no-figures"])
        for csv in ("eigenvalues.csv", "eigenvectors.csv", "laplacian.csv"):
            assert (tmp_path / "a" / csv).read_bytes() == (tmp_path / "b" / csv).read_bytes()


class TestMaskCommand:
    def test_full_mode_k2(self, k2_file, tmp_path):
        out = tmp_path / "out"
        assert run(["mask", "--graph", str(k2_file), "--mode", "full", "--out", str(out),
                    "--no-figures"]) == EXIT_OK
        m = read_csv_matrix(out / "M.csv")
        assert np.allclose(m, [[0, 1], [1, 2]], atol=1e-10)
        assert np.allclose(read_csv_matrix(out / "S.csv"), [[0, 2], [2, 4]], atol=1e-10)
        assert np.allclose(read_csv_matrix(out / "F.csv"), 0.5, atol=1e-10)

    def test_round_trip_matches_in_memory(self, tmp_path):
        rng = np.random.default_rng(1)
        n = 7
        edges = frozenset(
            (i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5
        )
        x = rng.standard_normal((n, 3))
        g = Graph(n=n, edges=edges, features=x)
        from sfgt.graphs import serialize_edge_list

        path = tmp_path / "g.txt"
        path.write_text(serialize_edge_list(g))
        out = tmp_path / "out"
        assert run(["mask", "--graph", str(path), "--mode", "full", "--out", str(out),
                    "--no-figures"]) == EXIT_OK
        exported = read_csv_matrix(out / "M.csv")
        assert np.max(np.abs(exported - build_mask(g, x, "full"))) <= 1e-10

    def test_mode_none_all_ones(self, k2_file, tmp_path):
        out = tmp_path / "out"
        assert run(["mask", "--graph", str(k2_file), "--mode", "none", "--out", str(out),
                    "--no-figures"]) == EXIT_OK
        assert np.array_equal(read_csv_matrix(out / "M.csv"), np.ones((2, 2)))

    def test_featureless_full_exit_1(self, tmp_path, capsys):
        path = tmp_path / "bare.txt"
        path.write_text(K2_BARE)
        code = run(["mask", "--graph", str(path), "--mode", "full", "--out", str(tmp_path / "o"),
                    "--no-figures"])
        assert code == EXIT_INPUT
        assert "--mode structure-only" in capsys.readouterr().err

    def test_featureless_structure_only_ok(self, tmp_path):
        path = tmp_path / "bare.txt"
        path.write_text(K2_BARE)
        out = tmp_path / "o"
        assert run(["mask", "--graph", str(path), "--mode", "structure-only", "--out", str(out),
                    "--no-figures"]) == EXIT_OK

    def test_json_round_trip(self, k2_file, tmp_path):
        out = tmp_path / "out"
        assert run(["mask", "--graph", str(k2_file), "--out", str(out), "--format", "json",
                    "--no-figures"]) == EXIT_OK
        doc = json.loads((out / "mask.json").read_text())
        assert np.allclose(np.array(doc["M"]), [[0, 1], [1, 2]], atol=1e-10)


class TestEnergyCommand:
    def test_row_count_equals_node_total(self, dataset_dir, tmp_path):
        root, ds = dataset_dir
        out = tmp_path / "out"
        assert run(["energy", "--dataset", str(root), "--out", str(out), "--no-figures"]) == EXIT_OK
        lines = (out / "energies.csv").read_text().splitlines()
        assert lines[0] == "graph,node,e_low,e_high"
        assert len(lines) - 1 == sum(g.n for g in ds.graphs)

    def test_parseval_aggregate(self, dataset_dir, tmp_path):
        root, ds = dataset_dir
        out = tmp_path / "out"
        run(["energy", "--dataset", str(root), "--out", str(out), "--no-figures"])
        rows = [line.split(",") for line in (out / "energies.csv").read_text().splitlines()[1:]]
        total = sum(float(r[2]) + float(r[3]) for r in rows)
        expected = sum(float(np.sum(g.features**2)) for g in ds.graphs)
        assert abs(total - expected) <= 1e-10 * expected

    def test_zero_features_zero_energies(self, tmp_path):
        g = Graph(n=3, edges=frozenset({(0, 1)}), label=0)
        ds = GraphDataset(graphs=(g,), num_classes=1, split=Split((0,), (), ()))
        root = tmp_path / "ds"
        serialize_dataset(ds, root, "tu-batch")
        out = tmp_path / "out"
        assert run(["energy", "--dataset", str(root), "--out", str(out), "--no-figures"]) == EXIT_OK
        rows = [line.split(",") for line in (out / "energies.csv").read_text().splitlines()[1:]]
        assert all(float(r[2]) == 0.0 and float(r[3]) == 0.0 for r in rows)

    def test_bad_dataset_exit_1(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert run(["energy", "--dataset", str(empty), "--out", str(tmp_path / "o"),
                    "--no-figures"]) == EXIT_INPUT


class TestCheckCommand:
    def test_default_passes(self, capsys):
        assert run(["check", "--trials", "20"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_zero_trials_usage_error(self, capsys):
        assert run(["check", "--trials", "0"]) == EXIT_USAGE
        assert "--trials" in capsys.readouterr().err

    def test_fixed_seed_identical_output(self, capsys):
        run(["check", "--trials", "10", "--seed", "4"])
        first = capsys.readouterr().out
        run(["check", "--trials", "10", "--seed", "4"])
        assert capsys.readouterr().out == first

    def test_failure_exit_3(self, monkeypatch, capsys):
        fake = InvariantReport(lines=("FAIL orthogonality trials=1 worst=1.0e-02 tol=1.0e-08",), all_passed=False)
        monkeypatch.setattr(harness, "invariant_suite", lambda seed, trials: fake)
        assert run(["check", "--trials", "5"]) == EXIT_INVARIANT
        assert "FAIL" in capsys.readouterr().out


class TestTrainCommand:
    def test_synthetic_run_writes_report(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = run(["train", "--synthetic", "dense-vs-sparse", "--epochs", "5",
                    "--seed", "1", "--out", str(out), "--no-figures"])
        assert code == EXIT_OK
        doc = json.loads((out / "report.json").read_text())
        assert len(doc["losses"]) == 5
        assert "train_accuracy=" in capsys.readouterr().out

    def test_fraction_echoed(self, tmp_path):
        out = tmp_path / "out"
        run(["train", "--synthetic", "dense-vs-sparse", "--epochs", "1",
             "--fraction", "0.25", "--out", str(out), "--no-figures"])
        doc = json.loads((out / "report.json").read_text())
        # default synthetic dataset has 16 train graphs; ceil(0.25 * 16) = 4
        assert doc["train_graphs_used"] == 4
        assert doc["train_config"]["fraction"] == 0.25

    def test_mask_mode_changes_losses(self, tmp_path):
        reports = {}
        for mode in ("full", "none"):
            out = tmp_path / mode
            run(["train", "--synthetic", "dense-vs-sparse", "--epochs", "3", "--seed", "0",
                 "--mask-mode", mode, "--out", str(out), "--no-figures"])
            reports[mode] = json.loads((out / "report.json").read_text())
        assert reports["full"]["losses"] != reports["none"]["losses"]

    def test_deterministic_report_bytes(self, tmp_path):
        for name in ("a", "b"):
            run(["train", "--synthetic", "two-community", "--epochs", "2", "--seed", "7",
                 "--out", str(tmp_path / name), "--no-figures"])
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()

    def test_dataset_source(self, dataset_dir, tmp_path):
        root, _ = dataset_dir
        out = tmp_path / "out"
        assert run(["train", "--dataset", str(root), "--epochs", "2", "--out", str(out),
                    "--no-figures"]) == EXIT_OK

    def test_divergence_exit_4(self, monkeypatch, tmp_path, capsys):
        monkeypatch.setattr(attention, "cross_entropy", lambda logits, target: float("nan"))
        code = run(["train", "--synthetic", "dense-vs-sparse", "--epochs", "2",
                    "--out", str(tmp_path / "o"), "--no-figures"])
        assert code == EXIT_DIVERGENCE
        assert "diverged" in capsys.readouterr().err

    def test_bad_fraction_exit_1(self, tmp_path):
        code = run(["train", "--synthetic", "dense-vs-sparse", "--fraction", "1.5",
                    "--epochs", "1", "--out", str(tmp_path / "o"), "--no-figures"])
        assert code == EXIT_INPUT


class TestExitCodeMap:
    def test_numerical_failure_exit_2(self, monkeypatch, k2_file, tmp_path, capsys):
        def boom(lap):
            raise NumericalError("synthetic eigensolver fault")

        monkeypatch.setattr(spectral, "eig_sym", boom)
        code = run(["spectrum", "--graph", str(k2_file), "--out", str(tmp_path / "o"),
                    "--no-figures"])
        assert code == EXIT_NUMERICAL
        assert "numerical" in capsys.readouterr().err

    def test_unknown_flag_exit_64(self, capsys):
        assert run(["check", "--bogus"]) == EXIT_USAGE
        capsys.readouterr()

    def test_unknown_command_exit_64(self, capsys):
        assert run(["transmogrify"]) == EXIT_USAGE
        capsys.readouterr()

    def test_missing_required_source_exit_64(self, tmp_path, capsys):
        assert run(["train", "--epochs", "1", "--out", str(tmp_path / "o")]) == EXIT_USAGE
        capsys.readouterr()
