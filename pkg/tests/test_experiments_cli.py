import json

import numpy as np
import pytest

from tomdmvc import cli
from tomdmvc.exceptions import IngestionError, ShapeError, ValidationError
from tomdmvc.experiments import (
    ExperimentConfig,
    PRESETS,
    dumps_report,
    ingest_dataset,
    preset_config,
    read_matrix_csv,
    run_cluster,
    run_param_sweep,
    run_reconstruction_bench,
    write_manifest,
)
from tomdmvc.mvc import AdmmConfig, MultiViewDataset
from tomdmvc.synthetic import union_of_subspaces
from tomdmvc.tensor_core import write_tensor
from tomdmvc.tomd import AlsConfig, TomdRank, random_tomd, storage_cost

SMALL = dict(mu=5.0, K=3, rank="6,3,4,2|2,2,2,2,2,2", iter_max=15, als={"iter_max": 3})


def small_dataset():
    return union_of_subspaces(n_clusters=2, per_cluster=6, dims=(8, 9), seed=3)


def write_csv(path, rows):
    path.write_text("\n".join(",".join(str(v) for v in row) for row in rows) + "\n")


class TestIngest:
    def test_single_view_no_labels(self, tmp_path):
        write_csv(tmp_path / "v.csv", [[1, 2, 3], [4, 5, 6]])
        (tmp_path / "m.json").write_text(json.dumps({"views": [{"path": "v.csv"}]}))
        ds = ingest_dataset(tmp_path / "m.json")
        assert ds.n_views == 1 and ds.n_samples == 3 and ds.labels is None

    def test_mismatched_views(self, tmp_path):
        write_csv(tmp_path / "a.csv", [[1, 2, 3]])
        write_csv(tmp_path / "b.csv", [[1, 2]])
        (tmp_path / "m.json").write_text(json.dumps({"views": ["a.csv", "b.csv"]}))
        with pytest.raises(ShapeError, match="b.csv"):
            ingest_dataset(tmp_path / "m.json")

    def test_labels_infer_k(self, tmp_path):
        write_csv(tmp_path / "v.csv", [[1, 2, 3, 4]])
        write_csv(tmp_path / "y.csv", [[3], [3], [7], [1]])
        (tmp_path / "m.json").write_text(json.dumps({"views": ["v.csv"], "labels_path": "y.csv"}))
        ds = ingest_dataset(tmp_path / "m.json")
        assert ds.k == 3 and ds.labels.tolist() == [3, 3, 7, 1]

    def test_non_numeric_names_row(self, tmp_path):
        write_csv(tmp_path / "v.csv", [[1, 2], [3, "x"]])
        with pytest.raises(IngestionError, match=r"v.csv: row 2"):
            read_matrix_csv(tmp_path / "v.csv")

    def test_missing_file(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps({"views": ["nope.csv"]}))
        with pytest.raises(IngestionError, match="nope.csv"):
            ingest_dataset(tmp_path / "m.json")

    def test_declared_features(self, tmp_path):
        write_csv(tmp_path / "v.csv", [[1, 2], [3, 4]])
        (tmp_path / "m.json").write_text(json.dumps({"views": [{"path": "v.csv", "features": 3}]}))
        with pytest.raises(ShapeError):
            ingest_dataset(tmp_path / "m.json")

    def test_normalize(self, tmp_path):
        write_csv(tmp_path / "v.csv", [[3, 0], [4, 0]])
        (tmp_path / "m.json").write_text(json.dumps({"views": ["v.csv"], "normalize": True}))
        X = ingest_dataset(tmp_path / "m.json").views[0]
        assert np.allclose(X, [[0.6, 0], [0.8, 0]])

    def test_manifest_round_trip(self, tmp_path):
        ds = small_dataset()
        back = ingest_dataset(write_manifest(tmp_path, ds))
        assert all(np.array_equal(a, b) for a, b in zip(ds.views, back.views))
        assert np.array_equal(back.labels, ds.labels) and back.reshape_dims == ds.reshape_dims


class TestBench:
    def test_tomd_representable(self):
        x = random_tomd((4, 4, 4, 4), TomdRank.uniform(2), seed=0).full()
        rep = run_reconstruction_bench(x, ["tomd"], {"tomd": "2,2,2,2|2,2,2,2,2,2"}, rse_target=1e-6)
        assert rep["rows"][0]["rse"] <= 1e-6 and rep["rows"][0]["meets_target"]

    def test_zero_tensor_all_methods(self, tmp_path):
        write_tensor(tmp_path / "z.txt", np.zeros((2, 2, 2, 2)))
        ranks = {"tomd": "1,1,1,1|1,1,1,1,1,1", "tucker": "1,1,1,1",
                 "tutr": "1,1,1,1,1,1,1,1", "ominus": "1,1,1,1,1,1"}
        rep = run_reconstruction_bench(tmp_path / "z.txt", list(ranks), ranks, timing=False)
        costs = {r["method"]: r["storage_cost"] for r in rep["rows"]}
        assert all(r["rse"] == 0 for r in rep["rows"])
        assert costs == {"tomd": 13, "tucker": 9, "tutr": 12, "ominus": 9}

    def test_reshape_image(self, rng):
        img = rng.random((16, 16))
        rep = run_reconstruction_bench(img, ["tucker"], {"tucker": "2,2,2,2"},
                                       reshape_dims=(4, 4, 4, 4), timing=False)
        assert rep["shape"] == [4, 4, 4, 4]

    def test_unknown_method(self):
        with pytest.raises(ValidationError):
            run_reconstruction_bench(np.ones((2, 2, 2, 2)), ["cp"], {"cp": "1"})

    def test_storage_in_report(self):
        x = np.random.default_rng(1).random((3, 3, 3, 3))
        rep = run_reconstruction_bench(x, ["tomd"], {"tomd": "2,2,2,2|2,2,2,2,2,2"},
                                       AlsConfig(iter_max=3), timing=False)
        assert rep["rows"][0]["storage_cost"] == storage_cost((3,) * 4, TomdRank.uniform(2))


class TestCluster:
    def test_report_shape(self):
        rep = run_cluster(small_dataset(), AdmmConfig(**SMALL), seeds=[0, 1], timing=False)
        assert rep["schema_version"] == 1 and len(rep["runs"]) == 2
        assert set(rep["summary"]["acc"]) == {"mean", "std"}
        assert len(rep["affinity"]) == 12 and len(rep["admm"]["trace"]) == rep["admm"]["iterations"]

    def test_without_labels(self):
        ds = small_dataset()
        ds = MultiViewDataset(ds.views, reshape_dims=ds.reshape_dims)
        rep = run_cluster(ds, AdmmConfig(**SMALL), seeds=[0], k=2, timing=False)
        assert "summary" not in rep and "metrics" not in rep["runs"][0]
        assert "affinity" in rep and len(rep["runs"][0]["labels"]) == 12

    def test_needs_k(self):
        ds = small_dataset()
        ds = MultiViewDataset(ds.views, reshape_dims=ds.reshape_dims)
        with pytest.raises(ValidationError):
            run_cluster(ds, AdmmConfig(**SMALL), seeds=[0])

    def test_workers_do_not_change_report(self):
        ds, cfg = small_dataset(), AdmmConfig(**SMALL)
        a = run_cluster(ds, cfg, seeds=range(3), timing=False)
        b = run_cluster(ds, cfg, seeds=range(3), timing=False, workers=2)
        assert dumps_report(a) == dumps_report(b)


class TestSweep:
    def test_one_point_equals_single_run(self):
        ds, cfg = small_dataset(), AdmmConfig(**SMALL)
        sweep = run_param_sweep(ds, cfg, [cfg.mu], [cfg.K], seeds=[0, 1], timing=False)
        single = run_cluster(ds, cfg, seeds=[0, 1], timing=False)
        assert sweep["rows"][0]["acc_mean"] == single["summary"]["acc"]["mean"]
        assert sweep["rows"][0]["nmi_mean"] == single["summary"]["nmi"]["mean"]

    def test_grid_rows_and_best(self):
        ds, cfg = small_dataset(), AdmmConfig(**SMALL)
        rep = run_param_sweep(ds, cfg, [1.0, 10.0], [2, 3], seeds=[0], timing=False)
        assert len(rep["rows"]) == 4
        best = rep["rows"][rep["best"]]["acc_mean"]
        assert all(best >= r["acc_mean"] for r in rep["rows"])
        assert np.array(rep["surface"][0]["acc"]).shape == (2, 2)

    def test_empty_grid(self):
        with pytest.raises(ValidationError):
            run_param_sweep(small_dataset(), AdmmConfig(**SMALL), [], [2])


class TestPresets:
    def test_values(self):
        assert PRESETS["yale"] == (10, 1.0)
        cfg = preset_config("Yale", 3)
        assert cfg.K == 10 and cfg.mu == 1 and str(cfg.rank) == "30,15,11,3|4,4,4,4,4,4"

    def test_unknown(self):
        with pytest.raises(ValidationError):
            preset_config("mnist", 2)

    def test_experiment_config(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"admm": {"K": 4}, "seeds": [1, 2]}))
        cfg = ExperimentConfig.load(tmp_path / "c.json")
        assert cfg.admm.K == 4 and cfg.seeds == [1, 2]
        (tmp_path / "bad.json").write_text(json.dumps({"seeds": []}))
        with pytest.raises(ValidationError):
            ExperimentConfig.load(tmp_path / "bad.json")


class TestCli:
    @pytest.fixture
    def manifest(self, tmp_path):
        return str(write_manifest(tmp_path / "ds", small_dataset()))

    def run(self, *argv):
        return cli.main([str(a) for a in argv])

    def cluster_args(self, manifest, report):
        return ["cluster", manifest, "--mu", 5, "--K", 3, "--rank", SMALL["rank"], "--iter-max", 15,
                "--als-iter-max", 3, "--seeds", "0-2", "--no-timing", "--report", report]

    def test_cluster_bit_identical(self, manifest, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert self.run(*self.cluster_args(manifest, a)) == 0
        assert self.run(*self.cluster_args(manifest, b)) == 0
        assert a.read_bytes() == b.read_bytes()
        assert json.loads(a.read_text())["seeds"] == [0, 1, 2]

    def test_config_overrides_flags(self, manifest, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"admm": {"K": 2}, "seeds": [4]}))
        out = tmp_path / "r.json"
        assert self.run(*self.cluster_args(manifest, out), "--config", tmp_path / "c.json") == 0
        rep = json.loads(out.read_text())
        assert rep["config"]["K"] == 2 and rep["seeds"] == [4]

    def test_validation_exit_code(self, manifest, tmp_path, capsys):
        code = self.run("cluster", manifest, "--rank", "99,1,1,1|1,1,1,1,1,1", "--K", 2)
        assert code == 2 and "error" in capsys.readouterr().err
        assert self.run("cluster", tmp_path / "missing.json") == 2

    def test_numerical_exit_code(self, manifest, monkeypatch):
        from tomdmvc import experiments
        from tomdmvc.exceptions import NumericalError

        def boom(*a, **k):
            raise NumericalError("solve failed")

        monkeypatch.setattr(experiments, "admm_solve", boom)
        assert self.run("cluster", manifest, "--rank", SMALL["rank"], "--K", 2) == 3

    def test_metrics_command(self, tmp_path, capsys):
        write_csv(tmp_path / "p.csv", [[0], [0], [1], [1]])
        write_csv(tmp_path / "t.csv", [[0], [0], [0], [1]])
        assert self.run("metrics", tmp_path / "p.csv", tmp_path / "t.csv") == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["metrics"]["precision"] == 0.5

    def test_bench_and_decompose(self, tmp_path, capsys):
        x = random_tomd((3, 3, 3, 3), TomdRank.uniform(1), seed=0).full()
        write_tensor(tmp_path / "x.txt", x)
        assert self.run("reconstruct-bench", tmp_path / "x.txt", "--methods", "tomd,tucker",
                        "--rank", "tomd=1,1,1,1|1,1,1,1,1,1", "--rank", "tucker=1,1,1,1",
                        "--no-timing", "--csv", tmp_path / "b.csv") == 0
        assert (tmp_path / "b.csv").read_text().startswith("method,rank,rse")
        capsys.readouterr()
        assert self.run("decompose", tmp_path / "x.txt", "--rank", "1,1,1,1|1,1,1,1,1,1",
                        "--out", tmp_path / "f", "--no-timing") == 0
        assert json.loads(capsys.readouterr().out)["rse"] <= 1e-10
        assert (tmp_path / "f" / "G5.txt").is_file()

    def test_bench_rank_spec_error(self, tmp_path):
        write_tensor(tmp_path / "x.txt", np.ones((2, 2, 2, 2)))
        assert self.run("reconstruct-bench", tmp_path / "x.txt", "--methods", "tomd",
                        "--rank", "tomd") == 2

    def test_synth_then_sweep(self, tmp_path, capsys):
        assert self.run("synth", tmp_path / "s", "--per-cluster", 5, "--dims", "6,7") == 0
        manifest = capsys.readouterr().out.strip()
        assert self.run("sweep", manifest, "--mus", "1,5", "--Ks", "3", "--rank",
                        "5,3,5,2|2,2,2,2,2,2", "--iter-max", 5, "--als-iter-max", 2,
                        "--seeds", "0", "--no-timing", "--report", tmp_path / "w.json",
                        "--csv", tmp_path / "w.csv") == 0
        assert len(json.loads((tmp_path / "w.json").read_text())["rows"]) == 2
