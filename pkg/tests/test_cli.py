"""End-to-end command-line runs through main() with temp directories."""

import json

import numpy as np
import pytest

import oracles
from fsfgw.cli import main
from fsfgw.core import StructuredObject
from fsfgw.pipelines import structured_object_to_dict


def write_object(path, rng, n, d, names=None):
    obj = StructuredObject(
        C=oracles.random_structure(rng, n),
        a=np.full(n, 1.0 / n),
        X=rng.normal(0.0, 1.0, (n, d)),
        feature_names=names,
    )
    path.write_text(json.dumps(structured_object_to_dict(obj)))
    return obj


def write_grid_fixture(tmp_path):
    """The 6x5 grid with three column-band districts and one moved precinct."""
    ids, edges, features, population, assign_p, assign_q, _ = (
        oracles.planted_plan_fixture()
    )
    nodes = tmp_path / "nodes.csv"
    lines = ["precinct_id,population,v0,v1,v2,v3"]
    for i, pid in enumerate(ids):
        feats = ",".join(repr(float(v)) for v in features[i])
        lines.append(f"{pid},{float(population[i])!r},{feats}")
    nodes.write_text("\n".join(lines) + "\n")
    epath = tmp_path / "edges.csv"
    rows = ["precinct_id_a,precinct_id_b"]
    for i, j in edges:
        rows.append(f"{ids[i]},{ids[j]}")
    epath.write_text("\n".join(rows) + "\n")
    plans = {}
    for name, assignment in (("plan_p.csv", assign_p), ("plan_q.csv", assign_q)):
        body = ["precinct_id,district"]
        for pid, dist in zip(ids, assignment):
            body.append(f"{pid},{dist}")
        (tmp_path / name).write_text("\n".join(body) + "\n")
        plans[name] = tmp_path / name
    return nodes, epath, plans["plan_p.csv"], plans["plan_q.csv"]


def read_csv_lines(path):
    return path.read_text().strip().splitlines()


class TestSolveCommand:
    def test_happy_path(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        x = tmp_path / "x.json"
        y = tmp_path / "y.json"
        write_object(x, rng, 5, 3, names=("u", "v", "w"))
        write_object(y, rng, 4, 3)
        out = tmp_path / "out"
        code = main(["solve", str(x), str(y), "--lambda", "0.2", "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        assert printed.startswith("objective ")
        assert "converged" in printed

        result = json.loads((out / "result.json").read_text())
        assert result["lambda"] == 0.2
        assert result["objective"] == pytest.approx(
            result["feature_term"] + result["gw_term"] + result["reg_term"], abs=1e-9
        )
        lines = read_csv_lines(out / "weights.csv")
        assert lines[0] == "feature,name,weight,score"
        assert len(lines) == 4
        assert lines[1].startswith("0,u,")
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"][0] == "solve"
        assert manifest["config"]["lambda"] == 0.2
        assert manifest["config"]["mode"] == "lasso"
        assert manifest["input_paths"] == [str(x), str(y)]
        assert manifest["seed"] == 0

    def test_defaults_to_a_calibrated_fraction(self, tmp_path):
        rng = np.random.default_rng(1)
        x = tmp_path / "x.json"
        y = tmp_path / "y.json"
        write_object(x, rng, 4, 3)
        write_object(y, rng, 4, 3)
        out = tmp_path / "out"
        assert main(["solve", str(x), str(y), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["lambda"] is None
        assert manifest["config"]["suppression_fraction"] == 0.3

    def test_group_mode_via_groups_file(self, tmp_path, capsys):
        rng = np.random.default_rng(2)
        x = tmp_path / "x.json"
        y = tmp_path / "y.json"
        write_object(x, rng, 4, 3)
        write_object(y, rng, 5, 3)
        gpath = tmp_path / "groups.json"
        gpath.write_text("[[0, 1], [2]]")
        out = tmp_path / "out"
        code = main(
            ["solve", str(x), str(y), "--mode", "group_simplex",
             "--groups", str(gpath), "--out", str(out)]
        )
        assert code == 0
        capsys.readouterr()
        result = json.loads((out / "result.json").read_text())
        w = result["weights"]
        assert w in ([1.0, 1.0, 0.0], [0.0, 0.0, 1.0])

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        x = tmp_path / "x.json"
        y = tmp_path / "y.json"
        write_object(x, rng, 4, 3)
        write_object(y, rng, 4, 3)
        out = tmp_path / "out"
        argv = ["solve", str(x), str(y), "--f", "0.4", "--out", str(out)]
        assert main(argv) == 0
        first = {
            p.name: p.read_bytes() for p in out.iterdir()
        }
        assert main(argv) == 0
        capsys.readouterr()
        second = {p.name: p.read_bytes() for p in out.iterdir()}
        assert first == second


class TestSolveValidationErrors:
    def write_pair(self, tmp_path, d_y=3):
        rng = np.random.default_rng(4)
        x = tmp_path / "x.json"
        y = tmp_path / "y.json"
        write_object(x, rng, 4, 3)
        write_object(y, rng, 4, d_y)
        return x, y

    def assert_error_json(self, capsys, code, expect_code):
        assert code == expect_code
        err = capsys.readouterr().err.strip()
        doc = json.loads(err)
        assert set(doc) == {"error", "message"}
        return doc

    def test_level_conflicts_with_simplex_mode(self, tmp_path, capsys):
        x, y = self.write_pair(tmp_path)
        code = main(["solve", str(x), str(y), "--mode", "simplex",
                     "--lambda", "1.0", "--out", str(tmp_path / "o")])
        doc = self.assert_error_json(capsys, code, 2)
        assert doc["error"] == "InvalidConfig"

    def test_group_mode_requires_groups(self, tmp_path, capsys):
        x, y = self.write_pair(tmp_path)
        code = main(["solve", str(x), str(y), "--mode", "group_simplex",
                     "--out", str(tmp_path / "o")])
        self.assert_error_json(capsys, code, 2)

    def test_missing_input_file(self, tmp_path, capsys):
        x, _ = self.write_pair(tmp_path)
        code = main(["solve", str(x), str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "o")])
        doc = self.assert_error_json(capsys, code, 2)
        assert doc["error"] == "FileNotFoundError"

    def test_feature_count_mismatch(self, tmp_path, capsys):
        x, y = self.write_pair(tmp_path, d_y=2)
        code = main(["solve", str(x), str(y), "--out", str(tmp_path / "o")])
        doc = self.assert_error_json(capsys, code, 2)
        assert doc["error"] == "DimensionMismatch"

    def test_malformed_json(self, tmp_path, capsys):
        x, y = self.write_pair(tmp_path)
        y.write_text("{not json")
        code = main(["solve", str(x), str(y), "--out", str(tmp_path / "o")])
        self.assert_error_json(capsys, code, 2)

    def test_usage_error_from_the_parser(self, capsys):
        assert main(["solve"]) == 2
        capsys.readouterr()


class TestSyntheticCommands:
    def test_recover(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(
            ["synthetic", "recover", "--n", "16", "--d", "6", "--k", "2",
             "--radius", "0.45", "--f", "0.3", "--out", str(out)]
        )
        assert code == 0
        printed = capsys.readouterr().out
        assert printed.startswith("separation ")
        lines = read_csv_lines(out / "weights.csv")
        assert lines[0] == "feature,name,weight,score,differentiating"
        assert len(lines) == 7
        flags = [line.split(",")[-1] for line in lines[1:]]
        assert flags == ["1", "1", "0", "0", "0", "0"]

    def test_delta_sweep(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(
            ["synthetic", "delta-sweep", "--n", "16", "--d", "6", "--k", "2",
             "--radius", "0.45", "--deltas", "0.5,2.0",
             "--modes", "lasso,simplex", "--out", str(out)]
        )
        assert code == 0
        capsys.readouterr()
        lines = read_csv_lines(out / "sweep.csv")
        assert lines[0] == "delta,mode,separation"
        body = [line.split(",") for line in lines[1:]]
        assert [(row[0], row[1]) for row in body] == [
            ("0.5", "lasso"), ("0.5", "simplex"), ("2", "lasso"), ("2", "simplex")
        ]

    def test_delta_range_syntax(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(
            ["synthetic", "delta-sweep", "--n", "16", "--d", "6", "--k", "2",
             "--radius", "0.45", "--deltas", "0.0:2.0:3",
             "--modes", "simplex", "--out", str(out)]
        )
        assert code == 0
        capsys.readouterr()
        lines = read_csv_lines(out / "sweep.csv")
        assert [line.split(",")[0] for line in lines[1:]] == ["0", "1", "2"]

    def test_bad_mode_list(self, tmp_path, capsys):
        code = main(
            ["synthetic", "delta-sweep", "--modes", "lasso,bogus",
             "--out", str(tmp_path / "o")]
        )
        assert code == 2
        capsys.readouterr()

    def test_roc(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(
            ["synthetic", "roc", "--n", "16", "--d", "6", "--k", "2",
             "--radius", "0.45", "--fracs", "0.2,0.5", "--out", str(out)]
        )
        assert code == 0
        printed = capsys.readouterr().out
        assert printed.startswith("auc ")
        lines = read_csv_lines(out / "roc.csv")
        assert lines[0] == "f,tpr,fpr"
        assert len(lines) == 3


class TestPairwiseCommand:
    def make_objects(self, tmp_path, count=3):
        rng = np.random.default_rng(5)
        obj_dir = tmp_path / "objects"
        obj_dir.mkdir()
        for idx in range(count):
            write_object(obj_dir / f"g{idx}.json", rng, 4 + idx, 3)
        return obj_dir

    def test_distance_matrix(self, tmp_path, capsys):
        obj_dir = self.make_objects(tmp_path)
        out = tmp_path / "out"
        code = main(["pairwise", str(obj_dir), "--lambda", "0.2", "--out", str(out)])
        assert code == 0
        capsys.readouterr()
        lines = read_csv_lines(out / "distances.csv")
        assert lines[0] == "id,g0,g1,g2"
        assert len(lines) == 4
        assert lines[1].split(",")[1] == "0"
        wlines = read_csv_lines(out / "pair_weights.csv")
        assert wlines[0] == "id_a,id_b,f0,f1,f2"
        assert len(wlines) == 4

    def test_workers_do_not_change_the_output(self, tmp_path, capsys):
        obj_dir = self.make_objects(tmp_path)
        serial = tmp_path / "serial"
        parallel = tmp_path / "parallel"
        argv = ["pairwise", str(obj_dir), "--lambda", "0.2"]
        assert main(argv + ["--out", str(serial)]) == 0
        assert main(argv + ["--workers", "2", "--out", str(parallel)]) == 0
        capsys.readouterr()
        assert (serial / "distances.csv").read_bytes() == (
            parallel / "distances.csv"
        ).read_bytes()
        assert (serial / "pair_weights.csv").read_bytes() == (
            parallel / "pair_weights.csv"
        ).read_bytes()

    def test_empty_directory(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = main(["pairwise", str(empty), "--out", str(tmp_path / "o")])
        assert code == 2
        doc = json.loads(capsys.readouterr().err.strip())
        assert doc["error"] == "InvalidConfig"

    def test_mixed_feature_counts(self, tmp_path, capsys):
        rng = np.random.default_rng(6)
        obj_dir = tmp_path / "objects"
        obj_dir.mkdir()
        write_object(obj_dir / "a.json", rng, 4, 3)
        write_object(obj_dir / "b.json", rng, 4, 2)
        code = main(["pairwise", str(obj_dir), "--out", str(tmp_path / "o")])
        assert code == 2
        doc = json.loads(capsys.readouterr().err.strip())
        assert doc["error"] == "DimensionMismatch"


class TestRedistrictCommands:
    def test_compare_identical_plans(self, tmp_path, capsys):
        nodes, edges, plan_p, _ = write_grid_fixture(tmp_path)
        out = tmp_path / "out"
        code = main(
            ["redistrict", "compare", str(nodes), str(edges), str(plan_p), str(plan_p),
             "--lambda", "0.2", "--out", str(out)]
        )
        assert code == 0
        printed = capsys.readouterr().out
        assert printed.startswith("total_distance ")
        doc = json.loads((out / "comparison.json").read_text())
        assert doc["plan_p"] == "p" and doc["plan_q"] == "p"
        assert doc["matching"] == [[1, 1], [2, 2], [3, 3]]
        assert doc["total_distance"] <= 3e-8
        lines = read_csv_lines(out / "weight_heatmap.csv")
        assert lines[0] == "district_pair,v0,v1,v2,v3"
        assert [line.split(",")[0] for line in lines[1:]] == ["1:1", "2:2", "3:3"]
        assert (out / "manifest.json").exists()

    def test_compare_differing_plans(self, tmp_path, capsys):
        nodes, edges, plan_p, plan_q = write_grid_fixture(tmp_path)
        out = tmp_path / "out"
        code = main(
            ["redistrict", "compare", str(nodes), str(edges), str(plan_p), str(plan_q),
             "--lambda", "0.2", "--out", str(out)]
        )
        assert code == 0
        capsys.readouterr()
        doc = json.loads((out / "comparison.json").read_text())
        assert doc["total_distance"] > 1e-6

    def test_disconnected_district_is_a_validation_error(self, tmp_path, capsys):
        (tmp_path / "nodes.csv").write_text(
            "precinct_id,population,v0\na,1,0.1\nb,1,0.2\nc,1,0.3\nd,1,0.4\n"
        )
        (tmp_path / "edges.csv").write_text(
            "precinct_id_a,precinct_id_b\na,b\nc,d\na,c\nb,d\n"
        )
        # Districts take the grid's diagonals: both induced subgraphs are
        # disconnected.
        (tmp_path / "diag.csv").write_text("precinct_id,district\na,1\nb,2\nc,2\nd,1\n")
        code = main(
            ["redistrict", "compare", str(tmp_path / "nodes.csv"),
             str(tmp_path / "edges.csv"), str(tmp_path / "diag.csv"),
             str(tmp_path / "diag.csv"), "--out", str(tmp_path / "o")]
        )
        assert code == 2
        doc = json.loads(capsys.readouterr().err.strip())
        assert doc["error"] == "DisconnectedDistrict"

    def test_matrix(self, tmp_path, capsys):
        nodes, edges, plan_p, plan_q = write_grid_fixture(tmp_path)
        third = tmp_path / "plan_r.csv"
        third.write_text(plan_p.read_text())
        out = tmp_path / "out"
        code = main(
            ["redistrict", "matrix", str(nodes), str(edges),
             str(plan_p), str(plan_q), str(third),
             "--lambda", "0.2", "--out", str(out)]
        )
        assert code == 0
        capsys.readouterr()
        lines = read_csv_lines(out / "plan_distances.csv")
        assert lines[0] == "id,p,q,r"
        assert len(lines) == 4
        grid = np.array([[float(v) for v in line.split(",")[1:]] for line in lines[1:]])
        assert np.array_equal(grid, grid.T)
        assert grid[0, 2] <= 1e-8  # p and r are the same plan
        assert grid[0, 1] > 1e-6

    def test_cluster(self, tmp_path, capsys):
        nodes, edges, plan_p, plan_q = write_grid_fixture(tmp_path)
        third = tmp_path / "plan_r.csv"
        third.write_text(plan_p.read_text())
        fourth = tmp_path / "plan_s.csv"
        fourth.write_text(plan_q.read_text())
        out = tmp_path / "out"
        code = main(
            ["redistrict", "cluster", str(nodes), str(edges),
             str(plan_p), str(plan_q), str(third), str(fourth),
             "--lambda", "0.2", "--out", str(out)]
        )
        assert code == 0
        printed = capsys.readouterr().out.strip().splitlines()
        assert len(printed) == 3
        assert all(line.startswith("merge ") for line in printed)
        merges = json.loads((out / "dendrogram.json").read_text())
        assert len(merges) == 3
        assert set(merges[0]) == {"a", "b", "height"}
        # The two copies of each plan pair up before anything else merges.
        first_two = {(m["a"], m["b"]) for m in merges[:2]}
        assert first_two == {(0, 2), (1, 3)}
        assert (out / "plan_distances.csv").exists()

    def test_matrix_needs_two_plans(self, tmp_path, capsys):
        nodes, edges, plan_p, _ = write_grid_fixture(tmp_path)
        code = main(
            ["redistrict", "matrix", str(nodes), str(edges), str(plan_p),
             "--out", str(tmp_path / "o")]
        )
        assert code == 2
        capsys.readouterr()
