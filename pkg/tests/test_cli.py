import csv
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from fixtures import rich_raw_rfm
from rfmseg.cli import main
from rfmseg.ingest import write_transactions
from rfmseg.metrics import adjusted_rand_index
from rfmseg.synthetic import bimodal_blobs, four_blobs, random_transactions, to_raw_rfm, transactions_from_rfm


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


def write_csv(path, txns):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_transactions(txns, fh)
    return path


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-data")
    pts, truth = bimodal_blobs(1000, seed=5)
    bimodal = write_csv(root / "bimodal.csv", transactions_from_rfm(to_raw_rfm(pts), seed=5))
    blobs_pts, _ = four_blobs(600, seed=2)
    blobs = write_csv(root / "blobs.csv", transactions_from_rfm(to_raw_rfm(blobs_pts), seed=2))
    rich = write_csv(root / "rich.csv", transactions_from_rfm(rich_raw_rfm(2000, seed=1), seed=1))
    rand = write_csv(root / "random.csv", random_transactions(300, 4, seed=1))
    return {"bimodal": bimodal, "truth": truth, "blobs": blobs, "rich": rich, "random": rand}


TINY = "holder,txid,amount,date\nA,T1,10.00,2020-01-01\nA,T2,40.00,2020-01-08\nB,T3,5.50,2020-01-10\n"


class TestRfm:
    def test_hand_fixture(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text(TINY)
        res = invoke("rfm", "--input", src, "--out-dir", tmp_path / "o")
        assert res.exit_code == 0, res.output
        rows = read_rows(tmp_path / "o" / "rfm.csv")
        assert [(r["customer_id"], r["recency"], r["frequency"], r["monetary"]) for r in rows] == [
            ("A", "3", "2", "50.00"), ("B", "1", "1", "5.50")]
        assert [float(rows[0]["recency_z"]), float(rows[1]["recency_z"])] == [1.0, -1.0]
        report = json.loads((tmp_path / "o" / "ingest_report.json").read_text())
        assert report["rows_read"] == 3 and report["rows_kept"] == 3

    def test_rerun_identical(self, tmp_path, data):
        for out in ("a", "b"):
            assert invoke("rfm", "--input", data["random"], "--out-dir", tmp_path / out).exit_code == 0
        for name in ("rfm.csv", "ingest_report.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_empty_after_dedup(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("holder,txid,amount,date\nA,T1,oops,2020-01-01\n")
        res = invoke("rfm", "--input", src, "--out-dir", tmp_path / "o")
        assert res.exit_code == 1 and "no usable transactions" in res.output

    def test_schema_mapping(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("Card Holder,Transaction ID,Amount,OP_Date\n" + "\n".join(TINY.splitlines()[1:]) + "\n")
        res = invoke("rfm", "--input", src, "--out-dir", tmp_path / "o",
                     "--schema", "holder=Card Holder,id=Transaction ID,amount=Amount,date=OP_Date")
        assert res.exit_code == 0
        bad = invoke("rfm", "--input", src, "--out-dir", tmp_path / "o")
        assert bad.exit_code == 2 and "holder" in bad.output

    def test_constant_feature_is_data_error(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("holder,txid,amount,date\nA,T1,1.00,2020-01-01\nB,T2,1.00,2020-01-01\n")
        res = invoke("rfm", "--input", src, "--out-dir", tmp_path / "o")
        assert res.exit_code == 1 and "zero-variance" in res.output

    def test_missing_input_usage_error(self, tmp_path):
        assert invoke("rfm", "--input", tmp_path / "nope.csv").exit_code == 2


class TestScore:
    def test_q5_rich(self, tmp_path, data):
        res = invoke("score", "--input", data["rich"], "--out-dir", tmp_path, "--q", 5)
        assert res.exit_code == 0 and "distinct RFM scores: 125" in res.output
        assert len(read_rows(tmp_path / "scores.csv")) == 2000

    def test_q2(self, tmp_path, data):
        res = invoke("score", "--input", data["rich"], "--out-dir", tmp_path, "--q", 2)
        rows = read_rows(tmp_path / "scores.csv")
        assert res.exit_code == 0 and len({r["combined"] for r in rows}) <= 8

    def test_q_too_big(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text(TINY)
        assert invoke("score", "--input", src, "--out-dir", tmp_path, "--q", 5).exit_code == 2


class TestElbow:
    def test_knee_flag(self, tmp_path, data):
        res = invoke("elbow", "--input", data["blobs"], "--out-dir", tmp_path, "--seed", 0)
        assert res.exit_code == 0
        rows = read_rows(tmp_path / "elbow.csv")
        assert [r["k"] for r in rows if r["knee_flag"] == "1"] == ["4"]
        assert "suggested k (knee): 4" in res.output

    def test_k_range_usage(self, tmp_path, data):
        assert invoke("elbow", "--input", data["blobs"], "--out-dir", tmp_path, "--k-min", 5, "--k-max", 2).exit_code == 2

    def test_restart_dominance(self, tmp_path, data):
        for r in (1, 5):
            invoke("elbow", "--input", data["random"], "--out-dir", tmp_path / str(r), "--seed", 3, "--restarts", r)
        one = [float(r["wcss"]) for r in read_rows(tmp_path / "1" / "elbow.csv")]
        five = [float(r["wcss"]) for r in read_rows(tmp_path / "5" / "elbow.csv")]
        assert all(f <= o for f, o in zip(five, one))

    def test_missing_seed_recorded(self, tmp_path, data):
        res = CliRunner().invoke(main, ["elbow", "--input", str(data["blobs"]), "--out-dir", str(tmp_path),
                                        "--k-max", "3"])
        assert res.exit_code == 0
        seed = json.loads((tmp_path / "manifest.json").read_text())["config"]["seed"]
        assert isinstance(seed, int) and f"using {seed}" in res.output


class TestSweep:
    def test_rows(self, tmp_path, data):
        res = invoke("sweep", "--input", data["blobs"], "--out-dir", tmp_path, "--eps-grid", "0.4,0.8",
                     "--minpts-grid", "5")
        assert res.exit_code == 0
        assert [(r["eps"], r["min_points"]) for r in read_rows(tmp_path / "sweep.csv")] == [("0.4", "5"), ("0.8", "5")]

    def test_bad_grid(self, tmp_path, data):
        assert invoke("sweep", "--input", data["blobs"], "--out-dir", tmp_path, "--eps-grid", "a,b").exit_code == 2
        assert invoke("sweep", "--input", data["blobs"], "--out-dir", tmp_path, "--eps-grid", "-1").exit_code == 2


class TestSegment:
    def test_model1_recovers_truth(self, tmp_path, data):
        res = invoke("segment", "--model", 1, "--input", data["bimodal"], "--out-dir", tmp_path, "--seed", 1)
        assert res.exit_code == 0
        rows = read_rows(tmp_path / "segments.csv")
        assert len({r["segment_id"] for r in rows}) == 5
        assert adjusted_rand_index([int(r["segment_id"]) for r in rows], data["truth"]) >= 0.9
        doc = json.loads((tmp_path / "segments.json").read_text())
        assert doc["parameters"]["seed"] == 1 and len(doc["segments"]) == 5
        assert {"centroid_raw", "centroid_std", "provenance", "label"} <= set(doc["segments"][0])
        scatter = read_rows(tmp_path / "scatter.csv")
        assert list(scatter[0]) == ["recency", "frequency", "monetary", "segment_id"]

    def test_model3_one_cluster(self, tmp_path, data):
        res = invoke("segment", "--model", 3, "--n-clusters", 1, "--input", data["blobs"], "--out-dir", tmp_path)
        assert res.exit_code == 0
        assert {r["segment_id"] for r in read_rows(tmp_path / "segments.csv")} == {"0"}
        tree = json.loads((tmp_path / "dendrogram.json").read_text())
        assert len(tree["merges"]) == 599

    def test_model3_cap_is_data_error(self, tmp_path, data):
        res = invoke("segment", "--model", 3, "--size-cap", 10, "--input", data["blobs"], "--out-dir", tmp_path)
        assert res.exit_code == 1 and "O(n^3)" in res.output

    def test_bad_model(self, tmp_path, data):
        assert invoke("segment", "--model", 4, "--input", data["blobs"], "--out-dir", tmp_path).exit_code == 2

    def test_bad_eps(self, tmp_path, data):
        res = invoke("segment", "--model", 2, "--eps", 0, "--input", data["blobs"], "--out-dir", tmp_path)
        assert res.exit_code == 2

    def test_config_file_and_override(self, tmp_path, data):
        cfg = tmp_path / "run.ini"
        cfg.write_text(f"[rfmseg]\ninput = {data['blobs']}\nmodel = 1\nk1 = 3\nk2 = 1\nseed = 4\n")
        res = invoke("segment", "--config", cfg, "--out-dir", tmp_path / "a")
        assert res.exit_code == 0
        assert len({r["segment_id"] for r in read_rows(tmp_path / "a" / "segments.csv")}) == 3
        res = invoke("segment", "--config", cfg, "--k1", 2, "--out-dir", tmp_path / "b")
        assert len({r["segment_id"] for r in read_rows(tmp_path / "b" / "segments.csv")}) == 2

    def test_unreadable_config(self, tmp_path, data):
        assert invoke("segment", "--config", tmp_path / "none.ini", "--model", 1).exit_code == 2


class TestRefine:
    def stage1(self, tmp_path, data):
        out = tmp_path / "stage1"
        assert invoke("segment", "--model", 1, "--k2", 1, "--input", data["bimodal"], "--out-dir", out,
                      "--seed", 1).exit_code == 0
        return out

    def test_equals_model1(self, tmp_path, data):
        s1 = self.stage1(tmp_path, data)
        res = invoke("refine", "--manifest", s1 / "manifest.json", "--segment", "max-recency-spread", "--k", 2,
                     "--input", data["bimodal"], "--out-dir", tmp_path / "r", "--seed", 1)
        assert res.exit_code == 0
        invoke("segment", "--model", 1, "--input", data["bimodal"], "--out-dir", tmp_path / "m1", "--seed", 1)
        for name in ("segments.csv", "scatter.csv"):
            assert (tmp_path / "r" / name).read_bytes() == (tmp_path / "m1" / name).read_bytes()

    def test_k1_keeps_segments(self, tmp_path, data):
        s1 = self.stage1(tmp_path, data)
        res = invoke("refine", "--manifest", s1 / "manifest.json", "--segment", 0, "--k", 1,
                     "--input", data["bimodal"], "--out-dir", tmp_path / "r", "--seed", 1)
        assert res.exit_code == 0
        assert (tmp_path / "r" / "segments.csv").read_bytes() == (s1 / "segments.csv").read_bytes()

    def test_nonexistent_segment(self, tmp_path, data):
        s1 = self.stage1(tmp_path, data)
        res = invoke("refine", "--manifest", s1 / "manifest.json", "--segment", 42,
                     "--input", data["bimodal"], "--out-dir", tmp_path / "r", "--seed", 1)
        assert res.exit_code != 0 and "42" in res.output

    def test_other_customers(self, tmp_path, data):
        s1 = self.stage1(tmp_path, data)
        res = invoke("refine", "--manifest", s1 / "manifest.json", "--segment", 0,
                     "--input", data["blobs"], "--out-dir", tmp_path / "r", "--seed", 1)
        assert res.exit_code == 1


class TestReplay:
    @pytest.mark.parametrize("model", ["1", "2", "3"])
    def test_segment_replay(self, tmp_path, data, model):
        first = tmp_path / "first"
        assert invoke("segment", "--model", model, "--input", data["blobs"], "--out-dir", first,
                      "--seed", 9).exit_code == 0
        res = invoke("replay", first / "manifest.json", "--out-dir", tmp_path / "again")
        assert res.exit_code == 0, res.output
        manifest = json.loads((first / "manifest.json").read_text())
        for name in manifest["outputs"]:
            assert (first / name).read_bytes() == (tmp_path / "again" / name).read_bytes()

    def test_detects_changed_input(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text(TINY)
        invoke("rfm", "--input", src, "--out-dir", tmp_path / "a")
        src.write_text(TINY.replace("5.50", "6.50"))
        res = invoke("replay", tmp_path / "a" / "manifest.json", "--out-dir", tmp_path / "b")
        assert res.exit_code == 1 and "differs" in res.output


def test_synth_roundtrip(tmp_path):
    out = tmp_path / "s.csv"
    assert invoke("synth", "--kind", "outliers", "--customers", 200, "--output", out).exit_code == 0
    assert invoke("rfm", "--input", out, "--out-dir", tmp_path / "o").exit_code == 0
    assert len(read_rows(tmp_path / "o" / "rfm.csv")) == 200


def test_manifest_contents(tmp_path, data):
    invoke("segment", "--model", 3, "--input", data["blobs"], "--out-dir", tmp_path, "--seed", 0)
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["command"] == "segment" and doc["backend"] in ("numba", "numpy")
    assert set(doc["outputs"]) == {"segments.csv", "segments.json", "scatter.csv", "dendrogram.json"}
    assert Path(doc["config"]["input_path"]).is_absolute()
    assert {"ingest", "rfm", "cluster", "export"} <= set(doc["timings"])
    assert np.all([len(d) == 64 for d in doc["outputs"].values()])
