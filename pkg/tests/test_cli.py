"""End-to-end tests for the command-line interface."""

import json

import pytest

from ssodlab.cli import main
from ssodlab.config import load_config
from ssodlab.io import group_by_image, read_detections
from ssodlab.sat import select_pseudo_labels

CONFIG = {
    "scene": {"image_size": [256, 256], "object_count": 8,
              "large_side": [32.0, 64.0]},
    "anchors": {"strides": [8, 16, 32], "scale": 2.0, "ratios": [0.5, 1.0, 2.0]},
    "scene_count": 2,
}


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(CONFIG))
    return str(path)


@pytest.fixture()
def scenes_path(tmp_path, config_path):
    path = tmp_path / "scenes.jsonl"
    assert main(["simulate", "--config", config_path, "--seed", "7",
                 "--out", str(path)]) == 0
    return str(path)


@pytest.fixture()
def preds_path(tmp_path, config_path, scenes_path):
    path = tmp_path / "preds.jsonl"
    assert main(["teacher", "--config", config_path, "--scenes", scenes_path,
                 "--seed", "11", "--out", str(path)]) == 0
    return str(path)


@pytest.fixture()
def pseudo_path(tmp_path, preds_path):
    path = tmp_path / "pseudo.jsonl"
    assert main(["pseudolabel", "--preds", preds_path, "--out", str(path)]) == 0
    return str(path)


@pytest.fixture()
def assign_path(tmp_path, config_path, pseudo_path):
    path = tmp_path / "assign.json"
    assert main(["assign", "--pseudo", pseudo_path, "--config", config_path,
                 "--out", str(path)]) == 0
    return str(path)


class TestSimulate:
    def test_scene_ids_and_counts(self, scenes_path):
        rows = read_detections(scenes_path)
        grouped = group_by_image(rows)
        assert list(grouped) == ["scene_000000", "scene_000001"]
        assert all(len(g) == 8 for g in grouped.values())
        assert all(r.detection.score == 1.0 for r in rows)

    def test_count_flag_overrides_config(self, tmp_path, config_path):
        out = tmp_path / "three.jsonl"
        main(["simulate", "--config", config_path, "--seed", "7",
              "--count", "3", "--out", str(out)])
        assert len(group_by_image(read_detections(out))) == 3

    def test_meta_sidecar(self, scenes_path):
        meta = json.loads(open(scenes_path + ".meta.json").read())
        assert meta["command"] == "simulate"
        assert meta["seed"] == 7
        assert meta["params"]["count"] == 2
        assert meta["config"]["scene"]["object_count"] == 8

    def test_deterministic(self, tmp_path, config_path, scenes_path):
        other = tmp_path / "again.jsonl"
        main(["simulate", "--config", config_path, "--seed", "7", "--out", str(other)])
        assert open(other).read() == open(scenes_path).read()

    def test_seed_matters(self, tmp_path, config_path, scenes_path):
        other = tmp_path / "other.jsonl"
        main(["simulate", "--config", config_path, "--seed", "8", "--out", str(other)])
        assert open(other).read() != open(scenes_path).read()


class TestTeacher:
    def test_predictions_have_bg_scores(self, preds_path):
        rows = read_detections(preds_path)
        assert rows
        assert all(r.detection.bg_score is not None for r in rows)
        assert all(0.0 <= r.detection.score <= 1.0 for r in rows)

    def test_images_subset_of_scenes(self, preds_path, scenes_path):
        pred_images = set(group_by_image(read_detections(preds_path)))
        scene_images = set(group_by_image(read_detections(scenes_path)))
        assert pred_images <= scene_images


class TestPseudolabel:
    def test_kept_subset_sorted(self, preds_path, pseudo_path):
        preds = read_detections(preds_path)
        kept = read_detections(pseudo_path)
        assert 0 < len(kept) < len(preds)
        scores = [r.detection.score for r in kept]
        assert scores == sorted(scores, reverse=True)
        pred_keys = {(r.image_id, r.detection) for r in preds}
        assert all((r.image_id, r.detection) in pred_keys for r in kept)

    def test_thresholds_report(self, tmp_path, preds_path):
        out = tmp_path / "ps.jsonl"
        report_path = tmp_path / "thresholds.json"
        main(["pseudolabel", "--preds", preds_path, "--p", "40", "--floor", "0.5",
              "--out", str(out), "--report", str(report_path)])
        report = json.loads(report_path.read_text())
        dets = [r.detection for r in read_detections(preds_path)]
        _, expected = select_pseudo_labels(dets, percentile=40.0, floor=0.5)
        assert report["small_threshold"] == expected.small_threshold
        assert report["large_threshold"] == expected.large_threshold
        assert report["n_small_kept"] == expected.n_small_kept

    def test_floor_respected(self, tmp_path, preds_path):
        out = tmp_path / "high_floor.jsonl"
        main(["pseudolabel", "--preds", preds_path, "--floor", "0.99",
              "--out", str(out)])
        assert all(r.detection.score > 0.99 for r in read_detections(out))


class TestAssign:
    def test_structure(self, assign_path, pseudo_path):
        data = json.loads(open(assign_path).read())
        assert data["method"] == "wd_topk"
        assert data["k"] == 2
        grouped = group_by_image(read_detections(pseudo_path))
        assert [img["image_id"] for img in data["images"]] == list(grouped)
        for img in data["images"]:
            n_pseudo = len(img["pseudo"])
            assert len(img["best_similarity"]) == n_pseudo
            assert len(img["positives"]) <= 2 * n_pseudo
            for anchor, pseudo in img["positives"]:
                assert 0 <= anchor < data["n_anchors"]
                assert 0 <= pseudo < n_pseudo

    def test_baseline_method(self, tmp_path, config_path, pseudo_path):
        out = tmp_path / "baseline.json"
        main(["assign", "--pseudo", pseudo_path, "--config", config_path,
              "--baseline-iou", "--out", str(out)])
        data = json.loads(out.read_text())
        assert data["method"] == "iou_threshold"

    def test_config_echoed(self, assign_path):
        data = json.loads(open(assign_path).read())
        assert data["config"]["anchors"]["strides"] == [8, 16, 32]


class TestNegatives:
    def test_promoted_records_excluded(self, tmp_path, preds_path, assign_path,
                                       pseudo_path):
        out = tmp_path / "negatives.json"
        assert main(["negatives", "--preds", preds_path, "--assign", assign_path,
                     "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["bg_threshold"] == 0.7
        preds = group_by_image(read_detections(preds_path))
        pseudo = group_by_image(read_detections(pseudo_path))
        for img in data["images"]:
            image_preds = preds[img["image_id"]]
            promoted = {
                (d.box.cx, d.box.cy, d.box.w, d.box.h, d.box.theta, d.category, d.score)
                for d in pseudo.get(img["image_id"], [])}
            for idx in img["kept_normal"] + [h["index"] for h in img["hard"]]:
                d = image_preds[idx]
                key = (d.box.cx, d.box.cy, d.box.w, d.box.h, d.box.theta,
                       d.category, d.score)
                assert key not in promoted

    def test_hard_entries_have_weights(self, tmp_path, preds_path, assign_path):
        out = tmp_path / "negatives.json"
        main(["negatives", "--preds", preds_path, "--assign", assign_path,
              "--out", str(out)])
        data = json.loads(out.read_text())
        for img in data["images"]:
            for entry in img["hard"]:
                assert entry["score"] < 0.5
                assert entry["weight"] == pytest.approx(
                    2.0 * (1.0 - entry["score"] ** 2))

    def test_missing_bg_score_fails(self, tmp_path, scenes_path, assign_path, capsys):
        out = tmp_path / "negatives.json"
        rc = main(["negatives", "--preds", scenes_path, "--assign", assign_path,
                   "--out", str(out)])
        assert rc == 2
        assert "bg_score" in capsys.readouterr().err


class TestEvaluate:
    def test_self_evaluation_is_perfect(self, tmp_path, scenes_path):
        out = tmp_path / "report.json"
        assert main(["evaluate", "--preds", scenes_path, "--gt", scenes_path,
                     "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["mean_ap"] == pytest.approx(1.0)
        assert report["recall"] == pytest.approx(1.0)
        assert report["false_alarm"] == 0.0

    def test_pseudo_evaluation(self, tmp_path, scenes_path, pseudo_path):
        out = tmp_path / "report.json"
        main(["evaluate", "--preds", pseudo_path, "--gt", scenes_path,
              "--iou", "0.5", "--out", str(out)])
        report = json.loads(out.read_text())
        assert 0.0 <= report["false_alarm"] <= 1.0
        assert report["n_gt"] == 16


class TestPipeline:
    def test_outputs_and_determinism(self, tmp_path, config_path):
        run_a = tmp_path / "run_a"
        run_b = tmp_path / "run_b"
        for run in (run_a, run_b):
            assert main(["pipeline", "--config", config_path, "--iters", "2",
                         "--seed", "5", "--out", str(run)]) == 0
        assert (run_a / "iterations.jsonl").read_bytes() == \
            (run_b / "iterations.jsonl").read_bytes()
        assert (run_a / "summary.json").read_bytes() == \
            (run_b / "summary.json").read_bytes()
        records = [json.loads(line)
                   for line in (run_a / "iterations.jsonl").read_text().splitlines()]
        assert [r["index"] for r in records] == [0, 1]
        summary = json.loads((run_a / "summary.json").read_text())
        assert summary["iterations"] == 2
        assert summary["config"]["scene"]["object_count"] == 8

    def test_seed_changes_run(self, tmp_path, config_path):
        run_a = tmp_path / "run_a"
        run_b = tmp_path / "run_b"
        main(["pipeline", "--config", config_path, "--iters", "2", "--seed", "5",
              "--out", str(run_a)])
        main(["pipeline", "--config", config_path, "--iters", "2", "--seed", "6",
              "--out", str(run_b)])
        assert (run_a / "iterations.jsonl").read_text() != \
            (run_b / "iterations.jsonl").read_text()


class TestErrors:
    def test_missing_input_file(self, tmp_path, capsys):
        rc = main(["pseudolabel", "--preds", str(tmp_path / "absent.jsonl"),
                   "--out", str(tmp_path / "out.jsonl")])
        assert rc == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_bad_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"bogus": 1}))
        rc = main(["simulate", "--config", str(bad), "--seed", "1",
                   "--out", str(tmp_path / "scenes.jsonl")])
        assert rc == 2
        assert "bogus" in capsys.readouterr().err

    def test_bad_seed_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["simulate", "--seed", "-1", "--out", str(tmp_path / "s.jsonl")])
        with pytest.raises(SystemExit):
            main(["simulate", "--seed", "soon", "--out", str(tmp_path / "s.jsonl")])

    def test_bad_percentile(self, tmp_path, preds_path, capsys):
        rc = main(["pseudolabel", "--preds", preds_path, "--p", "150",
                   "--out", str(tmp_path / "out.jsonl")])
        assert rc == 2

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "ssodlab" in capsys.readouterr().out


class TestConfigEcho:
    def test_meta_config_reloads(self, tmp_path, scenes_path):
        meta = json.loads(open(scenes_path + ".meta.json").read())
        reloaded_path = tmp_path / "echo.json"
        reloaded_path.write_text(json.dumps(meta["config"]))
        config = load_config(reloaded_path)
        assert config.scene.object_count == 8
        assert config.anchor_strides == (8, 16, 32)
