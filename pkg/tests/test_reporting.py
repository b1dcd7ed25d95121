import json

import numpy as np

from deepfm import plotting
from deepfm.reporting import JsonLinesLog, config_hash, make_header, read_csv, write_report


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 64


def test_report_round_trip(tmp_path):
    header = make_header({"x": 1}, 7, "abc")
    rows = [{"name": "lr", "auc": np.float64(0.1 + 0.2), "hidden": [4, 4]}, {"name": "fm", "auc": 0.5}]
    csv_path, json_path = write_report(tmp_path / "r", rows, header, note="hi")
    got_header, got_rows = read_csv(csv_path)
    assert got_header == {"config_hash": header["config_hash"], "seed": "7", "schema_hash": "abc"}
    assert float(got_rows[0]["auc"]) == 0.1 + 0.2
    assert got_rows[0]["hidden"] == "[4, 4]" and got_rows[1]["hidden"] == ""
    doc = json.loads(json_path.read_text())
    assert doc["header"] == header and doc["note"] == "hi" and doc["rows"][0]["hidden"] == [4, 4]


def test_json_lines_log(tmp_path):
    with JsonLinesLog(tmp_path / "log.jsonl") as log:
        log({"step": np.int64(0), "loss": np.float32(0.5)})
        log({"step": 1, "loss": 0.25})
    lines = [json.loads(x) for x in (tmp_path / "log.jsonl").read_text().splitlines()]
    assert lines == [{"step": 0, "loss": 0.5}, {"step": 1, "loss": 0.25}]


def test_figures_written(tmp_path):
    plotting.loss_curves({"a": ([0, 1, 2], [0.7, 0.6, 0.5])}, tmp_path / "c.png")
    plotting.training_log([{"step": i, "epoch": 1, "mean_loss": 1 / (i + 1)} for i in range(5)], tmp_path / "t.png")
    plotting.sweep_plot([{"axis_value": v, "auc": 0.7, "logloss": 0.5} for v in (1.0, 0.5)], "dropout",
                        tmp_path / "s.png")
    rows = [{"L": 5, "model": m, "personalization": 0.5, "coverage": 0.2, "popularity_mean": 0.3,
             "popularity_var": 0.01} for m in ("LR", "DeepFM-D", "delta")]
    plotting.ab_plot(rows, tmp_path / "ab.png")
    plotting.bench_plot([{"name": "lr", "normalized_time": 1.0}, {"name": "fm", "normalized_time": 2.5}],
                        tmp_path / "b.png")
    for name in ("c", "t", "s", "ab", "b"):
        assert (tmp_path / f"{name}.png").read_bytes()[:4] == b"\x89PNG"
