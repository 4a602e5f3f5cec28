import json

import numpy as np
import pytest
from PIL import Image

from spinsim.harness.cli import main
from spinsim.harness.config import DEFAULTS, ConfigError, load_config, parse_config
from spinsim.harness.data import (
    SegDataset,
    generate_shapes,
    load_camvid_layout,
    load_dataset,
    save_dataset,
    split_counts,
)
from spinsim.harness.io import RunLock, read_csv, read_label_png, write_csv, write_label_png
from spinsim.harness.scenarios import SCENARIOS, run_scenario

TINY_TRAIN = """
seed = 4
[hwnn]
input_size = 16
depth = 1
base = 2
[dataset]
n = 8
size = 16
[train]
epochs = 2
"""


# --------------------------------------------------------------------------- #
# config


def test_defaults_parse_and_override():
    cfg = parse_config("")
    assert cfg.values == DEFAULTS
    cfg = parse_config("seed = 7\n[circuits]\ndelta = 30.26\nn_trials = 3\n")
    assert cfg.seed == 7 and cfg["circuits"]["delta"] == 30.26 and cfg["circuits"]["points"] == 21
    assert cfg.with_overrides(seed=2**64 - 1).seed == 2**64 - 1
    assert parse_config("[dataset]\nn = 3\n")["dataset"]["n"] == 3


@pytest.mark.parametrize(
    "text",
    [
        "sede = 1",
        "[transport]\nbarier_sites = 8",
        "[circuits]\nn_trials = 2.5",
        "[hwnn]\nideal = 1",
        "[magneto]\ni_s = [0, true, 0]",
        "transport = 3",
        "seed = -1",
        "threads = 0",
        "[[",
    ],
)
def test_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_ints_promote_to_float():
    cfg = parse_config("[magneto]\nhk_oe = 2180\ni_s = [0, 1, 0]\n")
    assert isinstance(cfg["magneto"]["hk_oe"], float) and cfg["magneto"]["i_s"] == [0.0, 1.0, 0.0]


def test_override_bounds():
    with pytest.raises(ConfigError):
        parse_config("").with_overrides(seed=2**64)
    with pytest.raises(ConfigError):
        parse_config("").with_overrides(threads=0)
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.toml")


def test_manifest_json_is_a_config(tmp_path):
    cfg = parse_config("seed = 9\n[synapse]\nq0_fraction = 0.25\n")
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps({"command": [], "seed": 9, "config": cfg.values, "artifacts": {}}))
    assert load_config(p).values == cfg.values


# --------------------------------------------------------------------------- #
# data


def test_shapes_single_image_two_classes():
    ds = generate_shapes(1, 32, 2, seed=3)
    assert set(np.unique(ds.labels)) == {0, 1}
    assert ds.images.shape == (1, 32, 32, 3) and 0 <= ds.images.min() and ds.images.max() <= 1


def test_shapes_deterministic():
    a, b = generate_shapes(5, seed=8), generate_shapes(5, seed=8)
    assert np.array_equal(a.images, b.images) and np.array_equal(a.labels, b.labels)
    assert not np.array_equal(a.images, generate_shapes(5, seed=9).images)


@pytest.mark.parametrize("classes", [3, 6])
def test_shapes_class_balance(classes):
    h = generate_shapes(500, 32, classes, seed=0).class_histogram()
    assert len(h) == classes and h.min() >= 0.05


def test_shapes_validation():
    with pytest.raises(ValueError):
        generate_shapes(2, 32, 7)
    with pytest.raises(ValueError):
        generate_shapes(2, 8, 3)


def test_split_counts():
    assert split_counts(701) == (369, 100, 232)
    assert split_counts(7) == (4, 1, 2)
    for n in range(40):
        assert sum(split_counts(n)) == n


def test_seg_dataset_invariants():
    with pytest.raises(ValueError):
        SegDataset(np.zeros((2, 4, 4, 3)), np.zeros((2, 4, 5)), 2, np.array(["train"] * 2))
    with pytest.raises(ValueError):
        SegDataset(np.zeros((1, 4, 4, 3)), np.full((1, 4, 4), 2), 2, np.array(["train"]))
    with pytest.raises(ValueError):
        SegDataset(np.zeros((1, 4, 4, 3)), np.zeros((1, 4, 4)), 2, np.array(["holdout"]))


def _mock_camvid(root, n=7, size=8):
    (root / "images").mkdir(parents=True)
    (root / "labels").mkdir()
    colors = {"#000000": 0, "128,0,0": 1, "#00ff00": 2}
    (root / "classes.json").write_text(json.dumps(colors))
    rgb = np.array([[0, 0, 0], [128, 0, 0], [0, 255, 0]], dtype=np.uint8)
    gen = np.random.default_rng(0)
    labels = []
    for i in range(n):
        lab = gen.integers(0, 3, (size, size))
        labels.append(lab)
        Image.fromarray(gen.integers(0, 256, (size, size, 3), dtype=np.uint8)).save(root / "images" / f"f{i:02d}.png")
        pal = Image.fromarray(lab.astype(np.uint8), mode="P")
        pal.putpalette(rgb.ravel().tolist())
        pal.save(root / "labels" / f"f{i:02d}.png")
    return np.stack(labels)


def test_camvid_layout_mock(tmp_path):
    labels = _mock_camvid(tmp_path)
    ds = load_camvid_layout(tmp_path)
    assert ds.n_classes == 3 and np.array_equal(ds.labels, labels)
    assert [len(ds.subset(s)) for s in ("train", "val", "test")] == [4, 1, 2]
    assert ds.names[0] == "f00"


def test_camvid_errors(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        load_camvid_layout(tmp_path)
    _mock_camvid(tmp_path / "a")
    (tmp_path / "a" / "labels" / "f03.png").unlink()
    with pytest.raises(ValueError, match="f03"):
        load_camvid_layout(tmp_path / "a")
    _mock_camvid(tmp_path / "b")
    Image.fromarray(np.full((8, 8, 3), 7, dtype=np.uint8)).save(tmp_path / "b" / "labels" / "f01.png")
    with pytest.raises(ValueError, match="#070707"):
        load_camvid_layout(tmp_path / "b")
    _mock_camvid(tmp_path / "c")
    (tmp_path / "c" / "classes.json").unlink()
    with pytest.raises(ValueError, match="mapping"):
        load_camvid_layout(tmp_path / "c")


def test_dataset_round_trip(tmp_path):
    ds = generate_shapes(4, 16, 3, seed=2)
    save_dataset(ds, tmp_path)
    back = load_dataset(tmp_path)
    assert np.array_equal(back.images, ds.images) and np.array_equal(back.labels, ds.labels)
    assert back.names == ds.names and np.array_equal(back.splits, ds.splits)


# --------------------------------------------------------------------------- #
# io


def test_label_png_round_trip(tmp_path):
    lab = np.random.default_rng(1).integers(0, 32, (12, 9))
    write_label_png(tmp_path / "l.png", lab)
    assert np.array_equal(read_label_png(tmp_path / "l.png"), lab)
    with pytest.raises(ValueError):
        write_label_png(tmp_path / "x.png", np.full((2, 2), 300))


def test_csv_floats_round_trip(tmp_path):
    x = np.random.default_rng(2).normal(size=5)
    write_csv(tmp_path / "a.csv", {"x": x, "k": np.arange(5)})
    back = read_csv(tmp_path / "a.csv")
    assert np.array_equal(np.array(back["x"], dtype=float), x) and back["k"] == [str(k) for k in range(5)]
    with pytest.raises(ValueError):
        write_csv(tmp_path / "b.csv", {"a": [1, 2], "b": [1]})


def test_run_lock(tmp_path):
    with RunLock(tmp_path):
        with pytest.raises(ConfigError):
            with RunLock(tmp_path):
                pass
    with RunLock(tmp_path):
        pass
    assert not (tmp_path / ".spinsim.lock").exists()


# --------------------------------------------------------------------------- #
# CLI


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[magneto]\nhk_o = 1.0\n")
    assert main(["llgs-run", "--config", str(bad), "--out", str(tmp_path / "a")]) == 2
    assert "hk_o" in capsys.readouterr().err
    dt = tmp_path / "dt.toml"
    dt.write_text("[magneto]\ndt = 1e-9\n")
    assert main(["llgs-run", "--config", str(dt), "--out", str(tmp_path / "b")]) == 2
    nan = tmp_path / "nan.toml"
    nan.write_text("[magneto]\ni_s = [nan, 0.0, 0.0]\nduration = 1e-10\n")
    assert main(["llgs-run", "--config", str(nan), "--out", str(tmp_path / "c")]) == 3
    assert main(["scenario", "no-such", "--out", str(tmp_path / "d")]) == 2
    assert main(["eval", "--out", str(tmp_path / "e")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_cli_locked_directory(tmp_path):
    (tmp_path / ".spinsim.lock").write_text("1")
    assert main(["energy-report", "--out", str(tmp_path)]) == 2


def test_cli_manifest_and_replay(tmp_path):
    out = tmp_path / "a"
    assert main(["dw-pulse", "--seed", "5", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 5 and man["command"][0] == "dw-pulse"
    assert set(man["artifacts"]) == {"dw_pulse_train.csv", "dw_amplitude_sweep.csv", "dw_summary.json"}
    assert main(["dw-pulse", "--config", str(out / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    for name in man["artifacts"]:
        assert (out / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_train_then_eval(tmp_path):
    cfg = tmp_path / "t.toml"
    cfg.write_text(TINY_TRAIN)
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "run")]) == 0
    metrics = read_csv(tmp_path / "run" / "metrics.csv")
    assert metrics["epoch"] == ["0", "1"]
    led = json.loads((tmp_path / "run" / "ledger.json").read_text())
    assert len(led["train"]["per_epoch"]) == 2
    preds = sorted((tmp_path / "run" / "predictions").glob("*.png"))
    assert len(preds) == split_counts(8)[2] and read_label_png(preds[0]).shape == (16, 16)
    cfg.write_text(TINY_TRAIN + f'[model]\nweights = "{tmp_path / "run" / "weights"}"\n')
    assert main(["eval", "--config", str(cfg), "--out", str(tmp_path / "ev")]) == 0
    ev = json.loads((tmp_path / "ev" / "eval.json").read_text())
    assert ev["pixel_accuracy"] == pytest.approx(led["test_pixel_accuracy"])
    cfg.write_text(TINY_TRAIN.replace("base = 2", "base = 3") + f'[model]\nweights = "{tmp_path / "run" / "weights"}"\n')
    assert main(["eval", "--config", str(cfg), "--out", str(tmp_path / "ev2")]) == 2


def test_cli_energy_report(tmp_path):
    assert main(["energy-report", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "energy_report.json").read_text())
    assert round(rep["top_down_total_mJ"], 2) == 85.79


def test_scenario_list_and_fast_scenarios(capsys):
    assert main(["scenario", "list"]) == 0
    listed = capsys.readouterr().out
    assert all(name in listed for name in SCENARIOS)
    for name in ("solve-linear", "mtj-conductance", "she-plates", "thermal-stability", "energy", "shapes", "camvid-layout"):
        rows = run_scenario(name, parse_config(""))
        assert rows and all(r["passed"] for r in rows), name
