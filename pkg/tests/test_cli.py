import json

import numpy as np
import pytest

from rfpqe.cli import main
from rfpqe.net import load_weights
from rfpqe.pipeline import load_sequence, read_report


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "data"), "--sequences", "2", "--frames", "6", "--size", "16"]) == 0
    cfg = {"dataset": str(root / "data"), "radius": 1, "preset": "mini", "iqe": {"n_blocks": 1, "width": 8},
           "iterations": 3, "batch_size": 2, "patch_size": 16, "base_lr": 1e-3}
    (root / "train.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(root / "train.json"), "--out", str(root / "m1.qew")]) == 0
    cfg["seed"] = 1
    (root / "train2.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(root / "train2.json"), "--out", str(root / "m2.qew")]) == 0
    return root


def test_train_outputs(workspace):
    log = json.loads((workspace / "m1.qew.log.json").read_text())
    assert len(log["log"]) == 3 and log["config"]["radius"] == 1
    assert len(load_weights(workspace / "m1.qew")) > 0


def test_train_is_reproducible(workspace, tmp_path):
    assert main(["train", "--config", str(workspace / "train.json"), "--out", str(tmp_path / "again.qew")]) == 0
    assert (tmp_path / "again.qew").read_bytes() == (workspace / "m1.qew").read_bytes()


def test_propose_refs(workspace, capsys):
    manifest = workspace / "data" / "seq000" / "compressed" / "manifest.json"
    assert main(["propose-refs", "--manifest", str(manifest), "--target", "5", "--radius", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    # QPs 8,32,24,32,8,32: candidates are frames 2 and 4; the last frame clamps to itself
    assert out == {"preceding": [2, 4], "target": 5, "following": [5, 5]}
    assert main(["propose-refs", "--manifest", str(manifest), "--target", "3", "--radius", "2",
                 "--track", "fixed-bitrate"]) == 0
    assert json.loads(capsys.readouterr().out)["preceding"] == [0, 2]


def test_enhance_evaluate_plot(workspace, tmp_path, capsys):
    seq = workspace / "data" / "seq000"
    out = tmp_path / "enh"
    assert main(["enhance", "--weights", str(workspace / "m1.qew"), "--manifest", str(seq / "compressed"),
                 "--out", str(out), "--self-ensemble"]) == 0
    assert load_sequence(out).frames.shape == (6, 1, 16, 16)
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["self_ensemble"] is True and prov["rfp"] is True
    report = tmp_path / "report.json"
    assert main(["evaluate", "--compressed", str(seq / "compressed"), "--enhanced", str(out),
                 "--truth", str(seq / "truth"), "--report", str(report)]) == 0
    assert "dPSNR" in capsys.readouterr().out
    r = read_report(report)
    assert r.provenance["weights_sha256"] == prov["weights_sha256"]
    assert main(["plot", "--report", str(report), "--out", str(tmp_path / "plots")]) == 0
    assert sorted(p.suffix for p in (tmp_path / "plots").iterdir()) == [".png", ".svg"]


def test_mask_training_and_fusion(workspace, tmp_path):
    mask = tmp_path / "mask.qew"
    assert main(["train-mask", "--model1", str(workspace / "m1.qew"), "--model2", str(workspace / "m2.qew"),
                 "--dataset", str(workspace / "data"), "--out", str(mask), "--iterations", "2",
                 "--patch-size", "16"]) == 0
    out = tmp_path / "fused"
    args = ["enhance", "--weights", str(workspace / "m1.qew"), "--manifest",
            str(workspace / "data" / "seq001" / "compressed"), "--out", str(out)]
    assert main(args + ["--fuse-with", str(workspace / "m2.qew"), "--mask", str(mask)]) == 0
    assert "fuse_with_sha256" in json.loads((out / "provenance.json").read_text())
    assert main(args + ["--fuse-with", str(workspace / "m2.qew")]) == 1


def test_degrade_command(workspace, tmp_path):
    cfg = tmp_path / "d.json"
    cfg.write_text(json.dumps({"quality_cycle": [2, 8], "seed": 3}))
    truth = workspace / "data" / "seq000" / "truth"
    assert main(["degrade", "--in", str(truth), "--out", str(tmp_path / "lq"), "--config", str(cfg)]) == 0
    lq = load_sequence(tmp_path / "lq")
    assert [m.qp for m in lq.metadata] == [4, 16, 4, 16, 4, 16]
    assert main(["degrade", "--in", str(workspace / "data" / "seq000"), "--out", str(tmp_path / "many")]) == 0
    assert (tmp_path / "many" / "truth" / "manifest.json").is_file()


def test_bdbr_command(tmp_path, capsys):
    (tmp_path / "a.csv").write_text("bitrate,psnr\n1000,32\n1800,34.1\n3200,36\n5800,38.2\n")
    (tmp_path / "b.csv").write_text("900,32.3\n1600,34.4\n2900,36.3\n5200,38.4\n")
    assert main(["bdbr", "--anchor", str(tmp_path / "a.csv"), "--test", str(tmp_path / "b.csv")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["bd_br_percent"] < 0 and doc["bd_br_reduction_percent"] == -doc["bd_br_percent"]
    (tmp_path / "c.csv").write_text("1,2\n")
    assert main(["bdbr", "--anchor", str(tmp_path / "a.csv"), "--test", str(tmp_path / "c.csv")]) == 1


def test_exit_codes(workspace, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"radius": 1, "learning_rate": 3}))
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "x.qew")]) == 1
    assert main(["propose-refs", "--manifest", str(tmp_path / "none.json"), "--target", "0", "--radius", "1"]) == 2
    corrupt = tmp_path / "corrupt.qew"
    corrupt.write_bytes(b"NOPE" + (workspace / "m1.qew").read_bytes()[4:])
    assert main(["enhance", "--weights", str(corrupt), "--manifest",
                 str(workspace / "data" / "seq000" / "compressed"), "--out", str(tmp_path / "e")]) == 2
    assert not (tmp_path / "e").exists()
    cfg = json.loads((workspace / "train.json").read_text())
    cfg["base_lr"] = 1e30
    cfg["iterations"] = 6
    nan_cfg = tmp_path / "nan.json"
    nan_cfg.write_text(json.dumps(cfg))
    with np.errstate(all="ignore"):
        assert main(["train", "--config", str(nan_cfg), "--out", str(tmp_path / "nan.qew")]) == 3
    assert not (tmp_path / "nan.qew").exists()
    assert "error" in capsys.readouterr().err
