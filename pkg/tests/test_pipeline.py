import json

import numpy as np
import pytest

from rfpqe.errors import ConfigurationError, DataError, UsageError
from rfpqe.metrics import curve_stats, psnr
from rfpqe.net import MaskNet, NetworkConfig, QENet
from rfpqe.pipeline import (
    DegradeConfig,
    FrameSequence,
    TrainConfig,
    build_synthetic_dataset,
    enhance,
    evaluate,
    evaluate_dirs,
    load_config,
    load_dataset,
    load_sequence,
    plot_curves,
    synth_clean_sequence,
    synth_degrade,
    train,
    write_sequence,
)
from rfpqe.pipeline.degrade import frame_plan
from rfpqe.pipeline.train import smoothed
from rfpqe.rfp import FrameMetadata


def tiny_config(**kw):
    base = dict(radius=1, preset="mini", iqe={"n_blocks": 1, "width": 8}, iterations=4, batch_size=2,
                patch_size=16, base_lr=1e-3, seed=0)
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def pairs():
    return build_synthetic_dataset(None, n_sequences=2, num_frames=6, size=24, seed=1, write=False)


# -- manifests --------------------------------------------------------------

def write_raw(tmp_path, n=5, h=16, w=16, **overrides):
    rng = np.random.default_rng(0)
    frames = []
    for i in range(n):
        data = rng.integers(0, 256, (h, w), dtype=np.uint8)
        (tmp_path / f"f{i}.y").write_bytes(data.tobytes())
        frames.append({"index": i, "file": f"f{i}.y", "qp": 30 + i % 2, "frame_type": "P"})
    doc = {"width": w, "height": h, "pixel_format": "gray8", "frames": frames, **overrides}
    (tmp_path / "manifest.json").write_text(json.dumps(doc))
    return tmp_path / "manifest.json"


def test_load_sequence_shapes(tmp_path):
    seq = load_sequence(write_raw(tmp_path))
    assert len(seq) == 5 and seq.frames.shape[1:] == (1, 16, 16)
    assert seq.frames.dtype == np.float32 and seq.frames.max() <= 1
    assert [m.qp for m in seq.metadata] == [30, 31, 30, 31, 30]
    assert load_sequence(tmp_path).frames.tobytes() == seq.frames.tobytes()


def test_wrong_byte_length_names_file(tmp_path):
    path = write_raw(tmp_path)
    (tmp_path / "f2.y").write_bytes(b"\0" * 10)
    with pytest.raises(DataError, match=r"f2\.y.*256"):
        load_sequence(path)


def test_missing_file(tmp_path):
    path = write_raw(tmp_path)
    (tmp_path / "f4.y").unlink()
    with pytest.raises(DataError, match="missing"):
        load_sequence(path)


@pytest.mark.parametrize("mutate,msg", [
    (lambda d: d["frames"].__setitem__(1, {**d["frames"][1], "index": 0}), "duplicate"),
    (lambda d: d["frames"].__setitem__(1, {**d["frames"][1], "index": 7}), "contiguous"),
    (lambda d: d.pop("width"), "lacks"),
    (lambda d: d.__setitem__("pixel_format", "yuv420"), "pixel_format"),
    (lambda d: d.__setitem__("extra", 1), "unknown"),
    (lambda d: d["frames"][0].__setitem__("frame_type", "X"), "frame_type"),
])
def test_manifest_errors(tmp_path, mutate, msg):
    path = write_raw(tmp_path)
    doc = json.loads(path.read_text())
    mutate(doc)
    path.write_text(json.dumps(doc))
    with pytest.raises(DataError, match=msg):
        load_sequence(path)


def test_malformed_manifest(tmp_path):
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(DataError, match="malformed"):
        load_sequence(tmp_path)
    with pytest.raises(DataError):
        load_sequence(tmp_path / "nowhere")


def test_write_load_roundtrip(tmp_path):
    seq = synth_degrade(synth_clean_sequence(4, 12, 20, seed=3), DegradeConfig())
    write_sequence(seq, tmp_path / "s")
    back = load_sequence(tmp_path / "s")
    assert back.frames.tobytes() == seq.frames.tobytes()
    assert back.metadata == seq.metadata
    assert not [p for p in (tmp_path / "s").iterdir() if p.name.startswith(".")]


# -- degradation ------------------------------------------------------------

def test_degrade_deterministic_and_noop():
    clean = synth_clean_sequence(8, 32, 32, seed=0)
    cfg = DegradeConfig(blur_sigma=0.7, noise_sigma=2.0, seed=5)
    a, b = synth_degrade(clean, cfg), synth_degrade(clean, cfg)
    assert a.frames.tobytes() == b.frames.tobytes()
    noop = synth_degrade(clean, DegradeConfig(quality_cycle=[0.0]))
    assert noop.frames.tobytes() == clean.frames.tobytes()


def test_degrade_period_four_fluctuation():
    clean = synth_clean_sequence(12, 48, 48, seed=2)
    lq = synth_degrade(clean, DegradeConfig())
    curve = [psnr(x[0] * 255.0, y[0] * 255.0) for x, y in zip(lq.frames, clean.frames)]
    # step 4 on frames 0, 4, 8: these are the quality peaks
    assert all(curve[i] > curve[i + 1] + 1 and curve[i] > curve[i - 1] + 1 for i in (4, 8))
    pvd, _ = curve_stats(curve)
    assert pvd > 1


def test_frame_plan_metadata():
    plan = frame_plan(6, DegradeConfig(quality_cycle=[4, 16, 12, 16]))
    meta = [m for _, m in plan]
    assert [m.qp for m in meta] == [8, 32, 24, 32, 8, 32]
    assert [m.frame_type.value for m in meta] == ["I", "B", "P", "B", "I", "B"]


def test_degrade_config_validation(tmp_path):
    with pytest.raises(ConfigurationError):
        DegradeConfig(quality_cycle=[])
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"blur_sigma": 1.0, "colour": 3}))
    with pytest.raises(ConfigurationError, match="colour"):
        load_config(p, DegradeConfig)


def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(patch_size=33)
    with pytest.raises(ConfigurationError):
        TrainConfig(loss={"spatial": "L3"})
    with pytest.raises(ConfigurationError):
        TrainConfig(iqe={"depth": 3})
    assert TrainConfig().base_lr == 1e-4
    assert (TrainConfig().iterations, TrainConfig().batch_size, TrainConfig().patch_size) == (5000, 8, 48)


def test_dataset_layout(tmp_path):
    build_synthetic_dataset(tmp_path, n_sequences=2, num_frames=4, size=16)
    loaded = load_dataset(tmp_path)
    assert len(loaded) == 2 and loaded[0].truth.frames.shape == (4, 1, 16, 16)
    with pytest.raises(DataError):
        load_dataset(tmp_path / "seq000" / "truth")


# -- training ---------------------------------------------------------------

def test_train_is_deterministic(pairs):
    a = train(tiny_config(), pairs)
    b = train(tiny_config(), pairs)
    assert a.weights.to_bytes() == b.weights.to_bytes()
    assert a.losses == b.losses
    assert len(a.log_records()) == 4


def test_rfp_toggle_changes_only_references(pairs):
    seen = {}

    def record(flag):
        def hook(it, samples):
            seen.setdefault(flag, []).append(samples)
        return hook

    # with R=1 both strategies pick t-1 and t+1, so use R=2
    train(tiny_config(rfp=True, radius=2), pairs, hook=record(True))
    train(tiny_config(rfp=False, radius=2), pairs, hook=record(False))
    on, off = seen[True], seen[False]
    differs = False
    for batch_on, batch_off in zip(on, off):
        for s_on, s_off in zip(batch_on, batch_off):
            assert (s_on.sequence, s_on.target, s_on.top, s_on.left) == (s_off.sequence, s_off.target, s_off.top, s_off.left)
            differs |= s_on.refs != s_off.refs
    assert differs


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nan_loss_aborts(pairs):
    from rfpqe.errors import NumericError

    with pytest.raises(NumericError):
        train(tiny_config(base_lr=1e30, iterations=6), pairs)


def test_smoothed():
    np.testing.assert_allclose(smoothed([1, 2, 3, 4], window=2), [1.5, 2.5, 3.5])
    assert len(smoothed([1.0] * 10, window=25)) == 1


# -- inference and evaluation -----------------------------------------------

def test_zero_tail_model_is_identity(pairs):
    model = QENet(NetworkConfig.from_preset("mini", radius=1), seed=0)
    model.iqe.tail.zero_()
    lq, gt = pairs[0].compressed, pairs[0].truth
    out = enhance(model, lq)
    assert out.frames.tobytes() == lq.frames.tobytes()
    r = evaluate(lq, out, gt)
    assert r.delta_psnr == 0 and r.delta_ssim == 0


def test_fusion_with_saturated_mask(pairs):
    m1 = QENet(NetworkConfig.from_preset("mini", radius=1), seed=1)
    m2 = QENet(NetworkConfig.from_preset("mini", radius=1), seed=2)
    mask = MaskNet(hidden=4).zero_()
    mask.conv3.bias.data[:] = 100.0  # sigmoid(100) rounds to exactly 1 in float32
    lq = pairs[0].compressed
    fused = enhance(m1, lq, fuse_with=m2, mask=mask)
    assert fused.frames.tobytes() == enhance(m1, lq).frames.tobytes()
    with pytest.raises(UsageError):
        enhance(m1, lq, fuse_with=m2)


def test_self_ensemble_on_equivariant_model(pairs):
    # Zero everything except a 1x1-equivalent centre tap: a pointwise model.
    model = QENet(NetworkConfig.from_preset("mini", radius=1), seed=0, dtype=np.float64).zero_()
    lq = pairs[0].compressed
    plain = enhance(model, lq)
    np.testing.assert_array_equal(enhance(model, lq, use_self_ensemble=True).frames, plain.frames)


def test_enhance_odd_size():
    seq = synth_degrade(synth_clean_sequence(3, 13, 15, seed=4), DegradeConfig())
    model = QENet(NetworkConfig.from_preset("mini", radius=1), seed=0)
    assert enhance(model, seq).frames.shape == seq.frames.shape


def test_evaluate_dirs_and_plot(tmp_path):
    build_synthetic_dataset(tmp_path / "data", n_sequences=2, num_frames=8, size=24)
    for name in ("seq000", "seq001"):
        seq = load_sequence(tmp_path / "data" / name / "compressed")
        write_sequence(seq, tmp_path / "comp" / name)
        write_sequence(load_sequence(tmp_path / "data" / name / "truth"), tmp_path / "truth" / name)
        write_sequence(seq, tmp_path / "enh" / name)
    (tmp_path / "enh" / "provenance.json").write_text(json.dumps({"weights_sha256": "00"}))
    report = evaluate_dirs(tmp_path / "comp", tmp_path / "enh", tmp_path / "truth")
    assert [s.name for s in report.sequences] == ["seq000", "seq001"]
    assert report.aggregate["delta_psnr"] == 0.0
    assert report.provenance["weights_sha256"] == "00"
    assert all(s.pvd_compressed > 0 for s in report.sequences)
    assert all(curve_stats(s.psnr_compressed)[0] == s.pvd_compressed for s in report.sequences)
    files = plot_curves(report, tmp_path / "plots")
    assert sorted(p.name for p in files) == ["seq000.png", "seq000.svg", "seq001.png", "seq001.svg"]
    assert all(p.stat().st_size > 0 for p in files)


def test_evaluate_misaligned(tmp_path):
    a = FrameSequence(np.zeros((2, 1, 12, 12), np.float32), [FrameMetadata(i, 1, "I") for i in range(2)])
    b = FrameSequence(np.zeros((3, 1, 12, 12), np.float32), [FrameMetadata(i, 1, "I") for i in range(3)])
    with pytest.raises(DataError):
        evaluate(a, a, b)
