import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oracles import loop_relu_maxpool, reference_unet
from spinsim.harness.data import generate_shapes
from spinsim.hwnn import (
    REFERENCE_SCHEDULE,
    EnergyLedger,
    HardwareProfile,
    Schedule,
    TrainConfig,
    UnetConfig,
    backward,
    behavioral_maxpool,
    behavioral_relu,
    build_unet,
    critical_path,
    energy_report,
    evaluate,
    forward,
    instance_counts,
    smoothed,
    train,
    write_update,
)

IDEAL = HardwareProfile.ideal()
SMALL = UnetConfig(input_size=8, depth=2, base=2, convs_per_stage=1)


def images(n, cfg, seed=0):
    return np.random.default_rng(seed).uniform(0, 1, (n, cfg.input_size, cfg.input_size, cfg.in_channels))


def test_behavioral_relu_examples():
    assert behavioral_relu([-1.0, 0.0, 2.0]).tolist() == [0.0, 0.0, 2.0]
    y = behavioral_relu(np.full(10_000, 0.5), 2.68, np.random.default_rng(0))
    assert abs(y.mean() - 0.5) < 0.001
    assert y.std() == pytest.approx(0.0268, rel=0.05)
    with pytest.raises(ValueError):
        behavioral_relu([1.0], 1.0)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(float, 12, elements=st.floats(-10, 10)), st.floats(0.01, 100))
def test_relu_positive_homogeneity(x, a):
    np.testing.assert_allclose(behavioral_relu(a * x), a * behavioral_relu(x), rtol=1e-12, atol=1e-300)


def test_behavioral_maxpool_examples():
    assert behavioral_maxpool(-np.ones((3, 3, 1))).max() == 0.0
    x = -np.ones((4, 4, 1))
    x[1:4, 1:4, 0] = np.arange(1, 10).reshape(3, 3) / 10
    m = behavioral_maxpool(x)
    # output (1, 1) pools rows and columns 1..3
    assert m[1, 1, 0] == pytest.approx(0.9) and m.shape == (2, 2, 1)
    y = behavioral_maxpool(np.full((1, 200, 200, 1), 0.5), 3, 2.18, np.random.default_rng(1))
    assert y.std() == pytest.approx(0.0218, rel=0.05)


@pytest.mark.parametrize("window", [2, 3])
def test_maxpool_matches_loops(window):
    x = np.random.default_rng(2).normal(size=(6, 8, 3))
    np.testing.assert_array_equal(behavioral_maxpool(x, window), loop_relu_maxpool(x, window))


def test_hand_counted_instances():
    c = instance_counts(UnetConfig(input_size=32, n_classes=3, depth=1, base=4))
    # enc 28*4 + 37*4, bottleneck 37*8 + 73*8, up 73*4, dec 73*4 + 37*4, head 5*3
    assert c["synapses"] == 112 + 148 + 296 + 584 + 292 + 292 + 148 + 15
    assert c["relu"] == 5 * 32 * 32 * 4 + 2 * 16 * 16 * 8
    assert c["maxpool"] == 16 * 16 * 4
    m = build_unet(UnetConfig(depth=1, base=4))
    assert sum(lay.synapses for lay in m.layers.values()) == c["synapses"]


def test_reference_scale_counts_within_15_percent():
    c = instance_counts(UnetConfig.reference_scale())
    assert c["synapses"] == pytest.approx(4.65e6, rel=0.15)
    assert c["relu"] == pytest.approx(21.45e6, rel=0.15)
    assert c["maxpool"] == pytest.approx(2.33e6, rel=0.15)


def test_config_validation():
    with pytest.raises(ValueError):
        UnetConfig(input_size=30, depth=2)
    with pytest.raises(ValueError):
        UnetConfig(depth=0)
    with pytest.raises(ValueError):
        UnetConfig(kernel=2)
    with pytest.raises(ValueError):
        UnetConfig(delta=12.0)
    m = build_unet(SMALL)
    with pytest.raises(ValueError):
        forward(m, np.zeros((4, 4, 3)), IDEAL)


@pytest.mark.parametrize("cfg", [SMALL, UnetConfig(input_size=8, depth=1, base=3, pool=2), UnetConfig(input_size=8, depth=2, base=2, deconv_relu=False)])
def test_ideal_forward_equals_float_reference(cfg):
    m = build_unet(cfg, np.random.default_rng(3))
    x = images(2, cfg, 4)
    probs, _ = forward(m, x, IDEAL)
    w = m.weights()
    for n in range(2):
        np.testing.assert_allclose(probs[n], reference_unet(w, cfg, x[n]), atol=1e-6)


def test_probabilities_normalized_and_shape():
    m = build_unet(SMALL)
    probs, _ = forward(m, images(3, SMALL), HardwareProfile.for_delta(4.58), np.random.default_rng(0))
    assert probs.shape == (3, 8, 8, 3)
    np.testing.assert_allclose(probs.sum(-1), 1.0, atol=1e-6)
    single, _ = forward(m, images(1, SMALL)[0], IDEAL)
    assert single.shape == (8, 8, 3)


def test_forward_ledger_is_count_arithmetic():
    prof = HardwareProfile.for_delta(4.58)
    m = build_unet(SMALL)
    _, led = forward(m, images(2, SMALL), prof, np.random.default_rng(0))
    c = m.counts
    assert led.relu == 2 * c["relu"] * prof.relu_energy
    assert led.maxpool == 2 * c["maxpool"] * prof.maxpool_energy
    assert led.images == 2 and led.forward_time == critical_path(SMALL, prof)


def test_critical_path_counts_sequential_stages():
    prof = HardwareProfile.for_delta(4.58)
    # SMALL: 2 enc + 1 bottleneck + 2 x (up + conv) ReLU stages, 2 pool stages
    assert critical_path(SMALL, prof) == pytest.approx(7 * 4e-9 + 2 * 12e-9)


def test_gradients_match_finite_differences():
    m = build_unet(SMALL, np.random.default_rng(5))
    x = images(2, SMALL, 6)
    lab = np.random.default_rng(7).integers(0, 3, (2, 8, 8))
    cache = {}
    probs, _ = forward(m, x, IDEAL, cache=cache)
    _, grads = backward(m, probs, lab, cache)

    def loss():
        p, _ = forward(m, x, IDEAL)
        return -np.mean(np.log(np.take_along_axis(p, lab[..., None], -1)))

    gen = np.random.default_rng(8)
    for name in ("head", "dec0_conv0", "dec1_up", "enc0_conv0", "enc1_conv0"):
        xb = m.layers[name].xbar
        for _ in range(3):
            idx = tuple(gen.integers(0, s) for s in xb.g.shape)
            eps = 1e-5
            xb.g[idx] += eps * xb.g_unit
            lp = loss()
            xb.g[idx] -= 2 * eps * xb.g_unit
            lm = loss()
            xb.g[idx] += eps * xb.g_unit
            assert (lp - lm) / (2 * eps) == pytest.approx(grads[name][idx], rel=1e-4, abs=1e-9)


def test_zero_lr_leaves_weights_identical():
    m = build_unet(SMALL)
    before = {k: v.copy() for k, v in m.weights().items()}
    lab = np.zeros((4, 8, 8), dtype=int)
    hist, led = train(m, images(4, SMALL), lab, TrainConfig(epochs=1, lr=0.0), IDEAL)
    for k, v in m.weights().items():
        assert np.array_equal(v, before[k])
    assert hist[0].write_energy == 0.0 and led.synapse_write == 0.0


def test_write_update_energy_and_clipping():
    m = build_unet(SMALL)
    lay = m.layers["head"]
    prof = HardwareProfile()
    w0 = lay.weights.copy()
    delta = np.zeros_like(w0)
    delta[0, 0] = 0.5
    e, clipped = write_update(lay, delta, prof.track)
    # half a unit weight is a 50 uA pulse: a quarter of the full-swing energy
    assert e == pytest.approx(0.25 * 20.75e-15, rel=1e-9) and clipped == 0
    np.testing.assert_allclose(lay.weights - w0, delta, atol=1e-12)
    big = np.full_like(w0, 5.0)
    _, clipped = write_update(lay, big, prof.track)
    assert clipped == w0.size
    assert np.all(lay.weights <= 1.0 + 1e-12)


def test_training_learns_and_is_seeded():
    ds = generate_shapes(12, 16, 2, seed=0)
    x, lab = ds.images, ds.labels
    cfg = UnetConfig(input_size=16, depth=1, base=4, n_classes=2)
    # three minibatches per epoch: a slower decay than the default keeps the step size up
    tcfg = TrainConfig(epochs=20, lr_decay=0.92)
    runs = []
    for _ in range(2):
        m = build_unet(cfg, np.random.default_rng(0))
        hist, led = train(m, x, lab, tcfg, HardwareProfile.for_delta(4.58), np.random.default_rng(1))
        runs.append((hist, m.weights()))
    assert runs[0][0][-1].loss < runs[0][0][0].loss
    assert [h.loss for h in runs[0][0]] == [h.loss for h in runs[1][0]]
    acc, pred, inf = evaluate(m, x, lab, IDEAL)
    assert acc > 0.95 > ds.class_histogram()[0] and pred.shape == lab.shape and inf.images == 12
    assert led.synapse_write == pytest.approx(sum(h.write_energy for h in hist))


def test_ledger_additivity():
    a = EnergyLedger(1.0, 2.0, 3.0, 4, 1e-9, [1.0])
    b = EnergyLedger(0.5, 0.25, 0.125, 2, 2e-9, [0.5])
    c = a + b
    assert (c.synapse_write, c.relu, c.maxpool, c.images) == (1.5, 2.25, 3.125, 6)
    assert c.per_epoch == [1.0, 0.5] and c.total == pytest.approx(a.total + b.total)


def test_energy_report_arithmetic():
    prof = HardwareProfile.for_delta(4.58)
    rep = energy_report(EnergyLedger(), prof, REFERENCE_SCHEDULE)
    assert rep["top_down_total_mJ"] == pytest.approx(85.7925, rel=1e-12)
    assert round(rep["top_down_total_mJ"], 2) == 85.79
    assert rep["variant_ratio_45.81_over_4.58"] == pytest.approx(9.57, abs=0.01)
    assert energy_report(EnergyLedger(), prof, Schedule(0, 369, 1.55e-6))["top_down_total_J"] == 0.0
    rep = energy_report(EnergyLedger(), prof, REFERENCE_SCHEDULE, UnetConfig.reference_scale())
    c = rep["counts"]
    assert rep["count_model_per_image_J"] == pytest.approx(c["relu"] * prof.relu_energy + c["maxpool"] * prof.maxpool_energy)


def test_profile_scaling():
    lo, hi = HardwareProfile.for_delta(4.58), HardwareProfile.for_delta(45.81)
    assert (lo.relu_err_pct, lo.maxpool_err_pct) == (2.68, 2.18)
    assert (hi.relu_err_pct, hi.maxpool_err_pct) == (0.40, 0.42)
    assert lo.relu_energy == pytest.approx(0.343e-6 * 4e-9)
    assert hi.relu_energy / lo.relu_energy == pytest.approx(10.0)
    with pytest.raises(ValueError):
        HardwareProfile.for_delta(1.0)


def test_smoothing():
    np.testing.assert_allclose(smoothed([3.0, 3.0, 6.0, 0.0]), [3.0, 3.0, 4.0, 3.0])
