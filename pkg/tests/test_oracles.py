import time

import numpy as np
import pytest

from cegrounding.core import GiClass, ValidationError, argmax_class
from cegrounding.fusion import fuse_window, random_weights, write_features, write_weights
from cegrounding.oracles import (
    PAPER_MEAN_FRAMES,
    PAPER_PROPORTIONS,
    RESNET,
    RESNET_TFE,
    ConfusionMatrix,
    FileOracle,
    FlippedOracle,
    FusionOracle,
    NoisyOracle,
    NoisyOracleConfig,
    PerfectOracle,
    VideoLayout,
    file_oracle,
    fusion_oracle,
    generate_layout,
    read_confidences,
    read_confusion,
    read_layout,
    write_confidences,
    write_layout,
)


def test_layout_paper_proportions():
    layout = generate_layout(10_000, PAPER_PROPORTIONS, seed=123, jitter=0)
    assert (layout.t_s, layout.t_e) == (721, 5210)
    assert PAPER_PROPORTIONS[1] == 0.449
    assert sum(PAPER_PROPORTIONS) == pytest.approx(1.0)


def test_layout_thirds():
    layout = generate_layout(3, (1 / 3, 1 / 3, 1 / 3), jitter=0)
    assert (layout.t_s, layout.t_e) == (2, 2)
    assert [layout.class_at(t) for t in (1, 2, 3)] == list(GiClass)


def test_layout_jitter_zero_ignores_seed():
    assert generate_layout(5000, seed=1, jitter=0) == generate_layout(5000, seed=99, jitter=0)


def test_layout_jitter_varies_and_is_seeded():
    layouts = {generate_layout(10_000, seed=s) for s in range(20)}
    assert len(layouts) > 10
    assert generate_layout(10_000, seed=4) == generate_layout(10_000, seed=4)
    for lay in layouts:
        assert 1 < lay.t_s <= lay.t_e < lay.T


@pytest.mark.parametrize("props, T", [((0.5, 0.5, 0.0), 100), ((0.2, 0.3, 0.4), 100), ((0.1, 0.1, 0.8), 4)])
def test_layout_rejects(props, T):
    with pytest.raises(ValidationError):
        generate_layout(T, props, jitter=0)


def test_layout_labels_monotone():
    y = VideoLayout(20, 4, 11).labels()
    assert np.all(np.diff(y) >= 0)
    assert list(np.bincount(y)[1:]) == [3, 8, 9]


def test_layout_file_roundtrip(tmp_path):
    lay = VideoLayout(10_000, 721, 5210)
    write_layout(lay, tmp_path / "l.txt")
    assert (tmp_path / "l.txt").read_text() == "10000 721 5210\n"
    assert read_layout(tmp_path / "l.txt") == lay


def test_paper_matrices_columns():
    assert RESNET_TFE.column(2) == pytest.approx([0.025, 0.931, 0.044], abs=1e-12)
    assert RESNET.column(1) == pytest.approx(np.array([0.894, 0.088, 0.019]) / 1.001, abs=1e-12)
    assert np.diag(RESNET_TFE.m) == pytest.approx([0.924, 0.931, 0.923 / 0.999], abs=1e-12)
    for cm in (RESNET, RESNET_TFE):
        assert np.allclose(cm.m.sum(axis=0), 1.0, atol=1e-15)


def test_confusion_rejects_bad_columns(tmp_path):
    with pytest.raises(ValidationError):
        ConfusionMatrix(np.full((3, 3), 0.5))
    (tmp_path / "m.txt").write_text("90 5 0\n10 90 10\n0 5 90\n")
    assert read_confusion(tmp_path / "m.txt").m[0, 0] == pytest.approx(0.9)


def test_perfect_oracle_vectors():
    lay = VideoLayout(100, 10, 60)
    assert PerfectOracle(lay, 1.0).classify(30, 100).p == (0.0, 1.0, 0.0)
    assert PerfectOracle(lay, 0.5).classify(30, 100).p == (0.25, 0.5, 0.25)
    assert argmax_class(PerfectOracle(lay, 0.34).classify(30, 100)) is GiClass.SmallIntestine
    assert argmax_class(PerfectOracle(lay, 0.34).classify(61, 100)) is GiClass.Colorectum
    with pytest.raises(ValidationError):
        PerfectOracle(lay, 1 / 3)
    with pytest.raises(ValidationError):
        PerfectOracle(lay).classify(101, 100)


def binomial_ok(count, n, p, sigmas=3):
    return abs(count - n * p) <= sigmas * np.sqrt(n * p * (1 - p)) + 1e-9


@pytest.mark.parametrize("matrix", [RESNET, RESNET_TFE])
def test_noisy_frequencies_match_columns(matrix):
    n = 100_000
    lay = VideoLayout(3 * n, n + 1, 2 * n)
    o = NoisyOracle(lay, NoisyOracleConfig(matrix, seed=7))
    for cls in (1, 2, 3):
        counts = np.bincount(o.predicted[(cls - 1) * n: cls * n], minlength=4)[1:]
        for pred in range(3):
            assert binomial_ok(counts[pred], n, matrix.m[pred, cls - 1])


def test_noisy_diagonal_accuracy_within_one_percent():
    n = 100_000
    lay = VideoLayout(3 * n, n + 1, 2 * n)
    o = NoisyOracle(lay, NoisyOracleConfig(RESNET_TFE, seed=1))
    truth = lay.labels()
    for cls, acc in zip((1, 2, 3), (0.924, 0.931, 0.923)):
        got = np.mean(o.predicted[truth == cls] == cls)
        assert abs(got - acc) <= 0.01


def test_noisy_frozen_and_order_independent():
    lay = generate_layout(2000, seed=2)
    cfg = NoisyOracleConfig(seed=42)
    a, b = NoisyOracle(lay, cfg), NoisyOracle(lay, cfg)
    forward = [a.classify(t, 2000) for t in range(1, 2001)]
    backward = [b.classify(t, 2000) for t in range(2000, 0, -1)][::-1]
    assert forward == backward
    assert a.classify(17, 2000) == a.classify(17, 2000)
    assert NoisyOracle(lay, NoisyOracleConfig(seed=43)).predicted.tolist() != a.predicted.tolist()


def test_noisy_argmax_is_sampled_class():
    lay = generate_layout(5000, seed=0)
    for cfg in (NoisyOracleConfig(seed=3), NoisyOracleConfig(confidence=0.6, confidence_model="beta", seed=3)):
        o = NoisyOracle(lay, cfg)
        for t in range(1, 5001, 7):
            p = o.classify(t, 5000)
            assert int(argmax_class(p)) == o.predicted[t - 1]
            assert abs(sum(p.p) - 1) < 1e-12


def test_beta_confidence_mean():
    lay = VideoLayout(200_000, 2, 199_999)
    o = NoisyOracle(lay, NoisyOracleConfig(confidence=0.7, confidence_model="beta", seed=0))
    assert o.confidences.mean() == pytest.approx(0.7, abs=3e-3)
    assert o.confidences.min() > 1 / 3
    with pytest.raises(ValidationError):
        NoisyOracleConfig(confidence=0.3)
    with pytest.raises(ValidationError):
        NoisyOracleConfig(confidence_model="gaussian")


def test_file_oracle_roundtrip(tmp_path):
    lay = generate_layout(500, seed=1)
    src = NoisyOracle(lay, NoisyOracleConfig(confidence=0.7, confidence_model="beta", seed=5))
    vecs = [src.classify(t, 500) for t in range(1, 501)]
    write_confidences(vecs, tmp_path / "c.csv")
    o = file_oracle(tmp_path / "c.csv")
    assert o.T == 500
    assert all(o.classify(t, 500).p == pytest.approx(v.p, abs=1e-15) for t, v in enumerate(vecs, 1))


def test_file_oracle_single_record(tmp_path):
    lines = [f"{t},0.2,0.3,0.5" for t in range(1, 8)]
    lines[4] = "5,0.1,0.8,0.1"
    (tmp_path / "c.csv").write_text("\n".join(lines) + "\n")
    assert file_oracle(tmp_path / "c.csv").classify(5, 7).p == pytest.approx((0.1, 0.8, 0.1))


@pytest.mark.parametrize("body, message", [
    ("1,0.2,0.3,0.5\n2,0.2,0.3,0.5\n3,0.2,0.3,0.5\n4,0.2,0.3,0.5\n5,0.2,0.3,0.5\n6,0.2,0.3,0.5\n8,0.2,0.3,0.5\n",
     "missing frame 7"),
    ("1,0.2,0.3,0.5\n1,0.2,0.3,0.5\n", ":2: duplicate frame 1"),
    ("1,0.2,0.3,0.5\n2,0.2,0.3,0.6\n", ":2: .*sum"),
    ("1,0.2,0.3\n", ":1:"),
    ("0,0.2,0.3,0.5\n1,0.2,0.3,0.5\n", "frame 0"),
])
def test_file_oracle_load_errors(tmp_path, body, message):
    (tmp_path / "c.csv").write_text(body)
    with pytest.raises(ValidationError, match=message):
        read_confidences(tmp_path / "c.csv")


def test_file_oracle_paper_length(tmp_path):
    T = PAPER_MEAN_FRAMES
    assert T == 125_100
    lay = generate_layout(T, jitter=0)
    o = PerfectOracle(lay, 0.9)
    write_confidences([o.classify(t, T) for t in range(1, T + 1)], tmp_path / "big.csv")
    fo = file_oracle(tmp_path / "big.csv")
    assert fo.T == T
    start = time.perf_counter()
    for t in range(1, T + 1, 97):
        fo.classify(t, T)
    per_probe = (time.perf_counter() - start) / len(range(1, T + 1, 97))
    assert per_probe < 1e-4
    assert fo.classify(lay.t_e, T).p == pytest.approx((0.05, 0.9, 0.05))


@pytest.fixture
def fusion_files(tmp_path):
    rng = np.random.default_rng(9)
    N = 6
    w = random_weights(8, N, rng)
    feats = rng.normal(size=(40, 8))
    write_weights(w, tmp_path / "w.txt")
    write_features(feats, tmp_path / "f.txt")
    return tmp_path / "f.txt", tmp_path / "w.txt", w, feats


def test_fusion_oracle_window_and_edges(fusion_files):
    fpath, wpath, w, feats = fusion_files
    o = fusion_oracle(fpath, wpath, 6)
    assert o.context_radius == 6
    assert o.window_indices(1).tolist() == [1] * 7 + [2, 3, 4, 5, 6, 7]
    assert o.window_indices(40).tolist()[-7:] == [40] * 7
    for t in (1, 3, 20, 40):
        direct = fuse_window(feats[o.window_indices(t) - 1], w)
        assert o.classify(t, 40).p == direct.p
    edge = np.vstack([np.repeat(feats[:1], 7, axis=0), feats[1:7]])
    assert o.classify(1, 40).p == fuse_window(edge, w).p


def test_fusion_oracle_window_mismatch(fusion_files):
    fpath, wpath, w, feats = fusion_files
    with pytest.raises(ValidationError):
        FusionOracle(feats, w, context_radius=3)


def test_flipped_oracle_reverses_direction():
    lay = VideoLayout(100, 10, 60)
    o = FlippedOracle(PerfectOracle(lay), {1}, "end")
    assert argmax_class(o.classify(30, 100)) is GiClass.SmallIntestine
    assert argmax_class(o.classify(30, 100)) is GiClass.Colorectum
    s = FlippedOracle(PerfectOracle(lay), {0}, "start")
    assert argmax_class(s.classify(5, 100)) is GiClass.SmallIntestine
    assert isinstance(FileOracle([]), FileOracle)
