import logging

import numpy as np
import pytest

from pdtw.features import FeatureMatrix
from pdtw.stats import normal_cdf
from pdtw.vad import compute_speech_mask, fit_vad, read_masks, write_masks


def bimodal(n=20_000, seed=0, speech=(2.0, 1.0), other=(-6.0, 1.0), w=0.9):
    rng = np.random.default_rng(seed)
    ns = int(n * w)
    return np.concatenate([rng.normal(*speech, ns), rng.normal(*other, n - ns)])


def test_center_kept_far_tail_cut():
    model = fit_vad(bimodal())
    assert model.speech.mu == pytest.approx(2.0, abs=0.05)
    assert model.cut_low_tail
    sd = model.speech.sigma
    assert model.keep([2.0])[0]
    assert normal_cdf(2.0 - 3 * sd, model.speech) == pytest.approx(0.00135, abs=1e-4)
    assert not model.keep([model.speech.mu - 3 * sd])[0]


def test_speech_facing_side_never_cut():
    model = fit_vad(bimodal())
    x = np.linspace(model.speech.mu, model.speech.mu + 20, 500)
    assert model.keep(x).all()


def test_speech_low_mean_cuts_high_tail():
    model = fit_vad(bimodal(speech=(-3.0, 1.0), other=(6.0, 1.0)))
    assert not model.cut_low_tail
    assert model.keep([-3.0, -20.0]).all()
    assert not model.keep([model.speech.mu + 3 * model.speech.sigma])[0]


def test_larger_mean_rule():
    model = fit_vad(bimodal(speech=(-3.0, 1.0), other=(6.0, 1.0), w=0.9), larger="mean")
    assert model.speech.mu == pytest.approx(6.0, abs=0.1)


def test_degenerate_keeps_everything(caplog):
    m = FeatureMatrix("a", np.ones((50, 3)), frame_shift=0.01, frame_length=0.01)
    with caplog.at_level(logging.WARNING):
        masks = compute_speech_mask([m])
    assert masks["a"].keep.all()
    assert "degenerate" in caplog.text


def test_masks_independent_of_file_order():
    x = bimodal(4000, seed=3)
    mats = [FeatureMatrix(f"f{i}", x[i * 1000:(i + 1) * 1000, None], frame_shift=0.01,
                          frame_length=0.01) for i in range(4)]
    fwd = compute_speech_mask(mats)
    rev = compute_speech_mask(mats[::-1])
    for fid in fwd:
        assert np.array_equal(fwd[fid].keep, rev[fid].keep)
        assert np.all(np.diff(fwd[fid].kept_frame_times) > 0)


def test_mask_tsv_roundtrip(tmp_path):
    x = bimodal(300, seed=1)
    mats = [FeatureMatrix("a", x[:150, None], frame_shift=0.01, frame_length=0.01),
            FeatureMatrix("b", x[150:, None], frame_shift=0.01, frame_length=0.01)]
    masks = compute_speech_mask(mats)
    write_masks(masks.values(), tmp_path / "m.tsv")
    first = (tmp_path / "m.tsv").read_text().splitlines()[0]
    assert first.split("\t")[:2] == ["a", "0"]
    back = read_masks(tmp_path / "m.tsv", 0.01)
    for fid in masks:
        assert np.array_equal(back[fid].keep, masks[fid].keep)
        assert np.allclose(back[fid].kept_frame_times, masks[fid].kept_frame_times)
