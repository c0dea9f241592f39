import numpy as np
import pytest

from barsim.channel import FadingModel, SlotRealization, SlotSampler, capacity


def test_capacity_values():
    assert capacity(0.0) == 0.0
    assert capacity(1.0) == 1.0
    assert capacity(3.0) == 2.0


def test_capacity_rejects_bad_input():
    with pytest.raises(ValueError):
        capacity(-0.5)
    with pytest.raises(ValueError):
        capacity(float("nan"))
    with pytest.raises(ValueError):
        capacity(float("inf"))


def test_capacity_increasing_and_concave():
    xs = np.linspace(0.0, 50.0, 200)
    caps = np.array([capacity(x) for x in xs])
    diffs = np.diff(caps)
    assert np.all(diffs > 0)
    assert np.all(np.diff(diffs) < 0)


def test_model_rejects_nonpositive_gains():
    with pytest.raises(ValueError):
        FadingModel(num_relays=1, snr_ref=10.0, mean_gain_sr=[0.0], mean_gain_rd=[1.0])
    with pytest.raises(ValueError):
        FadingModel(num_relays=2, snr_ref=-1.0, mean_gain_sr=[1, 1], mean_gain_rd=[1, 1])
    with pytest.raises(ValueError):
        FadingModel(num_relays=2, snr_ref=1.0, mean_gain_sr=[1.0], mean_gain_rd=[1, 1])


def test_slot_realization_rejects_negative():
    with pytest.raises(ValueError):
        SlotRealization(gamma_sr=[-1.0], gamma_rd=[1.0])


def test_sampling_mean_matches_configured_average():
    model = FadingModel.iid(1, 10.0)
    sampler = SlotSampler(model, seed=42)
    gsr, grd = sampler.sample_block(1_000_000)
    assert abs(gsr.mean() - 10.0) / 10.0 < 0.01
    assert abs(grd.mean() - 10.0) / 10.0 < 0.01


def test_sampling_is_deterministic():
    model = FadingModel.iid(3, 5.0)
    a = SlotSampler(model, seed=7).sample_block(1000)
    b = SlotSampler(model, seed=7).sample_block(1000)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_block_matches_single_slot_sequence():
    model = FadingModel.iid(2, 3.0)
    block = SlotSampler(model, seed=11).sample_block(50)
    seq = SlotSampler(model, seed=11)
    for i in range(50):
        slot = seq.sample()
        assert slot.slot_index == i
        assert np.array_equal(slot.gamma_sr, block[0][i])
        assert np.array_equal(slot.gamma_rd, block[1][i])


def test_adding_relays_preserves_existing_link_streams():
    small = SlotSampler(FadingModel.iid(2, 4.0), seed=3).sample_block(100)
    large = SlotSampler(FadingModel.iid(4, 4.0), seed=3).sample_block(100)
    assert np.array_equal(small[0], large[0][:, :2])
    assert np.array_equal(small[1], large[1][:, :2])


def test_empirical_cdf_is_exponential():
    mean = 4.0
    model = FadingModel.iid(1, mean)
    gsr, _ = SlotSampler(model, seed=19).sample_block(200_000)
    draws = np.sort(gsr[:, 0])
    n = draws.size
    empirical = np.arange(1, n + 1) / n
    theoretical = -np.expm1(-draws / mean)
    ks = np.max(np.abs(empirical - theoretical))
    assert ks < 0.01


def test_links_are_uncorrelated():
    model = FadingModel.iid(2, 10.0)
    gsr, grd = SlotSampler(model, seed=23).sample_block(100_000)
    cols = np.hstack([gsr, grd])
    corr = np.corrcoef(cols, rowvar=False)
    off_diag = corr[~np.eye(4, dtype=bool)]
    assert np.max(np.abs(off_diag)) < 0.02
