import math

import numpy as np
import pytest

from beamgap.arrays import ArrayConfig, steering_vector
from beamgap.channel import ChannelRealization, Path, PathKind, rsrp
from beamgap.errors import ContractViolation
from beamgap.metrics import (
    MethodSummary,
    SnapshotScore,
    noise_power_dbm,
    percentile_90,
    relative_drop,
    spectral_efficiency,
    summarize,
)


def _matched_channel(gain_lin):
    bs, ue = ArrayConfig(rows=8, cols=8), ArrayConfig(rows=4, cols=4)
    ch = ChannelRealization(
        paths=(Path(gain=gain_lin + 0j, delay=0.0, aod=(0.3, -0.2), aoa=(-1.1, 0.4),
                    kind=PathKind.LOS),),
        bs_array=bs,
        ue_array=ue,
    )
    f = steering_vector(bs, (0.3, -0.2))
    w = steering_vector(ue, (-1.1, 0.4))
    return ch, f, w


def test_empty_channel_zero_se(radio):
    ch = ChannelRealization(paths=(), bs_array=ArrayConfig(rows=2, cols=2),
                            ue_array=ArrayConfig(rows=2, cols=2))
    f = steering_vector(ch.bs_array, (0.0, 0.0))
    assert spectral_efficiency(ch, f, f, radio) == 0.0


def test_unit_snr_gives_one_bit(radio):
    # pick the gain so the matched received power equals the noise power
    noise_dbm = noise_power_dbm(radio, 30e3)
    rx_target = noise_dbm  # SNR = 1 on every (flat) subcarrier
    gain_db = rx_target - radio.tx_power_dbm - 10 * math.log10(64 * 16)
    ch, f, w = _matched_channel(10 ** (gain_db / 20.0))
    assert spectral_efficiency(ch, f, w, radio) == pytest.approx(1.0, abs=1e-9)


def test_link_budget_pipeline(radio):
    # independent scalar pipeline: RSRP -> SNR -> log2(1+SNR)
    ch, f, w = _matched_channel(10 ** (-96.0 / 20.0))
    noise_dbm = -174.0 + 10 * math.log10(30e3) + 10.0
    assert noise_dbm == pytest.approx(-119.23, abs=0.01)
    rsrp_dbm = rsrp(ch, f, w, radio)
    snr_db = rsrp_dbm - noise_dbm
    expected_se = math.log2(1.0 + 10 ** (snr_db / 10.0))
    got = spectral_efficiency(ch, f, w, radio)
    assert got == pytest.approx(expected_se, abs=0.01)
    assert got == pytest.approx(24.36, abs=0.05)


def test_relative_drop_basics():
    assert relative_drop(10.0, 10.0) == 0.0
    assert relative_drop(10.0, 0.0) == 100.0
    assert relative_drop(0.0, 0.0) == 0.0
    with pytest.raises(ContractViolation):
        relative_drop(-1.0, 0.0)
    with pytest.raises(ContractViolation):
        relative_drop(1.0, -0.5)


def test_relative_drop_overhead_arithmetic():
    se_genie = 24.36
    se_method = se_genie * (1.0 - 64.0 / 560.0)
    drop = relative_drop(se_genie, se_method)
    assert drop == pytest.approx(100.0 * 64.0 / 560.0, abs=1e-9)
    # cross-check against hand arithmetic
    assert relative_drop(24.36, 21.59) == pytest.approx(100.0 * (1 - 21.59 / 24.36), abs=1e-9)


def test_relative_drop_scale_invariance():
    rng = np.random.default_rng(3)
    for _ in range(100):
        genie = rng.uniform(1.0, 30.0)
        method = genie * rng.uniform(0.0, 1.0)
        base = relative_drop(genie, method)
        for c in (1e-3, 7.0, 1e4):
            assert abs(relative_drop(c * genie, c * method) - base) < 1e-12


def test_percentile_nearest_rank():
    assert percentile_90([5.0]) == 5.0
    assert percentile_90(list(range(1, 11))) == 9.0
    assert percentile_90([0.0, 0.0, 0.0, 100.0]) == 100.0
    with pytest.raises(ValueError):
        percentile_90([])


def test_percentile_on_uniform_samples():
    rng = np.random.default_rng(123)
    vals = rng.uniform(0.0, 100.0, size=1000)
    assert 87.0 <= percentile_90(vals) <= 93.0


def test_percentile_bounds_properties():
    rng = np.random.default_rng(5)
    for _ in range(20):
        vals = rng.uniform(0, 100, size=rng.integers(1, 50))
        p90 = percentile_90(vals)
        assert p90 <= max(vals)
        assert p90 >= float(np.median(vals)) - 1e-12
        assert p90 == percentile_90(list(reversed(list(vals))))


def test_summarize_groups_and_counts():
    scores = [
        SnapshotScore("s1", "ES", 10.0, 0.0),
        SnapshotScore("s2", "ES", 10.0, 0.0),
        SnapshotScore("s3", "ES", 10.0, 0.0),
        SnapshotScore("s4", "ES", 0.0, 100.0),
        SnapshotScore("s1", "DNN", 10.0, 0.0),
        SnapshotScore("s2", "DNN", 10.0, 0.0),
        SnapshotScore("s3", "DNN", 10.0, 0.0),
        SnapshotScore("s4", "DNN", 0.0, 100.0),
    ]
    out = summarize(scores, outage_ids={"s4"})
    assert [s.method for s in out] == ["DNN", "ES"]
    for s in out:
        assert s.mean_drop_pct == pytest.approx(25.0)
        assert s.p90_drop_pct == 100.0
        assert s.n_snapshots == 4
        assert s.outage_count == 1


def test_summarize_all_zero():
    scores = [SnapshotScore(f"s{i}", "HS", 5.0, 0.0) for i in range(10)]
    (out,) = summarize(scores)
    assert out == MethodSummary("HS", 0.0, 0.0, 10, 0)


def test_summarize_permutation_invariant():
    rng = np.random.default_rng(8)
    scores = [
        SnapshotScore(f"s{i}", "DNN", 1.0, float(rng.uniform(0, 100))) for i in range(31)
    ]
    (a,) = summarize(scores)
    shuffled = list(scores)
    rng.shuffle(shuffled)
    (b,) = summarize(shuffled)
    assert a.mean_drop_pct == pytest.approx(b.mean_drop_pct, abs=1e-12)
    assert a.p90_drop_pct == b.p90_drop_pct


def test_score_range_validation():
    with pytest.raises(ValueError):
        SnapshotScore("x", "ES", 1.0, -5.0)
    with pytest.raises(ValueError):
        SnapshotScore("x", "ES", 1.0, 101.0)
