"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Criteria 4-6 share a 3-protocol x 3-seed experiment grid built once per
session. Grid sizes are desk-scale (1500 train / 800 eval snapshots,
60 epochs) so the whole gate fits the 15-minute budget on one core;
seeds are the defaults 1, 2, 3.
"""

import time

import numpy as np
import pytest

from beamgap.arrays import ArrayConfig, rotation_about_z, steering_vector
from beamgap.channel import (
    Box,
    ChannelRealization,
    Path,
    PathKind,
    RadioConfig,
    generate_channel,
    rsrp,
)
from beamgap.codebooks import dft_codebook, random_subset
from beamgap.experiments import (
    collect_dataset,
    default_spec,
    emit_report,
    run_experiment,
)
from beamgap.metrics import relative_drop, spectral_efficiency
from beamgap.plots import render_report_dir
from beamgap.predictor import ModelSpec, TrainConfig, gradient_check, train
from beamgap.scenario import (
    MobilityConfig,
    UeProfile,
    WorldConfig,
    WorldLayout,
    build_world,
    sample_snapshots,
    synth_mobility,
)
from beamgap.selectors import exhaustive_select, genie_select, predictor_select

RADIO = RadioConfig()
PROTOCOLS = ("antenna", "codebook", "location")
SEEDS = (1, 2, 3)
GRID_KWARGS = dict(
    n_train_snapshots=1500,
    n_eval_snapshots=800,
    training=TrainConfig(epochs=60, batch_size=256),
)


def _report_line(criterion, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}")


@pytest.fixture(scope="session")
def experiment_grid():
    reports, started = {}, time.perf_counter()
    for protocol in PROTOCOLS:
        for seed in SEEDS:
            spec = default_spec(protocol, global_seed=seed, **GRID_KWARGS)
            reports[(protocol, seed)] = run_experiment(spec)
    return reports, time.perf_counter() - started


def test_criterion_1_oracle_equivalence():
    started = time.perf_counter()
    bs_cb, ue_cb = dft_codebook(4, 4), dft_codebook(2, 2)
    bs_arr, ue_arr = ArrayConfig(rows=4, cols=4), ArrayConfig(rows=2, cols=2)
    rng = np.random.default_rng(2024)
    agree = 0
    n_channels = 500
    for i in range(n_channels):
        n_paths = 0 if i % 97 == 0 else int(rng.integers(1, 7))
        paths = tuple(
            Path(
                gain=complex(rng.normal(), rng.normal()) * 1e-5,
                delay=rng.uniform(0, 2e-6),
                aod=(rng.uniform(-np.pi, np.pi), rng.uniform(-np.pi / 2, np.pi / 2)),
                aoa=(rng.uniform(-np.pi, np.pi), rng.uniform(-np.pi / 2, np.pi / 2)),
                kind=PathKind.SINGLE_BOUNCE,
            )
            for _ in range(n_paths)
        )
        ch = ChannelRealization(paths=paths, bs_array=bs_arr, ue_array=ue_arr)
        res = exhaustive_select(ch, bs_cb, ue_cb, RADIO)
        best, best_pair = -np.inf, (0, 0)
        for b in range(len(bs_cb)):
            for u in range(len(ue_cb)):
                val = rsrp(ch, bs_cb.beams[b].weights, ue_cb.beams[u].weights, RADIO)
                if val > best:
                    best, best_pair = val, (b, u)
        agree += (res.bs_beam_index, res.ue_beam_index) == best_pair
        # genie drop is identically zero against itself
        g = genie_select(ch, bs_cb, ue_cb, RADIO)
        se = spectral_efficiency(
            ch, bs_cb.beams[g.bs_beam_index].weights, ue_cb.beams[g.ue_beam_index].weights, RADIO
        )
        assert relative_drop(se, se) == 0.0
    elapsed = time.perf_counter() - started
    ok = agree == n_channels and elapsed < 30.0
    _report_line(
        "criterion-1 oracle-equivalence",
        ok,
        f"{agree}/{n_channels} index agreement, genie drop 0, {elapsed:.1f}s",
    )
    assert agree == n_channels
    assert elapsed < 30.0


def test_criterion_2_physics_invariants():
    started = time.perf_counter()
    # steering norms
    rng = np.random.default_rng(3)
    for _ in range(50):
        arr = ArrayConfig(rows=int(rng.integers(1, 9)), cols=int(rng.integers(1, 9)))
        d = (rng.uniform(-np.pi, np.pi), rng.uniform(-np.pi / 2, np.pi / 2))
        assert abs(np.linalg.norm(steering_vector(arr, d)) - 1.0) <= 1e-12
    # DFT orthogonality
    w = dft_codebook(4, 4).weight_matrix()
    assert np.max(np.abs(np.abs(w.conj().T @ w) - np.eye(16))) <= 1e-10
    # free-space doubling (equal heights -> exact distance doubling)
    bs_pos = np.array([0.0, 0.0, 15.0])
    world = WorldLayout(
        extent=(1000.0, 1000.0), bs_position=bs_pos,
        bs_array=ArrayConfig(rows=8, cols=8, position=bs_pos),
        blockers=(), scatterers=np.zeros((0, 3)), seed=0,
    )
    ue = ArrayConfig(rows=2, cols=2)
    g1 = generate_channel(world, world.bs_array, ue.at([100.0, 0.0, 15.0]), RADIO, 1).paths[0].gain
    g2 = generate_channel(world, world.bs_array, ue.at([200.0, 0.0, 15.0]), RADIO, 1).paths[0].gain
    assert abs(20 * np.log10(abs(g1) / abs(g2)) - 6.0206) < 0.01
    # link budget within 0.01 dB
    mag = 10 ** (-96.0 / 20.0)
    ch = ChannelRealization(
        paths=(Path(gain=mag + 0j, delay=0.0, aod=(0.3, -0.2), aoa=(-1.1, 0.4),
                    kind=PathKind.LOS),),
        bs_array=ArrayConfig(rows=8, cols=8), ue_array=ArrayConfig(rows=4, cols=4),
    )
    f = steering_vector(ch.bs_array, (0.3, -0.2))
    wv = steering_vector(ch.ue_array, (-1.1, 0.4))
    assert abs(rsrp(ch, f, wv, RADIO) - (20 - 96 + 10 * np.log10(1024))) < 0.01
    # frame consistency under a rigid z-rotation
    blockers = [Box(30.0, 60.0, -20.0, 20.0, 0.0, 18.0)]
    scat = np.array([[80.0, 40.0, 6.0], [-50.0, 30.0, 12.0], [20.0, -70.0, 4.0]])
    world_a = WorldLayout(
        extent=(400.0, 400.0), bs_position=bs_pos,
        bs_array=ArrayConfig(rows=8, cols=8, position=bs_pos),
        blockers=tuple(blockers), scatterers=scat, seed=0,
    )
    ue_a = ArrayConfig(rows=4, cols=4).at([120.0, -30.0, 1.5])
    rot = rotation_about_z(np.pi / 2)
    world_b = WorldLayout(
        extent=(400.0, 400.0), bs_position=rot @ bs_pos,
        bs_array=ArrayConfig(rows=8, cols=8, position=rot @ bs_pos, orientation=rot),
        blockers=tuple(b.rotated_z90() for b in blockers),
        scatterers=(rot @ scat.T).T, seed=0,
    )
    ue_b = ArrayConfig(rows=4, cols=4).at(rot @ ue_a.position, orientation=rot)
    ch_a = generate_channel(world_a, world_a.bs_array, ue_a, RADIO, seed=11)
    ch_b = generate_channel(world_b, world_b.bs_array, ue_b, RADIO, seed=11)
    fa = steering_vector(world_a.bs_array, (0.4, -0.5))
    wa = steering_vector(ue_a, (1.0, 0.2))
    shift = abs(rsrp(ch_a, fa, wa, RADIO) - rsrp(ch_b, fa, wa, RADIO))
    assert shift <= 1e-9
    elapsed = time.perf_counter() - started
    _report_line("criterion-2 physics-invariants", elapsed < 10.0,
                 f"all invariants hold, {elapsed:.1f}s")
    assert elapsed < 10.0


def test_criterion_3_gradient_correctness():
    worst_small, coord_small = gradient_check(
        ModelSpec(hidden_width=8, residual_blocks=2), batch_size=8, step=1e-4, seed=7
    )
    worst_default, coord_default = gradient_check(
        ModelSpec(), batch_size=8, step=1e-4, seed=11, max_coords_per_param=60
    )
    worst = max(worst_small, worst_default)
    ok = worst <= 1e-4
    _report_line(
        "criterion-3 gradient-correctness", ok,
        f"max rel deviation {worst:.2e} (worst at {coord_small} / {coord_default})",
    )
    assert ok


def test_criterion_4_matched_condition_trend(experiment_grid):
    reports, grid_time = experiment_grid
    all_ok = True
    for protocol in PROTOCOLS:
        es_wins = hs_wins = 0
        for seed in SEEDS:
            rep = reports[(protocol, seed)]
            dnn = rep.summary_for("train", "DNN").mean_drop_pct
            es_wins += dnn <= rep.summary_for("train", "ES").mean_drop_pct
            hs_wins += dnn <= rep.summary_for("train", "HS").mean_drop_pct
        ok = es_wins == 3 and hs_wins >= 2
        all_ok &= ok
        _report_line(
            f"criterion-4 matched-trend[{protocol}]", ok,
            f"DNN<=ES in {es_wins}/3 seeds (need 3), DNN<=HS in {hs_wins}/3 (need >=2)",
        )
        assert es_wins == 3
        assert hs_wins >= 2
    _report_line("criterion-4 runtime", grid_time < 900.0, f"grid wall time {grid_time:.0f}s")
    assert grid_time < 900.0
    assert all_ok


def test_criterion_5_mismatch_degradation(experiment_grid):
    reports, _ = experiment_grid
    for protocol in PROTOCOLS:
        wins = 0
        details = []
        for seed in SEEDS:
            rep = reports[(protocol, seed)]
            dnn_train = rep.summary_for("train", "DNN").p90_drop_pct
            dnn_test = rep.summary_for("test", "DNN").p90_drop_pct
            es_test = rep.summary_for("test", "ES").p90_drop_pct
            hit = dnn_test >= 1.5 * dnn_train and dnn_test > es_test
            wins += hit
            details.append(f"seed{seed}: p90 {dnn_train:.1f}->{dnn_test:.1f} (ES {es_test:.1f})")
        ok = wins >= 2
        _report_line(f"criterion-5 mismatch-trend[{protocol}]", ok,
                     f"{wins}/3 seeds; " + "; ".join(details))
        assert wins >= 2
    # recorded, not asserted: whether the mismatch pushes p90 past 50%
    # depends on the environment
    antenna_p90 = [
        reports[("antenna", s)].summary_for("test", "DNN").p90_drop_pct for s in SEEDS
    ]
    print(
        "NOTE criterion-5: antenna test-setup DNN p90 per seed = "
        + ", ".join(f"{v:.1f}%" for v in antenna_p90)
        + " (>50% worst-case mark recorded, not asserted: environment-dependent)"
    )


def test_criterion_6_non_ml_stability(experiment_grid):
    reports, _ = experiment_grid
    worst = 0.0
    for (protocol, seed), rep in reports.items():
        for setup in ("train", "test"):
            s = rep.summary_for(setup, "ES")
            gap = abs(s.p90_drop_pct - s.mean_drop_pct)
            worst = max(worst, gap)
            assert gap <= 1.0, f"{protocol}/seed{seed}/{setup}: ES p90-mean gap {gap:.2f}pp"
    _report_line("criterion-6 non-ml-stability", True,
                 f"worst ES |p90-mean| gap {worst:.2f}pp (limit 1.0)")


def test_criterion_7_reproducibility(tmp_path):
    spec_kwargs = dict(
        n_train_snapshots=200,
        n_eval_snapshots=100,
        world=WorldConfig(blockers_per_quadrant=3, scatterers_per_quadrant=12),
        mobility=MobilityConfig(n_vehicles=30, duration_s=120),
        training=TrainConfig(epochs=8, batch_size=64),
    )
    outputs = []
    for run in range(2):
        spec = default_spec("antenna", global_seed=1, **spec_kwargs)
        report = run_experiment(spec)
        out = tmp_path / f"run{run}"
        emit_report(report, out)
        render_report_dir(out)
        outputs.append(out)
    compared = [
        "summary.json", "plot.csv", "scores_train.csv", "scores_test.csv",
        "training_log.csv", "MANIFEST.json", "fig_drop.png",
    ]
    diffs = [
        name
        for name in compared
        if (outputs[0] / name).read_bytes() != (outputs[1] / name).read_bytes()
    ]
    _report_line("criterion-7 reproducibility", not diffs,
                 f"{len(compared)} report files byte-identical across two runs")
    assert not diffs, f"files differ: {diffs}"


def test_criterion_8_codebook_transfer(tmp_path):
    world = build_world(9, WorldConfig(blockers_per_quadrant=2, scatterers_per_quadrant=10))
    trace = synth_mobility(world, 20, 60, seed=10)
    profile = UeProfile(array=ArrayConfig(rows=4, cols=4), codebook_ref="subsetA")
    parent = dft_codebook(4, 4, (4, 4))
    cb_a = random_subset(parent, 16, seed=101)
    cb_b = random_subset(parent, 16, seed=202)
    data = collect_dataset(world, trace, profile, cb_a, 40, seed=11, radio=RADIO)
    model, _log = train(
        data, ModelSpec(hidden_width=32, residual_blocks=2, seed=12),
        TrainConfig(epochs=3, batch_size=32, seed=13),
    )
    bs_cb = dft_codebook(8, 8)
    snaps = sample_snapshots(world, trace, profile, RADIO, 10, None, seed=14)
    evaluated = 0
    for snap in snaps:
        if snap.channel.is_empty:
            continue
        res = predictor_select(snap.context, cb_b, model, snap.channel, bs_cb, RADIO)
        assert 0 <= res.ue_beam_index < len(cb_b)
        evaluated += 1
        preds = model.predict_powers(snap.context, cb_b.directions())
        perm = np.random.default_rng(15).permutation(len(cb_b))
        reordered = model.predict_powers(snap.context, cb_b.directions()[perm])
        assert np.array_equal(preds[perm], reordered)
    ok = evaluated > 0
    _report_line("criterion-8 codebook-transfer", ok,
                 f"{evaluated} cross-codebook selections, reorder-invariant bit-exact")
    assert ok
