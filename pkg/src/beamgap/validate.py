"""Fast self-checks behind the ``validate`` subcommand.

Each check returns (name, passed, detail). They re-derive expected
values from scalar formulas independent of the vectorized code paths, so
a regression in the numerics shows up as a failed check rather than a
silently shifted result.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .arrays import ArrayConfig, rotation_about_z, steering_vector
from .channel import Box, ChannelRealization, Path, PathKind, RadioConfig, generate_channel, rsrp
from .codebooks import dft_codebook
from .errors import ModelFileError
from .metrics import spectral_efficiency
from .predictor import ModelSpec, TrainedModel, gradient_check, init_params, load_model, save_model
from .scenario import WorldLayout


def _simple_world(extent=(1000.0, 1000.0), blockers=(), scatterers=None, bs_height=15.0):
    bs_position = np.array([0.0, 0.0, bs_height])
    return WorldLayout(
        extent=extent,
        bs_position=bs_position,
        bs_array=ArrayConfig(rows=8, cols=8, position=bs_position),
        blockers=tuple(blockers),
        scatterers=np.zeros((0, 3)) if scatterers is None else np.asarray(scatterers),
        seed=0,
    )


def check_steering_norms(trials: int = 50, seed: int = 3) -> tuple[str, bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        rows, cols = rng.integers(1, 9), rng.integers(1, 9)
        arr = ArrayConfig(rows=int(rows), cols=int(cols))
        az = rng.uniform(-np.pi, np.pi)
        el = rng.uniform(-np.pi / 2, np.pi / 2)
        worst = max(worst, abs(np.linalg.norm(steering_vector(arr, (az, el))) - 1.0))
    return "steering-norm", worst <= 1e-12, f"worst |norm-1| = {worst:.2e}"


def check_dft_orthogonality() -> tuple[str, bool, str]:
    cb = dft_codebook(4, 4)
    w = cb.weight_matrix()
    gram = np.abs(w.conj().T @ w) - np.eye(len(cb))
    worst = float(np.max(np.abs(gram)))
    return "dft-orthogonality", worst <= 1e-10, f"worst off-diagonal = {worst:.2e}"


def check_free_space_doubling() -> tuple[str, bool, str]:
    world = _simple_world()
    radio = RadioConfig()
    ue = ArrayConfig(rows=2, cols=2)
    ch1 = generate_channel(world, world.bs_array, ue.at([100.0, 0.0, 1.5]), radio, seed=1)
    ch2 = generate_channel(world, world.bs_array, ue.at([200.0, 0.0, 1.5]), radio, seed=1)
    # distances differ (3D), so compare against the exact free-space ratio
    d1 = np.linalg.norm(np.array([100.0, 0.0, 1.5]) - world.bs_position)
    d2 = np.linalg.norm(np.array([200.0, 0.0, 1.5]) - world.bs_position)
    expected_db = 20.0 * np.log10(d1 / d2)
    got_db = 20.0 * np.log10(abs(ch2.paths[0].gain) / abs(ch1.paths[0].gain))
    err = abs(got_db - expected_db)
    return "free-space-law", err <= 0.01, f"gain ratio error = {err:.4f} dB"


def check_link_budget() -> tuple[str, bool, str]:
    radio = RadioConfig(tx_power_dbm=20.0, noise_figure_db=10.0)
    bs = ArrayConfig(rows=8, cols=8)
    ue = ArrayConfig(rows=4, cols=4)
    aod, aoa = (0.3, -0.2), (-1.1, 0.4)
    gain = 10 ** (-96.0 / 20.0)
    ch = ChannelRealization(
        paths=(Path(gain=gain + 0j, delay=0.0, aod=aod, aoa=aoa, kind=PathKind.LOS),),
        bs_array=bs,
        ue_array=ue,
    )
    f = steering_vector(bs, aod)
    w = steering_vector(ue, aoa)
    got = rsrp(ch, f, w, radio)
    expected = 20.0 - 96.0 + 10.0 * np.log10(64 * 16)
    err_rsrp = abs(got - expected)

    se = spectral_efficiency(ch, f, w, radio)
    noise_dbm = -174.0 + 10.0 * np.log10(30e3) + 10.0
    snr_db = expected - noise_dbm
    se_expected = np.log2(1.0 + 10 ** (snr_db / 10.0))
    err_se = abs(se - se_expected)
    ok = err_rsrp <= 0.01 and err_se <= 0.01
    return "link-budget", ok, f"RSRP error = {err_rsrp:.4f} dB, SE error = {err_se:.4f}"


def check_frame_consistency() -> tuple[str, bool, str]:
    radio = RadioConfig()
    blockers = [Box(30.0, 60.0, -20.0, 20.0, 0.0, 18.0)]
    scatterers = np.array([[80.0, 40.0, 6.0], [-50.0, 30.0, 12.0], [20.0, -70.0, 4.0]])
    world = _simple_world(extent=(400.0, 400.0), blockers=blockers, scatterers=scatterers)
    ue = ArrayConfig(rows=4, cols=4).at([120.0, -30.0, 1.5])
    ch = generate_channel(world, world.bs_array, ue, radio, seed=11)

    rot = rotation_about_z(np.pi / 2)
    world_rot = WorldLayout(
        extent=world.extent,
        bs_position=rot @ world.bs_position,
        bs_array=world.bs_array.at(rot @ world.bs_position, orientation=rot @ world.bs_array.orientation),
        blockers=tuple(b.rotated_z90() for b in blockers),
        scatterers=(rot @ scatterers.T).T,
        seed=0,
    )
    ue_rot = ArrayConfig(rows=4, cols=4).at(rot @ ue.position, orientation=rot @ ue.orientation)
    ch_rot = generate_channel(world_rot, world_rot.bs_array, ue_rot, radio, seed=11)

    f = steering_vector(world.bs_array, (0.4, -0.5))
    w = steering_vector(ue, (1.0, 0.2))
    diff = abs(rsrp(ch, f, w, radio) - rsrp(ch_rot, f, w, radio))
    return "frame-consistency", diff <= 1e-9, f"RSRP shift under rigid rotation = {diff:.2e} dB"


def check_gradients() -> tuple[str, bool, str]:
    spec = ModelSpec(hidden_width=8, residual_blocks=2)
    worst, name = gradient_check(spec, batch_size=8, step=1e-4, seed=7)
    return "gradient-check", worst <= 1e-4, f"worst rel deviation = {worst:.2e} at {name}"


def check_model_roundtrip(model_path=None) -> tuple[str, bool, str]:
    if model_path is not None:
        try:
            model = load_model(model_path)
            x = np.zeros((1, model.spec.input_dim))
            model.predict_normalized(x)
            return "model-load", True, f"loaded {model_path}"
        except (ModelFileError, OSError) as exc:
            return "model-load", False, str(exc)
    spec = ModelSpec(hidden_width=16, residual_blocks=2, seed=5)
    model = TrainedModel(spec, init_params(spec), trained=True)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.bin")
        save_model(model, path)
        loaded = load_model(path)
    same = all(
        np.array_equal(model.params[k], loaded.params[k]) for k in spec.parameter_names()
    )
    return "model-roundtrip", same, "save/load parameters bit-exact" if same else "mismatch"


def run_all(model_path=None):
    """All checks; a supplied model file replaces the synthetic roundtrip."""
    checks = [
        check_steering_norms(),
        check_dft_orthogonality(),
        check_free_space_doubling(),
        check_link_budget(),
        check_frame_consistency(),
        check_gradients(),
        check_model_roundtrip(model_path),
    ]
    return checks
