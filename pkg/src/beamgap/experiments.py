"""Heterogeneity experiment pipelines.

Each protocol builds one world and mobility trace, collects labeled
training data under the ``train`` setup, fits the beam-direction
regressor, then scores DNN / HS / ES selections against the genie on
fresh evaluation snapshots under both the train setup and the mismatched
test setup. The protocols differ in exactly one axis:

* antenna:  train 4x4 UPA / 16-beam DFT, test 8x8 UPA / 64-beam DFT;
* codebook: 4x4 UPA, two distinct 16-beam random subsets of the x4
  oversampled DFT grid;
* location: 8x8 UPA, train snapshots from the upper-right quadrant,
  test snapshots from the other three.

Evaluation snapshots never reuse a (vehicle, time) pair seen in
training: the train draw's keys are removed from the trace before the
evaluation pools are sampled.
"""

from __future__ import annotations

import hashlib
import json
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .arrays import ArrayConfig
from .channel import RadioConfig, pair_power_matrix, rsrp
from .codebooks import Codebook, assign_children, coarse_codebook, dft_codebook, random_subset
from .metrics import MethodSummary, SnapshotScore, relative_drop, spectral_efficiency, summarize
from .predictor import (
    ModelSpec,
    TrainConfig,
    TrainingSample,
    TrainedModel,
    normalize_label,
    train,
)
from .scenario import (
    MobilityConfig,
    MobilityTrace,
    UeProfile,
    WorldConfig,
    WorldLayout,
    build_world,
    draw_records,
    sample_snapshots,
    synth_mobility,
)
from .seeding import derive_seed
from .selectors import (
    OverheadModel,
    beam_pair_powers,
    effective_se,
    exhaustive_select,
    genie_select,
    hierarchical_select,
    predictor_select,
)

PROTOCOLS = ("antenna", "codebook", "location")
METHODS = ("DNN", "HS", "ES")


@dataclass(frozen=True)
class CodebookSpec:
    """Recipe for a UE codebook tied to an array size."""

    kind: str = "dft"  # "dft" or "random_subset"
    oversampling: tuple[int, int] = (1, 1)
    count: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("dft", "random_subset"):
            raise ValueError(f"unknown codebook kind {self.kind!r}")
        if self.kind == "random_subset" and (self.count is None or self.seed is None):
            raise ValueError("random_subset codebooks need count and seed")

    @property
    def ref(self) -> str:
        if self.kind == "dft":
            return "dft"
        o1, o2 = self.oversampling
        return f"subset{self.count}-o{o1}x{o2}-s{self.seed}"

    def build(self, rows: int, cols: int) -> Codebook:
        if self.kind == "dft":
            return dft_codebook(rows, cols)
        parent = dft_codebook(rows, cols, self.oversampling)
        return random_subset(parent, self.count, self.seed)


@dataclass(frozen=True)
class SetupSpec:
    ue_rows: int
    ue_cols: int
    codebook: CodebookSpec = CodebookSpec()
    quadrants: tuple[str, ...] | None = None  # None = whole world

    def to_dict(self) -> dict:
        return {
            "ue_rows": self.ue_rows,
            "ue_cols": self.ue_cols,
            "codebook": {
                "kind": self.codebook.kind,
                "oversampling": list(self.codebook.oversampling),
                "count": self.codebook.count,
                "seed": self.codebook.seed,
            },
            "quadrants": list(self.quadrants) if self.quadrants is not None else None,
        }


@dataclass(frozen=True)
class ExperimentSeeds:
    world: int
    mobility: int
    train_sample: int
    eval_sample: int
    model: int

    @classmethod
    def from_global(cls, global_seed: int) -> "ExperimentSeeds":
        return cls(
            world=derive_seed(global_seed, "world"),
            mobility=derive_seed(global_seed, "mobility"),
            train_sample=derive_seed(global_seed, "train_sample"),
            eval_sample=derive_seed(global_seed, "eval_sample"),
            model=derive_seed(global_seed, "model"),
        )

    def to_dict(self) -> dict:
        return {
            "world": self.world,
            "mobility": self.mobility,
            "train_sample": self.train_sample,
            "eval_sample": self.eval_sample,
            "model": self.model,
        }


@dataclass(frozen=True)
class ExperimentSpec:
    protocol: str
    train_setup: SetupSpec
    test_setup: SetupSpec
    seeds: ExperimentSeeds
    n_train_snapshots: int = 4000
    n_eval_snapshots: int = 2000
    radio: RadioConfig = RadioConfig()
    overhead: OverheadModel = OverheadModel()
    world: WorldConfig = WorldConfig()
    mobility: MobilityConfig = MobilityConfig()
    model: ModelSpec = ModelSpec()
    training: TrainConfig = TrainConfig()
    channel_kwargs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        tr, te = self.train_setup, self.test_setup
        arrays_equal = (tr.ue_rows, tr.ue_cols) == (te.ue_rows, te.ue_cols)
        codebooks_equal = tr.codebook == te.codebook
        quadrants_equal = tr.quadrants == te.quadrants
        if self.protocol == "antenna":
            ok = (not arrays_equal) and codebooks_equal and quadrants_equal
        elif self.protocol == "codebook":
            ok = arrays_equal and (not codebooks_equal) and quadrants_equal
        else:
            ok = arrays_equal and codebooks_equal and (not quadrants_equal)
        if not ok:
            raise ValueError(
                f"{self.protocol} protocol requires train/test setups to differ "
                "in exactly that axis"
            )

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "train_setup": self.train_setup.to_dict(),
            "test_setup": self.test_setup.to_dict(),
            "seeds": self.seeds.to_dict(),
            "n_train_snapshots": self.n_train_snapshots,
            "n_eval_snapshots": self.n_eval_snapshots,
            "radio": vars(self.radio).copy(),
            "overhead": vars(self.overhead).copy(),
            "world": {**vars(self.world), "extent": list(self.world.extent),
                      "blocker_size": list(self.world.blocker_size),
                      "blocker_height": list(self.world.blocker_height),
                      "scatterer_height": list(self.world.scatterer_height)},
            "mobility": {**vars(self.mobility), "car_speed": list(self.mobility.car_speed),
                         "bus_speed": list(self.mobility.bus_speed)},
            "model": vars(self.model).copy(),
            "training": vars(self.training).copy(),
            "channel_kwargs": dict(self.channel_kwargs),
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def antenna_spec(global_seed: int = 1, **overrides) -> ExperimentSpec:
    return ExperimentSpec(
        protocol="antenna",
        train_setup=SetupSpec(4, 4, CodebookSpec("dft")),
        test_setup=SetupSpec(8, 8, CodebookSpec("dft")),
        seeds=ExperimentSeeds.from_global(global_seed),
        **overrides,
    )


def codebook_spec_experiment(
    global_seed: int = 1,
    subset_count: int = 16,
    oversampling: int = 4,
    train_subset_seed: int = 101,
    test_subset_seed: int = 202,
    **overrides,
) -> ExperimentSpec:
    ov = (oversampling, oversampling)
    return ExperimentSpec(
        protocol="codebook",
        train_setup=SetupSpec(4, 4, CodebookSpec("random_subset", ov, subset_count, train_subset_seed)),
        test_setup=SetupSpec(4, 4, CodebookSpec("random_subset", ov, subset_count, test_subset_seed)),
        seeds=ExperimentSeeds.from_global(global_seed),
        **overrides,
    )


def location_spec(global_seed: int = 1, **overrides) -> ExperimentSpec:
    return ExperimentSpec(
        protocol="location",
        train_setup=SetupSpec(8, 8, CodebookSpec("dft"), quadrants=("UR",)),
        test_setup=SetupSpec(8, 8, CodebookSpec("dft"), quadrants=("UL", "LL", "LR")),
        seeds=ExperimentSeeds.from_global(global_seed),
        **overrides,
    )


def default_spec(protocol: str, global_seed: int = 1, **overrides) -> ExperimentSpec:
    if protocol == "antenna":
        return antenna_spec(global_seed, **overrides)
    if protocol == "codebook":
        return codebook_spec_experiment(global_seed, **overrides)
    if protocol == "location":
        return location_spec(global_seed, **overrides)
    raise ValueError(f"unknown protocol {protocol!r}")


def setup_profile(setup: SetupSpec, carrier_hz: float) -> UeProfile:
    return UeProfile(
        array=ArrayConfig(rows=setup.ue_rows, cols=setup.ue_cols, carrier_hz=carrier_hz),
        codebook_ref=setup.codebook.ref,
    )


def collect_dataset(
    world: WorldLayout,
    trace: MobilityTrace,
    profile: UeProfile,
    codebook: Codebook,
    n: int,
    seed: int,
    radio: RadioConfig = RadioConfig(),
    quadrant_filter=None,
    channel_kwargs: dict | None = None,
) -> list[TrainingSample]:
    """One labeled sample per (snapshot, beam) under BS-genie pairing.

    The BS beam comes from the fast pair-power matrix; the label itself
    is a plain rsrp() call for that pair, so labels reproduce direct
    RSRP recomputation bit for bit. Outage snapshots contribute nothing,
    and beams with no received power (no finite RSRP) are skipped.
    """
    snapshots = sample_snapshots(
        world, trace, profile, radio, n, quadrant_filter, seed, channel_kwargs=channel_kwargs
    )
    bs_cb = dft_codebook(world.bs_array.rows, world.bs_array.cols)
    bs_weights = bs_cb.weight_matrix()
    ue_weights = codebook.weight_matrix()
    samples: list[TrainingSample] = []
    for snap in snapshots:
        if snap.channel.is_empty:
            continue
        powers = pair_power_matrix(snap.channel, bs_weights, ue_weights)
        best_bs = powers.argmax(axis=0)  # BS-genie pairing per UE beam
        for u, beam in enumerate(codebook.beams):
            label_dbm = rsrp(
                snap.channel, bs_cb.beams[best_bs[u]].weights, beam.weights, radio
            )
            if not np.isfinite(label_dbm):
                continue
            samples.append(
                TrainingSample(
                    context=snap.context,
                    beam_dir=beam.direction,
                    label=float(normalize_label(label_dbm)),
                )
            )
    return samples


@dataclass
class SetupReport:
    name: str
    setup: SetupSpec
    summaries: list[MethodSummary]
    scores: list[SnapshotScore]
    outage_ids: set
    replacement_used: bool


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    setups: dict  # name -> SetupReport
    training_log: object
    seed_audit: dict
    wall_clock_s: float

    def __post_init__(self):
        for rep in self.setups.values():
            methods = {s.method for s in rep.summaries}
            if methods != set(METHODS):
                raise ValueError(f"report methods must be exactly {METHODS}")

    def summary_for(self, setup_name: str, method: str) -> MethodSummary:
        for s in self.setups[setup_name].summaries:
            if s.method == method:
                return s
        raise KeyError(method)


def _ordered_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def evaluate_setup(
    name: str,
    setup: SetupSpec,
    world: WorldLayout,
    pool_trace: MobilityTrace,
    model: TrainedModel,
    spec: ExperimentSpec,
    threads: int = 1,
) -> SetupReport:
    """Score DNN/HS/ES against the genie on fresh snapshots for one setup."""
    radio, ovh = spec.radio, spec.overhead
    profile = setup_profile(setup, spec.world.carrier_hz)
    ue_cb = setup.codebook.build(setup.ue_rows, setup.ue_cols)
    bs_cb = dft_codebook(world.bs_array.rows, world.bs_array.cols)
    coarse = coarse_codebook(setup.ue_rows, setup.ue_cols)
    children = assign_children(ue_cb)
    snapshots = sample_snapshots(
        world,
        pool_trace,
        profile,
        radio,
        spec.n_eval_snapshots,
        setup.quadrants,
        derive_seed(spec.seeds.eval_sample, name),
        channel_kwargs=spec.channel_kwargs,
    )

    def score_one(snap):
        ch = snap.channel
        if ch.is_empty:
            return [SnapshotScore(snap.snapshot_id, m, 0.0, 100.0) for m in METHODS], True
        powers = beam_pair_powers(ch, bs_cb, ue_cb)
        powers_coarse = beam_pair_powers(ch, bs_cb, coarse)
        genie = genie_select(ch, bs_cb, ue_cb, radio, powers=powers)
        se_genie = spectral_efficiency(
            ch,
            bs_cb.beams[genie.bs_beam_index].weights,
            ue_cb.beams[genie.ue_beam_index].weights,
            radio,
        )
        rows = []
        for method in METHODS:
            if method == "ES":
                sel = exhaustive_select(ch, bs_cb, ue_cb, radio, powers=powers)
                se_raw = se_genie  # same beam pair as the genie
            elif method == "HS":
                sel = hierarchical_select(
                    ch, bs_cb, coarse, children, ue_cb, radio,
                    powers_fine=powers, powers_coarse=powers_coarse,
                )
                se_raw = spectral_efficiency(
                    ch,
                    bs_cb.beams[sel.bs_beam_index].weights,
                    ue_cb.beams[sel.ue_beam_index].weights,
                    radio,
                )
            else:  # DNN
                sel = predictor_select(snap.context, ue_cb, model, ch, bs_cb, radio, powers=powers)
                se_raw = spectral_efficiency(
                    ch,
                    bs_cb.beams[sel.bs_beam_index].weights,
                    ue_cb.beams[sel.ue_beam_index].weights,
                    radio,
                )
            se_eff = effective_se(se_raw, sel.measured_pairs, ovh)
            rows.append(
                SnapshotScore(
                    snap.snapshot_id, method, se_eff, relative_drop(se_genie, se_eff)
                )
            )
        return rows, False

    scored = _ordered_map(score_one, snapshots, threads)
    scores: list[SnapshotScore] = []
    outage_ids = set()
    for (rows, outage), snap in zip(scored, snapshots):
        scores.extend(rows)
        if outage:
            outage_ids.add(snap.snapshot_id)
    summaries = summarize(scores, outage_ids)
    return SetupReport(
        name=name,
        setup=setup,
        summaries=summaries,
        scores=scores,
        outage_ids=outage_ids,
        replacement_used=snapshots.replacement_used,
    )


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentReport:
    """Full protocol run: world, data, training, matched + mismatched eval."""
    started = _time.perf_counter()
    world = build_world(spec.seeds.world, spec.world)
    trace = synth_mobility(
        world, spec.mobility.n_vehicles, spec.mobility.duration_s, spec.seeds.mobility,
        config=spec.mobility,
    )

    train_profile = setup_profile(spec.train_setup, spec.world.carrier_hz)
    train_cb = spec.train_setup.codebook.build(spec.train_setup.ue_rows, spec.train_setup.ue_cols)
    dataset = collect_dataset(
        world,
        trace,
        train_profile,
        train_cb,
        spec.n_train_snapshots,
        spec.seeds.train_sample,
        radio=spec.radio,
        quadrant_filter=spec.train_setup.quadrants,
        channel_kwargs=spec.channel_kwargs,
    )
    model_spec = replace(spec.model, seed=spec.seeds.model)
    train_cfg = replace(spec.training, seed=derive_seed(spec.seeds.model, "shuffle"))
    model, tlog = train(dataset, model_spec, train_cfg)

    # Evaluation pools must not reuse training (vehicle, time) pairs.
    train_records, _ = draw_records(
        trace, spec.train_setup.quadrants, spec.n_train_snapshots, spec.seeds.train_sample
    )
    train_keys = {(r.vehicle_id, r.time) for r in train_records}
    eval_trace = trace.without_keys(train_keys)

    setups = {}
    for name, setup in (("train", spec.train_setup), ("test", spec.test_setup)):
        setups[name] = evaluate_setup(name, setup, world, eval_trace, model, spec, threads)

    seed_audit = {"global_derived": spec.seeds.to_dict(), "config_sha256": spec.config_hash()}
    return ExperimentReport(
        spec=spec,
        setups=setups,
        training_log=tlog,
        seed_audit=seed_audit,
        wall_clock_s=_time.perf_counter() - started,
    )


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def emit_report(report: ExperimentReport, out_dir) -> dict[str, str]:
    """Write the report file set; byte-stable except timing.json.

    Files: summary.json, plot.csv, scores_<setup>.csv per setup,
    training_log.csv, MANIFEST.json, timing.json.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}

    spec = report.spec
    summary_doc = {
        "protocol": spec.protocol,
        "spec": spec.to_dict(),
        "setups": {
            name: {
                "setup": rep.setup.to_dict(),
                "replacement_used": rep.replacement_used,
                "methods": [
                    {
                        "method": s.method,
                        "mean_drop_pct": round(s.mean_drop_pct, 6),
                        "p90_drop_pct": round(s.p90_drop_pct, 6),
                        "n": s.n_snapshots,
                        "outages": s.outage_count,
                    }
                    for s in rep.summaries
                ],
            }
            for name, rep in sorted(report.setups.items())
        },
        "seed_audit": report.seed_audit,
    }
    path = out / "summary.json"
    path.write_text(json.dumps(summary_doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    written["summary"] = str(path)

    path = out / "plot.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,setup,mean_drop_pct,p90_drop_pct\n")
        for method in METHODS:
            for name in ("train", "test"):
                s = report.summary_for(name, method)
                fh.write(f"{method},{name},{_fmt(s.mean_drop_pct)},{_fmt(s.p90_drop_pct)}\n")
    written["plot"] = str(path)

    for name, rep in sorted(report.setups.items()):
        path = out / f"scores_{name}.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("snapshot_id,method,se_bps_hz,rel_drop_pct\n")
            for s in rep.scores:
                fh.write(f"{s.snapshot_id},{s.method},{_fmt(s.se_bps_hz)},{_fmt(s.rel_drop_pct)}\n")
        written[f"scores_{name}"] = str(path)

    path = out / "training_log.csv"
    report.training_log.write_csv(path)
    written["training_log"] = str(path)

    manifest = {
        "config_sha256": spec.config_hash(),
        "section_sha256": {
            section: hashlib.sha256(
                json.dumps(spec.to_dict()[section], sort_keys=True).encode("utf-8")
            ).hexdigest()
            for section in ("world", "radio", "overhead", "mobility", "model", "training")
        },
        "seeds": spec.seeds.to_dict(),
        "files": sorted(Path(p).name for p in written.values()),
        "protocol": spec.protocol,
    }
    path = out / "MANIFEST.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    written["manifest"] = str(path)

    path = out / "timing.json"
    path.write_text(
        json.dumps({"wall_clock_s": report.wall_clock_s}, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    written["timing"] = str(path)
    return written


DETERMINISTIC_REPORT_FILES = (
    "summary.json",
    "plot.csv",
    "scores_train.csv",
    "scores_test.csv",
    "training_log.csv",
    "MANIFEST.json",
)
