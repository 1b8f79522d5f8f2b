"""World construction, mobility traces, and snapshot sampling.

The world is a seeded stand-in for a ray-traced city: per ground-plane
quadrant, a handful of axis-aligned blocker boxes and a cloud of point
scatterers, drawn from independent per-quadrant sub-seeds so the four
quadrants are statistically distinct environments. Mobility comes either
from an ingested CSV trace (time,id,x,y,speed,class) or from a built-in
random-waypoint generator matched to the target fleet statistics
(mean speed 9.5 m/s at a 3:7 car:bus mix).
"""

from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .arrays import ArrayConfig
from .channel import (
    Box,
    ChannelRealization,
    RadioConfig,
    generate_channel,
)
from .errors import (
    ContractViolation,
    EmptyFilterResult,
    MalformedRow,
    NonMonotonicTime,
    OutOfBounds,
)
from .predictor import SnapshotContext
from .seeding import derive_seed


class Quadrant(enum.Enum):
    UPPER_RIGHT = "UR"
    UPPER_LEFT = "UL"
    LOWER_LEFT = "LL"
    LOWER_RIGHT = "LR"

    @classmethod
    def parse(cls, text) -> "Quadrant":
        if isinstance(text, Quadrant):
            return text
        key = str(text).strip().upper().replace("_", "").replace(" ", "")
        aliases = {
            "UR": cls.UPPER_RIGHT, "UPPERRIGHT": cls.UPPER_RIGHT,
            "UL": cls.UPPER_LEFT, "UPPERLEFT": cls.UPPER_LEFT,
            "LL": cls.LOWER_LEFT, "LOWERLEFT": cls.LOWER_LEFT,
            "LR": cls.LOWER_RIGHT, "LOWERRIGHT": cls.LOWER_RIGHT,
        }
        if key not in aliases:
            raise ValueError(f"unknown quadrant {text!r}")
        return aliases[key]


def quadrant_of(x: float, y: float) -> Quadrant:
    """Quadrant of a ground position relative to the BS at the origin.

    Axis points go to the right/upper side so labeling is a partition.
    """
    if x >= 0:
        return Quadrant.UPPER_RIGHT if y >= 0 else Quadrant.LOWER_RIGHT
    return Quadrant.UPPER_LEFT if y >= 0 else Quadrant.LOWER_LEFT


_QUADRANT_SIGNS = {
    Quadrant.UPPER_RIGHT: (1.0, 1.0),
    Quadrant.UPPER_LEFT: (-1.0, 1.0),
    Quadrant.LOWER_LEFT: (-1.0, -1.0),
    Quadrant.LOWER_RIGHT: (1.0, -1.0),
}


@dataclass(frozen=True)
class WorldConfig:
    extent: tuple[float, float] = (400.0, 400.0)
    bs_height: float = 15.0
    bs_rows: int = 8
    bs_cols: int = 8
    carrier_hz: float = 15e9
    blockers_per_quadrant: int = 6
    blocker_size: tuple[float, float] = (20.0, 60.0)
    # blocker tops stay below the scatterer ceiling so walled-in UEs keep
    # a bounce path; outage then stays rare (<0.2% of snapshots)
    blocker_height: tuple[float, float] = (5.0, 18.0)
    scatterers_per_quadrant: int = 40
    scatterer_height: tuple[float, float] = (0.5, 20.0)
    axis_margin: float = 5.0

    def __post_init__(self):
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValueError("world extent must be positive")
        if self.bs_height <= 0:
            raise ValueError("BS height must be positive")


@dataclass(frozen=True)
class WorldLayout:
    """Blockers, scatterers, and the BS array, centered on the BS."""

    extent: tuple[float, float]
    bs_position: np.ndarray
    bs_array: ArrayConfig
    blockers: tuple[Box, ...]
    scatterers: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "bs_position", np.asarray(self.bs_position, dtype=float))
        object.__setattr__(self, "blockers", tuple(self.blockers))
        scat = np.asarray(self.scatterers, dtype=float).reshape(-1, 3)
        scat.setflags(write=False)
        object.__setattr__(self, "scatterers", scat)
        if self.bs_position[2] <= 0:
            raise ValueError("BS height must be positive")
        half_w, half_d = self.extent[0] / 2.0, self.extent[1] / 2.0
        if len(scat) and (
            np.any(np.abs(scat[:, 0]) > half_w) or np.any(np.abs(scat[:, 1]) > half_d)
        ):
            raise ValueError("scatterers must lie inside the world extent")

    def contains(self, point) -> bool:
        x, y = float(point[0]), float(point[1])
        return abs(x) <= self.extent[0] / 2.0 and abs(y) <= self.extent[1] / 2.0

    def to_json(self) -> str:
        doc = {
            "extent": list(self.extent),
            "seed": self.seed,
            "bs_position": [float(v) for v in self.bs_position],
            "bs_array": {
                "rows": self.bs_array.rows,
                "cols": self.bs_array.cols,
                "element_spacing": self.bs_array.element_spacing,
                "carrier_hz": self.bs_array.carrier_hz,
            },
            "blockers": [
                [b.xmin, b.xmax, b.ymin, b.ymax, b.zmin, b.zmax] for b in self.blockers
            ],
            "scatterers": [[float(v) for v in row] for row in self.scatterers],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "WorldLayout":
        doc = json.loads(text)
        arr = doc["bs_array"]
        bs_array = ArrayConfig(
            rows=arr["rows"],
            cols=arr["cols"],
            element_spacing=arr["element_spacing"],
            carrier_hz=arr["carrier_hz"],
            position=np.asarray(doc["bs_position"]),
        )
        return cls(
            extent=tuple(doc["extent"]),
            bs_position=np.asarray(doc["bs_position"]),
            bs_array=bs_array,
            blockers=tuple(Box(*vals) for vals in doc["blockers"]),
            scatterers=np.asarray(doc["scatterers"]).reshape(-1, 3),
            seed=doc["seed"],
        )


def build_world(world_seed: int, config: WorldConfig = WorldConfig()) -> WorldLayout:
    """Seeded blocker/scatterer placement, independent per quadrant."""
    half_w, half_d = config.extent[0] / 2.0, config.extent[1] / 2.0
    blockers: list[Box] = []
    scatterer_rows: list[np.ndarray] = []
    for quadrant in Quadrant:
        sx_sign, sy_sign = _QUADRANT_SIGNS[quadrant]
        rng = np.random.default_rng(derive_seed(world_seed, f"quadrant:{quadrant.value}"))
        quad_boxes: list[Box] = []
        for _ in range(config.blockers_per_quadrant):
            size_x = rng.uniform(*config.blocker_size)
            size_y = rng.uniform(*config.blocker_size)
            height = rng.uniform(*config.blocker_height)
            cx = rng.uniform(config.axis_margin + size_x / 2.0, half_w - size_x / 2.0)
            cy = rng.uniform(config.axis_margin + size_y / 2.0, half_d - size_y / 2.0)
            cx, cy = sx_sign * cx, sy_sign * cy
            quad_boxes.append(
                Box(
                    min(cx - size_x / 2, cx + size_x / 2),
                    max(cx - size_x / 2, cx + size_x / 2),
                    min(cy - size_y / 2, cy + size_y / 2),
                    max(cy - size_y / 2, cy + size_y / 2),
                    0.0,
                    height,
                )
            )
        blockers.extend(quad_boxes)
        for _ in range(config.scatterers_per_quadrant):
            for _attempt in range(100):
                x = sx_sign * rng.uniform(2.0, half_w - 2.0)
                y = sy_sign * rng.uniform(2.0, half_d - 2.0)
                z = rng.uniform(*config.scatterer_height)
                if not any(b.contains_xy(x, y) and b.zmin <= z <= b.zmax for b in quad_boxes):
                    break
            scatterer_rows.append(np.array([x, y, z]))

    bs_position = np.array([0.0, 0.0, config.bs_height])
    bs_array = ArrayConfig(
        rows=config.bs_rows,
        cols=config.bs_cols,
        carrier_hz=config.carrier_hz,
        position=bs_position,
    )
    return WorldLayout(
        extent=tuple(config.extent),
        bs_position=bs_position,
        bs_array=bs_array,
        blockers=tuple(blockers),
        scatterers=np.array(scatterer_rows),
        seed=world_seed,
    )


VEHICLE_CLASSES = ("car", "bus")


@dataclass(frozen=True)
class TraceRecord:
    time: float
    vehicle_id: str
    x: float
    y: float
    speed: float
    vclass: str


@dataclass(frozen=True)
class MobilityTrace:
    records: tuple[TraceRecord, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.records, key=lambda r: (r.time, r.vehicle_id)))
        object.__setattr__(self, "records", ordered)

    def __len__(self) -> int:
        return len(self.records)

    def without_keys(self, keys) -> "MobilityTrace":
        """Trace minus the records whose (vehicle_id, time) appear in keys."""
        keyset = set(keys)
        return MobilityTrace(
            tuple(r for r in self.records if (r.vehicle_id, r.time) not in keyset)
        )


_TRACE_HEADER = "time,id,x,y,speed,class"


def ingest_trace(source, extent=None) -> MobilityTrace:
    """Parse and validate a CSV mobility trace.

    ``source`` is a path or an open text stream. When ``extent`` is
    given, positions outside it raise OutOfBounds. Rows with unknown
    vehicle classes, non-numeric fields, or semicolons are rejected with
    the offending line number; per-vehicle timestamps must not decrease.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = text.splitlines()
    if not lines or lines[0].strip() != _TRACE_HEADER:
        raise MalformedRow(1, f"header must be exactly '{_TRACE_HEADER}'")
    records = []
    last_time: dict[str, float] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if ";" in line:
            raise MalformedRow(line_no, "semicolons are not a valid separator")
        parts = line.split(",")
        if len(parts) != 6:
            raise MalformedRow(line_no, f"expected 6 fields, got {len(parts)}")
        try:
            time = float(parts[0])
            x = float(parts[2])
            y = float(parts[3])
            speed = float(parts[4])
        except ValueError as exc:
            raise MalformedRow(line_no, f"numeric parse failed: {exc}") from None
        vid = parts[1].strip()
        vclass = parts[5].strip()
        if vclass not in VEHICLE_CLASSES:
            raise MalformedRow(line_no, f"unknown vehicle class {vclass!r}")
        if speed < 0:
            raise MalformedRow(line_no, "speed must be >= 0")
        if extent is not None:
            half_w, half_d = extent[0] / 2.0, extent[1] / 2.0
            if abs(x) > half_w or abs(y) > half_d:
                raise OutOfBounds(f"line {line_no}: position ({x}, {y}) outside extent")
        if vid in last_time and time < last_time[vid]:
            raise NonMonotonicTime(f"vehicle {vid} goes back in time at line {line_no}")
        last_time[vid] = time
        records.append(TraceRecord(time, vid, x, y, speed, vclass))
    return MobilityTrace(tuple(records))


def serialize_trace(trace: MobilityTrace, target=None) -> str:
    """Write the canonical CSV form; ingest(serialize(t)) == t."""
    buf = io.StringIO()
    buf.write(_TRACE_HEADER + "\n")
    for r in trace.records:
        buf.write(f"{r.time!r},{r.vehicle_id},{r.x!r},{r.y!r},{r.speed!r},{r.vclass}\n")
    text = buf.getvalue()
    if target is not None:
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", encoding="utf-8") as fh:
                fh.write(text)
    return text


@dataclass(frozen=True)
class MobilityConfig:
    n_vehicles: int = 60
    duration_s: int = 400
    car_fraction: float = 0.3
    car_speed: tuple[float, float] = (12.5, 13.5)
    bus_speed: tuple[float, float] = (7.75, 8.25)


def synth_mobility(
    world: WorldLayout,
    n_vehicles: int,
    duration_s: int,
    seed: int,
    config: MobilityConfig | None = None,
) -> MobilityTrace:
    """Random-waypoint traffic sampled at 1 Hz, avoiding blocker footprints.

    Car/bus counts follow the configured ratio exactly (rounded), and the
    class speed ranges are centered so the fleet mean lands on 9.5 m/s at
    the default 3:7 mix.
    """
    cfg = config or MobilityConfig()
    area = world.extent[0] * world.extent[1]
    if n_vehicles > area / 10.0:
        raise ContractViolation("vehicle density infeasible for this world size")
    half_w, half_d = world.extent[0] / 2.0, world.extent[1] / 2.0
    n_cars = int(round(cfg.car_fraction * n_vehicles))

    def free_point(rng):
        for _ in range(100):
            x = rng.uniform(-half_w, half_w)
            y = rng.uniform(-half_d, half_d)
            if not any(b.contains_xy(x, y) for b in world.blockers):
                return np.array([x, y])
        return np.array([x, y])

    records = []
    for i in range(n_vehicles):
        vclass = "car" if i < n_cars else "bus"
        rng = np.random.default_rng(derive_seed(seed, f"vehicle:{i}"))
        lo, hi = cfg.car_speed if vclass == "car" else cfg.bus_speed
        speed = rng.uniform(lo, hi)
        pos = free_point(rng)
        waypoint = free_point(rng)
        vid = f"v{i:03d}"
        for t in range(duration_s):
            records.append(TraceRecord(float(t), vid, float(pos[0]), float(pos[1]), speed, vclass))
            for _retry in range(50):
                delta = waypoint - pos
                dist = float(np.linalg.norm(delta))
                if dist <= speed:
                    nxt = waypoint.copy()
                    waypoint = free_point(rng)
                else:
                    nxt = pos + delta * (speed / dist)
                inside = any(b.contains_xy(nxt[0], nxt[1]) for b in world.blockers)
                if not inside:
                    pos = nxt
                    break
                waypoint = free_point(rng)  # re-plan around the blocker
    return MobilityTrace(tuple(records))


@dataclass(frozen=True)
class UeProfile:
    """UE hardware description: array geometry, codebook id, mount height."""

    array: ArrayConfig
    codebook_ref: str
    mount_heights: dict = field(default_factory=lambda: {"car": 1.5, "bus": 3.0})

    def __post_init__(self):
        if not np.allclose(self.array.orientation @ np.array([0.0, 0.0, 1.0]), [0, 0, 1], atol=1e-9):
            raise ValueError("UE arrays must be broadside-up (local +z maps to world +z)")


@dataclass(frozen=True)
class Snapshot:
    snapshot_id: str
    profile: UeProfile
    position: np.ndarray
    quadrant: Quadrant
    channel: ChannelRealization
    context: SnapshotContext


class SnapshotList(list):
    """List of snapshots; ``replacement_used`` flags short sample pools."""

    replacement_used = False


def draw_records(trace: MobilityTrace, quadrant_filter, n: int, seed: int):
    """Deterministic (vehicle, time) draw used by :func:`sample_snapshots`.

    Returns (records, replacement_used). Exposed so pipelines can learn
    which trace keys a sampling seed consumes without generating any
    channels (e.g. to carve disjoint train/eval pools).
    """
    if quadrant_filter is None:
        pool = list(trace.records)
    else:
        wanted = {Quadrant.parse(q) for q in quadrant_filter}
        pool = [r for r in trace.records if quadrant_of(r.x, r.y) in wanted]
    if not pool:
        raise EmptyFilterResult("no trace records left after quadrant filtering")
    rng = np.random.default_rng(derive_seed(seed, "draw"))
    replacement = n > len(pool)
    picks = rng.choice(len(pool), size=n, replace=replacement)
    return [pool[i] for i in picks], replacement


def sample_snapshots(
    world: WorldLayout,
    trace: MobilityTrace,
    profile: UeProfile,
    radio: RadioConfig,
    n: int,
    quadrant_filter,
    seed: int,
    *,
    channel_kwargs: dict | None = None,
) -> SnapshotList:
    """Sample n UE snapshots and generate their channels.

    Each snapshot's channel seed derives from (seed, snapshot_id), so the
    result is reproducible and independent of evaluation order.
    """
    records, replacement = draw_records(trace, quadrant_filter, n, seed)
    kwargs = channel_kwargs or {}
    half_w, half_d = world.extent[0] / 2.0, world.extent[1] / 2.0
    out = SnapshotList()
    out.replacement_used = replacement
    for rec in records:
        z = float(profile.mount_heights[rec.vclass])
        position = np.array([rec.x, rec.y, z])
        snapshot_id = f"{rec.vehicle_id}@{rec.time:.1f}"
        ue_array = profile.array.at(position)
        ch = generate_channel(
            world,
            world.bs_array,
            ue_array,
            radio,
            derive_seed(seed, f"chan:{snapshot_id}"),
            **kwargs,
        )
        ctx = SnapshotContext(
            position_rel=(
                (position[0] - world.bs_position[0]) / half_w,
                (position[1] - world.bs_position[1]) / half_d,
                (position[2] - world.bs_position[2]) / half_w,
            ),
            los_flag=int(ch.has_los),
        )
        out.append(
            Snapshot(
                snapshot_id=snapshot_id,
                profile=profile,
                position=position,
                quadrant=quadrant_of(rec.x, rec.y),
                channel=ch,
                context=ctx,
            )
        )
    return out


def snapshots_to_jsonl(snapshots, target) -> None:
    """Audit dump: one JSON object per snapshot (no channel payload)."""
    lines = []
    for s in snapshots:
        lines.append(
            json.dumps(
                {
                    "snapshot_id": s.snapshot_id,
                    "position": [float(v) for v in s.position],
                    "quadrant": s.quadrant.value,
                    "los": bool(s.channel.has_los),
                    "n_paths": len(s.channel.paths),
                },
                sort_keys=True,
            )
        )
    text = "\n".join(lines) + ("\n" if lines else "")
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)
