"""Geometric single-bounce multipath channel between two UPAs.

A channel is a sparse list of propagation paths: a free-space LOS path
when nothing blocks the direct segment, plus one single-bounce path per
scatterer point that is visible from both ends. Gains follow the
free-space law lambda/(4*pi*d), scaled by a reflection coefficient for
bounced paths; the carrier phase 2*pi*d/lambda is absorbed into the
complex gain, and bounced paths additionally carry a seeded per-scatterer
reflection phase. Per-subcarrier responses use baseband frequency offsets
centered on the carrier.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .arrays import ArrayConfig, SPEED_OF_LIGHT, direction_to_unit, steering_matrix, steering_vector
from .errors import ContractViolation

DEFAULT_SUBCARRIERS = 24
DEFAULT_SUBCARRIER_SPACING_HZ = 30e3
DEFAULT_REFLECTION_COEFF = 0.3
DEFAULT_MAX_PATHS = 16


@dataclass(frozen=True)
class RadioConfig:
    """Link-budget knobs: transmit power and receiver noise."""

    tx_power_dbm: float = 20.0
    noise_figure_db: float = 10.0
    noise_psd_dbm_hz: float = -174.0

    def __post_init__(self):
        if not np.isfinite(self.tx_power_dbm):
            raise ValueError("tx_power_dbm must be finite")
        if self.noise_figure_db < 0:
            raise ValueError("noise_figure_db must be >= 0")


class PathKind(enum.Enum):
    LOS = "los"
    SINGLE_BOUNCE = "single_bounce"


@dataclass(frozen=True)
class Path:
    """One propagation path: complex gain, delay, and local-frame angles."""

    gain: complex
    delay: float
    aod: tuple[float, float]  # (azimuth, elevation) at the transmit array
    aoa: tuple[float, float]  # (azimuth, elevation) at the receive array
    kind: PathKind

    def __post_init__(self):
        if abs(self.gain) <= 0.0:
            raise ValueError("zero-gain paths must be dropped, not stored")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")


@dataclass(frozen=True)
class Box:
    """Axis-aligned blocker box (a building footprint with a height)."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    zmin: float
    zmax: float

    def __post_init__(self):
        if self.xmin > self.xmax or self.ymin > self.ymax or self.zmin > self.zmax:
            raise ValueError("box bounds out of order")

    @property
    def bounds(self) -> np.ndarray:
        return np.array(
            [[self.xmin, self.ymin, self.zmin], [self.xmax, self.ymax, self.zmax]]
        )

    def contains_xy(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def rotated_z90(self) -> "Box":
        """Box after a +90 degree rotation about the world z axis."""
        return Box(-self.ymax, -self.ymin, self.xmin, self.xmax, self.zmin, self.zmax)

    def translated(self, offset) -> "Box":
        dx, dy, dz = offset
        return Box(
            self.xmin + dx, self.xmax + dx, self.ymin + dy, self.ymax + dy,
            self.zmin + dz, self.zmax + dz,
        )


def segments_blocked(origin, targets, boxes) -> np.ndarray:
    """Whether the segment origin->target hits any box, per target.

    Slab test vectorized over targets and boxes; endpoints lying exactly
    on a box surface count as blocked.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if not boxes:
        return np.zeros(len(targets), dtype=bool)
    origin = np.asarray(origin, dtype=float)
    lo = np.array([[b.xmin, b.ymin, b.zmin] for b in boxes])  # (B, 3)
    hi = np.array([[b.xmax, b.ymax, b.zmax] for b in boxes])
    d = targets - origin  # (S, 3)
    d_safe = np.where(np.abs(d) < 1e-300, 1e-300, d)
    t1 = (lo[None, :, :] - origin) / d_safe[:, None, :]  # (S, B, 3)
    t2 = (hi[None, :, :] - origin) / d_safe[:, None, :]
    tmin = np.minimum(t1, t2).max(axis=2)
    tmax = np.maximum(t1, t2).min(axis=2)
    hit = (tmax >= np.maximum(tmin, 0.0)) & (tmin <= 1.0)
    return hit.any(axis=1)


def segment_blocked(p, q, boxes) -> bool:
    return bool(segments_blocked(p, [q], boxes)[0])


@dataclass(frozen=True)
class ChannelRealization:
    """All propagation paths between one BS/UE array pair at one instant."""

    paths: tuple[Path, ...]
    bs_array: ArrayConfig
    ue_array: ArrayConfig
    carrier_hz: float = 15e9
    subcarriers: int = DEFAULT_SUBCARRIERS
    subcarrier_spacing_hz: float = DEFAULT_SUBCARRIER_SPACING_HZ

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if self.subcarriers < 1:
            raise ValueError("subcarriers must be >= 1")

    @property
    def is_empty(self) -> bool:
        return len(self.paths) == 0

    @property
    def has_los(self) -> bool:
        return any(p.kind is PathKind.LOS for p in self.paths)

    def subcarrier_offsets(self) -> np.ndarray:
        """Baseband frequency of each subcarrier, centered on the carrier."""
        k = np.arange(self.subcarriers)
        return (k - (self.subcarriers - 1) / 2.0) * self.subcarrier_spacing_hz


def generate_channel(
    world,
    bs: ArrayConfig,
    ue: ArrayConfig,
    radio: RadioConfig,
    seed: int,
    *,
    reflection_coeff: float = DEFAULT_REFLECTION_COEFF,
    max_paths: int = DEFAULT_MAX_PATHS,
    subcarriers: int = DEFAULT_SUBCARRIERS,
    subcarrier_spacing_hz: float = DEFAULT_SUBCARRIER_SPACING_HZ,
) -> ChannelRealization:
    """Build the geometric channel for one BS/UE placement.

    ``world`` must expose ``blockers`` (list of Box), ``scatterers``
    (array of 3D points), and ``contains(point)``. The result is
    deterministic for fixed world, poses, and seed; an empty path list
    signals outage, not failure.
    """
    if not world.contains(bs.position) or not world.contains(ue.position):
        raise ContractViolation("BS and UE positions must lie inside the world bounds")
    lam = bs.wavelength
    rng = np.random.default_rng(seed)
    scatterers = np.asarray(world.scatterers, dtype=float).reshape(-1, 3)
    # One reflection phase per scatterer index, drawn up front so path
    # visibility cannot perturb the stream.
    refl_phases = rng.uniform(0.0, 2.0 * np.pi, size=len(scatterers))

    paths = []
    d_direct = float(np.linalg.norm(ue.position - bs.position))
    if d_direct > 0 and not segment_blocked(bs.position, ue.position, world.blockers):
        unit_out = (ue.position - bs.position) / d_direct
        gain = (lam / (4.0 * np.pi * d_direct)) * np.exp(-2j * np.pi * d_direct / lam)
        paths.append(
            Path(
                gain=complex(gain),
                delay=d_direct / SPEED_OF_LIGHT,
                aod=_local_direction(bs, unit_out),
                aoa=_local_direction(ue, -unit_out),
                kind=PathKind.LOS,
            )
        )

    if len(scatterers) and reflection_coeff > 0:
        seen_bs = ~segments_blocked(bs.position, scatterers, world.blockers)
        seen_ue = ~segments_blocked(ue.position, scatterers, world.blockers)
        for idx in np.nonzero(seen_bs & seen_ue)[0]:
            s = scatterers[idx]
            d1 = float(np.linalg.norm(s - bs.position))
            d2 = float(np.linalg.norm(ue.position - s))
            if d1 == 0.0 or d2 == 0.0:
                continue
            total = d1 + d2
            mag = reflection_coeff * lam / (4.0 * np.pi * total)
            phase = -2.0 * np.pi * total / lam + refl_phases[idx]
            paths.append(
                Path(
                    gain=complex(mag * np.exp(1j * phase)),
                    delay=total / SPEED_OF_LIGHT,
                    aod=_local_direction(bs, (s - bs.position) / d1),
                    aoa=_local_direction(ue, (s - ue.position) / d2),
                    kind=PathKind.SINGLE_BOUNCE,
                )
            )

    paths.sort(key=lambda p: -abs(p.gain))
    return ChannelRealization(
        paths=tuple(paths[:max_paths]),
        bs_array=bs,
        ue_array=ue,
        carrier_hz=bs.carrier_hz,
        subcarriers=subcarriers,
        subcarrier_spacing_hz=subcarrier_spacing_hz,
    )


def _local_direction(array: ArrayConfig, unit_world) -> tuple[float, float]:
    v = array.to_local(unit_world)
    el = float(np.arcsin(np.clip(v[2], -1.0, 1.0)))
    az = float(np.arctan2(v[1], v[0]))
    return az, el


def path_factors(ch: ChannelRealization):
    """Per-path steering rows and complex amplitudes for fast projections.

    Returns (A_tx, A_rx, amps, delays): A_tx is (L, N_tx), A_rx is
    (L, N_rx), and amps already carries the sqrt(N_tx*N_rx) array-gain
    factor, so w^H H_k f == sum_l amps_l * exp(-j2pi f_k tau_l)
    * (w^H a_rx_l) * (a_tx_l^H f). Cached on the (immutable) channel.
    """
    cached = getattr(ch, "_path_factors", None)
    if cached is not None:
        return cached
    L = len(ch.paths)
    n_tx, n_rx = ch.bs_array.num_elements, ch.ue_array.num_elements
    if L == 0:
        factors = (
            np.zeros((0, n_tx), dtype=complex),
            np.zeros((0, n_rx), dtype=complex),
            np.zeros(0, dtype=complex),
            np.zeros(0),
        )
    else:
        units_tx = np.array([direction_to_unit(*p.aod) for p in ch.paths])
        units_rx = np.array([direction_to_unit(*p.aoa) for p in ch.paths])
        factors = (
            steering_matrix(ch.bs_array, units_tx),
            steering_matrix(ch.ue_array, units_rx),
            np.array([p.gain for p in ch.paths]) * np.sqrt(n_tx * n_rx),
            np.array([p.delay for p in ch.paths]),
        )
    object.__setattr__(ch, "_path_factors", factors)
    return factors


def frequency_response(ch: ChannelRealization, k: int) -> np.ndarray:
    """Narrowband channel matrix (N_rx x N_tx) on subcarrier k."""
    if not 0 <= k < ch.subcarriers:
        raise IndexError(f"subcarrier index {k} out of range [0, {ch.subcarriers})")
    n_tx, n_rx = ch.bs_array.num_elements, ch.ue_array.num_elements
    h = np.zeros((n_rx, n_tx), dtype=complex)
    f_k = ch.subcarrier_offsets()[k]
    scale = np.sqrt(n_tx * n_rx)
    for p in ch.paths:
        a_tx = steering_vector(ch.bs_array, p.aod)
        a_rx = steering_vector(ch.ue_array, p.aoa)
        h += p.gain * np.exp(-2j * np.pi * f_k * p.delay) * scale * np.outer(a_rx, a_tx.conj())
    return h


def _check_unit_norm(vec, name):
    if abs(np.linalg.norm(vec) - 1.0) > 1e-9:
        raise ContractViolation(f"{name} must be unit-norm")


def subcarrier_pair_powers(ch: ChannelRealization, f_tx, w_rx) -> np.ndarray:
    """|w^H H_k f|^2 for every subcarrier k, shape (K,)."""
    a_tx, a_rx, amps, delays = path_factors(ch)
    if len(amps) == 0:
        return np.zeros(ch.subcarriers)
    proj = amps * (a_rx.conj() @ np.asarray(w_rx)).conj() * (a_tx.conj() @ np.asarray(f_tx))
    phasors = np.exp(-2j * np.pi * np.outer(ch.subcarrier_offsets(), delays))
    return np.abs(phasors @ proj) ** 2


def rsrp(ch: ChannelRealization, f_tx, w_rx, radio: RadioConfig) -> float:
    """Subcarrier-averaged received power in dBm; -inf for empty channels."""
    _check_unit_norm(f_tx, "f_tx")
    _check_unit_norm(w_rx, "w_rx")
    if ch.is_empty:
        return float("-inf")
    mean_pow = float(np.mean(subcarrier_pair_powers(ch, f_tx, w_rx)))
    if mean_pow <= 0.0:
        return float("-inf")
    return radio.tx_power_dbm + 10.0 * np.log10(mean_pow)


def pair_power_matrix(ch: ChannelRealization, f_matrix, w_matrix) -> np.ndarray:
    """Subcarrier-averaged |w_u^H H_k f_b|^2 for whole codebooks.

    ``f_matrix`` is (N_tx, B_tx) with unit-norm columns, ``w_matrix``
    likewise (N_rx, B_rx). Returns linear power, shape (B_tx, B_rx).
    Same quantity :func:`rsrp` averages, computed for all pairs at once.
    """
    f_matrix = np.asarray(f_matrix)
    w_matrix = np.asarray(w_matrix)
    a_tx, a_rx, amps, delays = path_factors(ch)
    if len(amps) == 0:
        return np.zeros((f_matrix.shape[1], w_matrix.shape[1]))
    t = amps[:, None] * (a_tx.conj() @ f_matrix)  # (L, B_tx)
    r = (a_rx.conj() @ w_matrix).conj()  # (L, B_rx)
    phasors = np.exp(-2j * np.pi * np.outer(ch.subcarrier_offsets(), delays))  # (K, L)
    acc = np.zeros((f_matrix.shape[1], w_matrix.shape[1]))
    for k in range(ch.subcarriers):
        m_k = (t * phasors[k][:, None]).T @ r  # (B_tx, B_rx)
        acc += np.abs(m_k) ** 2
    return acc / ch.subcarriers
