"""Spectral efficiency and relative-drop statistics.

The reporting convention everywhere: each method is scored per snapshot
by its relative SE drop versus the zero-overhead genie selection,
100 * (se_genie - se_method) / se_genie, summarized by the arithmetic
mean and the nearest-rank 90th percentile. Outage snapshots (no
propagation path) count as a 100% drop for every method and are tallied
separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, RadioConfig, subcarrier_pair_powers
from .errors import ContractViolation


@dataclass(frozen=True)
class SnapshotScore:
    snapshot_id: str
    method: str
    se_bps_hz: float
    rel_drop_pct: float

    def __post_init__(self):
        if not -1e-9 <= self.rel_drop_pct <= 100.0 + 1e-9:
            raise ValueError("rel_drop_pct must lie in [0, 100]")


@dataclass(frozen=True)
class MethodSummary:
    method: str
    mean_drop_pct: float
    p90_drop_pct: float
    n_snapshots: int
    outage_count: int


def noise_power_dbm(radio: RadioConfig, bandwidth_hz: float) -> float:
    """Thermal noise power over one subcarrier, including the noise figure."""
    return radio.noise_psd_dbm_hz + 10.0 * np.log10(bandwidth_hz) + radio.noise_figure_db


def spectral_efficiency(ch: ChannelRealization, f_tx, w_rx, radio: RadioConfig) -> float:
    """Subcarrier-averaged log2(1 + SNR_k) in bits/s/Hz.

    SNR is per subcarrier: received power over noise integrated across
    one subcarrier bandwidth.
    """
    if ch.is_empty:
        return 0.0
    powers = subcarrier_pair_powers(ch, f_tx, w_rx)  # |w^H H_k f|^2
    rx_dbm = radio.tx_power_dbm + 10.0 * np.log10(np.maximum(powers, 1e-300))
    snr_db = rx_dbm - noise_power_dbm(radio, ch.subcarrier_spacing_hz)
    snr_lin = 10.0 ** (snr_db / 10.0)
    return float(np.mean(np.log2(1.0 + snr_lin)))


def relative_drop(se_genie: float, se_method: float) -> float:
    """Percentage drop of a method versus the genie reference.

    Clamped to [0, 100]. The genie maximizes subcarrier-averaged power,
    not log-rate, so over a frequency-selective channel another pick can
    carry marginally more SE; such inversions clamp to a 0% drop.
    """
    if se_genie < 0 or se_method < 0:
        raise ContractViolation("spectral efficiencies must be >= 0")
    if se_genie == 0.0:
        return 0.0
    return float(np.clip(100.0 * (se_genie - se_method) / se_genie, 0.0, 100.0))


def percentile_90(values) -> float:
    """Nearest-rank 90th percentile: sorted[ceil(0.9 n) - 1]."""
    vals = sorted(values)
    if not vals:
        raise ValueError("percentile of an empty list")
    rank = int(np.ceil(0.9 * len(vals)))
    return float(vals[rank - 1])


def summarize(scores, outage_ids=frozenset()) -> list[MethodSummary]:
    """Per-method mean and nearest-rank p90 of the relative drop.

    ``scores`` is a flat list of SnapshotScore; outage snapshots must
    already carry 100% drops (the experiment layer assigns them), and
    ``outage_ids`` lets the summary report how many there were.
    """
    by_method: dict[str, list[SnapshotScore]] = {}
    for s in scores:
        by_method.setdefault(s.method, []).append(s)
    summaries = []
    for method in sorted(by_method):
        group = by_method[method]
        if not group:
            raise ValueError(f"empty score group for method {method}")
        drops = [s.rel_drop_pct for s in group]
        outages = sum(1 for s in group if s.snapshot_id in outage_ids)
        summaries.append(
            MethodSummary(
                method=method,
                mean_drop_pct=float(np.mean(drops)),
                p90_drop_pct=percentile_90(drops),
                n_snapshots=len(group),
                outage_count=outages,
            )
        )
    return summaries
