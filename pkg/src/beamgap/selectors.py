"""Beam-selection strategies and sweep-overhead accounting.

Four ways to pick a (BS beam, UE beam) pair for one channel snapshot:

* genie: global RSRP argmax, zero measurement cost (the reference);
* exhaustive search: same argmax, pays one measurement per UE beam (the
  BS side is assumed to know its best beam, so only the UE sweeps);
* hierarchical search: sweeps 4 wide coarse beams, then the winning
  cell's children;
* predictor-backed: ranks UE beams by a trained direction regressor,
  measuring nothing.

All ties break toward the lowest (bs_index, ue_index) pair so results
are bit-stable. On an empty channel every strategy returns beam pair
(0, 0) with RSRP -inf.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelRealization, RadioConfig, pair_power_matrix
from .codebooks import Codebook
from .errors import ContractViolation


@dataclass(frozen=True)
class SelectionResult:
    ue_beam_index: int
    bs_beam_index: int
    measured_pairs: int
    rsrp_dbm: float

    def __post_init__(self):
        if self.measured_pairs < 0:
            raise ValueError("measured_pairs must be >= 0")


@dataclass(frozen=True)
class OverheadModel:
    """Measurement cost model: symbols consumed per selection epoch."""

    symbols_per_measurement: int = 1
    frame_symbols: int = 560

    def __post_init__(self):
        if self.frame_symbols <= 0:
            raise ValueError("frame_symbols must be positive")
        if self.symbols_per_measurement < 0:
            raise ValueError("symbols_per_measurement must be >= 0")

    def overhead_fraction(self, measured_pairs: int) -> float:
        return min(1.0, measured_pairs * self.symbols_per_measurement / self.frame_symbols)


def _power_to_dbm(power: float, radio: RadioConfig) -> float:
    if power <= 0.0:
        return float("-inf")
    return radio.tx_power_dbm + 10.0 * float(np.log10(power))


def beam_pair_powers(ch: ChannelRealization, bs_cb: Codebook, ue_cb: Codebook) -> np.ndarray:
    """Linear subcarrier-averaged power for every beam pair, (B_bs, B_ue)."""
    return pair_power_matrix(ch, bs_cb.weight_matrix(), ue_cb.weight_matrix())


def genie_select(
    ch: ChannelRealization,
    bs_cb: Codebook,
    ue_cb: Codebook,
    radio: RadioConfig = RadioConfig(),
    *,
    powers: np.ndarray | None = None,
) -> SelectionResult:
    """Globally best pair at zero measurement cost."""
    if len(bs_cb) == 0 or len(ue_cb) == 0:
        raise ContractViolation("codebooks must be non-empty")
    if powers is None:
        powers = beam_pair_powers(ch, bs_cb, ue_cb)
    flat = int(np.argmax(powers))  # first max in row-major order = lowest (bs, ue)
    bs_idx, ue_idx = divmod(flat, powers.shape[1])
    return SelectionResult(
        ue_beam_index=ue_idx,
        bs_beam_index=bs_idx,
        measured_pairs=0,
        rsrp_dbm=_power_to_dbm(float(powers[bs_idx, ue_idx]), radio),
    )


def exhaustive_select(
    ch: ChannelRealization,
    bs_cb: Codebook,
    ue_cb: Codebook,
    radio: RadioConfig = RadioConfig(),
    *,
    powers: np.ndarray | None = None,
) -> SelectionResult:
    """Same pair as the genie; the UE pays one measurement per beam."""
    result = genie_select(ch, bs_cb, ue_cb, radio, powers=powers)
    return replace(result, measured_pairs=len(ue_cb))


def hierarchical_select(
    ch: ChannelRealization,
    bs_cb: Codebook,
    ue_coarse: Codebook,
    children_map: dict[int, list[int]],
    ue_fine: Codebook,
    radio: RadioConfig = RadioConfig(),
    *,
    powers_fine: np.ndarray | None = None,
    powers_coarse: np.ndarray | None = None,
) -> SelectionResult:
    """Two-level search: coarse sweep, then the winning cell's children.

    Stage 1 scores each coarse beam with the BS at its best beam for that
    coarse beam. Coarse beams with no children (possible for sparse
    random-subset codebooks) cannot win stage 1.
    """
    if powers_coarse is None:
        powers_coarse = beam_pair_powers(ch, bs_cb, ue_coarse)
    if powers_fine is None:
        powers_fine = beam_pair_powers(ch, bs_cb, ue_fine)
    stage1 = powers_coarse.max(axis=0)  # best BS beam per coarse beam
    eligible = np.array([len(children_map.get(c, [])) > 0 for c in range(len(ue_coarse))])
    if not eligible.any():
        raise ContractViolation("children map is empty; not a valid hierarchy")
    masked = np.where(eligible, stage1, -1.0)
    winner = int(np.argmax(masked))
    children = list(children_map[winner])
    sub = powers_fine[:, children]
    flat = int(np.argmax(sub))
    bs_idx, child_pos = divmod(flat, sub.shape[1])
    ue_idx = children[child_pos]
    measured = len(ue_coarse) + len(children)
    return SelectionResult(
        ue_beam_index=ue_idx,
        bs_beam_index=bs_idx,
        measured_pairs=measured,
        rsrp_dbm=_power_to_dbm(float(powers_fine[bs_idx, ue_idx]), radio),
    )


def predictor_select(
    ctx,
    ue_cb: Codebook,
    model,
    ch: ChannelRealization,
    bs_cb: Codebook,
    radio: RadioConfig = RadioConfig(),
    *,
    powers: np.ndarray | None = None,
) -> SelectionResult:
    """Pick the UE beam with the highest predicted power; measure nothing.

    ``model`` must be trained and expose
    ``predict_powers(ctx, directions) -> array``; only beam directions
    enter the prediction, so any codebook with direction metadata works.
    The BS pairs the choice with its genie-best beam, and the achieved
    RSRP comes from the true channel.
    """
    if not getattr(model, "trained", False):
        raise ContractViolation("predictor_select needs a trained model")
    predicted = np.asarray(model.predict_powers(ctx, ue_cb.directions()))
    if predicted.shape != (len(ue_cb),):
        raise ContractViolation("model returned a prediction of the wrong shape")
    ue_idx = int(np.argmax(predicted))  # first max = lowest index on ties
    if powers is None:
        powers = beam_pair_powers(ch, bs_cb, ue_cb)
    bs_idx = int(np.argmax(powers[:, ue_idx]))
    return SelectionResult(
        ue_beam_index=ue_idx,
        bs_beam_index=bs_idx,
        measured_pairs=0,
        rsrp_dbm=_power_to_dbm(float(powers[bs_idx, ue_idx]), radio),
    )


def effective_se(se_bps_hz: float, measured_pairs: int, ovh: OverheadModel) -> float:
    """Spectral efficiency after discounting the sweep's symbol budget."""
    if se_bps_hz < 0:
        raise ContractViolation("spectral efficiency must be >= 0")
    return (1.0 - ovh.overhead_fraction(measured_pairs)) * se_bps_hz
