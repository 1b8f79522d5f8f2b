"""DFT-grid beamforming codebooks and their direction metadata.

Beam (i1, i2) of an oversampled DFT codebook applies per-element phase
2*pi*(m*i1/(O1*rows) + n*i2/(O2*cols)). With half-wavelength spacing the
wrapped spatial frequencies (psi1, psi2) map to a pointing direction via
u_x = 2*psi1, u_y = 2*psi2, u_z = sqrt(1 - u_x^2 - u_y^2). Grid points
with u_x^2 + u_y^2 > 1 have no physical pointing direction; such beams
are kept but flagged, and their stored direction is the unit-circle
projection.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .errors import NotEnoughVisibleBeams


class CodebookKind(enum.Enum):
    DFT = "dft"
    OVERSAMPLED_SUBSET = "oversampled_subset"
    COARSE_LEVEL = "coarse_level"
    CHILDREN_SET = "children_set"


def wrap_frequency(x: float) -> float:
    """Wrap a spatial frequency into [-1/2, 1/2)."""
    return (x + 0.5) % 1.0 - 0.5


def _grid_frequencies(indices, rows, cols, oversampling):
    i1, i2 = indices
    o1, o2 = oversampling
    return wrap_frequency(i1 / (o1 * rows)), wrap_frequency(i2 / (o2 * cols))


def _freq_to_direction(psi1: float, psi2: float):
    ux, uy = 2.0 * psi1, 2.0 * psi2
    r2 = ux * ux + uy * uy
    flagged = r2 > 1.0
    if flagged:
        scale = 1.0 / np.sqrt(r2)
        ux, uy, uz = ux * scale, uy * scale, 0.0
    else:
        uz = np.sqrt(max(0.0, 1.0 - r2))
    az = float(np.arctan2(uy, ux))
    el = float(np.arcsin(min(1.0, uz)))
    return (az, el), flagged


def beam_direction(indices, rows, cols, oversampling=(1, 1)) -> tuple[float, float]:
    """Mean (azimuth, elevation) a DFT-grid beam points toward.

    Invisible grid points are projected onto the unit circle (elevation 0).
    """
    direction, _ = _freq_to_direction(*_grid_frequencies(indices, rows, cols, oversampling))
    return direction


def is_visible(indices, rows, cols, oversampling=(1, 1)) -> bool:
    _, flagged = _freq_to_direction(*_grid_frequencies(indices, rows, cols, oversampling))
    return not flagged


@dataclass(frozen=True)
class Beam:
    """One beamforming vector with its direction metadata."""

    weights: np.ndarray
    direction: tuple[float, float]
    source_index: tuple[int, int]
    parent_id: int | None = None
    flagged: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex)
        if abs(np.linalg.norm(w) - 1.0) > 1e-12:
            raise ValueError("beam weights must be unit-norm")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class Codebook:
    beams: tuple[Beam, ...]
    array_rows: int
    array_cols: int
    oversampling: tuple[int, int] = (1, 1)
    kind: CodebookKind = CodebookKind.DFT

    def __post_init__(self):
        object.__setattr__(self, "beams", tuple(self.beams))
        n = self.array_rows * self.array_cols
        for b in self.beams:
            if len(b.weights) != n:
                raise ValueError("beam length does not match array size")
        indices = [b.source_index for b in self.beams]
        if len(set(indices)) != len(indices):
            raise ValueError("duplicate (i1, i2) beam indices")
        o1, o2 = self.oversampling
        if len(self.beams) > o1 * self.array_rows * o2 * self.array_cols:
            raise ValueError("more beams than the oversampled grid holds")

    def __len__(self) -> int:
        return len(self.beams)

    def weight_matrix(self) -> np.ndarray:
        """Column-stacked beam weights, shape (rows*cols, n_beams)."""
        return np.stack([b.weights for b in self.beams], axis=1)

    def directions(self) -> np.ndarray:
        return np.array([b.direction for b in self.beams])

    def visible_indices(self) -> list[int]:
        return [i for i, b in enumerate(self.beams) if not b.flagged]


def dft_codebook(rows: int, cols: int, oversampling=(1, 1)) -> Codebook:
    """Full (optionally oversampled) DFT codebook, row-major in (i1, i2)."""
    o1, o2 = oversampling
    if rows < 1 or cols < 1 or o1 < 1 or o2 < 1:
        raise ValueError("rows, cols, and oversampling factors must be >= 1")
    n = rows * cols
    m = np.arange(rows)
    ncol = np.arange(cols)
    beams = []
    for i1 in range(o1 * rows):
        col_phase_m = np.exp(2j * np.pi * m * i1 / (o1 * rows))
        for i2 in range(o2 * cols):
            col_phase_n = np.exp(2j * np.pi * ncol * i2 / (o2 * cols))
            weights = np.outer(col_phase_m, col_phase_n).ravel() / np.sqrt(n)
            direction, flagged = _freq_to_direction(
                *_grid_frequencies((i1, i2), rows, cols, oversampling)
            )
            beams.append(
                Beam(weights=weights, direction=direction, source_index=(i1, i2), flagged=flagged)
            )
    return Codebook(tuple(beams), rows, cols, (o1, o2), CodebookKind.DFT)


def random_subset(cb: Codebook, count: int, seed: int) -> Codebook:
    """Uniform sample of `count` visible beams, canonically (i1, i2)-ordered."""
    eligible = cb.visible_indices()
    if count > len(eligible):
        raise NotEnoughVisibleBeams(
            f"requested {count} beams but only {len(eligible)} are visible"
        )
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(eligible), size=count, replace=False)
    chosen = sorted((eligible[i] for i in picked), key=lambda i: cb.beams[i].source_index)
    return Codebook(
        tuple(cb.beams[i] for i in chosen),
        cb.array_rows,
        cb.array_cols,
        cb.oversampling,
        CodebookKind.OVERSAMPLED_SUBSET,
    )


def coarse_codebook(rows: int, cols: int) -> Codebook:
    """Four wide beams: critically sampled 2x2 DFT on the top-left
    subarray, zero-padded to the full aperture and renormalized.

    The beams sit at spatial frequencies {0, -1/2} per axis; their
    response crossovers fall at +-1/4, exactly the cell boundaries used
    by :func:`assign_children`, so the stage-1 winner is the cell that
    holds the strongest fine beams.
    """
    if rows < 2 or cols < 2 or rows % 2 or cols % 2:
        raise ValueError("hierarchical construction needs even rows, cols >= 2")
    beams = []
    for i1 in range(2):
        for i2 in range(2):
            w = np.zeros((rows, cols), dtype=complex)
            for m in range(2):
                for nn in range(2):
                    w[m, nn] = np.exp(1j * np.pi * (m * i1 + nn * i2))
            flat = w.ravel()
            flat = flat / np.linalg.norm(flat)
            psi1 = wrap_frequency(i1 / 2.0)
            psi2 = wrap_frequency(i2 / 2.0)
            direction, flagged = _freq_to_direction(psi1, psi2)
            beams.append(
                Beam(weights=flat, direction=direction, source_index=(i1, i2), flagged=flagged)
            )
    return Codebook(tuple(beams), rows, cols, (1, 1), CodebookKind.COARSE_LEVEL)


def _cell_of(psi: float) -> int:
    # Cell per axis: the inner interval [-1/4, 1/4) belongs to the
    # frequency-0 coarse beam, the wrapped outer interval to the -1/2 one.
    return 0 if -0.25 <= psi < 0.25 else 1


def assign_children(fine: Codebook) -> dict[int, list[int]]:
    """Map each fine beam to the coarse frequency cell containing it.

    Keys are coarse beam indices (row-major over the 2x2 coarse grid);
    the value lists partition range(len(fine)).
    """
    children: dict[int, list[int]] = {i: [] for i in range(4)}
    for idx, beam in enumerate(fine.beams):
        psi1, psi2 = _grid_frequencies(
            beam.source_index, fine.array_rows, fine.array_cols, fine.oversampling
        )
        coarse_idx = _cell_of(psi1) * 2 + _cell_of(psi2)
        children[coarse_idx].append(idx)
    return children


def hierarchical_codebook(rows: int, cols: int) -> tuple[Codebook, dict[int, list[int]]]:
    """Two-level hierarchy over the critically sampled DFT codebook.

    Returns the 4-beam coarse codebook and the children map into
    ``dft_codebook(rows, cols)``; every fine beam has exactly one parent.
    """
    coarse = coarse_codebook(rows, cols)
    fine = dft_codebook(rows, cols)
    return coarse, assign_children(fine)


def codebook_to_json(cb: Codebook) -> str:
    doc = {
        "rows": cb.array_rows,
        "cols": cb.array_cols,
        "oversampling": list(cb.oversampling),
        "kind": cb.kind.value,
        "beams": [
            {
                "i1": b.source_index[0],
                "i2": b.source_index[1],
                "az": b.direction[0],
                "el": b.direction[1],
                "weights_re": [float(x) for x in b.weights.real],
                "weights_im": [float(x) for x in b.weights.imag],
            }
            for b in cb.beams
        ],
    }
    return json.dumps(doc, sort_keys=True)


def codebook_from_json(text: str) -> Codebook:
    doc = json.loads(text)
    rows, cols = doc["rows"], doc["cols"]
    oversampling = tuple(doc["oversampling"])
    kind = CodebookKind(doc["kind"])
    beams = []
    for entry in doc["beams"]:
        idx = (entry["i1"], entry["i2"])
        weights = np.array(entry["weights_re"]) + 1j * np.array(entry["weights_im"])
        if kind is CodebookKind.COARSE_LEVEL:
            flagged = False
        else:
            flagged = not is_visible(idx, rows, cols, oversampling)
        beams.append(
            Beam(
                weights=weights,
                direction=(entry["az"], entry["el"]),
                source_index=idx,
                flagged=flagged,
            )
        )
    return Codebook(tuple(beams), rows, cols, oversampling, kind)
