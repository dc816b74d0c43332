"""Synthetic scan datasets with binomial shot noise.

Ground-truth beam parameters plus a position/duration grid produce the
same CSV-shaped datasets the fitter consumes, so the full analysis chain
can be exercised end to end with known answers.

Randomness is counter-based (Philox keyed per record), not sequential:
the draw for record (beam k, position i, duration j) depends only on the
seed and those indices, so datasets are reproducible regardless of
generation order and beams never share draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .rabi_model import BeamProfileParams, SpamModel, apply_spam, p_excited
from .scan_fit import ScanDataset, ScanRecord

__all__ = ["SynthConfig", "generate", "position_jitter", "default_scan_grid"]

#: High bit tags the jitter stream so it never collides with record draws.
_JITTER_TAG = 1 << 63

_BEAM_LABELS = ("A", "B")


def _point_rng(seed: int, tag: int) -> np.random.Generator:
    key = np.array([seed, tag], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _record_tag(beam: int, i_pos: int, j_dur: int) -> int:
    if not (0 <= i_pos < 1 << 20 and 0 <= j_dur < 1 << 20):
        raise ValueError("grid too large for the record keying scheme (>= 2^20 points)")
    return (beam << 40) | (i_pos << 20) | j_dur


def _strictly_increasing(values: tuple[float, ...], name: str) -> None:
    if not values:
        raise ValueError(f"{name} must be non-empty")
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"{name} must be finite")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} must be strictly increasing")


@dataclass(frozen=True)
class SynthConfig:
    """Recipe for a synthetic dataset; one or two ground-truth beams."""

    truth: tuple[BeamProfileParams, ...]
    positions_um: tuple[float, ...]
    durations_s: tuple[float, ...]
    shots: int = 200
    spam: SpamModel = field(default_factory=SpamModel)
    rng_seed: int = 0
    analytic: bool = False  # exact probabilities, no shot noise

    def __post_init__(self):
        truth = self.truth
        if isinstance(truth, BeamProfileParams):
            truth = (truth,)
        truth = tuple(truth)
        if not 1 <= len(truth) <= 2:
            raise ValueError(f"truth must hold 1 or 2 beams, got {len(truth)}")
        for beam in truth:
            if not isinstance(beam, BeamProfileParams):
                raise TypeError(f"truth entries must be BeamProfileParams, got {type(beam).__name__}")
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "positions_um", tuple(float(v) for v in self.positions_um))
        object.__setattr__(self, "durations_s", tuple(float(v) for v in self.durations_s))
        _strictly_increasing(self.positions_um, "positions_um")
        _strictly_increasing(self.durations_s, "durations_s")
        if self.durations_s[0] < 0:
            raise ValueError("durations_s must be >= 0")
        if self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")
        if not (isinstance(self.rng_seed, int) and 0 <= self.rng_seed < 1 << 64):
            raise ValueError("rng_seed must be an integer in [0, 2^64)")


def generate(config: SynthConfig) -> list[ScanDataset]:
    """One dataset per ground-truth beam (labels A, B), same grid for all.

    Each record's p1 is the SPAM-adjusted model probability; with
    ``analytic`` it is stored exactly, otherwise it is a binomial draw of
    ``shots`` shots divided by the shot count.
    """
    datasets = []
    for k, beam in enumerate(config.truth):
        records = []
        for i, x in enumerate(config.positions_um):
            for j, t in enumerate(config.durations_s):
                p = float(apply_spam(p_excited(beam, x, t), config.spam))
                if config.analytic:
                    p1 = min(max(p, 0.0), 1.0)
                else:
                    rng = _point_rng(config.rng_seed, _record_tag(k, i, j))
                    p1 = rng.binomial(config.shots, p) / config.shots
                records.append(ScanRecord(x, t, p1, config.shots))
        datasets.append(ScanDataset(records=tuple(records), beam_label=_BEAM_LABELS[k]))
    return datasets


def position_jitter(data: ScanDataset, resolution_um: float, rng_seed: int = 0) -> ScanDataset:
    """Blur the *recorded* positions by uniform noise of one resolution step.

    Models a stage readout of finite resolution: each record's position is
    shifted by an independent uniform draw in [-resolution/2, +resolution/2]
    while the measured p1 stays tied to the true position. Draws are keyed
    by record index, so a given (seed, dataset shape) always jitters the
    same way.
    """
    if resolution_um < 0 or not math.isfinite(resolution_um):
        raise ValueError(f"resolution_um must be finite and >= 0, got {resolution_um}")
    if resolution_um == 0:
        return replace(data, position_resolution_um=0.0)
    half = 0.5 * resolution_um
    records = []
    for idx, rec in enumerate(data.records):
        rng = _point_rng(rng_seed, _JITTER_TAG | idx)
        offset = rng.uniform(-half, half)
        records.append(replace(rec, position_um=rec.position_um + offset))
    return ScanDataset(
        records=tuple(records),
        beam_label=data.beam_label,
        position_resolution_um=resolution_um,
    )


def default_scan_grid(
    truth: BeamProfileParams | Sequence[BeamProfileParams],
    n_positions: int = 61,
    n_durations: int = 21,
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Grid covering every beam: centers +- 3 w0, three slow-beam periods.

    61 positions over a single beam's 6 w0 span step at w0/10; durations
    run from zero through three full oscillation periods of the slowest
    beam. For two beams the position span widens to cover both envelopes
    (the count grows to keep the step at the narrowest w0/10 if needed).
    """
    beams = (truth,) if isinstance(truth, BeamProfileParams) else tuple(truth)
    if not beams:
        raise ValueError("need at least one beam")
    if n_positions < 2 or n_durations < 2:
        raise ValueError("need at least 2 positions and 2 durations")
    lo = min(b.center_um - 3.0 * b.width_um for b in beams)
    hi = max(b.center_um + 3.0 * b.width_um for b in beams)
    step_cap = min(b.width_um for b in beams) / 10.0
    n_pos = max(n_positions, int(math.ceil((hi - lo) / step_cap)) + 1)
    positions = tuple(float(v) for v in np.linspace(lo, hi, n_pos))
    t_max = 3.0 * 2.0 * math.pi / min(b.omega0 for b in beams)
    durations = tuple(float(v) for v in np.linspace(0.0, t_max, n_durations))
    return positions, durations
