"""Reverberation-time estimation and room-parameter inversion.

Backward-integrates squared impulse responses into an energy decay curve,
fits a line over a level region to estimate RT60, then inverts the Sabine
relation to get a mean wall absorption and a reflection-order budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt

from .geometry import as_vec3
from .ism import Rir

DEFAULT_FIT_REGION = (-5.0, -25.0)
DEFAULT_DC_BLOCK_HZ = 50.0
EDC_FLOOR_DB = -300.0


class InsufficientDecayError(ValueError):
    """The decay curve never reaches the requested fit region."""


class InfeasibleRoomError(ValueError):
    """Inverse Sabine produced an absorption >= 1 (room too small or too dead)."""


@dataclass(eq=False)
class EnergyDecayCurve:
    """Normalized Schroeder curve in dB: starts at 0, non-increasing."""

    values: np.ndarray
    sample_rate: int

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.shape[0]) / self.sample_rate


@dataclass(eq=False)
class CalibrationResult:
    rt60: float
    fit_region: tuple[float, float]
    fit_slope: float  # dB/s
    absorption: float
    max_order: int
    r_squared: float
    per_rir: list[tuple[float, float, float]] = field(default_factory=list)  # (rt60, slope, r2)


def dc_block(rir: Rir, cutoff_hz: float = DEFAULT_DC_BLOCK_HZ) -> Rir:
    """Zero-phase high-pass, removing sub-audio drift before RT analysis.

    Image-method renders sum same-sign arrivals, so dense late reflections
    pile up into a positive low-frequency hump that inflates the Schroeder
    integral; stripping it recovers the acoustic decay.
    """
    if cutoff_hz <= 0:
        raise ValueError(f"cutoff must be > 0, got {cutoff_hz}")
    b, a = butter(4, cutoff_hz / (rir.sample_rate / 2.0), "highpass")
    return Rir(samples=filtfilt(b, a, np.asarray(rir.samples, dtype=float)),
               sample_rate=rir.sample_rate)


def energy_decay_curve(rir: Rir, floor_db: float = EDC_FLOOR_DB) -> EnergyDecayCurve:
    """Schroeder backward integration, normalized to 0 dB at t = 0."""
    h = np.asarray(rir.samples, dtype=float)
    energy = np.cumsum((h * h)[::-1])[::-1]
    total = energy[0]
    if total <= 0.0:
        raise ValueError("RIR is silent: energy decay curve is undefined")
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(energy / total)
    return EnergyDecayCurve(values=np.maximum(db, floor_db), sample_rate=rir.sample_rate)


def estimate_rt60(edc: EnergyDecayCurve, region: tuple[float, float] = DEFAULT_FIT_REGION):
    """Linear fit of the EDC over a level region, extrapolated to -60 dB.

    Returns (rt60_seconds, slope_db_per_s, r_squared). `region` is
    (start_dB, end_dB) with start > end, e.g. (-5, -25).
    """
    db_start, db_end = region
    if db_start <= db_end:
        raise ValueError(f"fit region must have start > end, got {region}")
    values = edc.values
    sel = (values <= db_start) & (values >= db_end)
    if values.min() > db_end or sel.sum() < 2:
        raise InsufficientDecayError(
            f"decay curve never spans [{db_end}, {db_start}] dB (min {values.min():.1f} dB)"
        )
    t = np.nonzero(sel)[0] / edc.sample_rate
    y = values[sel]
    design = np.stack([t, np.ones_like(t)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    if slope >= 0.0:
        raise InsufficientDecayError("fit region is not decaying")
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return -60.0 / float(slope), float(slope), r_squared


def inverse_sabine(rt60: float, dims, c: float = 343.0) -> tuple[float, int]:
    """Mean absorption and reflection-order budget for a target RT60.

    alpha = (24 ln10 / c) * V / (S * rt60); the order budget is the number of
    smallest-dimension traversals that fit in the RT60 sound path.
    """
    if rt60 <= 0:
        raise ValueError(f"rt60 must be > 0, got {rt60}")
    dims = as_vec3(dims)
    if np.any(dims <= 0):
        raise ValueError(f"room dimensions must be positive, got {dims}")
    volume = float(np.prod(dims))
    surface = 2.0 * float(dims[0] * dims[1] + dims[1] * dims[2] + dims[0] * dims[2])
    alpha = (24.0 * math.log(10.0) / c) * volume / (surface * rt60)
    if alpha >= 1.0:
        raise InfeasibleRoomError(
            f"inverse Sabine needs absorption {alpha:.3f} >= 1 for rt60 {rt60} s "
            f"in a {dims} room"
        )
    max_order = int(math.ceil(c * rt60 / float(dims.min())))
    return alpha, max_order


def calibrate_room(
    rirs: list[Rir],
    dims,
    region: tuple[float, float] = DEFAULT_FIT_REGION,
    c: float = 343.0,
    dc_block_hz: float | None = DEFAULT_DC_BLOCK_HZ,
) -> CalibrationResult:
    """Median RT60 over sample RIRs, then inverse Sabine for room parameters.

    Each RIR is DC-blocked at `dc_block_hz` before backward integration
    (pass None to analyze raw samples).
    """
    if not rirs:
        raise ValueError("need at least one RIR to calibrate")
    per_rir = []
    for i, rir in enumerate(rirs):
        try:
            if dc_block_hz is not None:
                rir = dc_block(rir, dc_block_hz)
            per_rir.append(estimate_rt60(energy_decay_curve(rir), region))
        except ValueError as exc:
            raise type(exc)(f"RIR {i}: {exc}") from exc
    rt60s = sorted(est[0] for est in per_rir)
    rt60 = float(np.median(rt60s))
    alpha, max_order = inverse_sabine(rt60, dims, c)
    return CalibrationResult(
        rt60=rt60,
        fit_region=tuple(region),
        fit_slope=-60.0 / rt60,
        absorption=alpha,
        max_order=max_order,
        r_squared=float(np.median([est[2] for est in per_rir])),
        per_rir=per_rir,
    )
