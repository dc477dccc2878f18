"""Continuous offset cancellation reference.

A DC servo that keeps nulling the TIA output through a low-pass in the
feedback path is, from the TIA output to the pre-gain node, a single-pole
high-pass at the servo cutoff. It is modeled at that behavioral level: a
low-pass state tracks the input and the difference is amplified by OA2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class ContinuousCancelConfig:
    fc_hp: float = 0.8
    rf_ohms: float = 1e6
    oa2_gain: float = 10.0
    v_cm: float = 1.65
    supply: float = 3.3

    def __post_init__(self):
        if not self.fc_hp > 0:
            raise ValueError("fc_hp must be > 0")
        if self.rf_ohms <= 0 or self.oa2_gain < 1:
            raise ValueError("rf_ohms must be > 0 and oa2_gain >= 1")

    @property
    def tau(self) -> float:
        return 1.0 / (2 * math.pi * self.fc_hp)

    def check_dt(self, dt: float) -> None:
        if dt > 1.0 / (20 * self.fc_hp):
            raise ValueError(f"dt={dt} s too coarse for fc_hp={self.fc_hp} Hz")


@dataclass(frozen=True)
class BaselineState:
    lpf: float


def continuous_cancel_step(cfg: ContinuousCancelConfig, state: BaselineState,
                           v_out: float, dt: float):
    """Advance one sample; returns ``(new_state, v_sig_baseline)``."""
    cfg.check_dt(dt)
    lpf = state.lpf + (dt / cfg.tau) * (v_out - state.lpf)
    v = cfg.v_cm + cfg.oa2_gain * (v_out - lpf)
    return BaselineState(lpf), min(max(v, 0.0), cfg.supply)


def continuous_cancel(cfg: ContinuousCancelConfig, v_in, dt: float, lpf0=None):
    """Run the baseline over a whole series.

    ``lpf0`` defaults to the first input sample, i.e. the servo has
    already settled when the record starts.
    """
    cfg.check_dt(dt)
    x = np.ascontiguousarray(v_in, dtype=float)
    out = np.empty_like(x)
    if x.size == 0:
        return out
    y0 = float(x[0]) if lpf0 is None else float(lpf0)
    kernels.highpass_block(x, dt / cfg.tau, y0, cfg.oa2_gain, cfg.v_cm, cfg.supply, out)
    return out


def baseline_input(cfg: ContinuousCancelConfig, i_pd, sign: float = 1.0):
    """Unclipped TIA voltage seen by the servo (the servo keeps the TIA out of the rails)."""
    return cfg.v_cm + sign * np.asarray(i_pd, dtype=float) * cfg.rf_ohms


def highpass_response(fc_hp: float, f: float):
    """Analytic single-pole high-pass: (magnitude, phase lead in degrees)."""
    r = f / fc_hp
    return r / math.sqrt(1 + r * r), math.degrees(math.atan(fc_hp / f))
