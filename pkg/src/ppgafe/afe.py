"""Analog chain: photodiode node, current sink, TIA, RC low-pass, OA2 gain stage.

Sign convention: ``v_out = v_ref + (i_pd - i_comp) * RF``; the output rises
with photocurrent. ``invert_polarity`` flips the sign of the current term.

The functions here are the scalar per-sample reference. Block simulation
goes through :mod:`ppgafe.kernels`, which must agree with ``step``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from .converters import IdacSpec, QuantizerSpec, dequantize

S2_VCM = "v_cm"
S2_VREF = "vref_dac"


def default_rf_spec() -> QuantizerSpec:
    """8-bit digipot, linear in code, 3.9 kOhm .. 1 MOhm."""
    return QuantizerSpec(8, 3.9e3, 1e6, "linear", inclusive_hi=True)


@dataclass(frozen=True)
class FrontEndConfig:
    supply: float = 3.3
    v_cm: float = 1.65
    rf_spec: QuantizerSpec = field(default_factory=default_rf_spec)
    rl: float = 20e3
    cl: float = 10e-6
    oa2_gain: float = 10.0
    idac_spec: IdacSpec = field(default_factory=IdacSpec.full_range)
    vref_dac_spec: Optional[QuantizerSpec] = None
    invert_polarity: bool = False

    def __post_init__(self):
        if not 0 < self.v_cm < self.supply:
            raise ValueError("v_cm must lie strictly between 0 and supply")
        if self.rl <= 0 or self.cl <= 0:
            raise ValueError("rl and cl must be > 0")
        if self.oa2_gain < 1:
            raise ValueError("oa2_gain must be >= 1")
        if self.vref_dac_spec is None:
            object.__setattr__(self, "vref_dac_spec", QuantizerSpec(10, 0.0, self.supply))

    @property
    def tau(self) -> float:
        return self.rl * self.cl

    @property
    def fc(self) -> float:
        return 1.0 / (2 * math.pi * self.tau)

    @property
    def sign(self) -> float:
        return -1.0 if self.invert_polarity else 1.0

    def rf_ohms(self, code: int) -> float:
        return dequantize(self.rf_spec, code)


@dataclass(frozen=True)
class FrontEndState:
    s1_closed: bool = False
    s2_sel: str = S2_VCM
    rf_code: int = 0
    idac_code: Optional[int] = None
    vref_code: int = 0
    v_out: float = 1.65
    v_dc: float = 1.65
    v_sig: float = 1.65
    saturated: bool = False

    def __post_init__(self):
        if self.s2_sel not in (S2_VCM, S2_VREF):
            raise ValueError(f"s2_sel must be {S2_VCM!r} or {S2_VREF!r}")
        if self.s1_closed and self.idac_code is None:
            raise ValueError("S1 cannot be closed before the current DAC code is set")


def reference_voltage(cfg: FrontEndConfig, state: FrontEndState) -> float:
    if state.s2_sel == S2_VCM:
        return cfg.v_cm
    return dequantize(cfg.vref_dac_spec, state.vref_code)


def compensation_current(cfg: FrontEndConfig, state: FrontEndState) -> float:
    if not state.s1_closed:
        return 0.0
    return cfg.idac_spec.current(state.idac_code)


def tia_output(cfg: FrontEndConfig, state: FrontEndState, i_pd: float) -> Tuple[float, bool]:
    """TIA output voltage and whether it hit a rail."""
    rf = cfg.rf_ohms(state.rf_code)
    raw = reference_voltage(cfg, state) + cfg.sign * (i_pd - compensation_current(cfg, state)) * rf
    clipped = min(max(raw, 0.0), cfg.supply)
    return clipped, clipped != raw


def lpf_step(cfg: FrontEndConfig, v_dc: float, v_out: float, dt: float) -> float:
    if dt > cfg.tau / 10:
        raise ValueError(f"dt={dt} s exceeds tau/10={cfg.tau / 10} s")
    return v_dc + (dt / cfg.tau) * (v_out - v_dc)


def oa2_output(cfg: FrontEndConfig, v_out: float) -> float:
    return min(max(cfg.v_cm + cfg.oa2_gain * (v_out - cfg.v_cm), 0.0), cfg.supply)


def step(cfg: FrontEndConfig, state: FrontEndState, i_pd: float, dt: float) -> FrontEndState:
    """One simulation tick: TIA, then low-pass, then OA2."""
    v_out, sat = tia_output(cfg, state, i_pd)
    v_dc = lpf_step(cfg, state.v_dc, v_out, dt)
    return replace(state, v_out=v_out, v_dc=v_dc, v_sig=oa2_output(cfg, v_out), saturated=sat)


def ripple_bound(amplitude: float, rf: float, f0: float, fc: float) -> float:
    """Peak ripple left on the low-pass output by an AC current of ``amplitude``."""
    return amplitude * rf / math.sqrt(1.0 + (f0 / fc) ** 2)
