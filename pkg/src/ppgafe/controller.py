"""Dual-loop discrete auto-calibration firmware.

Flow: measure the DC photocurrent at low gain (S1 open, TIA referenced to
V_cm), sink it with the current DAC, raise the TIA gain as far as the
residual allows, trim the leftover DC with the VREF DAC, then sit in a
watchdog that only re-runs the whole procedure when the low-pass output
leaves a threshold window. Outside of calibration the signal path is
never touched.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Optional, Tuple

from .afe import S2_VCM, S2_VREF, FrontEndConfig, ripple_bound
from .converters import AdcSpec, dequantize, quantize
from .plant import FrontEndPlant, ScenarioComplete

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class Phase(IntEnum):
    IDLE = 0
    COARSE_MEASURE = 1
    COARSE_SET = 2
    GAIN_RAISE = 3
    FINE_TRIM = 4
    MONITOR = 5


TRANSITIONS = {
    Phase.IDLE: {Phase.COARSE_MEASURE},
    Phase.COARSE_MEASURE: {Phase.COARSE_SET},
    Phase.COARSE_SET: {Phase.GAIN_RAISE},
    Phase.GAIN_RAISE: {Phase.FINE_TRIM},
    Phase.FINE_TRIM: {Phase.MONITOR},
    Phase.MONITOR: {Phase.COARSE_MEASURE},
}

CALIBRATING = (Phase.COARSE_MEASURE, Phase.COARSE_SET, Phase.GAIN_RAISE, Phase.FINE_TRIM)


@dataclass(frozen=True)
class CalibrationConfig:
    """Firmware tunables.

    ``fine_average_time`` is the span over which the fine loop averages one
    ADC read per tick, so AC ripple left on the low-pass output does not
    leak into the trim. ``debounce_factor`` is in low-pass time constants.
    """

    v_dc_threshold: float = 0.050
    settle_factor: float = 5.0
    rf_initial_code: int = 0
    rf_target_code: int = 255
    controller_tick: float = 0.010
    fine_loop_max_iters: int = 8
    fine_average_time: float = 1.0
    debounce: bool = True
    debounce_factor: float = 1.0
    enabled: bool = True
    fixed_rf_code: int = 255

    def validate(self, afe: FrontEndConfig, adc: AdcSpec, dt: float) -> None:
        if not self.v_dc_threshold > 4 * adc.base_lsb:
            raise ConfigError(f"controller.v_dc_threshold must exceed 4 ADC LSB "
                              f"({4 * adc.base_lsb:.4g} V)")
        if self.settle_factor < 3:
            raise ConfigError("controller.settle_factor must be >= 3")
        if self.controller_tick < dt:
            raise ConfigError("controller.controller_tick must be >= simulation dt")
        if self.fine_loop_max_iters < 1:
            raise ConfigError("controller.fine_loop_max_iters must be >= 1")
        if self.fine_average_time < 0 or self.debounce_factor < 0:
            raise ConfigError("controller times must be >= 0")
        top = afe.rf_spec.max_code
        for name in ("rf_initial_code", "rf_target_code", "fixed_rf_code"):
            if not 0 <= getattr(self, name) <= top:
                raise ConfigError(f"controller.{name} must be in [0, {top}]")
        if self.rf_target_code < self.rf_initial_code:
            raise ConfigError("controller.rf_target_code must be >= rf_initial_code")

    def ripple_warning(self, afe: FrontEndConfig, ac_amplitude: float, f0: float) -> Optional[str]:
        """Message if the threshold is below twice the worst-case AC ripple."""
        bound = ripple_bound(ac_amplitude, afe.rf_ohms(self.rf_target_code), f0, afe.fc)
        if self.v_dc_threshold < 2 * bound:
            return (f"v_dc_threshold {self.v_dc_threshold:.4g} V is below twice the "
                    f"AC ripple bound {bound:.4g} V at full gain")
        return None


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    detail: str


@dataclass
class CalibrationState:
    phase: Phase = Phase.IDLE
    latched_idc_estimate: float = math.nan
    idac_code: Optional[int] = None
    rf_code: int = 0
    vref_code: int = 0
    event_log: List[Event] = field(default_factory=list)

    @property
    def errors(self) -> List[Event]:
        return [e for e in self.event_log if e.kind == "ERROR"]


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


class Controller:
    """Calibration state machine driving a :class:`FrontEndPlant`."""

    def __init__(self, plant: FrontEndPlant, cfg: CalibrationConfig):
        self.plant = plant
        self.cfg = cfg
        self.afe = plant.afe
        self.adc = plant.adc
        self.state = CalibrationState(rf_code=plant.state.rf_code, vref_code=plant.state.vref_code)
        self._over_since: Optional[float] = None

    # -- bookkeeping -----------------------------------------------------
    @property
    def settle_time(self) -> float:
        return self.cfg.settle_factor * self.afe.tau

    def log(self, kind: str, detail: str) -> None:
        self.state.event_log.append(Event(self.plant.time, kind, detail))
        if kind in ("WARNING", "ERROR"):
            log.log(logging.WARNING if kind == "WARNING" else logging.ERROR,
                    "t=%.3f %s", self.plant.time, detail)

    def _transition(self, to: Phase) -> None:
        frm = self.state.phase
        if to not in TRANSITIONS[frm]:
            raise RuntimeError(f"illegal phase transition {frm.name} -> {to.name}")
        self.state.phase = to
        self.plant.phase = int(to)
        self.log("PHASE", f"{frm.name}->{to.name}")

    def _write_rf(self, code: int) -> None:
        self.plant.write_rf(code)
        self.state.rf_code = code
        self.log("WRITE", f"rf_code={code}")

    def _write_idac(self, code: int) -> None:
        self.plant.write_idac(code)
        self.state.idac_code = code
        self.log("WRITE", f"idac_code={code}")

    def _write_vref(self, code: int) -> None:
        self.plant.write_vref(code)
        self.state.vref_code = code
        self.log("WRITE", f"vref_code={code}")

    def _set_s1(self, closed: bool) -> None:
        if closed and self.state.idac_code is None:
            raise RuntimeError("refusing to close S1 with an unset current DAC code")
        self.plant.set_s1(closed)
        self.log("WRITE", f"s1={'closed' if closed else 'open'}")

    def _set_s2(self, sel: str) -> None:
        self.plant.set_s2(sel)
        self.log("WRITE", f"s2={sel}")

    def _read_volts(self) -> float:
        return float(self.adc.to_volts(self.plant.read_vdc()))

    def _require(self, phase: Phase) -> None:
        if self.state.phase is not phase:
            raise RuntimeError(f"expected phase {phase.name}, controller is in {self.state.phase.name}")

    # -- calibration steps -----------------------------------------------
    def _enter_measure(self) -> None:
        self._set_s1(False)
        self._set_s2(S2_VCM)
        self._write_rf(self.cfg.rf_initial_code)

    def _settled_read(self) -> Tuple[bool, float]:
        """Wait the settling time, then keep reading once per tau until two
        reads agree; a large step left over from a gain change needs more
        than the nominal settling time."""
        saturated = self.plant.wait(self.settle_time)
        v = self._read_volts()
        for _ in range(10):
            saturated |= self.plant.wait(self.afe.tau)
            v_next = self._read_volts()
            if abs(v_next - v) <= 4 * self.adc.lsb:
                return saturated, v_next
            v = v_next
        return saturated, v

    def start(self) -> None:
        """Leave IDLE and set up the coarse measurement."""
        self._transition(Phase.COARSE_MEASURE)
        self._enter_measure()

    def coarse_calibrate(self) -> Tuple[int, float]:
        """Estimate the DC photocurrent and sink it with the current DAC."""
        self._require(Phase.COARSE_MEASURE)
        while True:
            saturated, v_dc = self._settled_read()
            if not saturated:
                break
            rf_now = self.afe.rf_ohms(self.state.rf_code)
            lower = quantize(self.afe.rf_spec, rf_now / 10)
            if lower >= self.state.rf_code:
                self.log("WARNING", "TIA saturated at minimum gain during coarse measurement; "
                                    "offset estimate is a lower bound")
                break
            self.log("WARNING", f"TIA saturated during coarse measurement; RF code "
                                f"{self.state.rf_code} -> {lower}")
            self._write_rf(lower)

        rf = self.afe.rf_ohms(self.state.rf_code)
        i_est = self.afe.sign * (v_dc - self.afe.v_cm) / rf
        self.state.latched_idc_estimate = i_est
        self.log("MEASURE", f"v_dc={v_dc:.6f} i_dc_estimate={i_est:.6e}")
        self._transition(Phase.COARSE_SET)

        idac = self.afe.idac_spec
        lo, hi = idac.quant.full_scale_lo, idac.quant.full_scale_hi
        if i_est > hi:
            self.log("WARNING", f"offset estimate {i_est:.4e} A above current DAC range; clamped")
        code = idac.code_for(i_est)
        self._write_idac(code)
        # sinking the nearest DAC current must beat leaving the sink disconnected
        if abs(i_est - idac.current(code)) < abs(i_est):
            self._set_s1(True)
        else:
            if i_est > 0.5 * lo:
                self.log("WARNING", f"offset estimate {i_est:.4e} A below current DAC range")
            self.log("INFO", "current sink left disconnected")
        self._transition(Phase.GAIN_RAISE)
        return code, i_est

    def raise_gain(self) -> int:
        """Raise RF toward the target code without clipping the TIA.

        Doubles the resistance per probe; after the first clipping probe a
        bisection pins the largest non-clipping code. Each probe lasts one
        controller tick.
        """
        self._require(Phase.GAIN_RAISE)
        spec = self.afe.rf_spec
        start = good = self.state.rf_code
        target = self.cfg.rf_target_code
        bad = None
        while good < target:
            if bad is None:
                cand = min(max(quantize(spec, 2 * self.afe.rf_ohms(good)), good + 1), target)
            else:
                cand = (good + bad) // 2
                if cand == good:
                    break
            self._write_rf(cand)
            if self.plant.wait(self.cfg.controller_tick):
                bad = cand
            else:
                good = cand
        if self.state.rf_code != good:
            self._write_rf(good)
        if good == start and bad is not None:
            self.log("ERROR", "no gain increase possible without saturation; residual offset "
                              "too large for the current DAC resolution")
        self._transition(Phase.FINE_TRIM)
        return good

    def _settle_for(self, step: float, tol: float) -> float:
        """Wait for a first-order step of ``step`` volts to decay below ``tol``,
        never shorter than the configured settling time."""
        if step <= tol:
            return self.settle_time
        return max(self.settle_time, self.afe.tau * math.log(step / tol))

    def _average_volts(self, duration: float) -> float:
        n = max(1, int(round(duration / self.cfg.controller_tick)))
        total = 0
        for i in range(n):
            if i:
                self.plant.wait(self.cfg.controller_tick)
            total += self.plant.read_vdc()
        return float(self.adc.to_volts(total / n))

    def _backoff_code(self, err: float) -> int:
        """Highest RF code whose residual fits in 90 % of the VREF headroom.

        The residual current is inferred from the last measurement; if the
        TIA was clipped it is underestimated and another back-off follows.
        """
        spec = self.afe.vref_dac_spec
        v_ref = dequantize(spec, self.state.vref_code)
        rf = self.afe.rf_ohms(self.state.rf_code)
        resid = abs(self.afe.v_cm + err - v_ref) / rf
        if err > 0:
            headroom = self.afe.v_cm - spec.full_scale_lo
        else:
            headroom = dequantize(spec, spec.max_code) - self.afe.v_cm
        code = self.state.rf_code - 1
        while code > self.cfg.rf_initial_code and resid * self.afe.rf_ohms(code) > 0.9 * headroom:
            code -= 1
        return code

    def fine_trim(self) -> int:
        """Null the residual DC at the TIA output with the VREF DAC."""
        self._require(Phase.FINE_TRIM)
        spec = self.afe.vref_dac_spec
        v_cm = self.afe.v_cm
        if self.plant.state.s2_sel != S2_VREF:
            self._write_vref(quantize(spec, v_cm))
            self._set_s2(S2_VREF)
        tol = max(self.adc.lsb, 0.5 * spec.lsb)
        err = math.nan
        tried = {}
        # the gain step just taken may have moved v_out by up to half the supply
        step = 0.5 * self.afe.supply
        for _ in range(self.cfg.fine_loop_max_iters):
            self.plant.wait(self._settle_for(step, 0.25 * spec.lsb))
            err = self._average_volts(self.cfg.fine_average_time) - v_cm
            if abs(err) <= tol:
                self._transition(Phase.MONITOR)
                return self.state.vref_code
            tried[(self.state.rf_code, self.state.vref_code)] = abs(err)
            want = self.state.vref_code - _round_half_away(err / spec.lsb)
            new = min(max(want, 0), spec.max_code)
            if new != self.state.vref_code and (self.state.rf_code, new) in tried:
                # the ideal code sits on a half-LSB boundary: keep the better neighbour
                best = min((e, c) for (rf, c), e in tried.items() if rf == self.state.rf_code)[1]
                self.log("INFO", f"fine trim bracketed between VREF codes "
                                 f"{self.state.vref_code} and {new}; keeping {best}")
                if best != self.state.vref_code:
                    self._write_vref(best)
                self._transition(Phase.MONITOR)
                return self.state.vref_code
            if new != self.state.vref_code:
                step = abs(new - self.state.vref_code) * spec.lsb
                self._write_vref(new)
            elif self.state.rf_code > self.cfg.rf_initial_code:
                lower = self._backoff_code(err)
                self.log("WARNING", f"VREF DAC out of range (residual {err:+.4f} V); "
                                    f"backing RF off from code {self.state.rf_code} to {lower}")
                step = 0.5 * self.afe.supply
                self._write_rf(lower)
            else:
                self.log("ERROR", f"residual {err:+.4f} V beyond VREF DAC range; "
                                  f"vref_code held at {new}")
                break
        else:
            self.log("ERROR", f"fine trim did not converge in {self.cfg.fine_loop_max_iters} "
                              f"iterations; residual {err:+.4f} V")
        self._transition(Phase.MONITOR)
        return self.state.vref_code

    def calibrate(self) -> None:
        self.coarse_calibrate()
        self.raise_gain()
        self.fine_trim()
        self._over_since = None

    # -- watchdog ---------------------------------------------------------
    def monitor_tick(self) -> None:
        """One watchdog tick: read V_dc, maybe trigger recalibration, wait a tick."""
        self._require(Phase.MONITOR)
        now = self.plant.time
        over = abs(self._read_volts() - self.afe.v_cm) > self.cfg.v_dc_threshold
        if not over:
            self._over_since = None
        else:
            if self._over_since is None:
                self._over_since = now
            hold = self.cfg.debounce_factor * self.afe.tau if self.cfg.debounce else 0.0
            if now - self._over_since >= hold - 1e-9:
                self.log("RECAL", f"|v_dc - v_cm| above {self.cfg.v_dc_threshold:.4g} V "
                                  f"since t={self._over_since:.3f} s")
                self._over_since = None
                self._transition(Phase.COARSE_MEASURE)
                self._enter_measure()
                return
        self.plant.wait(self.cfg.controller_tick)

    def run(self) -> CalibrationState:
        """Drive the plant until its stimulus is exhausted."""
        try:
            if not self.cfg.enabled:
                while True:
                    self.plant.wait(self.plant.n_samples * self.plant.dt)
            self.start()
            while True:
                if self.state.phase is Phase.COARSE_MEASURE:
                    self.calibrate()
                self.monitor_tick()
        except ScenarioComplete:
            pass
        return self.state
