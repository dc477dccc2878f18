"""Scenario runner: stimulus -> front end + firmware (+ baseline) -> trace."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .afe import FrontEndConfig
from .baseline import ContinuousCancelConfig, baseline_input, continuous_cancel
from .controller import CALIBRATING, CalibrationConfig, Controller, Event, Phase
from .converters import AdcSpec
from .plant import FrontEndPlant
from .signals import PhotocurrentScenario, offset_current, synthesize

TRACE_COLUMNS = (
    "time_s", "i_pd_A", "i_ac_truth_A", "i_offset_truth_A", "idac_code", "rf_code",
    "vref_code", "v_out_V", "v_dc_V", "v_sig_V", "v_sig_baseline_V", "phase",
    "in_calibration", "saturated",
)


@dataclass(frozen=True)
class SimConfig:
    scenario: PhotocurrentScenario = field(default_factory=PhotocurrentScenario)
    afe: FrontEndConfig = field(default_factory=FrontEndConfig)
    adc: AdcSpec = field(default_factory=AdcSpec)
    adc_noise_rms: float = 0.0
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    baseline: ContinuousCancelConfig = field(default_factory=ContinuousCancelConfig)


@dataclass
class SimTrace:
    dt: float
    v_cm: float
    oa2_gain: float
    f0: float
    time: np.ndarray
    i_pd: np.ndarray
    i_ac: np.ndarray
    i_offset: np.ndarray
    idac_code: np.ndarray
    rf_code: np.ndarray
    rf_ohms: np.ndarray
    vref_code: np.ndarray
    v_out: np.ndarray
    v_dc: np.ndarray
    v_sig: np.ndarray
    v_sig_baseline: np.ndarray
    phase: np.ndarray
    saturated: np.ndarray
    events: List[Event] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    sign: float = 1.0
    baseline_scale: float = 1.0

    @property
    def in_calibration(self) -> np.ndarray:
        return np.isin(self.phase, [int(p) for p in CALIBRATING])

    def monitor_segments(self) -> List[Tuple[int, int]]:
        """``[start, stop)`` index ranges of contiguous MONITOR samples."""
        m = (self.phase == int(Phase.MONITOR)).astype(np.int8)
        edges = np.diff(np.concatenate(([0], m, [0])))
        return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))

    def analysis_window(self, skip: float = 0.0) -> Optional[Tuple[int, int]]:
        """Last MONITOR segment (or the whole run if the controller never
        calibrated), minus ``skip`` seconds at its start, trimmed from the
        front to a whole number of AC periods."""
        segs = self.monitor_segments()
        if segs:
            start, stop = segs[-1]
        elif not self.in_calibration.any():
            start, stop = 0, self.time.size
        else:
            return None
        start += int(round(skip / self.dt))
        if self.f0 > 0:
            per = 1.0 / (self.f0 * self.dt)
            beats = int((stop - start) / per)
            if beats < 1:
                return None
            start = stop - int(round(beats * per))
        return (start, stop) if stop - start > 1 else None

    def writes_in(self, start: int, stop: int) -> int:
        t0, t1 = self.time[start], self.time[stop - 1]
        return sum(1 for e in self.events if e.kind == "WRITE" and t0 <= e.time <= t1)

    def write_csv(self, path) -> None:
        names = np.array([p.name for p in Phase])
        g = lambda col: [format(x, ".9g") for x in np.asarray(col, dtype=float).tolist()]
        i = lambda col: [str(x) for x in np.asarray(col).astype(int).tolist()]
        columns = (
            g(self.time), g(self.i_pd), g(self.i_ac), g(self.i_offset),
            i(self.idac_code), i(self.rf_code), i(self.vref_code),
            g(self.v_out), g(self.v_dc), g(self.v_sig), g(self.v_sig_baseline),
            names[self.phase].tolist(), i(self.in_calibration), i(self.saturated != 0),
        )
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            fh.writelines(",".join(row) + "\n" for row in zip(*columns))

    def write_events(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            for e in self.events:
                fh.write(f"{e.time:.6f}\t{e.kind}\t{e.detail}\n")
            for w in self.warnings:
                fh.write(f"{0.0:.6f}\tWARNING\t{w}\n")


def run_simulation(sim: SimConfig) -> SimTrace:
    sc = sim.scenario
    afe = sim.afe
    cal = sim.calibration
    cal.validate(afe, sim.adc, sc.dt)
    warnings = []
    msg = cal.ripple_warning(afe, sc.ac.amplitude_peak, sc.ac.f0)
    if msg and cal.enabled:
        warnings.append(msg)

    i_pd, parts = synthesize(sc)
    rf0 = cal.rf_initial_code if cal.enabled else cal.fixed_rf_code
    plant = FrontEndPlant(afe, sim.adc, i_pd, sc.dt, sim.adc_noise_rms, sc.rng_seed, rf_code=rf0)
    ctrl = Controller(plant, cal)
    state = ctrl.run()

    bl = sim.baseline
    v_base = continuous_cancel(bl, baseline_input(bl, i_pd, afe.sign), sc.dt)
    return SimTrace(
        dt=sc.dt, v_cm=afe.v_cm, oa2_gain=afe.oa2_gain,
        f0=sc.ac.f0 if sc.ac.amplitude_peak > 0 else 0.0,
        time=sc.time(), i_pd=i_pd, i_ac=parts["ac"], i_offset=offset_current(parts),
        idac_code=plant.idac_codes, rf_code=plant.rf_codes,
        rf_ohms=np.asarray(afe.rf_ohms(plant.rf_codes)),
        vref_code=plant.vref_codes, v_out=plant.v_out, v_dc=plant.v_dc, v_sig=plant.v_sig,
        v_sig_baseline=v_base, phase=plant.phases, saturated=plant.flags,
        events=state.event_log, warnings=warnings,
        sign=afe.sign, baseline_scale=afe.sign * bl.rf_ohms * bl.oa2_gain,
    )
