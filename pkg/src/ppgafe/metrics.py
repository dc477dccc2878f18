"""Fidelity and calibration metrics computed from a finished trace."""

from __future__ import annotations

from typing import Iterable, NamedTuple, Optional, Tuple

import numpy as np
from scipy.signal import correlate, correlation_lags

from .controller import Event


class Fidelity(NamedTuple):
    pearson_r: float
    lag_s: float
    amplitude_ratio: float


class CompensationTime(NamedTuple):
    seconds: float
    error: bool


def residual_dc(trace, window: Tuple[int, int]) -> float:
    """``|mean(v_out) - v_cm|`` over the sample range ``[start, stop)``."""
    start, stop = window
    if not 0 <= start < stop <= trace.time.size:
        raise ValueError(f"bad window {window}")
    if trace.in_calibration[start:stop].any():
        raise ValueError("window overlaps a calibration phase")
    return float(abs(np.mean(trace.v_out[start:stop]) - trace.v_cm))


def shape_fidelity(recovered_ac, truth_ac, dt: float, f0: Optional[float] = None,
                   scale=1.0) -> Fidelity:
    """Compare a recovered AC waveform against the ground truth.

    ``truth_ac * scale`` is the expected output (``scale`` is typically the
    path gain RF * OA2 gain, scalar or per sample). Both series are
    de-meaned. ``lag_s`` is positive when the recovered waveform is late.
    """
    rec = np.asarray(recovered_ac, dtype=float)
    ref = np.asarray(truth_ac, dtype=float) * scale
    if rec.shape != ref.shape:
        raise ValueError("series must have equal length")
    if f0 is not None and rec.size * dt * f0 < 3:
        raise ValueError("need at least 3 beats of data")
    if np.ptp(rec) == 0 or np.ptp(ref) == 0:
        raise ValueError("series must not be constant")
    rec = rec - rec.mean()
    ref = ref - ref.mean()
    rms_ref = np.sqrt(np.mean(ref ** 2))
    rms_rec = np.sqrt(np.mean(rec ** 2))
    if np.array_equal(rec, ref):
        return Fidelity(1.0, 0.0, 1.0)
    r = float(np.corrcoef(rec, ref)[0, 1])
    xc = correlate(rec, ref, mode="full", method="fft")
    lags = correlation_lags(rec.size, ref.size, mode="full")
    lag = int(lags[np.argmax(xc)])
    return Fidelity(r, lag * dt, float(rms_rec / rms_ref))


def phase_degrees(lag_s: float, f0: float) -> float:
    """Lag in degrees at ``f0``; positive = delay, negative = lead."""
    return 360.0 * f0 * lag_s


def compensation_time(event_log: Iterable[Event]) -> CompensationTime:
    """Time from the first entry into COARSE_MEASURE to the next MONITOR entry."""
    t_start = None
    error = False
    for e in event_log:
        if e.kind == "PHASE" and e.detail.endswith("->COARSE_MEASURE") and t_start is None:
            t_start = e.time
        elif t_start is not None and e.kind == "ERROR":
            error = True
        elif t_start is not None and e.kind == "PHASE" and e.detail.endswith("->MONITOR"):
            return CompensationTime(e.time - t_start, error)
    raise ValueError("event log holds no complete calibration pass")


def count_events(event_log: Iterable[Event], kind: str) -> int:
    return sum(1 for e in event_log if e.kind == kind)


def summarize(trace, skip: float = 0.0) -> dict:
    """Flat metric dictionary for ``metrics.txt``."""
    out = {
        "n_samples": trace.time.size,
        "n_recal": count_events(trace.events, "RECAL"),
        "n_errors": count_events(trace.events, "ERROR"),
        "n_warnings": count_events(trace.events, "WARNING") + len(trace.warnings),
        "final_idac_code": int(trace.idac_code[-1]),
        "final_rf_code": int(trace.rf_code[-1]),
        "final_rf_ohms": float(trace.rf_ohms[-1]),
        "final_vref_code": int(trace.vref_code[-1]),
        "saturated_fraction": float(np.mean(trace.saturated != 0)),
    }
    try:
        ct = compensation_time(trace.events)
        out["compensation_time_s"] = ct.seconds
        out["compensation_error"] = int(ct.error)
    except ValueError:
        pass
    win = trace.analysis_window(skip)
    if win is None:
        return out
    a, b = win
    out["window_start_s"] = float(trace.time[a])
    out["window_stop_s"] = float(trace.time[b - 1])
    out["residual_dc_V"] = residual_dc(trace, win)
    out["monitor_writes"] = trace.writes_in(a, b)
    out["v_sig_clipped_fraction"] = float(np.mean(trace.saturated[a:b] != 0))
    if trace.f0 > 0 and (b - a) * trace.dt * trace.f0 >= 3:
        truth = trace.i_ac[a:b]
        pairs = [("baseline_", trace.v_sig_baseline[a:b], trace.baseline_scale)]
        if out["v_sig_clipped_fraction"] == 0:
            pairs.insert(0, ("", trace.v_sig[a:b], trace.sign * trace.rf_ohms[a:b] * trace.oa2_gain))
        for prefix, series, scale in pairs:
            try:
                f = shape_fidelity(series, truth, trace.dt, trace.f0, scale=scale)
            except ValueError:
                continue
            out[prefix + "pearson_r"] = f.pearson_r
            out[prefix + "lag_s"] = f.lag_s
            out[prefix + "phase_deg"] = phase_degrees(f.lag_s, trace.f0)
            out[prefix + "amplitude_ratio"] = f.amplitude_ratio
    return out
