"""Photodiode current synthesis.

The photocurrent is built as a known AC ground truth plus explicitly
separated offset components (dark current, ambient light, tissue
reflection) so that recovered outputs can be scored against the truth.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

PHYSIOLOGICAL_BAND = (0.05, 5.0)

AC_FAMILIES = ("sinusoid", "synthetic_ppg", "fnirs_slow")

# (frequency multiple, weight, phase rad) of the fNIRS hemodynamic mixture
_FNIRS_COMPONENTS = ((1.0, 1.0, 0.0), (2.0, 0.35, 0.9), (3.0, 0.15, 2.1))


@dataclass(frozen=True)
class AcSignalSpec:
    """AC (physiological) part of the photocurrent.

    Widths and delays of the synthetic PPG pulses are fractions of the
    beat period. ``amplitude_peak`` is the maximum of the zero-mean
    waveform, in amperes.
    """

    family: str = "synthetic_ppg"
    f0: float = 1.2
    amplitude_peak: float = 30e-9
    systolic_center: float = 0.2
    systolic_width: float = 0.07
    dicrotic_ratio: float = 0.4
    dicrotic_delay: float = 0.35
    dicrotic_width: float = 0.09

    def __post_init__(self):
        if self.family not in AC_FAMILIES:
            raise ValueError(f"unknown AC family {self.family!r}; expected one of {AC_FAMILIES}")
        _check_finite(self, ("f0", "amplitude_peak", "systolic_center", "systolic_width",
                             "dicrotic_ratio", "dicrotic_delay", "dicrotic_width"))
        if self.f0 <= 0:
            raise ValueError("f0 must be > 0")
        if self.amplitude_peak < 0 or self.dicrotic_ratio < 0:
            raise ValueError("amplitudes must be >= 0")
        if not (0 < self.systolic_width < 0.25 and 0 < self.dicrotic_width < 0.25):
            raise ValueError("pulse widths must lie in (0, 0.25) of the beat period")


@dataclass(frozen=True)
class AmbientSpec:
    """Ambient-light current: baseline, linear drift, mains flicker and steps.

    ``steps`` holds ``(time_s, new_baseline_A)`` pairs; from ``time_s`` on
    the baseline is replaced by the new value.
    """

    baseline: float = 0.0
    drift: float = 0.0
    flicker_amplitude: float = 0.0
    flicker_freq: float = 50.0
    steps: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        _check_finite(self, ("baseline", "drift", "flicker_amplitude", "flicker_freq"))
        for t, level in self.steps:
            if not (math.isfinite(t) and math.isfinite(level)):
                raise ValueError("ambient step entries must be finite")
            if level < 0:
                raise ValueError("ambient step levels must be >= 0")
        if self.baseline < 0 or self.flicker_amplitude < 0:
            raise ValueError("ambient amplitudes must be >= 0")
        object.__setattr__(self, "steps", tuple(sorted((float(t), float(v)) for t, v in self.steps)))


@dataclass(frozen=True)
class PhotocurrentScenario:
    duration: float = 20.0
    dt: float = 1e-3
    ac: AcSignalSpec = field(default_factory=AcSignalSpec)
    dark_current: float = 0.0
    ambient: AmbientSpec = field(default_factory=AmbientSpec)
    reflection_offset: float = 50e-6
    rng_seed: int = 0
    noise_rms: float = 0.0

    def __post_init__(self):
        _check_finite(self, ("duration", "dt", "dark_current", "reflection_offset", "noise_rms"))
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.duration < self.dt:
            raise ValueError("duration must be >= dt")
        if min(self.dark_current, self.reflection_offset, self.noise_rms) < 0:
            raise ValueError("offset and noise amplitudes must be >= 0")
        lo, hi = PHYSIOLOGICAL_BAND
        if not lo <= self.ac.f0 <= hi:
            warnings.warn(f"AC fundamental {self.ac.f0} Hz lies outside the "
                          f"physiological band [{lo}, {hi}] Hz", stacklevel=3)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt))

    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt


def _check_finite(obj, names):
    for name in names:
        value = getattr(obj, name)
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


def _wrapped_gaussian(phase, center, width):
    # periodic in phase with period 1; the +-1 images cover widths < 0.25
    d = phase - center
    return sum(np.exp(-0.5 * ((d + k) / width) ** 2) for k in (-1.0, 0.0, 1.0))


def _ppg_template(phase, spec):
    return (_wrapped_gaussian(phase, spec.systolic_center, spec.systolic_width)
            + spec.dicrotic_ratio * _wrapped_gaussian(
                phase, spec.systolic_center + spec.dicrotic_delay, spec.dicrotic_width))


def _fnirs_template(phase, spec):
    return sum(w * np.sin(2 * np.pi * m * phase + p) for m, w, p in _FNIRS_COMPONENTS)


def ac_waveform(spec: AcSignalSpec, t: np.ndarray) -> np.ndarray:
    """Zero-mean AC current sampled at times ``t``.

    Every family is zero-mean over an integer number of periods; the
    synthetic PPG mean is removed analytically (a wrapped Gaussian of width
    ``w`` integrates to ``w * sqrt(2 pi)`` over one period).
    """
    t = np.asarray(t, dtype=float)
    if spec.amplitude_peak == 0:
        return np.zeros_like(t)
    if spec.family == "sinusoid":
        return spec.amplitude_peak * np.sin(2 * np.pi * spec.f0 * t)

    grid = np.arange(4096) / 4096
    phase = np.mod(t * spec.f0, 1.0)
    if spec.family == "synthetic_ppg":
        mean = math.sqrt(2 * math.pi) * (spec.systolic_width
                                         + spec.dicrotic_ratio * spec.dicrotic_width)
        peak = _ppg_template(grid, spec).max() - mean
        return spec.amplitude_peak * (_ppg_template(phase, spec) - mean) / peak
    peak = np.abs(_fnirs_template(grid, spec)).max()
    return spec.amplitude_peak * _fnirs_template(phase, spec) / peak


def ambient_current(spec: AmbientSpec, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    level = np.full_like(t, spec.baseline)
    for t_step, new_level in spec.steps:
        level[t >= t_step] = new_level
    out = level + spec.drift * t
    if spec.flicker_amplitude:
        out = out + spec.flicker_amplitude * np.sin(2 * np.pi * spec.flicker_freq * t)
    return out


def synthesize(scenario: PhotocurrentScenario) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Total photodiode current and its components.

    Returns ``(i_total, parts)`` where ``parts`` has the keys ``ac``,
    ``dark``, ``ambient``, ``reflection`` and ``noise``. ``i_total`` is
    their sum, accumulated in that order.
    """
    t = scenario.time()
    n = t.size
    noise = np.zeros(n)
    if scenario.noise_rms > 0:
        rng = np.random.default_rng(scenario.rng_seed)
        noise = scenario.noise_rms * rng.standard_normal(n)
    parts = {
        "ac": ac_waveform(scenario.ac, t),
        "dark": np.full(n, scenario.dark_current),
        "ambient": ambient_current(scenario.ambient, t),
        "reflection": np.full(n, scenario.reflection_offset),
        "noise": noise,
    }
    i_total = parts["ac"] + parts["dark"] + parts["ambient"] + parts["reflection"] + parts["noise"]
    return i_total, parts


def offset_current(parts: Dict[str, np.ndarray]) -> np.ndarray:
    """Information-free offset: dark + ambient + reflection."""
    return parts["dark"] + parts["ambient"] + parts["reflection"]


def band_power(series, dt: float, f_lo: float, f_hi: float) -> float:
    """Mean-square power of ``series`` inside ``[f_lo, f_hi]`` Hz.

    One-sided periodogram (rectangular window) summed over the bins in the
    band; by Parseval the sum over all non-DC bins equals the AC power
    ``mean((x - mean(x))**2)``.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    nyquist = 0.5 / dt
    if not 0 <= f_lo < f_hi:
        raise ValueError("band must satisfy 0 <= f_lo < f_hi")
    if f_hi > nyquist:
        raise ValueError(f"band upper edge {f_hi} Hz exceeds Nyquist {nyquist} Hz")
    if f_lo > 0 and n < 2.0 / (f_lo * dt):
        raise ValueError(f"series too short to resolve {f_lo} Hz: need >= {2.0 / (f_lo * dt):.0f} samples")
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, dt)
    power = np.abs(spectrum) ** 2 / n ** 2
    power[1:] *= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0  # Nyquist bin is not mirrored
    mask = (freqs >= f_lo) & (freqs <= f_hi)
    return float(power[mask].sum())
