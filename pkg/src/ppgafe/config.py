"""Scenario files: sectioned ``key = value`` text (INI syntax).

Every key has a default; only the ``[scenario]`` section is mandatory.
Unknown sections or keys are rejected. Values are SI units (seconds,
amperes, volts, ohms, farads, hertz).
"""

from __future__ import annotations

import configparser
import io
from typing import Dict, Iterable, Tuple

from .afe import FrontEndConfig
from .baseline import ContinuousCancelConfig
from .controller import CalibrationConfig, ConfigError
from .converters import IDAC_PRESETS, AdcSpec, QuantizerSpec
from .signals import AcSignalSpec, AmbientSpec, PhotocurrentScenario
from .simulation import SimConfig

REQUIRED_SECTIONS = ("scenario",)

# section -> key -> (type, default)
SCHEMA: Dict[str, Dict[str, Tuple[str, object]]] = {
    "scenario": {
        "duration": ("float", 20.0),
        "dt": ("float", 1e-3),
        "rng_seed": ("int", 0),
        "noise_rms": ("float", 0.0),
        "dark_current": ("float", 0.0),
        "reflection_offset": ("float", 50e-6),
        "ac_family": ("str", "synthetic_ppg"),
        "ac_f0": ("float", 1.2),
        "ac_amplitude": ("float", 30e-9),
        "ppg_systolic_center": ("float", 0.2),
        "ppg_systolic_width": ("float", 0.07),
        "ppg_dicrotic_ratio": ("float", 0.4),
        "ppg_dicrotic_delay": ("float", 0.35),
        "ppg_dicrotic_width": ("float", 0.09),
    },
    "ambient": {
        "baseline": ("float", 0.0),
        "drift": ("float", 0.0),
        "flicker_amplitude": ("float", 0.0),
        "flicker_freq": ("float", 50.0),
        "steps": ("steps", ()),
    },
    "afe": {
        "supply": ("float", 3.3),
        "v_cm": ("float", 1.65),
        "rl": ("float", 20e3),
        "cl": ("float", 10e-6),
        "oa2_gain": ("float", 10.0),
        "rf_bits": ("int", 8),
        "rf_min": ("float", 3.9e3),
        "rf_max": ("float", 1e6),
        "idac_preset": ("str", "full_range"),
        "idac_transfer": ("str", "linear"),
        "vref_bits": ("int", 10),
        "invert_polarity": ("bool", False),
    },
    "adc": {
        "base_bits": ("int", 12),
        "oversample_factor": ("int", 256),
        "noise_rms": ("float", 0.0),
    },
    "controller": {
        "enabled": ("bool", True),
        "v_dc_threshold": ("float", 0.050),
        "settle_factor": ("float", 5.0),
        "rf_initial_code": ("int", 0),
        "rf_target_code": ("int", 255),
        "controller_tick": ("float", 0.010),
        "fine_loop_max_iters": ("int", 8),
        "fine_average_time": ("float", 1.0),
        "debounce": ("bool", True),
        "debounce_factor": ("float", 1.0),
        "fixed_rf_code": ("int", 255),
    },
    "baseline": {
        "fc_hp": ("float", 0.8),
        "rf_ohms": ("float", 1e6),
    },
    "output": {
        "trace": ("str", "trace.csv"),
        "metrics": ("str", "metrics.txt"),
        "events": ("str", "events.log"),
        "analysis_skip": ("float", 0.0),
    },
}

ScenarioFile = Dict[str, Dict[str, object]]


def _parse_value(kind: str, text: str, where: str):
    text = text.strip()
    try:
        if kind == "float":
            return float(text)
        if kind == "int":
            return int(text)
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "steps":
            if not text:
                return ()
            pairs = []
            for item in text.split(","):
                t, level = item.split(":")
                pairs.append((float(t), float(level)))
            return tuple(pairs)
        return text
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r} as {kind}") from None


def _format_value(kind: str, value) -> str:
    if kind == "float":
        return repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind == "steps":
        return ", ".join(f"{t!r}:{v!r}" for t, v in value)
    return str(value)


def defaults() -> ScenarioFile:
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


def parse(text: str, overrides: Iterable[str] = ()) -> ScenarioFile:
    """Parse scenario text, apply ``section.key=value`` overrides, fill defaults."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed scenario file: {exc}") from None
    for sec in REQUIRED_SECTIONS:
        if not cp.has_section(sec):
            raise ConfigError(f"missing section [{sec}]")
    raw = {sec: dict(cp[sec]) for sec in cp.sections()}
    for ov in overrides:
        key, sep, value = ov.partition("=")
        sec, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {ov!r} must look like section.key=value")
        raw.setdefault(sec, {})[name] = value
    out = defaults()
    for sec, items in raw.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, value in items.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
            out[sec][key] = _parse_value(SCHEMA[sec][key][0], value, f"{sec}.{key}")
    return out


def serialize(sf: ScenarioFile) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for sec, keys in SCHEMA.items():
        cp.add_section(sec)
        for key, (kind, _) in keys.items():
            cp[sec][key] = _format_value(kind, sf[sec][key])
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def to_sim_config(sf: ScenarioFile) -> SimConfig:
    """Build the simulator configuration; invalid values raise ``ConfigError``."""
    s, amb, a, adc, c, b = (sf[k] for k in ("scenario", "ambient", "afe", "adc", "controller", "baseline"))
    try:
        scenario = PhotocurrentScenario(
            duration=s["duration"], dt=s["dt"], rng_seed=s["rng_seed"], noise_rms=s["noise_rms"],
            dark_current=s["dark_current"], reflection_offset=s["reflection_offset"],
            ac=AcSignalSpec(
                family=s["ac_family"], f0=s["ac_f0"], amplitude_peak=s["ac_amplitude"],
                systolic_center=s["ppg_systolic_center"], systolic_width=s["ppg_systolic_width"],
                dicrotic_ratio=s["ppg_dicrotic_ratio"], dicrotic_delay=s["ppg_dicrotic_delay"],
                dicrotic_width=s["ppg_dicrotic_width"]),
            ambient=AmbientSpec(**amb),
        )
        if a["idac_preset"] not in IDAC_PRESETS:
            raise ConfigError(f"afe.idac_preset must be one of {sorted(IDAC_PRESETS)}")
        afe = FrontEndConfig(
            supply=a["supply"], v_cm=a["v_cm"], rl=a["rl"], cl=a["cl"], oa2_gain=a["oa2_gain"],
            rf_spec=QuantizerSpec(a["rf_bits"], a["rf_min"], a["rf_max"], "linear", inclusive_hi=True),
            idac_spec=IDAC_PRESETS[a["idac_preset"]](a["idac_transfer"]),
            vref_dac_spec=QuantizerSpec(a["vref_bits"], 0.0, a["supply"]),
            invert_polarity=a["invert_polarity"],
        )
        adc_spec = AdcSpec(base_bits=adc["base_bits"], oversample_factor=adc["oversample_factor"],
                           vref_hi=a["supply"])
        cal = CalibrationConfig(**c)
        base = ContinuousCancelConfig(fc_hp=b["fc_hp"], rf_ohms=b["rf_ohms"], oa2_gain=a["oa2_gain"],
                                      v_cm=a["v_cm"], supply=a["supply"])
        base.check_dt(s["dt"])
        if s["dt"] > afe.tau / 10:
            raise ConfigError(f"scenario.dt must be <= tau/10 = {afe.tau / 10:g} s")
        cal.validate(afe, adc_spec, s["dt"])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return SimConfig(scenario=scenario, afe=afe, adc=adc_spec, adc_noise_rms=adc["noise_rms"],
                     calibration=cal, baseline=base)
