"""Simulated bench: the hardware surface seen by the calibration firmware.

The controller only talks to a :class:`FrontEndPlant` through quantized
reads (ADC codes, a rail-detect flag) and device writes (codes, switches).
``wait`` advances the analog simulation, recording every sample.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .afe import S2_VCM, S2_VREF, FrontEndConfig, compensation_current, reference_voltage, FrontEndState
from .converters import AdcSpec, adc_sample


class ScenarioComplete(Exception):
    """Raised by ``wait`` once the stimulus has been fully consumed."""


class FrontEndPlant:
    def __init__(self, afe: FrontEndConfig, adc: AdcSpec, i_pd, dt: float,
                 adc_noise_rms: float = 0.0, seed: int = 0, rf_code: int = 0):
        if dt > afe.tau / 10:
            raise ValueError(f"dt={dt} s exceeds tau/10={afe.tau / 10} s")
        self.afe = afe
        self.adc = adc
        self.dt = dt
        self.adc_noise_rms = adc_noise_rms
        self.rng = np.random.default_rng([seed, 0xADC])
        self.i_pd = np.ascontiguousarray(i_pd, dtype=float)
        n = self.i_pd.size
        self.k = 0
        self.phase = 0
        self.state = FrontEndState(rf_code=rf_code, vref_code=0)

        self.v_out = np.empty(n)
        self.v_dc = np.empty(n)
        self.v_sig = np.empty(n)
        self.flags = np.zeros(n, dtype=np.int8)
        self.rf_codes = np.empty(n, dtype=np.int32)
        self.idac_codes = np.empty(n, dtype=np.int32)
        self.vref_codes = np.empty(n, dtype=np.int32)
        self.phases = np.empty(n, dtype=np.int8)

        # the filter capacitor starts charged to the first output sample
        v0, _ = self._tia_raw(self.i_pd[0]) if n else (afe.v_cm, False)
        self._v_dc = v0

    @property
    def n_samples(self) -> int:
        return self.i_pd.size

    @property
    def time(self) -> float:
        return self.k * self.dt

    @property
    def v_dc_now(self) -> float:
        """True analog low-pass voltage (test/diagnostic access only)."""
        return self._v_dc

    def _tia_raw(self, i):
        v = reference_voltage(self.afe, self.state) + self.afe.sign * (
            i - compensation_current(self.afe, self.state)) * self.afe.rf_ohms(self.state.rf_code)
        return min(max(v, 0.0), self.afe.supply), not 0.0 <= v <= self.afe.supply

    def advance(self, n: int) -> bool:
        """Simulate ``n`` samples with the current settings; True if the TIA clipped."""
        if n <= 0:
            return False
        end = min(self.k + n, self.n_samples)
        sl = slice(self.k, end)
        afe, st = self.afe, self.state
        self._v_dc = kernels.afe_block(
            self.i_pd[sl], reference_voltage(afe, st), compensation_current(afe, st),
            afe.rf_ohms(st.rf_code), afe.sign, afe.v_cm, afe.supply, self.dt / afe.tau,
            afe.oa2_gain, self._v_dc,
            self.v_out[sl], self.v_dc[sl], self.v_sig[sl], self.flags[sl])
        self.rf_codes[sl] = st.rf_code
        self.idac_codes[sl] = -1 if st.idac_code is None else st.idac_code
        self.vref_codes[sl] = st.vref_code
        self.phases[sl] = self.phase
        saturated = bool(np.any(self.flags[sl] & kernels.SAT_TIA))
        self.k = end
        if end - sl.start < n or self.k >= self.n_samples:
            raise ScenarioComplete(self.time)
        return saturated

    def wait(self, seconds: float) -> bool:
        return self.advance(int(round(seconds / self.dt)))

    # -- quantized reads -------------------------------------------------
    def read_vdc(self) -> int:
        """One oversampled ADC conversion of the low-pass output."""
        return adc_sample(self.adc, self._v_dc, self.adc_noise_rms, self.rng)

    # -- device writes ---------------------------------------------------
    def _set(self, **kw):
        self.state = FrontEndState(**{**self.state.__dict__, **kw})

    def write_rf(self, code: int):
        if not 0 <= code <= self.afe.rf_spec.max_code:
            raise ValueError(f"RF code {code} out of range")
        self._set(rf_code=int(code))

    def write_idac(self, code: int):
        if not 0 <= code <= self.afe.idac_spec.quant.max_code:
            raise ValueError(f"current DAC code {code} out of range")
        self._set(idac_code=int(code))

    def write_vref(self, code: int):
        if not 0 <= code <= self.afe.vref_dac_spec.max_code:
            raise ValueError(f"VREF code {code} out of range")
        self._set(vref_code=int(code))

    def set_s1(self, closed: bool):
        self._set(s1_closed=bool(closed))

    def set_s2(self, sel: str):
        if sel not in (S2_VCM, S2_VREF):
            raise ValueError(f"bad S2 position {sel!r}")
        self._set(s2_sel=sel)
