"""Quantized boundaries of the front end: digipot, current DAC, VREF DAC, ADC."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TRANSFERS = ("linear", "reciprocal")
OVERSAMPLE_FACTORS = (1, 4, 16, 64, 256)


@dataclass(frozen=True)
class QuantizerSpec:
    """Code <-> value law of one converter.

    ``inclusive_hi`` selects the step convention of a linear transfer:
    MCU converters use ``(hi - lo) / 2**bits`` so the top code sits one
    step below ``hi``; digipot-style devices use ``(hi - lo) / (2**bits - 1)``
    so the top code lands exactly on ``hi``. The reciprocal transfer always
    spans both endpoints.
    """

    bits: int
    full_scale_lo: float
    full_scale_hi: float
    transfer: str = "linear"
    inclusive_hi: bool = False

    def __post_init__(self):
        if not 1 <= self.bits <= 24:
            raise ValueError(f"bits must be in [1, 24], got {self.bits}")
        if self.transfer not in TRANSFERS:
            raise ValueError(f"unknown transfer {self.transfer!r}")
        if not (math.isfinite(self.full_scale_lo) and math.isfinite(self.full_scale_hi)):
            raise ValueError("full-scale limits must be finite")
        if not self.full_scale_lo < self.full_scale_hi:
            raise ValueError("full_scale_lo must be < full_scale_hi")
        if self.transfer == "reciprocal" and self.full_scale_lo <= 0:
            raise ValueError("reciprocal transfer needs a positive lower limit")

    @property
    def n_codes(self) -> int:
        return 1 << self.bits

    @property
    def max_code(self) -> int:
        return self.n_codes - 1

    @property
    def lsb(self) -> float:
        """Linear step size (for reciprocal specs: the mean step)."""
        span = self.full_scale_hi - self.full_scale_lo
        if self.inclusive_hi or self.transfer == "reciprocal":
            return span / self.max_code
        return span / self.n_codes

    # value(code) = K / (max_code - code + c0); top code -> hi, code 0 -> lo
    @property
    def _recip_c0(self) -> float:
        return self.max_code * self.full_scale_lo / (self.full_scale_hi - self.full_scale_lo)

    @property
    def _recip_k(self) -> float:
        return self.full_scale_hi * self._recip_c0

    def local_step(self, code: int) -> float:
        """Distance to the neighbouring code values around ``code``."""
        if self.transfer == "linear":
            return self.lsb
        lo_c, hi_c = max(code - 1, 0), min(code + 1, self.max_code)
        return max(dequantize(self, code) - dequantize(self, lo_c),
                   dequantize(self, hi_c) - dequantize(self, code))


def quantize(spec: QuantizerSpec, x):
    """Saturating value -> code conversion.

    Linear: mid-tread rounding, halves away from zero. Reciprocal: the code
    whose value is nearest to ``x`` (ties go to the lower code).
    Accepts scalars or arrays.
    """
    xa = np.asarray(x, dtype=float)
    if spec.transfer == "linear":
        u = (xa - spec.full_scale_lo) / spec.lsb
        code = np.clip(np.floor(u + 0.5), 0, spec.max_code)
    else:
        k, c0 = spec._recip_k, spec._recip_c0
        xc = np.clip(xa, spec.full_scale_lo, spec.full_scale_hi)
        c_real = spec.max_code + c0 - k / xc
        lower = np.clip(np.floor(c_real), 0, spec.max_code)
        upper = np.clip(lower + 1, 0, spec.max_code)
        err_lo = np.abs(k / (spec.max_code - lower + c0) - xa)
        err_hi = np.abs(k / (spec.max_code - upper + c0) - xa)
        code = np.where(err_hi < err_lo, upper, lower)
    code = code.astype(np.int64)
    return int(code) if code.ndim == 0 else code


def dequantize(spec: QuantizerSpec, code):
    c = np.asarray(code)
    if np.any(c < 0) or np.any(c > spec.max_code):
        raise ValueError(f"code out of range [0, {spec.max_code}]: {code!r}")
    c = c.astype(float)
    if spec.transfer == "linear":
        v = spec.full_scale_lo + c * spec.lsb
        if spec.inclusive_hi:
            v = np.where(c == spec.max_code, spec.full_scale_hi, v)
    else:
        v = spec._recip_k / (spec.max_code - c + spec._recip_c0)
    return float(v) if v.ndim == 0 else v


@dataclass(frozen=True)
class IdacSpec:
    """Compensation current sink: code 0 is the lowest current in range."""

    quant: QuantizerSpec

    def __post_init__(self):
        if self.quant.full_scale_lo < 0:
            raise ValueError("current DAC range must be non-negative")
        if dequantize(self.quant, 0) > self.quant.full_scale_lo * (1 + 1e-12):
            raise ValueError("current DAC code 0 must map to the minimum current")

    def current(self, code: int) -> float:
        return dequantize(self.quant, code)

    def code_for(self, current: float) -> int:
        return quantize(self.quant, current)

    @classmethod
    def full_range(cls, transfer: str = "linear") -> "IdacSpec":
        """LM334 + 8-bit digipot, 1 uA to 10 mA."""
        return cls(QuantizerSpec(8, 1e-6, 10e-3, transfer, inclusive_hi=True))

    @classmethod
    def soc_7bit(cls, transfer: str = "linear") -> "IdacSpec":
        """Integrated current DAC, 1 uA to 128 uA in 1 uA steps."""
        return cls(QuantizerSpec(7, 1e-6, 128e-6, transfer, inclusive_hi=True))


IDAC_PRESETS = {"full_range": IdacSpec.full_range, "soc_7bit": IdacSpec.soc_7bit}


@dataclass(frozen=True)
class AdcSpec:
    base_bits: int = 12
    oversample_factor: int = 256
    vref_lo: float = 0.0
    vref_hi: float = 3.3

    def __post_init__(self):
        if self.oversample_factor not in OVERSAMPLE_FACTORS:
            raise ValueError(f"oversample_factor must be one of {OVERSAMPLE_FACTORS}")
        if self.effective_bits > 16:
            raise ValueError("effective resolution above 16 bits is not supported")
        if not self.vref_lo < self.vref_hi:
            raise ValueError("vref_lo must be < vref_hi")

    @property
    def extra_bits(self) -> int:
        return int(round(math.log(self.oversample_factor, 4)))

    @property
    def effective_bits(self) -> int:
        return self.base_bits + self.extra_bits

    @property
    def base_quantizer(self) -> QuantizerSpec:
        return QuantizerSpec(self.base_bits, self.vref_lo, self.vref_hi)

    @property
    def lsb(self) -> float:
        """LSB at the effective (decimated) resolution."""
        return (self.vref_hi - self.vref_lo) / (1 << self.effective_bits)

    @property
    def base_lsb(self) -> float:
        return self.base_quantizer.lsb

    def to_volts(self, code) -> float:
        return self.vref_lo + np.asarray(code, dtype=float) * self.lsb


def adc_sample(spec: AdcSpec, v, noise_rms: float = 0.0, rng=None):
    """Oversampled conversion of ``v``.

    Each of ``oversample_factor`` sub-samples gets independent Gaussian
    noise and is quantized at ``base_bits``; the accumulated sum is
    right-shifted by ``log4(factor)`` to the effective resolution.
    ``v`` may be an array, giving one conversion per element.
    """
    va = np.asarray(v, dtype=float)
    sub = np.broadcast_to(va[..., None], va.shape + (spec.oversample_factor,))
    if noise_rms > 0:
        if rng is None:
            raise ValueError("a random generator is required when noise_rms > 0")
        sub = sub + noise_rms * rng.standard_normal(sub.shape)
    codes = quantize(spec.base_quantizer, sub)
    acc = np.asarray(codes, dtype=np.int64).sum(axis=-1)
    out = acc >> spec.extra_bits
    return int(out) if out.ndim == 0 else out
