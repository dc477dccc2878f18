import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ppgafe.converters import (AdcSpec, IdacSpec, QuantizerSpec, adc_sample, dequantize,
                               quantize)

VREF_DAC = QuantizerSpec(10, 0.0, 3.3)
ADC12 = QuantizerSpec(12, 0.0, 3.3)
DIGIPOT = QuantizerSpec(8, 3.9e3, 1e6, inclusive_hi=True)
RECIP = QuantizerSpec(8, 1e-6, 10e-3, "reciprocal", inclusive_hi=True)


def brute_nearest(spec, x):
    """Independent oracle: scan every code for the closest value."""
    values = np.array([dequantize(spec, c) for c in range(spec.n_codes)])
    return int(np.argmin(np.abs(values - x)))


def test_frozen_codes():
    assert quantize(VREF_DAC, 1.65) == 512
    assert dequantize(VREF_DAC, 512) == pytest.approx(1.65, abs=1e-15)
    assert quantize(ADC12, 1.65) == 2048
    assert quantize(ADC12, 3.3) == 4095  # saturates
    assert quantize(ADC12, -1.0) == 0


def test_digipot_endpoints_and_step():
    assert dequantize(DIGIPOT, 0) == 3.9e3
    assert dequantize(DIGIPOT, 255) == 1e6
    assert DIGIPOT.lsb == pytest.approx((1e6 - 3.9e3) / 255)
    assert quantize(DIGIPOT, 33e3) == 7  # 3.9k + 7 * 3906.27 = 31.24k; 8 -> 35.15k


def test_mcu_step_convention():
    # top code one LSB below full scale
    assert dequantize(VREF_DAC, 1023) == pytest.approx(3.3 - 3.3 / 1024)


def test_reciprocal_endpoints():
    assert dequantize(RECIP, 0) == pytest.approx(1e-6, rel=1e-12)
    assert dequantize(RECIP, 255) == pytest.approx(10e-3, rel=1e-12)
    values = dequantize(RECIP, np.arange(256))
    assert np.all(np.diff(values) > 0)
    # step grows with current: finer resolution at the low end
    assert np.all(np.diff(values, 2) > 0)


def test_round_half_away_from_zero():
    spec = QuantizerSpec(4, 0.0, 16.0)
    assert quantize(spec, 2.5) == 3
    assert quantize(spec, 3.5) == 4
    assert quantize(spec, 2.4999) == 2


def test_out_of_range_dequantize():
    with pytest.raises(ValueError):
        dequantize(VREF_DAC, 1024)
    with pytest.raises(ValueError):
        dequantize(VREF_DAC, -1)


@pytest.mark.parametrize("kw", [dict(bits=0, full_scale_lo=0, full_scale_hi=1),
                                dict(bits=8, full_scale_lo=1, full_scale_hi=1),
                                dict(bits=8, full_scale_lo=0, full_scale_hi=1, transfer="log"),
                                dict(bits=8, full_scale_lo=0, full_scale_hi=1, transfer="reciprocal")])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        QuantizerSpec(**kw)


def test_array_and_scalar_agree():
    xs = np.linspace(-0.1, 3.4, 101)
    codes = quantize(VREF_DAC, xs)
    assert codes.dtype == np.int64
    assert list(codes) == [quantize(VREF_DAC, float(x)) for x in xs]


specs = st.sampled_from([VREF_DAC, ADC12, DIGIPOT, QuantizerSpec(7, 1e-6, 128e-6, inclusive_hi=True)])


@settings(max_examples=200, deadline=None)
@given(spec=specs, a=st.floats(-1e7, 1e7), b=st.floats(-1e7, 1e7))
def test_quantize_monotone(spec, a, b):
    lo, hi = sorted((a, b))
    assert quantize(spec, lo) <= quantize(spec, hi)


@settings(max_examples=200, deadline=None)
@given(spec=specs, u=st.floats(0, 1))
def test_half_lsb_bound(spec, u):
    top = dequantize(spec, spec.max_code)
    x = spec.full_scale_lo + u * (top - spec.full_scale_lo)
    assert abs(dequantize(spec, quantize(spec, x)) - x) <= spec.lsb / 2 * (1 + 1e-9)


@settings(max_examples=200, deadline=None)
@given(spec=specs, data=st.data())
def test_round_trip(spec, data):
    code = data.draw(st.integers(0, spec.max_code))
    assert quantize(spec, dequantize(spec, code)) == code


@settings(max_examples=300, deadline=None)
@given(x=st.floats(1e-6, 10e-3))
def test_reciprocal_matches_brute_force(x):
    code = quantize(RECIP, x)
    oracle = brute_nearest(RECIP, x)
    # ties may differ only when both codes are equally close
    if code != oracle:
        d = abs(dequantize(RECIP, code) - x) - abs(dequantize(RECIP, oracle) - x)
        assert abs(d) <= 1e-18
    assert quantize(RECIP, dequantize(RECIP, code)) == code


@settings(max_examples=100, deadline=None)
@given(x=st.floats(0, 200e-6))
def test_idac_code_for_is_nearest(x):
    idac = IdacSpec.soc_7bit()
    code = idac.code_for(x)
    assume(1e-6 <= x <= 128e-6)
    assert abs(idac.current(code) - x) <= 0.5e-6 + 1e-15


def test_idac_presets():
    assert IdacSpec.soc_7bit().current(0) == pytest.approx(1e-6)
    assert IdacSpec.soc_7bit().current(127) == pytest.approx(128e-6)
    assert IdacSpec.full_range().current(255) == pytest.approx(10e-3)
    assert IdacSpec.full_range("reciprocal").current(0) == pytest.approx(1e-6)


# ---------------------------------------------------------------- ADC

def test_adc_resolution_table():
    for factor, bits in [(1, 12), (4, 13), (16, 14), (64, 15), (256, 16)]:
        spec = AdcSpec(oversample_factor=factor)
        assert spec.effective_bits == bits
        assert spec.lsb == pytest.approx(3.3 / 2 ** bits)
    with pytest.raises(ValueError):
        AdcSpec(oversample_factor=8)


def test_adc_noiseless_midscale():
    assert adc_sample(AdcSpec(oversample_factor=1), 1.65) == 2048
    assert adc_sample(AdcSpec(oversample_factor=256), 1.65) == 2048 * 16


def test_adc_noise_requires_rng():
    with pytest.raises(ValueError):
        adc_sample(AdcSpec(), 1.0, noise_rms=1e-3)


def test_oversampling_reduces_noise():
    rng = np.random.default_rng(1)
    v = np.full(4000, 1.2345)
    noise = 2 * AdcSpec().base_lsb
    s1 = AdcSpec(oversample_factor=1)
    s16 = AdcSpec(oversample_factor=16)
    std1 = np.std(s1.to_volts(adc_sample(s1, v, noise, rng)))
    std16 = np.std(s16.to_volts(adc_sample(s16, v, noise, rng)))
    assert std16 <= 0.3 * std1  # ideal ratio 1/4
