import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppgafe import kernels
from ppgafe.afe import S2_VREF, FrontEndConfig, FrontEndState, step
from ppgafe.baseline import BaselineState, ContinuousCancelConfig, continuous_cancel_step


def run_block(cfg, state, i_pd, dt):
    n = i_pd.size
    v_out, v_dc, v_sig = np.empty(n), np.empty(n), np.empty(n)
    flags = np.zeros(n, dtype=np.int8)
    from ppgafe.afe import compensation_current, reference_voltage
    last = kernels.afe_block(i_pd, reference_voltage(cfg, state), compensation_current(cfg, state),
                             cfg.rf_ohms(state.rf_code), cfg.sign, cfg.v_cm, cfg.supply,
                             dt / cfg.tau, cfg.oa2_gain, state.v_dc, v_out, v_dc, v_sig, flags)
    return v_out, v_dc, v_sig, flags, last


@pytest.mark.parametrize("invert", [False, True])
def test_afe_block_matches_scalar_reference(backend, invert):
    cfg = FrontEndConfig(invert_polarity=invert)
    state = FrontEndState(s1_closed=True, idac_code=1, s2_sel=S2_VREF, vref_code=400,
                          rf_code=40, v_dc=1.2)
    rng = np.random.default_rng(5)
    i_pd = 40e-6 + 5e-6 * rng.standard_normal(3000)  # drives both rails
    dt = 1e-3
    v_out, v_dc, v_sig, flags, last = run_block(cfg, state, i_pd, dt)
    s = state
    for k in range(i_pd.size):
        s = step(cfg, s, i_pd[k], dt)
        assert v_out[k] == pytest.approx(s.v_out, abs=1e-12)
        assert v_dc[k] == pytest.approx(s.v_dc, abs=1e-12)
        assert v_sig[k] == pytest.approx(s.v_sig, abs=1e-12)
        assert bool(flags[k] & kernels.SAT_TIA) == s.saturated
    assert last == v_dc[-1]
    assert flags.any() and not flags.all()


def test_highpass_matches_scalar_reference(backend):
    cfg = ContinuousCancelConfig()
    dt = 1e-3
    t = np.arange(4000) * dt
    x = 1.65 + 0.05 * np.sin(2 * np.pi * 1.2 * t) + 0.2 * (t > 2)
    out = np.empty_like(x)
    kernels.highpass_block(x, dt / cfg.tau, x[0], cfg.oa2_gain, cfg.v_cm, cfg.supply, out)
    s = BaselineState(x[0])
    for k in range(x.size):
        s, v = continuous_cancel_step(cfg, s, x[k], dt)
        assert out[k] == pytest.approx(v, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(1e-4, 0.5), y0=st.floats(-5, 5),
       x=st.lists(st.floats(-10, 10), min_size=0, max_size=200))
def test_backends_agree_on_lowpass(alpha, y0, x):
    x = np.array(x, dtype=float)
    outs = {}
    for name, (lp, _, _) in kernels.BACKENDS.items():
        out = np.empty_like(x)
        last = lp(x, alpha, y0, out)
        outs[name] = (out, last)
    ref_out, ref_last = outs["numpy"]
    for out, last in outs.values():
        np.testing.assert_allclose(out, ref_out, rtol=0, atol=1e-12)
        if x.size:
            assert last == pytest.approx(ref_last, abs=1e-12)


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_env_flag_selects_numpy():
    env = dict(os.environ, PPGAFE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from ppgafe import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")
def test_numba_is_default_when_available():
    env = {k: v for k, v in os.environ.items() if k != "PPGAFE_DISABLE_NUMBA"}
    out = subprocess.run([sys.executable, "-c", "from ppgafe import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
