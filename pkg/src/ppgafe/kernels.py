"""Per-sample inner loops of the analog chain.

Two interchangeable backends implement the same kernels:

* ``numba``: explicit loops compiled with ``@njit``;
* ``numpy``: vectorized clipping plus ``scipy.signal.lfilter`` for the
  first-order recurrences.

The numba backend is used when numba imports and the environment variable
``PPGAFE_DISABLE_NUMBA`` is unset (or ``0``). ``set_backend`` switches at
runtime; callers must look kernels up through this module
(``kernels.afe_block``) rather than importing the functions directly.

Recurrence used by every low-pass here (forward Euler, current input)::

    y[k] = y[k-1] + alpha * (x[k] - y[k-1])
"""

from __future__ import annotations

import os

import numpy as np
from scipy.signal import lfilter

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

SAT_TIA = 1
SAT_OA2 = 2


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def _lowpass_np(x, alpha, y0):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return np.empty(0), y0
    y, _ = lfilter([alpha], [1.0, alpha - 1.0], x, zi=[(1.0 - alpha) * y0])
    return y, float(y[-1])


def lowpass_np(x, alpha, y0, out):
    y, last = _lowpass_np(x, alpha, y0)
    out[:] = y
    return last


def afe_block_np(i_pd, v_ref, i_comp, rf, sign, v_cm, supply, alpha, gain, v_dc0,
                 v_out, v_dc, v_sig, flags):
    raw = v_ref + sign * (i_pd - i_comp) * rf
    np.clip(raw, 0.0, supply, out=v_out)
    f = np.where((raw > supply) | (raw < 0.0), SAT_TIA, 0)
    last = lowpass_np(v_out, alpha, v_dc0, v_dc)
    sig_raw = v_cm + gain * (v_out - v_cm)
    np.clip(sig_raw, 0.0, supply, out=v_sig)
    f |= np.where((sig_raw > supply) | (sig_raw < 0.0), SAT_OA2, 0)
    flags[:] = f
    return last


def highpass_block_np(x, alpha, y0, gain, v_cm, supply, out):
    lp, last = _lowpass_np(x, alpha, y0)
    np.clip(v_cm + gain * (np.asarray(x, dtype=float) - lp), 0.0, supply, out=out)
    return last


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def lowpass_nb(x, alpha, y0, out):
        y = y0
        for k in range(x.shape[0]):
            y += alpha * (x[k] - y)
            out[k] = y
        return y

    @njit(cache=True)
    def afe_block_nb(i_pd, v_ref, i_comp, rf, sign, v_cm, supply, alpha, gain, v_dc0,
                     v_out, v_dc, v_sig, flags):
        y = v_dc0
        for k in range(i_pd.shape[0]):
            f = 0
            raw = v_ref + sign * (i_pd[k] - i_comp) * rf
            if raw > supply:
                raw = supply
                f = 1
            elif raw < 0.0:
                raw = 0.0
                f = 1
            v_out[k] = raw
            y += alpha * (raw - y)
            v_dc[k] = y
            s = v_cm + gain * (raw - v_cm)
            if s > supply:
                s = supply
                f |= 2
            elif s < 0.0:
                s = 0.0
                f |= 2
            v_sig[k] = s
            flags[k] = f
        return y

    @njit(cache=True)
    def highpass_block_nb(x, alpha, y0, gain, v_cm, supply, out):
        y = y0
        for k in range(x.shape[0]):
            y += alpha * (x[k] - y)
            s = v_cm + gain * (x[k] - y)
            if s > supply:
                s = supply
            elif s < 0.0:
                s = 0.0
            out[k] = s
        return y

    BACKENDS = {
        "numba": (lowpass_nb, afe_block_nb, highpass_block_nb),
        "numpy": (lowpass_np, afe_block_np, highpass_block_np),
    }
else:  # pragma: no cover
    BACKENDS = {"numpy": (lowpass_np, afe_block_np, highpass_block_np)}


def _env_disabled() -> bool:
    return os.environ.get("PPGAFE_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


BACKEND = ""
lowpass = afe_block = highpass_block = None


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` kernels for subsequent calls."""
    global BACKEND, lowpass, afe_block, highpass_block
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    BACKEND = name
    lowpass, afe_block, highpass_block = BACKENDS[name]


set_backend("numba" if HAVE_NUMBA and not _env_disabled() else "numpy")
