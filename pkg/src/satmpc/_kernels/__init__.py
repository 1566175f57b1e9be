"""Hot-path rollout kernels with a compiled core and a numpy fallback.

The compiled extension is built at install time when a C toolchain is
available; otherwise the numpy implementation takes over silently.
Setting SATMPC_PURE_PYTHON=1 forces the fallback (useful for
benchmarking and for debugging suspected kernel issues).
"""

from __future__ import annotations

import os

import numpy as np

from . import rollout_py

_IMPL = rollout_py
BACKEND = "python"

if os.environ.get("SATMPC_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    try:
        from . import _rollout_cy

        _IMPL = _rollout_cy
        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["rollout_batch", "backend_name", "BACKEND"]


def backend_name():
    """Which implementation is live: 'cython' or 'python'."""
    return BACKEND


def _vec(name, x, n=None):
    out = np.ascontiguousarray(x, dtype=np.float64)
    if out.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {out.shape}")
    if n is not None and out.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {out.shape[0]}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite values")
    return out


def rollout_batch(a, b, c, q, t0, setpoint, alpha, omega,
                  q_hat, f_hat, r_hat, seqs, sats, oat,
                  lam, mu, gamma, lo=66.0, hi=78.0, impl=None):
    """Evaluate every candidate mode sequence over the horizon.

    Inputs: per-zone coefficient vectors a, c, q and flow-gain matrix b
    [zones, modes]; initial temps t0; VAV parameters setpoint/alpha/
    omega; learning offsets q_hat/f_hat/r_hat; seqs [sequences, steps]
    of 0-based mode indices; sats [modes]; oat [steps] forecast; cost
    weights; nominal comfort band [lo, hi].

    Returns (costs, violations), one entry per sequence: the corrected
    trajectory's total stage cost, and the nominal trajectory's summed
    degF excursion outside the band (zero means feasible).

    impl overrides the backend for this call ('python' or 'cython').
    """
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.ndim != 2:
        raise ValueError(f"b must be [zones, modes], got shape {b.shape}")
    n_zones, n_modes = b.shape
    a = _vec("a", a, n_zones)
    c = _vec("c", c, n_zones)
    q = _vec("q", q, n_zones)
    t0 = _vec("t0", t0, n_zones)
    setpoint = _vec("setpoint", setpoint, n_zones)
    alpha = _vec("alpha", alpha, n_zones)
    omega = _vec("omega", omega, n_zones)
    q_hat = _vec("q_hat", q_hat, n_zones)
    f_hat = _vec("f_hat", f_hat, n_zones)
    r_hat = _vec("r_hat", r_hat, n_zones)
    sats = _vec("sats", sats, n_modes)

    seqs = np.ascontiguousarray(seqs, dtype=np.int32)
    if seqs.ndim != 2:
        raise ValueError(f"seqs must be [sequences, steps], got shape {seqs.shape}")
    if seqs.size and (seqs.min() < 0 or seqs.max() >= n_modes):
        raise ValueError(f"sequence mode indices must lie in [0, {n_modes})")
    oat = _vec("oat", oat, seqs.shape[1])

    if impl is None:
        mod = _IMPL
    elif impl == "python":
        mod = rollout_py
    elif impl == "cython":
        try:
            from . import _rollout_cy as mod
        except ImportError as exc:
            raise RuntimeError("compiled kernel is not available in this install") from exc
    else:
        raise ValueError(f"unknown impl {impl!r}")

    return mod.rollout_batch(a, b, c, q, t0, setpoint, alpha, omega,
                             q_hat, f_hat, r_hat, seqs, sats, oat,
                             float(lam), float(mu), float(gamma), float(lo), float(hi))
