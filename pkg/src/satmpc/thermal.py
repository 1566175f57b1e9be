"""Mode-switched zone thermal dynamics and VAV box control-law models.

The building is modelled at a 15-minute sample rate.  The air handler's
supply air temperature (SAT) is restricted to a small set of discrete
values ("modes"); per mode, each zone follows the linear recursion

    T[k+1] = a*T[k] + b*F[k] + c*R[k] + q

where F is the VAV airflow, R the reheat valve position in percent, and
q a lumped exogenous heating load (occupants, solar, equipment, and
whatever else the linear terms do not capture).  The coefficients a and
c are shared across modes; b is per mode because the cooling effect of a
unit of airflow depends on how cold the supplied air is.

The VAV box is modelled as the proportional part of its PID loops: two
piecewise-linear maps from the zone temperature error e = T - S to the
reheat percentage and the airflow.  Integrator effects are deliberately
not modelled here; the planner learns them online as corrections.

Units: temperatures in degF, reheat in percent [0, 100], airflow in
whatever unit the b coefficient was identified against (CFM in
practice; nothing here depends on the choice).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mode",
    "ZoneCoeffs",
    "HybridModel",
    "VavConfig",
    "ZoneState",
    "reheat_control",
    "flow_control",
    "step_zone",
    "simulate_closed_loop",
]

# Reheat ramps from 0 to 100% as e goes from 0 to -1 degF; airflow ramps
# from alpha to omega as e goes from 0 to +1 degF.
REHEAT_SPAN_F = 1.0
FLOW_SPAN_F = 1.0


def _check_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return arr


@dataclass(frozen=True)
class Mode:
    """One discrete supply-air-temperature setting.

    index is the 1-based position within the mode set; sat is the fixed
    supply air temperature (degF) commanded in this mode.
    """

    index: int
    sat: float

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"mode index must be >= 1, got {self.index}")
        _check_finite("mode sat", self.sat)


def validate_modes(modes, min_count=2):
    """Check a mode list: contiguous 1-based indices, strictly increasing SAT."""
    if len(modes) < min_count:
        raise ValueError(f"need at least {min_count} modes, got {len(modes)}")
    for pos, mode in enumerate(modes):
        if mode.index != pos + 1:
            raise ValueError(f"mode indices must be 1..p in order, got {mode.index} at position {pos}")
    sats = [m.sat for m in modes]
    if any(s2 <= s1 for s1, s2 in zip(sats, sats[1:])):
        raise ValueError(f"mode SATs must be strictly increasing, got {sats}")
    return modes


def modes_from_sats(sats):
    """Build a mode list from an iterable of SAT values (degF)."""
    return [Mode(i + 1, float(s)) for i, s in enumerate(sats)]


@dataclass(frozen=True)
class ZoneCoeffs:
    """Per-zone dynamics coefficients, one entry per mode.

    a is the thermal retention factor (dimensionless), b the airflow
    cooling gain (degF per flow-unit, negative in practice), c the
    reheat gain (degF per percent).  a and c are mode-independent and
    must be entered identically for every mode; only b varies.  The
    across-mode ordering constraint on b is a property of identified
    models and is enforced by the identification routine, not here --
    hand-built models (including b = 0 test fixtures) are legitimate.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "c"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            _check_finite(name, arr)
            object.__setattr__(self, name, arr)
        if not (self.a.shape == self.b.shape == self.c.shape):
            raise ValueError("a, b, c must have one entry per mode each")
        if np.ptp(self.a) != 0.0:
            raise ValueError(f"a must be identical across modes, got {self.a}")
        if np.ptp(self.c) != 0.0:
            raise ValueError(f"c must be identical across modes, got {self.c}")
        if not (0.0 < self.a[0] <= 1.0):
            raise ValueError(f"a must lie in (0, 1], got {self.a[0]} (unstable zone dynamics)")

    @classmethod
    def from_shared(cls, a, b_per_mode, c):
        b = np.atleast_1d(np.asarray(b_per_mode, dtype=float))
        p = b.shape[0]
        return cls(a=np.full(p, float(a)), b=b, c=np.full(p, float(c)))

    @property
    def n_modes(self):
        return self.a.shape[0]


@dataclass(frozen=True)
class VavConfig:
    """Per-zone VAV box configuration.

    alpha/omega are the minimum/maximum airflow set by the building
    manager, setpoint the zone temperature target (degF), and band the
    comfort half-width (degF) used by the comfort metric.
    """

    alpha: float
    omega: float
    setpoint: float
    band: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "omega", "setpoint", "band"):
            _check_finite(name, getattr(self, name))
        if not (0.0 <= self.alpha < self.omega):
            raise ValueError(f"need 0 <= alpha < omega, got alpha={self.alpha}, omega={self.omega}")
        if self.band < 0.0:
            raise ValueError(f"band must be >= 0, got {self.band}")


@dataclass(frozen=True)
class ZoneState:
    """Measured (or simulated) zone condition at one sample instant."""

    temp: float
    flow: float
    reheat: float

    def __post_init__(self):
        for name in ("temp", "flow", "reheat"):
            _check_finite(name, getattr(self, name))
        if not (0.0 <= self.reheat <= 100.0):
            raise ValueError(f"reheat must be in [0, 100], got {self.reheat}")


@dataclass(frozen=True)
class HybridModel:
    """The identified control model: mode set, per-zone coefficients, load.

    q holds the per-zone heating-load estimate (degF per step) from the
    identification experiment; the planner treats it as constant and
    corrects it online.
    """

    modes: list = field(default_factory=list)
    zones: list = field(default_factory=list)
    q: np.ndarray = None

    def __post_init__(self):
        validate_modes(self.modes, min_count=2)
        if len(self.zones) < 1:
            raise ValueError("need at least one zone")
        p = len(self.modes)
        for j, zc in enumerate(self.zones):
            if zc.n_modes != p:
                raise ValueError(f"zone {j} has {zc.n_modes} mode entries, model has {p} modes")
        q = np.zeros(len(self.zones)) if self.q is None else np.asarray(self.q, dtype=float)
        if q.shape != (len(self.zones),):
            raise ValueError(f"q must have one entry per zone, got shape {q.shape}")
        _check_finite("q", q)
        object.__setattr__(self, "q", q)

    @property
    def n_zones(self):
        return len(self.zones)

    @property
    def n_modes(self):
        return len(self.modes)

    @property
    def sats(self):
        return np.array([m.sat for m in self.modes])

    def coeff_arrays(self):
        """Stack coefficients as (a, b, c) arrays of shape [zones, modes]."""
        a = np.stack([z.a for z in self.zones])
        b = np.stack([z.b for z in self.zones])
        c = np.stack([z.c for z in self.zones])
        return a, b, c

    def to_dict(self):
        a, b, c = self.coeff_arrays()
        return {
            "modes": [{"index": m.index, "sat": m.sat} for m in self.modes],
            "zones": [
                {"a": float(a[j, 0]), "b": b[j].tolist(), "c": float(c[j, 0])}
                for j in range(self.n_zones)
            ],
            "q": self.q.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        modes = [Mode(m["index"], float(m["sat"])) for m in doc["modes"]]
        zones = [ZoneCoeffs.from_shared(z["a"], z["b"], z["c"]) for z in doc["zones"]]
        return cls(modes=modes, zones=zones, q=np.asarray(doc["q"], dtype=float))


def reheat_control(e):
    """Reheat percentage commanded at temperature error e = T - S (degF).

    Fully open (100%) below e = -1 degF, proportional -100*e on
    [-1, 0), and closed at or above the setpoint.  Accepts scalars or
    arrays; rejects non-finite input.
    """
    arr = _check_finite("error", e)
    out = 100.0 * np.clip(-arr / REHEAT_SPAN_F, 0.0, 1.0)
    return float(out) if np.isscalar(e) or arr.ndim == 0 else out


def flow_control(e, cfg):
    """Airflow commanded at temperature error e = T - S (degF).

    Minimum flow alpha below the setpoint, ramping linearly to the
    maximum omega over the first +1 degF of error, saturated above.
    """
    arr = _check_finite("error", e)
    if not isinstance(cfg, VavConfig):
        cfg = VavConfig(*cfg)
    out = cfg.alpha + (cfg.omega - cfg.alpha) * np.clip(arr / FLOW_SPAN_F, 0.0, 1.0)
    return float(out) if np.isscalar(e) or arr.ndim == 0 else out


def step_zone(state, coeffs, mode, q):
    """Advance one zone one sample: a*T + b*F + c*R + q for the given mode.

    mode may be a Mode or a 1-based mode index.
    """
    idx = mode.index if isinstance(mode, Mode) else int(mode)
    if not (1 <= idx <= coeffs.n_modes):
        raise ValueError(f"mode index {idx} out of range 1..{coeffs.n_modes}")
    m = idx - 1
    _check_finite("q", q)
    return float(
        coeffs.a[m] * state.temp
        + coeffs.b[m] * state.flow
        + coeffs.c[m] * state.reheat
        + q
    )


def simulate_closed_loop(model, cfgs, init_temps, mode_sequence, q_trace, steps):
    """Run the model forward under the VAV proportional laws, no optimization.

    At every step the flow and reheat are computed from the current
    error, then each zone temperature advances.  mode_sequence gives the
    1-based mode index applied at each step; q_trace the per-step
    heating load, either shape [steps] (shared) or [steps, zones].

    Returns a list with, per zone, the N+1 ZoneStates of the trajectory
    (the trailing state carries the flow/reheat its temperature would
    command).
    """
    n_zones = model.n_zones
    if len(cfgs) != n_zones:
        raise ValueError(f"got {len(cfgs)} VAV configs for {n_zones} zones")
    temps = np.asarray(init_temps, dtype=float)
    if temps.shape != (n_zones,):
        raise ValueError(f"init temps must have shape ({n_zones},), got {temps.shape}")
    steps = int(steps)
    if steps < 0:
        raise ValueError("steps must be >= 0")
    seq = np.asarray(mode_sequence, dtype=int)
    if seq.ndim != 1 or seq.shape[0] < steps:
        raise ValueError(f"mode sequence must cover {steps} steps, got length {seq.shape[0]}")
    q = np.asarray(q_trace, dtype=float)
    if q.ndim == 1:
        q = np.repeat(q[:, None], n_zones, axis=1)
    if q.shape[0] < steps or (steps > 0 and q.shape[1] != n_zones):
        raise ValueError(f"q trace must cover {steps} steps x {n_zones} zones, got shape {q.shape}")

    out = [[] for _ in range(n_zones)]

    def record(ts):
        for j in range(n_zones):
            e = ts[j] - cfgs[j].setpoint
            out[j].append(ZoneState(temp=float(ts[j]), flow=flow_control(e, cfgs[j]), reheat=reheat_control(e)))

    record(temps)
    for k in range(steps):
        nxt = np.empty(n_zones)
        for j in range(n_zones):
            nxt[j] = step_zone(out[j][-1], model.zones[j], int(seq[k]), q[k, j])
        temps = nxt
        record(temps)
    return out
