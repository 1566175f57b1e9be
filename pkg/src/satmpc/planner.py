"""Supply-air-temperature planner: exhaustive search over hourly mode blocks.

Every 15-minute step the planner enumerates all hourly-blocked SAT
sequences over a 4-hour horizon (3 modes, 16 steps -> 81 candidates),
rolls each out twice through the zone model, and commands the first
hour of the cheapest feasible sequence:

  * the nominal rollout follows the model and the proportional VAV
    laws untouched, and is what the [66, 78] degF comfort band is
    checked against;
  * the corrected rollout adds the learned one-step offsets (q_hat to
    the dynamics, f_hat / r_hat to the VAV signals, clamped to physical
    ranges) and is what the cost sees.

The offsets are plain output-error corrections: after each step,
measured minus predicted, held constant over the horizon.  With a
perfect model they are identically zero and the two rollouts coincide.

Cost per step: squared tracking error of the corrected temps, plus fan
energy ~ (total flow)^3, chiller energy ~ (outside - supply temp) *
total flow, and reheat energy ~ total reheat.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .thermal import ZoneState

__all__ = [
    "COMFORT_LOW_F",
    "COMFORT_HIGH_F",
    "DEFAULT_HORIZON",
    "CostWeights",
    "Corrections",
    "ModeSequence",
    "Trajectory",
    "RolloutResult",
    "PlanResult",
    "update_corrections",
    "stage_cost",
    "rollout_sequence",
    "enumerate_sequences",
    "plan",
    "predict_one_step",
]

COMFORT_LOW_F = 66.0
COMFORT_HIGH_F = 78.0
DEFAULT_HORIZON = 16
BLOCK_STEPS = 4
FLOW_CAP_MARGIN = 0.1  # corrected flow may exceed omega by this fraction


@dataclass(frozen=True)
class CostWeights:
    """Energy-term weights: fan (cubic), chiller (bilinear), reheat (linear)."""

    lam: float
    mu: float
    gamma: float

    def __post_init__(self):
        for name in ("lam", "mu", "gamma"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @classmethod
    def default_for(cls, alphas):
        """Building-scaled defaults; the fan weight normalizes by total minimum flow."""
        total = float(np.sum(np.asarray(alphas, dtype=float)))
        if total <= 0:
            raise ValueError("sum of minimum flows must be > 0")
        return cls(lam=6.7e4 / total**3, mu=1.3e-3, gamma=6.7)


@dataclass(frozen=True)
class Corrections:
    """Measured-minus-predicted offsets: temp (q_hat), flow (f_hat), reheat (r_hat)."""

    q_hat: np.ndarray
    f_hat: np.ndarray
    r_hat: np.ndarray

    def __post_init__(self):
        for name in ("q_hat", "f_hat", "r_hat"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)
        if not (self.q_hat.shape == self.f_hat.shape == self.r_hat.shape):
            raise ValueError("correction vectors must share one length")

    @classmethod
    def zeros(cls, n_zones):
        z = np.zeros(int(n_zones))
        return cls(q_hat=z.copy(), f_hat=z.copy(), r_hat=z.copy())

    @property
    def n_zones(self):
        return self.q_hat.shape[0]

    def to_dict(self):
        return {
            "q_hat": self.q_hat.tolist(),
            "f_hat": self.f_hat.tolist(),
            "r_hat": self.r_hat.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            q_hat=np.asarray(doc["q_hat"], dtype=float),
            f_hat=np.asarray(doc["f_hat"], dtype=float),
            r_hat=np.asarray(doc["r_hat"], dtype=float),
        )

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, order=True)
class ModeSequence:
    """Hourly-blocked SAT assignment: one 1-based mode index per hour."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(int(m) for m in self.blocks)
        if not blocks:
            raise ValueError("sequence needs at least one block")
        if any(m < 1 for m in blocks):
            raise ValueError(f"mode indices are 1-based, got {blocks}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_blocks(self):
        return len(self.blocks)

    def expand(self, horizon):
        """Per-step mode indices; a partial final block holds its mode."""
        n = int(horizon)
        if n < 0:
            raise ValueError("horizon must be >= 0")
        last = len(self.blocks) - 1
        return np.array([self.blocks[min(i // BLOCK_STEPS, last)] for i in range(n)], dtype=int)


@dataclass(frozen=True)
class Trajectory:
    """Model rollout: temps [N+1, Z]; flows and reheats [N, Z], applied at each step."""

    temps: np.ndarray
    flows: np.ndarray
    reheats: np.ndarray


@dataclass(frozen=True)
class RolloutResult:
    nominal: Trajectory
    corrected: Trajectory
    cost: float
    feasible: bool
    violation: float


@dataclass(frozen=True)
class PlanResult:
    """Outcome of one exhaustive plan.

    cost_table and violation_table are aligned with sequences (the full
    lexicographic enumeration).  best_cost is the chosen entry's cost;
    when no sequence keeps the nominal trajectory in band, feasible is
    False and the choice minimizes the band violation instead.
    """

    best_sequence: ModeSequence
    best_index: int
    best_cost: float
    sat_command: float
    feasible: bool
    sequences: list
    cost_table: np.ndarray
    violation_table: np.ndarray


def update_corrections(measured, predicted):
    """Offsets from one step of plant truth: measured minus predicted ZoneStates."""
    if len(measured) != len(predicted):
        raise ValueError(f"got {len(measured)} measured vs {len(predicted)} predicted states")
    if not measured:
        raise ValueError("need at least one zone")
    return Corrections(
        q_hat=np.array([m.temp - p.temp for m, p in zip(measured, predicted)]),
        f_hat=np.array([m.flow - p.flow for m, p in zip(measured, predicted)]),
        r_hat=np.array([m.reheat - p.reheat for m, p in zip(measured, predicted)]),
    )


def stage_cost(temps_next, flows, reheats, oat, sat, setpoints, weights):
    """One step of the planning objective.

    Tracking uses the step-end temps; the three energy terms use the
    flows/reheats applied during the step and the supply temp of the
    step's mode.
    """
    t = np.asarray(temps_next, dtype=float)
    f = np.asarray(flows, dtype=float)
    r = np.asarray(reheats, dtype=float)
    s = np.asarray(setpoints, dtype=float)
    if not (t.shape == f.shape == r.shape == s.shape):
        raise ValueError("zone vectors must share one length")
    track = float(((t - s) ** 2).sum())
    sum_f = float(f.sum())
    sum_r = float(r.sum())
    return (
        track
        + weights.lam * (sum_f * sum_f * sum_f)
        + weights.gamma * sum_r
        + weights.mu * (float(oat) - float(sat)) * sum_f
    )


def _planning_arrays(model, cfgs):
    a, b, c = model.coeff_arrays()
    # a and c are shared across modes (ZoneCoeffs enforces it); take one column
    a = a[:, 0].copy()
    c = c[:, 0].copy()
    sp = np.array([cfg.setpoint for cfg in cfgs])
    alpha = np.array([cfg.alpha for cfg in cfgs])
    omega = np.array([cfg.omega for cfg in cfgs])
    if sp.shape[0] != a.shape[0]:
        raise ValueError(f"got {sp.shape[0]} VAV configs for {a.shape[0]} zones")
    return a, b, c, sp, alpha, omega


def rollout_sequence(model, cfgs, corrections, init_temps, seq, oat_forecast,
                     horizon=DEFAULT_HORIZON, weights=None,
                     comfort=(COMFORT_LOW_F, COMFORT_HIGH_F)):
    """Roll one sequence out step by step, keeping full trajectories.

    Returns the nominal and corrected trajectories, the total cost of
    the corrected one, and whether the nominal temps stay inside the
    comfort band over the whole horizon.  Matches the batch kernel's
    arithmetic exactly.
    """
    a, b, c, sp, alpha, omega = _planning_arrays(model, cfgs)
    n_zones = a.shape[0]
    n = int(horizon)
    oat = np.asarray(oat_forecast, dtype=float)
    if oat.shape[0] < n:
        raise ValueError(f"forecast covers {oat.shape[0]} steps; horizon is {n}")
    if weights is None:
        weights = CostWeights.default_for(alpha)
    if corrections is None:
        corrections = Corrections.zeros(n_zones)
    if corrections.n_zones != n_zones:
        raise ValueError(f"corrections cover {corrections.n_zones} zones, model has {n_zones}")
    lo, hi = float(comfort[0]), float(comfort[1])
    sats = model.sats
    modes = seq.expand(n) - 1

    t_nom = np.asarray(init_temps, dtype=float).copy()
    t_cor = t_nom.copy()
    if t_nom.shape != (n_zones,):
        raise ValueError(f"init temps must have shape ({n_zones},), got {t_nom.shape}")
    flow_cap = omega + FLOW_CAP_MARGIN * omega

    temps_n = np.empty((n + 1, n_zones))
    temps_c = np.empty((n + 1, n_zones))
    flows_n = np.empty((n, n_zones))
    flows_c = np.empty((n, n_zones))
    reheats_n = np.empty((n, n_zones))
    reheats_c = np.empty((n, n_zones))
    temps_n[0] = t_nom
    temps_c[0] = t_cor

    cost = 0.0
    violation = 0.0
    for i in range(n):
        m = modes[i]
        e = t_nom - sp
        f_nom = alpha + (omega - alpha) * np.clip(e, 0.0, 1.0)
        r_nom = 100.0 * np.clip(-e, 0.0, 1.0)
        f_cor = np.clip(f_nom + corrections.f_hat, 0.0, flow_cap)
        r_cor = np.clip(r_nom + corrections.r_hat, 0.0, 100.0)

        t_nom = a * t_nom + b[:, m] * f_nom + c * r_nom + model.q
        t_cor = a * t_cor + b[:, m] * f_cor + c * r_cor + model.q + corrections.q_hat

        violation += float((np.maximum(lo - t_nom, 0.0) + np.maximum(t_nom - hi, 0.0)).sum())
        cost += stage_cost(t_cor, f_cor, r_cor, oat[i], sats[m], sp, weights)

        temps_n[i + 1] = t_nom
        temps_c[i + 1] = t_cor
        flows_n[i] = f_nom
        flows_c[i] = f_cor
        reheats_n[i] = r_nom
        reheats_c[i] = r_cor

    return RolloutResult(
        nominal=Trajectory(temps=temps_n, flows=flows_n, reheats=reheats_n),
        corrected=Trajectory(temps=temps_c, flows=flows_c, reheats=reheats_c),
        cost=cost,
        feasible=violation == 0.0,
        violation=violation,
    )


def enumerate_sequences(n_modes, horizon=DEFAULT_HORIZON, block=BLOCK_STEPS):
    """All hourly-blocked sequences in lexicographic order: n_modes^ceil(N/block)."""
    p = int(n_modes)
    if p < 1:
        raise ValueError("need at least one mode")
    n = int(horizon)
    if n < 1:
        raise ValueError("horizon must be >= 1")
    blk = int(block)
    if blk < 1:
        raise ValueError("block must be >= 1")
    n_blocks = -(-n // blk)
    return [ModeSequence(blocks) for blocks in itertools.product(range(1, p + 1), repeat=n_blocks)]


def plan(model, cfgs, corrections, init_temps, oat_forecast, weights=None,
         horizon=DEFAULT_HORIZON, comfort=(COMFORT_LOW_F, COMFORT_HIGH_F),
         pin_first_mode=None, impl=None):
    """Pick the cheapest feasible hourly-blocked SAT sequence.

    Exhaustive by construction: every sequence is rolled out and the
    table is returned alongside the choice.  Ties break toward the
    lexicographically lowest sequence.  When no sequence keeps the
    nominal trajectory inside the comfort band, the one with the least
    total excursion wins and the result is flagged infeasible.

    pin_first_mode (1-based) restricts the search to sequences whose
    first block holds that mode; the closed loop uses this between
    hour boundaries so a commanded SAT is held for its full hour.
    """
    a, b, c, sp, alpha, omega = _planning_arrays(model, cfgs)
    n = int(horizon)
    oat = np.asarray(oat_forecast, dtype=float)
    if oat.shape[0] < n:
        raise ValueError(f"forecast covers {oat.shape[0]} steps; horizon is {n}")
    if weights is None:
        weights = CostWeights.default_for(alpha)
    if corrections is None:
        corrections = Corrections.zeros(a.shape[0])
    t0 = np.asarray(init_temps, dtype=float)

    sequences = enumerate_sequences(model.n_modes, n)
    if pin_first_mode is not None:
        pin = int(pin_first_mode)
        if not 1 <= pin <= model.n_modes:
            raise ValueError(f"pinned mode {pin} out of range 1..{model.n_modes}")
        sequences = [s for s in sequences if s.blocks[0] == pin]

    seq_steps = np.stack([s.expand(n) - 1 for s in sequences]).astype(np.int32)
    costs, violations = _kernels.rollout_batch(
        a, b, c, model.q, t0, sp, alpha, omega,
        corrections.q_hat, corrections.f_hat, corrections.r_hat,
        seq_steps, model.sats, oat[:n],
        weights.lam, weights.mu, weights.gamma, comfort[0], comfort[1],
        impl=impl,
    )

    feasible_mask = violations == 0.0
    if feasible_mask.any():
        masked = np.where(feasible_mask, costs, np.inf)
        best = int(np.argmin(masked))
        feasible = True
    else:
        best = int(np.argmin(violations))
        feasible = False

    best_seq = sequences[best]
    return PlanResult(
        best_sequence=best_seq,
        best_index=best,
        best_cost=float(costs[best]),
        sat_command=float(model.sats[best_seq.blocks[0] - 1]),
        feasible=feasible,
        sequences=sequences,
        cost_table=costs,
        violation_table=violations,
    )


def predict_one_step(model, cfgs, measured, mode):
    """Model's one-step forecast from the measured ZoneStates: one per zone.

    The temperature advances through the model using the flow and
    reheat actually measured at the start of the step (so actuator
    deviations from the proportional laws land in q_hat only once, not
    twice).  The returned flow/reheat are the proportional laws
    evaluated at the predicted temperature: the model's guess at what
    the VAV boxes will command at the next measurement instant.
    """
    a, b, c, sp, alpha, omega = _planning_arrays(model, cfgs)
    if len(measured) != a.shape[0]:
        raise ValueError(f"got {len(measured)} zone states for {a.shape[0]} zones")
    m = int(mode) - 1
    if not 0 <= m < model.n_modes:
        raise ValueError(f"mode index {mode} out of range 1..{model.n_modes}")
    t0 = np.array([zs.temp for zs in measured])
    f0 = np.array([zs.flow for zs in measured])
    r0 = np.array([zs.reheat for zs in measured])
    t1 = a * t0 + b[:, m] * f0 + c * r0 + model.q
    e1 = t1 - sp
    f1 = alpha + (omega - alpha) * np.clip(e1, 0.0, 1.0)
    r1 = 100.0 * np.clip(-e1, 0.0, 1.0)
    return [
        ZoneState(temp=float(t1[j]), flow=float(f1[j]), reheat=float(r1[j]))
        for j in range(t0.shape[0])
    ]
