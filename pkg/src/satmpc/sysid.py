"""Identification of the mode-switched zone model from SAT-cycling data.

The experiment cycles the supply air temperature through every mode in
ascending order (two hours per mode by default, starting at midnight)
so that one short run covers all modes while the heating load stays
roughly constant.  Each zone is then identified independently by a
Bayesian constrained least-squares fit: squared one-step prediction
residuals per mode window, plus Gaussian prior penalties on the
coefficients, subject to

  * one thermal retention factor a shared by all modes,
  * one reheat gain c shared by all modes,
  * a flow-gain chain ordering b across modes: b[r+1] <= (S[r+1]/S[r]) * b[r]
    minus a small margin (strict inequalities are not representable in
    a QP),
  * one heating-load value q over the whole experiment span,
  * 0 < a <= 1 so the identified dynamics cannot amplify.

The shared-coefficient equalities are applied by substitution, so the
quadratic program has p + 3 free variables: (a, b_1..b_p, c, q).

The chain constraint is coded exactly as the SAT ratio in degF reads;
for negative b this orders the gains opposite to the physical intuition
that colder supply air cools more per unit flow, so ``chain="flipped"``
is available to reverse the direction.  The default stays verbatim.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import timedelta

import numpy as np

from . import qp as _qp
from .thermal import HybridModel, ZoneCoeffs, modes_from_sats
from .timebase import STEP, STEP_MINUTES

__all__ = [
    "Prior",
    "ModeWindow",
    "ExperimentSchedule",
    "IdProblem",
    "QuadProgram",
    "QpSolution",
    "ZoneIdResult",
    "ConditioningWarning",
    "default_prior",
    "experiment_schedule",
    "problems_from_samples",
    "build_qp",
    "solve_qp",
    "identify_zone",
    "identify_zones",
    "assemble_model",
]

CHAIN_MARGIN = 1e-6   # slack turning the strict flow-gain ordering into <=
A_FLOOR = 1e-6        # lower box bound standing in for a > 0
DEFAULT_DWELL = timedelta(hours=2)


class ConditioningWarning(UserWarning):
    """Data barely excites the regressors; priors are doing the work."""


@dataclass(frozen=True)
class Prior:
    """Gaussian priors on the zone coefficients.

    a and c carry one (mean, variance) pair each since they are shared
    across modes; b is per mode.  Variances must be positive; small
    variances pin a coefficient to its prior mean.
    """

    a_mean: float
    a_var: float
    b_mean: np.ndarray
    b_var: np.ndarray
    c_mean: float
    c_var: float

    def __post_init__(self):
        object.__setattr__(self, "b_mean", np.atleast_1d(np.asarray(self.b_mean, dtype=float)))
        object.__setattr__(self, "b_var", np.atleast_1d(np.asarray(self.b_var, dtype=float)))
        if self.b_mean.shape != self.b_var.shape:
            raise ValueError("b_mean and b_var must have one entry per mode each")
        if self.a_var <= 0 or self.c_var <= 0 or np.any(self.b_var <= 0):
            raise ValueError("prior variances must be > 0")

    @property
    def n_modes(self):
        return self.b_mean.shape[0]


def default_prior(sats):
    """Weakly informative priors that satisfy the verbatim gain chain.

    The b means follow the SAT ratios with 2% extra slack per mode so
    they sit strictly inside the feasible chain.
    """
    sats = np.asarray(sats, dtype=float)
    p = sats.shape[0]
    b_mean = -1e-4 * (sats / sats[0]) * (1.0 + 0.02 * np.arange(p))
    return Prior(
        a_mean=0.95,
        a_var=0.01,
        b_mean=b_mean,
        b_var=np.full(p, 1e-6),
        c_mean=0.01,
        c_var=1e-4,
    )


@dataclass(frozen=True)
class ModeWindow:
    """Contiguous sample-index window [start, end] spent in one mode."""

    mode_index: int
    start: int
    end: int

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"window needs >= 2 samples, got [{self.start}, {self.end}]")

    @property
    def n_samples(self):
        return self.end - self.start + 1


@dataclass(frozen=True)
class ExperimentSchedule:
    """SAT-cycling plan: one block per mode, ascending SAT, fixed dwell."""

    sats: np.ndarray
    dwell: timedelta
    start: "datetime"
    commands: list = field(default_factory=list)

    @property
    def dwell_samples(self):
        return int(self.dwell // STEP)

    @property
    def total_steps(self):
        return self.dwell_samples * len(self.sats)

    @property
    def samples_needed(self):
        # one trailing measurement beyond the last commanded step
        return self.total_steps + 1

    def windows(self, offset=0):
        """Per-mode sample-index windows, offset into a larger trace.

        Window i ends on the sample taken at the next switch instant:
        that temperature is the last target of mode i and the first
        regressor of mode i+1, so adjacent windows share one boundary
        sample and every dwell step contributes one transition.
        """
        d = self.dwell_samples
        return [
            ModeWindow(mode_index=i + 1, start=offset + i * d, end=offset + (i + 1) * d)
            for i in range(len(self.sats))
        ]

    def sat_at_step(self, k):
        i = min(k // self.dwell_samples, len(self.sats) - 1)
        return float(self.sats[i])


def experiment_schedule(sats, dwell=DEFAULT_DWELL, start=None):
    """Build the SAT-cycling identification schedule.

    One contiguous block per mode in ascending SAT order, each of
    duration ``dwell`` (default two hours, i.e. 8 samples).  ``start``
    defaults to today's midnight UTC.  Returns an ExperimentSchedule
    whose ``commands`` list the (time, SAT) pairs to send.
    """
    sats = np.asarray(sats, dtype=float)
    if sats.size == 0:
        raise ValueError("mode set is empty")
    if np.any(np.diff(sats) <= 0):
        raise ValueError(f"mode SATs must be strictly increasing, got {sats}")
    if dwell <= timedelta(0):
        raise ValueError("dwell must be positive")
    if (dwell.total_seconds() / 60.0) % STEP_MINUTES != 0:
        raise ValueError(f"dwell must be a multiple of {STEP_MINUTES} minutes")
    if start is None:
        from datetime import datetime, timezone

        now = datetime.now(timezone.utc)
        start = now.replace(hour=0, minute=0, second=0, microsecond=0)
    commands = [(start + i * dwell, float(s)) for i, s in enumerate(sats)]
    return ExperimentSchedule(sats=sats, dwell=dwell, start=start, commands=commands)


@dataclass(frozen=True)
class IdProblem:
    """One zone's identification data: per-mode (T, F, R) sample windows.

    samples[m] is a (temps, flows, reheats) triple of equal-length
    arrays covering mode m's window, in sample order.  chain selects the
    direction of the flow-gain ordering constraint ("verbatim" or
    "flipped").
    """

    sats: np.ndarray
    samples: list
    prior: Prior = None
    chain: str = "verbatim"
    margin: float = CHAIN_MARGIN

    def __post_init__(self):
        sats = np.asarray(self.sats, dtype=float)
        object.__setattr__(self, "sats", sats)
        if len(self.samples) != sats.shape[0]:
            raise ValueError(f"got {len(self.samples)} sample windows for {sats.shape[0]} modes")
        clean = []
        for m, triple in enumerate(self.samples):
            t, f, r = (np.asarray(x, dtype=float) for x in triple)
            if not (t.shape == f.shape == r.shape) or t.ndim != 1:
                raise ValueError(f"mode {m + 1} window arrays must be 1-D and equal length")
            if t.shape[0] < 2:
                raise ValueError(f"mode {m + 1} window has {t.shape[0]} samples; need >= 2")
            if not all(np.all(np.isfinite(x)) for x in (t, f, r)):
                raise ValueError(f"mode {m + 1} window contains non-finite samples")
            clean.append((t, f, r))
        object.__setattr__(self, "samples", clean)
        if self.prior is None:
            object.__setattr__(self, "prior", default_prior(sats))
        if self.prior.n_modes != sats.shape[0]:
            raise ValueError("prior must cover every mode")
        if self.chain not in ("verbatim", "flipped"):
            raise ValueError(f"chain must be 'verbatim' or 'flipped', got {self.chain!r}")

    @property
    def n_modes(self):
        return self.sats.shape[0]


def problems_from_samples(sats, temps, flows, reheats, windows, prior=None, chain="verbatim"):
    """Slice logged arrays into one IdProblem per zone.

    temps/flows/reheats are [samples, zones] in trace order; windows
    give each mode's inclusive sample-index span, one per mode in mode
    order (as produced by ExperimentSchedule.windows).
    """
    sats = np.asarray(sats, dtype=float)
    temps = np.asarray(temps, dtype=float)
    flows = np.asarray(flows, dtype=float)
    reheats = np.asarray(reheats, dtype=float)
    if temps.ndim != 2 or temps.shape != flows.shape or temps.shape != reheats.shape:
        raise ValueError("temps/flows/reheats must share shape [samples, zones]")
    if len(windows) != sats.shape[0]:
        raise ValueError(f"got {len(windows)} windows for {sats.shape[0]} modes")
    n_samples = temps.shape[0]
    for i, w in enumerate(windows):
        if w.mode_index != i + 1:
            raise ValueError(f"window {i} carries mode {w.mode_index}, expected {i + 1}")
        if w.start < 0 or w.end >= n_samples:
            raise ValueError(f"window [{w.start}, {w.end}] falls outside the {n_samples}-sample log")
    problems = []
    for j in range(temps.shape[1]):
        samples = [
            (temps[w.start : w.end + 1, j], flows[w.start : w.end + 1, j], reheats[w.start : w.end + 1, j])
            for w in windows
        ]
        problems.append(IdProblem(sats=sats, samples=samples, prior=prior, chain=chain))
    return problems


@dataclass(frozen=True)
class QuadProgram:
    """0.5 x'Hx + g'x + const with G x <= h (equalities already substituted).

    Decision vector layout: x = (a, b_1..b_p, c, q).
    """

    H: np.ndarray
    g: np.ndarray
    const: float
    G: np.ndarray
    h: np.ndarray
    n_modes: int = 0
    x_start: np.ndarray = None

    @property
    def n_vars(self):
        return self.H.shape[0]


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    objective: float
    iterations: int

    def coefficients(self, p):
        """Split the identification decision vector into (a, b, c, q)."""
        return float(self.x[0]), self.x[1 : 1 + p].copy(), float(self.x[p + 1]), float(self.x[p + 2])


def _chain_rows(sats, p, n, chain, margin):
    rows, rhs = [], []
    for r in range(p - 1):
        ratio = sats[r + 1] / sats[r]
        row = np.zeros(n)
        if chain == "verbatim":
            # b[r+1] <= ratio * b[r] - margin
            row[1 + r + 1] = 1.0
            row[1 + r] = -ratio
        else:
            # b[r+1] >= ratio * b[r] + margin
            row[1 + r + 1] = -1.0
            row[1 + r] = ratio
        rows.append(row)
        rhs.append(-margin)
    return rows, rhs


def _feasible_start(problem):
    """A point satisfying the chain and the a box, for warm-starting."""
    p = problem.n_modes
    prior = problem.prior
    x = np.zeros(p + 3)
    x[0] = min(max(prior.a_mean, A_FLOOR), 1.0)
    b = np.array(prior.b_mean, dtype=float)
    for r in range(p - 1):
        ratio = problem.sats[r + 1] / problem.sats[r]
        if problem.chain == "verbatim":
            b[r + 1] = min(b[r + 1], ratio * b[r] - 2.0 * problem.margin)
        else:
            b[r + 1] = max(b[r + 1], ratio * b[r] + 2.0 * problem.margin)
    x[1 : 1 + p] = b
    x[p + 1] = prior.c_mean
    return x


def build_qp(problem):
    """Assemble the per-zone QP over x = (a, b_1..b_p, c, q).

    The shared-q and shared-a/c equalities are eliminated by
    substitution, so the data term for mode m touches slots
    (a, b_m, c, q) only.  A rank-deficient data Gram matrix is reported
    with a ConditioningWarning (the priors keep the problem solvable).
    """
    p = problem.n_modes
    n = p + 3
    prior = problem.prior
    gram = np.zeros((n, n))
    lin = np.zeros(n)
    const = 0.0
    for m, (t, f, r) in enumerate(problem.samples):
        y = t[1:]
        V = np.zeros((y.shape[0], n))
        V[:, 0] = t[:-1]
        V[:, 1 + m] = f[:-1]
        V[:, p + 1] = r[:-1]
        V[:, p + 2] = 1.0
        gram += V.T @ V
        lin += V.T @ y
        const += float(y @ y)

    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] < 1e-12 * max(eigs[-1], 1.0):
        warnings.warn(
            "identification data barely excites some regressors; "
            "estimates will lean on the priors",
            ConditioningWarning,
            stacklevel=2,
        )

    # Per-mode prior penalties; the shared a and c collect one term per mode.
    D = np.zeros(n)
    mu = np.zeros(n)
    D[0] = p / prior.a_var
    mu[0] = prior.a_mean
    D[1 : 1 + p] = 1.0 / prior.b_var
    mu[1 : 1 + p] = prior.b_mean
    D[p + 1] = p / prior.c_var
    mu[p + 1] = prior.c_mean

    H = 2.0 * (gram + np.diag(D))
    g = -2.0 * (lin + D * mu)
    const += float(mu @ (D * mu))

    rows, rhs = _chain_rows(problem.sats, p, n, problem.chain, problem.margin)
    a_hi = np.zeros(n)
    a_hi[0] = 1.0
    a_lo = np.zeros(n)
    a_lo[0] = -1.0
    rows += [a_hi, a_lo]
    rhs += [1.0, -A_FLOOR]
    G = np.vstack(rows)
    h = np.asarray(rhs, dtype=float)
    return QuadProgram(H=H, g=g, const=const, G=G, h=h, n_modes=p, x_start=_feasible_start(problem))


def solve_qp(program, x0=None):
    """Solve a QuadProgram to its KKT point.

    Deterministic: identical programs give bit-identical solutions.
    Raises qp.QpError on infeasibility or non-convergence; asserts the
    returned point violates no constraint by more than 1e-8.
    """
    start = x0 if x0 is not None else program.x_start
    x, obj, _, _, iters = _qp.solve_qp_active_set(
        program.H, program.g, G=program.G, h=program.h, x0=start
    )
    if program.G.size and float((program.G @ x - program.h).max()) > 1e-8:
        raise _qp.QpError("solution violates constraints beyond tolerance")
    return QpSolution(x=x, objective=obj + program.const, iterations=iters)


@dataclass(frozen=True)
class ZoneIdResult:
    coeffs: ZoneCoeffs
    q: float
    objective: float
    residual_rms: float


def identify_zone(problem):
    """Fit one zone's (a, b per mode, c, q) from its mode windows."""
    program = build_qp(problem)
    sol = solve_qp(program)
    a, b, c, q = sol.coefficients(problem.n_modes)
    coeffs = ZoneCoeffs.from_shared(a, b, c)
    n_res = sum(t.shape[0] - 1 for t, _, _ in problem.samples)
    rss = 0.0
    for m, (t, f, r) in enumerate(problem.samples):
        pred = a * t[:-1] + b[m] * f[:-1] + c * r[:-1] + q
        rss += float(np.sum((t[1:] - pred) ** 2))
    return ZoneIdResult(coeffs=coeffs, q=q, objective=sol.objective, residual_rms=float(np.sqrt(rss / n_res)))


def identify_zones(problems, max_workers=None):
    """Identify several zones; each solve is independent and stateless."""
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(identify_zone, problems))
    return [identify_zone(p) for p in problems]


def assemble_model(sats, results):
    """Bundle per-zone results into a HybridModel plus its JSON document."""
    model = HybridModel(
        modes=modes_from_sats(sats),
        zones=[r.coeffs for r in results],
        q=np.array([r.q for r in results]),
    )
    doc = model.to_dict()
    doc["residual_rms"] = [r.residual_rms for r in results]
    doc["objective"] = [r.objective for r in results]
    return model, doc
