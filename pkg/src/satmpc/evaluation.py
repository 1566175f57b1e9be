"""Energy and comfort evaluation against outside air temperature.

Controllers are never compared on raw daily totals: two runs see
different weather.  Instead each hourly observation (OAT, energy kWh)
or (OAT, comfort excess) is smoothed into a characteristic curve by
Gaussian kernel regression, and the curve is averaged under a fixed
set of 24 hourly OAT distributions (uniform over each hour-of-day's
observed range, pooled across both controllers).  Summing the 24
averages gives a weather-normalized kWh/day or degF-excess/day figure
that is comparable between controllers.

Significance comes from a percentile bootstrap: hourly records are
resampled with replacement within each controller, the day statistic
recomputed per resample (the quadrature is a fixed linear functional
of the curve, so resampling reduces to reweighting the regression),
and a recentered two-sided p-value read off the resample distribution.

Comfort per hour: mean over the four 15-minute samples of the per-zone
band excess (|T - S| - B)+, averaged over zones.  Zero exactly when
every sample of every zone sits inside its band.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .timebase import STEPS_PER_HOUR

__all__ = [
    "SupportError",
    "HourlyRecord",
    "Characteristic",
    "BootstrapResult",
    "ComparisonReport",
    "comfort_hour",
    "hourly_records",
    "records_from_traces",
    "hourly_oat_distributions",
    "kernel_regression",
    "day_energy",
    "bootstrap_compare",
    "compare_controllers",
    "characteristic_csv",
]

DEFAULT_BANDWIDTH_F = 2.0
GRID_SPACING_F = 1.0


class SupportError(ValueError):
    """A requested OAT range has no (or one-sided) data support."""


@dataclass(frozen=True)
class HourlyRecord:
    """One controller-hour: weather, energy, mean temps, and comfort excess."""

    hour: int
    oat: float
    energy: float
    mean_temps: np.ndarray
    setpoints: np.ndarray
    comfort: float

    def __post_init__(self):
        if not 0 <= self.hour <= 23:
            raise ValueError(f"hour must be 0..23, got {self.hour}")
        if self.energy < 0:
            raise ValueError(f"hourly energy must be >= 0, got {self.energy}")
        if self.comfort < 0:
            raise ValueError(f"comfort excess must be >= 0, got {self.comfort}")
        object.__setattr__(self, "mean_temps", np.asarray(self.mean_temps, dtype=float))
        object.__setattr__(self, "setpoints", np.asarray(self.setpoints, dtype=float))


def comfort_hour(temps, setpoints, bands=1.0):
    """Band-excess comfort metric for one hour of samples.

    temps is [samples, zones] (15-minute resolution, so normally 4
    rows); the integral over the hour is the mean over rows.  Returns
    degF of average excess per zone-hour; 0 iff all samples in band.
    """
    t = np.atleast_2d(np.asarray(temps, dtype=float))
    s = np.asarray(setpoints, dtype=float)
    b = np.broadcast_to(np.asarray(bands, dtype=float), s.shape)
    if t.shape[1] != s.shape[0]:
        raise ValueError(f"temps have {t.shape[1]} zones, setpoints {s.shape[0]}")
    if np.any(b < 0):
        raise ValueError("bands must be >= 0")
    excess = np.maximum(np.abs(t - s) - b, 0.0)
    return float(excess.mean())


def hourly_records(trace, bands=None):
    """Aggregate a 15-minute trace into per-hour records.

    The trace must start on an hour boundary and span whole hours.
    bands default to 1 degF per zone (the trace schema does not carry
    them).
    """
    if trace.start.minute or trace.start.second or trace.start.microsecond:
        raise ValueError(f"trace must start on an hour boundary, starts {trace.start}")
    if trace.n_steps % STEPS_PER_HOUR != 0:
        raise ValueError(f"trace length {trace.n_steps} is not whole hours")
    if bands is None:
        bands = np.ones(trace.n_zones)
    records = []
    for h in range(trace.n_steps // STEPS_PER_HOUR):
        sl = slice(h * STEPS_PER_HOUR, (h + 1) * STEPS_PER_HOUR)
        sp = trace.setpoints[sl][0]
        records.append(
            HourlyRecord(
                hour=(trace.start.hour + h) % 24,
                oat=float(trace.oat[sl].mean()),
                energy=float(trace.energy[sl].sum()),
                mean_temps=trace.temps[sl].mean(axis=0),
                setpoints=sp,
                comfort=comfort_hour(trace.temps[sl], sp, bands),
            )
        )
    return records


def records_from_traces(traces, bands=None):
    """Flatten several day traces into one hourly record list."""
    out = []
    for tr in traces:
        out.extend(hourly_records(tr, bands=bands))
    return out


@dataclass(frozen=True)
class Characteristic:
    """Kernel-regressed curve over an OAT grid.

    values are NaN where no data point falls within one bandwidth of
    the grid point; counts hold the number of such points.
    """

    grid: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    bandwidth: float

    @property
    def supported(self):
        return self.counts > 0

    def value_at(self, x):
        """Linear interpolation across the supported part of the grid."""
        mask = self.supported
        if not mask.any():
            raise SupportError("characteristic has no supported grid points")
        g, v = self.grid[mask], self.values[mask]
        x = float(x)
        if x < g[0] or x > g[-1]:
            raise SupportError(f"OAT {x:.2f} outside supported range [{g[0]:.2f}, {g[-1]:.2f}]")
        return float(np.interp(x, g, v))


def _default_grid(x):
    lo = np.floor(x.min())
    hi = np.ceil(x.max())
    return np.arange(lo, hi + GRID_SPACING_F / 2, GRID_SPACING_F)


def _kernel_weights(x, grid, bandwidth):
    # [grid, points] Gaussian weights
    z = (x[None, :] - grid[:, None]) / bandwidth
    return np.exp(-0.5 * z * z)


def kernel_regression(x, y, bandwidth=DEFAULT_BANDWIDTH_F, grid=None):
    """Gaussian locally-weighted average of y against x on a 1 degF grid."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size == 0:
        raise ValueError("need matching non-empty 1-D x and y")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise ValueError("x and y must be finite")
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    grid = _default_grid(x) if grid is None else np.asarray(grid, dtype=float)
    w = _kernel_weights(x, grid, bandwidth)
    counts = (np.abs(x[None, :] - grid[:, None]) <= bandwidth).sum(axis=1)
    den = w.sum(axis=1)
    values = np.full(grid.shape, np.nan)
    mask = counts > 0
    values[mask] = (w @ y)[mask] / den[mask]
    return Characteristic(grid=grid, values=values, counts=counts, bandwidth=float(bandwidth))


def hourly_oat_distributions(*record_sets):
    """Per-hour uniform OAT ranges (lo, hi), pooled over all given record sets."""
    pool = {h: [] for h in range(24)}
    for records in record_sets:
        for r in records:
            pool[r.hour].append(r.oat)
    dists = []
    for h in range(24):
        if not pool[h]:
            raise SupportError(f"no records for hour {h}; cannot form its OAT distribution")
        dists.append((min(pool[h]), max(pool[h])))
    return dists


def _quad_coeffs(grid, supported, dists):
    """Coefficient vector Q with day_statistic = Q @ curve_values.

    Each hourly distribution contributes the trapezoid average of the
    linearly-interpolated curve over its [lo, hi] range (a point mass
    when lo == hi), which is linear in the grid values.  Raises
    SupportError when any range leaves the supported part of the grid.
    """
    idx = np.flatnonzero(supported)
    if idx.size == 0:
        raise SupportError("characteristic has no supported grid points")
    g = grid[idx]
    coeffs = np.zeros(grid.shape[0])

    def interp_weights(x):
        # weights over the supported grid points for the value at x
        if x < g[0] or x > g[-1]:
            raise SupportError(
                f"OAT {x:.2f} outside supported range [{g[0]:.2f}, {g[-1]:.2f}]"
            )
        k = int(np.searchsorted(g, x, side="right")) - 1
        if k == g.shape[0] - 1:
            return [(idx[k], 1.0)]
        t = (x - g[k]) / (g[k + 1] - g[k])
        return [(idx[k], 1.0 - t), (idx[k + 1], t)]

    for hour, (lo, hi) in enumerate(dists):
        lo, hi = float(lo), float(hi)
        if lo > hi:
            raise ValueError(f"hour {hour}: distribution range ({lo}, {hi}) is inverted")
        if lo == hi:
            for gi, wt in interp_weights(lo):
                coeffs[gi] += wt
            continue
        inner = g[(g > lo) & (g < hi)]
        nodes = np.concatenate(([lo], inner, [hi]))
        node_w = np.zeros(nodes.shape[0])
        seg = np.diff(nodes)
        node_w[:-1] += seg / 2.0
        node_w[1:] += seg / 2.0
        node_w /= hi - lo
        for x, wt in zip(nodes, node_w):
            for gi, frac in interp_weights(x):
                coeffs[gi] += wt * frac
    return coeffs


def day_energy(characteristic, dists):
    """Average the curve under each hourly OAT distribution and sum.

    Works for any per-hour characteristic (energy in kWh, comfort in
    degF excess); the result is a per-day figure.
    """
    q = _quad_coeffs(characteristic.grid, characteristic.supported, dists)
    vals = np.where(characteristic.supported, characteristic.values, 0.0)
    return float(q @ vals)


@dataclass(frozen=True)
class BootstrapResult:
    delta: float
    p_value: float
    ci_low: float
    ci_high: float
    resamples: int
    seed: int

    @property
    def significant(self):
        return self.ci_low > 0.0 or self.ci_high < 0.0

    def to_dict(self):
        return {
            "delta": self.delta,
            "p_value": self.p_value,
            "ci": [self.ci_low, self.ci_high],
            "resamples": self.resamples,
            "seed": self.seed,
        }


def _stat_values(records, statistic):
    x = np.array([r.oat for r in records])
    if statistic == "energy":
        y = np.array([r.energy for r in records])
    elif statistic == "comfort":
        y = np.array([r.comfort for r in records])
    elif callable(statistic):
        y = np.array([float(statistic(r)) for r in records])
    else:
        raise ValueError(f"statistic must be 'energy', 'comfort', or callable, got {statistic!r}")
    return x, y


def _resampled_days(x, y, grid, bandwidth, quad, point_curve, resamples, rng):
    """Day statistic for each multinomial resample of (x, y) records."""
    n = x.shape[0]
    w = _kernel_weights(x, grid, bandwidth)
    counts = rng.multinomial(n, np.full(n, 1.0 / n), size=resamples).astype(float)
    nums = counts @ (w * y[None, :]).T
    dens = counts @ w.T
    tiny = 1e-300
    curves = np.where(dens > tiny, nums / np.where(dens > tiny, dens, 1.0), point_curve[None, :])
    return curves @ quad


def bootstrap_compare(records_a, records_b, statistic="energy", resamples=2000,
                      seed=0, bandwidth=DEFAULT_BANDWIDTH_F, grid=None, dists=None):
    """Percentile bootstrap of the day-statistic difference (B minus A).

    The point estimate uses the full data and is independent of seed
    and resample count.  p is the recentered two-sided tail fraction
    (1 + #{|d* - d| >= |d|}) / (resamples + 1).  Use at least 1000
    resamples for stable tails.
    """
    if not records_a or not records_b:
        raise ValueError("both record sets must be non-empty")
    resamples = int(resamples)
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    xa, ya = _stat_values(records_a, statistic)
    xb, yb = _stat_values(records_b, statistic)
    if dists is None:
        dists = hourly_oat_distributions(records_a, records_b)
    if grid is None:
        grid = _default_grid(np.concatenate([xa, xb]))
    else:
        grid = np.asarray(grid, dtype=float)

    char_a = kernel_regression(xa, ya, bandwidth, grid)
    char_b = kernel_regression(xb, yb, bandwidth, grid)
    try:
        quad_a = _quad_coeffs(grid, char_a.supported, dists)
        quad_b = _quad_coeffs(grid, char_b.supported, dists)
    except SupportError as exc:
        raise SupportError(f"no overlapping OAT support between the two record sets: {exc}") from None

    curve_a = np.where(char_a.supported, char_a.values, 0.0)
    curve_b = np.where(char_b.supported, char_b.values, 0.0)
    day_a = float(quad_a @ curve_a)
    day_b = float(quad_b @ curve_b)
    delta = day_b - day_a

    rng = np.random.default_rng(seed)
    days_a = _resampled_days(xa, ya, grid, bandwidth, quad_a, curve_a, resamples, rng)
    days_b = _resampled_days(xb, yb, grid, bandwidth, quad_b, curve_b, resamples, rng)
    deltas = days_b - days_a

    ci_low, ci_high = np.percentile(deltas, [2.5, 97.5])
    if delta == 0.0:
        p = 1.0
    else:
        p = (1.0 + float(np.count_nonzero(np.abs(deltas - delta) >= abs(delta)))) / (resamples + 1.0)
    return BootstrapResult(
        delta=delta, p_value=p, ci_low=float(ci_low), ci_high=float(ci_high),
        resamples=resamples, seed=int(seed),
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Both bootstrap verdicts plus the supplementary pointwise curves.

    curve_delta is the pointwise B-minus-A curve difference on the
    shared grid (NaN where either side lacks support); it is a
    descriptive supplement, not the test statistic.
    """

    energy: BootstrapResult
    comfort: BootstrapResult
    dists: list
    n_hours_a: int
    n_hours_b: int
    grid: np.ndarray = field(repr=False)
    curve_delta: np.ndarray = field(repr=False)

    def to_dict(self):
        return {
            "energy": self.energy.to_dict(),
            "comfort": self.comfort.to_dict(),
            "hourly_oat_ranges": [[lo, hi] for lo, hi in self.dists],
            "n_hours": {"a": self.n_hours_a, "b": self.n_hours_b},
            "supplementary_pointwise_curve": {
                "note": "descriptive curve difference, not the test statistic",
                "oat": self.grid.tolist(),
                "energy_delta": [None if np.isnan(v) else v for v in self.curve_delta],
            },
        }


def compare_controllers(records_a, records_b, resamples=2000, seed=0,
                        bandwidth=DEFAULT_BANDWIDTH_F):
    """Full report: energy and comfort bootstraps plus the curve supplement."""
    dists = hourly_oat_distributions(records_a, records_b)
    energy = bootstrap_compare(
        records_a, records_b, "energy", resamples=resamples, seed=seed,
        bandwidth=bandwidth, dists=dists,
    )
    comfort = bootstrap_compare(
        records_a, records_b, "comfort", resamples=resamples, seed=seed + 1,
        bandwidth=bandwidth, dists=dists,
    )
    xa, ya = _stat_values(records_a, "energy")
    xb, yb = _stat_values(records_b, "energy")
    grid = _default_grid(np.concatenate([xa, xb]))
    char_a = kernel_regression(xa, ya, bandwidth, grid)
    char_b = kernel_regression(xb, yb, bandwidth, grid)
    return ComparisonReport(
        energy=energy,
        comfort=comfort,
        dists=dists,
        n_hours_a=len(records_a),
        n_hours_b=len(records_b),
        grid=grid,
        curve_delta=char_b.values - char_a.values,
    )


def characteristic_csv(characteristic, path):
    """Plot-ready CSV: oat, value, count per grid point (value blank where unsupported)."""
    with open(path, "w") as fh:
        fh.write("oat,value,count\n")
        for g, v, c in zip(characteristic.grid, characteristic.values, characteristic.counts):
            val = "" if np.isnan(v) else repr(float(v))
            fh.write(f"{repr(float(g))},{val},{int(c)}\n")
