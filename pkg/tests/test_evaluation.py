"""Evaluation tests: comfort metric, kernel curves, quadrature, bootstrap."""

from datetime import datetime, timezone

import numpy as np
import pytest

from satmpc.evaluation import (
    BootstrapResult,
    Characteristic,
    HourlyRecord,
    SupportError,
    bootstrap_compare,
    characteristic_csv,
    comfort_hour,
    compare_controllers,
    day_energy,
    hourly_oat_distributions,
    hourly_records,
    kernel_regression,
    records_from_traces,
)
from satmpc.traces import TraceSet


def make_trace(start_hour=0, hours=2, n_zones=2, oat_fn=None, temps=72.0, energy=1.0):
    steps = hours * 4
    oat = np.array([oat_fn(k) if oat_fn else 75.0 for k in range(steps)])
    return TraceSet(
        start=datetime(2026, 6, 1, start_hour, tzinfo=timezone.utc),
        oat=oat,
        sat=np.full(steps, 55.0),
        temps=np.broadcast_to(np.asarray(temps, dtype=float), (steps, n_zones)).copy(),
        flows=np.full((steps, n_zones), 0.5),
        reheats=np.zeros((steps, n_zones)),
        setpoints=np.full((steps, n_zones), 72.0),
        energy=np.full(steps, float(energy)),
    )


def synthetic_records(rng, n_hours, energy_fn, comfort=0.0, oat_lo=60.0, oat_hi=90.0):
    out = []
    for i in range(n_hours):
        oat = rng.uniform(oat_lo, oat_hi)
        out.append(
            HourlyRecord(hour=i % 24, oat=float(oat), energy=float(energy_fn(oat, rng)),
                         mean_temps=np.array([72.0]), setpoints=np.array([72.0]),
                         comfort=comfort)
        )
    return out


class TestComfortHour:
    def test_constant_two_degree_excursion_scores_one(self):
        temps = np.full((4, 3), 74.0)
        assert comfort_hour(temps, [72.0, 72.0, 72.0], 1.0) == 1.0

    def test_zero_iff_every_sample_in_band(self):
        inside = np.array([[72.9, 71.1], [73.0, 71.0], [72.0, 72.0], [71.5, 72.5]])
        assert comfort_hour(inside, [72.0, 72.0], 1.0) == 0.0
        one_out = inside.copy()
        one_out[2, 1] = 73.5
        assert comfort_hour(one_out, [72.0, 72.0], 1.0) > 0.0

    def test_cold_excursions_count_too(self):
        assert comfort_hour(np.full((4, 1), 69.5), [72.0], 1.0) == pytest.approx(1.5)

    def test_mean_over_samples_and_zones(self):
        temps = np.array([[74.0, 72.0], [72.0, 72.0], [72.0, 72.0], [72.0, 72.0]])
        # one sample of eight carries excess 1.0
        assert comfort_hour(temps, [72.0, 72.0], 1.0) == pytest.approx(1.0 / 8.0)

    def test_per_zone_bands(self):
        temps = np.full((2, 2), 74.0)
        got = comfort_hour(temps, [72.0, 72.0], bands=[1.0, 2.0])
        assert got == pytest.approx((1.0 + 0.0) / 2.0)

    def test_validation(self):
        with pytest.raises(ValueError, match="zones"):
            comfort_hour(np.zeros((4, 2)), [72.0], 1.0)
        with pytest.raises(ValueError, match=">= 0"):
            comfort_hour(np.full((4, 1), 72.0), [72.0], -1.0)


class TestHourlyRecords:
    def test_aggregation(self):
        trace = make_trace(hours=2, oat_fn=lambda k: 70.0 + k, energy=2.5)
        recs = hourly_records(trace)
        assert len(recs) == 2
        assert recs[0].hour == 0 and recs[1].hour == 1
        assert recs[0].oat == pytest.approx(np.mean([70, 71, 72, 73]))
        assert recs[0].energy == pytest.approx(10.0)
        np.testing.assert_allclose(recs[0].mean_temps, [72.0, 72.0])
        assert recs[0].comfort == 0.0

    def test_hour_wraps_midnight(self):
        trace = make_trace(start_hour=23, hours=2)
        recs = hourly_records(trace)
        assert [r.hour for r in recs] == [23, 0]

    def test_alignment_required(self):
        trace = make_trace(hours=1)
        object.__setattr__(trace, "start", trace.start.replace(minute=15))
        with pytest.raises(ValueError, match="hour boundary"):
            hourly_records(trace)

    def test_whole_hours_required(self):
        trace = make_trace(hours=1)
        clipped = TraceSet(
            start=trace.start, oat=trace.oat[:3], sat=trace.sat[:3],
            temps=trace.temps[:3], flows=trace.flows[:3], reheats=trace.reheats[:3],
            setpoints=trace.setpoints[:3], energy=trace.energy[:3],
        )
        with pytest.raises(ValueError, match="whole hours"):
            hourly_records(clipped)

    def test_flattening(self):
        traces = [make_trace(hours=2), make_trace(hours=3)]
        assert len(records_from_traces(traces)) == 5

    def test_record_validation(self):
        with pytest.raises(ValueError, match="hour"):
            HourlyRecord(hour=24, oat=70.0, energy=1.0, mean_temps=[72.0],
                         setpoints=[72.0], comfort=0.0)
        with pytest.raises(ValueError, match="energy"):
            HourlyRecord(hour=0, oat=70.0, energy=-1.0, mean_temps=[72.0],
                         setpoints=[72.0], comfort=0.0)


class TestKernelRegression:
    def test_constant_signal_reproduced_exactly(self):
        x = np.array([61.0, 70.0, 75.0, 88.0])
        char = kernel_regression(x, np.full(4, 3.25))
        assert char.bandwidth == 2.0
        np.testing.assert_allclose(char.values[char.supported], 3.25, atol=1e-12)

    def test_hand_computed_two_points(self):
        char = kernel_regression(np.array([68.0, 70.0]), np.array([1.0, 3.0]),
                                 bandwidth=2.0, grid=np.array([69.0]))
        # both points sit exactly one degree away: equal weights
        assert char.values[0] == pytest.approx(2.0, abs=1e-12)
        assert char.counts[0] == 2

    def test_symmetric_points_cancel_on_linear_signal(self):
        x = np.array([66.0, 74.0])
        y = (x - 70.0) * 0.5
        char = kernel_regression(x, y, bandwidth=10.0, grid=np.array([70.0]))
        assert char.values[0] == pytest.approx(0.0, abs=1e-12)

    def test_support_counts_use_one_bandwidth(self):
        char = kernel_regression(np.array([70.0]), np.array([5.0]), bandwidth=2.0,
                                 grid=np.arange(60.0, 81.0))
        np.testing.assert_array_equal(char.supported, np.abs(char.grid - 70.0) <= 2.0)
        np.testing.assert_allclose(char.values[char.supported], 5.0)
        assert np.all(np.isnan(char.values[~char.supported]))

    def test_default_grid_spans_data_at_one_degree(self):
        char = kernel_regression(np.array([64.3, 71.8]), np.array([1.0, 2.0]))
        assert char.grid[0] == 64.0
        assert char.grid[-1] == 72.0
        np.testing.assert_allclose(np.diff(char.grid), 1.0)

    def test_validation(self):
        with pytest.raises(ValueError, match="non-empty"):
            kernel_regression(np.zeros(0), np.zeros(0))
        with pytest.raises(ValueError, match="bandwidth"):
            kernel_regression(np.array([70.0]), np.array([1.0]), bandwidth=0.0)
        with pytest.raises(ValueError, match="finite"):
            kernel_regression(np.array([np.nan]), np.array([1.0]))

    def test_value_at_interpolates_and_guards(self):
        char = kernel_regression(np.array([70.0, 72.0]), np.array([1.0, 2.0]),
                                 bandwidth=2.0, grid=np.arange(68.0, 75.0))
        mid = char.value_at(71.0)
        assert char.value_at(char.grid[char.supported][0]) == char.values[char.supported][0]
        assert np.isfinite(mid)
        with pytest.raises(SupportError, match="outside supported"):
            char.value_at(100.0)
        empty = Characteristic(grid=np.arange(3.0), values=np.full(3, np.nan),
                               counts=np.zeros(3, dtype=int), bandwidth=2.0)
        with pytest.raises(SupportError, match="no supported"):
            empty.value_at(1.0)


class TestQuadrature:
    def test_exact_on_linear_curve(self):
        # trapezoid quadrature of a piecewise-linear interpolant is exact
        # when the underlying curve is linear: mean over [lo, hi] is the
        # midpoint value
        grid = np.arange(60.0, 91.0)
        values = 0.8 * grid - 30.0
        char = Characteristic(grid=grid, values=values,
                              counts=np.ones_like(grid, dtype=int), bandwidth=2.0)
        rng = np.random.default_rng(0)
        dists = []
        want = 0.0
        for _ in range(24):
            lo = rng.uniform(61.0, 85.0)
            hi = lo + rng.uniform(0.0, 4.0)
            dists.append((lo, hi))
            want += 0.8 * (lo + hi) / 2.0 - 30.0
        assert day_energy(char, dists) == pytest.approx(want, abs=1e-9)

    def test_point_mass_hours(self):
        grid = np.arange(60.0, 91.0)
        char = Characteristic(grid=grid, values=grid * 2.0,
                              counts=np.ones_like(grid, dtype=int), bandwidth=2.0)
        dists = [(70.5, 70.5)] * 24
        assert day_energy(char, dists) == pytest.approx(24 * 141.0, abs=1e-9)

    def test_range_outside_support_raises(self):
        grid = np.arange(60.0, 91.0)
        counts = ((grid >= 65) & (grid <= 80)).astype(int)
        char = Characteristic(grid=grid, values=np.where(counts, 1.0, np.nan),
                              counts=counts, bandwidth=2.0)
        with pytest.raises(SupportError, match="outside supported"):
            day_energy(char, [(82.0, 85.0)] + [(70.0, 71.0)] * 23)

    def test_inverted_range_rejected(self):
        grid = np.arange(60.0, 91.0)
        char = Characteristic(grid=grid, values=np.ones_like(grid),
                              counts=np.ones_like(grid, dtype=int), bandwidth=2.0)
        with pytest.raises(ValueError, match="inverted"):
            day_energy(char, [(75.0, 70.0)] * 24)


class TestDistributions:
    def test_pooled_min_max_per_hour(self):
        recs_a = [HourlyRecord(hour=h, oat=70.0 + h, energy=1.0, mean_temps=[72.0],
                               setpoints=[72.0], comfort=0.0) for h in range(24)]
        recs_b = [HourlyRecord(hour=h, oat=68.0 + h, energy=1.0, mean_temps=[72.0],
                               setpoints=[72.0], comfort=0.0) for h in range(24)]
        dists = hourly_oat_distributions(recs_a, recs_b)
        assert dists[0] == (68.0, 70.0)
        assert dists[23] == (91.0, 93.0)

    def test_missing_hour_raises(self):
        recs = [HourlyRecord(hour=0, oat=70.0, energy=1.0, mean_temps=[72.0],
                             setpoints=[72.0], comfort=0.0)]
        with pytest.raises(SupportError, match="hour 1"):
            hourly_oat_distributions(recs)


class TestBootstrap:
    def all_hours_records(self, rng, days, energy_fn, comfort=0.0):
        out = []
        for d in range(days):
            for h in range(24):
                oat = 70.0 + 8.0 * np.sin(2 * np.pi * (h / 24 - 0.375)) + rng.normal(0, 0.5)
                out.append(HourlyRecord(hour=h, oat=float(oat),
                                        energy=float(energy_fn(oat, rng)),
                                        mean_temps=np.array([72.0]),
                                        setpoints=np.array([72.0]), comfort=comfort))
        return out

    def test_identical_sets_give_p_one(self):
        rng = np.random.default_rng(0)
        recs = self.all_hours_records(rng, 4, lambda oat, r: 10.0 + 0.3 * oat)
        res = bootstrap_compare(recs, recs, "energy", resamples=200, seed=1)
        assert res.delta == 0.0
        assert res.p_value == 1.0
        assert not res.significant

    def test_constant_shift_detected(self):
        rng = np.random.default_rng(1)
        recs_a = self.all_hours_records(rng, 4, lambda oat, r: 10.0 + 0.3 * oat)
        recs_b = [
            HourlyRecord(hour=r.hour, oat=r.oat, energy=r.energy + 5.0,
                         mean_temps=r.mean_temps, setpoints=r.setpoints,
                         comfort=r.comfort)
            for r in recs_a
        ]
        res = bootstrap_compare(recs_a, recs_b, "energy", resamples=500, seed=2)
        # same OAT values: curves differ by exactly +5, the day sums by 24 * 5
        assert res.delta == pytest.approx(120.0, abs=1e-9)
        assert res.significant
        assert res.ci_low > 0.0
        assert res.p_value == pytest.approx(1.0 / 501.0)

    def test_seed_reproducibility(self):
        rng = np.random.default_rng(3)
        recs_a = self.all_hours_records(rng, 3, lambda oat, r: 10.0 + 0.3 * oat + r.normal(0, 1))
        recs_b = self.all_hours_records(rng, 3, lambda oat, r: 9.0 + 0.3 * oat + r.normal(0, 1))
        r1 = bootstrap_compare(recs_a, recs_b, "energy", resamples=300, seed=7)
        r2 = bootstrap_compare(recs_a, recs_b, "energy", resamples=300, seed=7)
        r3 = bootstrap_compare(recs_a, recs_b, "energy", resamples=300, seed=8)
        assert (r1.delta, r1.p_value, r1.ci_low, r1.ci_high) == (r2.delta, r2.p_value, r2.ci_low, r2.ci_high)
        assert r3.delta == r1.delta  # point estimate is seed-free
        assert (r3.ci_low, r3.ci_high) != (r1.ci_low, r1.ci_high)

    def test_comfort_statistic_and_callable(self):
        rng = np.random.default_rng(4)
        recs_a = self.all_hours_records(rng, 2, lambda oat, r: 10.0, comfort=0.2)
        recs_b = self.all_hours_records(rng, 2, lambda oat, r: 10.0, comfort=0.5)
        res = bootstrap_compare(recs_a, recs_b, "comfort", resamples=100, seed=0)
        assert res.delta == pytest.approx(0.3 * 24, abs=1e-9)
        res2 = bootstrap_compare(recs_a, recs_b, lambda r: r.comfort, resamples=100, seed=0)
        assert res2.delta == pytest.approx(res.delta, abs=1e-12)
        with pytest.raises(ValueError, match="statistic"):
            bootstrap_compare(recs_a, recs_b, "chill", resamples=10)

    def test_validation(self):
        rng = np.random.default_rng(5)
        recs = self.all_hours_records(rng, 1, lambda oat, r: 1.0)
        with pytest.raises(ValueError, match="non-empty"):
            bootstrap_compare([], recs)
        with pytest.raises(ValueError, match="resamples"):
            bootstrap_compare(recs, recs, resamples=0)

    def test_disjoint_support_raises(self):
        cold = [HourlyRecord(hour=h, oat=50.0 + 0.01 * h, energy=1.0, mean_temps=[72.0],
                             setpoints=[72.0], comfort=0.0) for h in range(24)]
        hot = [HourlyRecord(hour=h, oat=90.0 + 0.01 * h, energy=1.0, mean_temps=[72.0],
                            setpoints=[72.0], comfort=0.0) for h in range(24)]
        with pytest.raises(SupportError, match="support"):
            bootstrap_compare(cold, hot, "energy", resamples=10)


class TestReport:
    def test_compare_controllers_shape(self):
        rng = np.random.default_rng(6)
        mk = TestBootstrap().all_hours_records
        recs_a = mk(rng, 3, lambda oat, r: 12.0 + 0.4 * oat + r.normal(0, 0.5), comfort=0.0)
        recs_b = mk(rng, 2, lambda oat, r: 8.0 + 0.4 * oat + r.normal(0, 0.5), comfort=0.0)
        report = compare_controllers(recs_a, recs_b, resamples=200, seed=0)
        assert report.n_hours_a == 72 and report.n_hours_b == 48
        assert report.energy.delta < 0.0
        assert report.comfort.delta == 0.0
        doc = report.to_dict()
        assert set(doc) == {"energy", "comfort", "hourly_oat_ranges", "n_hours",
                            "supplementary_pointwise_curve"}
        assert len(doc["hourly_oat_ranges"]) == 24
        curve = doc["supplementary_pointwise_curve"]
        assert len(curve["oat"]) == len(curve["energy_delta"])
        assert "not the test statistic" in curve["note"]

    def test_characteristic_csv(self, tmp_path):
        char = kernel_regression(np.array([70.0]), np.array([5.0]), bandwidth=2.0,
                                 grid=np.arange(66.0, 75.0))
        path = tmp_path / "curve.csv"
        characteristic_csv(char, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "oat,value,count"
        assert len(lines) == 10
        # unsupported rows leave the value column empty
        first = lines[1].split(",")
        assert first[1] == "" and first[2] == "0"
        mid = lines[5].split(",")
        assert float(mid[1]) == 5.0 and int(mid[2]) == 1
