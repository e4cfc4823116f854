import math
import random

import pytest

from fanetsim.geo import GeoPosition, LocalPosition, distance, from_local
from fanetsim.mobility import (
    CircularTrajectory,
    FixedTrajectory,
    GpsErrorModel,
    LawnmowerTrajectory,
    LogReplayTrajectory,
    ShuttleTrajectory,
    build_trajectory,
    load_position_log,
)

ORIGIN = GeoPosition(46.51843, 6.561591, 0.0)


def local(e, n, u=0.0):
    return from_local(ORIGIN, LocalPosition(e, n, u))


def numeric_speed(traj, t, dt=0.1):
    x0 = traj.local_position(t - dt / 2)
    x1 = traj.local_position(t + dt / 2)
    return math.dist(x0, x1) / dt


class TestCircular:
    def make(self, phase=0.0):
        return CircularTrajectory(ORIGIN, local(0, 0, 75), radius=30.0,
                                  speed=12.0, phase=phase)

    def test_starts_due_east_of_center(self):
        e, n, u = self.make().local_position(0.0)
        assert (e, n, u) == pytest.approx((30.0, 0.0, 75.0))

    def test_period_from_speed_and_radius(self):
        traj = self.make()
        assert traj.period == pytest.approx(2 * math.pi * 30 / 12)

    def test_closure_within_centimeter(self):
        traj = self.make(phase=1.0)
        for t in (0.0, 3.7, 12.2):
            a = traj.local_position(t)
            b = traj.local_position(t + traj.period)
            assert math.dist(a, b) < 0.01

    def test_speed_law(self):
        traj = self.make(phase=0.5)
        for t in (0.0, 1.0, 7.5, 100.0):
            assert numeric_speed(traj, t) == pytest.approx(12.0, rel=0.01)

    def test_feasibility_bounds(self):
        with pytest.raises(ValueError):
            CircularTrajectory(ORIGIN, local(0, 0), radius=20.0, speed=12.0)
        with pytest.raises(ValueError):
            CircularTrajectory(ORIGIN, local(0, 0), radius=30.0, speed=25.0)


class TestShuttle:
    def make(self):
        return ShuttleTrajectory(ORIGIN, local(0, 0, 75), bearing_deg=270.0,
                                 leg_m=600.0, speed=12.0)

    def test_out_and_back_timing(self):
        traj = self.make()
        assert traj.period == pytest.approx(100.0)
        assert traj.local_position(0.0) == pytest.approx((0.0, 0.0, 75.0))
        # halfway out
        e, n, u = traj.local_position(25.0)
        assert e == pytest.approx(-300.0)
        # at the far end
        e, n, u = traj.local_position(50.0)
        assert e == pytest.approx(-600.0)
        # back at start after one period
        assert traj.local_position(100.0) == pytest.approx((0.0, 0.0, 75.0), abs=1e-9)

    def test_speed_law_mid_leg(self):
        traj = self.make()
        for t in (10.0, 30.0, 60.0, 90.0):
            assert numeric_speed(traj, t) == pytest.approx(12.0, rel=0.01)

    def test_bearing_270_moves_west(self):
        traj = self.make()
        e, n, _ = traj.local_position(10.0)
        assert e < 0 and abs(n) < 1e-9


class TestLawnmower:
    def make(self):
        return LawnmowerTrajectory(ORIGIN, local(0, 0, 75), width_east_m=1000.0,
                                   lane_spacing_m=200.0, lane_count=3, speed=10.0)

    def test_path_length(self):
        assert self.make().path_length == pytest.approx(3 * 1000 + 2 * 200)

    def test_visits_lane_corners(self):
        traj = self.make()
        assert traj.local_position(0.0) == pytest.approx((0.0, 0.0, 75.0))
        assert traj.local_position(100.0) == pytest.approx((1000.0, 0.0, 75.0))
        assert traj.local_position(120.0) == pytest.approx((1000.0, 200.0, 75.0))
        assert traj.local_position(220.0) == pytest.approx((0.0, 200.0, 75.0))

    def test_speed_law_mid_segment(self):
        traj = self.make()
        for t in (5.0, 50.0, 110.0, 150.0, 250.0):
            assert numeric_speed(traj, t) == pytest.approx(10.0, rel=0.01)

    def test_retraces_after_completion(self):
        traj = self.make()
        total_t = traj.path_length / 10.0
        a = traj.local_position(total_t - 7.0)
        b = traj.local_position(total_t + 7.0)
        assert a == pytest.approx(b)

    def test_continuous_at_fold(self):
        traj = self.make()
        total_t = traj.path_length / 10.0
        a = traj.local_position(total_t - 1e-4)
        b = traj.local_position(total_t + 1e-4)
        assert math.dist(a, b) < 0.01


class TestLogReplay:
    def test_midpoint_interpolation(self):
        samples = [(0.0, local(0, 0, 10)), (10.0, local(100, 0, 30))]
        traj = LogReplayTrajectory(ORIGIN, samples)
        e, n, u = traj.local_position(5.0)
        assert (e, u) == pytest.approx((50.0, 20.0), abs=1e-6)

    def test_exact_sample_time(self):
        samples = [(0.0, local(0, 0)), (10.0, local(100, 0))]
        traj = LogReplayTrajectory(ORIGIN, samples)
        assert traj.local_position(10.0)[0] == pytest.approx(100.0, abs=1e-6)

    def test_outside_span_rejected(self):
        traj = LogReplayTrajectory(ORIGIN, [(0.0, local(0, 0)), (10.0, local(1, 0))])
        with pytest.raises(ValueError):
            traj.local_position(10.5)
        with pytest.raises(ValueError):
            traj.local_position(-0.1)

    def test_non_monotone_times_rejected(self):
        with pytest.raises(ValueError):
            LogReplayTrajectory(ORIGIN, [(0.0, local(0, 0)), (0.0, local(1, 0))])


class TestPositionLogFile:
    def test_load_and_query(self, tmp_path):
        path = tmp_path / "log.csv"
        path.write_text(
            "t,node,lat,lon,alt\n"
            "0.0,1,46.5,6.5,75\n"
            "5.0,1,46.501,6.5,75\n"
            "0.0,2,46.5,6.51,10\n"
            "9.0,2,46.5,6.511,10\n"
        )
        trajs = load_position_log(str(path), ORIGIN)
        assert set(trajs) == {1, 2}
        mid = trajs[1].position(2.5)
        assert mid.lat == pytest.approx(46.5005, abs=1e-6)

    def test_missing_columns_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,who\n1,2\n")
        with pytest.raises(ValueError):
            load_position_log(str(path), ORIGIN)

    def test_empty_log_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("t,node,lat,lon,alt\n")
        with pytest.raises(ValueError):
            load_position_log(str(path), ORIGIN)

    def test_bad_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,node,lat,lon,alt\n0.0,1,not-a-number,6.5,0\n")
        with pytest.raises(ValueError):
            load_position_log(str(path), ORIGIN)

    def test_build_trajectory_from_spec(self, tmp_path):
        path = tmp_path / "log.csv"
        path.write_text("t,node,lat,lon,alt\n0.0,7,46.5,6.5,75\n5.0,7,46.501,6.5,75\n")
        traj = build_trajectory({"kind": "log_replay", "path": str(path), "node": 7}, ORIGIN)
        assert traj.position(0.0).lat == pytest.approx(46.5)
        with pytest.raises(ValueError):
            build_trajectory({"kind": "log_replay", "path": str(path), "node": 9}, ORIGIN)


class TestBuildTrajectory:
    def test_random_phase_needs_rng(self):
        spec = {"kind": "circular", "center": {"lat": 46.5, "lon": 6.5, "alt": 75},
                "radius_m": 30, "speed_mps": 12, "phase_deg": None}
        with pytest.raises(ValueError):
            build_trajectory(spec, ORIGIN)
        traj = build_trajectory(spec, ORIGIN, rng=random.Random(1))
        assert isinstance(traj, CircularTrajectory)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            build_trajectory({"kind": "teleport"}, ORIGIN)

    def test_fixed(self):
        traj = build_trajectory({"kind": "fixed",
                                 "point": {"lat": 46.5, "lon": 6.5, "alt": 10}}, ORIGIN)
        assert isinstance(traj, FixedTrajectory)
        assert traj.local_position(0.0) == traj.local_position(1e6)


class TestGpsErrorModel:
    def test_zero_sigma_is_identity(self):
        gm = GpsErrorModel(tau=30.0, sigma_h=0.0, sigma_v=0.0)
        p = GeoPosition(46.5, 6.5, 75.0)
        rng = random.Random(0)
        for _ in range(10):
            assert gm.perturb(p, 1.0, rng) == p

    def test_long_run_std_matches_sigma(self):
        gm = GpsErrorModel(tau=30.0, sigma_h=3.0, sigma_v=5.0)
        rng = random.Random(42)
        p = GeoPosition(46.5, 6.5, 100.0)
        east = []
        for _ in range(100_000):
            q = gm.perturb(p, 1.0, rng)
            east.append(distance(GeoPosition(p.lat, q.lon, p.alt), p))
        n = len(east)
        var = sum(x * x for x in east) / n
        assert math.sqrt(var) == pytest.approx(3.0, rel=0.10)

    def test_unbiased_mean(self):
        tau = 10.0
        gm = GpsErrorModel(tau=tau, sigma_h=3.0, sigma_v=5.0)
        rng = random.Random(7)
        p = GeoPosition(46.5, 6.5, 100.0)
        alts = [gm.perturb(p, 1.0, rng).alt - 100.0 for _ in range(50_000)]
        n = len(alts)
        mean = sum(alts) / n
        # 3-sigma bound on the mean of an AR(1) sequence: correlation shrinks
        # the effective sample count by (1-a)/(1+a).
        a = math.exp(-1.0 / tau)
        n_eff = n * (1 - a) / (1 + a)
        assert abs(mean) < 3 * 5.0 / math.sqrt(n_eff)

    def test_autocorrelation_at_tau(self):
        # lag-tau autocorrelation of a first-order Gauss-Markov is 1/e
        tau = 5.0
        gm = GpsErrorModel(tau=tau, sigma_h=3.0, sigma_v=0.0)
        rng = random.Random(3)
        p = GeoPosition(46.5, 6.5, 0.0)
        xs = []
        for _ in range(60_000):
            q = gm.perturb(p, 1.0, rng)
            xs.append((q.lon - p.lon))
        lag = int(tau)
        n = len(xs) - lag
        mean = sum(xs) / len(xs)
        cov = sum((xs[i] - mean) * (xs[i + lag] - mean) for i in range(n)) / n
        var = sum((x - mean) ** 2 for x in xs) / len(xs)
        assert cov / var == pytest.approx(math.exp(-1.0), rel=0.15)

    def test_errors_clamped(self):
        gm = GpsErrorModel(tau=1e9, sigma_h=1.0, sigma_v=1.0)
        rng = random.Random(11)
        p = GeoPosition(46.5, 6.5, 100.0)
        for _ in range(20_000):
            q = gm.perturb(p, 1.0, rng)
            assert abs(q.alt - 100.0) <= 6.0 + 1e-9

    def test_non_positive_dt_rejected(self):
        gm = GpsErrorModel()
        with pytest.raises(ValueError):
            gm.perturb(GeoPosition(0.0, 0.0, 0.0), 0.0, random.Random(1))
