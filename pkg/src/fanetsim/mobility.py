"""UAV trajectory generators, a Gauss-Markov GPS error model, and
position-log ingestion.

Trajectories are deterministic functions of time evaluated in the planar
frame of a scenario origin; all randomness lives in the GPS error model.
Shuttle and lawnmower paths use instantaneous turns: the dynamics of
interest happen mid-leg and closed-form positions keep runs reproducible.
"""

from __future__ import annotations

import csv
import math
import random
from bisect import bisect_right
from dataclasses import dataclass

from .geo import GeoPosition, LocalPosition, from_local, to_local

# Fixed-wing feasibility bounds for loitering trajectories.
MIN_LOITER_RADIUS_M = 30.0
MAX_SPEED_MPS = 20.0

# GPS error excursions are clamped so a single outlier draw stays bounded.
ERROR_CLAMP_SIGMA = 6.0


def _check_speed(speed: float) -> float:
    if not (0.0 < speed <= MAX_SPEED_MPS):
        raise ValueError(f"speed {speed!r} m/s outside (0, {MAX_SPEED_MPS}]")
    return speed


class Trajectory:
    """Base: position as a continuous function of time."""

    origin: GeoPosition

    def local_position(self, t: float) -> tuple[float, float, float]:
        raise NotImplementedError

    def position(self, t: float) -> GeoPosition:
        e, n, u = self.local_position(t)
        return from_local(self.origin, LocalPosition(east=e, north=n, up=u))


class FixedTrajectory(Trajectory):
    def __init__(self, origin: GeoPosition, point: GeoPosition) -> None:
        self.origin = origin
        lp = to_local(origin, point)
        self._enu = (lp.east, lp.north, lp.up)

    def local_position(self, t: float) -> tuple[float, float, float]:
        return self._enu


class CircularTrajectory(Trajectory):
    """Constant-speed loiter; at t=0 with phase 0 the vehicle sits one
    radius due east of the center."""

    def __init__(self, origin: GeoPosition, center: GeoPosition, radius: float,
                 speed: float, phase: float = 0.0) -> None:
        if radius < MIN_LOITER_RADIUS_M:
            raise ValueError(f"loiter radius {radius!r} m below {MIN_LOITER_RADIUS_M}")
        self.origin = origin
        self.radius = radius
        self.speed = _check_speed(speed)
        self.phase = phase
        self.omega = speed / radius
        lp = to_local(origin, center)
        self._center = (lp.east, lp.north, lp.up)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def local_position(self, t: float) -> tuple[float, float, float]:
        a = self.phase + self.omega * t
        ce, cn, cu = self._center
        return (ce + self.radius * math.cos(a), cn + self.radius * math.sin(a), cu)


class ShuttleTrajectory(Trajectory):
    """Out-and-back leg along a fixed compass bearing with instantaneous
    turnaround."""

    def __init__(self, origin: GeoPosition, start: GeoPosition, bearing_deg: float,
                 leg_m: float, speed: float) -> None:
        if leg_m <= 0.0:
            raise ValueError(f"leg length {leg_m!r} m not positive")
        self.origin = origin
        self.leg = leg_m
        self.speed = _check_speed(speed)
        b = math.radians(bearing_deg)
        self._unit = (math.sin(b), math.cos(b))
        lp = to_local(origin, start)
        self._start = (lp.east, lp.north, lp.up)

    @property
    def period(self) -> float:
        return 2.0 * self.leg / self.speed

    def local_position(self, t: float) -> tuple[float, float, float]:
        s = (self.speed * t) % (2.0 * self.leg)
        along = s if s <= self.leg else 2.0 * self.leg - s
        ue, un = self._unit
        se, sn, su = self._start
        return (se + ue * along, sn + un * along, su)


class LawnmowerTrajectory(Trajectory):
    """Boustrophedon sweep of a rectangle: east-west lanes joined by short
    northward transitions, retraced in reverse after the last lane."""

    def __init__(self, origin: GeoPosition, corner: GeoPosition, width_east_m: float,
                 lane_spacing_m: float, lane_count: int, speed: float) -> None:
        if width_east_m <= 0.0 or lane_spacing_m <= 0.0 or lane_count < 1:
            raise ValueError("lawnmower rectangle parameters must be positive")
        self.origin = origin
        self.speed = _check_speed(speed)
        lp = to_local(origin, corner)
        waypoints = [(lp.east, lp.north)]
        x, y = lp.east, lp.north
        heading_east = True
        for lane in range(lane_count):
            x = lp.east + (width_east_m if heading_east else 0.0)
            waypoints.append((x, y))
            heading_east = not heading_east
            if lane < lane_count - 1:
                y += lane_spacing_m
                waypoints.append((x, y))
        self._alt = lp.up
        self._waypoints = waypoints
        self._cum = [0.0]
        for (x0, y0), (x1, y1) in zip(waypoints, waypoints[1:]):
            self._cum.append(self._cum[-1] + math.hypot(x1 - x0, y1 - y0))

    @property
    def path_length(self) -> float:
        return self._cum[-1]

    def local_position(self, t: float) -> tuple[float, float, float]:
        total = self._cum[-1]
        s = (self.speed * t) % (2.0 * total)
        if s > total:
            s = 2.0 * total - s
        i = min(bisect_right(self._cum, s), len(self._cum) - 1) - 1
        seg = self._cum[i + 1] - self._cum[i]
        frac = 0.0 if seg == 0.0 else (s - self._cum[i]) / seg
        (x0, y0), (x1, y1) = self._waypoints[i], self._waypoints[i + 1]
        return (x0 + frac * (x1 - x0), y0 + frac * (y1 - y0), self._alt)


class LogReplayTrajectory(Trajectory):
    """Piecewise-linear interpolation of logged samples, in local coordinates."""

    def __init__(self, origin: GeoPosition, samples: list[tuple[float, GeoPosition]]) -> None:
        if not samples:
            raise ValueError("position log holds no samples for this node")
        self.origin = origin
        self._times = [t for t, _ in samples]
        for a, b in zip(self._times, self._times[1:]):
            if b <= a:
                raise ValueError(f"position-log timestamps not strictly increasing at t={b!r}")
        self._points = []
        for _, pos in samples:
            lp = to_local(origin, pos)
            self._points.append((lp.east, lp.north, lp.up))

    def local_position(self, t: float) -> tuple[float, float, float]:
        times = self._times
        if t < times[0] or t > times[-1]:
            raise ValueError(f"time {t!r} outside log span [{times[0]}, {times[-1]}]")
        i = bisect_right(times, t) - 1
        if i == len(times) - 1:
            return self._points[-1]
        t0, t1 = times[i], times[i + 1]
        f = (t - t0) / (t1 - t0)
        x0, y0, z0 = self._points[i]
        x1, y1, z1 = self._points[i + 1]
        return (x0 + f * (x1 - x0), y0 + f * (y1 - y0), z0 + f * (z1 - z0))


def load_position_log(path: str, origin: GeoPosition) -> dict[int, LogReplayTrajectory]:
    """Parse a `t,node,lat,lon,alt` CSV into per-node replay trajectories."""
    rows: dict[int, list[tuple[float, GeoPosition]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"t", "node", "lat", "lon", "alt"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"position log must have columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                t = float(row["t"])
                node = int(row["node"])
                pos = GeoPosition(float(row["lat"]), float(row["lon"]), float(row["alt"]))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad position-log row at line {lineno}: {exc}") from exc
            rows.setdefault(node, []).append((t, pos))
    if not rows:
        raise ValueError("position log is empty")
    return {node: LogReplayTrajectory(origin, samples) for node, samples in rows.items()}


def build_trajectory(spec: dict, origin: GeoPosition,
                     rng: random.Random | None = None) -> Trajectory:
    """Construct a trajectory from its scenario-file dictionary.

    A circular spec with phase_deg null draws the initial phase uniformly
    from [0, 360) using the supplied per-node stream.
    """
    kind = spec.get("kind")
    if kind == "fixed":
        return FixedTrajectory(origin, _geo(spec["point"]))
    if kind == "circular":
        phase_deg = spec.get("phase_deg")
        if phase_deg is None:
            if rng is None:
                raise ValueError("random loiter phase requested without an rng")
            phase_deg = rng.uniform(0.0, 360.0)
        return CircularTrajectory(
            origin, _geo(spec["center"]), radius=float(spec["radius_m"]),
            speed=float(spec["speed_mps"]), phase=math.radians(phase_deg),
        )
    if kind == "shuttle":
        return ShuttleTrajectory(
            origin, _geo(spec["start"]), bearing_deg=float(spec["bearing_deg"]),
            leg_m=float(spec["leg_m"]), speed=float(spec["speed_mps"]),
        )
    if kind == "lawnmower":
        return LawnmowerTrajectory(
            origin, _geo(spec["corner"]), width_east_m=float(spec["width_east_m"]),
            lane_spacing_m=float(spec["lane_spacing_m"]),
            lane_count=int(spec["lane_count"]), speed=float(spec["speed_mps"]),
        )
    if kind == "log_replay":
        trajectories = load_position_log(spec["path"], origin)
        node = int(spec["node"])
        if node not in trajectories:
            raise ValueError(f"position log has no samples for node {node}")
        return trajectories[node]
    raise ValueError(f"unknown trajectory kind {kind!r}")


def _geo(d: dict) -> GeoPosition:
    return GeoPosition(float(d["lat"]), float(d["lon"]), float(d.get("alt", 0.0)))


@dataclass
class GpsErrorModel:
    """First-order Gauss-Markov error per axis, one instance per node.

    Each step: e <- e*exp(-dt/tau) + w with w ~ N(0, sigma^2*(1-exp(-2dt/tau))),
    which keeps the stationary standard deviation at the configured sigma.
    The state starts from the stationary distribution.
    """

    tau: float = 30.0
    sigma_h: float = 3.0
    sigma_v: float = 5.0

    def __post_init__(self) -> None:
        if self.tau <= 0.0:
            raise ValueError(f"correlation time {self.tau!r} not positive")
        if self.sigma_h < 0.0 or self.sigma_v < 0.0:
            raise ValueError("GPS sigmas must be non-negative")
        self._err: list[float] | None = None

    def _sigmas(self) -> tuple[float, float, float]:
        return (self.sigma_h, self.sigma_h, self.sigma_v)

    def perturb(self, true_pos: GeoPosition, dt: float, rng: random.Random) -> GeoPosition:
        """Advance the error process by dt and apply it to the true position."""
        if dt <= 0.0:
            raise ValueError(f"dt {dt!r} not positive")
        sigmas = self._sigmas()
        if self._err is None:
            self._err = [rng.gauss(0.0, s) if s > 0.0 else 0.0 for s in sigmas]
        else:
            a = math.exp(-dt / self.tau)
            w_scale = math.sqrt(max(0.0, 1.0 - a * a))
            self._err = [
                a * e + (rng.gauss(0.0, s * w_scale) if s > 0.0 else 0.0)
                for e, s in zip(self._err, sigmas)
            ]
        self._err = [
            max(-ERROR_CLAMP_SIGMA * s, min(ERROR_CLAMP_SIGMA * s, e))
            for e, s in zip(self._err, sigmas)
        ]
        ee, en, eu = self._err
        return from_local(true_pos, LocalPosition(east=ee, north=en, up=eu))
