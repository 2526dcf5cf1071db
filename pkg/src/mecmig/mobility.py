"""Highway mobility and channel realizations."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .model import InvalidParameterError, MecServer, RadioConfig, Vehicle


@dataclass(frozen=True)
class HighwayConfig:
    length: float = 5000.0
    width: float = 18.0
    forward_lanes: int = 2
    backward_lanes: int = 2
    speed_range_kmh: tuple[float, float] = (60.0, 110.0)
    slot_duration: float = 1.0

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0 or self.slot_duration <= 0:
            raise InvalidParameterError("highway dimensions and slot duration must be positive")
        lo, hi = self.speed_range_kmh
        if not 0 < lo <= hi:
            raise InvalidParameterError("speed range must be non-empty and positive")
        if self.forward_lanes < 0 or self.backward_lanes < 0 or self.n_lanes == 0:
            raise InvalidParameterError("highway needs at least one lane")

    @property
    def n_lanes(self) -> int:
        return self.forward_lanes + self.backward_lanes

    @property
    def speed_range(self) -> tuple[float, float]:
        """Speed range in m/s."""
        lo, hi = self.speed_range_kmh
        return lo / 3.6, hi / 3.6

    def lane_center(self, lane: int) -> float:
        lane_width = self.width / self.n_lanes
        return (lane + 0.5) * lane_width

    def lane_direction(self, lane: int) -> int:
        return 1 if lane < self.forward_lanes else -1


def init_vehicles(cfg: HighwayConfig, n_vehicles: int, rng: np.random.Generator | int) -> list[Vehicle]:
    if n_vehicles < 1:
        raise InvalidParameterError("need at least one vehicle")
    rng = np.random.default_rng(rng)
    xs = rng.uniform(0.0, cfg.length, size=n_vehicles)
    lanes = rng.integers(0, cfg.n_lanes, size=n_vehicles)
    speeds = rng.uniform(*cfg.speed_range, size=n_vehicles)
    return [
        Vehicle(k, (float(xs[k]), cfg.lane_center(int(lanes[k]))), float(speeds[k]),
                cfg.lane_direction(int(lanes[k])), int(lanes[k]))
        for k in range(n_vehicles)
    ]


def step_vehicles(fleet: Sequence[Vehicle], cfg: HighwayConfig, dt: float | None = None) -> list[Vehicle]:
    """Advance every vehicle at constant speed, wrapping at the highway ends."""
    dt = cfg.slot_duration if dt is None else dt
    out = []
    for v in fleet:
        x = (v.position[0] + v.direction * v.speed * dt) % cfg.length
        out.append(replace(v, position=(x, v.position[1])))
    return out


def mec_layout(highway: HighwayConfig, n_servers: int = 3, spacing: float = 2000.0,
               offset: float = 30.0) -> list[tuple[float, float]]:
    """Collinear server positions centred on the highway, ``offset`` m beside the road."""
    if n_servers < 1:
        raise InvalidParameterError("need at least one server")
    if (n_servers - 1) * spacing >= highway.length:
        spacing = highway.length / n_servers
    mid = highway.length / 2.0
    return [(mid + (i - (n_servers - 1) / 2.0) * spacing, -offset) for i in range(n_servers)]


def path_loss_db(distance_m):
    """Log-distance macro-cell path loss, distance clamped to 1 m."""
    d_km = np.maximum(distance_m, 1.0) / 1000.0
    return 128.1 + 37.6 * np.log10(d_km)


def distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def channel_gain(vehicle: Vehicle, server: MecServer, radio: RadioConfig,
                 rng: np.random.Generator | None = None) -> float:
    gain = 10.0 ** (-path_loss_db(distance(vehicle.position, server.position)) / 10.0)
    if radio.fading == "rayleigh":
        if rng is None:
            raise InvalidParameterError("Rayleigh fading needs an RNG")
        gain *= rng.exponential(1.0)
    return float(gain)


def channel_gains(fleet: Sequence[Vehicle], servers: Sequence[MecServer], radio: RadioConfig,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Gain matrix of shape (K, N) for one slot; fading draws in row-major order."""
    return np.array([[channel_gain(v, s, radio, rng) for s in servers] for v in fleet])
