"""Scenario configuration and seeded realization of problem instances."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mobility import HighwayConfig, channel_gains, distance, init_vehicles, mec_layout, step_vehicles
from .model import (
    Instance,
    InvalidParameterError,
    MecServer,
    ObjectiveWeights,
    RadioConfig,
    ServiceRequest,
    Vehicle,
    dbm_to_watts,
)


@dataclass
class ScenarioConfig:
    # network
    n_servers: int = 3
    n_vehicles: int = 4
    tx_power_dbm: float = 30.0
    total_bandwidth: float = 10e6  # Hz, split equally between servers
    noise_psd: float = -174.0  # dBm/Hz
    migration_cost_range: tuple[float, float] = (0.2, 0.3)
    request_kbits: tuple[float, float] = (50.0, 300.0)
    cores: int = 4
    core_clock: float = 2.5e9
    cycles_per_bit: float = 500.0
    fading: str = "rayleigh"
    # geometry
    highway_length: float = 5000.0
    highway_width: float = 18.0
    speed_kmh: tuple[float, float] = (60.0, 110.0)
    slot_duration: float = 1.0
    server_spacing: float = 2000.0
    server_offset: float = 30.0
    # objective weights (compute, comm, migration)
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    # horizons
    train_horizon: int = 100
    eval_horizon: int = 20
    # learning
    episodes: int = 3000
    learning_rate: float = 3e-4
    discount: float = 0.99
    replay_capacity: int = 100_000
    batch_size: int = 1024
    target_interval: int = 1000
    hidden: tuple[int, ...] = (256, 256)
    eps_start: float = 1.0
    eps_end: float = 0.02
    eps_decay_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        # JSON round trips turn tuples into lists
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, list):
                setattr(self, f.name, tuple(value))
        if self.n_servers < 1 or self.n_vehicles < 1:
            raise InvalidParameterError("need at least one server and one vehicle")
        lo, hi = self.request_kbits
        if not 0 < lo <= hi:
            raise InvalidParameterError("request size range must be positive and non-empty")
        lo, hi = self.migration_cost_range
        if not 0 <= lo <= hi:
            raise InvalidParameterError("migration cost range must be non-negative and non-empty")

    @property
    def highway(self) -> HighwayConfig:
        return HighwayConfig(length=self.highway_length, width=self.highway_width,
                             speed_range_kmh=self.speed_kmh, slot_duration=self.slot_duration)

    @property
    def radio(self) -> RadioConfig:
        return RadioConfig(noise_psd=self.noise_psd, fading=self.fading)

    @property
    def objective_weights(self) -> ObjectiveWeights:
        return ObjectiveWeights(*self.weights)

    def servers(self) -> tuple[MecServer, ...]:
        bw = self.total_bandwidth / self.n_servers
        power = dbm_to_watts(self.tx_power_dbm)
        return tuple(
            MecServer(n, pos, power, bw, self.cores, self.core_clock)
            for n, pos in enumerate(mec_layout(self.highway, self.n_servers,
                                               self.server_spacing, self.server_offset))
        )

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidParameterError(f"unknown configuration fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True, eq=False)
class Episode:
    """One realized instance plus the vehicle trace that produced it."""

    instance: Instance
    trace: tuple[tuple[Vehicle, ...], ...]  # fleet state per slot
    seed: int
    config: ScenarioConfig = field(repr=False)


def nearest_assignment(fleet, servers) -> tuple[int, ...]:
    return tuple(int(np.argmin([distance(v.position, s.position) for s in servers])) for v in fleet)


def realize(cfg: ScenarioConfig, seed: int, horizon: int | None = None) -> Episode:
    """Draw mobility, requests, migration costs and fading for one episode.

    Independent child streams keep the fleet, requests, costs and fading
    draws fixed when only sizes or capacities are changed, so sweep levels
    sharing a seed see the same underlying realization.
    """
    horizon = cfg.eval_horizon if horizon is None else horizon
    if horizon < 1:
        raise InvalidParameterError("horizon must be at least one slot")
    fleet_rng, req_rng, mig_rng, fade_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)
    )
    K, N = cfg.n_vehicles, cfg.n_servers
    servers = cfg.servers()
    highway = cfg.highway

    fleet = init_vehicles(highway, K, fleet_rng)
    trace = [tuple(fleet)]
    for _ in range(horizon - 1):
        fleet = step_vehicles(fleet, highway)
        trace.append(tuple(fleet))

    lo, hi = cfg.request_kbits
    sizes = (lo + req_rng.uniform(size=K) * (hi - lo)) * 1000.0
    requests = tuple(ServiceRequest(k, float(sizes[k]), float(cfg.cycles_per_bit * sizes[k]))
                     for k in range(K))

    m = mig_rng.uniform(*cfg.migration_cost_range, size=(N, N, K))
    m[np.arange(N), np.arange(N)] = 0.0
    migration = np.repeat(m[..., None], horizon, axis=3)

    radio = cfg.radio
    gains = np.stack([channel_gains(f, servers, radio, fade_rng) for f in trace])
    inst = Instance(servers, requests, gains, migration, nearest_assignment(trace[0], servers),
                    cfg.objective_weights, radio)
    return Episode(inst, tuple(trace), seed, cfg)


def random_instance(seed: int, n_servers: int, n_vehicles: int, horizon: int,
                    random_weights: bool = True) -> Instance:
    """Small instance on the default highway with randomly drawn objective weights."""
    rng = np.random.default_rng([seed, 7])
    weights = tuple(rng.dirichlet(np.ones(3))) if random_weights else (1 / 3, 1 / 3, 1 / 3)
    cfg = ScenarioConfig(n_servers=n_servers, n_vehicles=n_vehicles, weights=weights,
                         cores=int(rng.choice([4, 8, 16])))
    return realize(cfg, seed, horizon).instance
