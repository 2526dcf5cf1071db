"""Domain types and the latency / migration-cost model.

Indices are 0-based throughout: servers ``0..N-1``, vehicles ``0..K-1``,
slots ``0..T-1``.  An assignment is a tuple mapping each vehicle to a server.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

Assignment = tuple[int, ...]
Trajectory = Sequence[Assignment]


class InvalidParameterError(ValueError):
    pass


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class MecServer:
    id: int
    position: tuple[float, float]
    transmit_power: float  # W
    bandwidth: float  # Hz
    core_count: int = 4
    core_clock: float = 2.5e9  # Hz

    def __post_init__(self):
        if self.transmit_power <= 0 or self.bandwidth <= 0:
            raise InvalidParameterError("transmit power and bandwidth must be positive")
        if self.core_count < 1 or self.core_clock <= 0:
            raise InvalidParameterError("compute capacity must be positive")

    @property
    def compute_capacity(self) -> float:
        return self.core_count * self.core_clock


@dataclass(frozen=True)
class Vehicle:
    id: int
    position: tuple[float, float]
    speed: float  # m/s
    direction: int  # +1 forward, -1 backward
    lane: int


@dataclass(frozen=True)
class ServiceRequest:
    vehicle_id: int
    size: float  # bits
    cycles: float  # CPU cycles per slot

    def __post_init__(self):
        if self.size <= 0 or self.cycles <= 0:
            raise InvalidParameterError("request size and cycles must be positive")


@dataclass(frozen=True)
class RadioConfig:
    noise_psd: float = -174.0  # dBm/Hz
    pathloss_model: str = "log-distance"
    fading: str = "rayleigh"  # or "none"

    def __post_init__(self):
        if self.pathloss_model != "log-distance":
            raise InvalidParameterError(f"unknown path-loss model {self.pathloss_model!r}")
        if self.fading not in ("none", "rayleigh"):
            raise InvalidParameterError(f"unknown fading model {self.fading!r}")

    def noise_power(self, bandwidth: float) -> float:
        """Noise power in watts over ``bandwidth`` Hz."""
        return dbm_to_watts(self.noise_psd) * bandwidth


@dataclass(frozen=True)
class ObjectiveWeights:
    compute: float = 1.0 / 3.0
    comm: float = 1.0 / 3.0
    migration: float = 1.0 / 3.0

    def __post_init__(self):
        w = (self.compute, self.comm, self.migration)
        if min(w) < 0 or sum(w) <= 0:
            raise InvalidParameterError("weights must be non-negative with a positive sum")


class ObjectiveValue(NamedTuple):
    compute: float
    comm: float
    migration: float
    total: float


def snr(power, gain, sigma2):
    """Received signal-to-noise ratio ``power * gain / sigma2``."""
    if np.any(np.asarray(power) <= 0) or np.any(np.asarray(sigma2) <= 0):
        raise InvalidParameterError("power and noise must be positive")
    if np.any(np.asarray(gain) < 0):
        raise InvalidParameterError("channel gain must be non-negative")
    return power * gain / sigma2


def data_rate(bandwidth, snr_value):
    """Shannon rate in bits/s."""
    if np.any(np.asarray(bandwidth) <= 0) or np.any(np.asarray(snr_value) < 0):
        raise InvalidParameterError("bandwidth must be positive and SNR non-negative")
    return bandwidth * np.log2(1.0 + snr_value)


def comm_delay(size, rate):
    """Transmission delay ``size / rate``; a zero rate gives ``inf``."""
    if np.any(np.asarray(size) <= 0):
        raise InvalidParameterError("request size must be positive")
    rate = np.asarray(rate, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(rate > 0, size / np.where(rate > 0, rate, 1.0), np.inf)
    return float(out) if out.ndim == 0 else out


def comp_delay(cycles, n_services, capacity):
    if np.any(np.asarray(capacity) <= 0):
        raise InvalidParameterError("compute capacity must be positive")
    return cycles * n_services / capacity


def count_services(a: Assignment, n: int) -> int:
    return sum(1 for s in a if s == n)


def slot_migration_cost(prev: Assignment, cur: Assignment, m: np.ndarray, t: int) -> float:
    if len(prev) != len(cur):
        raise InvalidParameterError("assignments cover different vehicle sets")
    return float(sum(m[p, c, k, t] for k, (p, c) in enumerate(zip(prev, cur))))


def check_migration_matrix(m: np.ndarray, n_servers: int, n_vehicles: int, horizon: int) -> None:
    if m.shape != (n_servers, n_servers, n_vehicles, horizon):
        raise InvalidParameterError(f"migration matrix has shape {m.shape}")
    if np.any(m < 0):
        raise InvalidParameterError("migration costs must be non-negative")
    diag = m[np.arange(n_servers), np.arange(n_servers)]
    if np.any(diag != 0):
        raise InvalidParameterError("staying on the same server must cost nothing")


@dataclass(frozen=True, eq=False)
class Instance:
    """A fully realized placement problem over ``T`` slots.

    ``gains`` has shape (T, K, N); ``migration`` has shape (N, N, K, T).
    ``initial`` is the placement in force before the first slot.
    """

    servers: tuple[MecServer, ...]
    requests: tuple[ServiceRequest, ...]
    gains: np.ndarray
    migration: np.ndarray
    initial: Assignment
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    radio: RadioConfig = field(default_factory=RadioConfig)

    def __post_init__(self):
        T, K, N = self.gains.shape
        if len(self.servers) != N or len(self.requests) != K:
            raise InvalidParameterError("gain array does not match servers/requests")
        if np.any(self.gains < 0):
            raise InvalidParameterError("channel gains must be non-negative")
        if len(self.initial) != K or not all(0 <= s < N for s in self.initial):
            raise InvalidParameterError("initial assignment is invalid")
        check_migration_matrix(self.migration, N, K, T)

    @property
    def n_servers(self) -> int:
        return self.gains.shape[2]

    @property
    def n_vehicles(self) -> int:
        return self.gains.shape[1]

    @property
    def horizon(self) -> int:
        return self.gains.shape[0]

    @cached_property
    def capacity(self) -> np.ndarray:
        return np.array([s.compute_capacity for s in self.servers])

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([r.size for r in self.requests])

    @cached_property
    def cycles(self) -> np.ndarray:
        return np.array([r.cycles for r in self.requests])

    @cached_property
    def comm_delays(self) -> np.ndarray:
        """Per-slot communication delays, shape (T, K, N)."""
        power = np.array([s.transmit_power for s in self.servers])
        bw = np.array([s.bandwidth for s in self.servers])
        sigma2 = np.array([self.radio.noise_power(b) for b in bw])
        rate = data_rate(bw, snr(power, self.gains, sigma2))
        return comm_delay(self.sizes[None, :, None], rate)


def evaluate_objective(traj: Trajectory, inst: Instance) -> ObjectiveValue:
    """Weighted compute + communication + migration cost of a full schedule."""
    if len(traj) != inst.horizon:
        raise InvalidParameterError(f"trajectory has {len(traj)} slots, expected {inst.horizon}")
    K = inst.n_vehicles
    compute = comm = migration = 0.0
    prev = tuple(inst.initial)
    for t, a in enumerate(traj):
        a = tuple(a)
        if len(a) != K:
            raise InvalidParameterError("assignment length does not match vehicle count")
        for k, n in enumerate(a):
            server = inst.servers[n]
            req = inst.requests[k]
            compute += comp_delay(req.cycles, count_services(a, n), server.compute_capacity)
            sigma2 = inst.radio.noise_power(server.bandwidth)
            rate = data_rate(server.bandwidth, snr(server.transmit_power, float(inst.gains[t, k, n]), sigma2))
            comm += comm_delay(req.size, rate)
        migration += slot_migration_cost(prev, a, inst.migration, t)
        prev = a
    w = inst.weights
    # zero weights must silence infinite terms rather than produce NaN
    total = math.fsum(lam * v for lam, v in
                      ((w.compute, compute), (w.comm, comm), (w.migration, migration)) if lam)
    return ObjectiveValue(compute, comm, migration, total)
