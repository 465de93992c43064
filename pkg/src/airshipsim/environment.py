"""Spatio-temporal wind field: mean wind + OU gusts + thermal columns.

Gusts are a per-axis Ornstein-Uhlenbeck process with the exact discrete
update x' = mu + a (x - mu) + sigma sqrt(1 - a^2) N(0,1), a = exp(-dt/tau),
so the stationary variance does not depend on the step size. Thermals and
microbursts are drifting columns with a Gaussian radial velocity profile,
truncated (continuously) at three radii.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

WIND_HARD_CAP = 25.0  # m/s, magnitude clamp on any returned sample

_EDGE = math.exp(-4.5)  # Gaussian profile value at 3 radii, subtracted out


@dataclass
class GustProcess:
    """Exactly-discretized per-axis OU gust state."""

    time_constant: float = 5.0
    stationary_std: tuple[float, float, float] = (0.0, 0.0, 0.0)
    state: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def advance(self, dt: float, rng: np.random.Generator):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if not math.isfinite(self.time_constant) or self.time_constant <= 0:
            return  # infinite time constant: frozen gust state
        a = math.exp(-dt / self.time_constant)
        scale = math.sqrt(max(0.0, 1.0 - a * a))
        noise = rng.standard_normal(3)
        std = self.stationary_std
        for i in range(3):
            self.state[i] = a * self.state[i] + scale * std[i] * noise[i]


@dataclass
class ThermalColumn:
    """Vertical air column (updraft or microburst) drifting with the mean wind."""

    center: tuple[float, float]
    radius: float
    peak_vertical: float  # positive updraft, negative microburst
    birth: float = 0.0
    death: float = math.inf

    def vertical_at(self, x: float, y: float, cx: float, cy: float) -> float:
        dx, dy = x - cx, y - cy
        r2 = dx * dx + dy * dy
        if r2 >= 9.0 * self.radius * self.radius:
            return 0.0
        profile = math.exp(-0.5 * r2 / (self.radius * self.radius))
        # shift-and-scale keeps the profile continuous at the 3-radius edge
        return self.peak_vertical * (profile - _EDGE) / (1.0 - _EDGE)


@dataclass
class WindFieldConfig:
    mean: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gust_std: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gust_tau: float = 5.0
    thermals: list[ThermalColumn] = field(default_factory=list)


class WindField:
    """Owns the gust process and thermal lifecycle; sampling is read-only.

    sample() never draws randomness, so the sequence of samples is a pure
    function of (seed, advance-call sequence, query points).
    """

    def __init__(self, config: WindFieldConfig, seed_seq: np.random.SeedSequence):
        self.config = config
        self.rng = np.random.Generator(np.random.PCG64(seed_seq))
        self.gusts = GustProcess(
            time_constant=config.gust_tau, stationary_std=tuple(config.gust_std)
        )
        self.time = 0.0

    def advance(self, dt: float):
        """Step gusts and thermal drift forward by dt."""
        self.gusts.advance(dt, self.rng)
        self.time += dt

    def sample(self, position, time: float | None = None) -> np.ndarray:
        """Wind vector at a world position (mean + gust + active thermals)."""
        t = self.time if time is None else time
        mean = self.config.mean
        g = self.gusts.state
        wx = mean[0] + g[0]
        wy = mean[1] + g[1]
        wz = mean[2] + g[2]
        px, py = position[0], position[1]
        for col in self.config.thermals:
            if not col.birth <= t <= col.death:
                continue
            age = t - col.birth
            cx = col.center[0] + mean[0] * age
            cy = col.center[1] + mean[1] * age
            wz += col.vertical_at(px, py, cx, cy)
        mag2 = wx * wx + wy * wy + wz * wz
        if mag2 > WIND_HARD_CAP * WIND_HARD_CAP:
            s = WIND_HARD_CAP / math.sqrt(mag2)
            wx, wy, wz = wx * s, wy * s, wz * s
        return np.array([wx, wy, wz])
