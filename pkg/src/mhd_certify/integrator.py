"""Integrating-factor RK4 for the Galerkin-truncated MHD system du/dt = A u + P_mhd(u, u)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bilinear import P, mhd_self_interaction, self_interaction_kernel
from .spectral import FieldPair, SpectralField, apply_A, pair_norm, sobolev_norm


class IntegrationError(RuntimeError):
    """Raised when the state stops being finite; ``last_time`` is the last finite time."""

    def __init__(self, message: str, last_time: float):
        super().__init__(message)
        self.last_time = last_time


@dataclass(frozen=True)
class SolverConfig:
    nu: float
    eta: float
    dt: float
    t_end: float
    cutoff: int
    recorded_orders: tuple[float, ...] = (0.0,)
    record_stride: int = 1

    def __post_init__(self):
        if not (self.nu > 0 and self.eta > 0):
            raise ValueError("nu and eta must be positive")
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if self.dt > self.t_end:
            raise ValueError("dt must not exceed t_end")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        object.__setattr__(self, "recorded_orders", tuple(float(p) for p in self.recorded_orders))
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-8 * max(1.0, steps):
            raise ValueError(f"t_end / dt = {steps} is not an integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def mu(self) -> float:
        return min(self.nu, self.eta)


@dataclass
class Trajectory:
    """Norms at every step; full states every ``record_stride`` steps."""

    times: np.ndarray
    norms: dict[float, np.ndarray]
    state_indices: np.ndarray
    states: list[FieldPair]
    config: SolverConfig | None = None
    meta: dict = field(default_factory=dict)

    def norm(self, p: float) -> np.ndarray:
        key = float(p)
        if key not in self.norms:
            raise KeyError(f"order {p} not recorded (have {sorted(self.norms)})")
        return self.norms[key]

    @property
    def state_times(self) -> np.ndarray:
        return self.times[self.state_indices]

    @property
    def mu(self) -> float:
        if self.config is not None:
            return self.config.mu
        if "mu" in self.meta:
            return float(self.meta["mu"])
        raise ValueError("trajectory carries neither a solver configuration nor mu")


def ns_rhs(u: SpectralField, nu: float) -> SpectralField:
    """Right-hand side of the truncated projected NS equation nu Lap u + P(u, u)."""
    lap = SpectralField(u.d, u.cutoff, -nu * u.ksq[:, None] * u.coeffs, divergence_free=True)
    return lap + P(u, u, cutoff=u.cutoff)


def rhs(pair: FieldPair, nu: float, eta: float) -> FieldPair:
    """A u + (P_mhd(u, u) truncated to the cutoff of u)."""
    return apply_A(pair, nu, eta) + mhd_self_interaction(pair, cutoff=pair.cutoff)


def integrate(
    pair0: FieldPair,
    config: SolverConfig,
    nonlinear: bool = True,
    callback: Callable[[int, float, FieldPair], None] | None = None,
) -> Trajectory:
    """Lawson (integrating-factor) RK4 with exact heat factors exp(-nu|k|^2 t), exp(-eta|k|^2 t).

    With ``nonlinear=False`` only the linear part is kept and the result is exact for any dt.
    """
    if pair0.cutoff != config.cutoff:
        raise ValueError(f"datum cutoff {pair0.cutoff} differs from config cutoff {config.cutoff}")
    d, m, h = pair0.d, pair0.cutoff, config.dt
    ksq = pair0.velocity.ksq[:, None]
    ev_half, ev = np.exp(-config.nu * ksq * h / 2), np.exp(-config.nu * ksq * h)
    eb_half, eb = np.exp(-config.eta * ksq * h / 2), np.exp(-config.eta * ksq * h)
    weights = {p: 2.0 * ksq[:, 0] ** p for p in config.recorded_orders}

    kernel = self_interaction_kernel(d, m, m)

    def N(u, b):
        if not nonlinear:
            return np.zeros_like(u), np.zeros_like(b)
        with np.errstate(over="ignore", invalid="ignore"):  # blow-up is reported below
            return kernel(u, b)

    def record_norms(u, b, i):
        eu = np.sum(np.abs(u) ** 2, axis=1)
        eb2 = np.sum(np.abs(b) ** 2, axis=1)
        for p, w in weights.items():
            norms[p][i] = math.sqrt(float(np.dot(w, eu + eb2)))

    n_steps = config.n_steps
    times = h * np.arange(n_steps + 1)
    norms = {p: np.empty(n_steps + 1) for p in config.recorded_orders}
    u = np.array(pair0.velocity.coeffs)
    b = np.array(pair0.magnetic.coeffs)
    record_norms(u, b, 0)
    state_indices, states = [0], [pair0]

    for step in range(1, n_steps + 1):
        au, ab = N(u, b)
        u1, b1 = ev_half * (u + h / 2 * au), eb_half * (b + h / 2 * ab)
        bu, bb = N(u1, b1)
        u2, b2 = ev_half * u + h / 2 * bu, eb_half * b + h / 2 * bb
        cu, cb = N(u2, b2)
        u3, b3 = ev * u + h * ev_half * cu, eb * b + h * eb_half * cb
        du, db = N(u3, b3)
        u = ev * u + h / 6 * (ev * au + 2 * ev_half * (bu + cu) + du)
        b = eb * b + h / 6 * (eb * ab + 2 * eb_half * (bb + cb) + db)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(b))):
            raise IntegrationError(f"state became nonfinite at step {step}", last_time=times[step - 1])
        record_norms(u, b, step)
        if step % config.record_stride == 0 or step == n_steps:
            snap = FieldPair(
                SpectralField(d, m, u.copy(), divergence_free=True),
                SpectralField(d, m, b.copy(), divergence_free=True),
            )
            state_indices.append(step)
            states.append(snap)
            if callback is not None:
                callback(step, times[step], snap)

    return Trajectory(times, norms, np.array(state_indices), states, config)


def trajectory_from_states(
    times: np.ndarray,
    states: Sequence[FieldPair],
    orders: Sequence[float],
    config: SolverConfig | None = None,
) -> Trajectory:
    """Wrap externally produced states (e.g. a closed-form solution) as a Trajectory."""
    times = np.asarray(times, dtype=float)
    if len(times) != len(states):
        raise ValueError("times and states differ in length")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    norms = {float(p): np.array([pair_norm(s, p) for s in states]) for p in orders}
    return Trajectory(times, norms, np.arange(len(times)), list(states), config)


def galerkin_residual(traj: Trajectory, p: float) -> tuple[np.ndarray, np.ndarray]:
    """||(I - Pi_M) P_mhd(u, u)||_p at each stored snapshot.

    For a trajectory of the truncated system this is the norm of the differential
    error of the snapshot viewed as an approximate solution of the full system
    (time-discretization error is not included).
    """
    if not traj.states:
        raise ValueError("trajectory stores no states; the residual needs full snapshots")
    values = []
    for s in traj.states:
        m = s.cutoff
        full = mhd_self_interaction(s)
        tail = full - full.with_cutoff(m).with_cutoff(2 * m)
        values.append(pair_norm(tail, p))
    return traj.state_times, np.array(values)


def state_l2_energy(pair: FieldPair) -> float:
    return sobolev_norm(pair.velocity, 0) ** 2 + sobolev_norm(pair.magnetic, 0) ** 2
