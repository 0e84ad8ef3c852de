"""Global-stability radius, perturbation envelopes, small-data decay and decay diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import simpson

from .constants import ConstantsTable
from .quadrature import cumulative
from .spectral import FieldPair, pair_norm

INSIDE_HALF, INSIDE, OUTSIDE = "inside_half", "inside", "outside"


class BudgetError(ValueError):
    """A decay budget was requested for a trajectory that does not justify one."""


@dataclass(frozen=True)
class DecayBudget:
    """Upper bounds J_p on the time integral of the p-norm of a decaying base flow."""

    J: Mapping[float, float]
    provenance: Mapping[float, str] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for p, v in self.J.items():
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"J_{p} must be finite and nonnegative, got {v}")
            clean[float(p)] = float(v)
        object.__setattr__(self, "J", clean)
        object.__setattr__(self, "provenance", {float(p): s for p, s in self.provenance.items()})

    def __getitem__(self, p: float) -> float:
        try:
            return self.J[float(p)]
        except KeyError:
            raise KeyError(f"budget has no J for order {p} (have {sorted(self.J)})") from None

    def to_dict(self) -> dict:
        return {"J": {repr(p): v for p, v in sorted(self.J.items())},
                "provenance": {repr(p): s for p, s in sorted(self.provenance.items())}}


def _growth_exponent(budget: DecayBudget, q: float, constants: ConstantsTable) -> float:
    return constants.G_hat(q) * budget[q] + constants.K_hat(q) * budget[q + 1]


def stability_radius(budget: DecayBudget, n: float, mu: float, constants: ConstantsTable) -> float:
    """rho_n = (mu / G_hat_n) exp(-G_hat_n J_n - K_hat_n J_{n+1})."""
    if not n > constants.d / 2 + 1:
        raise ValueError(f"n must exceed d/2 + 1 = {constants.d / 2 + 1}, got {n}")
    if not mu > 0:
        raise ValueError("mu must be positive")
    return mu / constants.G_hat(n) * math.exp(-_growth_exponent(budget, n, constants))


def classify(delta_n: float, rho_n: float) -> str:
    if delta_n >= rho_n:
        return OUTSIDE
    return INSIDE_HALF if delta_n <= rho_n / 2 else INSIDE


@dataclass(frozen=True)
class StabilityReport:
    """Envelope coefficients C with ||u(t) - v(t)||_q <= C_q delta_q e^{-mu t}."""

    n: float
    mu: float
    rho_n: float
    delta_n: float
    regime: str
    delta: Mapping[float, float]
    coefficients: Mapping[float, float]
    simplified: Mapping[float, float]
    budget: DecayBudget
    formulas: Mapping[str, str] = field(default_factory=dict)

    def envelope(self, q: float, t: np.ndarray, simplified: bool = False) -> np.ndarray:
        table = self.simplified if simplified else self.coefficients
        if float(q) not in table:
            raise KeyError(f"no {'simplified ' if simplified else ''}envelope for order {q}")
        return table[float(q)] * self.delta[float(q)] * np.exp(-self.mu * np.asarray(t, dtype=float))

    def to_dict(self) -> dict:
        key = lambda m: {repr(p): v for p, v in sorted(m.items())}  # noqa: E731
        return {
            "n": self.n, "mu": self.mu, "rho_n": self.rho_n, "delta_n": self.delta_n,
            "regime": self.regime, "delta": key(self.delta),
            "coefficients": key(self.coefficients), "simplified": key(self.simplified),
            "budget": self.budget.to_dict(), "formulas": dict(self.formulas),
        }


_FORMULAS = {
    "rho_n": "(mu/Gh_n) exp(-Gh_n J_n - Kh_n J_{n+1})",
    "C_n": "exp(Gh_n J_n + Kh_n J_{n+1}) / (1 - delta_n/rho_n)",
    "C_p": "exp(Gh_p J_p + Kh_p J_{p+1} + Gh_pn (delta_n/rho_n) / (Gh_n (1 - delta_n/rho_n)))",
    "C_n simplified": "2 exp(Gh_n J_n + Kh_n J_{n+1})   [delta_n <= rho_n/2]",
    "C_p simplified": "exp(Gh_p J_p + Kh_p J_{p+1} + Gh_pn/Gh_n)   [delta_n <= rho_n/2]",
}


def perturbation_envelopes(
    delta_n: float,
    delta_p: Mapping[float, float],
    budget: DecayBudget,
    n: float,
    mu: float,
    constants: ConstantsTable,
) -> StabilityReport:
    """Envelope coefficients for data within rho_n of the base; outside the ball none are emitted."""
    if delta_n < 0:
        raise ValueError("delta_n must be nonnegative")
    rho = stability_radius(budget, n, mu, constants)
    regime = classify(delta_n, rho)
    delta = {float(n): float(delta_n), **{float(p): float(v) for p, v in delta_p.items()}}
    coeffs, simple = {}, {}
    if regime != OUTSIDE:
        r = delta_n / rho
        gn = constants.G_hat(n)
        base_n = math.exp(_growth_exponent(budget, n, constants))
        coeffs[float(n)] = base_n / (1 - r)
        for p in delta_p:
            if not p > n:
                raise ValueError(f"order-p envelopes need p > n, got p={p}")
            expo = _growth_exponent(budget, p, constants)
            gpn = constants.G_hat(p, n)
            coeffs[float(p)] = math.exp(expo + gpn * r / (gn * (1 - r)))
            if regime == INSIDE_HALF:
                simple[float(p)] = math.exp(expo + gpn / gn)
        if regime == INSIDE_HALF:
            simple[float(n)] = 2 * base_n
    return StabilityReport(float(n), mu, rho, float(delta_n), regime, delta, coeffs, simple, budget, _FORMULAS)


# ---- small data


@dataclass(frozen=True)
class SmallDataReport:
    admissible: bool
    norm_n: float
    threshold: float
    Cp: Mapping[float, float]

    def envelope(self, p: float, t: np.ndarray, mu: float) -> np.ndarray:
        return self.Cp[float(p)] * np.exp(-mu * np.asarray(t, dtype=float))


def small_data_constants(norms: Mapping[float, float], n: float, mu: float, constants: ConstantsTable) -> SmallDataReport:
    """Same as small_data_check but from precomputed norms {order: ||w0||_order} (must include n)."""
    wn = norms[float(n)]
    gn = constants.G_hat(n)
    threshold = mu / gn
    if not wn < threshold:
        return SmallDataReport(False, wn, threshold, {})
    base = 1 - gn * wn / mu
    cp = {}
    for p, wp in norms.items():
        if p >= n:
            cp[float(p)] = wp * base ** (-constants.G_hat(p, n) / gn)
    for p in norms:
        if p < n:
            cp[float(p)] = cp[float(n)]
    return SmallDataReport(True, wn, threshold, cp)


def small_data_check(
    pair0: FieldPair, n: float, mu: float, constants: ConstantsTable, orders: Sequence[float] = ()
) -> SmallDataReport:
    """Admissible iff ||w0||_n < mu/G_hat_n; then ||w(t)||_p <= C_p e^{-mu t}."""
    if not n > constants.d / 2 + 1:
        raise ValueError(f"n must exceed d/2 + 1 = {constants.d / 2 + 1}, got {n}")
    ords = sorted({float(n), *(float(p) for p in orders)})
    return small_data_constants({p: pair_norm(pair0, p) for p in ords}, n, mu, constants)


# ---- diagnostics on a recorded trajectory


DECAYING, INCONCLUSIVE = "decaying", "inconclusive"


@dataclass(frozen=True)
class DecayDiagnostics:
    verdict: str
    threshold: float
    t_small: float | None
    fitted_rate: float | None
    decades: float
    running_integral: float
    tail_estimate: float | None
    C_fit: float | None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _integrate(times: np.ndarray, values: np.ndarray) -> float:
    if len(times) < 2:
        return 0.0
    return float(simpson(values, x=times))


def decay_diagnostics(traj, n: float, mu: float, constants: ConstantsTable) -> DecayDiagnostics:
    """Numerical check of the decay conditions on the recorded n-norm series."""
    t = np.asarray(traj.times, dtype=float)
    y = np.asarray(traj.norm(n), dtype=float)
    threshold = mu / constants.G_hat(n)
    below = np.nonzero(y < threshold)[0]
    t_small = float(t[below[0]]) if len(below) else None
    integral = _integrate(t, y)
    if not np.any(y):
        return DecayDiagnostics(DECAYING, threshold, 0.0, math.inf, math.inf, 0.0, 0.0, 0.0, ("zero trajectory",))

    positive = y > 0
    decades = float(np.log10(y[0] / y[-1])) if y[-1] > 0 else math.inf
    half = t >= t[0] + (t[-1] - t[0]) / 2
    sel = half & positive
    rate = None
    if sel.sum() >= 2:
        slope = np.polyfit(t[sel], np.log(y[sel]), 1)[0]
        rate = float(-slope)
    c_fit = float(np.max(y * np.exp(mu * t)))
    tail = c_fit * math.exp(-mu * t[-1]) / mu
    notes = []
    if decades < 1:
        notes.append("norm changed by less than one decade over the window")
        verdict = INCONCLUSIVE
    elif t_small is None:
        notes.append("norm never fell below mu/G_hat_n")
        verdict = INCONCLUSIVE
    else:
        verdict = DECAYING
    return DecayDiagnostics(verdict, threshold, t_small, rate, decades, integral, tail, c_fit, tuple(notes))


def budget_from_trajectory(
    traj, orders: Sequence[float], n: float, mu: float, constants: ConstantsTable
) -> DecayBudget:
    """J_p = quadrature on [0, t0] + C_p(t0)/mu, with C_p(t0) the small-data constant of the state at t0.

    Any grid time t0 past the first small-data time gives a valid bound; the smallest is kept.
    """
    diag = decay_diagnostics(traj, n, mu, constants)
    if diag.verdict != DECAYING:
        raise BudgetError(f"trajectory is not certified decaying: {'; '.join(diag.notes)}")
    t = np.asarray(traj.times, dtype=float)
    orders = sorted({float(p) for p in orders})
    yn = np.asarray(traj.norm(n))
    if not np.any(yn):
        return DecayBudget({p: 0.0 for p in orders}, {p: "quadrature+small-data-tail" for p in orders})
    start = int(np.searchsorted(t, diag.t_small))
    cand = np.arange(max(start, 1), len(t))
    if len(cand) == 0:
        cand = np.array([start])
    gn = constants.G_hat(n)
    base = 1 - gn * yn[cand] / mu
    J = {}
    for p in orders:
        y = np.asarray(traj.norm(p))
        running = cumulative(y, t)
        if p >= n:
            cp = y[cand] * base ** (-constants.G_hat(p, n) / gn)
        else:
            cp = yn[cand] * base ** (-1.0)  # C_p = C_n with G_hat_nn / G_hat_n = 1
        J[p] = float(np.min(running[cand] + cp / mu))
    return DecayBudget(J, {p: "quadrature+small-data-tail" for p in orders})
