"""A-posteriori control inequalities: order-n Riccati bound R_n, order-p linear bounds R_p, horizon T_c."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .constants import ConstantsTable
from .quadrature import cumulative

HALVING_TOL = 1e-6
TC_TOL = 1e-10
RESIDUAL_TOL = 1e-8
RICHARDSON = 15.0  # 2^4 - 1 for 4th-order schemes


class RefinementError(RuntimeError):
    """The estimator grid is too coarse: a step-halving comparison disagreed beyond tolerance."""


@dataclass(frozen=True)
class EstimatorSet:
    """eps_p(t), delta_p and D_p(t) on a shared time grid starting at 0."""

    times: np.ndarray
    eps: Mapping[float, np.ndarray]
    delta: Mapping[float, float]
    growth: Mapping[float, np.ndarray]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("estimator grid needs at least two times")
        if t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("estimator grid must start at 0 and increase strictly")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        for name in ("eps", "growth"):
            clean = {}
            for p, series in getattr(self, name).items():
                s = np.broadcast_to(np.asarray(series, dtype=float), t.shape).copy()
                if np.any(s < 0) or not np.all(np.isfinite(s)):
                    raise ValueError(f"{name}[{p}] must be finite and nonnegative")
                s.setflags(write=False)
                clean[float(p)] = s
            object.__setattr__(self, name, clean)
        clean = {}
        for p, v in self.delta.items():
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"delta[{p}] must be finite and nonnegative")
            clean[float(p)] = float(v)
        object.__setattr__(self, "delta", clean)

    def require(self, p: float) -> None:
        missing = [
            f"{kind}[{q}]"
            for kind, q, table in (("delta", p, self.delta), ("eps", p, self.eps),
                                   ("growth", p, self.growth), ("growth", p + 1, self.growth))
            if float(q) not in table
        ]
        if missing:
            raise KeyError(f"estimators missing for order {p}: {', '.join(missing)}")

    def subsample(self, step: int) -> "EstimatorSet":
        idx = slice(None, None, step)
        return EstimatorSet(
            self.times[idx],
            {p: s[idx] for p, s in self.eps.items()},
            dict(self.delta),
            {p: s[idx] for p, s in self.growth.items()},
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.times.tobytes())
        for name in ("eps", "growth"):
            for p, s in sorted(getattr(self, name).items()):
                h.update(f"{name}{p!r}".encode())
                h.update(s.tobytes())
        h.update(json.dumps(sorted(self.delta.items())).encode())
        return h.hexdigest()


def _coefficients(est: EstimatorSet, n: float, constants: ConstantsTable):
    gn, kn = constants.G_hat(n), constants.K_hat(n)
    linear = gn * est.growth[float(n)] + kn * est.growth[float(n) + 1]
    return gn, kn, linear


# ---- Riccati equation by RK4


@dataclass(frozen=True)
class RiccatiSolution:
    times: np.ndarray
    Rn: np.ndarray
    T_c: float
    method: str
    Ln: np.ndarray | None = None

    @property
    def is_global(self) -> bool:
        return math.isinf(self.T_c)


def _riccati_rk4(times, a_of, e_of, g, delta, switch):
    """Integrate R' = a(t) R + g R^2 + e(t) from R(0) = delta.

    Works with y = 1/R once R passes ``switch``: y' = -a y - g - e y^2 is smooth
    through the blow-up, which becomes the zero crossing of y.
    """
    R = np.full(len(times), np.inf)
    R[0] = delta
    f_r = lambda t, r: a_of(t) * r + g * r * r + e_of(t)  # noqa: E731
    f_y = lambda t, y: -a_of(t) * y - g - e_of(t) * y * y  # noqa: E731
    mode, x = "R", delta
    if delta > switch:
        mode, x = "y", 1.0 / delta
    for i in range(len(times) - 1):
        t0, h = times[i], times[i + 1] - times[i]
        f = f_r if mode == "R" else f_y
        k1 = f(t0, x)
        k2 = f(t0 + h / 2, x + h / 2 * k1)
        k3 = f(t0 + h / 2, x + h / 2 * k2)
        k4 = f(t0 + h, x + h * k3)
        x_new = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if mode == "R":
            if not math.isfinite(x_new):
                return R, float(times[i])  # conservative side of the bracket
            R[i + 1] = x_new
            if x_new > switch:
                mode, x = "y", 1.0 / x_new
            else:
                x = x_new
            continue
        if x_new <= 0:
            tc = _crossing(f_y, t0, h, x, x_new)
            return R, tc
        R[i + 1] = 1.0 / x_new
        x = x_new
    return R, math.inf


def _crossing(f_y, t0: float, h: float, y0: float, y1: float) -> float:
    """Zero of the Hermite cubic through (t0, y0, y0') and (t0+h, y1, y1'), polished by brentq."""
    d0, d1 = f_y(t0, y0), f_y(t0 + h, y1)

    def herm(t):
        s = (t - t0) / h
        h00, h10 = 2 * s**3 - 3 * s**2 + 1, s**3 - 2 * s**2 + s
        h01, h11 = -2 * s**3 + 3 * s**2, s**3 - s**2
        return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1

    if herm(t0 + h) > 0:  # cubic disagrees with the step; fall back to the step end
        return t0 + h
    return brentq(herm, t0, t0 + h, xtol=TC_TOL, rtol=4 * np.finfo(float).eps)


def _switch_level(delta: float, mu: float, g: float, eps_max: float) -> float:
    # above this level mu*y <= g/10, so y decreases monotonically: blow-up is certain
    return 10.0 * max(delta, mu / g, eps_max / mu if mu > 0 else 0.0, 1e-300)


def _solve_riccati(est: EstimatorSet, n: float, mu: float, constants: ConstantsTable, eval_times: np.ndarray):
    gn, _, linear = _coefficients(est, n, constants)
    a_spline = CubicSpline(est.times, linear - mu)
    e_series = est.eps[float(n)]
    e_spline = CubicSpline(est.times, e_series) if np.any(e_series) else None
    a_of = lambda t: float(a_spline(t))  # noqa: E731
    e_of = (lambda t: float(e_spline(t))) if e_spline is not None else (lambda t: 0.0)  # noqa: E731
    delta = est.delta[float(n)]
    switch = _switch_level(delta, mu, gn, float(np.max(e_series)))
    return _riccati_rk4(eval_times, a_of, e_of, gn, delta, switch), switch


def _compressed(R: np.ndarray, scale: float) -> np.ndarray:
    if math.isinf(scale):
        return R
    return np.where(np.isfinite(R), R / (1 + R / scale), scale)


def riccati_certify(est: EstimatorSet, n: float, mu: float, constants: ConstantsTable, check: bool = True) -> RiccatiSolution:
    """Equality solution of the order-n control inequality with RK4 on the estimator grid."""
    if not n > constants.d / 2 + 1:
        raise ValueError(f"n must exceed d/2 + 1 = {constants.d / 2 + 1}, got {n}")
    est.require(n)
    if est.delta[float(n)] == 0 and not np.any(est.eps[float(n)]):
        return RiccatiSolution(est.times, np.zeros(len(est.times)), math.inf, "rk4")
    (R, tc), switch = _solve_riccati(est, n, mu, constants, est.times)
    if check and len(est.times) >= 5:
        (Rc, tcc), _ = _solve_riccati(est, n, mu, constants, est.times[::2])
        _check_halving(R[::2], Rc, tc, tcc, switch, "Riccati bound")
    return RiccatiSolution(est.times, R, tc, "rk4")


def _check_halving(fine, coarse, tc, tcc, scale, label):
    """Richardson estimate |fine - coarse| / 15 of the fine-grid error must stay within HALVING_TOL.

    Both the RK4 steps and the Simpson quadratures are 4th order, so halving the
    step divides the error by 16.
    """
    both = np.isfinite(fine) & np.isfinite(coarse)
    qf, qc = _compressed(fine[both], scale), _compressed(coarse[both], scale)
    err = np.abs(qf - qc) / RICHARDSON
    rel = err / np.maximum(np.abs(qf), 1e-300)
    if np.any(rel > HALVING_TOL):
        raise RefinementError(f"{label}: estimated relative error {float(np.max(rel)):.3g} exceeds {HALVING_TOL:g}; refine the grid")
    if math.isinf(tc) != math.isinf(tcc):
        # the coarse grid may simply stop short of the crossing; only a disagreement inside both ranges counts
        return
    if not math.isinf(tc) and abs(tc - tcc) / RICHARDSON > HALVING_TOL * max(tc, 1e-300):
        raise RefinementError(f"{label}: step halving moves T_c from {tcc!r} to {tc!r}")


# ---- closed form for eps_n == 0


def _closed_form_parts(est: EstimatorSet, n: float, mu: float, constants: ConstantsTable, idx=slice(None)):
    gn, kn, _ = _coefficients(est, n, constants)
    t = est.times[idx]
    Jn = cumulative(est.growth[float(n)][idx], t)
    Jn1 = cumulative(est.growth[float(n) + 1][idx], t)
    expo = -mu * t + gn * Jn + kn * Jn1
    L = cumulative(np.exp(expo), t)
    return t, expo, L, gn


def riccati_closed_form(est: EstimatorSet, n: float, mu: float, constants: ConstantsTable, check: bool = True) -> RiccatiSolution:
    """R_n = delta e^{-mu t + Gh J_n + Kh J_{n+1}} / (1 - Gh delta L_n), valid when eps_n vanishes."""
    if not n > constants.d / 2 + 1:
        raise ValueError(f"n must exceed d/2 + 1 = {constants.d / 2 + 1}, got {n}")
    est.require(n)
    if np.any(est.eps[float(n)]):
        raise ValueError("closed form requires eps_n == 0")
    t, expo, L, gn = _closed_form_parts(est, n, mu, constants)
    delta = est.delta[float(n)]
    tc, R = _closed_form_eval(t, expo, L, gn, delta)
    if check and len(t) >= 5:
        # the certified quantity is R_n, so the halving test is made on R_n itself
        tcc, Rc = _closed_form_eval(*_closed_form_parts(est, n, mu, constants, slice(None, None, 2)), delta)
        _check_halving(R[::2], Rc, tc, tcc, math.inf, "closed-form Riccati bound")
    return RiccatiSolution(t, R, tc, "closed-form", L)


def _closed_form_eval(t, expo, L, gn, delta):
    level = gn * delta * L
    tc = math.inf
    if delta > 0 and level[-1] >= 1:
        tc = _closed_form_tc(t, expo, L, gn * delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = delta * np.exp(expo) / (1 - level)
    return tc, np.where(t < tc, R, np.inf)


def _closed_form_tc(t, expo, L, scale) -> float:
    """Bisection for scale * L(t) = 1 inside the first grid interval where it is crossed."""
    j = int(np.argmax(scale * L >= 1))
    if j == 0:
        return 0.0
    spline = CubicSpline(t, expo)
    lo, hi = t[j - 1], t[j]
    nodes, weights = np.polynomial.legendre.leggauss(8)

    def level(x):
        mid, half = (lo + x) / 2, (x - lo) / 2
        s = mid + half * nodes
        return scale * (L[j - 1] + half * float(np.dot(weights, np.exp(spline(s))))) - 1

    a, b = lo, hi
    while b - a > TC_TOL:
        m = (a + b) / 2
        if level(m) >= 0:
            b = m
        else:
            a = m
    return b if level(b) >= 0 else hi


# ---- linear order-p bound


@dataclass(frozen=True)
class LinearBound:
    p: float
    times: np.ndarray
    Rp: np.ndarray
    residual: float

    def within_tolerance(self) -> bool:
        return not (self.residual > RESIDUAL_TOL)


def linear_bound(
    est: EstimatorSet, p: float, n: float, Rn: np.ndarray, mu: float, constants: ConstantsTable
) -> LinearBound:
    """R_p = e^{-mu t + A_p}(delta_p + int e^{mu s - A_p} eps_p ds) on the part of the grid where R_n is finite."""
    if not p > n:
        raise ValueError(f"linear bound needs p > n, got p={p}, n={n}")
    est.require(p)
    t = est.times
    Rn = np.asarray(Rn, dtype=float)
    finite = np.isfinite(Rn)
    m = int(np.argmin(finite)) if not finite.all() else len(t)
    Rp = np.full(len(t), np.inf)
    if m == 0:
        return LinearBound(float(p), t, Rp, math.nan)
    tt = t[:m]
    gp, kp, gpn = constants.G_hat(p), constants.K_hat(p), constants.G_hat(p, n)
    rate = gp * est.growth[float(p)][:m] + kp * est.growth[float(p) + 1][:m] + gpn * Rn[:m]
    if m == 1:
        Rp[0] = est.delta[float(p)]
        return LinearBound(float(p), t, Rp, 0.0)
    A = cumulative(rate, tt)
    expo = -mu * tt + A
    eps = est.eps[float(p)][:m]
    inner = cumulative(np.exp(-expo) * eps, tt) if np.any(eps) else np.zeros(m)
    Rp[:m] = np.exp(expo) * (est.delta[float(p)] + inner)
    resid = _linear_residual(tt, Rp[:m], rate - mu, eps)
    return LinearBound(float(p), t, Rp, resid)


RESOLVED_RATE = 0.005  # |coef| h above this (near a blow-up of R_n) is not resolved by the grid


def _linear_residual(t, R, coef, eps) -> float:
    """max over resolved points of |R' - coef R - eps| / (|coef R| + eps), R' by 4th-order differences.

    Points whose 5-point stencil sees |coef| h > RESOLVED_RATE (the approach to a
    blow-up of R_n) are skipped.  nan on nonuniform grids or fewer than 6 points.
    """
    if len(t) < 6:
        return math.nan
    h = np.diff(t)
    if np.max(np.abs(h - h[0])) > 1e-9 * h[0]:
        return math.nan
    h = h[0]
    d = np.empty_like(R)
    d[2:-2] = (R[:-4] - 8 * R[1:-3] + 8 * R[3:-1] - R[4:]) / (12 * h)
    d[:2] = (-25 * R[:2] + 48 * R[1:3] - 36 * R[2:4] + 16 * R[3:5] - 3 * R[4:6]) / (12 * h)
    d[-2:] = (25 * R[-2:] - 48 * R[-3:-1] + 36 * R[-4:-2] - 16 * R[-5:-3] + 3 * R[-6:-4]) / (12 * h)
    local = np.abs(coef) * h
    stencil = np.max(np.stack([np.roll(local, s) for s in range(-4, 5)]), axis=0)
    scale = np.abs(coef * R) + eps
    keep = (stencil <= RESOLVED_RATE) & (scale > 0)
    if not np.any(keep):
        return 0.0 if not np.any(scale) else math.nan
    return float(np.max(np.abs(d - coef * R - eps)[keep] / scale[keep]))


# ---- assembly


@dataclass(frozen=True)
class Certificate:
    n: float
    mu: float
    T_c: float
    times: np.ndarray
    Rn: np.ndarray
    Rp: Mapping[float, np.ndarray]
    inputs_digest: str
    method: str
    residuals: Mapping[float, float] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def is_global(self) -> bool:
        return math.isinf(self.T_c)

    def to_dict(self) -> dict:
        def clean(a):
            return [x if math.isfinite(x) else None for x in np.asarray(a, dtype=float).tolist()]

        return {
            "n": self.n,
            "mu": self.mu,
            "T_c": None if self.is_global else self.T_c,
            "global": self.is_global,
            "method": self.method,
            "series": {
                "t": self.times.tolist(),
                "Rn": clean(self.Rn),
                "Rp": {repr(p): clean(v) for p, v in sorted(self.Rp.items())},
            },
            "linear_residuals": {repr(p): v if math.isfinite(v) else None for p, v in sorted(self.residuals.items())},
            "inputs_digest": self.inputs_digest,
            "notes": list(self.notes),
        }


def tautological_estimators(
    approx, datum_error: Mapping[float, float], orders: Sequence[float], eps: str | Mapping[float, np.ndarray] = "zero"
) -> EstimatorSet:
    """D_q(t) = ||u_a(t)||_q; eps zero (exact approximant), Galerkin tail, or user series."""
    t = np.asarray(approx.times, dtype=float)
    growth = {}
    for q in orders:
        for r in (q, q + 1):
            growth[float(r)] = np.asarray(approx.norm(r), dtype=float)
    if isinstance(eps, str):
        if eps == "zero":
            eps_map = {float(q): np.zeros(len(t)) for q in orders}
        elif eps == "galerkin":
            from .integrator import galerkin_residual

            eps_map = {}
            for q in orders:
                ts, vals = galerkin_residual(approx, q)
                if len(ts) != len(t):
                    raise ValueError("Galerkin residual needs a state at every grid time (record_stride = 1)")
                eps_map[float(q)] = vals
        else:
            raise ValueError(f"unknown eps mode {eps!r}")
    else:
        eps_map = {float(q): np.asarray(v, dtype=float) for q, v in eps.items()}
    return EstimatorSet(t, eps_map, {float(q): float(v) for q, v in datum_error.items()}, growth)


def certify(
    approx,
    datum_error: Mapping[float, float],
    n: float,
    p_list: Sequence[float],
    constants: ConstantsTable,
    mu: float | None = None,
    eps: str | Mapping[float, np.ndarray] = "zero",
    method: str = "auto",
) -> Certificate:
    """Riccati bound at order n, then one linear bound per p in p_list."""
    mu = approx.mu if mu is None else mu
    orders = [float(n), *(float(p) for p in p_list)]
    est = tautological_estimators(approx, datum_error, orders, eps)
    use_closed = method == "closed-form" or (method == "auto" and not np.any(est.eps[float(n)]))
    sol = riccati_closed_form(est, n, mu, constants) if use_closed else riccati_certify(est, n, mu, constants)
    Rp, resid = {}, {}
    for p in p_list:
        lb = linear_bound(est, p, n, sol.Rn, mu, constants)
        Rp[float(p)], resid[float(p)] = lb.Rp, lb.residual
    h = hashlib.sha256()
    h.update(est.digest().encode())
    h.update(json.dumps(constants.digest_items()).encode())
    h.update(repr(float(mu)).encode())
    return Certificate(float(n), float(mu), sol.T_c, est.times, sol.Rn, Rp, h.hexdigest(), sol.method, resid)
