"""Generalized Beltrami flows and pairs: constructors, verifier, closed-form decaying solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bilinear import P, advect
from .integrator import Trajectory, trajectory_from_states
from .spectral import FieldPair, SpectralField, laplacian, sobolev_norm, validate
from .stability import DecayBudget

REL_TOL = 1e-12
_PREFACTOR = math.sqrt(2.0)


class AdmissibilityError(ValueError):
    """A construction was refused; ``condition`` names the violated requirement."""

    def __init__(self, condition: str, detail: str = ""):
        msg = f"admissibility condition violated: {condition}"
        super().__init__(msg + (f" ({detail})" if detail else ""))
        self.condition = condition


def _as_wave(k: Sequence[int], d: int | None = None) -> tuple[int, ...]:
    arr = np.asarray(k)
    if arr.ndim != 1 or not np.all(arr == np.round(arr)):
        raise ValueError(f"wave vector must be a 1-d integer vector, got {k!r}")
    kt = tuple(int(c) for c in arr)
    if d is not None and len(kt) != d:
        raise ValueError(f"wave vector {kt} does not have dimension {d}")
    if not any(kt):
        raise AdmissibilityError("k != 0", "the zero wave vector carries no mean-zero field")
    return kt


def _orthogonal(a: np.ndarray, b: np.ndarray) -> bool:
    return abs(float(a @ b)) <= REL_TOL * max(float(np.linalg.norm(a) * np.linalg.norm(b)), 1e-300)


def _sine_modes(W: np.ndarray, k: tuple[int, ...], psi: float) -> dict:
    # sqrt2 (2pi)^{-d/2} W sin(k.x + psi) has coefficient -i W e^{i psi} / sqrt2 at k.
    return {k: -1j * W * np.exp(1j * psi) / _PREFACTOR}


def make_gb_flow(W: Sequence[float], k: Sequence[int], psi: float, cutoff: int) -> SpectralField:
    """sqrt(2) (2pi)^{-d/2} W sin(k.x + psi); a generalized Beltrami flow with eigenvalue |k|^2."""
    W = np.asarray(W, dtype=float)
    kt = _as_wave(k, len(W))
    if len(W) < 2:
        raise ValueError("dimension must be at least 2")
    if max(abs(c) for c in kt) > cutoff:
        raise ValueError(f"cutoff {cutoff} too small for wave vector {kt}")
    if not _orthogonal(W, np.asarray(kt, dtype=float)):
        raise AdmissibilityError("W.k = 0", f"W.k = {float(W @ np.asarray(kt, float))}")
    psi = math.remainder(float(psi), 2 * math.pi)
    return SpectralField.from_modes(len(W), cutoff, _sine_modes(W, kt, psi), divergence_free=True)


def make_beltrami_3d(alpha: float, beta: float, eps: int, kappa: int, cutoff: int) -> SpectralField:
    """(2pi)^{-3/2} [eps (a, b, 0) sin(kappa x3) + (-b, a, 0) cos(kappa x3)]; curl equals eps*kappa times it."""
    if eps not in (1, -1):
        raise AdmissibilityError("eps in {+1, -1}", f"got {eps}")
    if int(kappa) != kappa or kappa < 1:
        raise AdmissibilityError("kappa >= 1 integer", f"got {kappa}")
    kappa = int(kappa)
    if cutoff < kappa:
        raise ValueError(f"cutoff {cutoff} too small for kappa = {kappa}")
    a = np.array([alpha, beta, 0.0])
    b = np.array([-beta, alpha, 0.0])
    coeff = eps * a / 2j + b / 2
    return SpectralField.from_modes(3, cutoff, {(0, 0, kappa): coeff}, divergence_free=True)


def curl3d(f: SpectralField) -> SpectralField:
    """Coefficientwise i k x v_k."""
    if f.d != 3:
        raise ValueError(f"curl3d needs d = 3, got d = {f.d}")
    return SpectralField(3, f.cutoff, 1j * np.cross(f.modes, f.coeffs), divergence_free=True)


# ---- verification


def _shell(f: SpectralField) -> tuple[float | None, bool]:
    """(kappa, single_shell) read off the support; a zero field has kappa None."""
    mags = np.linalg.norm(f.coeffs, axis=1)
    if not np.any(mags):
        return None, True
    support = mags > 1e-13 * mags.max()
    shells = np.unique(f.ksq[support])
    return math.sqrt(float(shells[0])), len(shells) == 1


def _scale(*fields: SpectralField) -> float:
    return max(sobolev_norm(f, 0) for f in fields) ** 2


@dataclass(frozen=True)
class GBReport:
    """Per-condition verdicts with the measured relative residuals."""

    kappa: float | None
    lam: float | None
    checks: dict[str, bool]
    residuals: dict[str, float]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failed(self) -> list[str]:
        return [name for name, good in self.checks.items() if not good]


def _eigen_check(f: SpectralField, kappa: float | None, single: bool) -> tuple[bool, float]:
    if kappa is None:
        return True, 0.0
    if not single:
        return False, math.inf
    resid = sobolev_norm(laplacian(f) + kappa**2 * f, 0) / (kappa**2 * sobolev_norm(f, 0))
    return resid <= REL_TOL, resid


def verify_gb_pair(pair: FieldPair) -> GBReport:
    """Check the eigen relations, vanishing self-interactions and symmetric cross advection."""
    v, c = pair
    kappa, single_v = _shell(v)
    lam, single_c = _shell(c)
    checks, res = {}, {}
    checks["lap v0 = -kappa^2 v0"], res["lap v0 = -kappa^2 v0"] = _eigen_check(v, kappa, single_v)
    checks["lap c0 = -lambda^2 c0"], res["lap c0 = -lambda^2 c0"] = _eigen_check(c, lam, single_c)

    for name, f, kk in (("P(v0,v0) = 0", v, kappa), ("P(c0,c0) = 0", c, lam)):
        if kk is None:
            checks[name], res[name] = True, 0.0
            continue
        r = sobolev_norm(P(f, f), 0) / (kk * _scale(f))
        checks[name], res[name] = r <= REL_TOL, r

    name = "(v0.grad)c0 = (c0.grad)v0"
    if kappa is None or lam is None:
        checks[name], res[name] = True, 0.0
    else:
        diff = advect(v, c) - advect(c, v)
        r = sobolev_norm(diff, 0) / (max(kappa, lam) * _scale(v, c))
        checks[name], res[name] = r <= REL_TOL, r
    for f, label in ((v, "v0"), (c, "c0")):
        name = f"{label} divergence-free"
        r = validate(f).divergence_residual
        checks[name], res[name] = r <= REL_TOL, r
    return GBReport(kappa, lam, checks, res)


# ---- pairs


@dataclass(frozen=True)
class BeltramiPairSpec:
    """Parameters for one of the three pair families.

    scaled: params {base: SpectralField, alpha: float, slot: "velocity"|"magnetic"}; the
    base flow sits in ``slot`` and alpha times it in the other slot.
    sinusoidal: params {V, C, k, l, phi}.
    trkal: params {alpha, beta, gamma, delta, eps, sigma, kappa, lam}.
    """

    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BeltramiPair:
    pair: FieldPair
    kappa: float
    lam: float
    report: GBReport
    spec: BeltramiPairSpec | None = None

    @property
    def velocity(self) -> SpectralField:
        return self.pair.velocity

    @property
    def magnetic(self) -> SpectralField:
        return self.pair.magnetic


def _attach(pair: FieldPair, spec: BeltramiPairSpec | None, fallback: tuple[float, float] | None = None) -> BeltramiPair:
    report = verify_gb_pair(pair)
    if not report.ok:
        raise AdmissibilityError(report.failed()[0], "pair failed verification")
    kappa, lam = report.kappa, report.lam
    if fallback is not None:
        kappa = fallback[0] if kappa is None else kappa
        lam = fallback[1] if lam is None else lam
    # a zero slot decays at any rate; borrow the other slot's value
    kappa = kappa if kappa is not None else (lam if lam is not None else 1.0)
    lam = lam if lam is not None else kappa
    return BeltramiPair(pair, float(kappa), float(lam), report, spec)


def as_beltrami_pair(pair: FieldPair | BeltramiPair) -> BeltramiPair:
    """Verify an arbitrary pair; refuse with AdmissibilityError if it is not a generalized Beltrami pair."""
    if isinstance(pair, BeltramiPair):
        return pair
    return _attach(pair, None)


def _make_scaled(p: dict, cutoff: int) -> BeltramiPair:
    base: SpectralField = p["base"]
    alpha = float(p.get("alpha", 0.0))
    slot = p.get("slot", "velocity")
    if slot not in ("velocity", "magnetic"):
        raise ValueError(f"slot must be 'velocity' or 'magnetic', got {slot!r}")
    base = base.with_cutoff(cutoff) if base.cutoff <= cutoff else base
    if base.cutoff != cutoff:
        raise ValueError(f"base flow does not fit in cutoff {cutoff}")
    kappa, single = _shell(base)
    if kappa is not None:
        if not single:
            raise AdmissibilityError("lap w0 = -kappa^2 w0", "base flow spans several shells")
        if sobolev_norm(P(base, base), 0) > REL_TOL * kappa * _scale(base):
            raise AdmissibilityError("P(w0,w0) = 0", "base flow is not a generalized Beltrami flow")
    pair = FieldPair(base, alpha * base) if slot == "velocity" else FieldPair(alpha * base, base)
    k = kappa if kappa is not None else 1.0
    return _attach(pair, BeltramiPairSpec("scaled", dict(p)), fallback=(k, k))


def _make_sinusoidal(p: dict, cutoff: int) -> BeltramiPair:
    V = np.asarray(p["V"], dtype=float)
    C = np.asarray(p["C"], dtype=float)
    d = len(V)
    if len(C) != d:
        raise ValueError("V and C must have the same dimension")
    k = _as_wave(p["k"], d)
    ell = _as_wave(p["l"], d)
    phi = math.remainder(float(p.get("phi", 0.0)), 2 * math.pi)
    kf, lf = np.asarray(k, float), np.asarray(ell, float)
    if not _orthogonal(V, kf):
        raise AdmissibilityError("V.k = 0", f"V.k = {float(V @ kf)}")
    if not _orthogonal(C, lf):
        raise AdmissibilityError("C.l = 0", f"C.l = {float(C @ lf)}")
    if np.any(C) and not _orthogonal(V, lf):
        raise AdmissibilityError("(V.l)C = 0", f"V.l = {float(V @ lf)} with C != 0")
    if np.any(V) and not _orthogonal(C, kf):
        raise AdmissibilityError("(C.k)V = 0", f"C.k = {float(C @ kf)} with V != 0")
    if max(max(abs(c) for c in k), max(abs(c) for c in ell)) > cutoff:
        raise ValueError(f"cutoff {cutoff} too small for the wave vectors")
    v0 = SpectralField.from_modes(d, cutoff, _sine_modes(V, k, 0.0), divergence_free=True)
    c0 = SpectralField.from_modes(d, cutoff, _sine_modes(C, ell, phi), divergence_free=True)
    fallback = (float(np.linalg.norm(kf)), float(np.linalg.norm(lf)))
    return _attach(FieldPair(v0, c0), BeltramiPairSpec("sinusoidal", dict(p)), fallback)


def _make_trkal(p: dict, cutoff: int) -> BeltramiPair:
    for key in ("kappa", "lam"):
        val = p.get(key, 1)
        if int(val) != val or val < 1:
            raise AdmissibilityError(f"{key} >= 1 integer", f"got {val}")
    for key in ("eps", "sigma"):
        if p.get(key, 1) not in (1, -1):
            raise AdmissibilityError(f"{key} in {{+1, -1}}", f"got {p.get(key)}")
    for key in ("alpha", "beta", "gamma", "delta"):
        if not math.isfinite(float(p.get(key, 0.0))):
            raise AdmissibilityError(f"{key} finite")
    kappa, lam = int(p.get("kappa", 1)), int(p.get("lam", 1))
    v0 = make_beltrami_3d(p.get("alpha", 0.0), p.get("beta", 0.0), p.get("eps", 1), kappa, cutoff)
    c0 = make_beltrami_3d(p.get("gamma", 0.0), p.get("delta", 0.0), p.get("sigma", 1), lam, cutoff)
    return _attach(FieldPair(v0, c0), BeltramiPairSpec("trkal", dict(p)), (float(kappa), float(lam)))


def make_gb_pair(spec: BeltramiPairSpec, cutoff: int) -> BeltramiPair:
    builders = {"scaled": _make_scaled, "sinusoidal": _make_sinusoidal, "trkal": _make_trkal}
    if spec.kind not in builders:
        raise ValueError(f"unknown pair kind {spec.kind!r}; expected one of {sorted(builders)}")
    return builders[spec.kind](dict(spec.params), cutoff)


# ---- closed-form evolution


def exact_solution(bp: BeltramiPair | FieldPair, nu: float, eta: float, t: float) -> FieldPair:
    """(e^{-kappa^2 nu t} v0, e^{-lambda^2 eta t} c0)."""
    bp = as_beltrami_pair(bp)
    return FieldPair(
        math.exp(-bp.kappa**2 * nu * t) * bp.velocity,
        math.exp(-bp.lam**2 * eta * t) * bp.magnetic,
    )


def exact_norm(bp: BeltramiPair, nu: float, eta: float, t: np.ndarray, p: float) -> np.ndarray:
    """Pair norm of the closed-form solution in order p, vectorized over t."""
    t = np.asarray(t, dtype=float)
    a = bp.kappa**p * sobolev_norm(bp.velocity, 0) * np.exp(-bp.kappa**2 * nu * t)
    b = bp.lam**p * sobolev_norm(bp.magnetic, 0) * np.exp(-bp.lam**2 * eta * t)
    return np.hypot(a, b)


def exact_trajectory(
    bp: BeltramiPair | FieldPair, nu: float, eta: float, times: np.ndarray, orders: Sequence[float]
) -> Trajectory:
    bp = as_beltrami_pair(bp)
    times = np.asarray(times, dtype=float)
    states = [exact_solution(bp, nu, eta, t) for t in times]
    traj = trajectory_from_states(times, states, [])
    traj.norms = {float(p): exact_norm(bp, nu, eta, times, p) for p in orders}
    traj.meta.update({"source": "closed-form", "nu": nu, "eta": eta, "mu": min(nu, eta)})
    return traj


def analytic_budget(bp: BeltramiPair | FieldPair, nu: float, eta: float, orders: Sequence[float]) -> DecayBudget:
    """J_p = (kappa^{p-2}/nu)||v0||_0 + (lambda^{p-2}/eta)||c0||_0, an upper bound on the time integral of the p-norm."""
    bp = as_beltrami_pair(bp)
    v_l2, c_l2 = sobolev_norm(bp.velocity, 0), sobolev_norm(bp.magnetic, 0)
    J = {float(p): bp.kappa ** (p - 2) / nu * v_l2 + bp.lam ** (p - 2) / eta * c_l2 for p in orders}
    return DecayBudget(J, {p: "analytic-beltrami" for p in J})
