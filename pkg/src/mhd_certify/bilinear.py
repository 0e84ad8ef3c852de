"""Advection products, the projected NS bilinear map and the MHD bilinear map.

Products of truncated fields are computed exactly: the output keeps every mode
up to twice the input cutoff unless a smaller output cutoff is requested.  Two
routes are available.  ``method="direct"`` is a literal convolution over mode
pairs and serves as the oracle; ``method="fft"`` evaluates the product on a
padded physical grid large enough that no retained mode is aliased.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .constants import ConstantsTable
from .spectral import (
    FieldPair,
    SpectralField,
    _cube_flat,
    _grid_positions,
    canonical_modes,
    fft_workers,
    grid_to_spectrum,
    leray_project,
    random_field,
    sobolev_inner,
    sobolev_norm,
    spectrum_to_grid,
    validate,
)


def _common(v: SpectralField, w: SpectralField) -> tuple[SpectralField, SpectralField]:
    if v.d != w.d:
        raise ValueError(f"dimension mismatch: {v.d} vs {w.d}")
    m = max(v.cutoff, w.cutoff)
    return v.with_cutoff(m), w.with_cutoff(m)


def _cube(f: SpectralField) -> np.ndarray:
    """Full (both signs) coefficient cube, shape (d, S, ..., S), S = 2M+1, offset M."""
    m, d = f.cutoff, f.d
    side = 2 * m + 1
    full = np.zeros((d, side**d), dtype=np.complex128)
    full[:, _cube_flat(f.modes, m)] = f.coeffs.T
    full[:, _cube_flat(-f.modes, m)] = np.conj(f.coeffs.T)
    return full.reshape((d,) + (side,) * d)


def _advect_direct(v: SpectralField, w: SpectralField, out_cutoff: int) -> np.ndarray:
    d, m = v.d, v.cutoff
    side = 2 * m + 1
    vc, wc = _cube(v), _cube(w)
    axis = np.arange(-m, m + 1, dtype=float)
    kgrid = np.meshgrid(*([axis] * d), indexing="ij")
    # grad[s, r] = i k_s w_r
    grad = np.stack([1j * kgrid[s] * wc for s in range(d)])
    out = np.zeros((d,) + (4 * m + 1,) * d, dtype=np.complex128)
    support = np.argwhere(np.any(vc != 0, axis=0))
    for idx in support:
        vk = vc[(slice(None),) + tuple(idx)]
        window = (slice(None),) + tuple(slice(i, i + side) for i in idx)
        out[window] += np.tensordot(vk, grad, axes=(0, 0))
    out *= (2.0 * math.pi) ** (-d / 2.0)
    modes = canonical_modes(d, out_cutoff)
    flat = out.reshape(d, -1)
    return flat[:, _cube_flat(modes, 2 * m)].T


def _grad_coeffs(w: SpectralField) -> np.ndarray:
    """Canonical coefficients of the gradient, shape (d_s, d_r, n_modes)."""
    modes = w.modes.astype(float)
    return 1j * modes.T[:, None, :] * w.coeffs.T[None, :, :]


def _advect_fft(v: SpectralField, w: SpectralField, out_cutoff: int) -> np.ndarray:
    d, m = v.d, v.cutoff
    n = 2 * m + out_cutoff + 1
    vg = spectrum_to_grid(v.coeffs.T, d, m, n)
    gw = spectrum_to_grid(_grad_coeffs(w), d, m, n)
    prod = np.einsum("s...,sr...->r...", vg, gw)
    return grid_to_spectrum(prod, d, out_cutoff).T


def advect(
    v: SpectralField,
    w: SpectralField,
    cutoff: int | None = None,
    method: str = "fft",
) -> SpectralField:
    """(v.grad) w, exact on the modes kept; default output cutoff is 2M.

    The mean of the product vanishes when div v = 0.  Otherwise the mean is
    discarded with a warning.
    """
    v, w = _common(v, w)
    out_cutoff = 2 * v.cutoff if cutoff is None else int(cutoff)
    if not 1 <= out_cutoff <= 2 * v.cutoff:
        raise ValueError(f"output cutoff must lie in [1, {2 * v.cutoff}]")
    if not v.divergence_free and not validate(v).divergence_free:
        warnings.warn("advecting field is not divergence-free; zero mode of (v.grad)w discarded")
    if method == "direct":
        coeffs = _advect_direct(v, w, out_cutoff)
    elif method == "fft":
        coeffs = _advect_fft(v, w, out_cutoff)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SpectralField(v.d, out_cutoff, coeffs)


def P(v: SpectralField, w: SpectralField, cutoff: int | None = None, method: str = "fft") -> SpectralField:
    """Projected advection -L((v.grad) w)."""
    return -leray_project(advect(v, w, cutoff=cutoff, method=method))


def P_mhd(V: FieldPair, W: FieldPair, cutoff: int | None = None, method: str = "fft") -> FieldPair:
    """(P(v,w) - P(c,g), P(v,g) - P(c,w)) for V = (v,c), W = (w,g)."""
    v, c = V
    w, g = W
    first = P(v, w, cutoff, method) - P(c, g, cutoff, method)
    second = P(v, g, cutoff, method) - P(c, w, cutoff, method)
    return FieldPair(first, second)


def mhd_self_interaction(pair: FieldPair, cutoff: int | None = None) -> FieldPair:
    """P_mhd(u, u) in one batched pseudo-spectral pass (the integrator's hot path)."""
    u, b = pair
    d, m = pair.d, pair.cutoff
    out_cutoff = 2 * m if cutoff is None else int(cutoff)
    n = 2 * m + out_cutoff + 1
    fields = np.stack([u.coeffs.T, b.coeffs.T])
    grads = np.stack([_grad_coeffs(u), _grad_coeffs(b)])
    fg = spectrum_to_grid(fields, d, m, n)
    gg = spectrum_to_grid(grads, d, m, n)
    adv = lambda i, j: np.einsum("s...,sr...->r...", fg[i], gg[j])  # noqa: E731
    first = adv(0, 0) - adv(1, 1)
    second = adv(0, 1) - adv(1, 0)
    spec = grid_to_spectrum(np.stack([first, second]), d, out_cutoff)
    vel = -leray_project(SpectralField(d, out_cutoff, spec[0].T))
    mag = -leray_project(SpectralField(d, out_cutoff, spec[1].T))
    return FieldPair(vel, mag)


class SelfInteractionKernel:
    """Raw-array P_mhd(u, u) for a fixed (d, M, output cutoff), used inside time stepping.

    Uses the divergence form (v.grad)w = div(v w^T), valid because both slots are
    divergence-free.  The velocity flux u u^T - b b^T is symmetric and the magnetic
    flux u b^T - b u^T antisymmetric, so only their independent entries are
    transformed.  Agrees with :func:`mhd_self_interaction` to rounding.
    """

    def __init__(self, d: int, cutoff: int, out_cutoff: int):
        self.d, self.cutoff, self.out_cutoff = d, cutoff, out_cutoff
        n = 2 * cutoff + out_cutoff + 1
        self.n = n
        half = (n,) * (d - 1) + (n // 2 + 1,)
        self.half = half
        # scatter canonical inputs (and their partners) into the half spectrum
        modes_in = canonical_modes(d, cutoff)
        self.pos_in, self.sel_pos = self._half_index(modes_in, n, half)
        self.neg_in, self.sel_neg = self._half_index(-modes_in, n, half)
        # gather canonical outputs from the half spectrum
        modes = canonical_modes(d, out_cutoff)
        wrapped = modes % n
        direct = wrapped[:, -1] <= n // 2
        idx = np.where(direct[:, None], wrapped, (-modes) % n)
        self.gather = np.ravel_multi_index(tuple(idx.T), half)
        self.flip = ~direct
        self.k = modes.astype(float)
        self.ksq = np.sum(self.k**2, axis=1)
        self.scale_in = n**d / (2.0 * math.pi) ** (d / 2.0)
        self.scale_out = (2.0 * math.pi) ** (d / 2.0) / n**d
        self.axes = tuple(range(-d, 0))
        sym = [(s, r) for s in range(d) for r in range(s, d)]
        anti = [(s, r) for s in range(d) for r in range(s + 1, d)]
        self.sym_s, self.sym_r = (np.array(a) for a in zip(*sym))
        self.anti_s, self.anti_r = (np.array(a) for a in zip(*anti)) if anti else (np.zeros(0, int),) * 2
        n_sym = len(sym)
        self.idx_sym = np.empty((d, d), dtype=int)
        self.idx_anti = np.full((d, d), len(sym) + len(anti), dtype=int)  # points at a zero channel
        self.sign_anti = np.zeros((d, d))
        for c, (s, r) in enumerate(sym):
            self.idx_sym[s, r] = self.idx_sym[r, s] = c
        for c, (s, r) in enumerate(anti):
            self.idx_anti[s, r] = self.idx_anti[r, s] = n_sym + c
            self.sign_anti[s, r], self.sign_anti[r, s] = 1.0, -1.0

    @staticmethod
    def _half_index(modes, n, half):
        wrapped = modes % n
        keep = np.nonzero(wrapped[:, -1] <= n // 2)[0]
        return np.ravel_multi_index(tuple(wrapped[keep].T), half), keep

    def __call__(self, u: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """u, b: canonical coefficient arrays (n_modes, d); returns the two slots at the output cutoff."""
        d, n = self.d, self.n
        coeffs = np.concatenate([u.T, b.T])
        full = np.zeros((2 * d, int(np.prod(self.half))), dtype=np.complex128)
        full[:, self.pos_in] = coeffs[:, self.sel_pos]
        full[:, self.neg_in] = np.conj(coeffs[:, self.sel_neg])
        g = scipy.fft.irfftn(full.reshape((2 * d,) + self.half), s=(n,) * d, axes=self.axes,
                             workers=fft_workers())
        g *= self.scale_in
        U, B = g[:d], g[d:]
        flux = np.concatenate([
            U[self.sym_s] * U[self.sym_r] - B[self.sym_s] * B[self.sym_r],
            U[self.anti_s] * B[self.anti_r] - B[self.anti_s] * U[self.anti_r],
        ])
        spec = scipy.fft.rfftn(flux, axes=self.axes, workers=fft_workers()).reshape(len(flux), -1)
        spec = spec[:, self.gather]
        spec[:, self.flip] = np.conj(spec[:, self.flip])
        spec = np.concatenate([spec, np.zeros((1, spec.shape[1]), dtype=spec.dtype)])
        t_vel = spec[self.idx_sym]
        t_mag = self.sign_anti[:, :, None] * spec[self.idx_anti]
        # adv[r, k] = sum_s i k_s T[s, r, k]
        pre = 1j * self.scale_out
        out = []
        for t in (t_vel, t_mag):
            adv = pre * np.einsum("ks,srk->rk", self.k, t)
            kdot = np.einsum("ks,sk->k", self.k, adv) / self.ksq
            out.append(-(adv - self.k.T * kdot).T)
        return out[0], out[1]


@functools.lru_cache(maxsize=32)
def self_interaction_kernel(d: int, cutoff: int, out_cutoff: int) -> SelfInteractionKernel:
    return SelfInteractionKernel(d, cutoff, out_cutoff)


# ---- inequality sampling


def basic_ratio(v: SpectralField, w: SpectralField, p: float, n: float) -> float:
    """2 ||P(v,w)||_p / (||v||_p ||w||_{n+1} + ||v||_n ||w||_{p+1}); nan for a zero denominator."""
    den = sobolev_norm(v, p) * sobolev_norm(w, n + 1) + sobolev_norm(v, n) * sobolev_norm(w, p + 1)
    if den == 0:
        return math.nan
    return 2.0 * sobolev_norm(P(v, w), p) / den


def kato_ratio(v: SpectralField, w: SpectralField, p: float, n: float) -> float:
    """2 |<P(v,w)|w>_p| / ((||v||_p ||w||_n + ||v||_n ||w||_p) ||w||_p)."""
    wp = sobolev_norm(w, p)
    den = (sobolev_norm(v, p) * sobolev_norm(w, n) + sobolev_norm(v, n) * wp) * wp
    if den == 0:
        return math.nan
    pvw = P(v, w, cutoff=w.cutoff)
    return 2.0 * abs(sobolev_inner(pvw, w, p)) / den


def pair_basic_ratio(V: FieldPair, W: FieldPair, p: float, n: float) -> float:
    den = V.norm(p) * W.norm(n + 1) + V.norm(n) * W.norm(p + 1)
    if den == 0:
        return math.nan
    return 2.0 * P_mhd(V, W).norm(p) / den


def pair_kato_ratio(V: FieldPair, W: FieldPair, p: float, n: float) -> float:
    wp = W.norm(p)
    den = (V.norm(p) * W.norm(n) + V.norm(n) * wp) * wp
    if den == 0:
        return math.nan
    pvw = P_mhd(V, W, cutoff=W.cutoff)
    inner = sobolev_inner(pvw.velocity, W.velocity, p) + sobolev_inner(pvw.magnetic, W.magnetic, p)
    return 2.0 * abs(inner) / den


def _sample_field(rng: np.random.Generator, d: int, cutoff: int) -> SpectralField:
    """Alternate between broadband random fields and sparse few-mode fields."""
    if rng.random() < 0.5:
        decay = float(rng.uniform(0.0, 4.0))
        return random_field(int(rng.integers(2**31)), d, cutoff, decay, amplitude=1.0)
    modes = canonical_modes(d, cutoff)
    count = int(rng.integers(1, 4))
    picks = rng.choice(len(modes), size=count, replace=False)
    coeffs = np.zeros((len(modes), d), dtype=np.complex128)
    coeffs[picks] = rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))
    return leray_project(SpectralField(d, cutoff, coeffs))


@dataclass(frozen=True)
class ConstantEstimate:
    p: float
    n: float
    d: int
    K_lower: float
    G_lower: float | None
    samples: int


def estimate_constants(
    p: float,
    n: float,
    d: int,
    cutoff: int,
    sample_count: int,
    seed: int,
    extra: list[tuple[SpectralField, SpectralField]] | None = None,
) -> ConstantEstimate:
    """Running maxima of the inequality ratios over random field pairs.

    The results are lower bounds for any admissible K_pn, G_pn.  G is only
    estimated when n > d/2 + 1.  Samples are drawn sequentially from ``seed``,
    so a longer run extends a shorter one and the maxima never decrease.
    """
    if not n > d / 2:
        raise ValueError(f"K_pn needs n > d/2 = {d / 2}, got n={n}")
    if p < n:
        raise ValueError(f"need p >= n, got p={p}, n={n}")
    want_g = n > d / 2 + 1
    rng = np.random.default_rng(seed)
    k_max, g_max = 0.0, 0.0
    pairs = list(extra or [])
    for _ in range(sample_count):
        pairs.append((_sample_field(rng, d, cutoff), _sample_field(rng, d, cutoff)))
    for v, w in pairs:
        r = basic_ratio(v, w, p, n)
        if not math.isnan(r):
            k_max = max(k_max, r)
        if want_g:
            r = kato_ratio(v, w, p, n)
            if not math.isnan(r):
                g_max = max(g_max, r)
    return ConstantEstimate(p, n, d, k_max, g_max if want_g else None, len(pairs))


def check_against_table(est: ConstantEstimate, table: ConstantsTable) -> list[str]:
    """Warn (and return messages) when empirical floors exceed configured constants."""
    problems = []
    if est.K_lower > table.K(est.p, est.n):
        problems.append(f"K_{est.p},{est.n}: sampled {est.K_lower:.4g} > configured {table.K(est.p, est.n):.4g}")
    if est.G_lower is not None and est.G_lower > table.G(est.p, est.n):
        problems.append(f"G_{est.p},{est.n}: sampled {est.G_lower:.4g} > configured {table.G(est.p, est.n):.4g}")
    for msg in problems:
        warnings.warn("constants table below empirical floor: " + msg)
    return problems


@dataclass(frozen=True)
class InequalityCheck:
    ratio: float
    bound: float

    @property
    def holds(self) -> bool:
        return math.isnan(self.ratio) or self.ratio <= self.bound * (1 + 1e-12)


def check_basic(v: SpectralField, w: SpectralField, p: float, n: float, table: ConstantsTable) -> InequalityCheck:
    return InequalityCheck(basic_ratio(v, w, p, n), table.K(p, n))


def check_kato_pair(V: FieldPair, W: FieldPair, p: float, n: float, table: ConstantsTable) -> InequalityCheck:
    return InequalityCheck(pair_kato_ratio(V, W, p, n), table.G_hat(p, n))


def hatted_transfer(V: FieldPair, W: FieldPair, p: float, n: float) -> InequalityCheck:
    """Pair ratio against sqrt(2) times the worst single-field ratio over the four slot combinations.

    If the single-field inequality holds with some K on (v,w), (c,g), (v,g), (c,w),
    the pair inequality holds with sqrt(2) K; this checks that implication.
    """
    (v, c), (w, g) = V, W
    singles = [basic_ratio(a, b, p, n) for a, b in ((v, w), (c, g), (v, g), (c, w))]
    singles = [s for s in singles if not math.isnan(s)]
    k_local = max(singles) if singles else 0.0
    return InequalityCheck(pair_basic_ratio(V, W, p, n), math.sqrt(2.0) * k_local)
