"""Independent reference computations used by the tests.

Nothing here goes through the package's FFT layout: fields are evaluated by
explicit Fourier sums and projected by hand.
"""

import itertools
import math

import numpy as np
from hypothesis import strategies as st

from mhd_certify.spectral import FieldPair, SpectralField, random_field


def full_modes(f):
    """Every (k, v_k) including Hermitian partners, as two arrays."""
    ks = np.concatenate([f.modes, -f.modes])
    cs = np.concatenate([f.coeffs, np.conj(f.coeffs)])
    return ks, cs


def evaluate(f, n):
    """Field values on the n^d grid by a direct Fourier sum; shape (d, n, ..., n)."""
    d = f.d
    x = 2 * np.pi * np.arange(n) / n
    grids = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    ks, cs = full_modes(f)
    phase = np.exp(1j * pts @ ks.T)  # (points, modes)
    vals = (phase @ cs).real / (2 * np.pi) ** (d / 2)
    return vals.T.reshape((d,) + (n,) * d)


def evaluate_grad(f, n):
    """grad[s, r] = d_s f_r on the grid."""
    d = f.d
    x = 2 * np.pi * np.arange(n) / n
    grids = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    ks, cs = full_modes(f)
    phase = np.exp(1j * pts @ ks.T)
    out = np.empty((d, d) + (n,) * d)
    for s in range(d):
        vals = (phase @ (1j * ks[:, s : s + 1] * cs)).real / (2 * np.pi) ** (d / 2)
        out[s] = vals.T.reshape((d,) + (n,) * d)
    return out


def coefficient(values, k):
    """e_k coefficient of real grid data by the trapezoid rule (exact for band-limited data)."""
    d = values.ndim - 1
    n = values.shape[-1]
    x = 2 * np.pi * np.arange(n) / n
    grids = np.meshgrid(*([x] * d), indexing="ij")
    phase = np.exp(-1j * sum(kk * g for kk, g in zip(k, grids)))
    w = (2 * np.pi / n) ** d / (2 * np.pi) ** (d / 2)
    return np.array([np.sum(values[r] * phase) * w for r in range(values.shape[0])])


def advect_physical(v, w, out_cutoff, n=32):
    """(v.grad)w coefficients on the canonical modes of ``out_cutoff`` via pointwise products."""
    vals = evaluate(v, n)
    grad = evaluate_grad(w, n)
    prod = np.einsum("s...,sr...->r...", vals, grad)
    modes = SpectralField.zeros(v.d, out_cutoff).modes
    x = 2 * np.pi * np.arange(n) / n
    d = v.d
    grids = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    phase = np.exp(-1j * pts @ modes.T)  # (points, modes)
    w8 = (2 * np.pi / n) ** d / (2 * np.pi) ** (d / 2)
    return (prod.reshape(d, -1) @ phase).T * w8


def project_by_hand(k, v):
    """Remove the component of v along k with Gram-Schmidt."""
    k = np.asarray(k, dtype=float)
    e = k / np.linalg.norm(k)
    return v - np.vdot(e, v) * e


def riccati_autonomous(t, delta, mu, g):
    """Solution of R' = -mu R + g R^2, R(0) = delta."""
    return delta * np.exp(-mu * t) / (1 - g * delta * (1 - np.exp(-mu * t)) / mu)


def riccati_autonomous_tc(delta, mu, g):
    x = mu / (g * delta)
    return math.inf if x >= 1 else -math.log(1 - x) / mu


# ---- hypothesis strategies


@st.composite
def fields(draw, d=None, cutoff=None, decay=None):
    d = draw(st.sampled_from([2, 3])) if d is None else d
    m = draw(st.integers(1, 3 if d == 2 else 2)) if cutoff is None else cutoff
    seed = draw(st.integers(0, 2**31 - 1))
    dec = draw(st.floats(0.0, 3.0)) if decay is None else decay
    return random_field(seed, d, m, spectrum_decay=dec)


@st.composite
def field_pairs(draw, d=None, cutoff=None):
    d = draw(st.sampled_from([2, 3])) if d is None else d
    m = draw(st.integers(1, 3 if d == 2 else 2)) if cutoff is None else cutoff
    a = draw(fields(d=d, cutoff=m))
    b = draw(fields(d=d, cutoff=m))
    return FieldPair(a, b)


def all_modes(d, m):
    return [k for k in itertools.product(range(-m, m + 1), repeat=d) if any(k)]


# ---- synthetic estimator sets


def unit_table(d=3, n=3.0, p=4.0, g_hat=1.0, k_hat=1.0):
    """Constants table with G_hat = g_hat and K_hat = k_hat on the (n, p) block."""
    from mhd_certify.constants import ConstantsTable

    s = math.sqrt(2.0)
    row = (k_hat / s, g_hat / s)
    return ConstantsTable(d, {(n, n): row, (p, p): row, (p, n): row}, "test")


def synthetic_estimators(seed, n=3.0, p=4.0, t_end=4.0, points=4001, eps_p=True):
    """Smooth decaying growth series with eps_n = 0; delta_n spans global and finite-T_c cases."""
    from mhd_certify.certifier import EstimatorSet

    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, t_end, points)
    growth = {}
    for q in (n, n + 1, p, p + 1):
        a, b, c = rng.uniform(0.05, 0.5), rng.uniform(0.2, 1.5), rng.uniform(1.0, 4.0)
        growth[q] = a * np.exp(-b * t) * (1 + 0.3 * np.sin(c * t) ** 2)
    eps = {n: np.zeros_like(t), p: rng.uniform(0, 0.1) * np.exp(-t) * (1 + np.cos(3 * t) ** 2) if eps_p else np.zeros_like(t)}
    delta = {n: float(rng.uniform(0.05, 0.9)), p: float(rng.uniform(0.0, 1.0))}
    return EstimatorSet(t, eps, delta, growth)
