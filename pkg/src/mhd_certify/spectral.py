"""Truncated Fourier representation of real, mean-zero vector fields on the d-torus.

A field on T^d = (R/2piZ)^d is written v(x) = sum_k v_k e_k(x) with
e_k(x) = (2 pi)^{-d/2} exp(i k.x).  Only one representative of each +-k pair is
stored (the one whose first nonzero component is positive); the partner
v_{-k} = conj(v_k) is implied, so every stored field is real by construction.
Modes are restricted to the cube max_i |k_i| <= cutoff.
"""

from __future__ import annotations

import functools
import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.fft

DIV_TOL = 1e-12


def fft_workers() -> int:
    """Thread cap for FFTs, read from MHD_CERTIFY_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("MHD_CERTIFY_THREADS", "1")))
    except ValueError:
        return 1


@functools.lru_cache(maxsize=None)
def canonical_modes(d: int, cutoff: int) -> np.ndarray:
    """Canonical wave vectors (first nonzero component positive), lexicographic order."""
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    rng = range(-cutoff, cutoff + 1)
    modes = [k for k in itertools.product(rng, repeat=d) if _is_canonical(k)]
    arr = np.array(modes, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def _is_canonical(k: Iterable[int]) -> bool:
    for c in k:
        if c != 0:
            return c > 0
    return False


@functools.lru_cache(maxsize=None)
def _mode_tables(d: int, cutoff: int):
    modes = canonical_modes(d, cutoff).astype(float)
    ksq = np.sum(modes**2, axis=1)
    ksq.setflags(write=False)
    return modes, ksq


@functools.lru_cache(maxsize=None)
def _transfer_index(d: int, src: int, dst: int):
    """Positions of src-cutoff canonical modes inside the dst-cutoff list (-1 if dropped)."""
    side = 2 * dst + 1
    lookup = -np.ones(side**d, dtype=np.int64)
    dst_modes = canonical_modes(d, dst)
    lookup[_cube_flat(dst_modes, dst)] = np.arange(len(dst_modes))
    src_modes = canonical_modes(d, src)
    inside = np.all(np.abs(src_modes) <= dst, axis=1)
    pos = -np.ones(len(src_modes), dtype=np.int64)
    pos[inside] = lookup[_cube_flat(src_modes[inside], dst)]
    return pos


def _cube_flat(modes: np.ndarray, cutoff: int) -> np.ndarray:
    side = 2 * cutoff + 1
    shifted = modes + cutoff
    flat = np.zeros(len(modes), dtype=np.int64)
    for j in range(modes.shape[1]):
        flat = flat * side + shifted[:, j]
    return flat


def mode_index(d: int, cutoff: int) -> dict[tuple[int, ...], int]:
    return {tuple(int(c) for c in k): i for i, k in enumerate(canonical_modes(d, cutoff))}


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real vector field on T^d stored by canonical Fourier coefficients.

    ``coeffs`` has shape (n_modes, d); row i is the coefficient vector of
    ``canonical_modes(d, cutoff)[i]``.  ``zero_mode`` is normally None; it only
    carries a (forbidden) mean picked up from external input so that
    :func:`validate` can report it.
    """

    d: int
    cutoff: int
    coeffs: np.ndarray
    divergence_free: bool = False
    zero_mode: np.ndarray | None = field(default=None)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        expected = (len(canonical_modes(self.d, self.cutoff)), self.d)
        if c.shape != expected:
            raise ValueError(f"coefficient array has shape {c.shape}, expected {expected}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.zero_mode is not None:
            z = np.asarray(self.zero_mode, dtype=np.complex128).reshape(self.d)
            object.__setattr__(self, "zero_mode", z)

    @classmethod
    def zeros(cls, d: int, cutoff: int) -> "SpectralField":
        n = len(canonical_modes(d, cutoff))
        return cls(d, cutoff, np.zeros((n, d), dtype=np.complex128), divergence_free=True)

    @classmethod
    def from_modes(
        cls,
        d: int,
        cutoff: int,
        modes: Mapping[tuple[int, ...], Iterable[complex]],
        divergence_free: bool = False,
    ) -> "SpectralField":
        """Build from {k: v_k}; keys on the negative half-space are conjugated into place.

        If both k and -k are supplied their contributions must be Hermitian partners;
        inconsistent input raises ValueError.
        """
        index = mode_index(d, cutoff)
        coeffs = np.zeros((len(index), d), dtype=np.complex128)
        seen = np.zeros(len(index), dtype=bool)
        zero = None
        for k, vec in modes.items():
            k = tuple(int(c) for c in k)
            vec = np.asarray(vec, dtype=np.complex128).reshape(d)
            if len(k) != d:
                raise ValueError(f"wave vector {k} has wrong dimension")
            if max(abs(c) for c in k) > cutoff:
                raise ValueError(f"wave vector {k} exceeds cutoff {cutoff}")
            if not any(k):
                zero = vec
                continue
            if _is_canonical(k):
                i, val = index[k], vec
            else:
                i, val = index[tuple(-c for c in k)], np.conj(vec)
            if seen[i]:
                if not np.allclose(coeffs[i], val, rtol=1e-12, atol=1e-14):
                    raise ValueError(f"mode {k} contradicts its Hermitian partner")
                continue
            coeffs[i] = val
            seen[i] = True
        return cls(d, cutoff, coeffs, divergence_free=divergence_free, zero_mode=zero)

    @property
    def modes(self) -> np.ndarray:
        return canonical_modes(self.d, self.cutoff)

    @property
    def ksq(self) -> np.ndarray:
        return _mode_tables(self.d, self.cutoff)[1]

    def _like(self, coeffs: np.ndarray, divergence_free: bool | None = None) -> "SpectralField":
        flag = self.divergence_free if divergence_free is None else divergence_free
        return SpectralField(self.d, self.cutoff, coeffs, divergence_free=flag)

    def _check_compatible(self, other: "SpectralField"):
        if not isinstance(other, SpectralField):
            raise TypeError(f"expected SpectralField, got {type(other).__name__}")
        if other.d != self.d or other.cutoff != self.cutoff:
            raise ValueError(
                f"incompatible fields: (d={self.d}, M={self.cutoff}) vs (d={other.d}, M={other.cutoff})"
            )

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return self._like(self.coeffs + other.coeffs, self.divergence_free and other.divergence_free)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return self._like(self.coeffs - other.coeffs, self.divergence_free and other.divergence_free)

    def __neg__(self) -> "SpectralField":
        return self._like(-self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        if isinstance(scalar, complex) or np.iscomplexobj(scalar):
            raise TypeError("only real scalars keep a field real")
        return self._like(float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def with_cutoff(self, cutoff: int) -> "SpectralField":
        """Zero-pad or truncate to a new cube cutoff."""
        if cutoff == self.cutoff:
            return self
        n_dst = len(canonical_modes(self.d, cutoff))
        pos = _transfer_index(self.d, self.cutoff, cutoff)
        out = np.zeros((n_dst, self.d), dtype=np.complex128)
        keep = pos >= 0
        out[pos[keep]] = self.coeffs[keep]
        return SpectralField(self.d, cutoff, out, divergence_free=self.divergence_free)

    def norm(self, p: float = 0.0) -> float:
        return sobolev_norm(self, p)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)


@dataclass(frozen=True, eq=False)
class FieldPair:
    """State (u, b): velocity and magnetic field on the same truncated space."""

    velocity: SpectralField
    magnetic: SpectralField

    def __post_init__(self):
        v, c = self.velocity, self.magnetic
        if v.d != c.d or v.cutoff != c.cutoff:
            raise ValueError(
                f"pair components disagree: (d={v.d}, M={v.cutoff}) vs (d={c.d}, M={c.cutoff})"
            )

    @classmethod
    def zeros(cls, d: int, cutoff: int) -> "FieldPair":
        z = SpectralField.zeros(d, cutoff)
        return cls(z, z)

    @property
    def d(self) -> int:
        return self.velocity.d

    @property
    def cutoff(self) -> int:
        return self.velocity.cutoff

    def __iter__(self):
        yield self.velocity
        yield self.magnetic

    def __add__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair(self.velocity + other.velocity, self.magnetic + other.magnetic)

    def __sub__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair(self.velocity - other.velocity, self.magnetic - other.magnetic)

    def __neg__(self) -> "FieldPair":
        return FieldPair(-self.velocity, -self.magnetic)

    def __mul__(self, scalar: float) -> "FieldPair":
        return FieldPair(self.velocity * scalar, self.magnetic * scalar)

    __rmul__ = __mul__

    def with_cutoff(self, cutoff: int) -> "FieldPair":
        return FieldPair(self.velocity.with_cutoff(cutoff), self.magnetic.with_cutoff(cutoff))

    def norm(self, p: float = 0.0) -> float:
        return pair_norm(self, p)


def _weights(f: SpectralField, p: float) -> np.ndarray:
    # |k|^{2p}; ksq >= 1 on every stored mode
    return f.ksq ** float(p)


def sobolev_norm(f: SpectralField, p: float = 0.0) -> float:
    """sqrt(sum_{k != 0} |k|^{2p} |v_k|^2) over both signs of k."""
    energy = np.sum(_weights(f, p) * np.sum(np.abs(f.coeffs) ** 2, axis=1))
    return math.sqrt(2.0 * float(energy))


def sobolev_inner(f: SpectralField, g: SpectralField, p: float = 0.0) -> float:
    """<f|g>_p; real because both fields are real."""
    f._check_compatible(g)
    s = np.sum(_weights(f, p) * np.sum(np.conj(f.coeffs) * g.coeffs, axis=1))
    return 2.0 * float(s.real)


def pair_norm(pair: FieldPair, p: float = 0.0) -> float:
    if not isinstance(pair, FieldPair):
        raise TypeError("pair_norm expects a FieldPair")
    a, b = sobolev_norm(pair.velocity, p), sobolev_norm(pair.magnetic, p)
    return math.hypot(a, b)


def pair_inner(x: FieldPair, y: FieldPair, p: float = 0.0) -> float:
    return sobolev_inner(x.velocity, y.velocity, p) + sobolev_inner(x.magnetic, y.magnetic, p)


def leray_project(f: SpectralField) -> SpectralField:
    """Replace each v_k by v_k - (k.v_k) k / |k|^2."""
    modes, ksq = _mode_tables(f.d, f.cutoff)
    kdotv = np.sum(f.coeffs * modes, axis=1)
    out = f.coeffs - (kdotv / ksq)[:, None] * modes
    return SpectralField(f.d, f.cutoff, out, divergence_free=True, zero_mode=f.zero_mode)


def frac_laplacian(f: SpectralField, p: float) -> SpectralField:
    """(-Delta)^{p/2}: scale v_k by |k|^p.  Any real p."""
    scale = f.ksq ** (0.5 * float(p))
    return f._like(f.coeffs * scale[:, None])


def laplacian(f: SpectralField) -> SpectralField:
    return f._like(-f.ksq[:, None] * f.coeffs)


def apply_A(pair: FieldPair, nu: float, eta: float) -> FieldPair:
    """Dissipation operator (nu Lap v, eta Lap c)."""
    if not (nu > 0 and eta > 0):
        raise ValueError(f"viscosity and resistivity must be positive, got nu={nu}, eta={eta}")
    return FieldPair(laplacian(pair.velocity) * nu, laplacian(pair.magnetic) * eta)


@dataclass(frozen=True)
class ValidationReport:
    divergence_residual: float
    has_zero_mode: bool
    hermitian_ok: bool
    finite: bool

    @property
    def divergence_free(self) -> bool:
        return self.divergence_residual <= DIV_TOL

    @property
    def ok(self) -> bool:
        return self.divergence_free and not self.has_zero_mode and self.hermitian_ok and self.finite


def validate(f: SpectralField) -> ValidationReport:
    """Check the field invariants.

    The divergence residual is max over modes of |k.v_k| / |k| divided by
    max |v_k|, so it is scale free and insensitive to roundoff-level modes.
    """
    modes, ksq = _mode_tables(f.d, f.cutoff)
    mag = np.linalg.norm(f.coeffs, axis=1)
    top = float(np.max(mag)) if mag.size else 0.0
    if top > 0:
        along = np.abs(np.sum(f.coeffs * modes, axis=1)) / np.sqrt(ksq)
        resid = float(np.max(along)) / top
    else:
        resid = 0.0
    z = f.zero_mode
    has_zero = z is not None and bool(np.any(z != 0))
    herm = z is None or bool(np.all(np.abs(z.imag) <= 1e-14 * max(1.0, float(np.max(np.abs(z))))))
    finite = bool(np.all(np.isfinite(f.coeffs))) and (z is None or bool(np.all(np.isfinite(z))))
    return ValidationReport(resid, has_zero, herm, finite)


def random_field(
    seed: int,
    d: int,
    cutoff: int,
    spectrum_decay: float = 1.0,
    amplitude: float | None = None,
) -> SpectralField:
    """Deterministic divergence-free random field with |v_k| ~ |k|^{-spectrum_decay}.

    If ``amplitude`` is given the result is rescaled to that L2 norm.
    """
    rng = np.random.default_rng(seed)
    modes, ksq = _mode_tables(d, cutoff)
    raw = rng.standard_normal((len(modes), d)) + 1j * rng.standard_normal((len(modes), d))
    if math.isinf(spectrum_decay):
        scale = (ksq == 1.0).astype(float)
    else:
        scale = ksq ** (-0.5 * spectrum_decay)
    f = leray_project(SpectralField(d, cutoff, raw * scale[:, None]))
    if amplitude is not None:
        nrm = sobolev_norm(f, 0.0)
        if nrm > 0:
            f = f * (amplitude / nrm)
    return f


# ---- physical grid transforms (used by the pseudo-spectral product and oracles)


@functools.lru_cache(maxsize=None)
def _grid_positions(d: int, cutoff: int, n: int):
    modes = canonical_modes(d, cutoff)
    shape = (n,) * d
    pos = np.ravel_multi_index(tuple((modes % n).T), shape)
    neg = np.ravel_multi_index(tuple(((-modes) % n).T), shape)
    return pos, neg


def spectrum_to_grid(coeffs: np.ndarray, d: int, cutoff: int, n: int) -> np.ndarray:
    """Physical values of real fields on the uniform n^d grid x_j = 2 pi j / n.

    ``coeffs`` has shape (..., n_modes) (leading axes are batched).
    """
    if n < 2 * cutoff + 1:
        raise ValueError(f"grid size {n} too small for cutoff {cutoff}")
    pos, neg = _grid_positions(d, cutoff, n)
    lead = coeffs.shape[:-1]
    full = np.zeros(lead + (n**d,), dtype=np.complex128)
    full[..., pos] = coeffs
    full[..., neg] = np.conj(coeffs)
    full = full.reshape(lead + (n,) * d)
    axes = tuple(range(len(lead), len(lead) + d))
    vals = scipy.fft.ifftn(full, axes=axes, workers=fft_workers())
    return vals.real * (n**d / (2.0 * math.pi) ** (d / 2.0))


def grid_to_spectrum(values: np.ndarray, d: int, cutoff: int) -> np.ndarray:
    """Canonical coefficients (..., n_modes) of real grid data with leading batch axes."""
    n = values.shape[-1]
    lead = values.shape[:-d]
    axes = tuple(range(len(lead), len(lead) + d))
    spec = scipy.fft.fftn(values, axes=axes, workers=fft_workers())
    spec = spec.reshape(lead + (n**d,))
    pos, _ = _grid_positions(d, cutoff, n)
    return spec[..., pos] * ((2.0 * math.pi) ** (d / 2.0) / n**d)


def to_grid(f: SpectralField, n: int) -> np.ndarray:
    """Physical values, shape (d, n, ..., n)."""
    return spectrum_to_grid(f.coeffs.T, f.d, f.cutoff, n)


def from_grid(values: np.ndarray, cutoff: int) -> SpectralField:
    d = values.shape[0]
    return SpectralField(d, cutoff, grid_to_spectrum(values, d, cutoff).T)


# ---- serialization


def field_to_dict(f: SpectralField) -> dict:
    """JSON document {d, cutoff, modes: [{k, re, im}]}; canonical representatives, nonzero only."""
    entries = []
    if f.zero_mode is not None:
        entries.append(
            {"k": [0] * f.d, "re": f.zero_mode.real.tolist(), "im": f.zero_mode.imag.tolist()}
        )
    for k, c in zip(f.modes, f.coeffs):
        if np.any(c):
            entries.append({"k": k.tolist(), "re": c.real.tolist(), "im": c.imag.tolist()})
    return {"d": f.d, "cutoff": f.cutoff, "modes": entries}


def field_from_dict(doc: Mapping) -> SpectralField:
    d, cutoff = int(doc["d"]), int(doc["cutoff"])
    modes = {}
    for entry in doc.get("modes", []):
        k = tuple(int(c) for c in entry["k"])
        vec = np.asarray(entry["re"], dtype=float) + 1j * np.asarray(entry.get("im", [0.0] * d), dtype=float)
        if k in modes:
            raise ValueError(f"duplicate mode {k}")
        modes[k] = vec
    f = SpectralField.from_modes(d, cutoff, modes)
    rep = validate(f)
    return SpectralField(d, cutoff, f.coeffs, divergence_free=rep.divergence_free, zero_mode=f.zero_mode)


def pair_to_dict(pair: FieldPair) -> dict:
    return {"velocity": field_to_dict(pair.velocity), "magnetic": field_to_dict(pair.magnetic)}


def pair_from_dict(doc: Mapping) -> FieldPair:
    return FieldPair(field_from_dict(doc["velocity"]), field_from_dict(doc["magnetic"]))
