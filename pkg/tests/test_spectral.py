import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mhd_certify.spectral import (
    FieldPair,
    SpectralField,
    apply_A,
    canonical_modes,
    field_from_dict,
    field_to_dict,
    frac_laplacian,
    from_grid,
    laplacian,
    leray_project,
    pair_from_dict,
    pair_inner,
    pair_norm,
    pair_to_dict,
    random_field,
    sobolev_inner,
    sobolev_norm,
    to_grid,
    validate,
)
from oracles import evaluate, field_pairs, fields, project_by_hand


def sine_field_3d():
    # sqrt2 (2pi)^{-3/2} W sin(k.x) with W = (3,4,0), k = (0,0,2)
    W = np.array([3.0, 4.0, 0.0])
    return SpectralField.from_modes(3, 2, {(0, 0, 2): -1j * W / math.sqrt(2)}, divergence_free=True)


class TestModes:
    def test_canonical_halfspace(self):
        modes = canonical_modes(3, 2)
        assert len(modes) == (5**3 - 1) // 2
        for k in modes:
            first = k[np.nonzero(k)[0][0]]
            assert first > 0

    def test_modes_read_only(self):
        with pytest.raises(ValueError):
            canonical_modes(2, 2)[0, 0] = 7

    def test_negative_key_is_conjugated(self):
        f = SpectralField.from_modes(2, 1, {(-1, 0): [0, 1 + 2j]})
        g = SpectralField.from_modes(2, 1, {(1, 0): [0, 1 - 2j]})
        assert np.array_equal(f.coeffs, g.coeffs)

    def test_inconsistent_partner_rejected(self):
        with pytest.raises(ValueError, match="Hermitian"):
            SpectralField.from_modes(2, 1, {(1, 0): [0, 1j], (-1, 0): [0, 1j]})

    def test_cutoff_exceeded(self):
        with pytest.raises(ValueError, match="cutoff"):
            SpectralField.from_modes(2, 1, {(2, 0): [0, 1]})


class TestNorms:
    def test_zero_field(self):
        for p in (-1.0, 0.0, 2.5):
            assert sobolev_norm(SpectralField.zeros(3, 2), p) == 0.0

    def test_sine_field_values(self):
        f = sine_field_3d()
        assert sobolev_norm(f, 1) == pytest.approx(10.0, rel=1e-15)
        assert sobolev_norm(f, 0) == pytest.approx(5.0, rel=1e-15)

    def test_l2_matches_physical_quadrature(self):
        f = random_field(3, 2, 2)
        vals = evaluate(f, 16)
        l2 = math.sqrt(np.sum(vals**2) * (2 * np.pi / 16) ** 2)
        assert sobolev_norm(f, 0) == pytest.approx(l2, rel=1e-12)

    def test_pair_norm_slots(self):
        w = random_field(1, 3, 2)
        z = SpectralField.zeros(3, 2)
        assert pair_norm(FieldPair(w, z), 1.5) == pytest.approx(sobolev_norm(w, 1.5), rel=1e-15)
        assert pair_norm(FieldPair(w, w), 1.5) == pytest.approx(math.sqrt(2) * sobolev_norm(w, 1.5), rel=1e-15)

    def test_pair_mismatch(self):
        with pytest.raises(ValueError):
            FieldPair(random_field(1, 3, 2), random_field(1, 3, 1))
        with pytest.raises(ValueError):
            FieldPair(random_field(1, 3, 2), random_field(1, 2, 2))

    @given(fields(), st.floats(-2, 4), st.floats(0, 3))
    def test_monotone_in_order(self, f, ell, gap):
        assert sobolev_norm(f, ell + gap) >= sobolev_norm(f, ell) * (1 - 1e-14)

    @given(fields())
    def test_inner_product_consistent(self, f):
        assert sobolev_inner(f, f, 1.0) == pytest.approx(sobolev_norm(f, 1.0) ** 2, rel=1e-13)

    @given(field_pairs())
    def test_pair_inner_matches_norm(self, pair):
        assert pair_inner(pair, pair, 0.5) == pytest.approx(pair_norm(pair, 0.5) ** 2, rel=1e-13)

    @given(st.integers(1, 3), st.floats(-2, 4))
    def test_single_shell_scaling(self, kappa, p):
        f = SpectralField.from_modes(2, 3, {(kappa, 0): [0, 1 + 1j], (0, kappa): [2, 0]})
        assert sobolev_norm(f, p) == pytest.approx(kappa**p * sobolev_norm(f, 0), rel=1e-13)


class TestLeray:
    def test_example_single_mode(self):
        f = SpectralField.from_modes(2, 1, {(1, 0): [1, 1]})
        out = leray_project(f)
        idx = [tuple(k) for k in out.modes].index((1, 0))
        assert np.allclose(out.coeffs[idx], [0, 1], atol=1e-15)
        # Gram-Schmidt cross-check
        assert np.allclose(out.coeffs[idx], project_by_hand((1, 0), np.array([1, 1], complex)), atol=1e-15)

    def test_gradient_annihilated(self):
        rng = np.random.default_rng(5)
        modes = canonical_modes(3, 2)
        a = rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))
        grad = SpectralField(3, 2, 1j * a[:, None] * modes)
        assert leray_project(grad).is_zero() or sobolev_norm(leray_project(grad), 0) < 1e-14

    def test_flags_divergence_free(self):
        f = SpectralField(2, 2, np.ones((len(canonical_modes(2, 2)), 2)))
        assert not validate(f).divergence_free
        assert validate(leray_project(f)).divergence_free

    @given(fields())
    def test_divergence_free_unchanged(self, f):
        assert np.allclose(leray_project(f).coeffs, f.coeffs, rtol=0, atol=1e-15)

    @given(st.integers(0, 10**6), st.sampled_from([2, 3]))
    def test_idempotent_and_self_adjoint(self, seed, d):
        rng = np.random.default_rng(seed)
        n = len(canonical_modes(d, 2))
        f = SpectralField(d, 2, rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d)))
        g = SpectralField(d, 2, rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d)))
        once = leray_project(f)
        assert np.allclose(leray_project(once).coeffs, once.coeffs, atol=1e-14)
        lhs = sobolev_inner(leray_project(f), g, 0)
        rhs = sobolev_inner(f, leray_project(g), 0)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    @given(st.integers(0, 10**6), st.sampled_from([2, 3]))
    def test_validate_after_projection(self, seed, d):
        rng = np.random.default_rng(seed)
        n = len(canonical_modes(d, 2))
        f = SpectralField(d, 2, rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d)))
        assert validate(leray_project(f)).divergence_residual <= 1e-13


class TestLaplacian:
    @given(fields(), st.floats(-2, 3), st.floats(-2, 3))
    def test_powers_compose(self, f, p, q):
        a = frac_laplacian(frac_laplacian(f, p), q).coeffs
        b = frac_laplacian(f, p + q).coeffs
        assert np.allclose(a, b, rtol=1e-13, atol=0)

    def test_identity_at_zero(self):
        f = random_field(4, 3, 2)
        assert np.array_equal(frac_laplacian(f, 0).coeffs, f.coeffs)

    @given(fields(), st.floats(-1, 3))
    def test_isometry(self, f, p):
        assert sobolev_norm(frac_laplacian(f, 2), p) == pytest.approx(sobolev_norm(f, p + 2), rel=1e-13)
        assert sobolev_norm(laplacian(f), p) == pytest.approx(sobolev_norm(f, p + 2), rel=1e-13)

    def test_apply_A_dissipation(self):
        pair = FieldPair(random_field(1, 3, 2), random_field(2, 3, 2))
        nu, eta, p = 0.3, 0.7, 1.0
        lhs = pair_inner(apply_A(pair, nu, eta), pair, p)
        expected = -nu * sobolev_norm(pair.velocity, p + 1) ** 2 - eta * sobolev_norm(pair.magnetic, p + 1) ** 2
        assert lhs == pytest.approx(expected, rel=1e-13)
        assert lhs <= -min(nu, eta) * pair_norm(pair, p + 1) ** 2 * (1 - 1e-13)

    def test_apply_A_equal_viscosities(self):
        pair = FieldPair(random_field(1, 2, 2), random_field(2, 2, 2))
        out = apply_A(pair, 0.2, 0.2)
        assert np.allclose(out.velocity.coeffs, (0.2 * laplacian(pair.velocity)).coeffs)
        assert np.allclose(out.magnetic.coeffs, (0.2 * laplacian(pair.magnetic)).coeffs)

    def test_apply_A_rejects_nonpositive(self):
        pair = FieldPair.zeros(2, 1)
        with pytest.raises(ValueError):
            apply_A(pair, 0.0, 1.0)
        with pytest.raises(ValueError):
            apply_A(pair, 1.0, -1.0)


class TestValidate:
    def test_divergence_violation_flagged(self):
        f = SpectralField.from_modes(2, 1, {(1, 0): [1, 0]})
        rep = validate(f)
        assert not rep.divergence_free and not rep.ok

    def test_zero_mode_flagged(self):
        f = SpectralField.from_modes(2, 1, {(0, 0): [1, 0], (1, 0): [0, 1]})
        rep = validate(f)
        assert rep.has_zero_mode and not rep.ok


class TestRandomField:
    def test_deterministic(self):
        assert np.array_equal(random_field(11, 3, 2).coeffs, random_field(11, 3, 2).coeffs)

    @given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3]), st.integers(1, 3))
    def test_valid(self, seed, d, m):
        rep = validate(random_field(seed, d, m))
        assert rep.ok and rep.divergence_residual <= 1e-13

    def test_large_decay_concentrates_on_unit_shell(self):
        f = random_field(2, 3, 2, spectrum_decay=math.inf)
        energy = np.sum(np.abs(f.coeffs) ** 2, axis=1)
        assert np.all(energy[f.ksq > 1] == 0) and energy.sum() > 0

    def test_amplitude(self):
        assert sobolev_norm(random_field(2, 2, 3, amplitude=0.25), 0) == pytest.approx(0.25, rel=1e-14)


class TestGridAndSerialization:
    @given(fields())
    def test_grid_roundtrip(self, f):
        g = from_grid(to_grid(f, 2 * f.cutoff + 1), f.cutoff)
        assert np.allclose(g.coeffs, f.coeffs, atol=1e-14)

    def test_grid_matches_direct_sum(self):
        f = random_field(8, 3, 2)
        assert np.allclose(to_grid(f, 6), evaluate(f, 6), atol=1e-13)

    @given(fields())
    def test_field_json_roundtrip(self, f):
        doc = json.loads(json.dumps(field_to_dict(f)))
        g = field_from_dict(doc)
        assert np.array_equal(g.coeffs, f.coeffs) and g.divergence_free

    def test_pair_json_roundtrip(self):
        pair = FieldPair(random_field(1, 2, 2), random_field(2, 2, 2))
        back = pair_from_dict(json.loads(json.dumps(pair_to_dict(pair))))
        assert np.array_equal(back.velocity.coeffs, pair.velocity.coeffs)
        assert np.array_equal(back.magnetic.coeffs, pair.magnetic.coeffs)

    def test_loader_flags_bad_divergence(self):
        doc = {"d": 2, "cutoff": 1, "modes": [{"k": [1, 0], "re": [1, 0], "im": [0, 0]}]}
        assert not field_from_dict(doc).divergence_free

    def test_with_cutoff_roundtrip(self):
        f = random_field(3, 3, 2)
        assert np.array_equal(f.with_cutoff(4).with_cutoff(2).coeffs, f.coeffs)
        assert sobolev_norm(f.with_cutoff(4), 1.3) == pytest.approx(sobolev_norm(f, 1.3), rel=1e-15)
