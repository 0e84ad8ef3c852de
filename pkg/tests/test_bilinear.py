import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mhd_certify.bilinear import (
    P,
    P_mhd,
    advect,
    check_against_table,
    check_basic,
    check_kato_pair,
    estimate_constants,
    hatted_transfer,
    mhd_self_interaction,
    self_interaction_kernel,
)
from mhd_certify.constants import default_table
from mhd_certify.spectral import FieldPair, SpectralField, random_field, sobolev_inner, sobolev_norm, validate
from oracles import advect_physical, field_pairs, fields


def oracle_grid(m):
    # products carry modes up to 2m; n > 4m avoids aliasing into outputs of cutoff 2m
    return 4 * m + 2


class TestAdvect:
    @pytest.mark.parametrize("d,m", [(2, 1), (2, 3), (3, 1), (3, 2)])
    def test_direct_matches_physical_oracle(self, d, m):
        v, w = random_field(10 + m, d, m), random_field(20 + m, d, m)
        ref = advect_physical(v, w, 2 * m, n=oracle_grid(m))
        got = advect(v, w, method="direct").coeffs
        assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))

    @given(field_pairs())
    def test_fft_matches_direct(self, pair):
        v, w = pair
        a = advect(v, w, method="fft").coeffs
        b = advect(v, w, method="direct").coeffs
        assert np.max(np.abs(a - b)) <= 1e-12 * max(np.max(np.abs(b)), 1e-300)

    def test_output_cutoff_truncates(self):
        v, w = random_field(1, 2, 2), random_field(2, 2, 2)
        full = advect(v, w)
        assert full.cutoff == 4
        assert np.allclose(advect(v, w, cutoff=2).coeffs, full.with_cutoff(2).coeffs, atol=1e-15)

    def test_unknown_method(self):
        v = random_field(1, 2, 1)
        with pytest.raises(ValueError):
            advect(v, v, method="spline")

    def test_constant_direction_gradient(self):
        # v = sqrt2 (2pi)^{-1} (0,1) sin(x), w = sqrt2 (2pi)^{-1} (1,0) sin(y): (v.grad)w = (2pi)^{-2} 2 sin x cos y (1,0)
        v = SpectralField.from_modes(2, 1, {(1, 0): [0, -1j / math.sqrt(2)]})
        w = SpectralField.from_modes(2, 1, {(0, 1): [-1j / math.sqrt(2), 0]})
        out = advect(v, w)
        ref = advect_physical(v, w, 2, n=10)
        assert np.allclose(out.coeffs, ref, atol=1e-15)


class TestP:
    @given(field_pairs(), st.floats(-3, 3), st.floats(-3, 3))
    def test_bilinear(self, pair, a, b):
        v, w = pair
        u = random_field(99, v.d, v.cutoff)
        lhs = P(a * v + b * u, w).coeffs
        rhs = (a * P(v, w) + b * P(u, w)).coeffs
        assert np.allclose(lhs, rhs, atol=1e-12 * (1 + np.max(np.abs(lhs))))

    @given(field_pairs())
    def test_divergence_free_output(self, pair):
        assert validate(P(*pair)).divergence_residual <= 1e-13

    @given(field_pairs())
    def test_energy_orthogonality(self, pair):
        v, w = pair
        inner = sobolev_inner(P(v, w, cutoff=w.cutoff), w, 0)
        scale = sobolev_norm(P(v, w), 0) * sobolev_norm(w, 0)
        assert abs(inner) <= 1e-13 * max(scale, 1e-300)

    @given(field_pairs())
    def test_mhd_slots(self, pair):
        V = pair
        W = FieldPair(random_field(3, V.d, V.cutoff), random_field(4, V.d, V.cutoff))
        out = P_mhd(V, W)
        (v, c), (w, g) = V, W
        assert np.allclose(out.velocity.coeffs, (P(v, w) - P(c, g)).coeffs, atol=1e-14)
        assert np.allclose(out.magnetic.coeffs, (P(v, g) - P(c, w)).coeffs, atol=1e-14)


class TestSelfInteraction:
    @given(field_pairs())
    def test_kernel_matches_general_map(self, pair):
        ref = P_mhd(pair, pair)
        out = mhd_self_interaction(pair)
        for a, b in ((out.velocity, ref.velocity), (out.magnetic, ref.magnetic)):
            assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-12 * max(np.max(np.abs(b.coeffs)), 1e-300)

    @pytest.mark.parametrize("d,m,out", [(2, 3, 3), (3, 2, 2), (3, 2, 4), (2, 2, 1)])
    def test_raw_kernel_cutoffs(self, d, m, out):
        pair = FieldPair(random_field(5, d, m), random_field(6, d, m))
        ref = P_mhd(pair, pair, cutoff=out)
        vel, mag = self_interaction_kernel(d, m, out)(pair.velocity.coeffs, pair.magnetic.coeffs)
        assert np.allclose(vel, ref.velocity.coeffs, atol=1e-13)
        assert np.allclose(mag, ref.magnetic.coeffs, atol=1e-13)

    @given(field_pairs())
    def test_pair_energy_orthogonality(self, pair):
        out = mhd_self_interaction(pair, cutoff=pair.cutoff)
        inner = sobolev_inner(out.velocity, pair.velocity, 0) + sobolev_inner(out.magnetic, pair.magnetic, 0)
        assert abs(inner) <= 1e-13 * max(pair.norm(0) * out.norm(0), 1e-300)


class TestInequalities:
    @settings(max_examples=25)
    @given(field_pairs(d=3, cutoff=2))
    def test_default_table_covers_samples(self, pair):
        table = default_table(3)
        assert check_basic(pair.velocity, pair.magnetic, 4.0, 3.0, table).holds
        W = FieldPair(pair.magnetic, pair.velocity)
        assert check_kato_pair(pair, W, 4.0, 3.0, table).holds

    @settings(max_examples=25)
    @given(field_pairs(d=2, cutoff=2), field_pairs(d=2, cutoff=2))
    def test_hatted_transfer(self, V, W):
        assert hatted_transfer(V, W, 3.5, 2.5).holds

    def test_estimates_monotone_in_samples(self):
        short = estimate_constants(4.0, 3.0, 3, 2, 10, seed=7)
        longer = estimate_constants(4.0, 3.0, 3, 2, 30, seed=7)
        assert longer.K_lower >= short.K_lower and longer.G_lower >= short.G_lower
        assert longer.samples == 30

    def test_G_only_above_threshold(self):
        est = estimate_constants(2.0, 2.0, 3, 2, 5, seed=1)
        assert est.G_lower is None and est.K_lower > 0

    def test_domain_checks(self):
        with pytest.raises(ValueError):
            estimate_constants(2.0, 1.5, 3, 2, 5, seed=1)
        with pytest.raises(ValueError):
            estimate_constants(2.0, 3.0, 3, 2, 5, seed=1)

    def test_warns_when_table_below_floor(self):
        est = estimate_constants(3.0, 3.0, 3, 2, 20, seed=3)
        tiny = default_table(3)
        from mhd_certify.constants import ConstantsTable

        low = ConstantsTable(3, {k: (1e-6, 1e-6) for k in tiny.entries}, "test")
        with pytest.warns(UserWarning):
            problems = check_against_table(est, low)
        assert problems
        assert check_against_table(est, tiny) == []
