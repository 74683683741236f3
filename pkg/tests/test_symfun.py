"""Unit tests for the symmetric-function machinery.

The brute-force oracle enumerates degree-k monomials directly, so the
production recurrence is checked against an independent path.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import deepssm as d
from conftest import rel_err, separated_complex


def hom_oracle(values, k):
    """Sum of all degree-k monomials, by explicit enumeration."""
    values = list(values)
    total = 0.0 + 0.0j
    for combo in itertools.combinations_with_replacement(range(len(values)), k):
        term = 1.0 + 0.0j
        for idx in combo:
            term *= values[idx]
        total += term
    return total


class TestHomogeneousSum:
    def test_frozen_integer_values(self):
        assert d.homogeneous_sum([2, 3, 5], 3) == 410
        assert d.homogeneous_sum([1, 2, 4], 2) == 35

    def test_degree_zero_is_one(self):
        assert d.homogeneous_sum([0.3 + 1j, -2.0], 0) == 1.0

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            n = int(rng.integers(1, 6))
            k = int(rng.integers(0, 7))
            vals = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            got = d.homogeneous_sum(vals, k)
            want = hom_oracle(vals, k)
            assert rel_err(got, want) < 1e-12

    def test_exact_for_repeated_and_zero_arguments(self):
        vals = [0.5, 0.5, 0.0, -0.25]
        assert d.homogeneous_sum(vals, 4) == hom_oracle(vals, 4)

    def test_rejects_negative_degree(self):
        with pytest.raises(d.DomainError):
            d.homogeneous_sum([1.0], -1)

    def test_rejects_non_finite(self):
        with pytest.raises(d.DomainError):
            d.homogeneous_sum([np.inf], 2)

    def test_rejects_empty(self):
        with pytest.raises(d.ShapeMismatch):
            d.homogeneous_sum([], 2)


class TestHomogeneousSequence:
    def test_agrees_with_scalar_per_degree(self):
        rng = np.random.default_rng(3)
        vals = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        seq = d.homogeneous_sequence(vals, 9)
        for k in range(9):
            assert rel_err(seq[k], d.homogeneous_sum(vals, k)) < 1e-12

    def test_extend_matches_adding_a_variable(self):
        rng = np.random.default_rng(4)
        vals = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        extra = 0.4 - 0.2j
        base = d.homogeneous_sequence(vals, 12)
        grown = d.extend_homogeneous(base, extra)
        want = d.homogeneous_sequence(np.append(vals, extra), 12)
        np.testing.assert_allclose(grown, want, rtol=1e-12, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(
    values=st.lists(
        st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False),
        min_size=1,
        max_size=6,
    ),
    k=st.integers(min_value=0, max_value=8),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_permutation_invariance(values, k, seed):
    perm = list(values)
    np.random.default_rng(seed).shuffle(perm)
    got = d.homogeneous_sum(perm, k)
    want = d.homogeneous_sum(values, k)
    # Only the accumulation order changes, so the error is bounded by the
    # sum of monomial magnitudes.
    slack = abs(d.homogeneous_sum(np.abs(values), k)) + 1.0
    assert abs(got - want) <= 1e-12 * slack


@settings(max_examples=60, deadline=None)
@given(
    values=st.lists(
        st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False),
        min_size=1,
        max_size=6,
    ),
    k=st.integers(min_value=0, max_value=8),
)
def test_zero_argument_absorption_is_exact(values, k):
    assert d.homogeneous_sum(list(values) + [0.0], k) == d.homogeneous_sum(values, k)


class TestRationalForm:
    def test_agrees_with_recurrence_on_distinct_inputs(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(2, 7))
            k = int(rng.integers(0, 21))
            vals = separated_complex(rng, n)
            got = d.f_rational(vals, k)
            want = d.homogeneous_sum(vals, k)
            assert rel_err(got, want) < 1e-9

    def test_single_argument_is_power(self):
        assert rel_err(d.f_rational([0.5 + 0.5j], 6), (0.5 + 0.5j) ** 6) < 1e-12

    def test_degenerate_arguments_rejected(self):
        with pytest.raises(d.DegenerateEigenvalues):
            d.f_rational([0.5, 0.5 + 1e-14], 3)

    def test_low_power_sums_vanish(self):
        # sum_i a_i**k / prod_{j != i} (a_i - a_j) == 0 for k <= n - 2.
        rng = np.random.default_rng(11)
        for n in range(2, 9):
            vals = separated_complex(rng, n)
            for k in range(0, n - 1):
                terms = [
                    vals[i] ** k / np.prod(vals[i] - np.delete(vals, i))
                    for i in range(n)
                ]
                scale = max(abs(t) for t in terms)
                assert abs(sum(terms)) <= 1e-9 * scale

    def test_two_point_recursion(self):
        # F_t(g_1..g_n) - g_{n-1}/(g_{n-1}-g_n) F_t(g_1..g_{n-1})
        #   == g_n/(g_n-g_{n-1}) F_t(g_1..g_{n-2}, g_n)
        rng = np.random.default_rng(13)
        for n in range(2, 7):
            g = separated_complex(rng, n)
            for t in range(0, 13):
                left = d.homogeneous_sum(g, t) - g[n - 2] / (g[n - 2] - g[n - 1]) * d.homogeneous_sum(g[: n - 1], t)
                right = g[n - 1] / (g[n - 1] - g[n - 2]) * d.homogeneous_sum(
                    np.append(g[: n - 2], g[n - 1]), t
                )
                scale = max(abs(left), abs(right), 1.0)
                assert abs(left - right) <= 1e-9 * scale


class TestTelescope:
    def _random_sorted_modes(self, rng, n):
        vals = separated_complex(rng, n)
        return vals[np.argsort(np.abs(vals))]

    def test_flattens_prefix_sums_to_exponentials(self):
        rng = np.random.default_rng(17)
        for n in range(1, 8):
            betas = self._random_sorted_modes(rng, n)
            zs = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            coeffs = d.telescope_coefficients(betas, zs)
            for t in range(0, 40, 3):
                left = sum(
                    coeffs[k] * d.homogeneous_sum(betas[: k + 1], t) for k in range(n)
                )
                right = np.sum(zs * betas**t)
                assert rel_err(left, right) < 1e-9

    def test_weight_bound(self):
        rng = np.random.default_rng(19)
        for n in range(1, 9):
            betas = self._random_sorted_modes(rng, n)
            zs = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            coeffs = d.telescope_coefficients(betas, zs)
            cap = 2.0**n * np.max(np.abs(zs))
            assert np.max(np.abs(coeffs)) <= cap * (1 + 1e-12)

    def test_unsorted_rejected(self):
        with pytest.raises(d.UnsortedInput):
            d.telescope_coefficients([0.9, 0.3], [1.0, 1.0])

    def test_zero_mode_rejected(self):
        with pytest.raises(d.ZeroEigenvalue):
            d.telescope_coefficients([0.0, 0.5], [1.0, 1.0])

    def test_coincident_modes_rejected(self):
        with pytest.raises(d.DegenerateEigenvalues):
            d.telescope_coefficients([0.5, 0.5 * (1 + 1e-14)], [1.0, 1.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(d.ShapeMismatch):
            d.telescope_coefficients([0.5, 0.6], [1.0])


class TestCoincidentPairs:
    def test_reports_relative_clashes(self):
        assert d.coincident_pairs([1.0, 1.0 + 1e-12]) == [(0, 1)]
        assert d.coincident_pairs([1.0, 1.1]) == []

    def test_absolute_scale_near_zero(self):
        # Values near zero are compared on an absolute scale.
        assert d.coincident_pairs([0.0, 5e-11]) == [(0, 1)]
        assert d.coincident_pairs([0.0, 1e-9]) == []
