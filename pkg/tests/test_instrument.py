"""
Kraus instruments: Heisenberg action, composition, derived and repeated observables,
named constructions (Lüders, ladder, preparative, mixture, repeatable).
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from core.errors import (
    BadDimensionError,
    CapExceededError,
    DimMismatchError,
    NotEffectError,
    ObservableMismatchError,
    OutOfRangeError,
    PartialMapError,
    UnknownOutcomeError,
)
from core.settings import tolerances
from quantum.instrument import (
    Instrument,
    action_distance,
    apply,
    apply_schrodinger,
    compose,
    derived_observable,
    hermitian_basis,
    is_repeatable,
    ladder,
    ladder_sharp_observable,
    luders_binary,
    luders_closed_form,
    marginal_residual,
    mixture,
    normalization_residual,
    preparative,
    repeatable,
    repeated_observable,
    trivial,
    validate,
)
from quantum.linalg import is_psd, max_norm
from quantum.povm import povms_close, spectral_measure_of_effect, two_outcome
from tests.factories import random_density, random_effect, random_povm, random_psd, random_rank1_projection

seeds = st.integers(min_value=0, max_value=2**32 - 1)
A37 = np.diag([0.3, 0.7])


def _suite():
    """Every constructor, with fixed parameters."""
    rng = np.random.default_rng(99)
    P = spectral_measure_of_effect(A37)
    rep = repeatable(P)
    A3 = random_povm(rng, 2, 3)
    prep = preparative(A3, {lab: random_density(rng, 2) for lab in A3.labels})
    prep_sharp = preparative(P, {lab: random_density(rng, 2) for lab in P.labels})
    return {
        "trivial": trivial(2),
        "luders": luders_binary(A37),
        "luders_random": luders_binary(random_effect(rng, 3)),
        "ladder3": ladder(3),
        "ladder4": ladder(4),
        "repeatable": rep,
        "preparative": prep,
        "mixture": mixture(rep, prep_sharp, 0.5),
    }


SUITE = _suite()


class TestConstruction:

    def test_kraus_dims_checked(self):
        with pytest.raises(DimMismatchError):
            Instrument((0, 1), ((np.eye(2),), (np.eye(3),)))

    def test_empty_kraus_list(self):
        with pytest.raises(DimMismatchError):
            Instrument((0,), ((),))

    def test_unknown_outcome(self):
        with pytest.raises(UnknownOutcomeError):
            apply(ladder(2), 7, np.eye(2))

    def test_dim_mismatch_in_apply(self):
        with pytest.raises(DimMismatchError):
            apply(ladder(2), 0, np.eye(3))

    @pytest.mark.parametrize("name", sorted(SUITE))
    def test_normalization(self, name):
        assert normalization_residual(SUITE[name]) <= 1e-9
        assert validate(SUITE[name]).ok

    def test_unnormalized_reported(self):
        I = Instrument((0,), ((0.5 * np.eye(2),),))
        report = validate(I)
        assert [v.kind for v in report.violations] == ["normalization residual"]


class TestApply:

    def test_luders_outcome_one_on_identity(self):
        np.testing.assert_allclose(apply(luders_binary(A37), 1, np.eye(2)), A37, atol=1e-12)

    @pytest.mark.parametrize("name", sorted(SUITE))
    def test_zero_maps_to_zero(self, name):
        I = SUITE[name]
        for lab in I.labels:
            assert max_norm(apply(I, lab, np.zeros((I.dim, I.dim)))) == 0.0

    def test_ladder_outcome_zero(self):
        np.testing.assert_allclose(apply(ladder(3), 0, np.eye(3)), np.diag([0.0, 0.0, 1.0]))

    @pytest.mark.parametrize("name", sorted(SUITE))
    def test_positivity_preserved(self, name):
        I = SUITE[name]
        T = random_psd(np.random.default_rng(3), I.dim)
        for lab in I.labels:
            assert is_psd(apply(I, lab, T), 1e-9)

    def test_schrodinger_trace_is_probability(self):
        I = luders_binary(A37)
        rho = np.diag([0.0, 1.0])
        assert np.trace(apply_schrodinger(I, 1, rho)).real == pytest.approx(0.7)


class TestDerivedObservable:

    def test_luders(self):
        A = derived_observable(luders_binary(A37))
        np.testing.assert_allclose(A.effect(0), np.diag([0.7, 0.3]), atol=1e-12)
        np.testing.assert_allclose(A.effect(1), A37, atol=1e-12)

    def test_ladder(self):
        A = derived_observable(ladder(3))
        np.testing.assert_allclose(A.effect(0), np.diag([0.0, 0.0, 1.0]))
        np.testing.assert_allclose(A.effect(1), np.diag([1.0, 1.0, 0.0]))

    def test_preparative_measures_its_observable(self):
        rng = np.random.default_rng(1)
        A = random_povm(rng, 2, 3)
        I = preparative(A, {lab: random_density(rng, 2) for lab in A.labels})
        assert povms_close(derived_observable(I), A, 1e-9)


class TestCompose:

    def test_trivial_is_unit(self):
        I = luders_binary(A37)
        C = compose(I, trivial(2))
        assert C.labels == ((0, 0), (1, 0))
        pairs = [(lab, (lab, 0)) for lab in I.labels]
        assert action_distance(I, C, pairs) <= 1e-12

    def test_ladder_zero_product(self):
        C = compose(ladder(3), ladder(3))
        assert max_norm(C.kraus_of((0, 1))[0]) == 0.0

    def test_luders_square(self):
        C = compose(luders_binary(A37), luders_binary(A37))
        np.testing.assert_allclose(derived_observable(C).effect((1, 1)), A37 @ A37, atol=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            compose(ladder(2), ladder(3))

    def test_associative(self):
        I, J, K = SUITE["luders"], SUITE["preparative"], SUITE["repeatable"]
        left = compose(compose(I, J), K)
        right = compose(I, compose(J, K))
        pairs = [(((a, b), c), (a, (b, c))) for a in I.labels for b in J.labels for c in K.labels]
        assert action_distance(left, right, pairs) <= 1e-9

    def test_matches_repeated_observable(self):
        I = SUITE["luders_random"]
        via_compose = derived_observable(compose(I, I))
        A2 = repeated_observable(I, 2)
        for (a, b), E in via_compose:
            assert max_norm(E - A2.effect((a, b))) <= 1e-12


class TestRepeatedObservable:

    def test_n1_is_derived(self):
        I = SUITE["preparative"]
        A1 = repeated_observable(I, 1)
        assert all(max_norm(E - F) <= 1e-15 for E, F in zip(A1.effects, derived_observable(I).effects))
        assert A1.labels == tuple((lab,) for lab in I.labels)

    def test_ladder_a2(self):
        A2 = repeated_observable(ladder(3), 2)
        np.testing.assert_allclose(A2.effect((1, 1)), np.diag([1.0, 0.0, 0.0]))
        np.testing.assert_allclose(A2.effect((1, 0)), np.diag([0.0, 1.0, 0.0]))
        np.testing.assert_allclose(A2.effect((0, 0)), np.diag([0.0, 0.0, 1.0]))
        np.testing.assert_allclose(A2.effect((0, 1)), np.zeros((3, 3)))

    def test_luders_a2_corner(self):
        A2 = repeated_observable(luders_binary(A37), 2)
        np.testing.assert_allclose(A2.effect((1, 1)), np.diag([0.09, 0.49]), atol=1e-12)

    def test_cap(self):
        tols = tolerances.with_overrides({"enumeration_cap": 16})
        with pytest.raises(CapExceededError) as exc:
            repeated_observable(ladder(2), 5, tols)
        assert exc.value.required == 32

    def test_n_zero(self):
        with pytest.raises(OutOfRangeError):
            repeated_observable(ladder(2), 0)

    @pytest.mark.parametrize("name", sorted(SUITE))
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_marginal_consistency(self, name, n):
        assert marginal_residual(SUITE[name], n) <= 1e-9

    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_luders_closed_form_agrees(self, n):
        A = random_effect(np.random.default_rng(n), 2)
        assert povms_close(repeated_observable(luders_binary(A), n), luders_closed_form(A, n), 1e-10)


class TestLuders:

    def test_projection_is_repeatable(self):
        assert is_repeatable(luders_binary(np.diag([1.0, 0.0])))

    def test_half_identity(self):
        I = luders_binary(0.5 * np.eye(2))
        for lab in (0, 1):
            np.testing.assert_allclose(I.kraus_of(lab)[0], math.sqrt(0.5) * np.eye(2), atol=1e-12)

    def test_diagonal_root(self):
        np.testing.assert_allclose(
            luders_binary(A37).kraus_of(1)[0], np.diag([math.sqrt(0.3), math.sqrt(0.7)]), atol=1e-12
        )

    def test_unsharp_not_repeatable(self):
        assert not is_repeatable(luders_binary(A37))

    def test_not_effect(self):
        with pytest.raises(NotEffectError):
            luders_binary(np.diag([0.5, 1.2]))


class TestLadder:

    def test_d2(self):
        np.testing.assert_allclose(ladder(2).kraus_of(1)[0], [[0, 0], [1, 0]])

    def test_shift_square(self):
        L1 = ladder(3).kraus_of(1)[0]
        expected = np.zeros((3, 3))
        expected[2, 0] = 1.0
        np.testing.assert_allclose(L1 @ L1, expected)

    @pytest.mark.parametrize("d", [2, 3, 5, 8])
    def test_normalized(self, d):
        assert normalization_residual(ladder(d)) == 0.0

    @pytest.mark.parametrize("d", [1, 0, 2.5, True])
    def test_bad_dimension(self, d):
        with pytest.raises(BadDimensionError):
            ladder(d)

    def test_not_repeatable(self):
        assert not is_repeatable(ladder(3))

    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_sharp_observable_is_sharp(self, d):
        for n in range(1, d + 1):
            P = ladder_sharp_observable(d, n)
            assert max(max_norm(E @ E - E) for E in P.effects) == 0.0
            assert max_norm(sum(P.effects) - np.eye(d)) == 0.0


class TestPreparative:

    def test_action_on_basis(self, rng):
        A = random_povm(rng, 2, 3)
        states = {lab: random_density(rng, 2) for lab in A.labels}
        I = preparative(A, states)
        for T in hermitian_basis(2):
            for lab, E in A:
                expected = np.trace(states[lab].matrix @ T) * E
                assert max_norm(apply(I, lab, T) - expected) <= 1e-10

    def test_a2_formula(self, rng):
        A = random_povm(rng, 2, 2)
        states = {lab: random_density(rng, 2) for lab in A.labels}
        A2 = repeated_observable(preparative(A, states), 2)
        for (w1, w2), E in A2:
            expected = np.trace(states[w1].matrix @ A.effect(w2)) * A.effect(w1)
            assert max_norm(E - expected) <= 1e-10

    def test_missing_state(self, rng):
        A = random_povm(rng, 2, 2)
        with pytest.raises(PartialMapError):
            preparative(A, {0: random_density(rng, 2)})


class TestMixture:

    def test_t_one_is_first(self):
        I, J = SUITE["repeatable"], SUITE["mixture"]
        M = mixture(I, J, 1.0)
        assert action_distance(M, I) <= 1e-12

    def test_keeps_observable(self):
        I = SUITE["mixture"]
        assert povms_close(derived_observable(I), spectral_measure_of_effect(A37), 1e-9)

    def test_observable_mismatch(self):
        with pytest.raises(ObservableMismatchError):
            mixture(luders_binary(A37), luders_binary(np.diag([0.4, 0.6])), 0.5)

    def test_weight_range(self):
        with pytest.raises(OutOfRangeError):
            mixture(SUITE["luders"], SUITE["luders"], 1.5)


class TestRepeatable:

    @given(seeds)
    def test_luders_of_rank1_projection(self, seed):
        P = random_rank1_projection(np.random.default_rng(seed), 3)
        assert is_repeatable(luders_binary(P))

    def test_von_neumann(self):
        I = repeatable(spectral_measure_of_effect(A37))
        assert is_repeatable(I)

    def test_rejects_unsharp(self):
        with pytest.raises(NotEffectError):
            repeatable(two_outcome(A37))

    def test_suite_repeatability(self):
        assert is_repeatable(SUITE["repeatable"])
        assert is_repeatable(SUITE["trivial"])
