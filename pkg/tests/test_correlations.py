import numpy as np
import pytest

from pptlab import (
    MultiTimeObservable,
    OqeModel,
    ValidationError,
    build_ppt,
    dense_expectation,
    expectation,
    pair_operator,
    random_entangled_model,
    random_separable_model,
)
from pptlab.models import random_hermitian

from conftest import random_observable


class TestExpectation:
    def test_identity_insertions_give_norm(self, rng):
        mps = build_ppt(random_separable_model(2, 2, rng), 4)
        obs = MultiTimeObservable.create([(2, np.eye(4)), (4, np.eye(4))])
        assert abs(expectation(mps, obs) - 1.0) < 1e-12

    def test_projector_completeness(self, rng):
        mps = build_ppt(random_separable_model(2, 2, rng), 4)
        u = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
        total = 0.0
        for k in range(4):
            proj = np.outer(u[:, k], u[:, k].conj())
            total += expectation(mps, MultiTimeObservable.create([(3, proj)]))
        assert abs(total - 1.0) < 1e-10

    def test_matches_dense_oracle(self, rng):
        model = random_separable_model(2, 2, rng)
        mps = build_ppt(model, 5)
        obs = MultiTimeObservable.create(
            [(2, random_hermitian(4, rng)), (4, random_hermitian(4, rng))]
        )
        assert abs(expectation(mps, obs) - dense_expectation(model, 5, obs)) < 1e-10

    def test_step_out_of_range(self, rng):
        mps = build_ppt(random_separable_model(2, 2, rng), 3)
        with pytest.raises(ValidationError):
            expectation(mps, MultiTimeObservable.create([(4, np.eye(4))]))

    def test_linearity_in_insertion(self, rng):
        mps = build_ppt(random_separable_model(2, 2, rng), 4)
        a = random_hermitian(4, rng)
        b = random_hermitian(4, rng)
        alpha = 0.6 - 0.2j
        combo = MultiTimeObservable.create([(2, alpha * a + b)])
        parts = alpha * expectation(
            mps, MultiTimeObservable.create([(2, a)])
        ) + expectation(mps, MultiTimeObservable.create([(2, b)]))
        assert abs(expectation(mps, combo) - parts) < 1e-12

    def test_identity_insertion_removable(self, rng):
        mps = build_ppt(random_separable_model(2, 2, rng), 5)
        m = random_hermitian(4, rng)
        with_id = MultiTimeObservable.create([(2, m), (4, np.eye(4))])
        without = MultiTimeObservable.create([(2, m)])
        assert abs(expectation(mps, with_id) - expectation(mps, without)) < 1e-12

    def test_causality(self, rng):
        """Operators at steps <= m are blind to later unitaries."""
        base = random_separable_model(2, 2, rng, steps=5)
        altered_us = list(base.unitaries[:3]) + [
            np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
            for _ in range(2)
        ]
        altered = OqeModel.create(2, 2, altered_us, base.initial_state)
        obs = MultiTimeObservable.create(
            [(1, random_hermitian(4, rng)), (3, random_hermitian(4, rng))]
        )
        v1 = expectation(build_ppt(base, 5), obs)
        v2 = expectation(build_ppt(altered, 5), obs)
        assert abs(v1 - v2) < 1e-12


class TestDenseExpectation:
    def test_identity(self, rng):
        model = random_separable_model(2, 2, rng)
        obs = MultiTimeObservable.create([(1, np.eye(4))])
        assert abs(dense_expectation(model, 3, obs) - 1.0) < 1e-12

    def test_single_step_trivial_unitary(self, rng):
        """With U = I and no environment, the PPT is the maximally entangled pair."""
        psi = np.zeros(2)
        psi[0] = 1.0
        model = OqeModel.create(2, 1, [np.eye(2)], psi)
        m = random_hermitian(4, rng)
        pair = np.eye(2).reshape(-1) / np.sqrt(2)
        ref = pair.conj() @ m @ pair
        got = dense_expectation(model, 1, MultiTimeObservable.create([(1, m)]))
        assert abs(got - ref) < 1e-12

    def test_matches_mps_on_random_cases(self, rng):
        for D in (1, 2, 4):
            for _ in range(8):
                entangled = D > 1 and rng.random() < 0.4
                model = (
                    random_entangled_model(2, D, rng)
                    if entangled
                    else random_separable_model(2, D, rng)
                )
                n_steps = int(rng.integers(2, 6))
                mps = build_ppt(model, n_steps)
                obs = random_observable(rng, 2, n_steps, min(2, n_steps))
                a = expectation(mps, obs)
                b = dense_expectation(model, n_steps, obs)
                assert abs(a - b) < 1e-10

    def test_matches_mps_for_qutrit_system(self, rng):
        model = random_separable_model(3, 2, rng)
        mps = build_ppt(model, 3)
        obs = random_observable(rng, 3, 3, 2)
        assert abs(expectation(mps, obs) - dense_expectation(model, 3, obs)) < 1e-10


class TestObservableType:
    def test_steps_strictly_increasing(self):
        with pytest.raises(ValidationError):
            MultiTimeObservable.create([(2, np.eye(4)), (2, np.eye(4))])

    def test_pair_operator(self, rng):
        a = random_hermitian(2, rng)
        b = random_hermitian(2, rng)
        assert np.array_equal(pair_operator(a, b), np.kron(a, b))

    def test_json_roundtrip(self, rng):
        obs = MultiTimeObservable.create(
            [(1, random_hermitian(4, rng)), (3, random_hermitian(4, rng))]
        )
        back = MultiTimeObservable.from_json(obs.to_json())
        assert [s for s, _ in back.insertions] == [1, 3]
        for (_, a), (_, b) in zip(obs.insertions, back.insertions):
            assert np.max(np.abs(a - b)) < 1e-15
