import numpy as np
import pytest

from pptlab import (
    BoundViolationError,
    MeasurementOracle,
    UnsupportedPredictionError,
    ValidationError,
    build_ppt,
    disentangle_reconstruct,
    expectation,
    gauge_fidelity,
    predict_future,
    random_entangled_model,
    random_separable_model,
    reconstruct_entangled_initial,
    reduced_density,
    to_right_canonical,
    variational_fit,
)
from pptlab.ppt import perturbed
from pptlab.tomography import window_size

from conftest import random_observable


class TestReducedDensity:
    def test_product_model_full_range_is_pure(self, rng):
        model = random_separable_model(2, 1, rng)
        oracle = MeasurementOracle(model, 3)
        rho = reduced_density(oracle, (1, 3))
        purity = np.trace(rho @ rho).real
        assert abs(purity - 1.0) < 1e-12

    def test_trace_one_and_psd(self, rng):
        model = random_separable_model(2, 2, rng)
        oracle = MeasurementOracle(model, 4)
        rho = reduced_density(oracle, (2, 3))
        assert abs(np.trace(rho).real - 1.0) < 1e-12
        assert np.linalg.eigvalsh(rho).min() > -1e-12

    def test_matches_direct_dense_partial_trace(self, rng):
        model = random_separable_model(2, 2, rng)
        oracle = MeasurementOracle(model, 4)
        rho = reduced_density(oracle, (2, 3))
        vec = build_ppt(model, 4).to_statevector().reshape(4, 4, 4, 4, 2)
        x = np.moveaxis(vec, [1, 2], [0, 1]).reshape(16, -1)
        ref = x @ x.conj().T
        assert np.max(np.abs(rho - ref)) < 1e-12

    def test_query_log_counts(self, rng):
        oracle = MeasurementOracle(random_separable_model(2, 2, rng), 4)
        reduced_density(oracle, (1, 2))
        reduced_density(oracle, (3, 4))
        assert oracle.query_log == 2

    def test_sealed_oracle_hides_truth(self, rng):
        oracle = MeasurementOracle(random_separable_model(2, 2, rng), 3, unsealed=False)
        with pytest.raises(ValidationError):
            oracle.true_mps()


class TestDisentangle:
    def test_window_arithmetic_matches_worked_instance(self):
        # environment bound d**4 at d=2 gives a 3-site window and a 2-site tail
        assert window_size(2, 16) == 3
        N, R = 5, window_size(2, 16)
        assert N - R + 1 == 3

    def test_exact_roundtrip_d2_D2(self, rng):
        model = random_separable_model(2, 2, rng)
        oracle = MeasurementOracle(model, 5)
        report = disentangle_reconstruct(oracle, 5, 2)
        assert report.state_fidelity > 1 - 1e-8
        assert report.queries == 5  # f = 4 windows + 1 trailing block

    def test_loose_bound_still_works(self, rng):
        model = random_separable_model(2, 2, rng)
        oracle = MeasurementOracle(model, 5)
        report = disentangle_reconstruct(oracle, 5, 16)
        assert report.state_fidelity > 1 - 1e-8
        assert report.queries == 3 + 1

    def test_product_case_single_site_windows(self, rng):
        model = random_separable_model(2, 1, rng)
        oracle = MeasurementOracle(model, 4)
        report = disentangle_reconstruct(oracle, 4, 1)
        assert report.state_fidelity > 1 - 1e-10
        assert report.queries == 4 + 1

    def test_bound_violation(self, rng):
        # true environment (8) exceeds the 2-site window capacity (4)
        model = random_separable_model(2, 8, rng)
        oracle = MeasurementOracle(model, 5)
        with pytest.raises(BoundViolationError):
            disentangle_reconstruct(oracle, 5, 2)

    def test_recovered_model_reproduces_expectations(self, rng):
        model = random_separable_model(2, 4, rng)
        oracle = MeasurementOracle(model, 5)
        report = disentangle_reconstruct(oracle, 5, 4)
        rebuilt = build_ppt(report.recovered_model, 5)
        truth = oracle.true_mps()
        for _ in range(10):
            obs = random_observable(rng, 2, 5)
            assert abs(expectation(truth, obs) - expectation(rebuilt, obs)) < 1e-8

    def test_entangled_initial_convention(self, rng):
        model = random_entangled_model(2, 2, rng)
        oracle = MeasurementOracle(model, 5)
        report = disentangle_reconstruct(oracle, 5, 2, entangled_initial=True)
        assert report.state_fidelity > 1 - 1e-8

    def test_fidelity_over_dimension_grid(self):
        """Exact-oracle reconstruction succeeds whenever the bound holds."""
        for D in (1, 2, 4):
            for N in (4, 5, 6):
                for seed in range(10):
                    model = random_separable_model(2, D, 10_000 * D + 100 * N + seed)
                    oracle = MeasurementOracle(model, N)
                    report = disentangle_reconstruct(oracle, N, D)
                    assert report.state_fidelity > 1 - 1e-8, (D, N, seed)


class TestSampledMode:
    def test_estimates_are_normalized(self, rng):
        model = random_separable_model(2, 2, rng)
        oracle = MeasurementOracle(model, 3, mode="sampled", shots=2000, seed=5)
        rho = reduced_density(oracle, (1, 1))
        assert abs(np.trace(rho).real - 1.0) < 1e-10
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-12

    def test_fidelity_deficit_shrinks_with_shots(self):
        deficits = {shots: [] for shots in (10**3, 10**4, 10**5)}
        for seed in range(3):
            model = random_separable_model(2, 2, seed)
            for shots in deficits:
                oracle = MeasurementOracle(
                    model, 4, mode="sampled", shots=shots, seed=100 + seed
                )
                report = disentangle_reconstruct(oracle, 4, 2)
                deficits[shots].append(1.0 - report.state_fidelity)
        medians = [np.median(deficits[s]) for s in (10**3, 10**4, 10**5)]
        assert medians[0] > medians[1] > medians[2]

    def test_requires_shot_count(self, rng):
        with pytest.raises(ValidationError):
            MeasurementOracle(random_separable_model(2, 2, rng), 3, mode="sampled")


class TestVariationalFit:
    def test_truth_warm_start_is_global_minimum(self, rng):
        model = random_separable_model(2, 2, rng)
        target = build_ppt(model, 4)
        # exact warm start: the hidden unitary in the gauge where psi_E = |0>
        from pptlab.tensor_ops import complete_columns

        psi_env = model.initial_schmidt().env_basis[:, 0]
        w = complete_columns(psi_env.reshape(-1, 1))
        lifted = np.kron(np.eye(2), w)
        u0 = lifted.conj().T @ model.unitaries[0] @ lifted
        report = variational_fit(
            target, 4, 2, time_independent=True, warm_start=([u0], w)
        )
        assert report.loss_trace[0] < 1e-12

    def test_time_independent_fit_predicts_next_step(self, rng):
        model = random_separable_model(2, 2, rng)
        target = build_ppt(model, 6)
        report = variational_fit(target, 6, 2, time_independent=True, seed=1)
        assert report.loss_trace[-1] < 1e-8
        predicted = predict_future(report, 7)
        truth = build_ppt(model, 7)
        for _ in range(5):
            obs = random_observable(rng, 2, 7)
            assert abs(expectation(truth, obs) - expectation(predicted, obs)) < 1e-6

    def test_time_dependent_fit(self, rng):
        model = random_separable_model(2, 2, rng, steps=4)
        target = build_ppt(model, 4)
        report = variational_fit(target, 4, 2, time_independent=False, seed=2)
        assert report.loss_trace[-1] < 1e-10
        assert gauge_fidelity(report.recovered_mps, target) > 1 - 1e-8

    def test_noisy_target_reports_floor(self, rng):
        model = random_separable_model(2, 2, rng)
        target = to_right_canonical(perturbed(build_ppt(model, 4), 1e-4, rng))
        report = variational_fit(target, 4, 2, time_independent=True, seed=3, n_restarts=1)
        assert not report.converged
        assert "stalled" in report.gauge_note
        assert 1e-10 < report.loss_trace[-1] < 1e-4

    def test_refit_of_tomographed_state_predicts_future(self, rng):
        """Headline pipeline: measure, reconstruct, refit time-independently,
        predict — across the bond gauges the reconstruction introduces."""
        for seed in (0, 1):
            model = random_separable_model(2, 2, seed)
            oracle = MeasurementOracle(model, 5)
            rep = disentangle_reconstruct(oracle, 5, 2)
            fit = variational_fit(rep.recovered_mps, 5, 2, time_independent=True, seed=seed)
            assert fit.loss_trace[-1] < 1e-10, seed
            predicted = predict_future(fit, 7)
            truth = build_ppt(model, 7)
            for _ in range(5):
                obs = random_observable(rng, 2, 7)
                assert abs(expectation(truth, obs) - expectation(predicted, obs)) < 1e-6


class TestPredictFuture:
    def test_same_length_is_identity(self, rng):
        model = random_separable_model(2, 2, rng)
        target = build_ppt(model, 5)
        report = variational_fit(target, 5, 2, time_independent=True, seed=0)
        assert gauge_fidelity(predict_future(report, 5), target) > 1 - 1e-8

    def test_product_model_exact(self, rng):
        model = random_separable_model(2, 1, rng)
        target = build_ppt(model, 5)
        report = variational_fit(target, 5, 1, time_independent=True, seed=0)
        predicted = predict_future(report, 8)
        truth = build_ppt(model, 8)
        for _ in range(5):
            obs = random_observable(rng, 2, 8)
            assert abs(expectation(truth, obs) - expectation(predicted, obs)) < 1e-12

    def test_rejects_time_dependent(self, rng):
        model = random_separable_model(2, 2, rng, steps=3)
        oracle = MeasurementOracle(model, 3)
        report = disentangle_reconstruct(oracle, 3, 2)
        with pytest.raises(UnsupportedPredictionError):
            predict_future(report, 5)


class TestEntangledRecovery:
    def test_maximally_entangled(self, rng):
        model = random_entangled_model(2, 2, rng)
        oracle = MeasurementOracle(model, 5)
        form, recovered = reconstruct_entangled_initial(oracle)
        assert np.allclose(form.lambdas, [1 / np.sqrt(2)] * 2, atol=1e-8)
        truth = build_ppt(model, 5)
        rebuilt = build_ppt(recovered, 5)
        for _ in range(50):
            obs = random_observable(rng, 2, 5)
            assert abs(expectation(truth, obs) - expectation(rebuilt, obs)) < 1e-6

    def test_skewed_lambdas(self, rng):
        model = random_entangled_model(2, 2, rng, lambdas=np.sqrt([0.9, 0.1]))
        oracle = MeasurementOracle(model, 5)
        form, recovered = reconstruct_entangled_initial(oracle)
        assert abs(form.lambdas[0] - 0.9486832980505138) < 1e-6
        assert abs(form.lambdas[1] - 0.31622776601683794) < 1e-6

    def test_separable_reduces_to_plain_reconstruction(self, rng):
        model = random_separable_model(2, 2, rng)
        oracle = MeasurementOracle(model, 5)
        form, recovered = reconstruct_entangled_initial(oracle)
        assert form.lambdas.size == 1
        truth = build_ppt(model, 5)
        rebuilt = build_ppt(recovered, 5)
        for _ in range(10):
            obs = random_observable(rng, 2, 5)
            assert abs(expectation(truth, obs) - expectation(rebuilt, obs)) < 1e-8


class TestReportSerialization:
    def test_json_roundtrip_fields(self, rng):
        model = random_separable_model(2, 2, rng)
        oracle = MeasurementOracle(model, 4)
        report = disentangle_reconstruct(oracle, 4, 2)
        import json

        doc = json.loads(report.to_json())
        assert doc["state_fidelity"] > 1 - 1e-8
        assert len(doc["per_site_unitarity_residual"]) == 4
        from pptlab import OqeModel, PptMps

        PptMps.from_json_dict(doc["recovered_mps"])
        OqeModel.from_json_dict(doc["recovered_model"])
