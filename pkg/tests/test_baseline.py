# tests/test_baseline.py

"""
Tests for baseline feature handling, the logistic solver and the adjusted
odds-ratio analysis
"""

import numpy as np
import pandas as pd
import pytest

from models.baseline_model import FeatureSpec
from services.baseline_service import (
    BaselineModel,
    adjusted_analysis,
    balanced_weights,
    complete_for_variant,
    encode,
    fit_baseline,
    fit_logistic,
    fit_schema,
    logistic_gradient,
    logistic_objective,
    pool_rare_groups,
    predict_proba,
    select_baseline_features,
    solve_weighted_logistic,
    variant_features,
)
from utils.exceptions import (
    CollinearityError,
    ConfigurationError,
    DataNotFoundError,
    DegenerateLabelError,
    SeparationError,
    ValidationError,
)
from utils.seeding import make_rng


def _logistic_data(rng, n, coefficients, intercept):
    X = rng.standard_normal((n, len(coefficients)))
    p = 1 / (1 + np.exp(-(X @ np.asarray(coefficients) + intercept)))
    return X, rng.random(n) < p


class TestSolver:
    def test_gradient_matches_finite_differences(self):
        rng = make_rng(0, "gradient")
        X = rng.standard_normal((30, 3))
        Xa = np.hstack([X, np.ones((30, 1))])
        y = rng.random(30) < 0.4
        weights = rng.uniform(0.5, 2.0, 30)
        beta = rng.standard_normal(4)
        h = 1e-6
        numeric = np.array(
            [
                (
                    logistic_objective(beta + h * e, Xa, y, weights, 0.7)
                    - logistic_objective(beta - h * e, Xa, y, weights, 0.7)
                )
                / (2 * h)
                for e in np.eye(4)
            ]
        )
        analytic = logistic_gradient(beta, Xa, y, weights, 0.7)
        assert analytic == pytest.approx(numeric, rel=1e-5, abs=1e-7)

    def test_converges(self):
        X, y = _logistic_data(make_rng(1, "converge"), 500, [1.0, -2.0, 0.5], 0.2)
        model = fit_logistic(X, y)
        assert model.converged
        assert model.gradient_norm <= 1e-8

    def test_objective_never_increases(self):
        X, y = _logistic_data(make_rng(2, "history"), 400, [3.0, -1.0], -1.0)
        model = fit_logistic(X, y, C=10.0)
        history = model.history
        assert len(history) == model.iterations + 1
        for before, after in zip(history, history[1:]):
            assert after <= before + 1e-12 * max(1.0, abs(before))

    def test_recovers_coefficients(self):
        X, y = _logistic_data(make_rng(3, "recover"), 20000, [1.0, -0.5], -0.3)
        model = solve_weighted_logistic(X, y, l2_penalty=0.0)
        assert model.coefficients == pytest.approx((1.0, -0.5), abs=0.1)
        assert model.intercept == pytest.approx(-0.3, abs=0.1)

    def test_balanced_weights(self):
        weights = balanced_weights(np.array([True, False, False, False]))
        assert weights == pytest.approx([2.0, 2 / 3, 2 / 3, 2 / 3])
        assert weights.sum() == pytest.approx(4.0)

    def test_single_class(self):
        with pytest.raises(DegenerateLabelError):
            balanced_weights(np.ones(5, dtype=bool))
        with pytest.raises(DegenerateLabelError):
            fit_logistic(np.zeros((3, 1)), [False, False, False], class_weight=None)

    def test_invalid_inputs(self):
        with pytest.raises(ValidationError):
            fit_logistic(np.zeros((2, 1)), [True, False], C=0.0)
        with pytest.raises(ValidationError):
            solve_weighted_logistic(np.zeros((3, 1)), [True, False])
        with pytest.raises(ValidationError):
            solve_weighted_logistic(np.array([[np.nan], [1.0]]), [True, False])
        with pytest.raises(ConfigurationError):
            fit_logistic(np.zeros((2, 1)), [True, False], class_weight="inverse")

    def test_predict_proba_shape(self):
        X, y = _logistic_data(make_rng(4, "predict"), 100, [1.0], 0.0)
        model = fit_logistic(X, y)
        probabilities = predict_proba(model, X)
        assert probabilities.shape == (100,)
        assert np.all((probabilities > 0) & (probabilities < 1))
        with pytest.raises(ValidationError):
            predict_proba(model, np.zeros((3, 2)))


class TestFeatures:
    def _frame(self):
        return pd.DataFrame(
            {
                "age": np.arange(20, 40, dtype=float),
                "sex": ["Female", "Male"] * 10,
                "race_ethnicity": ["White"] * 8 + ["Black"] * 8 + ["Unknown"] * 4,
                "years_with_diabetes": [5.0] * 18 + [np.nan] * 2,
            }
        )

    def test_select_by_availability(self):
        candidates = ["age", "sex", "race_ethnicity", "years_with_diabetes"]
        selected = select_baseline_features(self._frame(), candidates)
        assert selected == ["age", "sex", "years_with_diabetes"]
        assert select_baseline_features(self._frame(), candidates, threshold=0.8) == candidates

    def test_select_nothing_usable(self):
        with pytest.raises(ValidationError):
            select_baseline_features(self._frame(), [])
        with pytest.raises(ValidationError):
            select_baseline_features(self._frame(), ["race_ethnicity"], threshold=0.9)

    def test_scalar_encoding(self):
        schema = fit_schema(pd.DataFrame({"age": [40.0, 60.0]}), ["age"])
        encoded = encode(pd.DataFrame({"age": [50.0, 70.0, np.nan]}), schema)
        assert encoded[:, 0] == pytest.approx([0.0, 2.0, 0.0])

    def test_unseen_level_encodes_as_reference(self, caplog):
        schema = fit_schema(pd.DataFrame({"sex": ["Female", "Male"]}), ["sex"])
        assert schema.columns == ["sex=Male"]
        encoded = encode(pd.DataFrame({"sex": ["Male", "Other", None]}), schema)
        assert encoded[:, 0].tolist() == [1.0, 0.0, 0.0]
        assert "unseen levels" in caplog.text

    def test_reference_falls_back_to_first_level(self):
        schema = fit_schema(pd.DataFrame({"race_ethnicity": ["Black", "Asian"]}), ["race_ethnicity"])
        assert schema.features[0].reference_level == "Asian"

    def test_constant_feature(self):
        with pytest.raises(ValidationError, match="constant"):
            fit_schema(pd.DataFrame({"age": [50.0, 50.0]}), ["age"])

    def test_missing_column(self):
        schema = fit_schema(pd.DataFrame({"age": [40.0, 60.0]}), ["age"])
        with pytest.raises(ValidationError):
            encode(pd.DataFrame({"sex": ["Male"]}), schema)

    def test_variant_features(self):
        available = ["age", "sex"]
        assert variant_features("standard", available) == ["age", "sex"]
        assert variant_features("bp_bmi", available) == [
            "age",
            "sex",
            "BMI",
            "SystolicBP",
            "DiastolicBP",
        ]
        assert variant_features("pupil", available) == ["age", "sex", "pupil_size"]
        assert variant_features("pupil_only", available) == ["pupil_size"]
        with pytest.raises(ConfigurationError):
            variant_features("retina", available)

    def test_complete_for_variant(self):
        frame = pd.DataFrame({"age": [1.0, 2.0, 3.0], "pupil_size": [0.3, np.nan, 0.4]})
        assert complete_for_variant(frame, "pupil").index.tolist() == [0, 2]
        assert len(complete_for_variant(frame, "standard")) == 3


class TestBaselineModel:
    def _train(self):
        rng = make_rng(5, "baseline-model")
        frame = pd.DataFrame(
            {
                "age": rng.normal(55, 10, 300),
                "sex": np.where(rng.random(300) < 0.5, "Female", "Male"),
            }
        )
        labels = rng.random(300) < 1 / (1 + np.exp(-(frame["age"] - 55) / 10))
        return frame, labels

    def test_fit_and_predict(self):
        frame, labels = self._train()
        model = fit_baseline(frame, labels, "ACR>=300.0", ["age", "sex"], seed=5)
        assert model.features == ["age", "sex"]
        assert model.n_train == 300
        assert model.model.converged
        assert model.model.coefficients[0] > 0

    def test_save_and_load(self, tmp_path):
        frame, labels = self._train()
        model = fit_baseline(
            frame,
            labels,
            "ACR>=300.0",
            ["age", "sex"],
            seed=5,
            dataset_slice="ValA",
            availability_threshold=0.85,
        )
        path = model.save(tmp_path / "models" / "ACR.json")
        loaded = BaselineModel.load(path)
        assert loaded == model
        assert loaded.stale_fields(seed=5, dataset_slice="ValA", features=["age", "sex"]) == []
        assert loaded.stale_fields(seed=6, dataset_slice=None) == ["dataset_slice", "seed"]
        np.testing.assert_array_equal(loaded.predict(frame), model.predict(frame))

    def test_load_missing(self, tmp_path):
        with pytest.raises(DataNotFoundError):
            BaselineModel.load(tmp_path / "absent.json")

    def test_imputed_counts(self):
        frame, labels = self._train()
        frame.loc[:9, "age"] = np.nan
        model = fit_baseline(frame, labels, "ACR>=300.0", ["age", "sex"])
        assert model.imputed == {"age": 10}

    def test_label_length_mismatch(self):
        frame, labels = self._train()
        with pytest.raises(ValidationError):
            fit_baseline(frame, labels[:-1], "ACR>=300.0", ["age"])


class TestPoolRareGroups:
    def test_pools_rare_and_unknown(self):
        values = pd.Series(["White"] * 58 + ["Black"] * 39 + ["Asian"] + ["Unknown"] * 2)
        pooled = pool_rare_groups(values)
        assert pooled.value_counts().to_dict() == {"White": 58, "Black": 39, "Other": 3}


class TestAdjustedAnalysis:
    def test_variables_and_null_odds_ratio(self):
        rng = make_rng(6, "adjusted-null")
        n = 50000
        covariates = pd.DataFrame(
            {
                "age": rng.normal(55, 10, n),
                "sex": np.where(rng.random(n) < 0.5, "Female", "Male"),
            }
        )
        outcome = rng.random(n) < 0.3
        rows = adjusted_analysis(outcome, covariates, rng.standard_normal(n))
        assert [row.variable for row in rows] == ["age", "sex=Male", "DLS"]
        dls = rows[-1]
        assert 0.95 <= dls.odds_ratio <= 1.05
        assert dls.ci_low < dls.odds_ratio < dls.ci_high
        assert 0.0 <= dls.p <= 1.0

    def test_separation(self):
        rng = make_rng(7, "separation")
        x = np.linspace(-1.0, 1.0, 200)
        covariates = pd.DataFrame({"age": rng.normal(55, 10, 200)})
        with pytest.raises(SeparationError):
            adjusted_analysis(x > 0, covariates, x)

    def test_collinearity_names_columns(self):
        rng = make_rng(8, "collinear")
        age = rng.normal(55, 10, 300)
        covariates = pd.DataFrame({"age": age, "age2": 2 * age})
        with pytest.raises(CollinearityError) as info:
            adjusted_analysis(rng.random(300) < 0.4, covariates, rng.standard_normal(300))
        assert info.value.columns == ["age2"]

    def test_drops_incomplete_rows(self):
        rng = make_rng(9, "complete-cases")
        age = rng.normal(55, 10, 500)
        age[:50] = np.nan
        covariates = pd.DataFrame({"age": age})
        rows = adjusted_analysis(rng.random(500) < 0.4, covariates, rng.standard_normal(500))
        assert [row.variable for row in rows] == ["age", "DLS"]

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            adjusted_analysis([True, False], pd.DataFrame({"age": [1.0]}), [0.1, 0.2])

    @pytest.mark.slow
    def test_planted_odds_ratio_coverage(self):
        """Intervals around a planted per-SD odds ratio of 2 cover it in most cohorts"""
        rng = make_rng(10, "adjusted-coverage")
        covered = 0
        runs = 200
        for _ in range(runs):
            age = rng.normal(55, 10, 2000)
            score = rng.standard_normal(2000)
            logit = -1.0 + 0.02 * (age - 55) + np.log(2.0) * score
            outcome = rng.random(2000) < 1 / (1 + np.exp(-logit))
            dls = adjusted_analysis(outcome, pd.DataFrame({"age": age}), score)[-1]
            covered += dls.ci_low <= 2.0 <= dls.ci_high
        assert 0.90 <= covered / runs <= 0.99
