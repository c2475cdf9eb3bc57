import json
import math

import numpy as np
import pytest

from obsdx.catalog import parse_catalog
from obsdx.errors import FingerprintMismatchError, ParseError, ValidationError
from obsdx.evaluation import auroc
from obsdx.naive_bayes import (
    FEATURES_ALL,
    VARIANCE_FLOOR,
    NBModel,
    fit_pathology_nb,
    load_model,
    predict_log_odds,
    predict_proba,
    save_model,
)

CATALOG = parse_catalog(
    """
    [
      {"name": "Pneumonia", "descriptors": [
        {"text": "cavitation"}, {"text": "air bronchograms", "plural": true}
      ]},
      {"name": "Edema", "descriptors": [{"text": "kerley b lines", "plural": true}]}
    ]
    """,
    name="nb-test",
)


def gaussian_pdf(x, mean, var):
    return math.exp(-((x - mean) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)


def closed_form_posterior(x, prior1, mean0, var0, mean1, var1):
    """Single-feature Bayes rule, straight from the definition."""
    joint1 = prior1 * gaussian_pdf(x, mean1, var1)
    joint0 = (1 - prior1) * gaussian_pdf(x, mean0, var0)
    return joint1 / (joint1 + joint0)


class TestFit:
    def test_priors_from_class_frequencies(self):
        features = np.array([[0.1], [0.2], [0.8], [0.9], [0.7]])
        labels = np.array([0, 0, 1, 1, 1])
        model = fit_pathology_nb(features, labels, ["f"])
        assert model.prior1 == pytest.approx(0.6)
        assert model.prior0 == pytest.approx(0.4)

    def test_identical_features_predict_the_prior(self):
        features = np.full((10, 3), 0.5)
        labels = np.array([0, 1] * 5)
        model = fit_pathology_nb(features, labels, ["a", "b", "c"])
        posterior = predict_proba(model, np.array([0.5, 0.5, 0.5]))
        assert posterior == pytest.approx(model.prior1, abs=1e-12)

    def test_perfectly_separating_feature_reproduces_labels(self):
        rng = np.random.default_rng(15)
        labels = rng.integers(0, 2, 40)
        labels[:2] = [0, 1]
        features = np.where(labels[:, None] == 1, 0.9, 0.1).astype(np.float64)
        model = fit_pathology_nb(features, labels, ["sep"])
        predicted = [int(predict_proba(model, row) > 0.5) for row in features]
        assert predicted == labels.tolist()

    def test_two_sample_fit_hits_variance_floor(self):
        features = np.array([[0.2], [0.8]])
        labels = np.array([0, 1])
        model = fit_pathology_nb(features, labels, ["f"])
        assert model.mean0[0] == 0.2
        assert model.mean1[0] == 0.8
        assert model.var0[0] == VARIANCE_FLOOR
        assert model.var1[0] == VARIANCE_FLOOR

    def test_single_class_rejected(self):
        with pytest.raises(ValidationError):
            fit_pathology_nb(np.array([[0.1], [0.2]]), np.array([1, 1]), ["f"])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            fit_pathology_nb(np.array([[0.1], [0.2]]), np.array([1, 0, 1]), ["f"])

    def test_out_of_range_features_rejected(self):
        with pytest.raises(ValidationError):
            fit_pathology_nb(np.array([[1.4], [0.2]]), np.array([1, 0]), ["f"])

    def test_sample_order_does_not_matter(self):
        rng = np.random.default_rng(16)
        features = rng.uniform(0, 1, (30, 4))
        labels = rng.integers(0, 2, 30)
        labels[:2] = [0, 1]
        names = ["a", "b", "c", "d"]
        model = fit_pathology_nb(features, labels, names)
        perm = rng.permutation(30)
        shuffled = fit_pathology_nb(features[perm], labels[perm], names)
        probe = rng.uniform(0, 1, 4)
        assert predict_proba(model, probe) == pytest.approx(
            predict_proba(shuffled, probe), abs=1e-12
        )


class TestPredict:
    def test_posterior_matches_closed_form_single_feature(self):
        rng = np.random.default_rng(17)
        from obsdx.naive_bayes import PathologyNB

        for _ in range(100):
            mean0, mean1 = rng.uniform(0, 1, 2)
            var0, var1 = rng.uniform(0.001, 0.3, 2)
            prior1 = float(rng.uniform(0.05, 0.95))
            # bypass fit: build the parameterization directly
            model = PathologyNB(
                prior0=1 - prior1,
                prior1=prior1,
                feature_names=("f",),
                mean0=np.array([mean0]),
                var0=np.array([var0]),
                mean1=np.array([mean1]),
                var1=np.array([var1]),
            )
            x = float(rng.uniform(0, 1))
            expected = closed_form_posterior(x, prior1, mean0, var0, mean1, var1)
            assert predict_proba(model, np.array([x])) == pytest.approx(expected, abs=1e-9)

    def test_posterior_at_class_mean_with_separated_classes(self):
        from obsdx.naive_bayes import PathologyNB

        model = PathologyNB(
            prior0=0.5,
            prior1=0.5,
            feature_names=("f",),
            mean0=np.array([0.1]),
            var0=np.array([0.005]),
            mean1=np.array([0.9]),
            var1=np.array([0.005]),
        )
        assert predict_proba(model, np.array([0.9])) > 0.99

    def test_symmetric_midpoint_is_half(self):
        from obsdx.naive_bayes import PathologyNB

        # class means chosen exactly representable so the symmetry is exact
        model = PathologyNB(
            prior0=0.5,
            prior1=0.5,
            feature_names=("f",),
            mean0=np.array([0.25]),
            var0=np.array([0.01]),
            mean1=np.array([0.75]),
            var1=np.array([0.01]),
        )
        assert predict_proba(model, np.array([0.5])) == 0.5

    def test_posterior_and_complement_sum_to_one(self):
        rng = np.random.default_rng(18)
        from obsdx.naive_bayes import PathologyNB

        for _ in range(200):
            model = PathologyNB(
                prior0=0.3,
                prior1=0.7,
                feature_names=("a", "b"),
                mean0=rng.uniform(0, 1, 2),
                var0=rng.uniform(0.001, 0.1, 2),
                mean1=rng.uniform(0, 1, 2),
                var1=rng.uniform(0.001, 0.1, 2),
            )
            x = rng.uniform(0, 1, 2)
            log_odds = predict_log_odds(model, x)
            p = predict_proba(model, x)
            flipped = PathologyNB(
                prior0=model.prior1,
                prior1=model.prior0,
                feature_names=model.feature_names,
                mean0=model.mean1,
                var0=model.var1,
                mean1=model.mean0,
                var1=model.var0,
            )
            complement = predict_proba(flipped, x)
            assert abs((p + complement) - 1.0) < 1e-12
            assert math.isfinite(log_odds)

    def test_wrong_feature_count_is_a_fingerprint_error(self):
        features = np.array([[0.1, 0.5], [0.9, 0.5]])
        model = fit_pathology_nb(features, np.array([0, 1]), ["a", "b"])
        with pytest.raises(FingerprintMismatchError):
            predict_proba(model, np.array([0.5]))


class TestLearnedWeighting:
    def test_nb_beats_uniform_pooling_when_relevance_is_unequal(self):
        # one informative descriptor among three noisy ones
        from obsdx.inference import pool_pathology_score

        rng = np.random.default_rng(19)
        n = 400
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        informative = np.clip(0.5 + (labels - 0.5) * 0.35 + rng.normal(0, 0.05, n), 0, 1)
        noise = rng.uniform(0.2, 0.8, (n, 3))
        features = np.column_stack([informative, noise])

        half = n // 2
        model = fit_pathology_nb(
            features[:half], labels[:half], ["inf", "n1", "n2", "n3"]
        )
        nb_scores = [float(predict_proba(model, row)) for row in features[half:]]
        pooled = [pool_pathology_score(list(row)) for row in features[half:]]
        held_out = labels[half:]
        assert auroc(nb_scores, held_out) >= auroc(pooled, held_out)


class TestModelFile:
    def build_model(self):
        rng = np.random.default_rng(20)
        features = rng.uniform(0, 1, (30, 2))
        labels = rng.integers(0, 2, 30)
        labels[:2] = [0, 1]
        pneumonia = fit_pathology_nb(
            features, labels, ["Pneumonia:cavitation", "Pneumonia:air bronchograms"]
        )
        edema = fit_pathology_nb(features[:, :1], labels, ["Edema:kerley b lines"])
        return NBModel(
            catalog_fingerprint=CATALOG.fingerprint(),
            feature_mode="own",
            pathologies={"Pneumonia": pneumonia, "Edema": edema},
        )

    def test_round_trip_bit_exact(self, tmp_path):
        model = self.build_model()
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.catalog_fingerprint == model.catalog_fingerprint
        assert loaded.feature_mode == model.feature_mode
        for name, original in model.pathologies.items():
            restored = loaded.pathologies[name]
            assert restored.prior0 == original.prior0
            assert restored.prior1 == original.prior1
            assert restored.feature_names == original.feature_names
            for attr in ("mean0", "var0", "mean1", "var1"):
                assert np.array_equal(getattr(restored, attr), getattr(original, attr))

    def test_save_is_deterministic(self, tmp_path):
        model = self.build_model()
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_model(model, a)
        save_model(model, b)
        assert a.read_bytes() == b.read_bytes()

    def test_fingerprint_checked_against_catalog(self, tmp_path):
        model = self.build_model()
        path = tmp_path / "model.json"
        save_model(model, path)
        other = parse_catalog(
            json.dumps([{"name": "Pneumonia", "descriptors": [{"text": "other"}]}])
        )
        with pytest.raises(FingerprintMismatchError):
            load_model(path, catalog=other)
        assert load_model(path, catalog=CATALOG) is not None

    def test_corrupted_file_is_a_parse_error(self, tmp_path):
        path = tmp_path / "model.json"
        save_model(self.build_model(), path)
        path.write_text(path.read_text()[:-40])
        with pytest.raises(ParseError):
            load_model(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "model.json"
        save_model(self.build_model(), path)
        document = json.loads(path.read_text())
        document["version"] = 99
        path.write_text(json.dumps(document))
        with pytest.raises(ParseError, match="version"):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError, match="not found"):
            load_model(tmp_path / "missing.json")


def test_feature_modes_have_expected_widths():
    from obsdx.naive_bayes import feature_names

    own = feature_names(CATALOG, "Pneumonia", "own")
    everything = feature_names(CATALOG, "Pneumonia", FEATURES_ALL)
    assert len(own) == 2
    assert len(everything) == 3  # all descriptors of all scored pathologies
