from __future__ import annotations

import math
import random

import numpy as np
import pytest

from warnlab.dataset import LabeledInstance
from warnlab.errors import ModelError
from warnlab.features import FeatureVector
from warnlab.history import WarningKey
from warnlab.models import (
    encode,
    encode_with,
    fit,
    fit_manifest,
    labels_of,
    load_model,
    predict,
    save_model,
    score,
)
from warnlab.oracle import Label


def make_vector(**overrides) -> FeatureVector:
    defaults = dict(
        warning_context_in_method=0.0,
        warning_context_in_file=0.0,
        warning_context_for_warning_type=0.0,
        defect_likelihood_for_warning_pattern=0.0,
        discretization_of_defect_likelihood=0.0,
        average_lifetime_for_warning_type=0.0,
        comment_code_ratio=0.5,
        method_depth=2,
        file_depth=3,
        methods_in_file=5,
        classes_in_package=4,
        warning_pattern="P1",
        warning_type="CAT",
        warning_priority=2,
        package="com.a",
        file_age_days=100.0,
        file_creation_timestamp=1.4e9,
        developers=2,
        parameter_signature="()V",
        method_visibility="public",
        loc_added_in_file_last_25_revisions=10,
        loc_added_in_package_past_3_months=10,
        warning_lifetime_revisions=3,
    )
    defaults.update(overrides)
    return FeatureVector(**defaults)


def make_instance(i: int, label: Label, cls: str | None = None, pattern: str = "P1",
                  **overrides) -> LabeledInstance:
    cls = cls or f"C{i:03d}"
    key = WarningKey(pattern, f"src/{cls}.java", "com.a", cls, None)
    return LabeledInstance(
        key=key,
        features=make_vector(warning_pattern=pattern, **overrides),
        label=label,
        origin_rev="r1",
    )


def two_cluster_split(n_per_class=20, seed=5):
    """Linearly separable toy data: the comment ratio carries the classes."""
    rng = random.Random(seed)
    train = []
    for i in range(n_per_class):
        train.append(make_instance(i, Label.ACTIONABLE,
                                   comment_code_ratio=0.8 + 0.1 * rng.random(),
                                   file_age_days=rng.uniform(50, 60)))
        train.append(make_instance(100 + i, Label.FALSE_ALARM,
                                   comment_code_ratio=0.1 * rng.random(),
                                   file_age_days=rng.uniform(50, 60)))
    return train


class TestEncode:
    def test_zscore_uses_train_statistics(self):
        train = [make_instance(0, Label.ACTIONABLE, file_age_days=10.0),
                 make_instance(1, Label.FALSE_ALARM, file_age_days=30.0)]
        test = [make_instance(2, Label.FALSE_ALARM, file_age_days=50.0)]
        enc_train, enc_test = encode(train, test)
        manifest = enc_train.manifest
        col = [name for name, _, _ in manifest.numeric].index("file_age_days")
        mean, scale = manifest.numeric[col][1], manifest.numeric[col][2]
        assert mean == 20.0 and scale == 10.0
        assert enc_test.X[0, col] == (50.0 - 20.0) / 10.0

    def test_constant_column_guarded(self):
        train = [make_instance(i, Label.ACTIONABLE) for i in range(3)]
        manifest = fit_manifest(train)
        by_name = {name: (mean, scale) for name, mean, scale in manifest.numeric}
        assert by_name["developers"] == (2.0, 1.0)  # zero variance -> scale 1
        encoded = encode_with(manifest, train)
        assert np.isfinite(encoded.X).all()

    def test_unseen_category_encodes_to_zero_block(self):
        train = [make_instance(0, Label.ACTIONABLE, method_visibility="public"),
                 make_instance(1, Label.FALSE_ALARM, method_visibility="private")]
        test = [make_instance(2, Label.FALSE_ALARM, method_visibility="protected")]
        enc_train, enc_test = encode(train, test)
        offset = len(enc_train.manifest.numeric)
        for name, vocab in enc_train.manifest.categorical:
            block = enc_test.X[0, offset:offset + len(vocab)]
            if name == "method_visibility":
                assert block.sum() == 0.0
            offset += len(vocab)

    def test_one_hot_row_sums(self):
        train = [
            make_instance(0, Label.ACTIONABLE, method_visibility="public"),
            make_instance(1, Label.FALSE_ALARM, method_visibility="private"),
            make_instance(2, Label.FALSE_ALARM, method_visibility="package"),
            make_instance(3, Label.ACTIONABLE, method_visibility="public"),
            make_instance(4, Label.FALSE_ALARM, method_visibility="private"),
        ]
        manifest = fit_manifest(train)
        vis = dict(manifest.categorical)["method_visibility"]
        assert len(vis) == 3
        encoded = encode_with(manifest, train)
        offset = len(manifest.numeric)
        for name, vocab in manifest.categorical:
            block = encoded.X[:, offset:offset + len(vocab)]
            assert (block.sum(axis=1) <= 1.0).all()
            offset += len(vocab)

    def test_empty_train_rejected(self):
        with pytest.raises(ModelError):
            fit_manifest([])


class TestFit:
    def test_separable_training_accuracy(self):
        train = two_cluster_split()
        encoded = encode_with(fit_manifest(train), train)
        model = fit("linear", encoded, labels_of(train), seed=1)
        predictions = predict(model, encoded)
        assert predictions == labels_of(train)

    def test_knn_reproduces_training_labels(self):
        train = two_cluster_split()
        encoded = encode_with(fit_manifest(train), train)
        model = fit("knn", encoded, labels_of(train), k=1)
        assert predict(model, encoded) == labels_of(train)

    def test_same_seed_same_weights(self):
        train = two_cluster_split()
        encoded = encode_with(fit_manifest(train), train)
        m1 = fit("linear", encoded, labels_of(train), seed=42)
        m2 = fit("linear", encoded, labels_of(train), seed=42)
        assert m1.params["weights"] == m2.params["weights"]
        assert m1.params["bias"] == m2.params["bias"]

    def test_single_class_linear_rejected(self):
        train = [make_instance(i, Label.FALSE_ALARM) for i in range(5)]
        encoded = encode_with(fit_manifest(train), train)
        with pytest.raises(ModelError, match="Actionable"):
            fit("linear", encoded, labels_of(train))

    def test_knn_k_bounds(self):
        train = two_cluster_split(n_per_class=2)
        encoded = encode_with(fit_manifest(train), train)
        with pytest.raises(ModelError):
            fit("knn", encoded, labels_of(train), k=5)


class TestPredict:
    def test_repeat_label_hits_bucket(self):
        train = [make_instance(0, Label.ACTIONABLE, cls="BooleanUtils",
                               pattern="ES_EQ")]
        test = [make_instance(1, Label.FALSE_ALARM, cls="BooleanUtils",
                              pattern="ES_EQ")]
        enc_train, enc_test = encode(train, test)
        model = fit("repeat", enc_train, labels_of(train), seed=0)
        assert predict(model, enc_test) == [Label.ACTIONABLE]

    def test_repeat_label_defaults_to_false_alarm(self):
        train = [make_instance(0, Label.ACTIONABLE, cls="Foo", pattern="P1")]
        test = [make_instance(1, Label.ACTIONABLE, cls="Bar", pattern="P2")]
        enc_train, enc_test = encode(train, test)
        model = fit("repeat", enc_train, labels_of(train), seed=0)
        assert predict(model, enc_test) == [Label.FALSE_ALARM]
        assert list(score(model, enc_test)) == [0.0]

    def test_repeat_label_ambiguous_bucket_is_seeded(self):
        train = [
            make_instance(0, Label.ACTIONABLE, cls="Same", pattern="P1",
                          comment_code_ratio=0.1),
            make_instance(1, Label.FALSE_ALARM, cls="Same", pattern="P1",
                          comment_code_ratio=0.9),
        ]
        test = [make_instance(2, Label.ACTIONABLE, cls="Same", pattern="P1")]
        enc_train, enc_test = encode(train, test)
        model = fit("repeat", enc_train, labels_of(train), seed=7)
        first = predict(model, enc_test)
        assert predict(model, enc_test) == first  # pure given the seed
        other = fit("repeat", enc_train, labels_of(train), seed=8)
        outcomes = {predict(fit("repeat", enc_train, labels_of(train), seed=s),
                            enc_test)[0] for s in range(30)}
        assert outcomes == {Label.ACTIONABLE, Label.FALSE_ALARM}
        assert predict(other, enc_test) in ([Label.ACTIONABLE], [Label.FALSE_ALARM])

    def test_knn_majority_vote(self):
        train = [
            make_instance(0, Label.ACTIONABLE, comment_code_ratio=0.50),
            make_instance(1, Label.ACTIONABLE, comment_code_ratio=0.52),
            make_instance(2, Label.FALSE_ALARM, comment_code_ratio=0.54),
            make_instance(3, Label.FALSE_ALARM, comment_code_ratio=0.95),
        ]
        test = [make_instance(9, Label.ACTIONABLE, comment_code_ratio=0.51)]
        enc_train, enc_test = encode(train, test)
        model = fit("knn", enc_train, labels_of(train), k=3)
        assert list(score(model, enc_test)) == [pytest.approx(2 / 3)]
        assert predict(model, enc_test) == [Label.ACTIONABLE]

    def test_knn_tie_prefers_actionable(self):
        train = [
            make_instance(0, Label.ACTIONABLE, comment_code_ratio=0.40),
            make_instance(1, Label.FALSE_ALARM, comment_code_ratio=0.60),
        ]
        test = [make_instance(9, Label.FALSE_ALARM, comment_code_ratio=0.50)]
        enc_train, enc_test = encode(train, test)
        model = fit("knn", enc_train, labels_of(train), k=2)
        assert predict(model, enc_test) == [Label.ACTIONABLE]

    def test_constant_always_actionable(self):
        train = two_cluster_split(n_per_class=3)
        encoded = encode_with(fit_manifest(train), train)
        model = fit("constant", encoded, labels_of(train))
        assert set(predict(model, encoded)) == {Label.ACTIONABLE}
        assert (score(model, encoded) == 1.0).all()

    def test_manifest_mismatch_rejected(self):
        train = two_cluster_split(n_per_class=3)
        other = [make_instance(i, Label.ACTIONABLE, method_visibility="package")
                 for i in range(4)] + [make_instance(9, Label.FALSE_ALARM)]
        enc_train = encode_with(fit_manifest(train), train)
        enc_other = encode_with(fit_manifest(other), other)
        model = fit("linear", enc_train, labels_of(train), seed=0)
        with pytest.raises(ModelError, match="manifest"):
            predict(model, enc_other)


class TestDuplicationExploit:
    def test_feature_identical_twins_make_knn_perfect(self):
        rng = random.Random(9)
        train = []
        for i in range(40):
            label = Label.ACTIONABLE if rng.random() < 0.5 else Label.FALSE_ALARM
            train.append(make_instance(i, label,
                                       comment_code_ratio=rng.random(),
                                       file_age_days=rng.uniform(1, 900),
                                       warning_lifetime_revisions=rng.randint(1, 40)))
        test = list(train)  # every test instance has an identical twin
        enc_train, enc_test = encode(train, test)
        model = fit("knn", enc_train, labels_of(train), k=1)
        predictions = predict(model, enc_test)
        truth = labels_of(test)
        tp = sum(1 for t, p in zip(truth, predictions)
                 if t is Label.ACTIONABLE and p is Label.ACTIONABLE)
        fp = sum(1 for t, p in zip(truth, predictions)
                 if t is not Label.ACTIONABLE and p is Label.ACTIONABLE)
        fn = sum(1 for t, p in zip(truth, predictions)
                 if t is Label.ACTIONABLE and p is not Label.ACTIONABLE)
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        f1 = 2 * precision * recall / (precision + recall)
        assert f1 == 1.0


class TestAffineInvariance:
    def test_linear_predictions_survive_column_rescaling(self):
        train = two_cluster_split()
        test = [make_instance(500 + i,
                              Label.ACTIONABLE if i % 2 else Label.FALSE_ALARM,
                              comment_code_ratio=0.9 if i % 2 else 0.05,
                              file_age_days=55.0)
                for i in range(10)]

        def rescale(instances, a, b):
            out = []
            for inst in instances:
                vec = inst.features
                out.append(LabeledInstance(
                    key=inst.key,
                    features=FeatureVector(**{
                        **{f: getattr(vec, f) for f in vec.__dataclass_fields__
                           if f != "flags"},
                        "comment_code_ratio": a * vec.comment_code_ratio + b,
                        "flags": vec.flags,
                    }),
                    label=inst.label,
                    origin_rev=inst.origin_rev,
                ))
            return out

        enc_train, enc_test = encode(train, test)
        base = fit("linear", enc_train, labels_of(train), seed=3)
        baseline = predict(base, enc_test)
        for a, b in ((4.5, -2.0), (-3.0, 7.0)):
            enc_train2, enc_test2 = encode(rescale(train, a, b), rescale(test, a, b))
            model2 = fit("linear", enc_train2, labels_of(train), seed=3)
            assert predict(model2, enc_test2) == baseline


class TestPersistence:
    @pytest.mark.parametrize("kind,kwargs", [
        ("constant", {}), ("repeat", {}), ("knn", {"k": 3}), ("linear", {}),
    ])
    def test_save_load_preserves_predictions(self, tmp_path, kind, kwargs):
        train = two_cluster_split(n_per_class=6)
        encoded = encode_with(fit_manifest(train), train)
        model = fit(kind, encoded, labels_of(train), seed=11, **kwargs)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert predict(loaded, encoded) == predict(model, encoded)
        assert np.allclose(score(loaded, encoded), score(model, encoded))

    def test_scores_are_finite(self):
        train = two_cluster_split(n_per_class=6)
        encoded = encode_with(fit_manifest(train), train)
        for kind in ("constant", "repeat", "knn", "linear"):
            model = fit(kind, encoded, labels_of(train), seed=1)
            assert all(math.isfinite(s) for s in score(model, encoded))
