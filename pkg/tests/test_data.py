import json

import numpy as np
import pytest

from vbcdhmm.classifier import ModelBank
from vbcdhmm.data import (
    SCHEMA_VERSION,
    GeneratorSpec,
    PCATransform,
    SequenceRecord,
    dataset_dim,
    generate,
    group_by_label,
    load_bank,
    load_dataset,
    load_model,
    mask_missing,
    pca_apply,
    pca_fit,
    pooled_moments,
    save_dataset,
    save_model,
    save_traces,
)
from vbcdhmm.dirichlet import default_hyper
from vbcdhmm.exceptions import (
    DatasetError,
    DegenerateDataError,
    DimensionMismatchError,
    SchemaVersionError,
    ValidationError,
)
from vbcdhmm.trainer import TrainConfig, TrainedModel, fit


def write_lines(path, *lines):
    path.write_text("\n".join(lines) + "\n")
    return path


def record(id, frames, label="a"):
    return SequenceRecord(id=id, label=label, frames=np.asarray(frames, dtype=float))


@pytest.fixture(scope="module")
def trained():
    records, _ = generate(_blobs(), 40, 4, seed=3)
    seqs = [r.frames for r in records]
    mean, cov = pooled_moments(seqs)
    hyper = default_hyper(2, 2, 2, 2, mean, cov)
    return fit(seqs, hyper, TrainConfig(max_iters=4, seed=3))


def _blobs():
    return GeneratorSpec(
        pi_hat=np.array([1.0, 0.0]),
        A_hat=np.array([[0.5, 0.5], [0.5, 0.5]]),
        pi=np.array([0.5, 0.5]),
        A_dep=np.full((2, 2, 2), 0.5),
        weights=np.full((2, 2), 0.5),
        means=np.array([[[0.0, 0.0], [1.0, 1.0]], [[5.0, -3.0], [6.0, -2.0]]]),
        covariances=np.tile(0.3 * np.eye(2), (2, 2, 1, 1)),
    )


def assert_same_model(a: TrainedModel, b: TrainedModel):
    for name in ("alpha0", "alpha", "eta0", "eta_dep", "w", "nw_mean", "nw_scale"):
        np.testing.assert_array_equal(getattr(a.hyper, name), getattr(b.hyper, name))
    assert a.hyper.nw_lambda == b.hyper.nw_lambda
    assert a.hyper.nw_dof == b.hyper.nw_dof
    for name in ("pi_hat", "A_hat", "pi", "A_dep"):
        np.testing.assert_array_equal(
            getattr(a.posteriors, name).concentration,
            getattr(b.posteriors, name).concentration,
        )
    np.testing.assert_array_equal(
        a.emissions.mix_weights.concentration, b.emissions.mix_weights.concentration
    )
    for row_a, row_b in zip(a.emissions.components, b.emissions.components):
        for comp_a, comp_b in zip(row_a, row_b):
            assert comp_a.lambda_t == comp_b.lambda_t
            assert comp_a.dof_t == comp_b.dof_t
            np.testing.assert_array_equal(comp_a.mean_t, comp_b.mean_t)
            np.testing.assert_array_equal(comp_a.scale_t, comp_b.scale_t)
    assert tuple(a.elbo_trace) == tuple(b.elbo_trace)
    assert a.converged == b.converged


class TestSequenceRecord:
    def test_properties(self):
        rec = record("x", [[1.0, 2.0], [np.nan, np.nan], [3.0, 4.0]])
        assert rec.n_frames == 3
        assert rec.dim == 2
        np.testing.assert_array_equal(rec.missing, [False, True, False])
        assert rec.to_dict() == {
            "id": "x",
            "label": "a",
            "frames": [[1.0, 2.0], None, [3.0, 4.0]],
        }

    def test_partial_frame(self):
        with pytest.raises(DatasetError, match="complete or missing"):
            record("x", [[1.0, np.nan]])

    def test_infinite(self):
        with pytest.raises(DatasetError, match="finite"):
            record("x", [[np.inf]])

    def test_no_frames(self):
        with pytest.raises(DatasetError):
            record("x", np.zeros((0, 2)))


class TestLoadDataset:
    def test_valid(self, tmp_path):
        path = write_lines(
            tmp_path / "data.jsonl",
            '{"id": "s1", "label": "walk", "frames": [[1, 2], null, [3.5, 4]]}',
            "",
            '{"id": "s2", "label": null, "frames": [null, [0, 0]]}',
        )
        records = load_dataset(path)
        assert [r.id for r in records] == ["s1", "s2"]
        assert records[0].label == "walk"
        assert records[1].label is None
        np.testing.assert_array_equal(records[0].missing, [False, True, False])
        assert records[0].frames[2, 0] == 3.5
        assert dataset_dim(records) == 2

    @pytest.mark.parametrize(
        "line, match",
        [
            ("[1, 2]", "JSON object"),
            ('{"label": "a", "frames": [[1]]}', "'id'"),
            ('{"id": 3, "frames": [[1]]}', "'id'"),
            ('{"id": "b", "label": 4, "frames": [[1]]}', "'label'"),
            ('{"id": "b", "frames": []}', "'frames'"),
            ('{"id": "b", "frames": [[1], "x"]}', "frame 2"),
            ('{"id": "b", "frames": [[1], [true]]}', "frame 2"),
            ('{"id": "b", "frames": [[1], [1, 2]]}', "frame 2 has 2 values"),
            ('{"id": "b", "frames": [[1]', "line 2"),
        ],
    )
    def test_malformed_line(self, tmp_path, line, match):
        first = '{"id": "a", "frames": [[0]]}'
        path = write_lines(tmp_path / "data.jsonl", first, line)
        with pytest.raises(DatasetError, match=match) as exc_info:
            load_dataset(path)
        assert exc_info.value.line == 2

    def test_dimension_mismatch_between_records(self, tmp_path):
        path = write_lines(
            tmp_path / "data.jsonl",
            '{"id": "a", "frames": [[0, 1]]}',
            '{"id": "b", "frames": [null, [0, 1, 2]]}',
        )
        with pytest.raises(DatasetError, match="D=2") as exc_info:
            load_dataset(path)
        assert exc_info.value.line == 2
        assert exc_info.value.record_id == "b"

    def test_duplicate_id(self, tmp_path):
        path = write_lines(
            tmp_path / "data.jsonl",
            '{"id": "a", "frames": [[0]]}',
            '{"id": "a", "frames": [[1]]}',
        )
        with pytest.raises(DatasetError, match="duplicate id"):
            load_dataset(path)

    def test_no_present_frames(self, tmp_path):
        path = write_lines(tmp_path / "data.jsonl", '{"id": "a", "frames": [null]}')
        with pytest.raises(DatasetError, match="no present frames"):
            load_dataset(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text("")
        assert load_dataset(path) == []

    def test_round_trip(self, tmp_path):
        records = [
            record("x", [[0.1, 0.2], [np.nan, np.nan]], label="p"),
            record("y", [[1e-300, -7.25]], label=None),
        ]
        path = tmp_path / "data.jsonl"
        save_dataset(path, records)
        loaded = load_dataset(path)
        for a, b in zip(records, loaded):
            assert (a.id, a.label) == (b.id, b.label)
            np.testing.assert_array_equal(a.frames, b.frames)


class TestGrouping:
    def test_group_by_label(self):
        records = [
            record("1", [[0]], "b"),
            record("2", [[0]], "a"),
            record("3", [[0]], "b"),
        ]
        groups = group_by_label(records)
        assert list(groups) == ["b", "a"]
        assert [r.id for r in groups["b"]] == ["1", "3"]

    def test_unlabeled(self):
        with pytest.raises(DatasetError, match="no label"):
            group_by_label([record("1", [[0]], None)])

    def test_dataset_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            dataset_dim([record("1", [[0]]), record("2", [[0, 1]])])


class TestPooledMoments:
    def test_skips_missing_frames(self):
        mean, cov = pooled_moments(
            [[[0.0], [np.nan]], [[2.0], [4.0]]]
        )
        np.testing.assert_allclose(mean, [2.0])
        np.testing.assert_allclose(cov, [[4.0]])

    def test_too_few_frames(self):
        with pytest.raises(DegenerateDataError, match="degenerate data"):
            pooled_moments([[[1.0], [np.nan]]])


class TestPCA:
    @pytest.fixture
    def frames(self, rng):
        mixing = np.array([[3.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.5, 0.2, 0.1]])
        return [rng.normal(size=(80, 3)) @ mixing for _ in range(3)]

    def test_target_dim(self, frames):
        pca = pca_fit(frames, target_dim=2)
        assert pca.n_components == 2
        assert pca.input_dim == 3
        gram = pca.components @ pca.components.T
        np.testing.assert_allclose(gram, np.eye(2), atol=1e-12)
        assert pca.explained_variance[0] >= pca.explained_variance[1]

    def test_projected_covariance_is_diagonal(self, frames):
        pca = pca_fit(frames, target_dim=3)
        projected = np.concatenate([pca.apply(f) for f in frames])
        cov = np.cov(projected, rowvar=False)
        off_diagonal = cov - np.diag(np.diag(cov))
        assert np.max(np.abs(off_diagonal)) < 1e-8
        np.testing.assert_allclose(np.diag(cov), pca.explained_variance, rtol=1e-8)

    def test_sign_convention(self, frames):
        pca = pca_fit(frames, target_dim=3)
        for axis in pca.components:
            assert axis[np.argmax(np.abs(axis))] > 0

    def test_variance_fraction(self, frames):
        full = pca_fit(frames, target_dim=3)
        ratio = np.cumsum(full.explained_variance) / full.explained_variance.sum()
        pca = pca_fit(frames, variance_fraction=float(ratio[0]) / 2)
        assert pca.n_components == 1
        assert pca_fit(frames, variance_fraction=1.0).n_components == 3

    def test_options(self, frames):
        with pytest.raises(ValidationError):
            pca_fit(frames)
        with pytest.raises(ValidationError):
            pca_fit(frames, target_dim=1, variance_fraction=0.5)
        with pytest.raises(ValidationError):
            pca_fit(frames, target_dim=4)
        with pytest.raises(ValidationError):
            pca_fit(frames, variance_fraction=0.0)

    def test_too_few_frames(self):
        with pytest.raises(DegenerateDataError):
            pca_fit([np.zeros((2, 3))], target_dim=2)

    def test_missing_rows(self, frames):
        pca = pca_fit(frames, target_dim=2)
        values = frames[0][:4].copy()
        values[1] = np.nan
        rec = record("x", values)
        (projected,) = pca_apply(pca, [rec])
        assert projected.n_frames == 4
        assert projected.dim == 2
        np.testing.assert_array_equal(projected.missing, [False, True, False, False])

    def test_inverse(self, frames):
        pca = pca_fit(frames, target_dim=3)
        restored = pca.inverse(pca.apply(frames[0]))
        np.testing.assert_allclose(restored, frames[0], atol=1e-9)

    def test_dict(self, frames):
        pca = pca_fit(frames, target_dim=2)
        again = PCATransform.from_dict(json.loads(json.dumps(pca.to_dict())))
        np.testing.assert_array_equal(again.components, pca.components)
        np.testing.assert_array_equal(again.mean, pca.mean)
        with pytest.raises(ValidationError):
            PCATransform.from_dict({**pca.to_dict(), "kind": "ica"})

    def test_dimension_mismatch(self, frames):
        with pytest.raises(DimensionMismatchError):
            pca_fit(frames, target_dim=2).apply(np.zeros((3, 2)))


class TestMaskMissing:
    @pytest.mark.parametrize(
        "fraction, expected", [(0.0, 0), (0.25, 3), (0.3, 3), (0.99, 9)]
    )
    def test_counts(self, fraction, expected):
        rec = record("x", np.arange(10.0)[:, None])
        (masked,) = mask_missing([rec], fraction, seed=1)
        assert masked.missing.sum() == expected
        assert not masked.missing[0]

    def test_single_frame(self):
        (masked,) = mask_missing([record("x", [[1.0]])], 0.9, seed=1)
        assert masked.missing.sum() == 0

    def test_present_values_untouched(self):
        rec = record("x", np.arange(20.0)[:, None])
        (masked,) = mask_missing([rec], 0.5, seed=4)
        keep = ~masked.missing
        np.testing.assert_array_equal(masked.frames[keep], rec.frames[keep])
        assert rec.missing.sum() == 0

    def test_deterministic(self):
        records = [record(str(i), np.arange(30.0)[:, None]) for i in range(3)]
        first = mask_missing(records, 0.4, seed=9)
        again = mask_missing(records, 0.4, seed=9)
        other = mask_missing(records, 0.4, seed=10)
        for a, b in zip(first, again):
            np.testing.assert_array_equal(a.missing, b.missing)
        assert any(
            not np.array_equal(a.missing, b.missing) for a, b in zip(first, other)
        )

    @pytest.mark.parametrize("fraction", [-0.1, 1.0, 1.5])
    def test_invalid_fraction(self, fraction):
        with pytest.raises(ValidationError):
            mask_missing([record("x", [[1.0]])], fraction, seed=0)


class TestModelFiles:
    def test_model_round_trip(self, trained, tmp_path):
        path = tmp_path / "model.json"
        save_model(path, trained)
        loaded = load_model(path)
        assert isinstance(loaded, TrainedModel)
        assert_same_model(trained, loaded)

        again = tmp_path / "again.json"
        save_model(again, loaded)
        assert again.read_bytes() == path.read_bytes()

    def test_bank_round_trip(self, trained, tmp_path):
        pca = PCATransform(
            mean=np.zeros(3), components=np.eye(3)[:2], explained_variance=[2.0, 1.0]
        )
        bank = ModelBank({"b": trained, "a": trained}, preprocessing=pca)
        path = tmp_path / "bank.json"
        save_model(path, bank)
        loaded = load_bank(path)
        assert loaded.labels == ["b", "a"]
        assert_same_model(loaded["a"], trained)
        np.testing.assert_array_equal(loaded.preprocessing.components, pca.components)
        data = json.loads(path.read_text())
        assert data["schema_version"] == SCHEMA_VERSION
        assert data["kind"] == "bank"

    def test_bank_without_preprocessing(self, trained, tmp_path):
        path = tmp_path / "bank.json"
        save_model(path, ModelBank({"a": trained}))
        assert load_bank(path).preprocessing is None

    def test_schema_version(self, trained, tmp_path):
        path = tmp_path / "model.json"
        save_model(path, trained)
        data = json.loads(path.read_text())
        data["schema_version"] = 2
        path.write_text(json.dumps(data))
        with pytest.raises(SchemaVersionError) as exc_info:
            load_model(path)
        assert exc_info.value.found == 2

    def test_unknown_kind(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, "kind": "zoo"}))
        with pytest.raises(ValidationError, match="kind"):
            load_model(path)

    def test_bank_expected(self, trained, tmp_path):
        path = tmp_path / "model.json"
        save_model(path, trained)
        with pytest.raises(ValidationError, match="single model"):
            load_bank(path)

    def test_malformed(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, "kind": "model"}))
        with pytest.raises(ValidationError, match="malformed"):
            load_model(path)

    def test_not_an_object(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("[]")
        with pytest.raises(ValidationError):
            load_model(path)


class TestGeneratorSpec:
    def test_properties(self, lag2_spec):
        assert lag2_spec.max_lag == 2
        assert lag2_spec.n_states == 2
        assert lag2_spec.dim == 1
        np.testing.assert_allclose(lag2_spec.factors, np.ones((2, 1, 1, 1)))

    def test_dict(self, blob_spec):
        again = GeneratorSpec.from_dict(json.loads(json.dumps(blob_spec.to_dict())))
        np.testing.assert_array_equal(again.A_dep, blob_spec.A_dep)
        np.testing.assert_array_equal(again.covariances, blob_spec.covariances)

    def test_shape(self, blob_spec):
        with pytest.raises(DimensionMismatchError, match="A_dep"):
            GeneratorSpec.from_dict({**blob_spec.to_dict(), "A_dep": [[[1.0]]]})

    def test_rows_must_sum_to_one(self, blob_spec):
        with pytest.raises(ValidationError, match="pi rows"):
            GeneratorSpec.from_dict({**blob_spec.to_dict(), "pi": [0.5, 0.6]})

    @pytest.mark.parametrize(
        "name, value",
        [
            ("A_hat", [[np.nan, np.nan], [0.0, 1.0]]),
            ("A_dep", [[[0.5, 0.5], [0.5, 0.5]], [[0.9, 0.1], [np.nan, np.nan]]]),
            ("pi", [np.inf, 0.5]),
        ],
    )
    def test_rows_must_be_finite(self, lag2_spec, name, value):
        with pytest.raises(ValidationError, match=f"{name} rows"):
            GeneratorSpec.from_dict({**lag2_spec.to_dict(), name: value})

    def test_means_must_be_finite(self, lag2_spec):
        with pytest.raises(ValidationError, match="means"):
            GeneratorSpec.from_dict(
                {**lag2_spec.to_dict(), "means": [[[np.nan]], [[3.0]]]}
            )

    def test_covariance_must_be_spd(self, blob_spec):
        covs = np.array(blob_spec.covariances)
        covs[1, 0] = [[1.0, 2.0], [2.0, 1.0]]
        with pytest.raises(ValidationError, match="covariance"):
            GeneratorSpec.from_dict(
                {**blob_spec.to_dict(), "covariances": covs.tolist()}
            )


class TestGenerate:
    def test_shapes_and_ids(self, lag2_spec):
        records, traces = generate(
            lag2_spec, 12, 3, seed=1, label="walk", id_prefix="w"
        )
        assert [r.id for r in records] == ["w0", "w1", "w2"]
        assert [t.id for t in traces] == ["w0", "w1", "w2"]
        assert all(r.label == "walk" and r.frames.shape == (12, 1) for r in records)

    def test_deterministic(self, blob_spec):
        first, _ = generate(blob_spec, 30, 2, seed=5)
        again, _ = generate(blob_spec, 30, 2, seed=5)
        other, _ = generate(blob_spec, 30, 2, seed=6)
        for a, b in zip(first, again):
            np.testing.assert_array_equal(a.frames, b.frames)
        assert not np.array_equal(first[0].frames, other[0].frames)

    def test_prefix_of_longer_count(self, blob_spec):
        few, _ = generate(blob_spec, 30, 1, seed=5)
        many, _ = generate(blob_spec, 30, 3, seed=5)
        np.testing.assert_array_equal(few[0].frames, many[0].frames)

    def test_lag_two_traces(self, lag2_spec):
        _, traces = generate(lag2_spec, 20, 2, seed=2)
        for trace in traces:
            np.testing.assert_array_equal(trace.lags, [1, 1] + [2] * 18)
            assert set(trace.states) <= {0, 1}
            assert trace.to_dict()["lags"][2] == 2

    def test_transition_frequencies(self, blob_spec):
        _, traces = generate(blob_spec, 1000, 50, seed=11)
        counts = np.zeros((2, 2))
        for trace in traces:
            np.add.at(counts, (trace.states[:-1], trace.states[1:]), 1)
        freq = counts / counts.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(freq, blob_spec.A_dep[0], atol=0.01)

    def test_emissions_follow_states(self, blob_spec):
        records, traces = generate(blob_spec, 200, 1, seed=4)
        frames, states = records[0].frames, traces[0].states
        means = [frames[states == i].mean(axis=0) for i in (0, 1)]
        np.testing.assert_allclose(means, [[0.0, 0.0], [6.0, -4.0]], atol=0.25)

    def test_count_zero(self, blob_spec):
        assert generate(blob_spec, 10, 0, seed=1) == ([], [])

    def test_invalid(self, blob_spec):
        with pytest.raises(ValidationError):
            generate(blob_spec, 0, 1, seed=1)
        with pytest.raises(ValidationError):
            generate(blob_spec, 5, -1, seed=1)

    def test_save_traces(self, lag2_spec, tmp_path):
        _, traces = generate(lag2_spec, 4, 2, seed=3)
        path = tmp_path / "traces.jsonl"
        save_traces(path, traces)
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert lines[1]["id"] == "seq-1"
        assert lines[1]["lags"] == [1, 1, 2, 2]
        assert lines[1]["states"] == [int(s) for s in traces[1].states]
