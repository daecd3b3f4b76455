import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cnnae.dataset import (BINARY_FEATURES, BLOOD_TYPES, CSV_COLUMNS, ENCODED_COLUMNS, GENDERS,
                           DataError, EncodedDataset, GeneratorConfig, PatientRecord, encode,
                           encode_all, format_csv, format_encoded_csv, generate_synthetic,
                           parse_csv, parse_encoded_csv, partition_groups, stratified_kfold,
                           stratified_split, summarize, write_csv)


def make_record(gender="Male", age=40, blood="O+", flags=None, outcome="Recovered"):
    flags = flags or {}
    return PatientRecord(gender, age, blood, tuple(flags.get(n, False) for n in BINARY_FEATURES), outcome)


records_strategy = st.builds(
    PatientRecord,
    st.sampled_from(GENDERS),
    st.integers(11, 95),
    st.sampled_from(BLOOD_TYPES),
    st.tuples(*[st.booleans() for _ in BINARY_FEATURES]),
    st.sampled_from(("Recovered", "Deceased")),
)


def _write(tmp_path, text):
    path = tmp_path / "cohort.csv"
    path.write_text(text)
    return path


class TestCsv:
    def test_default_cohort_parses(self, tmp_path, default_records):
        path = tmp_path / "c.csv"
        write_csv(default_records, path)
        assert len(parse_csv(path)) == 320

    def test_header_layout(self, default_records):
        assert format_csv(default_records[:1]).splitlines()[0].split(",")[:3] == ["Gender", "Age", "Blood Type"]
        assert len(CSV_COLUMNS) == 38

    def test_age_out_of_range(self, tmp_path):
        text = format_csv([make_record()]).replace(",40,", ",7,")
        with pytest.raises(DataError, match=r"\[11, 95\]") as err:
            parse_csv(_write(tmp_path, text))
        assert "row 2" in str(err.value) and "Age" in str(err.value)

    def test_bad_blood_type_lists_values(self, tmp_path):
        text = format_csv([make_record()]).replace(",O+,", ",C+,")
        with pytest.raises(DataError) as err:
            parse_csv(_write(tmp_path, text))
        for value in BLOOD_TYPES:
            assert value in str(err.value)

    def test_bad_binary_level(self, tmp_path):
        text = format_csv([make_record()]).replace(",No,", ",Maybe,", 1)
        with pytest.raises(DataError, match="Maybe"):
            parse_csv(_write(tmp_path, text))

    def test_missing_column(self, tmp_path):
        lines = format_csv([make_record()]).splitlines()
        header = lines[0].replace(",Tobacco", "")
        row = lines[1].rsplit(",", 2)
        with pytest.raises(DataError, match="missing"):
            parse_csv(_write(tmp_path, header + "\n" + row[0] + "," + row[2] + "\n"))

    def test_non_integer_age(self, tmp_path):
        text = format_csv([make_record()]).replace(",40,", ",40.5,")
        with pytest.raises(DataError, match="whole years"):
            parse_csv(_write(tmp_path, text))

    def test_cbc_levels(self):
        text = format_csv([make_record(flags={"CBC": True})])
        assert "Abnormal" in text

    @given(st.lists(records_strategy, min_size=1, max_size=8))
    def test_round_trip(self, records):
        import tempfile
        from pathlib import Path
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "r.csv"
            path.write_text(format_csv(records))
            assert parse_csv(path) == records

    def test_encoded_round_trip(self, tmp_path, default_data):
        path = tmp_path / "enc.csv"
        path.write_text(format_encoded_csv(default_data[np.arange(5)]))
        back = parse_encoded_csv(path)
        np.testing.assert_allclose(back.X, default_data.X[:5], atol=5e-7)
        assert back.columns == ENCODED_COLUMNS


class TestEncode:
    def test_young_male_o_positive(self):
        x = encode(make_record("Male", 11, "O+")).x
        np.testing.assert_array_equal(x, [0, 0, 1, 1, 1] + [0] * 34)

    def test_old_female_a_negative(self):
        x = encode(make_record("Female", 95, "A-")).x
        np.testing.assert_array_equal(x, [1, 1, 0, 0, 0] + [0] * 34)

    def test_ab_positive_with_diabetes(self):
        x = encode(make_record("Male", 53, "AB+", {"Diabetes": True})).x
        assert x[1] == 0.5
        np.testing.assert_array_equal(x[2:5], [1, 0, 1])
        assert x[ENCODED_COLUMNS.index("Diabetes")] == 1
        assert x.sum() == 0.5 + 2 + 1

    def test_width_and_label(self):
        s = encode(make_record(outcome="Deceased"))
        assert s.x.shape == (39,) and s.y == 1

    @given(records_strategy, records_strategy)
    def test_injective(self, a, b):
        same = np.array_equal(encode(a).x, encode(b).x) and encode(a).y == encode(b).y
        assert same == (a == b)

    @given(records_strategy)
    def test_range(self, record):
        x = encode(record).x
        assert np.all((x >= 0) & (x <= 1))


class TestGenerator:
    def test_default_counts(self, default_records):
        assert GeneratorConfig.load().seed == 7
        outcomes = [r.outcome for r in default_records]
        assert outcomes.count("Recovered") == 300 and outcomes.count("Deceased") == 20

    def test_female_fraction(self, default_records):
        assert abs(summarize(default_records).female_fraction - 0.55) <= 0.06

    def test_minimal_counts(self):
        cfg = GeneratorConfig.load()
        cfg.n_recovered = cfg.n_deceased = 1
        assert len(generate_synthetic(cfg)) == 2

    def test_reproducible(self, default_records):
        assert generate_synthetic(GeneratorConfig.load()) == default_records

    @pytest.mark.parametrize("a,b", [(1, 2), (3, 4), (5, 6), (7, 8), (9, 10)])
    def test_seeds_differ(self, a, b):
        ca, cb = GeneratorConfig.load(), GeneratorConfig.load()
        ca.seed, cb.seed = a, b
        assert generate_synthetic(ca) != generate_synthetic(cb)

    def test_round_trip_config(self):
        cfg = GeneratorConfig.load()
        assert GeneratorConfig.from_dict(cfg.to_dict()) == cfg

    def test_age_bounds_respected(self, default_records):
        ages = [r.age for r in default_records]
        assert min(ages) >= 11 and max(ages) <= 95

    def test_invalid_probabilities(self):
        with pytest.raises(ValueError):
            GeneratorConfig(binary_probabilities={"Cancer": [0.2, 1.5]})
        with pytest.raises(ValueError):
            GeneratorConfig(binary_probabilities={"Not a feature": 0.1})
        with pytest.raises(ValueError):
            GeneratorConfig(n_deceased=0)


class TestPartition:
    def test_paper_scale_groups(self, rng):
        groups = partition_groups(300, 10, rng)
        assert [len(g) for g in groups] == [30] * 10

    def test_singletons(self, rng):
        assert [len(g) for g in partition_groups(10, 10, rng)] == [1] * 10

    def test_eleven(self, rng):
        assert sorted(len(g) for g in partition_groups(11, 10, rng)) == [1] * 9 + [2]

    def test_too_few(self, rng):
        with pytest.raises(ValueError):
            partition_groups(5, 10, rng)

    @given(st.integers(1, 60), st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_is_partition(self, n, k, seed):
        if k > n:
            return
        groups = partition_groups(n, k, np.random.default_rng(seed))
        joined = np.concatenate(groups)
        assert sorted(joined.tolist()) == list(range(n))
        assert max(map(len, groups)) - min(map(len, groups)) <= 1


class TestStratified:
    def test_augmented_scale(self, rng):
        labels = np.array([0] * 300 + [1] * 220)
        for fold in stratified_kfold(labels, 10, rng):
            assert (labels[fold] == 0).sum() == 30 and (labels[fold] == 1).sum() == 22

    def test_single_class_rejected(self, rng):
        with pytest.raises(ValueError, match="Deceased"):
            stratified_kfold(np.zeros(20, dtype=int), 10, rng)

    def test_k_one(self, rng):
        labels = np.array([0, 0, 1, 0, 1])
        (fold,) = stratified_kfold(labels, 1, rng)
        np.testing.assert_array_equal(fold, np.arange(5))

    @given(st.integers(2, 40), st.integers(2, 15), st.integers(1, 10), st.integers(0, 2**32 - 1))
    def test_is_partition(self, n_rec, n_dec, k, seed):
        if min(n_rec, n_dec) < k:
            return
        labels = np.array([0] * n_rec + [1] * n_dec)
        np.random.default_rng(seed).shuffle(labels)
        folds = stratified_kfold(labels, k, np.random.default_rng(seed))
        assert sorted(np.concatenate(folds).tolist()) == list(range(len(labels)))
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 2

    def test_split_sizes(self, rng):
        labels = np.array([0] * 270 + [1] * 198)
        rest, held = stratified_split(labels, 0.2, rng)
        assert len(rest) == 374 and len(held) == 94
        assert not set(rest) & set(held)


class TestSummary:
    def test_singleton(self):
        s = summarize([make_record(age=40)])
        assert s.age_mean == 40 and s.age_std == 0

    def test_two(self):
        s = summarize([make_record(age=30), make_record(age=50)])
        assert s.age_mean == 40 and s.age_std == pytest.approx(14.142, abs=1e-3)

    def test_empty(self):
        with pytest.raises(ValueError):
            summarize([])

    def test_default_cohort(self, default_records):
        s = summarize(default_records)
        assert s.n_total == 320 and s.n_deceased == 20
        assert 40 < s.age_mean < 60


class TestEncodedDataset:
    def test_subset_and_concat(self, default_data):
        a, b = default_data[np.arange(3)], default_data[np.arange(3, 5)]
        c = EncodedDataset.concat([a, b])
        np.testing.assert_array_equal(c.X, default_data.X[:5])
        assert len(c) == 5 and c.counts() == (5, 0)

    def test_mismatched_columns(self):
        with pytest.raises(ValueError):
            EncodedDataset(np.zeros((2, 3)), [0, 1])

    def test_encode_all(self, default_records):
        data = encode_all(default_records)
        assert data.X.shape == (320, 39) and data.counts() == (300, 20)
