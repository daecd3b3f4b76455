import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnnae.dataset import RAW_FEATURES, EncodedDataset, stratified_kfold
from cnnae.models import NaiveBayesModel, predict_from_scores
from cnnae.seeding import child_rng
from cnnae.selection import (MASK_ROW_ORDER, FeatureGroups, FitnessSpec, SearchConfig, WrapperFitness,
                             _initial_masks, exhaustive_best, ga_select, planted_problem, project,
                             pso_select, select_features, wrapper_fitness)

# a reference PSO selection: every feature except these six
PSO_DISCARDED = ("CBC", "Respiratory disease", "Corticosteroids", "Transplant",
                 "Trembling or Shakes", "Blindness and Tunnel vision")


def mask_of(names):
    return np.array([n in names for n in RAW_FEATURES])


class TestProject:
    def test_full_mask(self, default_data):
        assert project(default_data, np.ones(37, dtype=bool)).width == 39

    def test_age_only(self, default_data):
        out = project(default_data, mask_of({"Age"}))
        assert out.columns == ("Age",)
        np.testing.assert_array_equal(out.X[:, 0], default_data.X[:, 1])

    def test_blood_type_is_one_bit(self, default_data):
        assert project(default_data, mask_of({"Blood Type"})).width == 3

    def test_pso_table_column(self, default_data):
        mask = ~mask_of(set(PSO_DISCARDED))
        assert mask.sum() == 31
        assert project(default_data, mask).width == 33

    def test_empty_rejected(self, default_data):
        with pytest.raises(ValueError, match="no features"):
            project(default_data, np.zeros(37, dtype=bool))

    def test_wrong_length(self, default_data):
        with pytest.raises(ValueError, match="37 entries"):
            project(default_data, np.ones(36, dtype=bool))

    def test_generic_columns(self):
        groups = FeatureGroups.for_columns(("a", "b", "c"))
        assert len(groups) == 3 and groups.encoded_indices([0, 1, 1]).tolist() == [1, 2]


class TestFitness:
    def test_full_mask_matches_direct_cv(self, default_data):
        rng = np.random.default_rng(5)
        got = wrapper_fitness(np.ones(37, dtype=bool), default_data, rng=np.random.default_rng(5))
        fold_rng, _ = rng.spawn(2)
        accs = []
        for test in stratified_kfold(default_data.y, 3, fold_rng):
            train = np.setdiff1d(np.arange(len(default_data)), test)
            model = NaiveBayesModel.fit(default_data.X[train], default_data.y[train], [1])
            pred = predict_from_scores(model.posterior(default_data.X[test]))
            accs.append(np.mean(pred == default_data.y[test]))
        assert got == pytest.approx(np.mean(accs), abs=1e-12)

    def test_label_copy_is_perfect(self):
        data = planted_problem(1)
        X = np.column_stack([data.X, data.y])
        copy = EncodedDataset(X, data.y, columns=data.columns + ("label",))
        mask = np.zeros(11, dtype=bool)
        mask[-1] = True
        assert wrapper_fitness(mask, copy) == 1.0

    def test_deterministic(self, default_data):
        mask = mask_of({"Age", "Cancer", "Dyspnea"})
        assert wrapper_fitness(mask, default_data, rng=3) == wrapper_fitness(mask, default_data, rng=3)

    def test_memoized(self, default_data):
        fit = WrapperFitness(default_data, seed=1)
        mask = mask_of({"Age"})
        first = fit(mask)
        assert fit(mask.copy()) == first and fit.evaluations == 1

    def test_bounded(self, default_data):
        fit = WrapperFitness(default_data, seed=2)
        r = np.random.default_rng(0)
        for _ in range(10):
            mask = _initial_masks(1, 37, r)[0]
            assert 0.0 <= fit(mask) <= 1.0

    def test_empty_mask_rejected(self, default_data):
        with pytest.raises(ValueError):
            WrapperFitness(default_data)(np.zeros(37, dtype=bool))

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            FitnessSpec(folds=1)
        with pytest.raises(ValueError):
            FitnessSpec(kind="tree")


class TestConfig:
    def test_unknown_algorithm_lists_choices(self):
        with pytest.raises(ValueError, match=r"\{GA, PSO\}"):
            SearchConfig(algorithm="ABC")

    def test_population_limits(self):
        with pytest.raises(ValueError):
            SearchConfig(algorithm="GA", population=1)
        SearchConfig(algorithm="PSO", population=1)

    def test_round_trip(self):
        cfg = SearchConfig(algorithm="PSO", population=7)
        assert SearchConfig(**cfg.to_dict()) == cfg


class TestSearch:
    def test_ga_single_epoch_keeps_best_initial(self):
        fit = WrapperFitness(planted_problem(2), seed=4)
        result = ga_select(fit, SearchConfig("GA", population=2, epochs=1, seed=4))
        initial = _initial_masks(2, 10, child_rng(4, "ga"))
        assert result.fitness == max(fit(m) for m in initial)
        assert any(np.array_equal(result.mask, m) for m in initial)
        assert result.trace == [result.fitness]

    def test_frozen_swarm(self):
        fit = WrapperFitness(planted_problem(2), seed=4)
        cfg = SearchConfig("PSO", population=1, epochs=1, seed=4, inertia=0.0, c1=0.0, c2=0.0)
        result = pso_select(fit, cfg)
        np.testing.assert_array_equal(result.mask, _initial_masks(1, 10, child_rng(4, "pso"))[0])
        assert result.evaluations == 1

    @pytest.mark.parametrize("algorithm", ["GA", "PSO"])
    def test_trace_non_decreasing(self, algorithm):
        fit = WrapperFitness(planted_problem(3), seed=1)
        result = (ga_select if algorithm == "GA" else pso_select)(
            fit, SearchConfig(algorithm, population=6, epochs=12, seed=1))
        assert len(result.trace) == 12
        assert all(b >= a for a, b in zip(result.trace, result.trace[1:]))
        assert result.fitness == result.trace[-1] == fit(result.mask)

    @pytest.mark.parametrize("algorithm", ["GA", "PSO"])
    def test_reproducible(self, algorithm, default_data):
        cfg = SearchConfig(algorithm, population=4, epochs=3, seed=9)
        a, b = select_features(default_data, cfg), select_features(default_data, cfg)
        assert a.to_dict() == b.to_dict()

    @settings(max_examples=15)
    @given(st.integers(0, 2**16), st.sampled_from(["GA", "PSO"]))
    def test_result_never_empty(self, seed, algorithm):
        fit = WrapperFitness(planted_problem(seed % 5, n_samples=60), seed=seed)
        result = (ga_select if algorithm == "GA" else pso_select)(
            fit, SearchConfig(algorithm, population=3, epochs=4, seed=seed))
        assert result.mask.any()

    @pytest.mark.parametrize("algorithm", ["GA", "PSO"])
    def test_planted_recovered(self, algorithm):
        fit = WrapperFitness(planted_problem(1), seed=1)
        result = (ga_select if algorithm == "GA" else pso_select)(
            fit, SearchConfig(algorithm, population=20, epochs=50, seed=1))
        assert set(np.flatnonzero(result.mask)) >= {0, 1, 2}
        best, _ = exhaustive_best(fit)
        assert result.fitness == best

    def test_exhaustive_limit(self, default_data):
        with pytest.raises(ValueError):
            exhaustive_best(WrapperFitness(default_data))


class TestResult:
    def test_mask_csv_table_order(self, default_data):
        result = select_features(default_data, SearchConfig("GA", population=2, epochs=1, seed=1))
        rows = result.mask_csv().splitlines()
        assert rows[0] == "feature,selected" and len(rows) == 38
        assert [r.rsplit(",", 1)[0].strip('"') for r in rows[1:]] == list(MASK_ROW_ORDER)
        chosen = {r.rsplit(",", 1)[0].strip('"') for r in rows[1:] if r.endswith(",1")}
        assert chosen == set(result.selected)

    def test_generic_names_keep_order(self):
        fit = WrapperFitness(planted_problem(1), seed=1)
        result = ga_select(fit, SearchConfig("GA", population=2, epochs=1, seed=1))
        assert [r.split(",")[0] for r in result.mask_csv().splitlines()[1:]] == [f"f{j}" for j in range(10)]
