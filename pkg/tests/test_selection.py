import numpy as np
import pytest

from speechscreen.errors import ConfigError
from speechscreen.selection import (
    ImportanceLedger,
    SelectionResult,
    ledger_from_dict,
    ledger_to_dict,
    ledger_write_csv,
    rank_and_cut,
    run_protocol,
    select_top_k,
    selection_from_dict,
    selection_to_dict,
)
from speechscreen.synthetic import generate_synthetic, informative_indices


def make_ledger(true, perm, names=None):
    true = np.asarray(true, dtype=float)
    n, repeats = true.shape
    return ImportanceLedger(
        model_id="ridge",
        feature_names=tuple(names) if names else tuple(f"f{i}" for i in range(n)),
        true_medians=true,
        perm_medians=np.asarray(perm, dtype=float),
        seeds=tuple(range(repeats)),
        validation_accuracy=np.zeros((repeats, 5)),
    )


class TestRunProtocol:
    def test_ledger_dimensions_at_published_repeat_count(self):
        ds = generate_synthetic(20, 6, 1, seed=0)
        ledger = run_protocol(ds, "ridge", master_seed=1, n_repeats=100)
        assert ledger.true_medians.shape == (6, 100)
        assert ledger.perm_medians.shape == (6, 100)
        assert len(ledger.seeds) == 100
        assert ledger.validation_accuracy.shape == (100, 5)

    def test_deterministic_for_master_seed(self):
        ds = generate_synthetic(20, 8, 2, seed=1)
        a = run_protocol(ds, "ridge", master_seed=7, n_repeats=5)
        b = run_protocol(ds, "ridge", master_seed=7, n_repeats=5)
        assert (a.true_medians == b.true_medians).all()
        assert (a.perm_medians == b.perm_medians).all()
        assert a.seeds == b.seeds

    def test_different_master_seed_differs(self):
        ds = generate_synthetic(20, 8, 2, seed=1)
        a = run_protocol(ds, "ridge", master_seed=7, n_repeats=5)
        b = run_protocol(ds, "ridge", master_seed=8, n_repeats=5)
        assert not (a.true_medians == b.true_medians).all()

    def test_parallel_matches_serial_bitwise(self):
        ds = generate_synthetic(20, 8, 2, seed=2)
        serial = run_protocol(ds, "ridge", master_seed=3, n_repeats=6)
        parallel = run_protocol(ds, "ridge", master_seed=3, n_repeats=6, n_jobs=3)
        assert (serial.true_medians == parallel.true_medians).all()
        assert (serial.perm_medians == parallel.perm_medians).all()
        assert (serial.validation_accuracy == parallel.validation_accuracy).all()

    @pytest.mark.parametrize("model_id", ["ridge", "emlm", "svm"])
    def test_planted_features_beat_their_null(self, model_id):
        # mean true importance above the 95th percentile of the feature's own
        # permuted medians, for every planted feature
        ds = generate_synthetic(60, 200, 5, seed=3)
        ledger = run_protocol(ds, model_id, master_seed=11, n_repeats=20, n_jobs=2)
        planted = informative_indices(ds)
        assert len(planted) == 5
        for f in planted:
            threshold = np.percentile(ledger.perm_medians[f], 95)
            assert ledger.true_medians[f].mean() > threshold

    def test_validation_accuracy_in_unit_interval(self):
        ds = generate_synthetic(20, 6, 2, seed=4)
        ledger = run_protocol(ds, "ridge", master_seed=5, n_repeats=3)
        assert (ledger.validation_accuracy >= 0.0).all()
        assert (ledger.validation_accuracy <= 1.0).all()


class TestRankAndCut:
    def test_maximal_separation_is_selected(self):
        repeats = 100
        true = np.vstack([np.ones(repeats), np.zeros(repeats)])
        perm = np.zeros((2, repeats))
        result = rank_and_cut(make_ledger(true, perm))
        assert result.ranked_features[0] == 0
        assert result.p_values[0] < 0.05
        assert 0 in result.selected

    def test_cutoff_is_strict_first_failure(self):
        repeats = 100
        rng = np.random.default_rng(0)
        noise = rng.standard_normal(repeats) * 1e-3
        true = np.vstack([
            np.ones(repeats) * 3.0,        # rank 0: rejects
            np.ones(repeats) * 2.0 + noise,  # rank 1: fails (same dist as its perm)
            np.ones(repeats) * 1.0,        # rank 2: would reject but is never reached
        ])
        perm = np.vstack([
            np.zeros(repeats),
            np.ones(repeats) * 2.0 + rng.standard_normal(repeats) * 1e-3,
            np.zeros(repeats),
        ])
        result = rank_and_cut(make_ledger(true, perm))
        assert result.ranked_features == (0, 1, 2)
        assert result.cutoff_index == 1
        assert result.selected == (0,)
        assert result.p_values[2] < 0.05  # confirms rank 2 would have rejected

    def test_noise_only_cutoff_near_zero(self):
        hits = 0
        for seed in range(10):
            ds = generate_synthetic(40, 60, 0, seed=seed)
            ledger = run_protocol(ds, "ridge", master_seed=seed, n_repeats=20, n_jobs=2)
            if rank_and_cut(ledger).cutoff_index <= 5:
                hits += 1
        assert hits >= 9

    def test_default_significance_is_five_percent(self):
        import inspect

        assert inspect.signature(rank_and_cut).parameters["significance"].default == 0.05

    def test_ranking_ties_break_by_catalog_order(self):
        repeats = 10
        true = np.vstack([np.ones(repeats), np.ones(repeats), np.ones(repeats) * 2])
        perm = np.zeros((3, repeats))
        result = rank_and_cut(make_ledger(true, perm))
        assert result.ranked_features == (2, 0, 1)


class TestSelectTopK:
    def test_k_equals_feature_count(self):
        ledger = make_ledger(np.random.default_rng(1).random((7, 10)), np.zeros((7, 10)))
        assert sorted(select_top_k(ledger, 7)) == list(range(7))

    def test_prefix_nesting(self):
        ledger = make_ledger(np.random.default_rng(2).random((20, 10)), np.zeros((20, 10)))
        for k1, k2 in [(1, 5), (5, 10), (10, 20)]:
            assert select_top_k(ledger, k1) == select_top_k(ledger, k2)[:k1]

    def test_k_out_of_range(self):
        ledger = make_ledger(np.zeros((3, 4)), np.zeros((3, 4)))
        with pytest.raises(ConfigError):
            select_top_k(ledger, 0)
        with pytest.raises(ConfigError):
            select_top_k(ledger, 4)


class TestSerialization:
    def test_ledger_round_trip(self):
        ds = generate_synthetic(15, 5, 1, seed=6)
        ledger = run_protocol(ds, "ridge", master_seed=2, n_repeats=4)
        back = ledger_from_dict(ledger_to_dict(ledger))
        assert (back.true_medians == ledger.true_medians).all()
        assert (back.perm_medians == ledger.perm_medians).all()
        assert back.feature_names == ledger.feature_names
        assert back.seeds == ledger.seeds

    def test_ledger_csv_layout(self, tmp_path):
        ledger = make_ledger([[1.0, 2.0]], [[0.5, 0.25]], names=["only"])
        path = tmp_path / "ledger.csv"
        ledger_write_csv(ledger, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "feature,repeat,true_median,perm_median"
        assert lines[1] == "only,0,1.0,0.5"
        assert len(lines) == 3

    def test_selection_round_trip(self):
        result = SelectionResult(ranked_features=(2, 0, 1), p_values=(0.001, 0.3, 0.2),
                                 cutoff_index=1, significance=0.05)
        back = selection_from_dict(selection_to_dict(result))
        assert back == result
        assert back.selected == (2,)
