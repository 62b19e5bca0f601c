import numpy as np
import pandas as pd
import pytest

from analysis.strategies import run_strategy
from scenarios.scenario_library import oracle
from sem.linear_sem import implied_covariance
from sem.strategy import Strategy
from simulation.dataset import ColumnFlag, Dataset, Provenance
from simulation.mc_engine import (
    ReplicationSummary,
    derive_seed,
    replicate_estimates,
    run_replications,
    sample_dataset,
    summarize,
)
from utils.errors import EmptySampleError, UserInputError, UsageError


def test_empty_dataset_keeps_schema(scenarios):
    data = sample_dataset(scenarios["1A"].sem, 0, seed=1)
    assert data.n == 0
    assert data.columns == ["WC0", "IC0", "IC1"]


def test_same_seed_same_sample(scenarios):
    sem = scenarios["3B"].sem
    a = sample_dataset(sem, 100, seed=99).frame
    b = sample_dataset(sem, 100, seed=99).frame
    pd.testing.assert_frame_equal(a, b)
    assert not sample_dataset(sem, 100, seed=100).frame.equals(a)


def test_provenance_and_flags(scenarios):
    data = sample_dataset(scenarios["1B"].sem, 10, seed=4, scenario_id="1B")
    assert data.provenance == Provenance(scenario_id="1B", seed=4, n=10)
    assert data.flags["U"] is ColumnFlag.Latent
    assert data.flags["WC0"] is ColumnFlag.Observed


def test_change_score_column_is_exact(scenarios):
    sem = scenarios["2A"].sem.with_change_score("IC0", "IC1", "DIC")
    data = sample_dataset(sem, 500, seed=8)
    assert data.flags["DIC"] is ColumnFlag.Derived
    np.testing.assert_array_equal(data.frame["DIC"], data.frame["IC1"] - data.frame["IC0"])


def test_derived_column_must_match():
    frame = pd.DataFrame({"A": [1.0, 2.0], "B": [3.0, 4.0], "D": [2.0, 0.0]})
    with pytest.raises(UserInputError, match="does not match"):
        Dataset(
            frame=frame,
            flags={"A": ColumnFlag.Observed, "B": ColumnFlag.Observed, "D": ColumnFlag.Derived},
            derivations={"D": (("B", 1.0), ("A", -1.0))},
            provenance=Provenance(n=2),
        )


@pytest.mark.parametrize("sid", ["1A", "1B", "2A", "2B", "3A", "3B", "3A+", "3B+"])
def test_sample_correlation_matches_implied(scenarios, sid):
    sem = scenarios[sid].sem
    data = sample_dataset(sem, 1_000_000, seed=31)
    implied = implied_covariance(sem).values
    sample = np.corrcoef(data.frame.to_numpy(), rowvar=False)
    assert np.abs(sample - implied).max() < 0.005


def test_sample_means_and_sds(scenarios):
    data = sample_dataset(scenarios["1A"].sem, 200_000, seed=12)
    assert data.frame["WC0"].mean() == pytest.approx(9.5, abs=0.02)
    assert data.frame["IC1"].mean() == pytest.approx(4.2, abs=0.01)
    assert data.frame["IC0"].std() == pytest.approx(0.74, abs=0.01)


@pytest.mark.parametrize("bad", [{"n": -1, "seed": 0}, {"n": 5, "seed": -1}, {"n": 5, "seed": 2**64}])
def test_sample_arguments(scenarios, bad):
    with pytest.raises(UsageError):
        sample_dataset(scenarios["1A"].sem, **bad)


# -- summaries -------------------------------------------------------------


def test_summarize_interpolates():
    assert summarize([1, 2, 3])[0] == 2
    assert summarize([1, 2, 3, 4])[0] == 2.5
    assert summarize([4, 1, 3, 2]) == summarize([1, 2, 3, 4])


def test_summarize_limits_of_single_value():
    assert summarize([0.2]) == (0.2, 0.2, 0.2)


def test_summarize_centiles():
    median, lower, upper = summarize(np.arange(1, 10001))
    assert median == 5000.5
    assert lower == pytest.approx(250.975)
    assert upper == pytest.approx(9750.025)


def test_summarize_empty():
    with pytest.raises(EmptySampleError):
        summarize([])


def test_summary_limits_must_bracket_median():
    with pytest.raises(ValueError):
        ReplicationSummary(scenario_id="1A", strategy=Strategy.ChangeScore, reps=1, median=0.2, lower=0.3, upper=0.4)


# -- replication ------------------------------------------------------------


def test_derive_seed_is_stable():
    assert derive_seed(7, 1) == derive_seed(7, 1)
    assert derive_seed(7, 1) != derive_seed(7, 2)
    assert derive_seed(7, 1) != derive_seed(8, 1)
    assert 0 <= derive_seed(2**64 - 1, 10000) < 2**64


def test_single_replicate(scenarios):
    summary = run_replications(scenarios["1A"], Strategy.ChangeScore, n=50, reps=1, master_seed=3)
    assert summary.median == summary.lower == summary.upper
    assert summary.reps == 1


@pytest.mark.parametrize("workers", [4, 16])
def test_workers_do_not_change_results(scenarios, workers):
    spec = scenarios["3B+"]
    serial = replicate_estimates(spec, n=60, reps=40, master_seed=123, workers=1)
    parallel = replicate_estimates(spec, n=60, reps=40, master_seed=123, workers=workers)
    np.testing.assert_array_equal(serial.seeds, parallel.seeds)
    for strategy in Strategy:
        np.testing.assert_array_equal(serial.estimates[strategy], parallel.estimates[strategy])
        assert serial.summary(strategy) == parallel.summary(strategy)


def test_replicate_matches_direct_sampling(scenarios):
    spec = scenarios["2A"]
    run = replicate_estimates(spec, [Strategy.FollowUpAdjusted], n=80, reps=3, master_seed=5)
    data = sample_dataset(spec.sem, 80, derive_seed(5, 2))
    assert run.estimates[Strategy.FollowUpAdjusted][1] == run_strategy(
        data, Strategy.FollowUpAdjusted, "WC0", "IC0", "IC1"
    ).coefficient


def test_estimates_frame(scenarios):
    run = replicate_estimates(scenarios["1A"], n=30, reps=5, master_seed=1)
    frame = run.to_frame()
    assert list(frame.columns) == ["scenario", "replicate", "seed", "strategy", "estimate"]
    assert len(frame) == 15
    assert frame["replicate"].tolist()[:5] == [1, 2, 3, 4, 5]


@pytest.mark.parametrize("kwargs", [{"reps": 0}, {"n": 3}, {"master_seed": -1}])
def test_replication_arguments(scenarios, kwargs):
    with pytest.raises(UsageError):
        replicate_estimates(scenarios["1A"], **{"n": 50, "reps": 2, **kwargs})


def test_medians_close_to_oracle(scenarios):
    for spec in scenarios.values():
        run = replicate_estimates(spec, n=1000, reps=400, master_seed=77)
        expected = oracle(spec)
        for strategy in Strategy:
            assert run.summary(strategy).median == pytest.approx(expected[strategy], abs=0.005)


def test_change_score_limits_for_1a(scenarios):
    summary = run_replications(scenarios["1A"], Strategy.ChangeScore, n=1000, reps=2000, master_seed=20200101)
    assert summary.lower == pytest.approx(0.180, abs=0.005)
    assert summary.upper == pytest.approx(0.221, abs=0.005)
