import math

import numpy as np
import pytest

from dcb_arena.agents import Hyperparameters
from dcb_arena.dataset import Dataset, n_configs
from dcb_arena.deployment import Bss, MacParams, build_deployment
from dcb_arena.errors import ValidationError
from dcb_arena.harness import (
    DatasetEnvironment,
    EnvSpec,
    RunConfig,
    RunLog,
    RunRow,
    aggregate,
    build_agents,
    normalized_gain,
    run_episode,
    run_sweep,
    tau,
    write_runlog_csv,
    write_summary_csv,
)
from dcb_arena.seeding import rng_stream
from dcb_arena.spectrum import Action, InterferenceMatrix, action_index


def single_bss_deployment(load=50.0):
    return build_deployment(
        4, [Bss("A", load, 12000)], InterferenceMatrix.from_rows([[0]])
    )


def pair_deployment_obj():
    return build_deployment(
        4,
        [Bss("A", 50.0, 12000), Bss("B", 50.0, 12000)],
        InterferenceMatrix.from_rows([[0, 80], [80, 0]]),
    )


def synthetic_single_bss_dataset(sigma_by_arm, load=50.0):
    """Dataset for one BSS whose throughput encodes the given per-arm sigma."""
    records = np.array([[s * load] for s in sigma_by_arm])
    assert records.shape[0] == n_configs(4, 1)
    return Dataset("synthetic", 4, 1, 1.0, 1, records)


def synthetic_pair_dataset(table, load=50.0):
    records = np.zeros((144, 2))
    for (ia, ib), (sa, sb) in table.items():
        cid = ia + ib * 12
        records[cid] = (sa * load, sb * load)
    return Dataset("synthetic", 4, 2, 1.0, 1, records)


# ------------------------------------------------------------- gain

def test_normalized_gain_examples():
    assert np.allclose(normalized_gain([1.0, 0.5]), [1.0, 0.75])
    assert np.allclose(normalized_gain([1.0] * 5), [1.0] * 5)
    assert np.allclose(normalized_gain([0.0] * 5), [0.0] * 5)


def test_normalized_gain_validation():
    with pytest.raises(ValidationError):
        normalized_gain([])
    with pytest.raises(ValidationError):
        normalized_gain([1.5])


# ------------------------------------------------------------- tau

def test_tau_examples():
    sig = np.array([[0.5, 1.0], [0.9, 0.9], [1.0, 1.0], [1.0, 1.0]])
    assert tau(sig, 0.99) == 3
    assert tau(sig, 2.0) is None
    assert tau(np.ones((4, 2)), 0.99) == 1


def test_tau_first_simultaneous_iteration():
    sig = np.zeros((10, 3))
    sig[4:, :] = 1.0
    assert tau(sig, 0.99) == 5


# ------------------------------------------------------------- aggregate

def _log_from_sigma(sig):
    n_seeds, iterations, n_bss = sig.shape
    rows = [
        RunRow(s, t + 1, w, 1, 1, float(sig[s, t, w]), 0.0, 0)
        for s in range(n_seeds)
        for t in range(iterations)
        for w in range(n_bss)
    ]
    return RunLog(n_seeds, iterations, n_bss, rows)


def test_aggregate_constant_sigmas():
    sig = np.zeros((1, 5, 2))
    sig[:, :, 0] = 1.0
    sig[:, :, 1] = 0.5
    summary = aggregate(_log_from_sigma(sig))
    assert np.allclose(summary.mean_gain, 0.75)
    assert np.allclose(summary.worst_gain, 0.5)


def test_aggregate_symmetric_bss_worst_equals_mean():
    rng = rng_stream("agg-sym")
    column = rng.random((2, 6, 1))
    sig = np.repeat(column, 3, axis=2)  # all BSSs identical
    summary = aggregate(_log_from_sigma(sig))
    assert np.allclose(summary.worst_gain, summary.mean_gain)


def test_aggregate_min_then_avg_of_two_seeds():
    sig = np.zeros((2, 4, 2))
    sig[0, :, 0], sig[0, :, 1] = 0.4, 0.9  # seed 0 min curve: 0.4
    sig[1, :, 0], sig[1, :, 1] = 0.6, 0.9  # seed 1 min curve: 0.6
    summary = aggregate(_log_from_sigma(sig), "min-then-avg")
    assert np.allclose(summary.worst_gain, 0.5)


def test_aggregate_modes_differ_when_worst_bss_varies_by_seed():
    sig = np.zeros((2, 3, 2))
    sig[0, :, 0], sig[0, :, 1] = 0.2, 1.0
    sig[1, :, 0], sig[1, :, 1] = 1.0, 0.2
    min_avg = aggregate(_log_from_sigma(sig), "min-then-avg")
    avg_min = aggregate(_log_from_sigma(sig), "avg-then-min")
    assert np.allclose(min_avg.worst_gain, 0.2)
    assert np.allclose(avg_min.worst_gain, 0.6)


def test_aggregate_worst_never_exceeds_mean():
    rng = rng_stream("agg-rand")
    sig = rng.random((5, 30, 4))
    for mode in ("min-then-avg", "avg-then-min"):
        summary = aggregate(_log_from_sigma(sig), mode)
        assert (summary.worst_gain <= summary.mean_gain + 1e-12).all()


def test_aggregate_rejects_ragged_log():
    log = _log_from_sigma(np.ones((1, 3, 2)))
    log.rows.pop()
    with pytest.raises(ValidationError):
        aggregate(log)


# ------------------------------------------------------------- episodes

def test_all_static_agents_log_identical_actions():
    ds = synthetic_pair_dataset(
        {(a, b): (0.6, 0.7) for a in range(12) for b in range(12)}
    )
    deployment = pair_deployment_obj()
    env = DatasetEnvironment(ds, deployment)
    hyper = Hyperparameters(static_action=Action(2, 2))
    agents = [
        build_agents(("static", "static"), 4, 0, 0, hyper)[w] for w in range(2)
    ]
    rows = run_episode(env, agents, 10, 0, episode_seed=0)
    for row in rows:
        assert (row.primary, row.max_bw) == (2, 2)
        assert row.sigma == (0.6 if row.bss == 0 else 0.7)


def test_dataset_mode_sigma_equals_stored_row_exactly():
    table = {(a, b): ((a + 1) / 13.0, (b + 1) / 13.0) for a in range(12) for b in range(12)}
    ds = synthetic_pair_dataset(table)
    env = DatasetEnvironment(ds, pair_deployment_obj())
    sigmas, occ = env.evaluate((Action(3, 2), Action(1, 4)), 1, 0)
    ia, ib = action_index(Action(3, 2), 4), action_index(Action(1, 4), 4)
    assert sigmas == [pytest.approx((ia + 1) / 13.0), pytest.approx((ib + 1) / 13.0)]
    assert occ is None


def test_single_agent_bandit_episode_matches_analytic_replay():
    # One BSS, one perfect arm. Replay the bandit analytically with the same
    # derived rng stream and predict every action; after the good arm is
    # first observed, greedy choices must stick to it.
    best_arm = 7
    sigma_by_arm = [0.0] * 12
    sigma_by_arm[best_arm] = 1.0
    ds = synthetic_single_bss_dataset(sigma_by_arm)
    deployment = single_bss_deployment()
    env = DatasetEnvironment(ds, deployment)

    base_seed, seed_index, iterations = 0, 3, 200
    agents = build_agents(("egreedy",), 4, base_seed, seed_index, Hyperparameters())
    rows = run_episode(env, agents, iterations, seed_index, episode_seed=0)

    # Independent replay with the identical stream.
    rng = rng_stream("agent", base_seed, seed_index, 0)
    means = [0.0] * 12
    counts = [0] * 12
    predicted = []
    for t in range(1, iterations + 1):
        eps = 1.0 / math.sqrt(t)
        if rng.random() < eps:
            arm = int(rng.integers(0, 12))
        else:
            best = max(means)
            ties = [i for i, m in enumerate(means) if m == best]
            arm = ties[0] if len(ties) == 1 else int(ties[rng.integers(0, len(ties))])
        predicted.append(arm)
        r = sigma_by_arm[arm]
        counts[arm] += 1
        means[arm] += (r - means[arm]) / counts[arm]

    got = [action_index(Action(row.primary, row.max_bw), 4) for row in rows]
    assert got == predicted

    seen_best = False
    for t, (arm, row) in enumerate(zip(predicted, rows), start=1):
        if seen_best and row.epsilon < 1.0:
            # deviations from the best arm can only be exploration draws
            if arm != best_arm:
                assert True  # exploration is allowed at rate epsilon
        if arm == best_arm:
            seen_best = True
    assert seen_best
    # Greedy iterations after first success always pick the best arm:
    # verify on the replay by recomputing the greedy set.
    means2 = [0.0] * 12
    counts2 = [0] * 12
    seen = False
    for arm in predicted:
        if seen and max(means2) > 0:
            assert means2.index(max(means2)) == best_arm
        r = sigma_by_arm[arm]
        counts2[arm] += 1
        means2[arm] += (r - means2[arm]) / counts2[arm]
        if arm == best_arm:
            seen = True


def test_run_episode_determinism():
    ds = synthetic_pair_dataset(
        {(a, b): ((a % 3) / 3.0, (b % 4) / 4.0) for a in range(12) for b in range(12)}
    )
    env_spec = EnvSpec(pair_deployment_obj(), MacParams(), dataset=ds)
    config = RunConfig(algorithms=("egreedy", "qlearning-2"), iterations=50, seeds=4)
    log1 = run_sweep(env_spec, config)
    log2 = run_sweep(env_spec, config)
    assert log1.rows == log2.rows


def test_run_sweep_thread_count_does_not_change_rows(tmp_path):
    ds = synthetic_pair_dataset(
        {(a, b): (a / 12.0, b / 12.0) for a in range(12) for b in range(12)}
    )
    env_spec = EnvSpec(pair_deployment_obj(), MacParams(), dataset=ds)
    serial = run_sweep(env_spec, RunConfig(("egreedy", "egreedy"), 30, seeds=6, threads=1))
    threaded = run_sweep(env_spec, RunConfig(("egreedy", "egreedy"), 30, seeds=6, threads=3))
    assert serial.rows == threaded.rows

    write_runlog_csv(tmp_path / "a.csv", serial)
    write_runlog_csv(tmp_path / "b.csv", threaded)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_heuristic_rejected_in_dataset_mode():
    ds = synthetic_pair_dataset({(a, b): (0.5, 0.5) for a in range(12) for b in range(12)})
    env_spec = EnvSpec(pair_deployment_obj(), MacParams(), dataset=ds)
    with pytest.raises(ValidationError, match="heuristic"):
        run_sweep(env_spec, RunConfig(("heuristic", "egreedy"), 5, seeds=1))


def test_algorithm_count_must_match_bss():
    ds = synthetic_pair_dataset({(a, b): (0.5, 0.5) for a in range(12) for b in range(12)})
    env_spec = EnvSpec(pair_deployment_obj(), MacParams(), dataset=ds)
    with pytest.raises(ValidationError):
        run_sweep(env_spec, RunConfig(("egreedy",), 5, seeds=1))


def test_live_mode_with_heuristic_smoke():
    deployment = pair_deployment_obj()
    env_spec = EnvSpec(
        deployment,
        MacParams(),
        dataset=None,
        iteration_seconds=0.05,
        record_occupancy=True,
    )
    config = RunConfig(("heuristic", "static"), iterations=4, seeds=2, iteration_seconds=0.05)
    log = run_sweep(env_spec, config)
    assert len(log.rows) == 2 * 4 * 2
    for row in log.rows:
        assert 0.0 <= row.sigma <= 1.0


def test_live_mode_is_deterministic_and_iteration_seeded():
    deployment = single_bss_deployment()
    env_spec = EnvSpec(deployment, MacParams(), dataset=None, iteration_seconds=0.05)
    config = RunConfig(("static",), iterations=3, seeds=1,
                       hyper=Hyperparameters(static_action=Action(1, 1)))
    log1 = run_sweep(env_spec, config)
    log2 = run_sweep(env_spec, config)
    assert log1.rows == log2.rows
    # saturated single channel: per-iteration seeds differ, so sigma varies
    sigmas = {row.sigma for row in log1.rows}
    assert len(sigmas) > 1


def test_csv_writers_produce_documented_headers(tmp_path):
    sig = np.full((1, 2, 2), 0.5)
    log = _log_from_sigma(sig)
    write_runlog_csv(tmp_path / "runlog.csv", log)
    write_summary_csv(tmp_path / "summary.csv", aggregate(log))
    runlog = (tmp_path / "runlog.csv").read_text().splitlines()
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert runlog[0] == "seed,iteration,bss,primary,max_bw,sigma,epsilon,context"
    assert runlog[1] == "0,1,0,1,1,0.500000,0.000000,0"
    assert summary[0] == "iteration,mean_gain,worst_gain"
    assert summary[1] == "1,0.500000,0.500000"
