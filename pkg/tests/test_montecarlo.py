import math

import numpy as np
import pytest
from statsmodels.stats.proportion import proportion_confint

from ptqkd.errors import DomainError
from ptqkd.montecarlo import (
    BLOCK_SIZE,
    RunConfig,
    block_rng,
    count,
    crossing,
    rows_to_csv,
    rows_to_gnuplot,
    simulate,
    splitmix64,
    stream_key,
    sweep_alpha,
    sweep_eta,
    wilson_interval,
)
from ptqkd.ptcore import ALPHA_OPT, approach3_time
from ptqkd.errors import NoSolutionError


def test_splitmix64_reference_values():
    # first outputs of the reference generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_stream_keys_distinct():
    keys = {stream_key(s, i) for s in (0, 1, 2**63) for i in range(100)}
    assert len(keys) == 300
    a = block_rng(5, 3).random(4)
    assert np.array_equal(a, block_rng(5, 3).random(4))
    assert not np.array_equal(a, block_rng(5, 4).random(4))


@pytest.mark.parametrize("hits,n", [(0, 10), (10, 10), (7, 10), (750, 1000), (1, 3), (833_333, 1_000_000)])
def test_wilson_matches_statsmodels(hits, n):
    lo, hi = wilson_interval(hits, n)
    ref_lo, ref_hi = proportion_confint(hits, n, alpha=0.05, method="wilson")
    assert lo == pytest.approx(ref_lo, abs=1e-12)
    assert hi == pytest.approx(ref_hi, abs=1e-12)
    assert 0 <= lo <= hits / n <= hi <= 1


def test_wilson_domain():
    with pytest.raises(DomainError):
        wilson_interval(0, 0)
    with pytest.raises(DomainError):
        wilson_interval(5, 4)


@pytest.mark.parametrize("name", ["none", "hermitian", "approach2"])
def test_counts_independent_of_workers(name):
    strategy = RunConfig(strategy=name).build_strategy()
    n = 3 * BLOCK_SIZE + 17
    ref = count(strategy, n, seed=11, workers=1)
    assert ref["n"] == n
    for w in (2, 4):
        assert count(strategy, n, seed=11, workers=w) == ref


def test_seed_changes_results():
    s = RunConfig(strategy="hermitian").build_strategy()
    assert count(s, 5000, seed=1) != count(s, 5000, seed=2)


def test_simulate_no_eve():
    st = simulate(RunConfig(qubits=10_000, strategy="none", seed=3))
    assert st.qber == 0.0 and st.eve_accuracy is None
    assert st.exact_qber == 0.0


def test_simulate_single_qubit():
    for seed in range(10):
        st = simulate(RunConfig(qubits=1, strategy="hermitian", seed=seed))
        assert st.n == 1 and st.n_sifted in (0, 1)
        if st.n_sifted == 0:
            assert st.qber is None and st.eve_accuracy is None


def test_config_validation():
    with pytest.raises(DomainError):
        RunConfig(qubits=0)
    with pytest.raises(DomainError):
        RunConfig(strategy="clone")
    with pytest.raises(DomainError):
        RunConfig(seed=-1)
    assert "workers" not in RunConfig(workers=8).echo()


def test_loss_policy_fraction():
    st = simulate(RunConfig(qubits=100_000, strategy="approach2", eta=0.8, null_policy="loss", seed=5))
    assert abs(st.lost_fraction - 0.2) < 4 * math.sqrt(0.16 / 100_000)
    assert abs(st.eve_accuracy - 5 / 6) < 4 * math.sqrt(5 / 36 / st.n_sifted)


def test_sweep_alpha_feasibility_matches_time():
    cfg = RunConfig(qubits=1000, strategy="approach3")
    rows = sweep_alpha(0.3, 1.5, 13, cfg, sample=False, include_boundary=False)
    assert len(rows) == 13
    for r in rows:
        try:
            approach3_time(r.x, math.pi / 4, 1.0)
            feasible = True
        except NoSolutionError:
            feasible = False
        assert r.feasible == feasible
        assert (r.exact is None) == (not feasible)


def test_sweep_alpha_boundary_row():
    cfg = RunConfig(qubits=1000, strategy="approach3")
    rows = sweep_alpha(0.3, 1.5, 13, cfg, sample=False)
    assert len(rows) == 14
    first = next(r for r in rows if r.feasible)
    assert first.x == pytest.approx(ALPHA_OPT, abs=1e-15)
    assert first.exact == pytest.approx(5 / 6, abs=1e-9)


def test_sweep_alpha_requires_approach3():
    with pytest.raises(DomainError):
        sweep_alpha(0.3, 1.5, 5, RunConfig(strategy="approach2"), sample=False)
    with pytest.raises(DomainError):
        sweep_alpha(1.5, 0.3, 5, RunConfig(strategy="approach3"), sample=False)


def test_crossing():
    assert crossing([0, 1, 2], [0.0, 1.0, 2.0], 0.5) == 0.5
    assert crossing([0, 1], [0.0, 1.0], 0.0) == 0
    assert crossing([0, 1, 2], [None, 0.0, 1.0], 0.25) == 1.25
    assert crossing([0, 1], [0.0, 0.1], 0.5) is None


def test_sweep_eta_threshold():
    sw = sweep_eta(0.8, 1.0, 21, RunConfig(strategy="approach2"), sample=False)
    assert sw.threshold_exact == pytest.approx(0.9, abs=1e-9)
    assert sw.threshold_sampled is None
    with pytest.raises(DomainError):
        sweep_eta(0.8, 1.0, 5, RunConfig(strategy="none"), sample=False)


def test_csv_and_gnuplot_format():
    cfg = RunConfig(qubits=2000, strategy="approach3", seed=1)
    rows = sweep_alpha(0.3, 0.6, 3, cfg)
    text = rows_to_csv(rows, "alpha")
    lines = text.splitlines()
    assert lines[0] == "alpha,feasible,tau,exact,sampled,lo,hi"
    assert lines[1] == "0.3,false,,,,,"
    assert all(len(l.split(",")) == 7 for l in lines)
    g = rows_to_gnuplot(rows, "alpha", ["note"])
    assert g.startswith("# note\n# alpha feasible")
    assert "0.3 false NaN NaN NaN NaN NaN" in g
    with pytest.raises(DomainError):
        rows_to_csv(rows, "beta")
