import itertools
import math
from unittest import mock

import numpy as np
import pytest

from ptqkd import eve as eve_mod
from ptqkd import qmath
from ptqkd.bb84 import BB84_STATES, encode
from ptqkd.errors import DomainError
from ptqkd.eve import (
    COSINE_PAIRS,
    R1,
    EfficiencyModel,
    Tag,
    apply_efficiency,
    approach1_strategy,
    approach2_cosines,
    approach2_strategy,
    approach3_strategy,
    bob_zero_probability,
    direct_cosines,
    exact_accuracy,
    exact_qber,
    exact_unambiguous_rate,
    hermitian_strategy,
    make_strategy,
    outcome_probabilities,
)
from ptqkd.montecarlo import RunConfig, simulate
from ptqkd.ptcore import ALPHA_OPT, CptMetric, cpt_cosine

FIVE_SIXTHS = 5 / 6

# Approach-3 accuracies at sigma = pi/4, frozen from an independent
# derivation (closed-form measurement probabilities, no shared code).
APPROACH3_FROZEN = {
    0.5: 0.823854422136264,
    0.7: 0.8017486022780991,
    1.0: 0.7795418514549654,
    1.2: 0.7711806053978006,
    1.4: 0.7668476955223333,
    1.5: 0.7659342165236515,
}


def _herm_oracle_qber():
    """Intercept-resend in a random basis, enumerated with plain arithmetic."""
    err = 0.0
    for a, b, e in itertools.product((0, 1), repeat=3):
        # Eve in Alice's basis forwards the right state; otherwise Bob's
        # bit in Alice's basis is a fair coin.
        err += 0.125 * (0.0 if e == b else 0.5)
    return err


# --- hermitian baseline --------------------------------------------------------


def test_hermitian_exact_values():
    s = hermitian_strategy()
    assert exact_accuracy(s) == pytest.approx(0.75, abs=1e-15)
    assert exact_qber(s) == pytest.approx(_herm_oracle_qber(), abs=1e-15)
    assert _herm_oracle_qber() == 0.25
    assert exact_unambiguous_rate(s) == 0.0
    assert exact_qber(None) == 0.0


def test_reencode_policy_matches_oracle():
    s = hermitian_strategy(resend="reencode")
    # Re-encoding in a random basis: Bob copies Eve's bit (wrong 1/4 of the
    # time) when the bases agree, and reads a coin otherwise.
    assert exact_accuracy(s) == pytest.approx(0.75, abs=1e-15)
    assert exact_qber(s) == pytest.approx(0.5 * 0.25 + 0.5 * 0.5, abs=1e-15)


# --- approach 1 ----------------------------------------------------------------


@pytest.mark.parametrize("eps", [1e-3, 1e-2, 0.1])
def test_approach1_excludes_psi01(eps):
    s = approach1_strategy(eps)
    st = s.settings[0]
    assert st.pair.prob_minus(R1 @ BB84_STATES[2]) == 0.0
    assert st.pair.prob_minus(R1 @ BB84_STATES[3]) == pytest.approx(1.0, abs=1e-12)
    # psi00 and psi10 leak into -1 with probability (1 - sin a)/2 = (1 - cos eps)/2
    leak = (1 - math.cos(eps)) / 2
    assert st.pair.prob_minus(R1 @ BB84_STATES[0]) == pytest.approx(leak, abs=1e-12)
    assert exact_unambiguous_rate(s) == pytest.approx(0.25 * (1 + 2 * leak), abs=1e-12)
    assert exact_unambiguous_rate(s) == pytest.approx(0.25 + eps**2 / 8, abs=eps**4)


def test_approach1_accuracy_is_three_quarters():
    # Independent oracle: outcome -1 probabilities from squared CPT cosines
    # against the excluded state.
    for eps in (1e-3, 0.05):
        m = CptMetric(math.pi / 2 - eps)
        u = [R1 @ v for v in BB84_STATES]
        p_minus = [abs(cpt_cosine(m, v, u[3])) ** 2 for v in u]
        # bit 1 on outcome -1, bit 0 otherwise; a = k % 2
        acc = 0.25 * sum(p_minus[k] if k % 2 else 1 - p_minus[k] for k in range(4))
        assert exact_accuracy(approach1_strategy(eps)) == pytest.approx(acc, abs=1e-12)
        assert acc == pytest.approx(0.75, abs=1e-12)


def test_approach1_domain():
    for bad in (0.0, -1e-3, 0.2):
        with pytest.raises(DomainError):
            approach1_strategy(bad)


# --- approach 2 ----------------------------------------------------------------


def test_approach2_exact_values():
    s = approach2_strategy()
    assert exact_accuracy(s) == pytest.approx(FIVE_SIXTHS, abs=1e-12)
    assert exact_qber(s) == pytest.approx(1 / 3, abs=1e-12)
    probs = outcome_probabilities(s)
    assert probs["psi00"][0] == pytest.approx(1.0, abs=1e-12)
    assert probs["psi11"][0] == pytest.approx(0.0, abs=1e-12)
    assert probs["psi10"][0] == pytest.approx(1 / 3, abs=1e-12)
    assert probs["psi01"][0] == pytest.approx(2 / 3, abs=1e-12)


def test_approach2_bob_probabilities():
    s = approach2_strategy()
    assert bob_zero_probability(s, 0, 0, 0) == pytest.approx(1.0, abs=1e-12)
    assert bob_zero_probability(s, 1, 1, 1) == pytest.approx(0.0, abs=1e-12)
    assert bob_zero_probability(None, 0, 1, 1) == pytest.approx(1.0)
    assert bob_zero_probability(None, 0, 1, 0) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "alpha,rho", [(math.pi / 4, 3 * math.pi / 4), (0.0, 0.9), (-0.7, 2.1), (1.3, 0.4)]
)
def test_cosine_closed_forms(alpha, rho):
    closed = approach2_cosines(alpha, rho)
    direct = direct_cosines(alpha, rho)
    assert set(closed) == set(COSINE_PAIRS) == set(direct)
    for key in COSINE_PAIRS:
        assert abs(direct[key]) == pytest.approx(abs(closed[key]), abs=1e-12)


def test_approach2_rejects_non_orthogonal():
    with pytest.raises(DomainError):
        approach2_strategy(alpha=0.3, rho=0.5)


# --- approach 3 ----------------------------------------------------------------


def test_approach3_optimum():
    s = approach3_strategy()
    assert s.params["tau"] == pytest.approx(math.pi / 2, abs=1e-5)
    assert exact_accuracy(s) == pytest.approx(FIVE_SIXTHS, abs=1e-9)


@pytest.mark.parametrize("alpha", sorted(APPROACH3_FROZEN))
def test_approach3_frozen(alpha):
    assert exact_accuracy(approach3_strategy(alpha)) == pytest.approx(APPROACH3_FROZEN[alpha], abs=1e-9)


def test_approach3_omega_invariance():
    for w in (0.5, 3.0):
        assert exact_accuracy(approach3_strategy(0.8, omega=w)) == pytest.approx(
            exact_accuracy(approach3_strategy(0.8)), abs=1e-12
        )


def test_approach3_domain():
    with pytest.raises(DomainError):
        approach3_strategy(0.3)
    with pytest.raises(DomainError):
        approach3_strategy(0.8, sigma=0.5)


# --- factory -------------------------------------------------------------------


def test_make_strategy():
    assert make_strategy("none") is None
    assert make_strategy("approach2", alpha=math.pi / 4).name == "approach2"
    with pytest.raises(DomainError):
        make_strategy("hermitian", alpha=0.3)
    with pytest.raises(DomainError):
        make_strategy("approach1", rho=0.3)
    with pytest.raises(DomainError):
        make_strategy("bogus")


def test_efficiency_validation():
    with pytest.raises(DomainError):
        EfficiencyModel(eta=1.2)
    with pytest.raises(DomainError):
        EfficiencyModel(null_policy="skip")
    with pytest.raises(DomainError):
        EfficiencyModel(fallback="guess")


# --- single measurement, no cloning ----------------------------------------------


@pytest.mark.parametrize("name", ["hermitian", "approach1", "approach2", "approach3"])
def test_one_measurement_per_qubit(name, rng):
    for eff in (EfficiencyModel(), EfficiencyModel(0.5, "loss", "coin")):
        s = make_strategy(name, efficiency=eff)
        with mock.patch("ptqkd.eve.cpt_measure", wraps=eve_mod.cpt_measure) as spy:
            for i in range(200):
                before = spy.call_count
                out = s.intercept(BB84_STATES[i % 4], rng)
                calls = spy.call_count - before
                assert calls == (0 if out.tag == Tag.NULL else 1)


def test_scalar_and_batch_paths_agree(rng):
    s = apply_efficiency(approach2_strategy(), EfficiencyModel(0.9))
    n = 20000
    batch = s.intercept_batch(np.tile(BB84_STATES[2], (n, 1)), rng)
    scalar = [s.intercept(BB84_STATES[2], rng) for _ in range(n)]
    pb = np.mean(batch.bits == 0)
    ps = np.mean([o.inferred_bit == 0 for o in scalar])
    expected = 0.9 * 2 / 3
    for p in (pb, ps):
        assert abs(p - expected) < 4 * math.sqrt(expected * (1 - expected) / n)
    assert np.mean(batch.tags == Tag.NULL) == pytest.approx(0.1, abs=4 * math.sqrt(0.09 / n))


def test_batch_resend_has_unit_norm(rng):
    for s in (approach1_strategy(), approach2_strategy(), approach3_strategy(0.9)):
        out = s.intercept_batch(BB84_STATES[rng.integers(0, 4, 500)], rng)
        norms = np.einsum("ni,ni->n", out.resend.conj(), out.resend).real
        assert np.allclose(norms, 1.0, atol=1e-12)


# --- efficiency ----------------------------------------------------------------


def test_efficiency_accounting():
    base = approach2_strategy()
    wrong = apply_efficiency(base, EfficiencyModel(0.9, "wrong", "none"))
    coin = apply_efficiency(base, EfficiencyModel(0.9, "wrong", "coin"))
    loss = apply_efficiency(base, EfficiencyModel(0.9, "loss", "none"))
    assert exact_accuracy(wrong) == pytest.approx(0.75, abs=1e-12)
    assert exact_accuracy(coin) == pytest.approx(0.80, abs=1e-12)
    # lost qubits leave the sifted key, so accuracy is conditional on detection
    assert exact_accuracy(loss) == pytest.approx(FIVE_SIXTHS, abs=1e-12)
    # a random BB84 resend is uncorrelated with Alice's bit: error 1/2
    assert exact_qber(wrong) == pytest.approx(0.9 / 3 + 0.1 * 0.5, abs=1e-12)


def test_efficiency_zero():
    s = apply_efficiency(approach2_strategy(), EfficiencyModel(0.0, "wrong", "coin"))
    assert exact_accuracy(s) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("name", ["hermitian", "approach1", "approach2", "approach3"])
@pytest.mark.parametrize("eta", [1.0, 0.95, 0.9])
def test_monte_carlo_matches_enumeration(name, eta):
    cfg = RunConfig(qubits=200_000, strategy=name, eta=eta, seed=77)
    st = simulate(cfg)
    m = st.n_sifted
    for got, want in ((st.eve_accuracy, st.exact_accuracy), (st.qber, st.exact_qber)):
        assert abs(got - want) <= 4 * math.sqrt(want * (1 - want) / m) + 1e-12
    u = st.exact_unambiguous_rate
    assert abs(st.unambiguous_rate - u) <= 4 * math.sqrt(u * (1 - u) / st.n) + 1e-12


def test_encode_used_for_null_resend(rng):
    s = apply_efficiency(hermitian_strategy(), EfficiencyModel(0.0))
    out = s.intercept(encode(0, 0), rng)
    assert out.tag == Tag.NULL and out.inferred_bit is None
    assert any(qmath.approx_eq(out.resend, v) for v in BB84_STATES)
