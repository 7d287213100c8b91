"""Algebraic self-checks run by ``ptqkd verify``.

Each check draws its random samples from a seeded generator and compares
against an independent route (``scipy.linalg.expm`` for dynamics, direct
matrix algebra elsewhere).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from ptqkd import qmath
from ptqkd.bb84 import BB84_STATES, encode
from ptqkd.errors import SingularMetricError
from ptqkd.eve import (
    R1,
    approach1_strategy,
    approach2_gate,
    approach2_strategy,
    approach3_prep,
    hermitian_strategy,
    approach3_strategy,
)
from ptqkd.ptcore import (
    ALPHA_OPT,
    CptMetric,
    MeasurementPair,
    PtParams,
    alpha_of,
    c_operator,
    cpt_cosine,
    cpt_norm2,
    cpt_projector,
    evolution_operator,
    evolved_metric,
    cpt_observable_residual,
    omega_of,
)

TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    error: float  # worst deviation observed
    detail: str = ""


def random_params(rng: np.random.Generator, alpha_max: float = 1.2) -> PtParams:
    alpha = rng.uniform(-alpha_max, alpha_max)
    s = rng.uniform(0.5, 1.5) * rng.choice((-1.0, 1.0))
    theta = rng.uniform(0.2, math.pi - 0.2)
    return PtParams(s * math.sin(alpha) / math.sin(theta), s, theta)


def random_state(rng: np.random.Generator) -> np.ndarray:
    return rng.normal(size=2) + 1j * rng.normal(size=2)


def _max(errors) -> float:
    return float(max(errors, default=0.0))


def check_c_commutes_with_h(rng, n):
    errs = []
    for _ in range(n):
        p = random_params(rng)
        c = c_operator(CptMetric(alpha_of(p)))
        errs.append(np.abs(qmath.commutator(c, p.hamiltonian())).max())
    return _max(errs)


def check_c_squared(rng, n):
    return _max(
        np.abs(c_operator(CptMetric(a)) @ c_operator(CptMetric(a)) - qmath.IDENTITY).max()
        for a in rng.uniform(-1.5, 1.5, n)
    )


def check_cpt_observables(rng, n):
    """Shipped CPT projectors, plus random ones, satisfy P^T = (CPT) P (CPT)."""
    errs = []
    shipped = [approach1_strategy().settings[0].pair, approach2_strategy().settings[0].pair]
    for a in rng.uniform(-1.5, 1.5, n):
        m = CptMetric(a)
        # the approach-1 projectors are the same matrices at every alpha
        shipped.append(MeasurementPair.cpt(m, R1 @ BB84_STATES[2], R1 @ BB84_STATES[3]))
        m_rand = CptMetric(a)
        p = cpt_projector(m_rand, random_state(rng))
        errs.append(cpt_observable_residual(m_rand, p))
    for pair in shipped:
        for p in (pair.p_plus, pair.p_minus):
            errs.append(cpt_observable_residual(pair.metric, p))
    return _max(errs)


def check_pairs_complete(rng, n):
    pairs = [s.pair for s in hermitian_strategy().settings]
    pairs += [approach1_strategy().settings[0].pair, approach2_strategy().settings[0].pair]
    pairs += [approach3_strategy().settings[0].pair]
    errs = []
    for pair in pairs:
        errs.append(np.abs(pair.p_plus + pair.p_minus - qmath.IDENTITY).max())
        errs.append(np.abs(pair.p_plus @ pair.p_plus - pair.p_plus).max())
        errs.append(np.abs(pair.p_minus @ pair.p_minus - pair.p_minus).max())
        for _ in range(n // len(pairs) + 1):
            v = random_state(rng)
            g = pair.gram
            norm = (v.conj() @ g @ v).real
            pp = (v.conj() @ g @ pair.p_plus @ v).real / norm
            pm = (v.conj() @ g @ pair.p_minus @ v).real / norm
            errs.append(abs(pp + pm - 1))
            errs.append(max(0.0, -pp, -pm, pp - 1, pm - 1))
    return _max(errs)


def check_cpt_norm_conserved(rng, n):
    errs = []
    for _ in range(n):
        p = random_params(rng)
        m = CptMetric(alpha_of(p))
        u = evolution_operator(p, rng.uniform(0, 3))
        v = random_state(rng)
        n0 = cpt_norm2(m, v)
        errs.append(abs(cpt_norm2(m, u @ v) - n0) / n0)
    return _max(errs)


def hermitian_norm_witness() -> float:
    """Change of Hermitian norm for one evolution away from alpha = 0; must be large."""
    p = PtParams.from_alpha_omega(0.5, 1.0)
    v = BB84_STATES[0]
    return abs(qmath.herm_norm2(evolution_operator(p, 0.7) @ v) - 1.0)


def check_evolved_metric(rng, n, omega_fn: Callable[[PtParams], float] = omega_of):
    errs = []
    for _ in range(n):
        p = random_params(rng)
        t = rng.uniform(0, 3)
        h = p.hamiltonian()
        a = alpha_of(p)
        oracle = math.cos(a) ** 2 * expm(1j * h.conj().T * t) @ expm(-1j * h * t)
        errs.append(np.abs(evolved_metric(a, omega_fn(p), t) - oracle).max())
    return _max(errs)


def check_evolution_operator(rng, n):
    errs = []
    for _ in range(n):
        p = random_params(rng)
        t = rng.uniform(0, 3)
        errs.append(np.abs(evolution_operator(p, t) - expm(-1j * p.hamiltonian() * t)).max())
    return _max(errs)


def check_hadamard(rng, n):
    return _max(np.abs(qmath.HADAMARD @ encode(a, 0) - encode(a, 1)).max() for a in (0, 1))


def check_approach2_orthogonal(rng, n):
    g = approach2_gate(3 * math.pi / 4)
    return abs(cpt_cosine(CptMetric(math.pi / 4), g @ BB84_STATES[0], g @ BB84_STATES[3]))


def check_approach1_exclusion(rng, n):
    """psi01 never yields -1 and gated psi01, psi11 stay CPT-orthogonal, for all alpha."""
    errs = []
    for a in np.linspace(-1.5, 1.5, max(n, 2)):
        m = CptMetric(a)
        u, v = R1 @ BB84_STATES[2], R1 @ BB84_STATES[3]
        errs.append(abs(cpt_cosine(m, u, v)))
        pair = MeasurementPair.cpt(m, u, v)
        errs.append(1 - pair.prob_plus(u))
    return _max(errs)


def check_approach3_orthogonal(rng, n):
    errs = []
    for a in np.linspace(ALPHA_OPT, 1.5, max(n, 2)):
        prep, _ = approach3_prep(a, math.pi / 4, rng.uniform(0.2, 3))
        e0, e1 = prep @ BB84_STATES[0], prep @ BB84_STATES[3]
        errs.append(abs(qmath.herm_inner(e0, e1)) / math.sqrt(qmath.herm_norm2(e0) * qmath.herm_norm2(e1)))
    return _max(errs)


def check_guard() -> bool:
    try:
        CptMetric(1.5707963)
    except SingularMetricError:
        return True
    return False


def run_checks(samples: int = 1000, seed: int = 2024, omega_fn=omega_of) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    numeric = [
        ("[C,H] = 0", check_c_commutes_with_h),
        ("C^2 = I", check_c_squared),
        ("CPT-observable projectors", check_cpt_observables),
        ("P+ + P- = I, P^2 = P, probabilities", check_pairs_complete),
        ("CPT norm conserved under evolution", check_cpt_norm_conserved),
        ("evolution operator = expm(-iHt)", check_evolution_operator),
        ("evolved metric = cos^2(a) e^{iH^dag t} e^{-iHt}",
         lambda r, n: check_evolved_metric(r, n, omega_fn)),
        ("Hadamard maps Z basis to X basis", check_hadamard),
        ("approach 2: cos(psi00', psi11') = 0", check_approach2_orthogonal),
        ("approach 1: psi01' excluded for all alpha", check_approach1_exclusion),
        ("approach 3: evolved psi00, psi11 orthogonal", check_approach3_orthogonal),
    ]
    results = []
    for name, fn in numeric:
        err = fn(rng, samples)
        results.append(CheckResult(name, err <= TOL, err))
    w = hermitian_norm_witness()
    results.append(CheckResult("Hermitian norm not conserved (witness)", w > 1e-3, w))
    ok = check_guard()
    results.append(CheckResult("singular-metric guard at alpha = 1.5707963", ok, 0.0,
                               "rejected" if ok else "accepted"))
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check'.ljust(width)}  status  worst"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name.ljust(width)}  {status}    {r.error:.3e} {r.detail}".rstrip())
    return "\n".join(lines)
