"""Intercept-resend eavesdroppers.

A :class:`Strategy` is a weighted set of measurement :class:`Setting` s. Each
setting applies a preparation operator to the intercepted qubit and performs a
single two-outcome measurement (Hermitian or CPT). The outcome fixes Eve's
inferred bit and what she forwards to Bob. An :class:`EfficiencyModel` makes
the discriminator fail with probability ``1 - eta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterator, NamedTuple, Optional

import numpy as np

from ptqkd import qmath
from ptqkd.bb84 import BASIS_PAIRS, BB84_STATES, encode
from ptqkd.errors import DomainError
from ptqkd.ptcore import (
    ALPHA_OPT,
    CptMetric,
    MeasurementPair,
    PtParams,
    approach3_time,
    cpt_cosine,
    cpt_measure,
    evolution_operator,
)

STRATEGY_NAMES = ("none", "hermitian", "approach1", "approach2", "approach3")

R1 = np.diag([1, 1j]).astype(complex)


class Tag(IntEnum):
    CONCLUSIVE = 0
    UNAMBIGUOUS = 1
    NULL = 2


def r2_gate(rho: float) -> np.ndarray:
    c, s = math.cos(rho / 2), math.sin(rho / 2)
    return np.array([[c, 1j * s], [1j * s, c]])


def approach2_gate(rho: float) -> np.ndarray:
    """R1 followed by R2(pi/2 - rho).

    With this composition the CPT cosines between the gated BB84 states obey
    the closed forms in :func:`approach2_cosines` for every (alpha, rho).
    """
    return r2_gate(math.pi / 2 - rho) @ R1


def approach3_gate(sigma: float) -> np.ndarray:
    """R1 followed by R2(sigma - pi/2).

    Sends psi00 -> (cos((pi-2s)/4), -i sin((pi-2s)/4)) and
    psi11 -> (cos((pi+2s)/4), -i sin((pi+2s)/4)).
    """
    return r2_gate(sigma - math.pi / 2) @ R1


# Pairs reported by the angle table, as (first, second) indices into BB84_STATES.
COSINE_PAIRS = (
    ("psi00", "psi10"),
    ("psi00", "psi01"),
    ("psi00", "psi11"),
    ("psi10", "psi11"),
    ("psi01", "psi11"),
    ("psi10", "psi01"),
)
_INDEX = {"psi00": 0, "psi10": 1, "psi01": 2, "psi11": 3}


def approach2_cosines(alpha: float, rho: float) -> dict[tuple[str, str], float]:
    """Closed-form CPT cosines between the gated states."""
    sa, sr, cr = math.sin(alpha), math.sin(rho), math.cos(rho)
    return {
        ("psi00", "psi10"): sa * sr / math.sqrt(1 - cr**2 * sa**2),
        ("psi00", "psi01"): (1 + sa * (sr + cr)) / math.sqrt(2 * (1 + cr * sa) * (1 + sr * sa)),
        ("psi00", "psi11"): (1 + sa * (cr - sr)) / math.sqrt(2 * (1 + cr * sa) * (1 - sr * sa)),
        ("psi10", "psi11"): (1 - sa * (sr + cr)) / math.sqrt(2 * (1 - cr * sa) * (1 - sr * sa)),
        ("psi01", "psi11"): sa * cr / math.sqrt(1 - sr**2 * sa**2),
        ("psi10", "psi01"): (1 + sa * (sr - cr)) / math.sqrt(2 * (1 - cr * sa) * (1 + sr * sa)),
    }


def direct_cosines(alpha: float, rho: float) -> dict[tuple[str, str], complex]:
    """The same cosines computed from the CPT inner product."""
    m = CptMetric(alpha)
    g = approach2_gate(rho)
    return {
        (x, y): cpt_cosine(m, g @ BB84_STATES[_INDEX[x]], g @ BB84_STATES[_INDEX[y]])
        for x, y in COSINE_PAIRS
    }


@dataclass(frozen=True)
class EfficiencyModel:
    eta: float = 1.0
    null_policy: str = "wrong"  # "wrong": score as error, resend random state; "loss": drop
    fallback: str = "none"  # "coin": replace the undecided bit by a fair coin

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {self.eta}")
        if self.null_policy not in ("wrong", "loss"):
            raise DomainError(f"unknown null policy {self.null_policy!r}")
        if self.fallback not in ("none", "coin"):
            raise DomainError(f"unknown fallback {self.fallback!r}")


@dataclass(frozen=True)
class EveOutcome:
    inferred_bit: Optional[int]
    tag: Tag
    resend: Optional[np.ndarray]  # None: the qubit is lost


class BatchOutcome(NamedTuple):
    bits: np.ndarray  # int8, -1 for undecided
    tags: np.ndarray  # int8 Tag codes
    resend: np.ndarray  # (n, 2) complex
    lost: np.ndarray  # bool


@dataclass(frozen=True, eq=False)
class Setting:
    """A preparation operator followed by one two-outcome measurement."""

    prep: np.ndarray
    pair: MeasurementPair
    bits: tuple[int, int] = (0, 1)  # inferred bit for outcome +1, -1
    tags: tuple[Tag, Tag] = (Tag.CONCLUSIVE, Tag.CONCLUSIVE)
    weight: float = 1.0

    @property
    def unprep(self) -> np.ndarray:
        return np.linalg.inv(self.prep)

    def forward(self, collapsed) -> np.ndarray:
        """Undo the preparation on a collapsed state; unit Hermitian norm."""
        return qmath.normalize(self.unprep @ collapsed)


@dataclass(frozen=True, eq=False)
class Strategy:
    name: str
    settings: tuple[Setting, ...]
    params: dict = field(default_factory=dict)
    efficiency: EfficiencyModel = EfficiencyModel()
    resend: str = "invert"  # or "reencode"

    def __post_init__(self):
        if self.resend not in ("invert", "reencode"):
            raise DomainError(f"unknown resend policy {self.resend!r}")
        if not math.isclose(sum(s.weight for s in self.settings), 1.0):
            raise DomainError("setting weights must sum to 1")

    def _pick(self, u: float) -> Setting:
        acc = 0.0
        for s in self.settings:
            acc += s.weight
            if u < acc:
                return s
        return self.settings[-1]

    def intercept(self, state, rng: np.random.Generator) -> EveOutcome:
        """Intercept one qubit: at most one measurement, never a copy."""
        eff = self.efficiency
        if eff.eta < 1.0 and rng.random() >= eff.eta:
            bit = int(rng.integers(2)) if eff.fallback == "coin" else None
            if eff.null_policy == "loss":
                return EveOutcome(bit, Tag.NULL, None)
            return EveOutcome(bit, Tag.NULL, encode(int(rng.integers(2)), int(rng.integers(2))))
        setting = self._pick(rng.random()) if len(self.settings) > 1 else self.settings[0]
        outcome, collapsed = cpt_measure(setting.pair, setting.prep @ qmath.state(state), rng)
        i = 0 if outcome == 1 else 1
        bit = setting.bits[i]
        if self.resend == "invert":
            out = setting.forward(collapsed)
        else:
            out = encode(bit, int(rng.integers(2)))
        return EveOutcome(bit, setting.tags[i], out)

    def intercept_batch(self, states: np.ndarray, rng: np.random.Generator) -> BatchOutcome:
        """Vectorized :meth:`intercept` over rows of ``states``.

        Draws a fixed block of randomness per call regardless of branch, so
        results depend only on the generator state.
        """
        n = len(states)
        u_set, u_out, u_eta = rng.random((3, n))
        coin, rand_a, rand_b, re_b = rng.integers(0, 2, size=(4, n), dtype=np.int8)

        bits = np.empty(n, dtype=np.int8)
        tags = np.empty(n, dtype=np.int8)
        resend = np.empty((n, 2), dtype=complex)
        cum = np.cumsum([s.weight for s in self.settings])
        which = np.minimum(np.searchsorted(cum, u_set, side="right"), len(self.settings) - 1)
        for si, s in enumerate(self.settings):
            idx = np.flatnonzero(which == si)
            if idx.size == 0:
                continue
            prepped = states[idx] @ s.prep.T
            plus = u_out[idx] < s.pair.prob_plus_batch(prepped)
            bits[idx] = np.where(plus, s.bits[0], s.bits[1])
            tags[idx] = np.where(plus, s.tags[0], s.tags[1])
            if self.resend == "invert":
                for mask, proj in ((plus, s.pair.p_plus), (~plus, s.pair.p_minus)):
                    w = prepped[mask] @ (s.unprep @ proj).T
                    w /= np.sqrt(np.einsum("ni,ni->n", w.conj(), w).real)[:, None]
                    resend[idx[mask]] = w
        if self.resend == "reencode":
            resend = BB84_STATES[2 * re_b + bits]

        lost = np.zeros(n, dtype=bool)
        eff = self.efficiency
        if eff.eta < 1.0:
            null = u_eta >= eff.eta
            bits[null] = coin[null] if eff.fallback == "coin" else -1
            tags[null] = Tag.NULL
            if eff.null_policy == "loss":
                lost = null
                resend[null] = BB84_STATES[0]
            else:
                resend[null] = BB84_STATES[2 * rand_b[null] + rand_a[null]]
        return BatchOutcome(bits, tags, resend, lost)


def hermitian_strategy(resend: str = "invert") -> Strategy:
    """Random-basis projective measurement, the standard intercept-resend attack."""
    settings = tuple(
        Setting(qmath.IDENTITY, BASIS_PAIRS[b], weight=0.5) for b in (0, 1)
    )
    return Strategy("hermitian", settings, {}, resend=resend)


def approach1_strategy(epsilon: float = 1e-3, resend: str = "invert") -> Strategy:
    """CPT measurement near the breaking point that excludes psi01.

    Outcome -1 can only come from psi11 (up to O(epsilon^2)) and is tagged
    unambiguous. Outcome +1 leaves {psi00, psi10, psi01}; bit 0 is the
    maximum-posterior guess.
    """
    if not 0 < epsilon <= 0.1:
        raise DomainError(f"epsilon must lie in (0, 0.1], got {epsilon}")
    metric = CptMetric(math.pi / 2 - epsilon)
    pair = MeasurementPair.cpt(metric, R1 @ BB84_STATES[2], R1 @ BB84_STATES[3])
    setting = Setting(R1, pair, (0, 1), (Tag.CONCLUSIVE, Tag.UNAMBIGUOUS))
    return Strategy("approach1", (setting,), {"epsilon": epsilon}, resend=resend)


def approach2_strategy(
    alpha: float = math.pi / 4, rho: float = 3 * math.pi / 4, resend: str = "invert"
) -> Strategy:
    """CPT measurement discriminating gated psi00 from gated psi11."""
    metric = CptMetric(alpha)
    g = approach2_gate(rho)
    v0, v1 = g @ BB84_STATES[0], g @ BB84_STATES[3]
    cos = cpt_cosine(metric, v0, v1)
    if abs(cos) > 1e-9:
        raise DomainError(
            f"gated psi00 and psi11 are not CPT-orthogonal at alpha={alpha:.9g}, "
            f"rho={rho:.9g} (|cos| = {abs(cos):.3g})"
        )
    pair = MeasurementPair.cpt(metric, v0, v1)
    return Strategy("approach2", (Setting(g, pair),), {"alpha": alpha, "rho": rho}, resend=resend)


def approach3_prep(alpha: float, sigma: float, omega: float) -> tuple[np.ndarray, float]:
    """Gate then PT evolution for the orthogonalizing time; returns (operator, tau)."""
    tau = approach3_time(alpha, sigma, omega)
    u = evolution_operator(PtParams.from_alpha_omega(alpha, omega), tau)
    return u @ approach3_gate(sigma), tau


def approach3_strategy(
    alpha: float = ALPHA_OPT,
    sigma: float = math.pi / 4,
    omega: float = 1.0,
    resend: str = "invert",
) -> Strategy:
    """PT evolution followed by a Hermitian measurement."""
    if not math.isclose(sigma, math.pi / 4, abs_tol=1e-12):
        raise DomainError("only sigma = pi/4 keeps the gate unitary")
    prep, tau = approach3_prep(alpha, sigma, omega)
    e0, e1 = prep @ BB84_STATES[0], prep @ BB84_STATES[3]
    overlap = abs(qmath.herm_inner(e0, e1)) / math.sqrt(qmath.herm_norm2(e0) * qmath.herm_norm2(e1))
    if overlap > 1e-9:
        raise DomainError(f"evolved psi00, psi11 not orthogonal (|cos| = {overlap:.3g})")
    pair = MeasurementPair.hermitian(e0, e1)
    params = {"alpha": alpha, "sigma": sigma, "omega": omega, "tau": tau}
    return Strategy("approach3", (Setting(prep, pair),), params, resend=resend)


def apply_efficiency(base: Strategy, model: EfficiencyModel) -> Strategy:
    return replace(base, efficiency=model)


def make_strategy(
    name: str,
    *,
    alpha: Optional[float] = None,
    rho: Optional[float] = None,
    sigma: Optional[float] = None,
    epsilon: Optional[float] = None,
    omega: Optional[float] = None,
    resend: str = "invert",
    efficiency: Optional[EfficiencyModel] = None,
) -> Optional[Strategy]:
    """Build a strategy by name; ``"none"`` gives ``None``."""
    given = {k: v for k, v in dict(alpha=alpha, rho=rho, sigma=sigma, epsilon=epsilon, omega=omega).items() if v is not None}
    allowed = {
        "none": set(),
        "hermitian": set(),
        "approach1": {"epsilon"},
        "approach2": {"alpha", "rho"},
        "approach3": {"alpha", "sigma", "omega"},
    }
    if name not in allowed:
        raise DomainError(f"unknown strategy {name!r}; expected one of {', '.join(STRATEGY_NAMES)}")
    extra = set(given) - allowed[name]
    if extra:
        raise DomainError(f"strategy {name!r} does not take {', '.join(sorted(extra))}")
    if name == "none":
        return None
    builders = {
        "hermitian": hermitian_strategy,
        "approach1": approach1_strategy,
        "approach2": approach2_strategy,
        "approach3": approach3_strategy,
    }
    s = builders[name](resend=resend, **given)
    return apply_efficiency(s, efficiency) if efficiency is not None else s


# --- exact enumeration -------------------------------------------------------


def branches(s: Strategy, k: int) -> Iterator[tuple[float, Optional[int], Optional[np.ndarray]]]:
    """Every (probability, inferred bit, forwarded state) branch for input state k.

    A forwarded state of None means the qubit was lost; an inferred bit of
    None means Eve is undecided.
    """
    eff = s.efficiency
    psi = BB84_STATES[k]
    if eff.eta > 0:
        for st in s.settings:
            prepped = st.prep @ psi
            p_plus = st.pair.prob_plus(prepped)
            for i, (p, outcome) in enumerate(((p_plus, 1), (1 - p_plus, -1))):
                if p <= 0:
                    continue
                w = eff.eta * st.weight * p
                bit = st.bits[i]
                if s.resend == "invert":
                    yield w, bit, st.forward(st.pair.collapse(prepped, outcome))
                else:
                    for b in (0, 1):
                        yield w / 2, bit, encode(bit, b)
    if eff.eta < 1:
        w = 1 - eff.eta
        bits = (0, 1) if eff.fallback == "coin" else (None,)
        for bit in bits:
            wb = w / len(bits)
            if eff.null_policy == "loss":
                yield wb, bit, None
            else:
                for j in range(4):
                    yield wb / 4, bit, BB84_STATES[j]


def _bob_p0(v: np.ndarray, basis: int) -> float:
    return BASIS_PAIRS[basis].prob_plus(v)


def bob_zero_probability(s: Optional[Strategy], a: int, b: int, c: int) -> float:
    """P(Bob reads 0 | Alice sent psi_ab, Bob measures in basis c), lost qubits excluded."""
    k = 2 * b + a
    if s is None:
        return _bob_p0(BB84_STATES[k], c)
    num = den = 0.0
    for w, _, v in branches(s, k):
        if v is None:
            continue
        num += w * _bob_p0(v, c)
        den += w
    return float(num / den) if den > 0 else float("nan")


def exact_accuracy(s: Strategy) -> float:
    """Probability that Eve's bit equals Alice's on a sifted position."""
    hit = total = 0.0
    for k in range(4):
        a = k % 2
        for w, bit, v in branches(s, k):
            if v is None:
                continue
            total += w
            hit += w * (bit == a)
    return float(hit / total) if total > 0 else float("nan")


def exact_qber(s: Optional[Strategy]) -> float:
    """Expected error rate of the sifted key."""
    if s is None:
        return 0.0
    err = total = 0.0
    for k in range(4):
        a, b = k % 2, k // 2
        for w, _, v in branches(s, k):
            if v is None:
                continue
            p0 = _bob_p0(v, b)
            total += w
            err += w * (p0 if a == 1 else 1 - p0)
    return float(err / total) if total > 0 else float("nan")


def exact_unambiguous_rate(s: Strategy) -> float:
    """Fraction of all intercepted qubits tagged unambiguous."""
    rate = 0.0
    eff = s.efficiency
    for k in range(4):
        psi = BB84_STATES[k]
        for st in s.settings:
            p_plus = st.pair.prob_plus(st.prep @ psi)
            for p, tag in ((p_plus, st.tags[0]), (1 - p_plus, st.tags[1])):
                if tag == Tag.UNAMBIGUOUS:
                    rate += 0.25 * eff.eta * st.weight * p
    return float(rate)


def outcome_probabilities(s: Strategy) -> dict[str, list[float]]:
    """P(outcome +1) per input state, one entry per setting."""
    labels = ("psi00", "psi10", "psi01", "psi11")
    return {
        labels[k]: [st.pair.prob_plus(st.prep @ BB84_STATES[k]) for st in s.settings]
        for k in range(4)
    }
