"""PT-symmetric two-level machinery.

The Hamiltonian ``[[r e^{i theta}, s], [s, r e^{-i theta}]]`` has real
spectrum while ``|(r/s) sin theta| < 1``. Its C operator and the CPT inner
product depend on ``alpha = arcsin((r/s) sin theta)`` only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ptqkd import qmath
from ptqkd.errors import (
    BrokenPhaseError,
    DomainError,
    NoSolutionError,
    SingularMetricError,
)

# Reject |alpha| >= pi/2 - ALPHA_GUARD_MARGIN; the metric is singular at pi/2.
ALPHA_GUARD_MARGIN = 1e-7
ALPHA_LIMIT = math.pi / 2 - ALPHA_GUARD_MARGIN

# Smallest alpha admitting an evolution time at sigma = pi/4.
ALPHA_OPT = math.atan(math.sqrt(0.5 * (math.sqrt(2.0) - 1.0)))

_PROJ_TOL = 1e-10


@dataclass(frozen=True)
class PtParams:
    """Hamiltonian parameters; construction fails outside the unbroken phase."""

    r: float
    s: float
    theta: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.r, self.s, self.theta)):
            raise DomainError("PtParams must be finite")
        if self.s == 0:
            raise BrokenPhaseError("coupling s must be nonzero")
        if abs(self.r / self.s * math.sin(self.theta)) >= 1:
            raise BrokenPhaseError(
                f"|(r/s) sin(theta)| = {abs(self.r / self.s * math.sin(self.theta)):.6g} >= 1"
            )

    @classmethod
    def from_alpha_omega(cls, alpha: float, omega: float, r_cos_theta: float = 0.0) -> "PtParams":
        """Parameters realizing a given (alpha, omega).

        ``r cos(theta)`` only contributes a global phase and defaults to 0.
        """
        if omega <= 0:
            raise DomainError("omega must be positive")
        if abs(alpha) >= math.pi / 2:
            raise BrokenPhaseError("|alpha| must be below pi/2")
        s = omega / math.cos(alpha)
        r_sin_theta = s * math.sin(alpha)
        return cls(math.hypot(r_cos_theta, r_sin_theta), s, math.atan2(r_sin_theta, r_cos_theta))

    @property
    def alpha(self) -> float:
        return alpha_of(self)

    @property
    def omega(self) -> float:
        return omega_of(self)

    def hamiltonian(self) -> np.ndarray:
        r, s, th = self.r, self.s, self.theta
        return np.array([[r * np.exp(1j * th), s], [s, r * np.exp(-1j * th)]])


def alpha_of(p: PtParams) -> float:
    x = p.r / p.s * math.sin(p.theta)
    if abs(x) >= 1:
        raise BrokenPhaseError(f"sin(alpha) = {x:.6g} outside (-1, 1)")
    return math.asin(x)


def omega_of(p: PtParams) -> float:
    """Level half-splitting s cos(alpha).

    Equals sqrt(s^2 - r^2 sin^2 theta) for s > 0 and carries the sign of s
    otherwise, which keeps the closed-form propagator valid for either sign.
    """
    w2 = p.s**2 - (p.r * math.sin(p.theta)) ** 2
    if w2 <= 0:
        raise BrokenPhaseError("omega^2 <= 0")
    return math.copysign(math.sqrt(w2), p.s)


@dataclass(frozen=True)
class CptMetric:
    alpha: float

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise DomainError("alpha must be finite")
        if abs(self.alpha) >= ALPHA_LIMIT:
            raise SingularMetricError(
                f"|alpha| = {abs(self.alpha):.12g} too close to pi/2 (limit {ALPHA_LIMIT:.12g})"
            )

    @property
    def c(self) -> np.ndarray:
        return c_operator(self)

    @property
    def gram(self) -> np.ndarray:
        """Hermitian positive matrix G with <u|v>_CPT = u^dagger G v."""
        return qmath.PARITY @ self.c.T

    def cpt(self, v) -> np.ndarray:
        """The antilinear map v -> C P conj(v)."""
        return self.c @ qmath.PARITY @ np.conj(v)

    def conjugate_op(self, m) -> np.ndarray:
        """(CPT) M (CPT) written as a linear operator."""
        cp = self.c @ qmath.PARITY
        return cp @ np.conj(m) @ np.conj(cp)


def c_operator(m: CptMetric) -> np.ndarray:
    a = m.alpha
    sa = math.sin(a)
    return np.array([[1j * sa, 1], [1, -1j * sa]]) / math.cos(a)


def cpt_inner(m: CptMetric, u, v) -> complex:
    """<u|v> = (CPT u)^T v."""
    u = qmath.state(u)
    v = qmath.state(v)
    return complex(m.cpt(u) @ v)


def cpt_norm2(m: CptMetric, v) -> float:
    return cpt_inner(m, v, v).real


def cpt_projector(m: CptMetric, v) -> np.ndarray:
    """Rank-1 projector |v><v| / <v|v> under the CPT product."""
    v = qmath.state(v)
    n = cpt_inner(m, v, v)
    if abs(n) < 1e-300:
        raise DomainError("vector has zero CPT norm")
    bra = m.cpt(v)
    return np.outer(v, bra) / n


def cpt_cosine(m: CptMetric, u, v) -> complex:
    """Normalized CPT overlap; |cos|^2 is the transition probability."""
    return cpt_inner(m, u, v) / math.sqrt(cpt_norm2(m, u) * cpt_norm2(m, v))


def cpt_observable_residual(m: CptMetric, op) -> float:
    """Deviation from op^T = (CPT) op (CPT).

    Evaluated in the equivalent form G op = op^dagger G (multiply through by
    C P), which avoids squaring the metric's large entries near the breaking point.
    """
    op = qmath.mat(op)
    g = m.gram
    return float(np.abs(g @ op - op.conj().T @ g).max())


def is_cpt_observable(m: CptMetric, op, tol: float = 1e-10) -> bool:
    return cpt_observable_residual(m, op) <= tol


@dataclass(frozen=True, eq=False)
class MeasurementPair:
    """Two complementary projectors; ``metric`` is None for Hermitian pairs."""

    p_plus: np.ndarray
    p_minus: np.ndarray
    metric: CptMetric | None = None

    def __post_init__(self):
        pp, pm = qmath.mat(self.p_plus), qmath.mat(self.p_minus)
        if not qmath.approx_eq(pp + pm, qmath.IDENTITY, _PROJ_TOL):
            raise DomainError("projectors do not sum to identity")
        for p in (pp, pm):
            if not qmath.approx_eq(p @ p, p, _PROJ_TOL):
                raise DomainError("projector is not idempotent")

    @classmethod
    def hermitian(cls, v_plus, v_minus=None) -> "MeasurementPair":
        pp = qmath.herm_projector(v_plus)
        pm = qmath.IDENTITY - pp if v_minus is None else qmath.herm_projector(v_minus)
        return cls(pp, pm, None)

    @classmethod
    def cpt(cls, metric: CptMetric, v_plus, v_minus=None) -> "MeasurementPair":
        pp = cpt_projector(metric, v_plus)
        pm = qmath.IDENTITY - pp if v_minus is None else cpt_projector(metric, v_minus)
        return cls(pp, pm, metric)

    @property
    def gram(self) -> np.ndarray:
        return qmath.IDENTITY if self.metric is None else self.metric.gram

    def inner(self, u, v) -> complex:
        return complex(np.conj(u) @ self.gram @ v)

    def _born(self, proj, v) -> float:
        g = self.gram
        num = (np.conj(v) @ g @ (proj @ v)).real
        den = (np.conj(v) @ g @ v).real
        if den <= 0:
            raise DomainError("state has non-positive norm in this metric")
        return min(1.0, max(0.0, num / den))

    def prob_plus(self, v) -> float:
        """Born probability of outcome +1 in the pair's own metric."""
        return self._born(self.p_plus, v)

    def prob_minus(self, v) -> float:
        return self._born(self.p_minus, v)

    def prob_plus_batch(self, vs: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`prob_plus` over rows of ``vs`` (shape (n, 2))."""
        g = self.gram
        num = np.einsum("ni,ij,jk,nk->n", vs.conj(), g, self.p_plus, vs).real
        den = np.einsum("ni,ij,nj->n", vs.conj(), g, vs).real
        return np.clip(num / den, 0.0, 1.0)

    def collapse(self, v, outcome: int) -> np.ndarray:
        """Post-measurement state, unit norm in the pair's metric."""
        w = (self.p_plus if outcome == 1 else self.p_minus) @ v
        n2 = self.inner(w, w).real
        if n2 <= 0:
            raise DomainError("outcome has zero probability; no post-measurement state")
        return w / math.sqrt(n2)


def cpt_measure(pair: MeasurementPair, state, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """Sample a +/-1 outcome and return it with the collapsed state."""
    v = qmath.state(state)
    p = pair.prob_plus(v)
    if p >= 1.0:
        outcome = 1
    elif p <= 0.0:
        outcome = -1
    else:
        outcome = 1 if rng.random() < p else -1
    return outcome, pair.collapse(v, outcome)


def evolution_operator(p: PtParams, t: float) -> np.ndarray:
    """exp(-i H t) in closed form."""
    a = alpha_of(p)
    w = omega_of(p)
    phase = np.exp(-1j * p.r * math.cos(p.theta) * t) / math.cos(a)
    wt = w * t
    return phase * np.array(
        [
            [math.cos(wt - a), -1j * math.sin(wt)],
            [-1j * math.sin(wt), math.cos(wt + a)],
        ]
    )


def evolved_metric(alpha: float, omega: float, t: float) -> np.ndarray:
    """cos^2(alpha) exp(iH^dagger t) exp(-iHt) in closed form."""
    if abs(alpha) >= math.pi / 2:
        raise SingularMetricError("|alpha| must be below pi/2")
    wt = omega * t
    s2 = math.sin(wt) ** 2
    off = 2j * s2 * math.sin(alpha)
    return np.array(
        [
            [math.cos(wt - alpha) ** 2 + s2, -off],
            [off, math.cos(wt + alpha) ** 2 + s2],
        ]
    )


def approach3_rhs(alpha: float, sigma: float) -> float:
    """Right-hand side of sin^2(omega tau) = cos^2 a cos s / (2 sin a - 2 sin^2 a cos s)."""
    den = 2 * math.sin(alpha) - 2 * math.sin(alpha) ** 2 * math.cos(sigma)
    if den <= 0:
        raise DomainError(f"denominator {den:.6g} <= 0 at alpha={alpha:.6g}")
    rhs = math.cos(alpha) ** 2 * math.cos(sigma) / den
    if rhs < 0:
        raise DomainError(f"sin^2(omega tau) = {rhs:.6g} < 0")
    return rhs


def approach3_time(alpha: float, sigma: float, omega: float) -> float:
    """Smallest positive tau making the evolved reference states orthogonal."""
    if omega <= 0:
        raise DomainError("omega must be positive")
    rhs = approach3_rhs(alpha, sigma)
    if rhs > 1 + 1e-12:
        raise NoSolutionError(
            f"sin^2(omega tau) = {rhs:.9g} > 1 at alpha={alpha:.9g}; "
            f"need alpha >= {alpha_boundary(sigma):.9g}"
        )
    return math.asin(math.sqrt(min(rhs, 1.0))) / omega


def alpha_boundary(sigma: float) -> float:
    """Smallest alpha with a real evolution time, arcsin(tan(pi/4 - sigma/2)).

    Valid for 0 < sigma < pi/2; equals ALPHA_OPT at sigma = pi/4.
    """
    if not 0 < sigma < math.pi / 2:
        raise DomainError("sigma must lie in (0, pi/2)")
    return math.asin(math.tan(math.pi / 4 - sigma / 2))
