"""Seeded, parallel Monte Carlo over protocol runs and parameter sweeps.

Reproducibility: qubits are processed in fixed blocks of ``BLOCK_SIZE``.
Block ``i`` draws from a Philox generator keyed by ``stream_key(seed, i)``,
where ``stream_key`` is SplitMix64 applied to ``seed + (i + 1) * GAMMA``.
Block results are integer counters that are summed, so neither the worker
count nor the completion order can change the output.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from ptqkd import eve as eve_mod
from ptqkd.bb84 import run_protocol
from ptqkd.errors import DomainError, NoSolutionError
from ptqkd.eve import EfficiencyModel, Strategy, Tag
from ptqkd.ptcore import ALPHA_OPT, alpha_boundary, approach3_time

BLOCK_SIZE = 1 << 16

_MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    x = (x + GAMMA) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_key(seed: int, index: int) -> int:
    """64-bit key of substream ``index`` derived from ``seed``."""
    return splitmix64((seed + index * GAMMA) & _MASK64)


def block_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed, index)))


def wilson_interval(hits: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if not 0 <= hits <= n:
        raise DomainError("need 0 <= hits <= n")
    z = norm.ppf(0.5 + confidence / 2)
    p = hits / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if hits == 0 else max(0.0, centre - half)
    hi = 1.0 if hits == n else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class RunConfig:
    qubits: int = 10**6
    strategy: str = "hermitian"
    params: dict = field(default_factory=dict)
    eta: float = 1.0
    null_policy: str = "wrong"
    fallback: str = "none"
    resend: str = "invert"
    seed: int = 0
    workers: int = 1  # performance hint only

    def __post_init__(self):
        if self.qubits < 1:
            raise DomainError("qubits must be at least 1")
        if self.strategy not in eve_mod.STRATEGY_NAMES:
            raise DomainError(f"unknown strategy {self.strategy!r}")
        if not 0 <= self.seed <= _MASK64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    @property
    def efficiency(self) -> EfficiencyModel:
        return EfficiencyModel(self.eta, self.null_policy, self.fallback)

    def build_strategy(self) -> Optional[Strategy]:
        return eve_mod.make_strategy(
            self.strategy, resend=self.resend, efficiency=self.efficiency, **self.params
        )

    def echo(self) -> dict:
        """Effective configuration; ``workers`` is omitted since it cannot affect results."""
        d = asdict(self)
        del d["workers"]
        return d


@dataclass(frozen=True)
class RunStats:
    n: int
    n_sifted: int
    sifted_fraction: float
    qber: Optional[float]
    exact_qber: float
    lost_fraction: float
    eve_accuracy: Optional[float] = None
    eve_accuracy_lo: Optional[float] = None
    eve_accuracy_hi: Optional[float] = None
    eve_accuracy_all: Optional[float] = None
    unambiguous_rate: Optional[float] = None
    exact_accuracy: Optional[float] = None
    exact_unambiguous_rate: Optional[float] = None
    eve_hits: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


_COUNTERS = ("n", "sifted", "bob_errors", "eve_hits", "eve_hits_all", "unambiguous", "lost")


def _run_block(strategy: Optional[Strategy], seed: int, index: int, size: int) -> np.ndarray:
    t = run_protocol(size, strategy, block_rng(seed, index))
    mask = t.sifted_mask
    out = np.zeros(len(_COUNTERS), dtype=np.int64)
    out[0] = size
    out[1] = mask.sum()
    out[2] = np.count_nonzero(t.a[mask] != t.bob_bits[mask])
    out[6] = t.lost.sum()
    if t.eve_bits is not None:
        out[3] = np.count_nonzero(t.eve_bits[mask] == t.a[mask])
        kept = ~t.lost
        out[4] = np.count_nonzero(t.eve_bits[kept] == t.a[kept])
        out[5] = np.count_nonzero(t.eve_tags == Tag.UNAMBIGUOUS)
    return out


def count(strategy: Optional[Strategy], qubits: int, seed: int, workers: int = 1) -> dict[str, int]:
    """Run ``qubits`` transmissions and return the summed integer counters."""
    sizes = [BLOCK_SIZE] * (qubits // BLOCK_SIZE)
    if qubits % BLOCK_SIZE:
        sizes.append(qubits % BLOCK_SIZE)
    jobs = list(enumerate(sizes))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda j: _run_block(strategy, seed, *j), jobs))
    else:
        parts = [_run_block(strategy, seed, i, s) for i, s in jobs]
    total = np.sum(parts, axis=0)
    return dict(zip(_COUNTERS, (int(x) for x in total)))


def simulate(cfg: RunConfig) -> RunStats:
    strategy = cfg.build_strategy()
    c = count(strategy, cfg.qubits, cfg.seed, cfg.workers)
    n, m = c["n"], c["sifted"]
    stats = dict(
        n=n,
        n_sifted=m,
        sifted_fraction=m / n,
        qber=c["bob_errors"] / m if m else None,
        exact_qber=eve_mod.exact_qber(strategy),
        lost_fraction=c["lost"] / n,
    )
    if strategy is not None:
        kept = n - c["lost"]
        lo, hi = wilson_interval(c["eve_hits"], m) if m else (None, None)
        stats.update(
            eve_accuracy=c["eve_hits"] / m if m else None,
            eve_accuracy_lo=lo,
            eve_accuracy_hi=hi,
            eve_accuracy_all=c["eve_hits_all"] / kept if kept else None,
            unambiguous_rate=c["unambiguous"] / n,
            exact_accuracy=eve_mod.exact_accuracy(strategy),
            exact_unambiguous_rate=eve_mod.exact_unambiguous_rate(strategy),
            eve_hits=c["eve_hits"],
        )
    return RunStats(**stats)


@dataclass(frozen=True)
class SweepRow:
    x: float
    feasible: bool
    exact: Optional[float]
    sampled: Optional[float]
    lo: Optional[float]
    hi: Optional[float]
    tau: Optional[float] = None


def _sampled(cfg: RunConfig) -> tuple[float, float, float]:
    s = simulate(cfg)
    return s.eve_accuracy, s.eve_accuracy_lo, s.eve_accuracy_hi


def sweep_alpha(
    start: float,
    stop: float,
    steps: int,
    cfg: RunConfig,
    sample: bool = True,
    include_boundary: bool = True,
) -> list[SweepRow]:
    """Approach-3 accuracy over an alpha grid of ``steps`` points.

    Infeasible alphas (no evolution time) are recorded with empty values.
    With ``include_boundary`` the existence boundary itself is inserted when
    it falls inside the grid, so the curve starts at its true maximum.
    """
    if cfg.strategy != "approach3":
        raise DomainError("alpha sweeps require the approach3 strategy")
    if not start < stop:
        raise DomainError("need start < stop")
    if steps < 2:
        raise DomainError("need at least 2 grid points")
    sigma = cfg.params.get("sigma", math.pi / 4)
    omega = cfg.params.get("omega", 1.0)
    xs = [float(x) for x in np.linspace(start, stop, steps)]
    if include_boundary:
        edge = alpha_boundary(sigma)
        if start < edge < stop and edge not in xs:
            xs = sorted(xs + [edge])
    rows = []
    for x in xs:
        try:
            tau = approach3_time(x, sigma, omega)
        except (NoSolutionError, DomainError):
            rows.append(SweepRow(x, False, None, None, None, None, None))
            continue
        point = RunConfig(**{**asdict(cfg), "params": {**cfg.params, "alpha": x}})
        strategy = point.build_strategy()
        exact = eve_mod.exact_accuracy(strategy)
        sampled = lo = hi = None
        if sample:
            sampled, lo, hi = _sampled(point)
        rows.append(SweepRow(x, True, exact, sampled, lo, hi, tau))
    return rows


def crossing(xs, ys, level: float) -> Optional[float]:
    """First upward crossing of ``level`` by linear interpolation."""
    pts = [(x, y) for x, y in zip(xs, ys) if y is not None]
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if y0 < level <= y1 or (y0 == level):
            if y0 == level:
                return x0
            return x0 + (level - y0) * (x1 - x0) / (y1 - y0)
    return None


@dataclass(frozen=True)
class EtaSweep:
    rows: list[SweepRow]
    threshold_exact: Optional[float]
    threshold_sampled: Optional[float]


def sweep_eta(
    start: float, stop: float, steps: int, cfg: RunConfig, sample: bool = True, level: float = 0.75
) -> EtaSweep:
    """Eve's accuracy against discriminator efficiency and the 3/4 crossing."""
    if cfg.strategy == "none":
        raise DomainError("eta sweeps need an eavesdropper")
    if not 0 <= start < stop <= 1:
        raise DomainError("need 0 <= start < stop <= 1")
    if steps < 2:
        raise DomainError("need at least 2 grid points")
    rows = []
    for x in np.linspace(start, stop, steps):
        point = RunConfig(**{**asdict(cfg), "eta": float(x)})
        exact = eve_mod.exact_accuracy(point.build_strategy())
        sampled = lo = hi = None
        if sample:
            sampled, lo, hi = _sampled(point)
        rows.append(SweepRow(float(x), True, exact, sampled, lo, hi))
    xs = [r.x for r in rows]
    return EtaSweep(
        rows,
        crossing(xs, [r.exact for r in rows], level),
        crossing(xs, [r.sampled for r in rows], level) if sample else None,
    )


ALPHA_HEADER = ("alpha", "feasible", "tau", "exact", "sampled", "lo", "hi")
ETA_HEADER = ("eta", "exact", "sampled", "lo", "hi")


def fmt(x) -> str:
    """Locale-independent, 9 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    return format(float(x), ".9g")


def rows_to_csv(rows: list[SweepRow], kind: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if kind == "alpha":
        w.writerow(ALPHA_HEADER)
        for r in rows:
            w.writerow([fmt(r.x), fmt(r.feasible), fmt(r.tau), fmt(r.exact), fmt(r.sampled), fmt(r.lo), fmt(r.hi)])
    elif kind == "eta":
        w.writerow(ETA_HEADER)
        for r in rows:
            w.writerow([fmt(r.x), fmt(r.exact), fmt(r.sampled), fmt(r.lo), fmt(r.hi)])
    else:
        raise DomainError(f"unknown table kind {kind!r}")
    return buf.getvalue()


def rows_to_gnuplot(rows: list[SweepRow], kind: str, comments: list[str] = ()) -> str:
    """Whitespace-separated data with a commented header; missing values as NaN."""
    header = ALPHA_HEADER if kind == "alpha" else ETA_HEADER
    lines = [f"# {c}" for c in comments]
    lines.append("# " + " ".join(header))
    for line in rows_to_csv(rows, kind).splitlines()[1:]:
        lines.append(" ".join(v if v else "NaN" for v in line.split(",")))
    return "\n".join(lines) + "\n"


__all__ = [
    "ALPHA_OPT",
    "BLOCK_SIZE",
    "EtaSweep",
    "RunConfig",
    "RunStats",
    "SweepRow",
    "block_rng",
    "count",
    "crossing",
    "rows_to_csv",
    "rows_to_gnuplot",
    "simulate",
    "splitmix64",
    "stream_key",
    "sweep_alpha",
    "sweep_eta",
    "wilson_interval",
]
