"""Entropy-family scalars and process-level divergence machinery.

Everything is in nats.  Single-letter functions take plain probability
vectors; process-level ones take the model/source types from
:mod:`markovdetect.markov`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .errors import AtomBudgetError, BoundInapplicableError, SupportViolationWarning
from .markov import HiddenMarkovSource, MarkovModel, stationary

PROB_TOL = 1e-12


def _as_prob(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("expected a 1-d probability vector")
    if p.min() < 0 or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("entries must be >= 0 and sum to 1")
    return p


def entropy(p) -> float:
    """Shannon entropy -sum p ln p, with 0 ln 0 = 0."""
    p = _as_prob(p)
    mask = p > 0
    return float(-np.sum(p[mask] * np.log(p[mask])))


def cross_entropy(p, q) -> float:
    """-E_p[ln q]; +inf (with a warning) where q has a hole in p's support."""
    p, q = _as_prob(p), _as_prob(q)
    mask = p > 0
    if np.any(q[mask] <= 0):
        warnings.warn("q assigns zero mass inside p's support", SupportViolationWarning)
        return math.inf
    return float(-np.sum(p[mask] * np.log(q[mask])))


def kl(p, q) -> float:
    """Relative entropy D(p||q) in nats; +inf on support violation."""
    p, q = _as_prob(p), _as_prob(q)
    mask = p > 0
    if np.any(q[mask] <= 0):
        warnings.warn("q assigns zero mass inside p's support", SupportViolationWarning)
        return math.inf
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def perplexity(p, q) -> float:
    """exp of the cross entropy (nats convention throughout)."""
    return math.exp(cross_entropy(p, q))


def perplexity_ratio(p, q1, q2) -> float:
    """Perplexity of q1 over q2 against the same p: exp(H(p,q1) - H(p,q2))."""
    return math.exp(cross_entropy(p, q1) - cross_entropy(p, q2))


def exponent_from_entropies(h_cross: float, h_self: float) -> float:
    """Detection exponent as the cross-entropy excess over the source entropy."""
    diff = h_cross - h_self
    if diff < -PROB_TOL:
        raise ValueError("cross entropy below entropy: inconsistent inputs")
    return diff


class ChernoffInfo(NamedTuple):
    value: float
    weight: float  # minimizing interpolation weight in [0, 1]


def _chernoff_objective(p, q):
    common = (p > 0) & (q > 0)
    if not np.any(common):
        return None
    lp, lq = np.log(p[common]), np.log(q[common])

    def g(lam: float) -> float:
        return float(logsumexp(lam * lp + (1.0 - lam) * lq))

    return g


def golden_section_min(f, lo: float, hi: float, tol: float = 1e-6) -> float:
    """Location of the minimum of a unimodal f on [lo, hi] to within tol."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def chernoff(p, q, tol: float = 1e-6) -> ChernoffInfo:
    """Chernoff information: worst-case Bayes exponent for p against q.

    Minimizes ln sum p^w q^(1-w) over w in [0, 1] by golden section.  Supports
    are intersected first (flagged when they differ); disjoint supports give
    +inf.
    """
    p, q = _as_prob(p), _as_prob(q)
    if np.any((p > 0) != (q > 0)):
        warnings.warn("supports differ; restricting to the common support",
                      SupportViolationWarning)
    g = _chernoff_objective(p, q)
    if g is None:
        return ChernoffInfo(math.inf, math.nan)
    w = golden_section_min(g, 0.0, 1.0, tol)
    return ChernoffInfo(-g(w), w)


def _stationary_windows(model: MarkovModel, length: int, atom_cap: int, pi=None):
    """(window, mass) pairs for the stationary law of ``length`` consecutive symbols."""
    if pi is None:
        pi = stationary(model)
    k = model.order
    if length < k:
        raise ValueError("window shorter than model order")
    out: list[tuple[tuple[int, ...], float]] = []

    def extend(window: tuple[int, ...], mass: float):
        if len(out) > atom_cap:
            raise AtomBudgetError(f"stationary window enumeration exceeds cap {atom_cap}")
        if len(window) == length:
            out.append((window, mass))
            return
        row = model.row(window[-k:] if k else ())
        for sym, pr in enumerate(row):
            if pr > 0:
                extend(window + (sym,), mass * pr)

    for ctx, mass in pi.items():
        if mass > 0:
            extend(ctx, mass)
    return out


def kl_rate(p_model: MarkovModel, q_model: MarkovModel, atom_cap: int = 65536) -> float:
    """Per-token divergence rate of stationary chain p_model from q_model.

    Both conditionals are read off the longest context either model needs, and
    averaged under p_model's stationary window law.  Equals ``kl`` of the rows
    for order-0 pairs; +inf when q_model misses mass somewhere p_model walks.
    """
    if p_model.alphabet.size != q_model.alphabet.size:
        raise ValueError("models must share an alphabet")
    kp, kq = p_model.order, q_model.order
    span = max(kp, kq)
    total = 0.0
    for window, mass in _stationary_windows(p_model, span, atom_cap):
        row_p = p_model.row(window[span - kp:] if kp else ())
        row_q = q_model.row(window[span - kq:] if kq else ())
        for sym in range(p_model.alphabet.size):
            pp = row_p[sym]
            if pp > 0:
                qq = row_q[sym]
                if qq <= 0:
                    warnings.warn("q_model assigns zero mass on p_model's support",
                                  SupportViolationWarning)
                    return math.inf
                total += mass * pp * math.log(pp / qq)
    return total


# -- continuity structure of a stationary source ---------------------------


@dataclass(frozen=True)
class ContinuityProfile:
    """Per-depth context sensitivity of next-symbol conditionals.

    ``rates[i]`` is the largest change of any conditional probability between
    two histories that agree on their most recent ``i + 1`` symbols; ``floor``
    is the smallest conditional probability the source ever assigns.
    """

    rates: tuple[float, ...]
    floor: float
    alphabet_size: int

    def __post_init__(self):
        if not self.rates:
            raise ValueError("profile needs at least one rate")
        if any(r < -PROB_TOL or r > 1 + PROB_TOL for r in self.rates):
            raise ValueError("rates must lie in [0, 1]")
        if any(b > a + 1e-9 for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("rates must be nonincreasing in the overlap depth")
        if not 0 < self.floor <= 1:
            raise ValueError("floor must lie in (0, 1]")
        if self.alphabet_size < 2:
            raise ValueError("alphabet size must be >= 2")

    @property
    def horizon(self) -> int:
        return len(self.rates)

    @property
    def rate_sum(self) -> float:
        return float(sum(self.rates))

    def to_json(self) -> dict:
        return {
            "gamma": [float(r) for r in self.rates],
            "p": float(self.floor),
            "alpha": amplification_factor(self),
            "horizon": self.horizon,
            "amax": self.alphabet_size,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ContinuityProfile":
        return cls(tuple(obj["gamma"]), obj["p"], obj["amax"])


def amplification_factor(profile: ContinuityProfile) -> float:
    """1 / prod(1 - rate) over the horizon; tracks history amplification."""
    prod = 1.0
    for r in profile.rates:
        if r >= 1.0:
            raise BoundInapplicableError("a continuity rate of 1 leaves no contraction")
        prod *= 1.0 - r
    return 1.0 / prod


def estimation_coefficient(profile: ContinuityProfile, k: int) -> float:
    """Prefactor mapping the depth-k continuity rate into the fit-error bound.

    Continuous in the rate: when rate(k) = 0 the limiting value
    ``A / prod(1 - A*rate(j))^2`` is returned.
    """
    if not 1 <= k <= profile.horizon:
        raise ValueError(f"k must lie in [1, {profile.horizon}]")
    a = profile.alphabet_size
    prod = 1.0
    for r in profile.rates:
        scaled = a * r
        if scaled >= 1.0:
            raise BoundInapplicableError(
                "alphabet_size * rate >= 1; the estimation bound does not apply"
            )
        prod *= (1.0 - scaled) ** 2
    rk = profile.rates[k - 1]
    if rk == 0.0:
        return a / prod
    return (1.0 - (1.0 - a * rk) ** k) / (k * rk * prod)


def _conditional_table(source, m: int, pi=None) -> dict[tuple[int, ...], np.ndarray]:
    """Exact next-symbol conditionals for every positive-probability length-m context."""
    if isinstance(source, HiddenMarkovSource):
        a = source.alphabet_size
        table: dict[tuple[int, ...], np.ndarray] = {}

        def walk(ctx: tuple[int, ...], belief: np.ndarray):
            if len(ctx) == m:
                table[ctx] = (belief @ source.transition) @ source.emission
                return
            prop = belief @ source.transition if ctx else source.start
            for sym in range(a):
                nxt = prop * source.emission[:, sym]
                z = nxt.sum()
                if z > 0:
                    walk(ctx + (sym,), nxt / z)

        walk((), source.start)
        return table

    if isinstance(source, MarkovModel):
        k = source.order
        if pi is None:
            pi = stationary(source)
        if m >= k:
            table = {}
            for window, mass in _stationary_windows(source, m, atom_cap=4 ** 12, pi=pi):
                if mass > 0:
                    table[window] = source.row(window[m - k:] if k else ())
            return table
        groups: dict[tuple[int, ...], np.ndarray] = {}
        weights: dict[tuple[int, ...], float] = {}
        for ctx, mass in pi.items():
            if mass <= 0:
                continue
            suffix = ctx[k - m:]
            groups.setdefault(suffix, np.zeros(source.alphabet.size))
            groups[suffix] += mass * source.transitions[ctx]
            weights[suffix] = weights.get(suffix, 0.0) + mass
        return {s: groups[s] / weights[s] for s in groups}

    raise TypeError(f"unsupported source type {type(source).__name__}")


def continuity_rate(source, k: int, m_max: int, atom_cap: int = 65536) -> float:
    """Largest conditional-probability gap between histories sharing their last k symbols.

    Exhausts all context lengths m in [k, m_max]; exact within that horizon.
    """
    if k < 1 or m_max < k:
        raise ValueError("need 1 <= k <= m_max")
    a = _alphabet_size(source)
    if a ** m_max > atom_cap:
        raise AtomBudgetError(f"{a}**{m_max} contexts exceed cap {atom_cap}")
    worst = 0.0
    pi = stationary(source) if isinstance(source, MarkovModel) else None
    for m in range(k, m_max + 1):
        table = _conditional_table(source, m, pi)
        worst = max(worst, _suffix_spread(table, k))
    return worst


def _suffix_spread(table: dict[tuple[int, ...], np.ndarray], k: int) -> float:
    hi: dict[tuple[int, ...], np.ndarray] = {}
    lo: dict[tuple[int, ...], np.ndarray] = {}
    for ctx, dist in table.items():
        sfx = ctx[len(ctx) - k:]
        if sfx in hi:
            hi[sfx] = np.maximum(hi[sfx], dist)
            lo[sfx] = np.minimum(lo[sfx], dist)
        else:
            hi[sfx] = dist.copy()
            lo[sfx] = dist.copy()
    return max((float((hi[s] - lo[s]).max()) for s in hi), default=0.0)


def smoothing_floor(source, m_max: int, atom_cap: int = 65536) -> float:
    """Smallest next-symbol probability over all positive contexts up to m_max."""
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    a = _alphabet_size(source)
    if a ** m_max > atom_cap:
        raise AtomBudgetError(f"{a}**{m_max} contexts exceed cap {atom_cap}")
    pi = stationary(source) if isinstance(source, MarkovModel) else None
    floor = 1.0
    for m in range(1, m_max + 1):
        for dist in _conditional_table(source, m, pi).values():
            floor = min(floor, float(dist.min()))
    return floor


def estimate_profile(source, k_max: int, m_max: int, atom_cap: int = 65536) -> ContinuityProfile:
    """Profile with exact rates for overlap depths 1..k_max within horizon m_max.

    Rates are truncated at m_max: deeper history dependence, if any, is
    assumed to have decayed to zero beyond it.
    """
    if not 1 <= k_max <= m_max:
        raise ValueError("need 1 <= k_max <= m_max")
    a = _alphabet_size(source)
    if a ** m_max > atom_cap:
        raise AtomBudgetError(f"{a}**{m_max} contexts exceed cap {atom_cap}")
    pi = stationary(source) if isinstance(source, MarkovModel) else None
    rates = [0.0] * k_max
    floor = 1.0
    for m in range(1, m_max + 1):
        table = _conditional_table(source, m, pi)
        for dist in table.values():
            floor = min(floor, float(dist.min()))
        for k in range(1, min(m, k_max) + 1):
            rates[k - 1] = max(rates[k - 1], _suffix_spread(table, k))
    if floor <= 0:
        raise BoundInapplicableError("source assigns a zero conditional; no positive floor")
    return ContinuityProfile(tuple(rates), floor, a)


def _alphabet_size(source) -> int:
    if isinstance(source, HiddenMarkovSource):
        return source.alphabet_size
    if isinstance(source, MarkovModel):
        return source.alphabet.size
    raise TypeError(f"unsupported source type {type(source).__name__}")
