"""Choosing the next point and fidelity from finite candidate pools.

Ties always go to the low-fidelity pool first, then to the lowest row index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gp_core import CondensedGP
from .mf_model import FidelityLevel, MultiFidelityModel

LOW = FidelityLevel.LOW
HIGH = FidelityLevel.HIGH


class PoolExhaustedError(ValueError):
    """Raised when a candidate pool has no unconsumed rows left."""


@dataclass(frozen=True)
class CostModel:
    cost_low: float
    cost_high: float

    def __post_init__(self):
        if not (self.cost_low > 0 and self.cost_high >= self.cost_low):
            raise ValueError(f"need cost_high >= cost_low > 0, got {self.cost_high}:{self.cost_low}")

    @classmethod
    def from_ratio(cls, text: str) -> "CostModel":
        """Parse ``"H:L"``, e.g. ``"10:1"``."""
        try:
            high, low = (float(part) for part in text.split(":"))
        except ValueError as exc:
            raise ValueError(f"cost ratio must look like 'H:L', got {text!r}") from exc
        return cls(low, high)

    def of(self, level: FidelityLevel) -> float:
        return self.cost_low if FidelityLevel(level) is LOW else self.cost_high


@dataclass
class CandidatePool:
    """Prospective inputs for each fidelity, consumed without replacement."""

    low: np.ndarray
    high: np.ndarray
    low_consumed: np.ndarray = field(default=None)
    high_consumed: np.ndarray = field(default=None)

    def __post_init__(self):
        self.low = np.atleast_2d(np.asarray(self.low, dtype=float))
        self.high = np.atleast_2d(np.asarray(self.high, dtype=float))
        if self.low.shape[1] != self.high.shape[1]:
            raise ValueError("pools must share the input dimension")
        if self.low_consumed is None:
            self.low_consumed = np.zeros(len(self.low), dtype=bool)
        if self.high_consumed is None:
            self.high_consumed = np.zeros(len(self.high), dtype=bool)

    def rows(self, level: FidelityLevel) -> np.ndarray:
        return self.low if FidelityLevel(level) is LOW else self.high

    def available(self, level: FidelityLevel) -> np.ndarray:
        """Indices of unconsumed rows, ascending."""
        consumed = self.low_consumed if FidelityLevel(level) is LOW else self.high_consumed
        return np.flatnonzero(~consumed)

    def consume(self, level: FidelityLevel, index: int) -> None:
        consumed = self.low_consumed if FidelityLevel(level) is LOW else self.high_consumed
        if consumed[index]:
            raise ValueError(f"{FidelityLevel(level).value} candidate {index} already consumed")
        consumed[index] = True

    def remaining(self) -> tuple[int, int]:
        return int((~self.low_consumed).sum()), int((~self.high_consumed).sum())


@dataclass(frozen=True)
class Decision:
    point: np.ndarray
    level: FidelityLevel
    score: float
    index: int


def _first_argmax(scores: np.ndarray) -> int:
    return int(np.argmax(scores))


def select_uncertainty(gp: CondensedGP, pool, level: FidelityLevel = HIGH) -> Decision:
    """Pool row with the largest predictive variance."""
    pool = np.atleast_2d(np.asarray(pool, dtype=float))
    if pool.shape[0] == 0 or pool.size == 0:
        raise ValueError("candidate pool is empty")
    _, var = gp.predict_many(pool)
    i = _first_argmax(var)
    return Decision(pool[i].copy(), FidelityLevel(level), float(var[i]), i)


def _nearest(pool: CandidatePool, level: FidelityLevel, x: np.ndarray) -> int:
    idx = pool.available(level)
    if idx.size == 0:
        raise PoolExhaustedError(f"{level.value}-fidelity candidate pool is exhausted")
    d2 = np.sum((pool.rows(level)[idx] - x) ** 2, axis=1)
    return int(idx[np.argmin(d2)])


def select_mf_ucr(model: MultiFidelityModel, pools: CandidatePool, cost: CostModel) -> Decision:
    """Max MF-UCR: maximize total predictive std, then choose the fidelity by cost.

    The point maximizes ``sqrt(var_total)`` over both pools. Low fidelity is
    chosen when ``sigma_eta / C_L >= sigma_delta / C_H`` there. If the point
    came from the other fidelity's pool, the nearest unconsumed row of the
    chosen pool is taken instead.
    """
    lo, hi = pools.available(LOW), pools.available(HIGH)
    if lo.size + hi.size == 0:
        raise PoolExhaustedError("both candidate pools are exhausted")
    X = np.vstack([pools.low[lo], pools.high[hi]])
    _, v_total, v_eta, v_delta = model.predict_many(X)
    sigma = np.sqrt(v_total)
    i = _first_argmax(sigma)
    source = LOW if i < lo.size else HIGH
    index = int(lo[i]) if source is LOW else int(hi[i - lo.size])
    x_star = X[i]

    level = LOW if np.sqrt(v_eta[i]) / cost.cost_low >= np.sqrt(v_delta[i]) / cost.cost_high else HIGH
    if level is not source:
        index = _nearest(pools, level, x_star)
    return Decision(pools.rows(level)[index].copy(), level, float(sigma[i]), index)


def _best_of(pools: CandidatePool, low_scores: np.ndarray, high_scores: np.ndarray) -> Decision:
    lo, hi = pools.available(LOW), pools.available(HIGH)
    scores = np.concatenate([low_scores, high_scores])
    i = _first_argmax(scores)
    if i < lo.size:
        level, index = LOW, int(lo[i])
    else:
        level, index = HIGH, int(hi[i - lo.size])
    return Decision(pools.rows(level)[index].copy(), level, float(scores[i]), index)


def _check_pools(pools: CandidatePool) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = pools.available(LOW), pools.available(HIGH)
    if lo.size + hi.size == 0:
        raise PoolExhaustedError("both candidate pools are exhausted")
    return lo, hi


def if_ucr_scores(model: MultiFidelityModel, pools: CandidatePool, cost: CostModel):
    """Per-candidate scores (low pool, high pool) for Max IF-UCR."""
    lo, hi = _check_pools(pools)
    s_low = np.empty(0)
    s_high = np.empty(0)
    if lo.size:
        _, _, v_eta, _ = model.predict_many(pools.low[lo])
        s_low = np.sqrt(v_eta) / cost.cost_low
    if hi.size:
        _, _, _, v_delta = model.predict_many(pools.high[hi])
        s_high = np.sqrt(v_delta) / cost.cost_high
    return s_low, s_high


def select_if_ucr(model: MultiFidelityModel, pools: CandidatePool, cost: CostModel) -> Decision:
    """Max IF-UCR: one global argmax of ``sigma_eta/C_L`` (LF rows) and ``sigma_delta/C_H`` (HF rows)."""
    return _best_of(pools, *if_ucr_scores(model, pools, cost))


def if_ucr_bel_scores(model: MultiFidelityModel, pools: CandidatePool, cost: CostModel):
    """Per-candidate believer scores (low pool, high pool) for Max IF-UCR-Bel."""
    lo, hi = _check_pools(pools)
    out = []
    for idx, level in ((lo, LOW), (hi, HIGH)):
        if idx.size == 0:
            out.append(np.empty(0))
            continue
        X = pools.rows(level)[idx]
        _, v_total, _, _ = model.predict_many(X)
        v_bel = model.believer_many(X, X, level)
        out.append((np.sqrt(v_total) - np.sqrt(v_bel)) / cost.of(level))
    return out[0], out[1]


def select_if_ucr_bel(model: MultiFidelityModel, pools: CandidatePool, cost: CostModel) -> Decision:
    """Max IF-UCR-Bel: largest drop in total std per unit cost from a believer at the candidate."""
    return _best_of(pools, *if_ucr_bel_scores(model, pools, cost))


STRATEGIES = {
    "mf_ucr": select_mf_ucr,
    "if_ucr": select_if_ucr,
    "if_ucr_bel": select_if_ucr_bel,
}
