"""Synthetic lifetimes from piecewise exponential-linear hazards, right
censored at a termination time, and the at-risk (TTT) count."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .posterior import SurvivalData

log = logging.getLogger(__name__)

INVERSION_XTOL = 1e-12


@dataclass(frozen=True)
class TestHazard:
    """Hazard ``exp(a + b t)`` on each segment ``(start, end]``.

    ``segments`` is a tuple of ``(start, end, a, b)`` covering ``(0, inf)``;
    ``b == 0`` gives a constant piece.
    """

    name: str
    segments: tuple
    tau: float

    __test__ = False

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for s, e, a, b in self.segments:
            mask = (t > s) & (t <= e)
            out = np.where(mask, np.exp(a + b * t), out)
        return out

    def _piece(self, s, e, a, b):
        """Integral of the hazard over ``(s, e]``."""
        if b == 0:
            return math.exp(a) * (e - s)
        return (math.exp(a + b * e) - math.exp(a + b * s)) / b

    def cumulative(self, t: float) -> float:
        total = 0.0
        for s, e, a, b in self.segments:
            if t <= s:
                break
            total += self._piece(s, min(t, e), a, b)
        return total

    def invert(self, E: float) -> float:
        """Solve ``cumulative(T) = E``."""
        acc = 0.0
        for s, e, a, b in self.segments:
            mass = self._piece(s, e, a, b) if math.isfinite(e) else math.inf
            if acc + mass >= E:
                need = E - acc
                if b == 0:
                    return s + need / math.exp(a)
                if math.isinf(e):
                    # bracket the root before bisecting
                    hi = s + 1.0
                    while self._piece(s, hi, a, b) < need:
                        hi = s + 2.0 * (hi - s)
                    e = hi
                return brentq(lambda x: self._piece(s, x, a, b) - need, s, e, xtol=INVERSION_XTOL, rtol=4 * np.finfo(float).eps)
            acc += mass
        return math.inf

    def censoring_probability(self, tau: float | None = None) -> float:
        return math.exp(-self.cumulative(self.tau if tau is None else tau))


LAMBDA1 = TestHazard("lambda1", ((0.0, 0.5, 0.0, 0.0), (0.5, 3.0, -1.0, 0.0), (3.0, math.inf, -2.0 / 3.0, 0.0)), 4.0)
LAMBDA2 = TestHazard("lambda2", ((0.0, 1.0, 0.0, -2.5), (1.0, 5.0, -2.5, 0.0), (5.0, math.inf, -6.0, 0.7)), 8.0)
#: A strictly increasing hazard, the monotone case for the Bayes test.
INCREASING = TestHazard("increasing", ((0.0, math.inf, -1.5, 0.5),), 4.0)

HAZARDS = {h.name: h for h in (LAMBDA1, LAMBDA2, INCREASING)}


def get_hazard(name: str) -> TestHazard:
    try:
        return HAZARDS[name]
    except KeyError:
        raise ValueError(f"unknown hazard {name!r}; choose from {sorted(HAZARDS)}") from None


def _break_ties(t: np.ndarray, status: np.ndarray) -> np.ndarray:
    t = t.copy()
    comp = np.nonzero(status == 1)[0]
    order = comp[np.argsort(t[comp], kind="mergesort")]
    for prev, cur in zip(order[:-1], order[1:]):
        if t[cur] <= t[prev]:
            log.warning("tied complete times at %r; nudging", t[cur])
            t[cur] = np.nextafter(t[prev], np.inf)
    return t


def simulate(hazard: TestHazard, N: int, tau: float | None = None, rng=None,
             risk=None) -> SurvivalData:
    """Draw ``N`` lifetimes by inverting the cumulative hazard at Exp(1) draws.

    ``risk`` (length ``N``) multiplies the hazard of each record, as in a
    proportional-hazards model.  Lifetimes beyond ``tau`` are censored there.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    tau = hazard.tau if tau is None else float(tau)
    if not tau > 0:
        raise ValueError("tau must be positive")
    rng = np.random.default_rng() if rng is None else rng
    E = rng.exponential(size=N)
    if risk is not None:
        E = E / np.asarray(risk, dtype=float)
    t_tau = hazard.cumulative(tau)
    T = np.array([hazard.invert(e) if e < t_tau else tau for e in E])
    status = (E < t_tau).astype(int)
    # a numerically-at-tau event is treated as censored
    status[T >= tau] = 0
    T = np.where(status == 1, T, tau)
    return SurvivalData(_break_ties(T, status), status, tau)


def simulate_cox(hazard: TestHazard, N: int, beta, tau: float | None = None, rng=None) -> SurvivalData:
    """Proportional-hazards data with standard normal covariates."""
    rng = np.random.default_rng() if rng is None else rng
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    X = rng.standard_normal((N, len(beta)))
    d = simulate(hazard, N, tau, rng, risk=np.exp(X @ beta))
    return SurvivalData(d.times, d.status, d.tau, X)


def ttt(data: SurvivalData, t: float) -> int:
    """Number of records still at risk at ``t`` (``T_i >= t``)."""
    if not 0.0 <= t <= data.tau:
        raise ValueError(f"t={t} outside [0, tau]")
    return int(np.sum(data.times >= t))


def censoring_fraction(data: SurvivalData) -> float:
    return float(np.mean(data.status == 0))
