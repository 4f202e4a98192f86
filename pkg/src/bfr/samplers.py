"""Path samplers: the accelerated-path Gibbs sweep, the sequential
importance path sampler, their two-path versions, and the estimators built
on their output.

A side's factor table (``SideLaw.log_psi``) plays the role of the psi table:
``log_psi[j, l]`` is the log factor of a jump of size ``l`` at location ``j``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import spath
from ._backend import BACKEND, kernels, python_kernels
from .posterior import (
    PathLawContext,
    SideLaw,
    SurvivalData,
    UniformPrior,
    make_context,
)
from .process import CRM, SupportError

log = logging.getLogger(__name__)

#: Replicates per independently seeded block; fixes the RNG layout so results
#: do not depend on the number of workers.
BLOCK_SIZE = 250

_LOG_FACT = np.zeros(1)


def log_factorials(n: int) -> np.ndarray:
    global _LOG_FACT
    if len(_LOG_FACT) <= n:
        _LOG_FACT = gammaln(np.arange(2 * n + 2, dtype=float) + 1.0)
    return _LOG_FACT


def _psi_of(psi) -> np.ndarray:
    return psi.log_psi if isinstance(psi, SideLaw) else np.ascontiguousarray(psi, dtype=float)


# ---------------------------------------------------------------------------
# AP sampler
# ---------------------------------------------------------------------------

def ap_step_weights(path, r: int, log_psi) -> tuple[np.ndarray, np.ndarray, int]:
    """Candidate values and local log weights for step ``r`` of a sweep.

    Returns ``(ks, log_w, q)`` where ``q`` is the next jump location after r.
    """
    s = list(path)
    q = r + 1
    while s[q] == s[q - 1]:
        q += 1
    lo, sq = s[r - 1], s[q]
    ks = np.arange(lo, min(r, sq - 1) + 1)
    lf = log_factorials(len(s))
    lw = np.empty(len(ks))
    for i, k in enumerate(ks):
        v = 0.0
        if k > lo:
            a, b = r - 1 - lo, r - k
            v += lf[a] - lf[b] - lf[a - b] + log_psi[r, k - lo]
        a, b = q - 1 - k, q - sq
        v += lf[a] - lf[b] - lf[a - b] + log_psi[q, sq - k]
        lw[i] = v
    return ks, lw, q


def _full_log_phi(path, log_psi) -> float:
    return spath.log_card(path) + sum(log_psi[j, l] for j, l in spath.jumps(path))


def ap_sweep(path, psi, rng, debug: bool = False, backend=None) -> tuple[int, ...]:
    """One AP transition cycle (steps r = 1..n-1) starting from ``path``."""
    lp = _psi_of(psi)
    s = np.array(path, dtype=np.int64)
    n = len(s) - 1
    if n <= 1:
        return tuple(int(v) for v in s)
    u = rng.random(n - 1)
    if debug:
        for r in range(1, n):
            ks, lw, q = ap_step_weights(s, r, lp)
            full = []
            for k in ks:
                cand = s.copy()
                cand[r:q] = k
                full.append(_full_log_phi(cand, lp))
            diff = np.array(full) - lw
            if not np.allclose(diff, diff[0], rtol=0, atol=1e-9 * max(1.0, abs(diff[0]))):
                raise AssertionError(f"local AP weights disagree with full phi at step {r}")
            pick, _ = python_kernels._choose(list(lw), len(lw), u[r - 1])
            s[r:q] = ks[pick]
        return tuple(int(v) for v in s)
    (backend or kernels).ap_sweep(s, lp, log_factorials(n), u)
    return tuple(int(v) for v in s)


@dataclass
class ChainResult:
    states: list  # kept (S-, S+) pairs
    theta: float
    cycles: int
    burn_in: int
    thin: int


def aps_chain(theta: float, data: SurvivalData, M: int, burn_in: int = 5000, thin: int = 5,
              rng=None, ctx: PathLawContext | None = None, init=None, crm: CRM | None = None):
    """Two-path AP chain at fixed theta; keeps ``M`` states after burn-in.

    Each cycle sweeps the negative-side path then the positive-side path.
    Starting paths default to the identity path on both sides.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    ctx = make_context(data, theta, crm) if ctx is None else ctx
    if init is None:
        sm = np.arange(ctx.minus.k + 1, dtype=np.int64)
        sp = np.arange(ctx.plus.k + 1, dtype=np.int64)
    else:
        sm = np.array(spath.validate(init[0]), dtype=np.int64)
        sp = np.array(spath.validate(init[1]), dtype=np.int64)
    k_m, k_p = ctx.minus.k, ctx.plus.k
    lf = log_factorials(max(k_m, k_p) + 1)
    pm, pp = ctx.minus.log_psi, ctx.plus.log_psi
    states = []
    total = burn_in + M * thin
    for c in range(1, total + 1):
        if k_m > 1:
            kernels.ap_sweep(sm, pm, lf, rng.random(k_m - 1))
        if k_p > 1:
            kernels.ap_sweep(sp, pp, lf, rng.random(k_p - 1))
        if c > burn_in and (c - burn_in) % thin == 0:
            states.append((tuple(sm.tolist()), tuple(sp.tolist())))
    return ChainResult(states, theta, total, burn_in, thin)


# ---------------------------------------------------------------------------
# SIP sampler
# ---------------------------------------------------------------------------

def sip_draw(n: int, psi, rng, permutation=None, backend=None) -> tuple[tuple[int, ...], float]:
    """Sequentially draw a path of ``n + 1`` coordinates; returns (path, log sigma)."""
    if n <= 1:
        return tuple(range(n + 1)), 0.0
    lp = _psi_of(psi)
    if permutation is None:
        perm = rng.permutation(n - 1).astype(np.int64) + 1
    else:
        perm = np.asarray(permutation, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(1, n)):
            raise ValueError("permutation must be a permutation of 1..n-1")
    u = rng.random(n - 1)
    out = np.zeros(n + 1, dtype=np.int64)
    log_sigma = (backend or kernels).sip_draw(n, lp, log_factorials(n), perm, u, out)
    return tuple(out.tolist()), float(log_sigma)


@dataclass(frozen=True)
class WeightedDraw:
    S_minus: tuple
    S_plus: tuple
    log_weight: float
    theta: float | None = None
    parts: dict = field(default_factory=dict, compare=False)


def sips_draw(theta: float, data: SurvivalData, rng, ctx: PathLawContext | None = None,
              permutations=(None, None)) -> WeightedDraw:
    """Independent SIP draws for both sides at fixed theta."""
    ctx = make_context(data, theta) if ctx is None else ctx
    sm, lsm = sip_draw(ctx.minus.k, ctx.minus, rng, permutations[0])
    sp, lsp = sip_draw(ctx.plus.k, ctx.plus, rng, permutations[1])
    lpm, lpp = ctx.minus.log_phi(sm), ctx.plus.log_phi(sp)
    parts = {"log_phi_minus": lpm, "log_phi_plus": lpp, "log_sigma_minus": lsm, "log_sigma_plus": lsp}
    return WeightedDraw(sm, sp, lpm + lpp - lsm - lsp, None, parts)


def check_proposal(proposal_rho: UniformPrior, prior_pi: UniformPrior, tau: float) -> None:
    if not proposal_rho.covers(prior_pi):
        raise ValueError(f"proposal {proposal_rho} does not cover prior {prior_pi}")
    if not (0.0 < proposal_rho.low and proposal_rho.high < tau):
        raise ValueError("proposal support must lie inside (0, tau)")


def sips_theta_draw(data: SurvivalData, proposal_rho: UniformPrior, prior_pi: UniformPrior, rng,
                    crm: CRM | None = None, return_context: bool = False):
    """Draw theta from the proposal, then both paths; weight targets the joint."""
    comp = data.complete
    while True:
        theta = float(proposal_rho.sample(rng))
        if not np.any(comp == theta) and 0.0 < theta < data.tau:
            break
    ctx = make_context(data, theta, crm)
    d = sips_draw(theta, data, rng, ctx)
    parts = dict(d.parts)
    parts["log_laplace"] = ctx.log_laplace
    parts["log_prior_over_proposal"] = prior_pi.logpdf(theta) - proposal_rho.logpdf(theta)
    lw = d.log_weight + parts["log_laplace"] + parts["log_prior_over_proposal"]
    draw = WeightedDraw(d.S_minus, d.S_plus, lw, theta, parts)
    return (draw, ctx) if return_context else draw


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def weighted_estimate(log_weights, values):
    """Self-normalised importance estimate from log weights.

    ``values`` is ``(M,)`` or ``(M, G)``.  Returns ``(estimate, std_error,
    ess)``; the standard error is the delta-method
    ``sqrt(sum w^2 (h - est)^2) / sum w``.
    """
    lw = np.asarray(log_weights, dtype=float)
    h = np.asarray(values, dtype=float)
    if lw.size == 0 or not np.any(np.isfinite(lw)):
        raise ValueError("no draw has a finite weight")
    w = np.exp(lw - np.max(lw[np.isfinite(lw)]))
    w = np.where(np.isfinite(lw), w, 0.0)
    sw = w.sum()
    hw = h.reshape(len(w), -1)
    est = (w[:, None] * hw).sum(axis=0) / sw
    var = (w[:, None] ** 2 * (hw - est) ** 2).sum(axis=0) / sw ** 2
    ess = float(sw ** 2 / np.sum(w ** 2))
    shape = h.shape[1:]
    return est.reshape(shape), np.sqrt(var).reshape(shape), ess


def estimate_from_draws(draws, h):
    """``weighted_estimate`` over WeightedDraws with ``h(draw)``."""
    return weighted_estimate([d.log_weight for d in draws], [h(d) for d in draws])


def log_mean_weight(log_weights) -> tuple[float, float]:
    """``log((1/M) sum exp(lw))`` and its delta-method standard error."""
    lw = np.asarray(log_weights, dtype=float)
    mx = np.max(lw)
    w = np.exp(lw - mx)
    mean = w.mean()
    se = w.std(ddof=1) / math.sqrt(len(w)) / mean if len(w) > 1 else 0.0
    return float(mx + np.log(mean)), float(se)


def ergodic_estimate(values, batches: int | None = None):
    """Ergodic average with a batch-means standard error."""
    h = np.asarray(values, dtype=float)
    M = h.shape[0]
    est = h.mean(axis=0)
    b = batches or max(2, int(math.sqrt(M)))
    size = M // b
    if size < 1:
        return est, np.full_like(est, np.nan)
    means = h[: b * size].reshape(b, size, *h.shape[1:]).mean(axis=1)
    se = means.std(axis=0, ddof=1) / math.sqrt(b)
    return est, se


class HazardGrid:
    """Evaluates a_lambda on a fixed time grid for many path pairs."""

    def __init__(self, ctx: PathLawContext, t):
        self.ctx = ctx
        self.t = np.atleast_1d(np.asarray(t, dtype=float))
        self.neg, x = ctx.distances(self.t)
        self.parts = []
        for mask, side in ((self.neg, ctx.minus), (~self.neg, ctx.plus)):
            xs = x[mask]
            logH = side.log_H(xs) if len(xs) else np.zeros((0, side.lmax + 1))
            self.parts.append((mask, side, xs, logH, np.exp(logH[:, 1]) if len(xs) else np.zeros(0)))

    def __call__(self, S_minus, S_plus) -> np.ndarray:
        out = np.empty(len(self.t))
        for (mask, side, xs, logH, prior), path in zip(self.parts, (S_minus, S_plus)):
            if not len(xs):
                continue
            val = prior
            if side.k:
                s = np.asarray(path, dtype=np.int64)
                j = np.nonzero(np.diff(s))[0] + 1
                val = prior + side._jump_terms(j, s[j] - s[j - 1], xs, logH)
            out[mask] = val
        return out


def safe_grid(t_min: float, t_max: float, points: int, avoid) -> np.ndarray:
    """Evenly spaced grid; points landing on ``avoid`` move by half a step."""
    if points < 2:
        raise ValueError("grid needs at least two points")
    t = np.linspace(t_min, t_max, points)
    step = (t_max - t_min) / (points - 1)
    for a in np.atleast_1d(avoid):
        hit = np.isclose(t, a, rtol=0, atol=1e-12)
        t = np.where(hit, t + 0.5 * step if a < t_max else t - 0.5 * step, t)
    return t


# ---------------------------------------------------------------------------
# Block-parallel drivers
# ---------------------------------------------------------------------------

def _blocks(M: int):
    nb = (M + BLOCK_SIZE - 1) // BLOCK_SIZE
    return [(i, min(BLOCK_SIZE, M - i * BLOCK_SIZE)) for i in range(nb)]


def _sips_block(args):
    data, theta, crm, t, seed_seq, count = args
    rng = np.random.default_rng(seed_seq)
    ctx = make_context(data, theta, crm)
    grid = HazardGrid(ctx, t) if t is not None else None
    lw = np.empty(count)
    rows = np.empty((count, 0 if t is None else len(t)))
    for i in range(count):
        d = sips_draw(theta, data, rng, ctx)
        lw[i] = d.log_weight
        if grid is not None:
            rows[i] = grid(d.S_minus, d.S_plus)
    return lw, rows


def _sips_theta_block(args):
    data, prior, proposal, crm, t, seed_seq, count = args
    rng = np.random.default_rng(seed_seq)
    lw = np.empty(count)
    thetas = np.empty(count)
    rows = np.empty((count, 0 if t is None else len(t)))
    for i in range(count):
        d, ctx = sips_theta_draw(data, proposal, prior, rng, crm, return_context=True)
        lw[i], thetas[i] = d.log_weight, d.theta
        if t is not None:
            tt = np.where(t == d.theta, np.nextafter(t, np.inf), t)
            rows[i] = HazardGrid(ctx, tt)(d.S_minus, d.S_plus)
    return lw, thetas, rows


def _run_blocks(fn, make_args, M: int, seed: int, workers: int):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seqs = ss.spawn(len(_blocks(M)))
    jobs = [make_args(s, c) for s, (_, c) in zip(seqs, _blocks(M))]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def run_sips(data: SurvivalData, theta: float, M: int, seed: int, t=None, workers: int = 1,
             crm: CRM | None = None):
    """``M`` SIPs draws at fixed theta; returns (log weights, hazard rows)."""
    res = _run_blocks(_sips_block, lambda s, c: (data, theta, crm, t, s, c), M, seed, workers)
    return np.concatenate([r[0] for r in res]), np.vstack([r[1] for r in res])


def run_sips_theta(data: SurvivalData, prior: UniformPrior, proposal: UniformPrior, M: int,
                   seed: int, t=None, workers: int = 1, crm: CRM | None = None):
    """``M`` SIPs(theta) draws; returns (log weights, thetas, hazard rows)."""
    check_proposal(proposal, prior, data.tau)
    res = _run_blocks(_sips_theta_block, lambda s, c: (data, prior, proposal, crm, t, s, c),
                      M, seed, workers)
    return (np.concatenate([r[0] for r in res]), np.concatenate([r[1] for r in res]),
            np.vstack([r[2] for r in res]))


def interval_probabilities(thetas, log_weights, edges):
    """Weighted estimates of P(theta in [edges[i], edges[i+1])) with std errors."""
    thetas = np.asarray(thetas)
    edges = np.asarray(edges, dtype=float)
    ind = np.stack([(thetas >= a) & (thetas < b) for a, b in zip(edges[:-1], edges[1:])], axis=1)
    est, se, _ = weighted_estimate(log_weights, ind.astype(float))
    return est, se


__all__ = [
    "BACKEND",
    "ap_sweep",
    "ap_step_weights",
    "aps_chain",
    "sip_draw",
    "sips_draw",
    "sips_theta_draw",
    "weighted_estimate",
    "estimate_from_draws",
    "ergodic_estimate",
    "log_mean_weight",
    "HazardGrid",
    "safe_grid",
    "run_sips",
    "run_sips_theta",
    "interval_probabilities",
    "WeightedDraw",
    "SupportError",
]
