"""Proportional-hazards extension: covariate-weighted exposure and a
Metropolis-within-Gibbs sampler over paths, atoms, change point and
regression coefficients."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .posterior import (
    Atom,
    DataError,
    SurvivalData,
    UniformPrior,
    draw_y_Q,
    make_context,
    split,
)
from .process import CRM, GammaCRM, build_gN, laplace_functional_log
from .samplers import HazardGrid, log_factorials

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoxData:
    """Survival data with an ``N x p`` covariate matrix."""

    data: SurvivalData

    def __post_init__(self):
        if self.data.covariates is None:
            raise DataError("proportional-hazards data needs covariates")

    @property
    def X(self) -> np.ndarray:
        return self.data.covariates

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def risk(self, beta) -> np.ndarray:
        return np.exp(self.X @ np.asarray(beta, dtype=float))


def build_gN_beta(data: CoxData, beta, theta: float):
    """Exposure with each at-risk indicator weighted by ``exp(beta'x)``."""
    return build_gN(data.data, theta, weights=data.risk(beta))


@dataclass(frozen=True)
class CoxState:
    S_minus: tuple
    S_plus: tuple
    atoms_minus: tuple
    atoms_plus: tuple
    theta: float
    beta: np.ndarray = field(compare=False)


@dataclass
class CoxConfig:
    prior_theta: UniformPrior
    beta_prior_sd: float = 1.0
    proposal_sd_theta: float | None = None
    proposal_sd_beta: float | None = None
    cycles: int = 1000
    burn_in: int = 500
    thin: int = 1
    theta0: float | None = None
    beta0: np.ndarray | None = None
    freeze_theta: bool = False
    freeze_beta: bool = False
    beta_update: str = "joint"  # or "componentwise"
    crm: CRM | None = None


@dataclass
class CoxChain:
    states: list
    accept_theta: float
    accept_beta: float
    config: CoxConfig

    def beta_draws(self) -> np.ndarray:
        return np.array([s.beta for s in self.states])

    def theta_draws(self) -> np.ndarray:
        return np.array([s.theta for s in self.states])


def default_scales(data: CoxData) -> tuple[float, float]:
    # a theta move may not carry theta across an observation, so its natural
    # scale is the spacing of the complete times; beta's posterior sd shrinks
    # like 1/sqrt(m), and 2.4/sqrt(p) is the usual random-walk multiplier
    comp = data.data.complete
    gap = (comp[-1] - comp[0]) / (len(comp) - 1) if len(comp) > 1 else data.data.tau / 4
    sd_theta = 0.5 * float(gap)
    xs = float(np.mean(np.std(data.X, axis=0)))
    xs = xs if xs > 0 else 1.0
    sd_beta = 2.4 / math.sqrt(data.p * max(data.data.m, 1)) / xs
    return sd_theta, sd_beta


def _reflect(x: float, low: float, high: float) -> float:
    w = high - low
    y = (x - low) % (2 * w)
    return low + (y if y <= w else 2 * w - y)


def _atom_penalty(atoms, g) -> float:
    if not atoms:
        return 0.0
    y = np.array([a.y for a in atoms])
    Q = np.array([a.Q for a in atoms])
    return float(np.sum(g(y) * Q))


def _atoms_supported(atoms_minus, atoms_plus, sp) -> bool:
    """Atoms inside (Z_j, 0) on the negative side and (0, Y_j) on the positive."""
    for a in atoms_minus:
        if not (sp.Z[a.location - 1] <= a.y < 0.0):
            return False
    for a in atoms_plus:
        if not (0.0 < a.y <= sp.Y[a.location - 1]):
            return False
    return True


def _log_target_theta(data: CoxData, theta, beta, atoms, crm, prior) -> float:
    g = build_gN_beta(data, beta, theta)
    return prior.logpdf(theta) + laplace_functional_log(g, crm) - _atom_penalty(atoms, g)


def _log_target_beta(data: CoxData, theta, beta, atoms, crm, sd) -> float:
    g = build_gN_beta(data, beta, theta)
    comp = data.data.status == 1
    lp = -0.5 * float(np.sum((np.asarray(beta) / sd) ** 2)) if sd > 0 else 0.0
    return lp + laplace_functional_log(g, crm) + float(np.sum(data.X[comp] @ beta)) - _atom_penalty(atoms, g)


def cox_gibbs(data: CoxData, config: CoxConfig, rng) -> CoxChain:
    """Run the four-step sampler; returns kept states and acceptance rates.

    Each cycle: (1) one AP sweep per side against the weighted exposure,
    (2) atom positions and masses at every jump, (3) a reflected random-walk
    Metropolis move of theta, (4) a random-walk Metropolis move of beta.
    A theta proposal that moves an observation across the change point, hits
    a complete time, or leaves an atom outside its interval is rejected.
    When both theta and beta are frozen the atom step is skipped, since
    nothing downstream uses it.
    """
    d = data.data
    crm = GammaCRM(d.tau) if config.crm is None else config.crm
    prior = config.prior_theta
    sd_t, sd_b = default_scales(data)
    sd_t = sd_t if config.proposal_sd_theta is None else config.proposal_sd_theta
    sd_b = sd_b if config.proposal_sd_beta is None else config.proposal_sd_beta
    theta = config.theta0 if config.theta0 is not None else 0.5 * (prior.low + prior.high)
    if np.any(d.complete == theta):
        theta = float(np.nextafter(theta, np.inf))
    beta = np.zeros(data.p) if config.beta0 is None else np.array(config.beta0, dtype=float)
    if beta.shape != (data.p,):
        raise DataError(f"beta0 must have length {data.p}")
    ctx = make_context(d, theta, crm, data.risk(beta))
    sm = np.arange(ctx.minus.k + 1, dtype=np.int64)
    sp = np.arange(ctx.plus.k + 1, dtype=np.int64)
    lf = log_factorials(d.m + 1)
    update_atoms = not (config.freeze_theta and config.freeze_beta)
    n_t = n_b = acc_t = acc_b = 0
    states = []
    atoms_m: list[Atom] = []
    atoms_p: list[Atom] = []
    total = config.burn_in + config.cycles * config.thin
    for c in range(1, total + 1):
        # (1) paths
        if ctx.minus.k > 1:
            kernels.ap_sweep(sm, ctx.minus.log_psi, lf, rng.random(ctx.minus.k - 1))
        if ctx.plus.k > 1:
            kernels.ap_sweep(sp, ctx.plus.log_psi, lf, rng.random(ctx.plus.k - 1))
        changed = False
        if update_atoms:
            # (2) atoms
            atoms_m = draw_y_Q(tuple(sm.tolist()), "minus", ctx, rng)
            atoms_p = draw_y_Q(tuple(sp.tolist()), "plus", ctx, rng)
            atoms = atoms_m + atoms_p
            # (3) change point
            if not config.freeze_theta and sd_t > 0:
                n_t += 1
                prop = _reflect(theta + sd_t * rng.standard_normal(), prior.low, prior.high)
                u = rng.random()
                ok = 0.0 < prop < d.tau and not np.any(d.complete == prop)
                if ok:
                    sp_new = split(d, prop)
                    ok = sp_new.n == ctx.plus.k and _atoms_supported(atoms_m, atoms_p, sp_new)
                if ok:
                    cur = _log_target_theta(data, theta, beta, atoms, crm, prior)
                    new = _log_target_theta(data, prop, beta, atoms, crm, prior)
                    if math.log(u) < new - cur:
                        theta, changed = prop, True
                        acc_t += 1
            # (4) regression coefficients
            if not config.freeze_beta and sd_b > 0:
                if config.beta_update == "componentwise":
                    moves = [np.eye(data.p)[i] * sd_b * rng.standard_normal() for i in range(data.p)]
                else:
                    moves = [sd_b * rng.standard_normal(data.p)]
                for step in moves:
                    n_b += 1
                    prop = beta + step
                    u = rng.random()
                    cur = _log_target_beta(data, theta, beta, atoms, crm, config.beta_prior_sd)
                    new = _log_target_beta(data, theta, prop, atoms, crm, config.beta_prior_sd)
                    if math.log(u) < new - cur:
                        beta, changed = prop, True
                        acc_b += 1
        if changed:
            ctx = make_context(d, theta, crm, data.risk(beta))
        if c > config.burn_in and (c - config.burn_in) % config.thin == 0:
            states.append(CoxState(tuple(sm.tolist()), tuple(sp.tolist()), tuple(atoms_m),
                                   tuple(atoms_p), float(theta), beta.copy()))
    return CoxChain(states, acc_t / n_t if n_t else 0.0, acc_b / n_b if n_b else 0.0, config)


def baseline_hazard(data: CoxData, chain: CoxChain, t, crm: CRM | None = None):
    """Chain average of the baseline posterior mean hazard on a grid.

    Returns rows (one per kept state) so callers can form standard errors.
    """
    d = data.data
    crm = GammaCRM(d.tau) if crm is None else crm
    t = np.asarray(t, dtype=float)
    rows = np.empty((len(chain.states), len(t)))
    cache: dict = {}
    for i, s in enumerate(chain.states):
        key = (s.theta, s.beta.tobytes())
        if key not in cache:
            ctx = make_context(d, s.theta, crm, data.risk(s.beta))
            tt = np.where(t == s.theta, np.nextafter(t, np.inf), t)
            cache = {key: HazardGrid(ctx, tt)}
        rows[i] = cache[key](s.S_minus, s.S_plus)
    return rows


def summarize_beta(chain: CoxChain) -> dict:
    b = chain.beta_draws()
    q = np.quantile(b, [0.025, 0.25, 0.5, 0.75, 0.975], axis=0)
    return {
        "mean": b.mean(axis=0).tolist(),
        "sd": b.std(axis=0, ddof=1).tolist() if len(b) > 1 else [0.0] * b.shape[1],
        "q025": q[0].tolist(),
        "q25": q[1].tolist(),
        "median": q[2].tolist(),
        "q75": q[3].tolist(),
        "q975": q[4].tolist(),
    }


__all__ = ["CoxData", "CoxState", "CoxConfig", "CoxChain", "build_gN_beta", "cox_gibbs",
           "baseline_hazard", "summarize_beta"]
