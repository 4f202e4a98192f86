"""Posterior quantities given the change point: path laws, the hazard
estimator kernel, exact enumeration oracles and conditional atom draws.

Both sides of the change point are handled by one :class:`SideLaw` working in
distance-from-theta coordinates.  On either side the observations' distances
``d_1 > d_2 > ... > d_k > 0`` decrease with the index, and a cluster whose
largest index is ``j`` must place its atom within distance ``d_j``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq
from scipy.special import gammaln

from . import spath
from .process import (
    CRM,
    GammaCRM,
    PiecewiseLinear,
    SupportError,
    build_g0,
    build_gN,
    laplace_functional_log,
    logsumexp,
    segment_integral,
)

log = logging.getLogger(__name__)

#: Per-side cap for exhaustive path enumeration in the oracles.
ORACLE_CAP = 8


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class SurvivalData:
    """Failure times, right-censored at the termination time ``tau``.

    ``status`` is 1 for a complete observation and 0 for a record censored at
    ``tau``.  ``covariates`` (N x p) is optional and only used by :mod:`bfr.cox`.
    """

    times: np.ndarray
    status: np.ndarray
    tau: float
    covariates: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.status, dtype=int)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "status", s)
        if t.ndim != 1 or t.shape != s.shape or len(t) == 0:
            raise DataError("times and status must be equal-length non-empty vectors")
        if not np.all(np.isin(s, (0, 1))):
            raise DataError("status must be 0 or 1")
        if not self.tau > 0:
            raise DataError("tau must be positive")
        comp = t[s == 1]
        if len(comp) == 0:
            raise DataError("need at least one complete observation")
        if np.any(comp <= 0) or np.any(comp >= self.tau):
            raise DataError("complete times must lie strictly inside (0, tau)")
        if len(np.unique(comp)) != len(comp):
            raise DataError("complete times must be distinct")
        if np.any(t[s == 0] != self.tau):
            raise DataError("censored records must carry time == tau")
        if self.covariates is not None:
            x = np.asarray(self.covariates, dtype=float)
            if x.ndim == 1:
                x = x[:, None]
            if x.shape[0] != len(t) or x.shape[1] < 1:
                raise DataError("covariates must be an N x p array with p >= 1")
            if not np.all(np.isfinite(x)):
                raise DataError("covariates must be finite")
            object.__setattr__(self, "covariates", x)

    @property
    def N(self) -> int:
        return len(self.times)

    @property
    def m(self) -> int:
        return int(self.status.sum())

    @property
    def complete(self) -> np.ndarray:
        return np.sort(self.times[self.status == 1])

    def without_covariates(self) -> "SurvivalData":
        return SurvivalData(self.times, self.status, self.tau)


@dataclass(frozen=True)
class ThetaSplit:
    """Complete times re-expressed relative to the change point.

    ``Z`` ascending negatives, ``Y`` descending positives.
    """

    theta: float
    tau: float
    Z: np.ndarray
    Y: np.ndarray

    @property
    def n(self) -> int:
        return len(self.Y)

    @property
    def n_minus(self) -> int:
        return len(self.Z)


def split(data: SurvivalData, theta: float) -> ThetaSplit:
    if not 0.0 < theta < data.tau:
        raise SupportError(f"theta={theta} outside (0, {data.tau})")
    comp = data.complete
    if np.any(comp == theta):
        raise DataError(f"theta={theta} coincides with a complete observation")
    rel = comp - theta
    return ThetaSplit(theta, data.tau, np.sort(rel[rel < 0]), np.sort(rel[rel > 0])[::-1])


# ---------------------------------------------------------------------------
# One side of the change point
# ---------------------------------------------------------------------------

class SideLaw:
    """Path law ingredients for one side, in distance coordinates.

    ``dist`` are the observation distances (descending), ``reach`` the far
    end of the side (theta or tau - theta) and ``gfun(x)`` the exposure at
    distance ``x``.  ``log_psi[j, l]`` holds ``log int_0^{d_j} kappa_l eta``
    for ``j = 1..k`` and ``l = 0..k+1`` (column 0 is ``log 1``).
    """

    def __init__(self, dist, reach: float, knot_x, knot_v0, knot_v1, crm: CRM, sign: int):
        self.dist = np.asarray(dist, dtype=float)
        self.k = len(self.dist)
        self.reach = float(reach)
        self.crm = crm
        self.sign = sign
        self.ex = np.asarray(knot_x, dtype=float)  # segment edges, 0 .. reach
        self.v0 = np.asarray(knot_v0, dtype=float)  # g at the near end of each segment
        self.v1 = np.asarray(knot_v1, dtype=float)  # g at the far end
        self.lmax = self.k + 1
        ell = np.arange(1, self.lmax + 1, dtype=float)
        widths = np.diff(self.ex)
        # seg[i, l-1] = log int over segment i of kappa_l
        self.seg = crm.log_segment_kappa(ell[None, :], self.v0[:, None], self.v1[:, None], widths[:, None])
        cum = np.logaddexp.accumulate(self.seg, axis=0)
        self.cum = np.vstack([np.full((1, self.lmax), -np.inf), cum])  # at edges
        # row for each observation: distance d_j is an edge
        self.edge_of = np.searchsorted(self.ex, self.dist)
        if self.k and not np.allclose(self.ex[self.edge_of], self.dist, rtol=0, atol=0):
            raise AssertionError("observation distances must be segment edges")
        lp = np.zeros((self.k + 1, self.lmax + 1))
        if self.k:
            lp[1:, 1:] = self.cum[self.edge_of]
        lp[0, 1:] = -np.inf
        self.log_psi = np.ascontiguousarray(lp)

    # -- evaluation -------------------------------------------------------
    def g(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.ex, x, side="right") - 1, 0, len(self.v0) - 1)
        w = self.ex[i + 1] - self.ex[i]
        return self.v0[i] + (x - self.ex[i]) / w * (self.v1[i] - self.v0[i])

    def log_H(self, x):
        """``log int_0^x kappa_l eta`` for each query distance, all ``l``.

        Returns an array of shape ``(len(x), lmax + 1)``; column 0 is 0.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < 0) or np.any(x > self.reach * (1 + 1e-12)):
            raise SupportError("query distance outside the side")
        x = np.minimum(x, self.reach)
        out = np.zeros((len(x), self.lmax + 1))
        i = np.clip(np.searchsorted(self.ex, x, side="right") - 1, 0, len(self.v0) - 1)
        w_full = self.ex[i + 1] - self.ex[i]
        part_w = x - self.ex[i]
        gx = self.v0[i] + part_w / w_full * (self.v1[i] - self.v0[i])
        ell = np.arange(1, self.lmax + 1, dtype=float)
        with np.errstate(divide="ignore"):
            part = np.where(
                part_w[:, None] > 0,
                self.crm.log_segment_kappa(ell[None, :], self.v0[i][:, None], gx[:, None],
                                           np.where(part_w > 0, part_w, 1.0)[:, None]),
                -np.inf,
            )
        out[:, 1:] = np.logaddexp(self.cum[i], part)
        return out

    def log_phi(self, path) -> float:
        s = np.asarray(path, dtype=np.int64)
        if len(s) != self.k + 1:
            raise ValueError(f"path has {len(s)} coordinates, side needs {self.k + 1}")
        if self.k == 0:
            return 0.0
        j = np.nonzero(np.diff(s))[0] + 1
        size = s[j] - s[j - 1]
        top = j - 1 - s[j - 1]
        bot = j - s[j]
        lc = gammaln(top + 1) - gammaln(bot + 1) - gammaln(top - bot + 1)
        return float(np.sum(lc) + np.sum(self.log_psi[j, size]))

    def jump_terms(self, path, x):
        """Per-query sum over jumps of ``lambda_j`` (the atom part of a_lambda)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.k == 0:
            return np.zeros(len(x))
        s = np.asarray(path, dtype=np.int64)
        j = np.nonzero(np.diff(s))[0] + 1
        size = s[j] - s[j - 1]
        return self._jump_terms(j, size, x, self.log_H(x))

    def _jump_terms(self, j, size, x, logH):
        near = self.log_psi[j, size + 1][:, None]  # x >= d_j: full range
        partial = logH[:, size + 1].T  # x < d_j
        num = np.where(x[None, :] >= self.dist[j - 1][:, None], near, partial)
        return np.exp(num - self.log_psi[j, size][:, None]).sum(axis=0)

    def prior_term(self, x):
        return np.exp(self.log_H(x)[:, 1])


def side_from_g(g: PiecewiseLinear, theta: float, tau: float, dist, sign: int, crm: CRM) -> SideLaw:
    """Restrict ``g`` to one side of ``theta`` and express it in distances."""
    if sign < 0:
        reach = theta
        pieces = g.pieces(-theta, 0.0) if theta > 0 else []
        # distance x = -u; reverse so x increases
        edges = [0.0] + [-p[0] for p in reversed(pieces)]
        v_near = [p[3] for p in reversed(pieces)]
        v_far = [p[2] for p in reversed(pieces)]
    else:
        reach = tau - theta
        pieces = g.pieces(0.0, reach)
        edges = [0.0] + [p[1] for p in pieces]
        v_near = [p[2] for p in pieces]
        v_far = [p[3] for p in pieces]
    return SideLaw(dist, reach, edges, v_near, v_far, crm, sign)


# ---------------------------------------------------------------------------
# Context for a fixed theta
# ---------------------------------------------------------------------------

@dataclass
class PathLawContext:
    """Everything needed to evaluate path laws at one change point."""

    split: ThetaSplit
    g: PiecewiseLinear
    crm: CRM
    minus: SideLaw = field(repr=False)
    plus: SideLaw = field(repr=False)

    @property
    def theta(self) -> float:
        return self.split.theta

    @cached_property
    def log_laplace(self) -> float:
        return laplace_functional_log(self.g, self.crm)

    def side(self, which: str) -> SideLaw:
        if which in ("minus", "negative", "-"):
            return self.minus
        if which in ("plus", "positive", "+"):
            return self.plus
        raise ValueError(f"unknown side {which!r}")

    def distances(self, t):
        """Map hazard times to (side mask, distance); t == theta is rejected."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t == self.theta):
            raise SupportError("a_lambda is undefined at t == theta")
        if np.any(t < 0) or np.any(t > self.split.tau):
            raise SupportError("t outside [0, tau]")
        return t < self.theta, np.abs(t - self.theta)


def make_context(data: SurvivalData, theta: float, crm: CRM | None = None,
                 weights=None) -> PathLawContext:
    crm = GammaCRM(data.tau) if crm is None else crm
    sp = split(data, theta)
    g = build_gN(data, theta, weights)
    minus = side_from_g(g, theta, data.tau, -sp.Z, -1, crm)
    plus = side_from_g(g, theta, data.tau, sp.Y, +1, crm)
    return PathLawContext(sp, g, crm, minus, plus)


def monotone_side(data: SurvivalData, crm: CRM | None = None, weights=None):
    """Side law and exposure for the change point at zero (all positive)."""
    crm = GammaCRM(data.tau) if crm is None else crm
    g = build_g0(data, weights)
    side = side_from_g(g, 0.0, data.tau, data.complete[::-1], +1, crm)
    return side, g


def log_phi_minus(path, ctx: PathLawContext) -> float:
    return ctx.minus.log_phi(path)


def log_phi_plus(path, ctx: PathLawContext) -> float:
    return ctx.plus.log_phi(path)


def a_lambda(t, S_minus, S_plus, ctx: PathLawContext):
    """Posterior mean hazard at ``t`` given both paths and theta."""
    scalar = np.ndim(t) == 0
    neg, x = ctx.distances(t)
    out = np.empty(len(x))
    for mask, side, path in ((neg, ctx.minus, S_minus), (~neg, ctx.plus, S_plus)):
        if np.any(mask):
            xs = x[mask]
            logH = side.log_H(xs)
            val = np.exp(logH[:, 1])
            if side.k:
                s = np.asarray(path, dtype=np.int64)
                j = np.nonzero(np.diff(s))[0] + 1
                val = val + side._jump_terms(j, s[j] - s[j - 1], xs, logH)
            out[mask] = val
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Exact enumeration oracles
# ---------------------------------------------------------------------------

def side_path_law(side: SideLaw, cap: int = ORACLE_CAP):
    """Enumerated paths of a side with their log phi values."""
    if side.k > cap:
        raise spath.EnumerationCapError(f"side has {side.k} observations > cap {cap}")
    paths = list(spath.enumerate_paths(side.k, cap=max(cap, spath.ENUMERATION_CAP)))
    lp = np.array([side.log_phi(p) for p in paths])
    return paths, lp


def side_expected_hazard(side: SideLaw, x, cap: int = ORACLE_CAP):
    """``sum_S W(S) [prior term + jump terms]`` at distances ``x`` on a side."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    logH = side.log_H(x)
    val = np.exp(logH[:, 1])
    if side.k == 0:
        return val, 0.0
    paths, lp = side_path_law(side, cap)
    lz = logsumexp(lp)
    w = np.exp(lp - lz)
    acc = np.zeros(len(x))
    for p, wi in zip(paths, w):
        s = np.asarray(p)
        j = np.nonzero(np.diff(s))[0] + 1
        acc += wi * side._jump_terms(j, s[j] - s[j - 1], x, logH)
    return val + acc, lz


def exact_posterior_hazard(t, theta: float, data: SurvivalData, crm: CRM | None = None,
                           cap: int = ORACLE_CAP, ctx: PathLawContext | None = None):
    """Posterior mean hazard at fixed theta by exhaustive path enumeration.

    The two sides are independent and a_lambda at ``t`` involves only the side
    containing ``t``, so the double sum factorises into one sum per side.
    """
    ctx = make_context(data, theta, crm) if ctx is None else ctx
    scalar = np.ndim(t) == 0
    neg, x = ctx.distances(t)
    out = np.empty(len(x))
    for mask, side in ((neg, ctx.minus), (~neg, ctx.plus)):
        if np.any(mask):
            out[mask] = side_expected_hazard(side, x[mask], cap)[0]
    return float(out[0]) if scalar else out


def log_path_sums(ctx: PathLawContext, cap: int = ORACLE_CAP) -> tuple[float, float]:
    """``log sum_S phi`` on each side by enumeration."""
    res = []
    for side in (ctx.minus, ctx.plus):
        if side.k == 0:
            res.append(0.0)
        else:
            res.append(logsumexp(side_path_law(side, cap)[1]))
    return res[0], res[1]


class UniformPrior:
    """Uniform density on ``[low, high]``."""

    def __init__(self, low: float, high: float):
        if not high > low:
            raise ValueError("empty prior interval")
        self.low, self.high = float(low), float(high)

    def logpdf(self, theta) -> float:
        if self.low <= theta <= self.high:
            return -np.log(self.high - self.low)
        return -np.inf

    def sample(self, rng):
        return rng.uniform(self.low, self.high)

    def covers(self, other: "UniformPrior") -> bool:
        return self.low <= other.low and other.high <= self.high

    def __repr__(self):
        return f"UniformPrior({self.low}, {self.high})"


def log_joint_theta(S_minus, S_plus, theta: float, data: SurvivalData, prior_pi,
                    crm: CRM | None = None, ctx: PathLawContext | None = None) -> float:
    """Unnormalised log density of ``(S-, S+, theta)`` given the data."""
    lp = prior_pi.logpdf(theta)
    if not np.isfinite(lp):
        raise SupportError(f"theta={theta} outside prior support")
    ctx = make_context(data, theta, crm) if ctx is None else ctx
    return ctx.log_laplace + ctx.minus.log_phi(S_minus) + ctx.plus.log_phi(S_plus) + lp


def theta_pieces(data: SurvivalData, low: float, high: float, points: int = 200, gap: float = 1e-9):
    """Split ``[low, high]`` at complete times; allot grid points per piece."""
    cuts = [c for c in data.complete if low < c < high]
    edges = [low] + cuts + [high]
    span = high - low
    pieces = []
    comp = set(data.complete.tolist())
    for a, b in zip(edges[:-1], edges[1:]):
        a2 = a + gap if a in comp else a
        b2 = b - gap if b in comp else b
        if b2 <= a2:
            continue
        pieces.append((a2, b2))
    per = [max(5, int(round(points * (b - a) / span))) for a, b in pieces]
    return pieces, per


def exact_theta_posterior(data: SurvivalData, prior_pi: UniformPrior, t=None,
                          crm: CRM | None = None, points: int = 200, cap: int = ORACLE_CAP,
                          return_log_mass: bool = False):
    """Enumeration x trapezoid oracle for the change-point posterior.

    Each inter-observation piece of the prior interval is integrated with its
    own trapezoid rule (the integrand jumps where theta crosses a complete
    time).  Returns piece boundaries, piece probabilities and, if ``t`` is
    given, the theta-mixed posterior mean hazard.  With ``return_log_mass``
    the log of the total mass ``int L phi- phi+ pi dtheta`` is appended.
    """
    pieces, per = theta_pieces(data, prior_pi.low, prior_pi.high, points)
    t = None if t is None else np.atleast_1d(np.asarray(t, dtype=float))
    log_masses, hz = [], []
    for (a, b), npts in zip(pieces, per):
        grid = np.linspace(a, b, npts)
        logd = np.empty(npts)
        hrow = []
        for i, th in enumerate(grid):
            ctx = make_context(data, th, crm)
            lm, lp = log_path_sums(ctx, cap)
            logd[i] = ctx.log_laplace + lm + lp + prior_pi.logpdf(th)
            if t is not None:
                tt = np.where(t == th, np.nextafter(t, np.inf), t)
                hrow.append(exact_posterior_hazard(tt, th, data, crm, cap, ctx))
        mx = logd.max()
        dens = np.exp(logd - mx)
        log_masses.append(mx + np.log(trapezoid(dens, grid)))
        if t is not None:
            hz.append((mx, trapezoid(dens[:, None] * np.array(hrow), grid, axis=0)))
    log_masses = np.array(log_masses)
    lz = logsumexp(log_masses)
    probs = np.exp(log_masses - lz)
    hazard = None
    if t is not None:
        hazard = np.sum([np.exp(mx - lz) * h for mx, h in hz], axis=0)
    if return_log_mass:
        return pieces, probs, hazard, float(lz)
    return pieces, probs, hazard


# ---------------------------------------------------------------------------
# Partition-based oracle (the coarse -> fine correspondence)
# ---------------------------------------------------------------------------

def _side_u_interval(ctx: PathLawContext, sign: int, d: float):
    return (-d, 0.0) if sign < 0 else (0.0, d)


def partition_log_weight(cells, side: SideLaw, ctx: PathLawContext) -> float:
    """Log weight of a partition of one side's indices with (J, v) integrated out.

    Each cell of size ``e`` with largest index ``j`` contributes
    ``int kappa_e(g(v)) eta(dv)`` over the atom range allowed by index ``j``.
    Evaluated through :func:`segment_integral` on the u-axis.
    """
    total = 0.0
    for cell in cells:
        a, b = _side_u_interval(ctx, side.sign, side.dist[max(cell) - 1])
        total += segment_integral(len(cell), a, b, ctx.g, ctx.crm)
    return total


def partition_hazard_terms(cells, side: SideLaw, ctx: PathLawContext, x) -> np.ndarray:
    """Atom part of the posterior mean hazard given a partition."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(len(x))
    for cell in cells:
        d = side.dist[max(cell) - 1]
        a, b = _side_u_interval(ctx, side.sign, d)
        den = segment_integral(len(cell), a, b, ctx.g, ctx.crm)
        for i, xi in enumerate(x):
            r = min(xi, d)
            a2, b2 = _side_u_interval(ctx, side.sign, r)
            out[i] += np.exp(segment_integral(len(cell) + 1, a2, b2, ctx.g, ctx.crm) - den)
    return out


def partition_posterior_hazard(t, theta: float, data: SurvivalData, crm: CRM | None = None,
                               cap: int = ORACLE_CAP):
    """Posterior mean hazard by enumerating set partitions of each side."""
    ctx = make_context(data, theta, crm)
    neg, x = ctx.distances(t)
    out = np.empty(len(x))
    for mask, side in ((neg, ctx.minus), (~neg, ctx.plus)):
        if not np.any(mask):
            continue
        xs = x[mask]
        prior = np.array([
            np.exp(segment_integral(1, *_side_u_interval(ctx, side.sign, xi), ctx.g, ctx.crm))
            if xi > 0 else 0.0
            for xi in xs
        ])
        parts = list(spath.set_partitions(side.k, cap=max(cap, spath.ENUMERATION_CAP)))
        lw = np.array([partition_log_weight(p, side, ctx) for p in parts])
        w = np.exp(lw - logsumexp(lw))
        acc = np.zeros(len(xs))
        for p, wi in zip(parts, w):
            acc += wi * partition_hazard_terms(p, side, ctx, xs)
        out[mask] = prior + acc
    return out


# ---------------------------------------------------------------------------
# Conditional atom draws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    location: int  # jump location j
    size: int  # jump size m_j
    y: float  # atom position on the u-axis
    Q: float  # atom mass
    g: float  # exposure at y


def _draw_distance(side: SideLaw, j: int, ell: int, u: float) -> float:
    """Inverse-CDF draw of a distance in (0, d_j) with density prop. to kappa_ell."""
    e = side.edge_of[j - 1]  # edges 0..e cover (0, d_j)
    seg = side.seg[:e, ell - 1]
    cum = np.logaddexp.accumulate(seg)
    target = np.log(u) + cum[-1]
    i = int(np.searchsorted(cum, target))
    i = min(i, e - 1)
    before = cum[i - 1] if i > 0 else -np.inf
    # remaining mass inside segment i
    with np.errstate(divide="ignore"):
        rem = target + np.log1p(-np.exp(before - target)) if before > -np.inf else target
    x0, x1 = side.ex[i], side.ex[i + 1]
    v0, v1 = side.v0[i], side.v1[i]
    w = x1 - x0

    def f(z):
        if z <= 0:
            return -np.inf - rem
        gz = v0 + z / w * (v1 - v0)
        return float(side.crm.log_segment_kappa(ell, v0, gz, z)) - rem

    lo, hi = 0.0, w
    if f(hi) <= 0:
        return x1
    z = brentq(lambda z: f(z) if z > 0 else -1e300, lo, hi, xtol=1e-14 * max(w, 1.0), rtol=1e-14)
    return x0 + z


def draw_y_Q(path, side_name: str, ctx: PathLawContext, rng) -> list[Atom]:
    """Atom positions and masses at every jump of ``path`` on one side."""
    side = ctx.side(side_name)
    s = spath.validate(path)
    if len(s) != side.k + 1:
        raise ValueError("path length does not match the side")
    atoms = []
    for j, ell in spath.jumps(s) if side.k else []:
        x = _draw_distance(side, j, ell, rng.uniform(1e-300, 1.0))
        gx = float(side.g(x))
        q = rng.gamma(ell, 1.0 / (1.0 + gx))
        atoms.append(Atom(j, ell, side.sign * x, float(q), gx))
    return atoms
