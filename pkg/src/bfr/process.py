"""Gamma completely random measure, its kernels, and the exposure function.

Everything that can underflow is carried as a logarithm.  The closed forms
below integrate ``(1 + g(y))**(-l)`` and ``log(1 + g(y))`` over a segment on
which ``g`` is linear.  They are written in terms of the smaller endpoint
value ``L = 1 + min g``, the width ``w`` and the relative rise
``x = |slope| * w / L``, which avoids the cancellation in the textbook
antiderivatives.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import lgamma, log

import numpy as np
from scipy.special import gammaln

#: Relative rise below which a segment is treated as flat.
DEGENERATE_RISE = 1e-12


class SupportError(ValueError):
    """Interval or change point outside the admissible range."""


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise linear function with possible jumps at the knots.

    Segment ``i`` spans ``[knots[i], knots[i+1]]`` and runs linearly from
    ``left[i]`` to ``right[i]``.  The function is zero outside
    ``[knots[0], knots[-1]]``.
    """

    knots: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or len(k) < 2 or np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing with at least two entries")
        if len(self.left) != len(k) - 1 or len(self.right) != len(k) - 1:
            raise ValueError("need one (left, right) pair per segment")

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.knots)

    @property
    def slopes(self) -> np.ndarray:
        return (self.right - self.left) / self.widths

    @property
    def support(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(self.knots, u, side="right") - 1
        inside = (u >= self.knots[0]) & (u <= self.knots[-1])
        idx = np.clip(idx, 0, len(self.left) - 1)
        frac = (u - self.knots[idx]) / self.widths[idx]
        val = self.left[idx] + frac * (self.right[idx] - self.left[idx])
        out = np.where(inside, val, 0.0)
        return out if out.ndim else float(out)

    def pieces(self, a: float, b: float):
        """Linear pieces covering ``[a, b]`` as ``(x0, x1, v0, v1)`` tuples.

        Stretches outside the support appear as zero pieces.
        """
        out = []
        lo, hi = self.support
        if a < lo:
            out.append((a, min(b, lo), 0.0, 0.0))
        if b > lo and a < hi:
            s = np.searchsorted(self.knots, max(a, lo), side="right") - 1
            s = max(0, min(s, len(self.left) - 1))
            for i in range(s, len(self.left)):
                x0, x1 = self.knots[i], self.knots[i + 1]
                if x0 >= b:
                    break
                c0, c1 = max(x0, a), min(x1, b)
                if c1 <= c0:
                    continue
                w = x1 - x0
                v0 = self.left[i] + (c0 - x0) / w * (self.right[i] - self.left[i])
                v1 = self.left[i] + (c1 - x0) / w * (self.right[i] - self.left[i])
                if c0 == x0:
                    v0 = self.left[i]
                if c1 == x1:
                    v1 = self.right[i]
                out.append((c0, c1, float(v0), float(v1)))
        if b > hi:
            out.append((max(a, hi), b, 0.0, 0.0))
        return out

    def scaled(self, factor: float) -> "PiecewiseLinear":
        return PiecewiseLinear(self.knots, self.left * factor, self.right * factor)


# ---------------------------------------------------------------------------
# Segment closed forms (vectorised)
# ---------------------------------------------------------------------------

def log_int_inv_pow(ell, v0, v1, width):
    """``log int (1 + g)^(-ell)`` over a segment where ``g`` runs v0 -> v1.

    Broadcasts over all arguments.  ``ell >= 1``.
    """
    ell = np.asarray(ell, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    width = np.asarray(width, dtype=float)
    low = 1.0 + np.minimum(v0, v1)
    rise = np.abs(v1 - v0) / low
    log_low = np.log(low)
    log_w = np.log(width)
    flat = rise < DEGENERATE_RISE
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(flat, 1.0, rise)
        d = np.log1p(x)
        one = log_w - log_low + np.log(d / x)
        lm1 = np.where(ell > 1, ell - 1.0, 1.0)
        many = (log_w - ell * log_low + np.log(-np.expm1(-lm1 * d))
                - np.log(x) - np.log(lm1))
        curved = np.where(ell == 1, one, many)
        flat_val = log_w - ell * np.log(low * (1.0 + 0.5 * rise))
    return np.where(flat, flat_val, curved)


def _xlog_series(x):
    """((1 + x) log1p(x) - x) / x for x >= 0, accurate near zero."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = ((1.0 + x) * np.log1p(x) - x) / x
    xs = np.where(small, x, 0.0)
    series = np.zeros_like(xs)
    for k in range(2, 10):
        series = series + (-1.0) ** k * xs ** (k - 1) / (k * (k - 1))
    return np.where(small, series, direct)


def int_log1p(v0, v1, width):
    """``int log(1 + g)`` over a segment where ``g`` runs v0 -> v1."""
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    width = np.asarray(width, dtype=float)
    low = 1.0 + np.minimum(v0, v1)
    x = np.abs(v1 - v0) / low
    return width * (np.log(low) + _xlog_series(x))


def logsumexp(a) -> float:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return -np.inf
    mx = np.max(a)
    if not np.isfinite(mx):
        return float(mx)
    return float(mx + np.log(np.sum(np.exp(a - mx))))


# ---------------------------------------------------------------------------
# CRM interface and the gamma instance
# ---------------------------------------------------------------------------

class CRM:
    """Interface for a completely random measure on the u-axis.

    Only the gamma process ships; the methods below are what the posterior
    and the samplers use.
    """

    def log_kappa(self, ell, g):
        raise NotImplementedError

    def log_segment_kappa(self, ell, v0, v1, width):
        """``log int kappa_ell(g(y)) eta(dy)`` over one linear segment."""
        raise NotImplementedError

    def segment_neg_log_laplace(self, v0, v1, width):
        """``int int (1 - exp(-g x)) rho(dx) eta(du)`` over one segment."""
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError


@dataclass(frozen=True)
class GammaCRM(CRM):
    """Gamma process, unit-rate kernel, uniform shape measure on [-2 tau, 2 tau]."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return -2.0 * self.tau, 2.0 * self.tau

    @property
    def log_density(self) -> float:
        return -log(4.0 * self.tau)

    def log_kappa(self, ell, g):
        ell = np.asarray(ell, dtype=float)
        return gammaln(ell) - ell * np.log1p(np.asarray(g, dtype=float))

    def log_segment_kappa(self, ell, v0, v1, width):
        ell = np.asarray(ell, dtype=float)
        return gammaln(ell) + self.log_density + log_int_inv_pow(ell, v0, v1, width)

    def segment_neg_log_laplace(self, v0, v1, width):
        return np.exp(self.log_density) * int_log1p(v0, v1, width)


def kappa(ell: int, g_value: float, crm: CRM | None = None) -> float:
    """``kappa_ell`` at exposure ``g``; for the gamma CRM ``Gamma(ell)/(1+g)^ell``."""
    if ell < 1:
        raise ValueError("ell must be a positive integer")
    if crm is None:
        return float(np.exp(lgamma(ell) - ell * np.log1p(g_value)))
    return float(np.exp(crm.log_kappa(ell, g_value)))


def segment_integral(ell: int, a: float, b: float, g: PiecewiseLinear, crm: CRM) -> float:
    """``log int_a^b kappa_ell(g(y)) eta(dy)``."""
    if not a < b:
        raise SupportError(f"need a < b, got [{a}, {b}]")
    lo, hi = crm.support
    if a < lo or b > hi:
        raise SupportError(f"[{a}, {b}] outside eta-support [{lo}, {hi}]")
    parts = g.pieces(a, b)
    v0 = np.array([p[2] for p in parts])
    v1 = np.array([p[3] for p in parts])
    w = np.array([p[1] - p[0] for p in parts])
    return logsumexp(crm.log_segment_kappa(ell, v0, v1, w))


def laplace_functional_log(g: PiecewiseLinear, crm: CRM) -> float:
    """``log L_mu(g)``, i.e. minus the exponent of the Laplace functional."""
    lo, hi = crm.support
    a, b = g.support
    a, b = max(a, lo), min(b, hi)
    if b <= a:
        return 0.0
    parts = g.pieces(a, b)
    v0 = np.array([p[2] for p in parts])
    v1 = np.array([p[3] for p in parts])
    w = np.array([p[1] - p[0] for p in parts])
    return -float(np.sum(crm.segment_neg_log_laplace(v0, v1, w)))


# ---------------------------------------------------------------------------
# Exposure function g_{N,theta}
# ---------------------------------------------------------------------------

def cumulative_ttt(times, tau: float, weights=None):
    """Knots and values of ``C(s) = int_0^s sum_i w_i I(T_i >= t) dt``.

    Returns ``(knots, values)`` with knots at 0, every distinct time, and tau.
    """
    t = np.asarray(times, dtype=float)
    w = np.ones_like(t) if weights is None else np.asarray(weights, dtype=float)
    order = np.argsort(t, kind="mergesort")
    t, w = t[order], w[order]
    knots = np.unique(np.concatenate([[0.0], t, [tau]]))
    # at-risk weight on (knots[i], knots[i+1]]: records with T >= knots[i+1]
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    first_at = np.searchsorted(t, knots[1:], side="left")
    rate = tail[first_at]
    values = np.concatenate([[0.0], np.cumsum(rate * np.diff(knots))])
    return knots, values, rate


def _exposure(times, tau: float, theta: float, weights=None) -> PiecewiseLinear:
    knots, cvals, _ = cumulative_ttt(times, tau, weights)
    c_theta = float(np.interp(theta, knots, cvals))
    c_tau = float(cvals[-1])
    # negative side: u in [-theta, 0), g(u) = C(theta + u)
    neg_s = np.concatenate([knots[knots < theta], [theta]])
    neg_c = np.concatenate([cvals[knots < theta], [c_theta]])
    # positive side: u in (0, tau - theta], g(u) = C(tau) - C(theta + u)
    pos_s = np.concatenate([[theta], knots[knots > theta]])
    pos_c = np.concatenate([[c_theta], cvals[knots > theta]])
    parts_k, parts_l, parts_r = [], [], []
    if len(neg_s) >= 2:
        parts_k.append(neg_s - theta)
        parts_l.append(neg_c[:-1])
        parts_r.append(neg_c[1:])
    pos_u = pos_s - theta
    if parts_k:
        k = np.concatenate([parts_k[0], pos_u[1:]])
    else:
        k = pos_u
    parts_l.append(c_tau - pos_c[:-1])
    parts_r.append(c_tau - pos_c[1:])
    return PiecewiseLinear(k, np.concatenate(parts_l), np.concatenate(parts_r))


def build_gN(data, theta: float, weights=None) -> PiecewiseLinear:
    """Exposure ``g_{N,theta}`` of ``data`` (a :class:`SurvivalData`).

    ``weights`` multiplies each record's at-risk indicator (``exp(beta'x)``
    in the proportional-hazards model).
    """
    if not 0.0 < theta < data.tau:
        raise SupportError(f"theta={theta} outside (0, tau={data.tau})")
    return _exposure(data.times, data.tau, theta, weights)


def build_g0(data, weights=None) -> PiecewiseLinear:
    """Exposure for the monotone (change point at zero) model."""
    return _exposure(data.times, data.tau, 0.0, weights)
