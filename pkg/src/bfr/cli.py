"""Command-line interface: ``bfr simulate|fit|test|cox``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io, samplers, simdata
from ._backend import BACKEND
from .bayestest import TestSpec, test as bayes_test
from .cox import CoxConfig, CoxData, baseline_hazard, cox_gibbs, summarize_beta
from .posterior import (
    ORACLE_CAP,
    SurvivalData,
    UniformPrior,
    exact_posterior_hazard,
    exact_theta_posterior,
    make_context,
    theta_pieces,
)

log = logging.getLogger("bfr")

MODES = ("aps-fixed", "sips-fixed", "sips-theta", "oracle")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML configuration file")
    for key in io.DEFAULTS:
        p.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE")
    p.add_argument("--record-wall-time", action="store_true",
                   help="store wall time in the summary (outputs then differ between runs)")


def _config(args) -> dict:
    over = {k: getattr(args, k) for k in io.DEFAULTS}
    return io.load_config(args.config, over)


def _need_seed(cfg) -> int:
    if cfg["mc.seed"] is None:
        raise SystemExit("error: a seed is required (--mc.seed or BFR_SEED)")
    return cfg["mc.seed"]


def _intervals(cfg, data: SurvivalData):
    comp = data.complete
    lo, hi = comp[0], comp[-1]
    prior = UniformPrior(cfg["prior.theta.low"] if cfg["prior.theta.low"] is not None else lo,
                         cfg["prior.theta.high"] if cfg["prior.theta.high"] is not None else hi)
    prop = UniformPrior(cfg["proposal.theta.low"] if cfg["proposal.theta.low"] is not None else prior.low,
                        cfg["proposal.theta.high"] if cfg["proposal.theta.high"] is not None else prior.high)
    return prior, prop


def _grid(cfg, data: SurvivalData, theta=None):
    t_max = cfg["grid.t_max"] if cfg["grid.t_max"] is not None else data.tau
    avoid = [] if theta is None else [theta]
    return samplers.safe_grid(cfg["grid.t_min"], t_max, cfg["grid.points"], avoid)


def _load(args, cfg) -> SurvivalData:
    return io.read_dataset(args.data, cfg["crm.tau"])


def _finish(out: Path, summary: dict, started: float, args) -> None:
    wall = time.perf_counter() - started
    if args.record_wall_time:
        summary["wall_time_s"] = wall
    summary["backend"] = BACKEND
    io.write_summary(out / "summary.json", summary)
    print(f"wall time {wall:.2f} s", file=sys.stderr)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    hz = simdata.get_hazard(args.hazard)
    tau = args.tau if args.tau is not None else hz.tau
    seed = args.seed if args.seed is not None else _env_seed()
    rng = np.random.default_rng(seed)
    if args.beta is not None:
        data = simdata.simulate_cox(hz, args.N, [args.beta], tau, rng)
    else:
        data = simdata.simulate(hz, args.N, tau, rng)
    try:
        io.write_dataset(data, args.out)
    except OSError as exc:
        raise SystemExit(f"error: cannot write {args.out}: {exc}")
    print(f"records {data.N} censoring fraction {simdata.censoring_fraction(data):.4f}")
    return 0


def _env_seed():
    s = os.environ.get("BFR_SEED")
    return int(s) if s else None


def cmd_fit(args) -> int:
    started = time.perf_counter()
    cfg = _config(args)
    data = _load(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mode = args.mode
    summary = {"mode": mode, "N": data.N, "m": data.m, "tau": data.tau}
    if mode in ("aps-fixed", "sips-fixed") and args.theta is None:
        raise SystemExit(f"error: --theta is required for {mode}")
    if mode != "oracle":
        seed = _need_seed(cfg)
        summary.update(seed=seed, M=cfg["mc.M"])
    if mode == "aps-fixed":
        t = _grid(cfg, data, args.theta)
        ctx = make_context(data, args.theta)
        chain = samplers.aps_chain(args.theta, data, cfg["mc.M"], cfg["mc.burn_in"], cfg["mc.thin"],
                                   np.random.default_rng(seed), ctx)
        grid = samplers.HazardGrid(ctx, t)
        rows = np.array([grid(a, b) for a, b in chain.states])
        est, se = samplers.ergodic_estimate(rows)
        var = rows.var(axis=0)
        ok = se > 0
        ess = float(np.mean(var[ok] / se[ok] ** 2)) if np.any(ok) else float(len(rows))
        summary.update(theta=args.theta, burn_in=cfg["mc.burn_in"], thin=cfg["mc.thin"], ESS=ess)
    elif mode == "sips-fixed":
        t = _grid(cfg, data, args.theta)
        lw, rows = samplers.run_sips(data, args.theta, cfg["mc.M"], seed, t, cfg["mc.workers"])
        est, se, ess = samplers.weighted_estimate(lw, rows)
        summary.update(theta=args.theta, ESS=ess)
    elif mode == "sips-theta":
        t = _grid(cfg, data)
        prior, prop = _intervals(cfg, data)
        lw, thetas, rows = samplers.run_sips_theta(data, prior, prop, cfg["mc.M"], seed, t, cfg["mc.workers"])
        est, se, ess = samplers.weighted_estimate(lw, rows)
        if log.isEnabledFor(logging.DEBUG):
            dbg = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
            for _ in range(3):
                d = samplers.sips_theta_draw(data, prop, prior, dbg)
                log.debug("theta=%r log-weight parts %r", d.theta, d.parts)
        w = np.exp(lw - lw.max())
        io.write_columns(out / "theta_draws.csv", ["theta", "log_weight", "weight"], [thetas, lw, w / w.sum()])
        pieces, _ = theta_pieces(data, prior.low, prior.high, gap=0.0)
        edges = [a for a, _ in pieces] + [pieces[-1][1]]
        p_est, p_se = samplers.interval_probabilities(thetas, lw, edges)
        summary.update(ESS=ess, prior_theta=[prior.low, prior.high], proposal_theta=[prop.low, prop.high],
                       theta_intervals=[{"low": float(a), "high": float(b),
                                         "probability": float(p), "std_error": float(s)}
                                        for a, b, p, s in zip(edges[:-1], edges[1:], p_est, p_se)])
    else:
        if args.theta is not None:
            t = _grid(cfg, data, args.theta)
            est = exact_posterior_hazard(t, args.theta, data, cap=ORACLE_CAP)
            summary.update(theta=args.theta)
        else:
            prior, _ = _intervals(cfg, data)
            t = _grid(cfg, data)
            pieces, probs, est = exact_theta_posterior(data, prior, t)
            summary.update(prior_theta=[prior.low, prior.high],
                           theta_intervals=[{"low": a, "high": b, "probability": float(p)}
                                            for (a, b), p in zip(pieces, probs)])
        se = np.zeros_like(est)
    io.write_grid(out / "hazard.csv", t, est, se)
    _finish(out, summary, started, args)
    return 0


def cmd_test(args) -> int:
    started = time.perf_counter()
    cfg = _config(args)
    data = _load(args, cfg)
    seed = _need_seed(cfg)
    prior, prop = _intervals(cfg, data)
    spec = TestSpec(cfg["test.pi0"], prior, prop, cfg["mc.M"])
    res = bayes_test(data, spec, seed, cfg["mc.workers"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res.update(pi0=spec.pi0, prior_theta=[prior.low, prior.high])
    _finish(out, res, started, args)
    print(f"P(H0|T) = {res['posterior_H0']:.6g}  P(H1|T) = {res['posterior_H1']:.6g}")
    return 0


def cmd_cox(args) -> int:
    started = time.perf_counter()
    cfg = _config(args)
    data = _load(args, cfg)
    if data.covariates is None:
        raise SystemExit("error: dataset has no covariate columns")
    seed = _need_seed(cfg)
    prior, _ = _intervals(cfg, data)
    cd = CoxData(data)
    conf = CoxConfig(prior, beta_prior_sd=cfg["cox.beta_prior_sd"],
                     proposal_sd_theta=cfg["cox.proposal_sd_theta"],
                     proposal_sd_beta=cfg["cox.proposal_sd_beta"],
                     cycles=cfg["mc.M"], burn_in=cfg["mc.burn_in"], thin=cfg["mc.thin"],
                     theta0=args.theta, freeze_theta=args.freeze_theta, freeze_beta=args.freeze_beta)
    chain = cox_gibbs(cd, conf, np.random.default_rng(seed))
    t = _grid(cfg, data)
    rows = baseline_hazard(cd, chain, t)
    est, se = samplers.ergodic_estimate(rows)
    th = chain.theta_draws()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_grid(out / "hazard.csv", t, est, np.nan_to_num(se))
    b = chain.beta_draws()
    io.write_columns(out / "chain.csv", ["theta"] + [f"beta{i + 1}" for i in range(cd.p)],
                     [th] + [b[:, i] for i in range(cd.p)])
    summary = {
        "mode": "cox", "seed": seed, "M": cfg["mc.M"], "burn_in": cfg["mc.burn_in"], "thin": cfg["mc.thin"],
        "beta": summarize_beta(chain),
        "theta": {"mean": float(th.mean()), "sd": float(th.std(ddof=1)) if len(th) > 1 else 0.0,
                  "q025": float(np.quantile(th, 0.025)), "q975": float(np.quantile(th, 0.975))},
        "acceptance": {"theta": chain.accept_theta, "beta": chain.accept_beta},
    }
    _finish(out, summary, started, args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bfr", description="Bathtub failure-rate estimation with S-path samplers")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset from a test hazard")
    p.add_argument("--hazard", required=True, choices=sorted(simdata.HAZARDS))
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--beta", type=float, help="add one N(0,1) covariate with this coefficient")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="posterior mean hazard on a grid")
    p.add_argument("data")
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--theta", type=float)
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="Bayes test of monotone against bathtub hazard")
    p.add_argument("data")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("cox", help="proportional-hazards sampler")
    p.add_argument("data")
    p.add_argument("--theta", type=float, help="starting change point")
    p.add_argument("--freeze-theta", action="store_true")
    p.add_argument("--freeze-beta", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_cox)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
