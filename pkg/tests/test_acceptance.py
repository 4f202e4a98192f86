"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also collected in the terminal summary.
"""
import itertools
import json
import math

import numpy as np
from scipy import stats

from bfr import simdata as sd
from bfr import spath
from bfr.bayestest import TestSpec, test as bayes_test
from bfr.cli import main as cli_main
from bfr.cox import CoxConfig, CoxData, baseline_hazard, cox_gibbs, summarize_beta
from bfr.posterior import (
    SurvivalData,
    UniformPrior,
    exact_posterior_hazard,
    exact_theta_posterior,
    log_path_sums,
    make_context,
    partition_log_weight,
    partition_posterior_hazard,
    side_path_law,
)
from bfr.process import GammaCRM, PiecewiseLinear, kappa, laplace_functional_log, segment_integral
from bfr.samplers import (
    HazardGrid,
    aps_chain,
    ergodic_estimate,
    interval_probabilities,
    run_sips,
    run_sips_theta,
    safe_grid,
    sip_draw,
    weighted_estimate,
)
from oracles import bell, brute_partitions, catalan, g_function, path_from_cells, quad_kappa, quad_kappa_integral, \
    quad_neg_log_laplace

# small instances with at most five observations on each side of theta
SMALL_INSTANCES = [
    (SurvivalData([0.2, 0.5, 0.9, 1.3, 1.6, 2.2, 2.6, 3.1, 3.5, 3.8, 4.0], [1] * 10 + [0], 4.0), 1.9),
    (SurvivalData([0.4, 0.9, 1.3, 1.8, 2.4, 2.9, 3.3, 3.7, 4.0, 4.0], [1] * 8 + [0, 0], 4.0), 2.1),
]

EIGHT = SurvivalData([0.21, 0.47, 0.83, 1.38, 2.12, 2.71, 3.15, 3.62, 4.0], [1] * 8 + [0], 4.0)


def test_01_path_combinatorics(criterion):
    with criterion(1, "path counts and partition cardinalities", 10) as note:
        for m in range(1, 11):
            paths = list(spath.enumerate_paths(m))
            assert len(paths) == catalan(m)
            assert sum(spath.card(p) for p in paths) == bell(m)
        target = (0, 0, 0, 2, 4)
        brute = sum(1 for cells in brute_partitions(4) if path_from_cells(cells, 4) == target)
        assert spath.card(target) == brute == 2
        note("Catalan/Bell exact for m=1..10, |C_(0,0,0,2,4)|=2")


def _random_g(rng, tau):
    k = int(rng.integers(1, 7))
    knots = np.sort(rng.uniform(-2 * tau, 2 * tau, k + 1))
    scale = 10 ** rng.uniform(-3, 3)
    left, right = rng.uniform(0, scale, k), rng.uniform(0, scale, k)
    flat = rng.random(k) < 0.2
    right[flat] = left[flat]
    return PiecewiseLinear(knots, left, right)


def test_02_kernel_integrals(criterion):
    with criterion(2, "kappa, segment integral and Laplace functional vs quadrature", 30) as note:
        rng = np.random.default_rng(2)
        worst = [0.0, 0.0, 0.0]
        for _ in range(1000):
            ell = int(rng.integers(1, 9))
            gv = 10 ** rng.uniform(-3, 2)
            ref = quad_kappa(ell, gv)
            worst[0] = max(worst[0], abs(kappa(ell, gv) / ref - 1))

            tau = rng.uniform(0.5, 10)
            crm = GammaCRM(tau)
            g = _random_g(rng, tau)
            gf = g_function(g.knots, g.left, g.right)
            a, b = np.sort(rng.uniform(-2 * tau, 2 * tau, 2))
            ref = quad_kappa_integral(ell, a, b, gf, tau, g.knots)
            worst[1] = max(worst[1], abs(math.exp(segment_integral(ell, a, b, g, crm)) / ref - 1))

            ref = -quad_neg_log_laplace(gf, tau, g.knots)
            val = laplace_functional_log(g, crm)
            worst[2] = max(worst[2], abs(val - ref) / max(abs(ref), 1e-300))
        note("max rel err kappa %.1e, segment %.1e, laplace %.1e" % tuple(worst))
        assert max(worst) < 1e-10


def test_03_single_observation_closed_form(criterion):
    with criterion(3, "single-observation closed form", 1) as note:
        d = SurvivalData([2.0], [1], 4.0)
        est = exact_posterior_hazard(np.array([0.5, 2.0]), 1.0, d)
        ref = np.array([math.log(4 / 3) / 16, math.log(2) / 16 + 0.5 / math.log(2)])
        rel = np.abs(est / ref - 1)
        note("rel err %.1e, %.1e" % tuple(rel))
        assert np.all(rel < 1e-9)


def test_04_partition_and_path_oracles_agree(criterion):
    with criterion(4, "partition oracle equals path oracle", 120) as note:
        cases = [
            (EIGHT, 1.7),
            (EIGHT, 0.6),
            (EIGHT, 0.1),
            (SurvivalData([0.3, 1.1, 2.5, 3.0, 3.3, 4.0, 4.0, 4.0], [1, 1, 1, 1, 1, 0, 0, 0], 4.0), 2.0),
        ]
        worst_h = worst_phi = 0.0
        for data, theta in cases:
            t = safe_grid(0.05, data.tau - 0.05, 10, [theta])
            a = exact_posterior_hazard(t, theta, data)
            b = partition_posterior_hazard(t, theta, data)
            worst_h = max(worst_h, float(np.max(np.abs(a / b - 1))))
            ctx = make_context(data, theta)
            for side in (ctx.minus, ctx.plus):
                for path in spath.enumerate_paths(side.k):
                    lw = [partition_log_weight(c, side, ctx) for c in spath.partitions_for_path(path)]
                    total = np.logaddexp.reduce(lw)
                    worst_phi = max(worst_phi, abs(math.expm1(total - side.log_phi(path))))
        note("hazard rel err %.1e, phi rel err %.1e" % (worst_h, worst_phi))
        assert worst_h < 1e-9 and worst_phi < 1e-10


def _chi_square(counts, expected_p):
    e = expected_p * counts.sum()
    order = np.argsort(e)
    e, o = e[order], counts[order]
    small = e < 5
    E = np.append(e[~small], e[small].sum()) if small.any() else e
    O = np.append(o[~small], o[small].sum()) if small.any() else o
    stat = float(((O - E) ** 2 / E).sum())
    return stat, len(E) - 1, float(stats.chi2.sf(stat, len(E) - 1))


def test_05_ap_stationarity(criterion):
    with criterion(5, "AP chain matches enumerated path law", 120) as note:
        for i, (data, theta) in enumerate(SMALL_INSTANCES):
            ctx = make_context(data, theta)
            pm, lm = side_path_law(ctx.minus)
            pp, lp = side_path_law(ctx.plus)
            wm = np.exp(lm - np.logaddexp.reduce(lm))
            wp = np.exp(lp - np.logaddexp.reduce(lp))
            index = {pair: j for j, pair in enumerate(itertools.product(pm, pp))}
            chain = aps_chain(theta, data, 100_000, burn_in=1000, thin=1, rng=np.random.default_rng(50 + i), ctx=ctx)
            counts = np.bincount([index[s] for s in chain.states], minlength=len(index))
            stat, df, p = _chi_square(counts, np.outer(wm, wp).ravel())
            note(f"instance {i}: chi2={stat:.1f} df={df} p={p:.3f}")
            assert p > 0.001


def test_06_sip_properness(criterion):
    with criterion(6, "SIPs estimates agree with enumeration", 120) as note:
        for i, (data, theta) in enumerate(SMALL_INSTANCES):
            t = safe_grid(0.05, data.tau - 0.05, 10, [theta])
            lw, rows = run_sips(data, theta, 10_000, 60 + i, t)
            est, se, ess = weighted_estimate(lw, rows)
            exact = exact_posterior_hazard(t, theta, data)
            z = np.abs(est - exact) / se
            ctx = make_context(data, theta)
            sums = log_path_sums(ctx)
            rng = np.random.default_rng(70 + i)
            zs = []
            for side, total in zip((ctx.minus, ctx.plus), sums):
                ups = np.empty(10_000)
                for j in range(len(ups)):
                    path, ls = sip_draw(side.k, side, rng)
                    ups[j] = math.exp(side.log_phi(path) - ls - total)
                zs.append(abs(ups.mean() - 1) / (ups.std(ddof=1) / math.sqrt(len(ups))))
            note(f"instance {i}: max |z| hazard {z.max():.2f}, E[upsilon] |z| {max(zs):.2f}, ESS {ess:.0f}")
            assert np.all(z < 3) and max(zs) < 3


def test_07_theta_posterior(criterion):
    with criterion(7, "SIPs(theta) interval probabilities vs quadrature oracle", 300) as note:
        prior = UniformPrior(0.21, 3.62)
        pieces, probs, _ = exact_theta_posterior(EIGHT, prior, points=200)
        edges = [prior.low] + [c for c in EIGHT.complete if prior.low < c < prior.high] + [prior.high]
        assert len(edges) - 1 == len(probs)
        lw, thetas, _ = run_sips_theta(EIGHT, prior, prior, 10_000, 7)
        est, se = interval_probabilities(thetas, lw, edges)
        z = np.abs(est - probs) / se
        note(f"{len(probs)} intervals, max |z| {z.max():.2f}")
        assert np.all(z < 3)


def test_08_desk_scale_replication(criterion):
    with criterion(8, "error falls with N for both test hazards", 1800) as note:
        M = 10_000
        for hz, thetas, target in ((sd.LAMBDA1, (0.5, 1.75, 3.0), 0.15), (sd.LAMBDA2, (1.0, 3.0, 5.0), 0.20)):
            full = sd.simulate(hz, 1000, rng=np.random.default_rng(2024))
            errors = {}
            for N in (100, 500, 1000):
                data = SurvivalData(full.times[:N], full.status[:N], hz.tau)
                cens = sd.censoring_fraction(data)
                assert abs(cens - target) <= 0.05, (hz.name, N, cens)
                for theta in thetas:
                    t = safe_grid(0.02 * hz.tau, 0.98 * hz.tau, 50, [theta])
                    truth = hz(t)
                    ctx = make_context(data, theta)
                    lw, rows = run_sips(data, theta, M, 1, t)
                    errors[("sips", theta, N)] = float(np.mean(np.abs(weighted_estimate(lw, rows)[0] - truth)))
                    chain = aps_chain(theta, data, M, 5000, 5, np.random.default_rng(1), ctx)
                    grid = HazardGrid(ctx, t)
                    est = np.mean([grid(a, b) for a, b in chain.states], axis=0)
                    errors[("aps", theta, N)] = float(np.mean(np.abs(est - truth)))
            for sampler in ("sips", "aps"):
                for theta in thetas:
                    e = [errors[(sampler, theta, N)] for N in (100, 500, 1000)]
                    note(f"{hz.name} {sampler} theta={theta}: " + "/".join(f"{v:.4f}" for v in e))
                    assert e[0] > e[1] > e[2]


def test_09_bayes_test_direction(criterion):
    with criterion(9, "Bayes test picks the right hypothesis", 600) as note:
        for hz, seed, expect in ((sd.LAMBDA1, 90, "H1"), (sd.INCREASING, 91, "H0")):
            data = sd.simulate(hz, 500, rng=np.random.default_rng(seed))
            comp = data.complete
            prior = UniformPrior(comp[0], comp[-1])
            res = bayes_test(data, TestSpec(0.5, prior, prior, M=10_000), seed=seed)
            p = res["posterior_" + expect]
            note(f"{hz.name}: P({expect}|data)={p:.4f} (se {res['se_posterior_H0']:.2e})")
            assert p > 0.5


def test_10_cox_reduction_and_recovery(criterion):
    with criterion(10, "Cox sampler reduces to baseline and recovers beta", 900) as note:
        # beta frozen at 0 with theta frozen: the chain is the no-covariate AP chain
        base = sd.simulate(sd.LAMBDA1, 200, rng=np.random.default_rng(100))
        x = np.random.default_rng(101).normal(size=(base.N, 1))
        cd = CoxData(SurvivalData(base.times, base.status, base.tau, x))
        comp = base.complete
        t = safe_grid(0.1, 3.9, 20, [1.75])
        cfg = CoxConfig(UniformPrior(comp[0], comp[-1]), cycles=2000, burn_in=500, thin=1, theta0=1.75,
                        freeze_theta=True, freeze_beta=True)
        chain = cox_gibbs(cd, cfg, np.random.default_rng(102))
        cox_est = baseline_hazard(cd, chain, t).mean(axis=0)
        ctx = make_context(base, 1.75)
        ap = aps_chain(1.75, base, 2000, 500, 1, np.random.default_rng(102), ctx)
        grid = HazardGrid(ctx, t)
        ap_est = np.mean([grid(a, b) for a, b in ap.states], axis=0)
        assert np.array_equal(cox_est, ap_est)
        note("frozen chain bit-identical to no-covariate APs")

        # beta frozen at 0, theta free: target is the theta posterior on theta0's inter-observation interval
        xs = np.random.default_rng(103).normal(size=(EIGHT.N, 1))
        cd8 = CoxData(SurvivalData(EIGHT.times, EIGHT.status, EIGHT.tau, xs))
        prior = UniformPrior(1.38, 2.12)
        t8 = np.array([0.3, 1.0, 2.0, 3.0, 3.7])
        _, _, exact = exact_theta_posterior(EIGHT, prior, t8)
        chain = cox_gibbs(cd8, CoxConfig(prior, cycles=10_000, burn_in=1000, theta0=1.75, freeze_beta=True),
                          np.random.default_rng(104))
        est, se = ergodic_estimate(baseline_hazard(cd8, chain, t8))
        z = np.abs(est - exact) / se
        note(f"theta-free baseline vs oracle max |z| {z.max():.2f}")
        assert np.all(z < 3)

        # recovery of a single coefficient
        data = sd.simulate_cox(sd.LAMBDA1, 1000, [0.5], rng=np.random.default_rng(20))
        comp = data.complete
        chain = cox_gibbs(CoxData(data), CoxConfig(UniformPrior(comp[0], comp[-1]), cycles=1500, burn_in=500,
                                                   theta0=1.75), np.random.default_rng(20))
        s = summarize_beta(chain)
        note(f"beta mean {s['mean'][0]:.3f}, 95% CI [{s['q025'][0]:.3f}, {s['q975'][0]:.3f}], "
             f"acceptance theta {chain.accept_theta:.2f} beta {chain.accept_beta:.2f}")
        assert s["q025"][0] < 0.5 < s["q975"][0]
        assert 0.1 < chain.accept_theta < 0.7 and 0.1 < chain.accept_beta < 0.7


def _run_all_commands(root, workers=1):
    root.mkdir()
    run = lambda *a: cli_main([str(v) for v in a])
    assert run("simulate", "--hazard", "lambda1", "--N", 40, "--seed", 5, "--out", root / "d.csv") == 0
    assert run("simulate", "--hazard", "lambda2", "--N", 40, "--seed", 6, "--beta", 0.5, "--out", root / "c.csv") == 0
    rows = "".join(f"{float(t)!r},{int(s)}\n" for t, s in zip(EIGHT.times, EIGHT.status))
    (root / "e.csv").write_text("time,status\n" + rows)
    common = ["--mc.seed", 3, "--mc.M", 300, "--mc.burn_in", 50, "--mc.thin", 2, "--grid.points", 12,
              "--mc.workers", workers]
    for mode in ("aps-fixed", "sips-fixed"):
        assert run("fit", root / "d.csv", "--mode", mode, "--theta", 1.75, "--out", root / mode, *common) == 0
    assert run("fit", root / "d.csv", "--mode", "sips-theta", "--out", root / "sips-theta", *common) == 0
    assert run("fit", root / "e.csv", "--mode", "oracle", "--theta", 1.7, "--out", root / "oracle", *common) == 0
    assert run("fit", root / "e.csv", "--mode", "oracle", "--out", root / "oracle-theta", *common) == 0
    assert run("test", root / "d.csv", "--out", root / "test", *common) == 0
    assert run("cox", root / "c.csv", "--out", root / "cox", *common) == 0
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_11_determinism(criterion, tmp_path):
    with criterion(11, "seeded reruns are byte-identical", 900) as note:
        a = _run_all_commands(tmp_path / "a")
        b = _run_all_commands(tmp_path / "b")
        c = _run_all_commands(tmp_path / "c", workers=2)
        assert a.keys() == b.keys() == c.keys()
        assert all(json.loads(a[k]) is not None for k in a if k.suffix == ".json")
        same = [k for k in a if a[k] == b[k]]
        same_w = [k for k in a if a[k] == c[k]]
        note(f"{len(same)}/{len(a)} files identical on rerun, {len(same_w)}/{len(a)} with 2 workers")
        assert len(same) == len(a) and len(same_w) == len(a)
