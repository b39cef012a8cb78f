"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line; the lines are also
collected in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from wassflow import Domain1D, GridMeasure, MParam, QuantileRep, h_m, m_gaussian, w2
from wassflow import scenario as sc
from wassflow.cases import cos_series, geodesic_pair, perturbed_measure
from wassflow.domain import ReferencePotential, quadratic_reference
from wassflow.entropy import reference_from_density
from wassflow.flow.checks import (compare_jko_pde, contraction_check, slope_identity_check,
                                  weak_residual)
from wassflow.flow.jko import JkoConfig, jko_trajectory
from wassflow.flow.pde import barenblatt_measure, pde_run
from wassflow.flow.trace import reference_measure
from wassflow.inequalities.concentration import (alpha_estimate, classical_bound,
                                                 conc_bound_check, m_normal_bound)
from wassflow.inequalities.convexity import convexity_profile
from wassflow.inequalities.functional import hwi_lsi_check, poincare_check, talagrand_check
from wassflow.inequalities.verdict import FAIL, PASS
from wassflow.measures import from_lebesgue
from wassflow.runner import calculus_suite, run_task
from wassflow.transport import w2_atoms, w2_lp_oracle

# densities for each m on domains where the m-Gaussian reference fits
DOMAINS = {0.6: (-8, 8), 0.75: (-8, 8), 1.5: (-2, 2), 2.0: (-1, 1)}


def quad_ref(m, dom, M, K=1.0, normalize=True):
    p = MParam(m)
    d = Domain1D("segment", *dom, M)
    return p, d, quadratic_reference(d, p, K, normalize=normalize)


def order(hs, errs):
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def test_criterion_01_calculus(criterion):
    t0 = time.perf_counter()
    verdicts, summary, _ = calculus_suite(grid=50)
    dt = time.perf_counter() - t0
    failed = [v["name"] for v in verdicts if v["verdict"] != PASS]
    ok = not failed and summary["lemma_failures"] == 0 and dt < 10
    criterion(1, ok, f"{len(verdicts)} checks, failed={failed}, lemma grid 50^3 failures="
                     f"{summary['lemma_failures']}, round trip {summary['round_trip_error']:.1e}"
                     f" <= 1e-12 max(1,t), {dt:.1f}s < 10s")
    assert ok


def test_criterion_02_transport_oracle(criterion):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(200):
        if k % 2:
            n, j = rng.integers(1, 9, 2)
            mu = (rng.normal(size=n), rng.dirichlet(np.ones(n)))
            nu = (rng.normal(size=j), rng.dirichlet(np.ones(j)))
            got = w2_atoms(mu, nu)
        else:
            n = int(rng.integers(1, 9))
            x, y = rng.normal(size=n), rng.normal(size=n)
            mu, nu = (x, np.full(n, 1 / n)), (y, np.full(n, 1 / n))
            got = w2(QuantileRep(np.sort(x)), QuantileRep(np.sort(y)))
        oracle = w2_lp_oracle(mu, nu)
        worst = max(worst, abs(got - oracle) / max(oracle, 1e-300))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and dt < 30
    criterion(2, ok, f"200 instances, max rel err {worst:.1e} <= 1e-6, {dt:.1f}s < 30s")
    assert ok


def test_criterion_03_entropy_ground_state(criterion):
    rng = np.random.default_rng(3)
    ground, nonpos = 0.0, 0
    for m, dom in DOMAINS.items():
        p, d, ref = quad_ref(m, dom, 512)
        ground = max(ground, abs(h_m(p, reference_measure(ref), ref).value))
        nonpos += sum(h_m(p, perturbed_measure(ref, rng), ref).value <= 0 for _ in range(1000))
    d = Domain1D("segment", 0, 2, 2048)
    hand = {}
    for m, expected in ((2.0, 0.25), (0.5, 4 * math.sqrt(2) - 4)):
        p = MParam(m)
        ref = reference_from_density(p, from_lebesgue(d, np.full(d.M, 0.5)))
        val = h_m(p, from_lebesgue(d, np.where(d.x < 1, 1.0, 0.0)), ref).value
        hand[m] = abs(val - expected)
    ok = ground <= 1e-9 and nonpos == 0 and max(hand.values()) <= 1e-3
    criterion(3, ok, f"max H(nu|nu)={ground:.1e} <= 1e-9, nonpositive H on 4x1000 perturbed: "
                     f"{nonpos}, hand-value errors m=2: {hand[2.0]:.1e}, m=1/2: {hand[0.5]:.1e}")
    assert ok


def test_criterion_04_convexity(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    fails, sharp = {}, {}
    for m, dom in ((0.75, (-8, 8)), (1.5, (-1, 1))):
        p, d, ref = quad_ref(m, dom, 256)
        K = ref.K_hat
        f = s = 0
        for _ in range(100):
            a, b = geodesic_pair(ref, rng, 256)
            f += convexity_profile(a, b, ref, p, K, J=256, rel_tol=1e-4).verdict != PASS
            s += convexity_profile(a, b, ref, p, K + 0.5, J=256, rel_tol=1e-4).verdict == FAIL
        fails[m], sharp[m] = f, s / 100
    cfg, _, _ = sc.load("double_well")
    verdicts, summary, _ = run_task(cfg)
    detected = all(v["verdict"] == PASS for v in verdicts)
    dt = time.perf_counter() - t0
    ok = all(v == 0 for v in fails.values()) and min(sharp.values()) >= 0.9 and detected \
        and dt < 120
    criterion(4, ok, f"K-profile failures {fails} of 100, sharpness fail fraction {sharp} >= 0.9, "
                     f"double well violations {summary['failures']}/{summary['cases']}, "
                     f"{dt:.1f}s < 120s")
    assert ok


def test_criterion_05_functional_inequalities(criterion):
    rng = np.random.default_rng(5)
    bad = {"talagrand": 0, "hwi": 0, "lsi": 0, "poincare": 0}
    n = 0
    for m, dom in ((0.75, (-8, 8)), (1.5, (-2, 2))):
        p, d, ref = quad_ref(m, dom, 256)
        for _ in range(1000):
            mu = perturbed_measure(ref, rng)
            bad["talagrand"] += talagrand_check(mu, ref, p)["verdict"] != PASS
            rec = hwi_lsi_check(mu, ref, p)
            bad["hwi"] += rec["verdict"] != PASS and rec["lsi"]["verdict"] == PASS
            bad["lsi"] += rec["lsi"]["verdict"] != PASS
            f = cos_series(d.x, d.a, d.b, rng, n_modes=6)
            bad["poincare"] += poincare_check(f, ref, p)["verdict"] != PASS
            n += 1
    ok = sum(bad.values()) == 0
    criterion(5, ok, f"{n} cases per suite over m in {{0.75, 1.5}}, violations {bad}")
    assert ok


def test_criterion_06_jko_vs_pde(criterion):
    t0 = time.perf_counter()
    gaps, ratios = {}, {}
    for m, dom in ((0.75, (-8, 8)), (1.5, (-2.5, 2.5)), (2.0, (-2.5, 2.5))):
        sup = []
        for M, delta, J in ((512, 1e-3, 256), (1024, 5e-4, 512)):
            p, d, ref = quad_ref(m, dom, M)
            mu0, _ = m_gaussian(p, 0.3, 0.3 if m < 1 else 0.15, d, tail_tol=1e-4)
            sup.append(compare_jko_pde(mu0, ref, p, 1.0, delta=delta, J=J)["sup_gap"])
        gaps[m], ratios[m] = sup[0], sup[1] / sup[0]
    p = MParam(2.0)
    d = Domain1D("segment", -2.5, 2.5, 512)
    flat = ReferencePotential.from_expr(d, p, 0)
    tr = pde_run(barenblatt_measure(d, 2.0, 0.1), flat, p, 0.9, with_I=False)
    bb = tr.measures[-1].l1(barenblatt_measure(d, 2.0, 1.0))
    dt = time.perf_counter() - t0
    ok = max(gaps.values()) <= 5e-2 and max(ratios.values()) <= 0.6 and bb <= 3e-2
    criterion(6, ok, "sup L1 gap " + ", ".join(f"m={m}: {g:.4f}" for m, g in gaps.items())
              + " <= 5e-2; refinement ratio " + ", ".join(f"{r:.2f}" for r in ratios.values())
              + f" <= 0.6; Barenblatt L1 {bb:.4f} <= 3e-2; {dt:.0f}s total")
    assert ok


def test_criterion_07_contraction(criterion):
    rates, holds = {}, True
    for m, dom, norm, V in ((0.75, (-8, 8), True, 0.3), (1.5, (-2.5, 2.5), False, 0.05),
                            (2.0, (-2.5, 2.5), False, 0.05)):
        p, d, ref = quad_ref(m, dom, 512, normalize=norm)
        a, _ = m_gaussian(p, -0.4, V, d, tail_tol=1e-4)
        b, _ = m_gaussian(p, 0.4, V, d, tail_tol=1e-4)
        rep = contraction_check(a, b, ref, p, JkoConfig(delta=0.01), 3.0, J=256)
        rates[m] = rep["measured_rate"]
        holds &= rep["holds"]
    ok = holds and all(abs(r - 1.0) <= 0.1 for r in rates.values())
    criterion(7, ok, "decay rate over [0,3] " + ", ".join(f"m={m}: {r:.4f}" for m, r in rates.items())
              + f" within 10% of K=1; envelope holds: {holds}")
    assert ok


def test_criterion_08_weak_residual(criterion):
    worst_one, orders, bounded = 0.0, {}, True
    for m, dom in ((0.75, (-8, 8)), (1.5, (-2.5, 2.5))):
        hs, res = [], {"x": [], "x**2": []}
        for M, J, delta, every in ((256, 128, 0.02, 0.04), (512, 256, 0.01, 0.02),
                                   (1024, 512, 0.005, 0.01)):
            p, d, ref = quad_ref(m, dom, M)
            mu, _ = m_gaussian(p, 0.5, 0.3 if m < 1 else 0.1, d, tail_tol=1e-4)
            tr = jko_trajectory(mu, ref, p, JkoConfig(delta=delta), 1.0, J=J,
                                record_every=int(round(every / delta)), with_I=False)
            worst_one = max(worst_one, weak_residual(tr, ref, p, "1"))
            scale = d.h + delta + every
            hs.append(scale)
            for phi in res:
                res[phi].append(weak_residual(tr, ref, p, phi))
                bounded &= res[phi][-1] <= 2.0 * scale
        for phi, r in res.items():
            orders[f"jko m={m} {phi}"] = order(hs, r)
    p = MParam(2.0)
    hs, res = [], {"x**2": []}
    for M, every in ((128, 0.02), (256, 0.01), (512, 0.005)):
        d = Domain1D("segment", -2.5, 2.5, M)
        flat = ReferencePotential.from_expr(d, p, 0)
        tr = pde_run(barenblatt_measure(d, 2.0, 0.1), flat, p, 0.4, record_every=every,
                     with_I=False)
        worst_one = max(worst_one, weak_residual(tr, flat, p, "1"))
        hs.append(d.h + every)
        res["x**2"].append(weak_residual(tr, flat, p, "x**2"))
        bounded &= res["x**2"][-1] <= 2.0 * hs[-1]
    orders["pde barenblatt x**2"] = order(hs, res["x**2"])
    ok = worst_one <= 1e-10 and bounded and min(orders.values()) >= 0.75
    criterion(8, ok, f"phi=1 residual {worst_one:.1e} <= 1e-10; residual <= 2(h+delta+spacing): "
                     f"{bounded}; observed orders "
              + ", ".join(f"{k}: {v:.2f}" for k, v in orders.items()) + " (>= 0.75)")
    assert ok


def test_criterion_09_slope_identity(criterion):
    # sigma and rho bounded below on the whole segment, the check's precondition
    rng = np.random.default_rng(9)
    family = ((0.6, (-2, 2)), (0.75, (-2, 2)), (1.5, (-1, 1)), (2.0, (-1, 1)))
    rel = []
    for k in range(50):
        m, dom = family[k % 4]
        p, d, ref = quad_ref(m, dom, 2048)
        rep = slope_identity_check(perturbed_measure(ref, rng), ref, p, abs_tol=0.0)
        rel.append(rep["gap"] / rep["sqrt_I"])
    worst = max(rel)
    ok = worst <= 0.05
    criterion(9, ok, f"50 cases over m in {{0.6, 0.75, 1.5, 2}}, max |slope - sqrt(I)|/sqrt(I) "
                     f"= {worst:.4f} <= 0.05")
    assert ok


def test_criterion_10_concentration(criterion):
    r = np.linspace(0.05, 3.0, 30)
    verdicts = {}
    for m, dom, thetas in ((0.75, (-8, 8), (0.0, 0.25, 0.45)), (0.9, (-8, 8), (0.0, 0.5)),
                           (1.5, (-2, 2), (0.0, 0.5)), (2.0, (-2, 2), (0.0, 0.5))):
        p, d, ref = quad_ref(m, dom, 1024)
        rep = alpha_estimate(ref, p, r)
        for th in thetas:
            verdicts[(m, th)] = conc_bound_check(ref, p, rep, theta=th)["verdict"]
    p, d, ref = quad_ref(0.999, (-8, 8), 1024)
    rr = np.linspace(0, 3, 31)
    dev = float(np.max(np.abs(m_normal_bound(ref, p, rr) / classical_bound(ref.K_hat, rr) - 1)))
    alphas = []
    for K in (1.0, 2.0, 4.0, 8.0, 16.0):
        p, d, ref = quad_ref(0.75, (-8, 8), 1024, K=K)
        alphas.append(float(alpha_estimate(ref, p, [1.0]).alpha_lower[0]))
    decreasing = all(b < a for a, b in zip(alphas, alphas[1:]))
    ok = all(v == PASS for v in verdicts.values()) and dev <= 0.05 and decreasing
    failed = [k for k, v in verdicts.items() if v != PASS]
    criterion(10, ok, f"{len(verdicts)} (m, theta) verdicts, failed {failed}; classical-limit "
                      f"deviation {dev:.4f} <= 0.05; alpha(1) over K=1..16: "
              + ", ".join(f"{a:.3g}" for a in alphas) + f" strictly decreasing: {decreasing}")
    assert ok
