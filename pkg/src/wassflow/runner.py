"""Scenario tasks.  Each returns ``(verdicts, summary, files)``.

``verdicts`` is a list of records with a ``verdict`` field in
{pass, fail, non-applicable}; ``summary`` holds the key scalar outputs;
``files`` maps output file names to their text.
"""
from __future__ import annotations

import numpy as np

from . import scenario as sc
from .cases import cos_series, geodesic_pair, perturbed_measure
from .flow import (JkoConfig, barenblatt_measure, compare_jko_pde, contraction_check,
                   energy_dissipation_check, jko_trajectory, pde_run, slope_identity_check,
                   weak_residual)
from .inequalities import (alpha_estimate, classical_bound, conc_bound_check,
                           convexity_profile, hwi_lsi_check, m_normal_bound, poincare_check,
                           talagrand_check)
from .inequalities.verdict import FAIL, NA, PASS, _num
from .measures import m_gaussian, to_quantile
from .mcalc import MParam, conc_lemma_bounds, e_m, exp_m, limit_check_m_to_1, ln_m


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def check(name, ok: bool, **info) -> dict:
    return {"name": name, "verdict": PASS if ok else FAIL,
            **{k: (_num(v) if not isinstance(v, (dict, list)) else v) for k, v in info.items()}}


def _setup(cfg):
    p = sc.build_p(cfg)
    d = sc.build_domain(cfg)
    ref = sc.build_reference(cfg, d, p)
    return p, d, ref


def _record_steps(every: float, delta: float) -> int:
    return max(1, int(round(every / delta)))


def _weak_checks(trace, ref, p, cfg, scale, dt_scale):
    """Residuals for phi in {1, x, x^2}: exact conservation and a C (h + dt) bound.

    ``dt_scale`` is the spacing of the recorded times, which sets the time
    quadrature error of the residual.  First order itself is checked by
    refinement in the test suite; C here only guards against blow-ups.
    """
    d = ref.domain
    out = []
    r1 = weak_residual(trace, ref, p, "1")
    t1 = sc.tol(cfg, "weak_residual_phi_1", 1e-10, scale)
    out.append(check("weak_residual_phi_1", r1 <= t1, residual=r1, tolerance=t1))
    bound = sc.tol(cfg, "weak_residual_const", 2.0, scale) * (d.h + dt_scale)
    for phi in ("x", "x**2"):
        r = weak_residual(trace, ref, p, phi)
        out.append(check(f"weak_residual_phi_{phi}", r <= bound, residual=r, tolerance=bound))
    return out


def task_flow(cfg, scale=1.0):
    p, d, ref = _setup(cfg)
    pr = sc.params(cfg)
    T, delta, J = pr.get("T", 1.0), pr.get("delta", 1e-3), pr.get("J", 256)
    jcfg = JkoConfig(delta=delta)
    mu0 = sc.build_initial(cfg["initial"], d, p, ref)
    every = _record_steps(pr.get("record_every", 0.05), delta)
    tr = jko_trajectory(mu0, ref, p, jcfg, T, J=J, record_every=every,
                        with_I=pr.get("with_I", False))
    files = {"trace.csv": tr.to_csv()}
    bad = tr.check_invariants(energy_tol=sc.tol(cfg, "energy", 1e-10, scale),
                              mass_tol=sc.tol(cfg, "mass", 1e-8, scale))
    verdicts = [check("trace_invariants", not bad, violations=bad)]
    summary = {"H_initial": tr.H[0], "H_final": tr.H[-1], "W2_final": tr.W2_to_ref[-1],
               "steps": int(round(T / delta))}
    checks = pr.get("checks", [])
    if "contraction" in checks or "initial_b" in cfg:
        if "initial_b" not in cfg:
            raise ValueError("contraction needs initial_b")
        mu_b = sc.build_initial(cfg["initial_b"], d, p, ref)
        res = contraction_check(mu0, mu_b, ref, p, jcfg, T, J=J)
        if not res["applicable"]:
            verdicts.append({"name": "contraction", "verdict": NA, "reason": res["reason"]})
        else:
            K = res["K"]
            rtol = sc.tol(cfg, "contraction_rate", 0.1, scale)
            rate = res["measured_rate"]
            verdicts.append(check("contraction_envelope", res["holds"], K=K, eps_tol=res["eps_tol"]))
            verdicts.append(check("contraction_rate", abs(rate - K) <= rtol * abs(K),
                                  measured_rate=rate, K=K, tolerance=rtol))
            files["contraction.csv"] = csv_text(
                ("t", "w2", "envelope"), zip(res["times"], res["w2"], res["envelope"]))
            summary["measured_rate"] = rate
    if "slope" in checks:
        res = slope_identity_check(mu0, ref, p, rel_tol=sc.tol(cfg, "slope", 0.05, scale))
        verdicts.append(check("slope_identity", res["holds"], sqrt_I=res["sqrt_I"],
                              slope=res["slope_estimate"], gap=res["gap"],
                              tolerance=res["tolerance"]))
    if "weak_residual" in checks:
        verdicts += _weak_checks(tr, ref, p, cfg, scale, every * delta)
    return verdicts, summary, files


def _is_flat(ref) -> bool:
    P = ref.potential()
    return bool(np.all(ref.domain.psi == 0) and np.ptp(P) == 0)


def task_pde(cfg, scale=1.0):
    p, d, ref = _setup(cfg)
    pr = sc.params(cfg)
    T = pr.get("T", 1.0)
    mode = pr.get("mode", "explicit")
    init = cfg["initial"]
    mu0 = sc.build_initial(init, d, p, ref)
    tr = pde_run(mu0, ref, p, T, dt=pr.get("dt"), mode=mode,
                 record_every=pr.get("record_every", max(T / 50, 1e-12) if T > 0 else 1.0),
                 with_I=pr.get("with_I", True))
    files = {"trace.csv": tr.to_csv()}
    bad = tr.check_invariants(energy_tol=sc.tol(cfg, "energy", 1e-9, scale),
                              mass_tol=sc.tol(cfg, "mass", 1e-10, scale))
    rmin = min(float(mu.rho.min()) for mu in tr.measures)
    verdicts = [check("trace_invariants", not bad, violations=bad),
                check("nonnegative", rmin >= 0.0, min_density=rmin)]
    summary = {"H_initial": tr.H[0], "H_final": tr.H[-1],
               "mass_drift": float(max(abs(m - tr.mass[0]) for m in tr.mass))}
    if init["type"] == "reference":
        Hmax = float(max(tr.H))
        tol = sc.tol(cfg, "stationary", 1e-8, scale)
        verdicts.append(check("stationary", Hmax < tol, max_H=Hmax, tolerance=tol))
        summary["max_H"] = Hmax
    if init["type"] == "barenblatt":
        if not _is_flat(ref):
            verdicts.append({"name": "barenblatt", "verdict": NA,
                             "reason": "oracle needs psi = 0 and a flat potential"})
        else:
            t1 = init["t0"] + T
            exact = barenblatt_measure(d, p.m, t1, x0=init.get("x0", 0.0))
            err = tr.measures[-1].l1(exact)
            tol = sc.tol(cfg, "barenblatt_l1", 3e-2, scale)
            verdicts.append(check("barenblatt", err <= tol, t=t1, l1_error=err, tolerance=tol))
            summary["final_l1_error"] = err
    checks = pr.get("checks", [])
    if "energy_dissipation" in checks:
        res = energy_dissipation_check(tr, rel_tol=sc.tol(cfg, "energy_dissipation", 0.1, scale))
        verdicts.append(check("energy_dissipation", res["holds"],
                              max_rel_error=res["max_rel_error"], tolerance=res["tolerance"]))
    if "weak_residual" in checks:
        spacing = float(np.max(np.diff(tr.times))) if len(tr.times) > 1 else 0.0
        verdicts += _weak_checks(tr, ref, p, cfg, scale, spacing)
    return verdicts, summary, files


def task_compare(cfg, scale=1.0):
    p, d, ref = _setup(cfg)
    pr = sc.params(cfg)
    mu0 = sc.build_initial(cfg["initial"], d, p, ref)
    res = compare_jko_pde(mu0, ref, p, pr.get("T", 1.0), delta=pr.get("delta", 1e-3),
                          J=pr.get("J", 256), every=pr.get("record_every", 0.05))
    tol = sc.tol(cfg, "l1_gap", 5e-2, scale)
    v = check("jko_vs_pde", res["sup_gap"] <= tol, sup_gap=res["sup_gap"], tolerance=tol,
              in_theorem_scope=res["in_theorem_scope"])
    files = {"gaps.csv": csv_text(("t", "l1_gap"), zip(res["times"], res["l1_gap"])),
             "jko_trace.csv": res["jko"].to_csv(), "pde_trace.csv": res["pde"].to_csv()}
    return [v], {"sup_gap": res["sup_gap"]}, files


def _bump_q(d, center, width, J, p):
    """Quantiles of a narrow m-Gaussian (or Gaussian-like) bump."""
    mu, _ = m_gaussian(MParam(1.5) if p.m < 1 else p, center, width * width, d)
    return to_quantile(mu, J)


def _well_pairs(ref, p, J):
    """Narrow bumps sitting in distinct local minima of Psi."""
    x, Psi = ref.domain.x, ref.Psi
    idx = [i for i in range(1, len(x) - 1) if Psi[i] < Psi[i - 1] and Psi[i] <= Psi[i + 1]]
    pairs = []
    for i, j in zip(idx, idx[1:]):
        w = 0.1 * (x[j] - x[i])
        pairs.append((_bump_q(ref.domain, x[i], w, J, p), _bump_q(ref.domain, x[j], w, J, p)))
    return pairs


def task_convexity(cfg, scale=1.0):
    p, d, ref = _setup(cfg)
    pr = sc.params(cfg)
    n, J = pr.get("cases", 100), pr.get("J", 256)
    K = pr.get("K", ref.K_hat)
    sharp = pr.get("sharpness")
    expect = pr.get("expect", "convex")
    rtol = sc.tol(cfg, "profile", 1e-4, scale)
    rng = sc.rng(cfg)
    pairs = [geodesic_pair(ref, rng, J) for _ in range(n)]
    if expect == "counterexample":
        pairs += _well_pairs(ref, p, J)
    rows, fails, sharp_fails = [], 0, 0
    for k, (q0, q1) in enumerate(pairs):
        prof = convexity_profile(q0, q1, ref, p, K, J=J, rel_tol=rtol)
        row = [k, prof.W2sq, prof.min_margin, prof.tol, prof.verdict]
        fails += prof.verdict != PASS
        if sharp is not None:
            sp = convexity_profile(q0, q1, ref, p, K + sharp, J=J, rel_tol=rtol)
            sharp_fails += sp.verdict != PASS
            row += [sp.min_margin, sp.verdict]
        rows.append(row)
    header = ["case", "W2sq", "min_margin", "tol", "verdict"]
    if sharp is not None:
        header += ["sharp_min_margin", "sharp_verdict"]
    files = {"convexity.csv": csv_text(header, rows)}
    summary = {"K": K, "cases": len(pairs), "failures": fails}
    if expect == "convex":
        verdicts = [check("k_profile", fails == 0, K=K, failures=fails, cases=len(pairs))]
    else:
        verdicts = [check("counterexample_detected", fails > 0, K=K, failures=fails,
                          cases=len(pairs))]
    if sharp is not None:
        frac = sharp_fails / len(pairs)
        need = 1.0 - sc.tol(cfg, "sharpness_miss", 0.1, scale)
        verdicts.append(check("sharpness_probe", frac >= need, K_probe=K + sharp,
                              fail_fraction=frac, required=need))
        summary["sharpness_fail_fraction"] = frac
    return verdicts, summary, files


def task_ineq(cfg, scale=1.0):
    p, d, ref = _setup(cfg)
    pr = sc.params(cfg)
    n = pr.get("cases", 100)
    names = pr.get("checks", ["talagrand", "hwi_lsi", "poincare"])
    rng = sc.rng(cfg)
    rows = []
    counts = {k: [0, 0, 0] for k in names + (["lsi"] if "hwi_lsi" in names else [])}

    def tally(rec, k):
        col = {PASS: 0, FAIL: 1}.get(rec["verdict"], 2)
        counts[rec["name"]][col] += 1
        rows.append([k, rec["name"], _fmt(rec.get("lhs")), _fmt(rec.get("rhs")),
                     _fmt(rec.get("slack")), rec["verdict"]])

    for k in range(n):
        mu = perturbed_measure(ref, rng)
        if "talagrand" in names:
            tally(talagrand_check(mu, ref, p, tol_scale=scale), k)
        if "hwi_lsi" in names:
            rec = hwi_lsi_check(mu, ref, p, tol_scale=scale)
            tally(rec, k)
            if "lsi" in rec:
                tally(rec["lsi"], k)
        if "poincare" in names:
            f = cos_series(d.x, d.a, d.b, rng, n_modes=5)
            tally(poincare_check(f, ref, p, tol_scale=scale), k)
        if "slope" in names:
            res = slope_identity_check(mu, ref, p, rel_tol=sc.tol(cfg, "slope", 0.05, scale))
            tally({"name": "slope", "lhs": res["gap"], "rhs": res["tolerance"],
                   "slack": res["tolerance"] - res["gap"],
                   "verdict": PASS if res["holds"] else FAIL}, k)
    verdicts = []
    for name, (ok, bad, na) in counts.items():
        rec = check(name, bad == 0, passed=ok, violations=bad, non_applicable=na)
        if ok == 0 and bad == 0:
            rec["verdict"] = NA
        verdicts.append(rec)
    files = {"ineq.csv": csv_text(("case", "check", "lhs", "rhs", "slack", "verdict"), rows)}
    summary = {f"{k}_violations": v[1] for k, v in counts.items()}
    summary["cases"] = n
    return verdicts, summary, files


def task_conc(cfg, scale=1.0):
    p, d, ref = _setup(cfg)
    pr = sc.params(cfg)
    r = np.asarray(pr.get("r_grid", np.linspace(0.1, 3.0, 30).tolist()), dtype=float)
    rep = alpha_estimate(ref, p, r)
    verdicts = []
    bounds = {}
    for theta in pr.get("thetas", [0.0]):
        rec = conc_bound_check(ref, p, rep, theta=theta, rel_tol=sc.tol(cfg, "bound", 1e-9, scale))
        rec["name"] = f"concentration_theta_{theta!r}"
        for key, c in rec.get("checks", {}).items():
            if "bound" in c:
                bounds[key] = c["bound"]
        rec.pop("report", None)
        verdicts.append(rec)
    alpha_1 = float(alpha_estimate(ref, p, [1.0]).alpha_lower[0])
    summary = {"K": ref.K_hat, "alpha_1": alpha_1}
    if 0.5 < p.m < 1 and abs(p.m - 1) <= 0.01:
        mn, cl = m_normal_bound(ref, p, r), classical_bound(ref.K_hat, r)
        dev = float(np.max(np.abs(mn / cl - 1)))
        tol = sc.tol(cfg, "classical_limit", 0.05, scale)
        verdicts.append(check("classical_limit", dev <= tol, max_rel_deviation=dev, tolerance=tol))
        summary["classical_deviation"] = dev
    header = ["r", "alpha_lower"] + sorted(bounds)
    rows = [[ri, ai] + [bounds[k][i] for k in sorted(bounds)]
            for i, (ri, ai) in enumerate(zip(r, rep.alpha_lower))]
    return verdicts, summary, {"alpha.csv": csv_text(header, rows)}


def calculus_suite(grid: int = 50, eps=(1e-2, 1e-3, 1e-4), m_values=None, scale: float = 1.0):
    """Round trip, monotonicity, convexity and m -> 1 checks, plus the
    elementary concentration inequality on a ``grid^3`` (m, a, r) lattice."""
    if m_values is None:
        m_values = [0.55, 0.75, 0.9, 0.999, 1.001, 1.25, 1.5, 2.0, 3.0]
    t = np.geomspace(1e-3, 1e3, 400)
    verdicts = []
    worst = 0.0
    mono = conv = True
    for m in m_values:
        y = ln_m(m, t)
        # ln_m maps (0, inf) into the range where exp_m inverts it
        back = exp_m(m, y)
        worst = max(worst, float(np.max(np.abs(back - t) / np.maximum(1.0, t))))
        mono &= bool(np.all(np.diff(y) > 0))
        # exp_m is finite where 1 + (m-1)s > 0
        s = np.linspace(-1.0, 1.0, 200) * min(0.9 / abs(m - 1), 30.0)
        mono &= bool(np.all(np.diff(exp_m(m, s)) > 0))
        e = e_m(m, np.linspace(0.01, 5, 500))
        conv &= bool(np.all(np.diff(e, 2) > -1e-12))
    rt_tol = 1e-12 * scale
    verdicts.append(check("round_trip", worst <= rt_tol, max_scaled_error=worst, tolerance=rt_tol))
    verdicts.append(check("monotonicity", mono))
    verdicts.append(check("e_m_convexity", conv))
    lim_ok, lim_rows = True, []
    for ep in eps:
        for tt in (0.1, 0.5, 1.0, 2.0, 10.0):
            res = limit_check_m_to_1(tt, ep)
            lim_ok &= res["holds"]
            lim_rows.append([ep, tt, res["deviation"]["ln"], res["deviation"]["exp"],
                             res["deviation"]["e"], res["holds"]])
    verdicts.append(check("classical_limit", lim_ok))
    ms = np.concatenate([np.linspace(0.51, 0.99, grid // 2), np.linspace(1.01, 1.99, grid - grid // 2)])
    As = np.linspace(0.05, 3.0, grid)
    Rs = np.linspace(0.05, 3.0, grid)
    bad = 0
    for m in ms:
        for a in As:
            for rr in Rs:
                _, _, ok = conc_lemma_bounds(float(m), float(a), float(rr))
                bad += not ok
    verdicts.append(check("lemma_grid", bad == 0, points=grid ** 3, failures=bad))
    files = {"limit.csv": csv_text(("eps", "t", "dev_ln", "dev_exp", "dev_e", "holds"), lim_rows)}
    return verdicts, {"lemma_failures": bad, "round_trip_error": worst}, files


def task_calculus(cfg, scale=1.0):
    pr = sc.params(cfg)
    return calculus_suite(pr.get("grid", 50), tuple(pr.get("eps", (1e-2, 1e-3, 1e-4))),
                          m_values=sorted({cfg["m"], 0.55, 0.75, 0.999, 1.001, 1.5, 2.0}),
                          scale=scale)


TASK_FNS = {"flow": task_flow, "pde": task_pde, "compare": task_compare,
            "convexity": task_convexity, "ineq": task_ineq, "conc": task_conc,
            "calculus": task_calculus}


def run_task(cfg, scale=1.0):
    return TASK_FNS[cfg["task"]](cfg, scale)
