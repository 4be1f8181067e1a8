"""Acceptance criteria, one test per criterion, at the stated tolerances.

Each test prints one `ACCEPTANCE <n>: PASS|FAIL` line with the measured
numbers.  Criteria 2, 3, 5 and 8 encode headline numbers from the source
figures that are not reproducible from the stated model (the evanescent
mode profile at the atom position suppresses the spectral density
exponentially above ~5 omega_0, giving femtosecond-scale kernels; see
README "Known deviations").  They are asserted faithfully and fail with
the measured values.
"""

import numpy as np
import pytest

from onfsim import analysis as ana
from onfsim import bath, dynamics, pipeline
from onfsim import waveguide as wg
from onfsim.constants import C, FS, N1_SILICA, NM, OMEGA_0, OMEGA_350


def report(n, ok, detail):
    print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


@pytest.fixture(scope="module")
def ctxs(ctx_const_200, ctx_dl_200, ctx_const_150, ctx_dl_150):
    return {("constant", 200): ctx_const_200,
            ("drude_lorentz", 200): ctx_dl_200,
            ("constant", 150): ctx_const_150,
            ("drude_lorentz", 150): ctx_dl_150}


def test_criterion_1_dispersion_sandwich_and_asymptotes(ctxs):
    details = []
    ok = True
    for key in (("constant", 200), ("drude_lorentz", 200)):
        t = ctxs[key].table
        n1 = ctxs[key].model.refractive_index(t.omega)
        sandwich = bool(np.all(t.beta > t.omega / C)
                        and np.all(t.beta < n1 * t.omega / C))
        ok &= sandwich
        details.append(f"{key[0]} sandwich={sandwich}")
    m = wg.DielectricModel.constant()
    w_lo = 0.05 * OMEGA_350
    b_lo = wg.solve_beta(m, 200 * NM, w_lo)
    low_dev = abs(b_lo - w_lo / C) / (w_lo / C)
    ok &= low_dev < 0.01
    w_hi = 3 * OMEGA_350
    b_hi = wg.solve_beta(m, 200 * NM, w_hi)
    hi_dev = abs(b_hi - N1_SILICA * w_hi / C) / (N1_SILICA * w_hi / C)
    ok &= hi_dev < 0.02
    details.append(f"low-freq dev={low_dev:.2e} (<1%), "
                   f"high-freq dev={hi_dev:.4f} (<2%)")
    assert report(1, ok, "; ".join(details))


def test_criterion_2_correlation_widths(ctxs, cases):
    case_c = cases.case(ctxs[("constant", 200)], 2.0)
    case_d = cases.case(ctxs[("drude_lorentz", 200)], 2.0)
    w_const = bath.fwhm(case_c.F_mm)
    w_dl = bath.fwhm(case_d.F_mm)
    ok_const = w_const < 0.05 * FS
    ok_dl = abs(w_dl - 1.5 * FS) <= 0.30 * 1.5 * FS
    detail = (f"constant FWHM={w_const / FS:.3f} fs (require <0.05), "
              f"DL FWHM={w_dl / FS:.3f} fs (require 1.5+-30%)")
    assert report(2, ok_const and ok_dl, detail), (
        "paper-derived widths are not reproducible from the stated model; "
        "see the decisions ledger")


def test_criterion_3_two_peak_law(ctxs):
    ctx = ctxs[("constant", 200)]
    ok = True
    details = []
    for d_nm in (780.0, 1560.0, 3120.0):
        d = d_nm * NM
        grid = pipeline.spectral_grids(ctx, d)
        F = bath.correlation_function(
            grid, "two_point", dt_target=ctx.config.solver["dt_fs"] * FS,
            keep_full_window=True)
        t_neg, t_pos = bath.two_point_peaks(F)
        sep = t_pos - t_neg
        target = 2 * d * N1_SILICA / C
        ok_i = abs(sep - target) <= F.dt
        ok &= ok_i
        details.append(f"d={d_nm:.0f}nm: sep={sep / FS:.3f} fs vs "
                       f"2dn1/c={target / FS:.3f} fs "
                       f"(diff {abs(sep - target) / F.dt:.0f} steps)")
    assert report(3, ok, "; ".join(details)), (
        "the measured separation tracks the group delay of the spectral "
        "weight (2 d n_g/c), not the bulk phase index; see the ledger")


def test_criterion_4_markov_limit_oracle(ctxs, cases):
    case = cases.case(ctxs[("constant", 200)], 2.0)
    gamma_M = case.report.extras["gamma_markov_per_s"]
    fitted_pop_rate = 2 * case.report.gamma_single
    dev = abs(fitted_pop_rate - 2 * gamma_M) / (2 * gamma_M)
    ok = dev < 0.02
    assert report(4, ok, f"fitted pop rate / 2 pi S(omega0) = "
                         f"{fitted_pop_rate / (2 * gamma_M):.5f} "
                         f"(dev {dev:.2e}, require <2%)")


def test_criterion_5_collective_quotients(ctxs, cases):
    rc = cases.case(ctxs[("constant", 200)], 2.0).report
    rd = cases.case(ctxs[("drude_lorentz", 200)], 2.0).report
    qp_c, qm_c = rc.quotient_plus, rc.quotient_minus
    qp_d, qm_d = rd.quotient_plus, rd.quotient_minus
    ok_window = 1.9 < qp_c < 2.0 and 1.9 < qp_d < 2.0
    ok_minus = 0.0 < qm_c <= 0.1 and 0.0 < qm_d <= 0.1
    dev_c = abs(qp_c - 2.0) / 2.0
    dev_d = abs(qp_d - 2.0) / 2.0
    ok_order = dev_c > dev_d
    ok_mag = dev_c <= 0.08 and dev_d <= 0.01
    detail = (f"q+={qp_c:.5f}/{qp_d:.5f} (const/DL, require (1.9,2.0)), "
              f"q-={qm_c:.2e}/{qm_d:.2e} (require (0,0.1]), "
              f"dev const={dev_c:.2e} DL={dev_d:.2e} "
              f"(require const>DL, <=8%/<=1%)")
    assert report(5, ok_window and ok_minus and ok_order and ok_mag, detail), (
        "retardation strictly enhances the resonant superradiant rate above "
        "2 gamma (delay factor e^{gamma t_d}); see the ledger")


def test_criterion_6_separation_independence(ctxs, cases):
    details = []
    ok = True
    for key in (("constant", 200), ("drude_lorentz", 200)):
        qps, qms = [], []
        for n_sep in (2.0, 4.0, 6.0):  # lambda0, 2 lambda0, 3 lambda0 guided
            r = cases.case(ctxs[key], n_sep).report
            qps.append(r.quotient_plus)
            qms.append(r.quotient_minus)
        spread_p = ana.separation_spread(qps)
        spread_m = ana.separation_spread(qms, scale=np.mean(qps))
        ok &= spread_p < 0.01 and spread_m < 0.01
        details.append(f"{key[0]}: spread(q+)={spread_p:.2e}, "
                       f"spread(q-)={spread_m:.2e}")
    assert report(6, ok, "; ".join(details) + " (require <1%)")


def test_criterion_7_communication_speed(ctxs, cases):
    ok = True
    details = []
    for model in ("constant", "drude_lorentz"):
        for a_nm in (150, 200):
            ctx = ctxs[(model, a_nm)]
            r = cases.case(ctx, 4.0).report  # d = 2 lambda0 (guided)
            dev_p = abs(r.v_com_plus - ctx.v_g0) / ctx.v_g0
            dev_m = abs(r.v_com_minus - ctx.v_g0) / ctx.v_g0
            agree = abs(r.v_com_plus - r.v_com_minus) / ctx.v_g0
            ok &= dev_p < 0.10 and dev_m < 0.10 and agree < 0.02
            details.append(f"{model[:5]}/a={a_nm}: "
                           f"v+/vg={r.v_com_plus / ctx.v_g0:.4f}, "
                           f"v-/vg={r.v_com_minus / ctx.v_g0:.4f}")
    assert report(7, ok, "; ".join(details) +
                  " (require within 10% of v_g(omega0), prep-independent)")


def test_criterion_8_establishment_times(ctxs, cases):
    rc = cases.case(ctxs[("constant", 200)], 4.0).report  # d = 4 pi/beta0
    rd = cases.case(ctxs[("drude_lorentz", 200)], 4.0).report
    ratio_c = rc.t_est / rc.t_vg
    ratio_d = rd.t_est / rd.t_vg
    ok = rc.established and rd.established and ratio_c <= 1.2 and ratio_d < 2.0
    detail = (f"const t_est/t_vg={ratio_c:.3f} (require <=1.2), "
              f"DL t_est/t_vg={ratio_d:.3f} (require <2)")
    assert report(8, ok, detail), (
        "settling includes the finite kernel width (~3 fs) on top of the "
        "group delay; the bounds are approached only for larger separations "
        "- see the ledger")


def test_criterion_9_solver_convergence_and_invariants(ctxs):
    ctx = ctxs[("constant", 200)]
    d = ctx.separation(2.0)
    T = 500 * FS

    def fmm(mult):
        return pipeline.kernels(ctx, d, n_fft_mult=mult)[1]

    def fmn(mult):
        return pipeline.kernels(ctx, d, n_fft_mult=mult)[2]

    _, record = dynamics.convergence_check(
        fmm, fmn, dynamics.InitialState.symmetric(), T)
    halving_diff = record["halvings"][-1]["max_pop_diff"]
    ok = record["converged"] and halving_diff < 1e-4

    _, F_mm, F_mn = pipeline.kernels(ctx, d)
    alpha = 0.6 - 0.33j
    r1 = dynamics.evolve(F_mm, F_mn, dynamics.InitialState(0.5, 0.4j), T)
    r2 = dynamics.evolve(F_mm, F_mn,
                         dynamics.InitialState(alpha * 0.5, alpha * 0.4j), T)
    lin_err = float(np.max(np.abs(r2.c1 - alpha * r1.c1)
                           + np.abs(r2.c2 - alpha * r1.c2)))
    ok &= lin_err < 1e-12

    ra = dynamics.evolve(F_mm, F_mn, dynamics.InitialState(0.8, 0.1j), T)
    rb = dynamics.evolve(F_mm, F_mn, dynamics.InitialState(0.1j, 0.8), T)
    parity = bool(np.array_equal(ra.c1, rb.c2)
                  and np.array_equal(ra.c2, rb.c1))
    ok &= parity

    width = bath.fwhm(F_mm)
    mask = ra.t > width
    gain = float(np.diff(ra.p_total[mask]).max())
    ok &= gain < 1e-6
    assert report(9, ok, f"halving diff={halving_diff:.2e} (<1e-4), "
                         f"linearity err={lin_err:.2e} (<1e-12), "
                         f"parity exact={parity}, max gain={gain:.2e}")


def test_criterion_10_delta_kernel_equivalence():
    gamma_M = 0.5e12
    h = 0.02 * FS
    n = 60000  # 1200 fs

    # one-step numerical delta at tau = 0: trapezoid weight h/2 * K[0] = g
    K0 = np.zeros(n + 3, complex)
    K0[0] = 2 * gamma_M / h
    F_mm = bath.CorrelationFunction(dt=h, samples=K0, kind="one_point",
                                    omega0=OMEGA_0, delta_omega=1.0,
                                    n_fft=2 * n, coupling_scale=gamma_M)
    zero = bath.CorrelationFunction(dt=h, samples=np.zeros(n + 3, complex),
                                    kind="two_point", omega0=OMEGA_0,
                                    delta_omega=1.0, n_fft=2 * n,
                                    coupling_scale=gamma_M)
    res = dynamics.evolve(F_mm, zero, dynamics.InitialState.single(),
                          T=n * h, memory_rtol=0.0)
    ref = dynamics.markov_reference_evolution(
        gamma_M, 0.0, dynamics.InitialState.single(), 0.0, n * h, h)
    mask = res.t > 10 * h
    dev_single = float(np.max(np.abs(res.p1[mask] / ref.p1[mask] - 1.0)))
    ok = dev_single < 0.01

    # displaced delta: F_mn = gamma_M delta(t - t_d); antisymmetric state
    # freezes right after the delay (instantaneous collective onset)
    j_d = 2000
    t_d = j_d * h
    Kd = np.zeros(n + 3, complex)
    Kd[j_d] = gamma_M / h
    F_mn = bath.CorrelationFunction(dt=h, samples=Kd, kind="two_point",
                                    omega0=OMEGA_0, delta_omega=1.0,
                                    n_fft=2 * n, coupling_scale=gamma_M)
    res2 = dynamics.evolve(F_mm, F_mn, dynamics.InitialState.antisymmetric(),
                           T=n * h, memory_rtol=0.0)
    pre = ana.fit_decay_rate(res2.t, res2.p_minus, t_start=2 * t_d / 10,
                             t_end=0.9 * t_d)
    post = ana.fit_decay_rate(res2.t, res2.p_minus, t_start=1.2 * t_d)
    ok_pre = abs(pre.rate - 2 * gamma_M) / (2 * gamma_M) < 0.01
    ok_post = abs(post.rate) < 0.02 * gamma_M
    ref2 = dynamics.markov_reference_evolution(
        gamma_M, gamma_M, dynamics.InitialState.antisymmetric(), t_d,
        n * h, h)
    mask2 = res2.t > t_d + 10 * h
    dev_anti = float(np.max(np.abs(res2.p_minus[mask2]
                                   / ref2.p_minus[mask2] - 1.0)))
    ok &= ok_pre and ok_post and dev_anti < 0.01
    assert report(10, ok,
                  f"single-atom dev={dev_single:.2e} (<1%), pre-delay rate "
                  f"ratio={pre.rate / (2 * gamma_M):.4f}, post-delay "
                  f"|rate|/gamma={abs(post.rate) / gamma_M:.2e}, "
                  f"anti vs closed form dev={dev_anti:.2e}")
