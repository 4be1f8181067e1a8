"""Command-line reproduction driver.

Subcommands (one per figure family):

  dispersion    dispersion relation and velocity curves  (fig. 2 family)
  spectrum      one-/two-point spectral densities        (fig. 3)
  correlations  correlation functions + peak diagnostics (fig. 4)
  evolve        population dynamics + analysis report    (fig. 5)
  sweep         radius x separation aggregation          (figs. 6-8)
  analyze       refit analysis from stored evolution CSVs

Every CSV starts with a `# provenance: <config digest>` comment followed by
a header row; JSON sidecars carry the full effective config and per-command
diagnostics.  Exit codes: 0 ok, 2 config error, 3 numerical failure,
4 partial sweep failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed

import numpy as np

from . import analysis as ana
from . import bath, dynamics, pipeline, waveguide
from .constants import C, FS, NM

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4


def _write_csv(path: str, header: str, rows, digest: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(f"# provenance: {digest}\n")
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(repr(x) if isinstance(x, float) else str(x)
                             for x in row) + "\n")
    os.replace(tmp, path)


def _write_json(path: str, payload: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True, default=float)
    os.replace(tmp, path)


def _echo_effective_config(config: pipeline.RunConfig, out_dir: str) -> None:
    _write_json(os.path.join(out_dir, "effective_config.json"), {
        "config": config.to_dict(), "digest": config.digest()})


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_dispersion(config: pipeline.RunConfig, out_dir: str,
                   cache_dir: str) -> int:
    digest = config.digest()
    for a_nm in config.a_nm:
        ctx = pipeline.build_context(config, a_nm, cache_dir)
        t = ctx.table
        n1 = ctx.model.refractive_index(t.omega)
        rows = [(float(w), float(b), float(bp), float(vg), float(vp),
                 float(w / C), float(nn * w / C))
                for w, b, bp, vg, vp, nn in zip(
                    t.omega, t.beta, t.beta_prime, t.v_g, t.v_p, n1)]
        _write_csv(
            os.path.join(out_dir, f"dispersion_{config.model}_a{a_nm:g}nm.csv"),
            "omega_rad_s,beta_rad_m,beta_prime_s_m,v_g_m_s,v_p_m_s,"
            "vacuum_line_rad_m,bulk_line_rad_m", rows, digest)
        vel_rows = []
        v_inf = C / config.n1
        for w, vg, vp in zip(t.omega, t.v_g, t.v_p):
            vel_rows.append((float(w), float(vg / C), float(vp / C),
                             float(v_inf / C)))
        _write_csv(
            os.path.join(out_dir, f"velocities_{config.model}_a{a_nm:g}nm.csv"),
            "omega_rad_s,v_g_over_c,v_p_over_c,v_inf_over_c",
            vel_rows, digest)
        _write_json(os.path.join(
            out_dir, f"dispersion_{config.model}_a{a_nm:g}nm.json"), {
            "provenance": t.provenance, "omega0_rad_s": ctx.omega0,
            "beta0_rad_m": ctx.beta0, "v_g0_m_s": ctx.v_g0,
            "guided_wavelength_nm": 2 * np.pi / ctx.beta0 / NM,
            "config_digest": digest})
    _echo_effective_config(config, out_dir)
    return EXIT_OK


def cmd_spectrum(config: pipeline.RunConfig, out_dir: str,
                 cache_dir: str) -> int:
    digest = config.digest()
    for a_nm in config.a_nm:
        ctx = pipeline.build_context(config, a_nm, cache_dir)
        for sep in config.separations:
            d = ctx.separation(sep)
            grid = pipeline.spectral_grids(ctx, d)
            n = grid.cutoff_index or len(grid.omega)
            rows = [(float(w), float(s1), float(s2))
                    for w, s1, s2 in zip(grid.omega[:n], grid.s_one[:n],
                                         grid.s_two[:n])]
            tag = f"{config.model}_a{a_nm:g}nm_d{d / NM:.0f}nm"
            _write_csv(os.path.join(out_dir, f"spectrum_{tag}.csv"),
                       "omega_rad_s,s_one,s_two", rows, digest)
            _write_json(os.path.join(out_dir, f"spectrum_{tag}.json"), {
                "cutoff_omega_rad_s": grid.cutoff_omega,
                "coupling_scale_per_s": grid.coupling_scale,
                "gamma_markov_per_s": bath.markovian_rate(grid),
                "d_nm": d / NM, "config_digest": digest})
    _echo_effective_config(config, out_dir)
    return EXIT_OK


def _corr_rows(F):
    return [(float(ti / FS), float(v.real), float(v.imag))
            for ti, v in zip(F.t, F.samples)]


def cmd_correlations(config: pipeline.RunConfig, out_dir: str,
                     cache_dir: str) -> int:
    digest = config.digest()
    for a_nm in config.a_nm:
        ctx = pipeline.build_context(config, a_nm, cache_dir)
        for sep in config.separations:
            d = ctx.separation(sep)
            grid, F_mm, F_mn = pipeline.kernels(ctx, d,
                                                keep_full_window=True)
            tag = f"{config.model}_a{a_nm:g}nm_d{d / NM:.0f}nm"
            # exports keep the kernel support only (few hundred fs)
            n_keep = min(len(F_mm.samples),
                         int(400e-15 / F_mm.dt))
            for name, F in (("one_point", F_mm), ("two_point", F_mn)):
                short = bath.CorrelationFunction(
                    dt=F.dt, samples=F.samples[:n_keep], kind=F.kind,
                    omega0=F.omega0, delta_omega=F.delta_omega,
                    n_fft=F.n_fft, coupling_scale=F.coupling_scale)
                _write_csv(os.path.join(out_dir, f"corr_{name}_{tag}.csv"),
                           "t_fs,re_F,im_F", _corr_rows(short), digest)
            t_neg, t_pos = bath.two_point_peaks(F_mn)
            _write_json(os.path.join(out_dir, f"corr_{tag}.json"), {
                "dt_fs": F_mm.dt / FS,
                "delta_omega_rad_s": F_mm.delta_omega,
                "n_fft": F_mm.n_fft,
                "cutoff_omega_rad_s": grid.cutoff_omega,
                "coupling_scale_per_s": grid.coupling_scale,
                "fwhm_one_point_fs": bath.fwhm(F_mm) / FS,
                "peak_neg_fs": t_neg / FS, "peak_pos_fs": t_pos / FS,
                "peak_separation_fs": (t_pos - t_neg) / FS,
                "two_d_n1_over_c_fs": 2 * d * config.n1 / C / FS,
                "two_d_over_vg0_fs": 2 * d / ctx.v_g0 / FS,
                "d_nm": d / NM, "config_digest": digest})
    _echo_effective_config(config, out_dir)
    return EXIT_OK


def _evolution_rows(ev):
    rows = []
    for i in range(len(ev.t)):
        rows.append((float(ev.t[i] / FS), float(ev.c1[i].real),
                     float(ev.c1[i].imag), float(ev.c2[i].real),
                     float(ev.c2[i].imag), float(ev.p_plus[i]),
                     float(ev.p_minus[i])))
    return rows


EVOLUTION_HEADER = "t_fs,re_c1,im_c1,re_c2,im_c2,P_plus,P_minus"


def cmd_evolve(config: pipeline.RunConfig, out_dir: str, cache_dir: str,
               convergence: bool = False, stride: int = 50) -> int:
    digest = config.digest()
    for a_nm in config.a_nm:
        ctx = pipeline.build_context(config, a_nm, cache_dir)
        for sep in config.separations:
            d = ctx.separation(sep)
            case = pipeline.run_case(ctx, d, convergence=convergence)
            tag = f"{config.model}_a{a_nm:g}nm_d{d / NM:.0f}nm"
            for name, ev in (("single", case.evolution_single),
                             ("symmetric", case.evolution_sym),
                             ("antisymmetric", case.evolution_anti)):
                sub = dynamics.EvolutionResult(
                    t=ev.t[::stride], c1=ev.c1[::stride],
                    c2=ev.c2[::stride], h=ev.h, provenance=ev.provenance)
                _write_csv(
                    os.path.join(out_dir, f"evolution_{name}_{tag}.csv"),
                    EVOLUTION_HEADER, _evolution_rows(sub), digest)
            payload = case.report.to_dict()
            payload["solver"] = case.evolution_sym.provenance
            payload["config_digest"] = digest
            _write_json(os.path.join(out_dir, f"analysis_{tag}.json"),
                        payload)
    _echo_effective_config(config, out_dir)
    return EXIT_OK


SWEEP_HEADER = ("model,a_nm,d_nm,d_over_pi_beta0,quotient_plus,"
                "quotient_minus,gamma_single_per_s,gamma_markov_per_s,"
                "v_com_plus_over_c,v_com_minus_over_c,v_g0_over_c,"
                "t_est_fs,t_vg_fs,t_est_over_t_vg,established,status")


def _sweep_one(args):
    config_dict, a_nm, sep, cache_dir = args
    config = pipeline.RunConfig.from_dict(config_dict)
    try:
        ctx = pipeline.build_context(config, a_nm, cache_dir)
        d = ctx.separation(sep)
        case = pipeline.run_case(ctx, d)
        r = case.report
        row = (config.model, float(a_nm), float(d / NM),
               float(d * ctx.beta0 / np.pi), float(r.quotient_plus),
               float(r.quotient_minus), float(r.gamma_single),
               float(r.extras["gamma_markov_per_s"]),
               float(r.v_com_plus / C), float(r.v_com_minus / C),
               float(ctx.v_g0 / C), float(r.t_est / FS),
               float(r.t_vg / FS), float(r.t_est / r.t_vg), r.established,
               "ok")
        return row, None
    except Exception as exc:  # failure isolation per sweep case
        row = (config.model, float(a_nm), float("nan"), float(sep),
               *([float("nan")] * 10), False, f"error: {exc!r}")
        return row, traceback.format_exc()


def cmd_sweep(config: pipeline.RunConfig, out_dir: str, cache_dir: str,
              jobs: int = 1) -> int:
    digest = config.digest()
    tasks = [(config.to_dict(), a_nm, sep, cache_dir)
             for a_nm in config.a_nm for sep in config.separations]
    rows = []
    errors = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_sweep_one, t) for t in tasks]
            for fut in as_completed(futs):
                row, err = fut.result()
                rows.append(row)
                if err:
                    errors.append(err)
    else:
        for t in tasks:
            row, err = _sweep_one(t)
            rows.append(row)
            if err:
                errors.append(err)
    rows.sort(key=lambda r: (r[0], r[1], r[3]))
    _write_csv(os.path.join(out_dir, "sweep.csv"), SWEEP_HEADER, rows, digest)
    _write_json(os.path.join(out_dir, "sweep_errors.json"),
                {"n_cases": len(tasks), "n_failed": len(errors),
                 "errors": errors})
    _echo_effective_config(config, out_dir)
    if errors and len(errors) < len(tasks):
        return EXIT_PARTIAL
    if errors:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_analyze(config: pipeline.RunConfig, out_dir: str,
                in_dir: str) -> int:
    """Refit rates from stored evolution CSVs (no physics recomputation)."""
    digest = config.digest()
    t_start = config.thresholds["fit_start_fs"] * FS
    found = {}
    for fname in sorted(os.listdir(in_dir)):
        if not (fname.startswith("evolution_") and fname.endswith(".csv")):
            continue
        data = np.loadtxt(os.path.join(in_dir, fname), delimiter=",",
                          comments="#", skiprows=2)
        t = data[:, 0] * FS
        p_plus, p_minus = data[:, 5], data[:, 6]
        p1 = data[:, 1]**2 + data[:, 2]**2
        kind = fname.split("_")[1]
        series = {"single": p1, "symmetric": p_plus,
                  "antisymmetric": p_minus}[kind]
        fit = ana.fit_decay_rate(t, series, t_start)
        found[fname] = {"rate_per_s": fit.rate,
                        "intercept": fit.intercept,
                        "residual_rms": fit.residual_rms}
    if not found:
        print("no evolution CSVs found", file=sys.stderr)
        return EXIT_CONFIG
    _write_json(os.path.join(out_dir, "analysis_refit.json"),
                {"fits": found, "config_digest": digest})
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="onfsim",
        description="Guided-mode environment and two-atom dynamics around "
                    "an optical nanofiber")
    p.add_argument("--config", required=False, help="JSON config path")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--cache", default=None, help="dispersion cache directory")
    p.add_argument("--jobs", type=int, default=1, help="sweep workers")
    p.add_argument("--seedless", action="store_true",
                   help="reserved; the toolkit uses no RNG anywhere")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("dispersion", "spectrum", "correlations", "sweep"):
        sub.add_parser(name)
    ev = sub.add_parser("evolve")
    ev.add_argument("--convergence", action="store_true",
                    help="run the step-halving convergence check")
    an = sub.add_parser("analyze")
    an.add_argument("--in", dest="in_dir", required=True,
                    help="directory with evolution CSVs")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seedless:
        print("--seedless is reserved: the toolkit is deterministic and "
              "uses no RNG; the flag must not be passed", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.config:
            config = pipeline.RunConfig.from_json(args.config)
        else:
            config = pipeline.RunConfig()
    except pipeline.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or config.output_dir
    cache_dir = args.cache or config.cache_dir
    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(cache_dir, exist_ok=True)
    try:
        if args.command == "dispersion":
            return cmd_dispersion(config, out_dir, cache_dir)
        if args.command == "spectrum":
            return cmd_spectrum(config, out_dir, cache_dir)
        if args.command == "correlations":
            return cmd_correlations(config, out_dir, cache_dir)
        if args.command == "evolve":
            return cmd_evolve(config, out_dir, cache_dir,
                              convergence=args.convergence)
        if args.command == "sweep":
            return cmd_sweep(config, out_dir, cache_dir, jobs=args.jobs)
        if args.command == "analyze":
            return cmd_analyze(config, out_dir, args.in_dir)
        return EXIT_CONFIG
    except pipeline.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (waveguide.WaveguideError, bath.BathError, dynamics.DynamicsError,
            ana.AnalysisError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
