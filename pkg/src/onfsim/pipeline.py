"""Configuration and end-to-end case orchestration.

A RunConfig (JSON) fixes the dielectric model, geometry, frequency grid,
solver and fit settings.  The pipeline builds (with disk caching) the
dispersion table, spectral grids, correlation kernels, evolutions and the
analysis report for each requested (radius, separation) case.

Frequency grids are anchored so that omega0 lies exactly on a grid point
(this keeps the transform's conjugate symmetry exact sample-wise and makes
the Markov normalization an on-grid read).  The solver step equals the
correlation-function step by construction: dt = 2 pi/(n_fft * delta_omega)
with n_fft the first power of two reaching the configured target.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import analysis as ana
from . import bath, dynamics, waveguide
from .constants import C, FS, GAMMA_350, GAMMA_TARGET, N1_SILICA, NM, OMEGA_350


class ConfigError(Exception):
    pass


_GRID_DEFAULTS = {
    "omega_min_mult": 0.02,   # in units of omega0
    "omega_max_mult": 40.0,   # constant model upper end, units of omega0
    "dl_omega_max_frac": 0.97,  # DL upper end, fraction of omega_R
    "n_points": 32768,
}
_SOLVER_DEFAULTS = {
    "dt_fs": 0.02,
    "T_fs": 1000.0,
    "max_halvings": 4,
    "memory_rtol": 1e-7,
}
_THRESH_DEFAULTS = {
    "establish_const": 0.99,
    "establish_dl": 0.01,
    "fit_start_fs": 300.0,
}


@dataclass
class RunConfig:
    model: str = "constant"
    n1: float = N1_SILICA
    omega_R: float = OMEGA_350
    gamma_R: float = GAMMA_350
    a_nm: list = field(default_factory=lambda: [200.0])
    R_nm: float = 100.0
    lambda0_nm: float = 780.0
    beta0_sets_lambda: bool = False
    separations: list = field(default_factory=lambda: [2.0])
    separation_unit: str = "pi_over_beta0"   # or "nm"
    initial_state: str = "symmetric"
    gamma_target: float = GAMMA_TARGET
    grid: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    cutoff_zeros_below_top: int = 2
    output_dir: str = "results"
    cache_dir: str = "cache"

    def __post_init__(self):
        self.grid = {**_GRID_DEFAULTS, **self.grid}
        self.solver = {**_SOLVER_DEFAULTS, **self.solver}
        self.thresholds = {**_THRESH_DEFAULTS, **self.thresholds}
        self.validate()

    def validate(self):
        if self.model not in ("constant", "drude_lorentz"):
            raise ConfigError(f"model must be constant|drude_lorentz, "
                              f"got {self.model!r}")
        if np.isscalar(self.a_nm):
            self.a_nm = [float(self.a_nm)]
        self.a_nm = [float(a) for a in self.a_nm]
        for a in self.a_nm:
            if a < 150.0:
                raise ConfigError(f"fiber radius {a} nm below the supported "
                                  "150 nm minimum")
        if self.R_nm < 0:
            raise ConfigError("R_nm must be >= 0")
        n = int(self.grid["n_points"])
        if n < 16 or (n & (n - 1)) != 0:
            raise ConfigError("grid.n_points must be a power of two >= 16")
        for key in ("establish_const", "establish_dl"):
            v = float(self.thresholds[key])
            if not (0.0 < v < 1.0):
                raise ConfigError(f"thresholds.{key} must lie in (0, 1)")
        if self.separation_unit not in ("pi_over_beta0", "nm"):
            raise ConfigError("separation_unit must be pi_over_beta0|nm")
        if self.initial_state not in ("symmetric", "antisymmetric", "single"):
            raise ConfigError("initial_state must be "
                              "symmetric|antisymmetric|single")
        if self.gamma_target <= 0:
            raise ConfigError("gamma_target must be positive")
        if self.model == "drude_lorentz" and \
                2 * np.pi * C / (self.lambda0_nm * NM) >= self.omega_R:
            raise ConfigError("atomic line must lie below omega_R")

    # -- serialization ----------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(data) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        try:
            with open(path) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "model": self.model, "n1": self.n1, "omega_R": self.omega_R,
            "gamma_R": self.gamma_R, "a_nm": list(self.a_nm),
            "R_nm": self.R_nm, "lambda0_nm": self.lambda0_nm,
            "beta0_sets_lambda": self.beta0_sets_lambda,
            "separations": list(self.separations),
            "separation_unit": self.separation_unit,
            "initial_state": self.initial_state,
            "gamma_target": self.gamma_target,
            "grid": dict(self.grid), "solver": dict(self.solver),
            "thresholds": dict(self.thresholds),
            "cutoff_zeros_below_top": self.cutoff_zeros_below_top,
            "output_dir": self.output_dir, "cache_dir": self.cache_dir,
        }

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    # -- derived quantities ----------------------------------------------
    @property
    def omega0_vacuum(self) -> float:
        return 2 * np.pi * C / (self.lambda0_nm * NM)

    def make_model(self) -> waveguide.DielectricModel:
        if self.model == "constant":
            return waveguide.DielectricModel.constant(self.n1)
        return waveguide.DielectricModel.drude_lorentz(
            self.omega0_vacuum, n1=self.n1, omega_R=self.omega_R,
            gamma_R=self.gamma_R)


def anchored_grid(omega0: float, omega_lo: float, omega_hi: float,
                  n: int) -> np.ndarray:
    """Uniform n-point grid covering [omega_lo, omega_hi] with omega0 on-grid."""
    dw = (omega_hi - omega_lo) / (n - 1)
    j0 = int(round((omega0 - omega_lo) / dw))
    grid = omega0 + (np.arange(n) - j0) * dw
    if not (grid[0] > 0 and grid[0] < omega0 < grid[-1]):
        raise ConfigError("anchored grid does not enclose omega0")
    return grid


def omega_grid_for(config: RunConfig, model: waveguide.DielectricModel,
                   a_nm: float = 200.0) -> np.ndarray:
    """Anchored uniform grid; n_points scales with radius.

    The light-line takeoff narrows like 1/a, so the configured point count
    (calibrated at a = 200 nm) is doubled per octave of radius to keep the
    beta' convergence metric flat across sweeps.
    """
    w0 = config.omega0_vacuum
    lo = config.grid["omega_min_mult"] * w0
    if model.kind == "constant":
        hi = config.grid["omega_max_mult"] * w0
    else:
        hi = config.grid["dl_omega_max_frac"] * model.omega_R
    n = int(config.grid["n_points"])
    if a_nm > 200.0:
        n *= 1 << int(np.ceil(np.log2(a_nm / 200.0)))
    if model.kind == "drude_lorentz":
        n *= 2  # resonance-side curvature needs the extra resolution
    grid = anchored_grid(w0, lo, hi, n)
    if model.kind == "drude_lorentz" and grid[-1] >= model.omega_R:
        raise ConfigError("grid reaches the fiber resonance")
    return grid


@dataclass
class CaseContext:
    """Shared per-(model, a) products: table, profile, omega0, beta0."""

    config: RunConfig
    model: waveguide.DielectricModel
    a: float
    table: waveguide.DispersionTable
    profile: waveguide.ModeProfile
    omega0: float
    beta0: float

    @property
    def v_g0(self) -> float:
        return self.table.v_g_at(self.omega0)

    def separation(self, value: float) -> float:
        if self.config.separation_unit == "nm":
            return value * NM
        return value * np.pi / self.beta0


def build_context(config: RunConfig, a_nm: float,
                  cache_dir: str | None = None) -> CaseContext:
    model = config.make_model()
    a = a_nm * NM
    grid = omega_grid_for(config, model, a_nm)
    cache = cache_dir if cache_dir is not None else config.cache_dir
    table = waveguide.load_or_build_table(model, a, grid, cache_dir=cache)
    omega0 = config.omega0_vacuum
    if config.beta0_sets_lambda:
        # alternate reading of "d = 2 pi / beta0 = lambda0": the guided
        # wavelength is pinned to lambda0 and omega0 follows by inversion
        beta0_target = 2 * np.pi / (config.lambda0_nm * NM)
        omega0 = float(table.omega_at_beta(beta0_target))
        grid = anchored_grid(omega0, grid[0], grid[-1], len(grid))
        table = waveguide.load_or_build_table(model, a, grid, cache_dir=cache)
    profile = waveguide.ModeProfile(model=model, a=a)
    beta0 = float(table.interp_beta(omega0))
    return CaseContext(config=config, model=model, a=a, table=table,
                       profile=profile, omega0=omega0, beta0=beta0)


def spectral_grids(ctx: CaseContext, d: float, cut: bool = True):
    """One- and two-point spectral grids with the DL cutoff applied."""
    geo = waveguide.FiberGeometry(a=ctx.a, R=ctx.config.R_nm * NM, d=d)
    grid = bath.one_point_spectral_density(
        ctx.table, ctx.profile, geo, gamma_target=ctx.config.gamma_target,
        omega0=ctx.omega0)
    grid = bath.two_point_integrand(grid, d)
    if cut and ctx.model.kind == "drude_lorentz" and d > 0:
        cutoff = bath.choose_cutoff(ctx.table, d,
                                    ctx.config.cutoff_zeros_below_top)
        grid = bath.apply_cutoff(grid, cutoff)
    return grid


def kernels(ctx: CaseContext, d: float, n_fft_mult: int = 1,
            keep_full_window: bool = False):
    """Correlation kernels on the shared solver grid.

    The time window 2 pi/delta_omega must cover both the mirror half and
    the requested T; dt lands at or below solver.dt_fs via zero padding.
    """
    grid = spectral_grids(ctx, d)
    T = ctx.config.solver["T_fs"] * FS
    window = 2 * np.pi / grid.delta_omega
    if window < 2 * T:
        raise bath.BathError(
            f"time window {window / FS:.0f} fs < 2 T; need delta_omega <= "
            f"{np.pi / T:.3e} rad/s (more grid points)")
    dt_target = ctx.config.solver["dt_fs"] * FS / n_fft_mult
    F_mm = bath.correlation_function(grid, "one_point", dt_target=dt_target,
                                     keep_full_window=keep_full_window)
    F_mn = bath.correlation_function(grid, "two_point", dt_target=dt_target,
                                     keep_full_window=keep_full_window)
    return grid, F_mm, F_mn


_INITS = {
    "symmetric": dynamics.InitialState.symmetric,
    "antisymmetric": dynamics.InitialState.antisymmetric,
    "single": dynamics.InitialState.single,
}


@dataclass
class CaseResult:
    ctx: CaseContext
    d: float
    grid: bath.SpectralGrid
    F_mm: bath.CorrelationFunction
    F_mn: bath.CorrelationFunction
    evolution_single: dynamics.EvolutionResult
    evolution_sym: dynamics.EvolutionResult
    evolution_anti: dynamics.EvolutionResult
    report: ana.AnalysisReport


def run_case(ctx: CaseContext, d: float,
             convergence: bool = False) -> CaseResult:
    """Evolve single/symmetric/antisymmetric preparations and analyze."""
    cfg = ctx.config
    T = cfg.solver["T_fs"] * FS
    mem = cfg.solver["memory_rtol"]
    grid, F_mm, F_mn = kernels(ctx, d)
    ev_s = dynamics.evolve_single(F_mm, T, mem)
    ev_p = dynamics.evolve(F_mm, F_mn, dynamics.InitialState.symmetric(),
                           T, mem)
    ev_m = dynamics.evolve(F_mm, F_mn, dynamics.InitialState.antisymmetric(),
                           T, mem)
    conv_record = None
    if convergence:
        def fmm_b(mult):
            return kernels(ctx, d, n_fft_mult=mult)[1]

        def fmn_b(mult):
            return kernels(ctx, d, n_fft_mult=mult)[2]

        ev_p, conv_record = dynamics.convergence_check(
            fmm_b, fmn_b, dynamics.InitialState.symmetric(), T,
            max_halvings=int(cfg.solver["max_halvings"]),
            memory_rtol=mem)
    gamma_M = bath.markovian_rate(grid)
    report = ana.analyze_case(
        ev_s.t, ev_s.p1, ev_p.p_plus, ev_m.p_minus, F_mm, F_mn, d,
        ctx.v_g0, ctx.model.kind,
        t_start=cfg.thresholds["fit_start_fs"] * FS,
        extras={
            "gamma_markov_per_s": gamma_M,
            "beta0_rad_m": ctx.beta0,
            "v_g0_m_s": ctx.v_g0,
            "d_nm": d / NM,
            "a_nm": ctx.a / NM,
            "model": ctx.model.kind,
            "cutoff_omega_rad_s": grid.cutoff_omega,
            "convergence": conv_record,
        })
    return CaseResult(ctx=ctx, d=d, grid=grid, F_mm=F_mm, F_mn=F_mn,
                      evolution_single=ev_s, evolution_sym=ev_p,
                      evolution_anti=ev_m, report=report)


def cutoff_convergence_metric(ctx: CaseContext, d: float,
                              T_fit: float = 600e-15) -> dict:
    """Relative change of the fitted single-atom rate over the next two
    higher-frequency cutoff zeros (the paper-style cutoff acceptance rule).
    """
    if ctx.model.kind != "drude_lorentz":
        return {"applicable": False, "max_rel_change": 0.0}
    rates = []
    base = ctx.config.cutoff_zeros_below_top
    uncut = spectral_grids(ctx, d, cut=False)
    for down in (base, base - 1, base - 2):
        if down < 0:
            break
        cut = bath.choose_cutoff(ctx.table, d, down)
        grid = bath.apply_cutoff(uncut, cut)
        F_mm = bath.correlation_function(
            grid, "one_point", dt_target=ctx.config.solver["dt_fs"] * FS)
        ev = dynamics.evolve_single(F_mm, T_fit, memory_rtol=0.0)
        fit = ana.fit_decay_rate(ev.t, ev.p1, t_start=min(300e-15, T_fit / 2))
        rates.append(fit.rate)
    rel = [abs(r - rates[0]) / rates[0] for r in rates[1:]]
    return {"applicable": True, "rates": rates,
            "max_rel_change": max(rel) if rel else 0.0}
