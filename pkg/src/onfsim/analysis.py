"""Rate fits, communication times, and collective-onset diagnostics.

Decay rates come from least-squares lines through ln P(t) on a late-time
window (the long-time decays are exponential, so the fitted line lives in
log space; the raw population is never fit directly).  Communication times
intersect the extrapolated collective and single-atom lines; establishment
times are defined from the cumulative kernel integrals

    gamma(t)    = int_0^t Re F_mm,      gamma_mn(t) = int_0^t Re F_mn,

whose quotient q(t) = |gamma_mn|/gamma settles at 1 for resonant
separations.  Two settling rules are used: threshold crossing (q >= 0.99,
staying above) for the smooth constant-model quotient, and the
extremum-midpoint rule for the oscillating Drude-Lorentz quotient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .bath import CorrelationFunction
from .constants import FS


class AnalysisError(Exception):
    pass


class FitError(AnalysisError):
    pass


DEFAULT_FIT_START = 300e-15  # s, per the long-time fit window convention


@dataclass(frozen=True)
class LineFit:
    rate: float        # 1/s, positive = decay
    intercept: float   # ln P extrapolated to t = 0
    residual_rms: float
    window: tuple

    @property
    def slope(self) -> float:
        return -self.rate


def fit_decay_rate(t: np.ndarray, p: np.ndarray,
                   t_start: float = DEFAULT_FIT_START,
                   t_end: float | None = None) -> LineFit:
    """Least-squares slope of ln P on [t_start, t_end]; rate = -slope."""
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    m = t >= t_start
    if t_end is not None:
        m &= t <= t_end
    if m.sum() < 10:
        raise FitError("fit window shorter than 10 samples")
    if np.any(p[m] <= 0):
        raise FitError("non-positive population inside the fit window")
    x = t[m]
    y = np.log(p[m])
    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    slope = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    return LineFit(rate=-slope, intercept=intercept,
                   residual_rms=float(np.sqrt(np.mean(resid**2))),
                   window=(float(x[0]), float(x[-1])))


def communication_time(fit_single: LineFit, fit_coll: LineFit,
                       rel_rate_floor: float = 1e-6) -> float:
    """Intersection abscissa of the two extrapolated ln P lines.

    Undefined (raises) when the lines are parallel within rel_rate_floor of
    the single-atom rate.
    """
    drate = fit_coll.rate - fit_single.rate
    if abs(drate) <= rel_rate_floor * abs(fit_single.rate):
        raise AnalysisError("collective and single rates equal within fit "
                            "error: intersection undefined")
    # -g1 t + b1 = -g2 t + b2  ->  t = (b2 - b1)/(g2 - g1)
    return float((fit_coll.intercept - fit_single.intercept) / drate)


def gamma_integrals(F_mm: CorrelationFunction, F_mn: CorrelationFunction,
                    n_max: int | None = None):
    """Cumulative trapezoid integrals of Re F from 0 to t on the shared grid."""
    if abs(F_mm.dt - F_mn.dt) > 1e-12 * F_mm.dt:
        raise AnalysisError("kernels on different grids")
    n = min(len(F_mm.samples), len(F_mn.samples))
    if n_max is not None:
        n = min(n, n_max)
    t = F_mm.dt * np.arange(n)
    g = cumulative_trapezoid(F_mm.samples.real[:n], dx=F_mm.dt, initial=0.0)
    gmn = cumulative_trapezoid(F_mn.samples.real[:n], dx=F_mm.dt, initial=0.0)
    return t, g, gmn


def collective_rates_from_integrals(g: np.ndarray, gmn: np.ndarray):
    """gamma_-/+(t) = gamma(t) -/+ |gamma_mn(t)| pointwise."""
    a = np.abs(gmn)
    return g - a, g + a


def _moving_average(y: np.ndarray, width: int = 3) -> np.ndarray:
    kernel = np.ones(width) / width
    pad = width // 2
    ypad = np.concatenate([np.repeat(y[0], pad), y, np.repeat(y[-1], pad)])
    return np.convolve(ypad, kernel, mode="valid")


def _local_extrema(y: np.ndarray, halfwin: int = 2) -> list:
    """Indices of strict local extrema over a (2*halfwin+1)-sample window."""
    idx = []
    for i in range(halfwin, len(y) - halfwin):
        seg = y[i - halfwin:i + halfwin + 1]
        if y[i] == seg.max() and y[i] > seg.min():
            if not idx or i - idx[-1] > halfwin:
                idx.append(i)
        elif y[i] == seg.min() and y[i] < seg.max():
            if not idx or i - idx[-1] > halfwin:
                idx.append(i)
    return idx


@dataclass(frozen=True)
class EstablishmentResult:
    established: bool
    t_est: float          # s (nan when not established)
    q_max: float
    rule: str
    smoothing: int = 3


def establishment_time(t: np.ndarray, g: np.ndarray, gmn: np.ndarray,
                       model_kind: str, threshold: float = 0.99,
                       midpoint_tol: float = 0.01,
                       smoothing: int = 3) -> EstablishmentResult:
    """Settling time of q(t) = |gamma_mn(t)|/gamma(t).

    constant: first time q >= threshold and stays there.
    drude_lorentz: midpoint of the first successive extremum pair of the
    (lightly smoothed) quotient lying within midpoint_tol of 1.
    """
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.abs(gmn) / np.where(g > 0, g, np.nan)
    valid = np.isfinite(q)
    if valid.sum() < 16:
        raise AnalysisError("quotient series too short")
    i0 = int(np.argmax(valid))  # first index past the initial kernel width
    q_max = float(np.nanmax(q))
    if model_kind == "constant":
        ok = q >= threshold
        ok[:i0] = True  # ignore the undefined early segment
        bad = np.nonzero(~ok)[0]
        if len(bad) == 0 or bad.max() + 1 >= len(t):
            if q_max < threshold:
                return EstablishmentResult(False, float("nan"), q_max,
                                           "threshold", smoothing)
            return EstablishmentResult(True, float(t[i0]), q_max,
                                       "threshold", smoothing)
        i_est = bad.max() + 1
        if not np.all(q[i_est:][np.isfinite(q[i_est:])] >= threshold):
            return EstablishmentResult(False, float("nan"), q_max,
                                       "threshold", smoothing)
        return EstablishmentResult(True, float(t[i_est]), q_max,
                                   "threshold", smoothing)
    # Drude-Lorentz: extremum-midpoint rule
    qs = _moving_average(np.where(valid, q, 0.0), smoothing)
    ext = [i for i in _local_extrema(qs) if i > i0 + smoothing]
    for k in range(len(ext) - 1):
        mid = 0.5 * (qs[ext[k]] + qs[ext[k + 1]])
        if abs(mid - 1.0) < midpoint_tol:
            t_est = 0.5 * (t[ext[k]] + t[ext[k + 1]])
            return EstablishmentResult(True, float(t_est), q_max,
                                       "extremum_midpoint", smoothing)
    return EstablishmentResult(False, float("nan"), q_max,
                               "extremum_midpoint", smoothing)


@dataclass(frozen=True)
class AnalysisReport:
    """Fitted rates and onset diagnostics for one (model, a, d) case."""

    gamma_single: float           # fitted amplitude rate, 1/s
    gamma_plus: float
    gamma_minus: float
    quotient_plus: float          # gamma_plus / gamma_single
    quotient_minus: float
    t_com_plus: float             # s
    t_com_minus: float
    v_com_plus: float             # m/s
    v_com_minus: float
    t_est: float                  # s
    t_vg: float                   # d / v_g(omega0), s
    established: bool
    fit_single: LineFit
    fit_plus: LineFit
    fit_minus: LineFit
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "gamma_single_per_s": self.gamma_single,
            "gamma_plus_per_s": self.gamma_plus,
            "gamma_minus_per_s": self.gamma_minus,
            "quotient_plus": self.quotient_plus,
            "quotient_minus": self.quotient_minus,
            "t_com_plus_fs": self.t_com_plus / FS,
            "t_com_minus_fs": self.t_com_minus / FS,
            "v_com_plus_m_s": self.v_com_plus,
            "v_com_minus_m_s": self.v_com_minus,
            "t_est_fs": self.t_est / FS,
            "t_vg_fs": self.t_vg / FS,
            "established": self.established,
            "fit_windows_fs": [list(np.array(f.window) / FS) for f in
                               (self.fit_single, self.fit_plus,
                                self.fit_minus)],
            "fit_residual_rms": [f.residual_rms for f in
                                 (self.fit_single, self.fit_plus,
                                  self.fit_minus)],
        }
        out.update(self.extras)
        return out


def separation_spread(quotients, scale: float | None = None) -> float:
    """Standard deviation across separations relative to the mean.

    For quotient families with mean near zero (deep subradiance) the caller
    passes the collective scale to normalize against instead.
    """
    q = np.asarray(quotients, dtype=float)
    ref = abs(q.mean()) if scale is None else abs(scale)
    if ref == 0:
        raise AnalysisError("no scale to normalize the spread against")
    return float(q.std() / ref)


def radius_sweep_report(radii_nm, separations, case_runner,
                        spread_scale_from_plus: bool = True):
    """Quotient table over (radius, separation) with failure isolation.

    case_runner(a_nm, separation) must return an AnalysisReport; per-point
    failures are recorded as rows with error text and do not abort the
    sweep.  Each radius gets the separation-independence cross-check:
    std over separations < 1% of the mean collective quotient.
    """
    rows = []
    checks = {}
    for a_nm in radii_nm:
        qp, qm = [], []
        for sep in separations:
            try:
                rep = case_runner(a_nm, sep)
                rows.append({"a_nm": a_nm, "separation": sep,
                             "quotient_plus": rep.quotient_plus,
                             "quotient_minus": rep.quotient_minus,
                             "fit_residual_rms": rep.fit_plus.residual_rms,
                             "status": "ok"})
                qp.append(rep.quotient_plus)
                qm.append(rep.quotient_minus)
            except Exception as exc:
                rows.append({"a_nm": a_nm, "separation": sep,
                             "status": f"error: {exc!r}"})
        if len(qp) >= 2:
            scale = np.mean(qp) if spread_scale_from_plus else None
            checks[a_nm] = {
                "spread_plus": separation_spread(qp),
                "spread_minus": separation_spread(qm, scale=scale),
            }
    return {"rows": rows, "separation_independence": checks}


def analyze_case(t: np.ndarray, p_single: np.ndarray, p_plus: np.ndarray,
                 p_minus: np.ndarray, F_mm: CorrelationFunction,
                 F_mn: CorrelationFunction, d: float, v_g0: float,
                 model_kind: str, t_start: float = DEFAULT_FIT_START,
                 extras: dict | None = None) -> AnalysisReport:
    """Assemble the full report from the three population series."""
    fs_ = fit_decay_rate(t, p_single, t_start)
    fp = fit_decay_rate(t, p_plus, t_start)
    fm = fit_decay_rate(t, p_minus, t_start)
    # population rate 2*gamma -> amplitude rates
    g_single = fs_.rate / 2.0
    g_plus = fp.rate / 2.0
    g_minus = fm.rate / 2.0
    try:
        tcp = communication_time(fs_, fp)
    except AnalysisError:
        tcp = float("nan")
    try:
        tcm = communication_time(fs_, fm)
    except AnalysisError:
        tcm = float("nan")
    n_max = int(min(len(F_mm.samples), 4 * t_start / F_mm.dt))
    ti, g, gmn = gamma_integrals(F_mm, F_mn, n_max=n_max)
    est = establishment_time(ti, g, gmn, model_kind)
    t_vg = d / v_g0 if d > 0 else float("nan")
    return AnalysisReport(
        gamma_single=g_single, gamma_plus=g_plus, gamma_minus=g_minus,
        quotient_plus=g_plus / g_single, quotient_minus=g_minus / g_single,
        t_com_plus=tcp, t_com_minus=tcm,
        v_com_plus=d / tcp if tcp and np.isfinite(tcp) and tcp > 0 else float("nan"),
        v_com_minus=d / tcm if tcm and np.isfinite(tcm) and tcm > 0 else float("nan"),
        t_est=est.t_est, t_vg=t_vg, established=est.established,
        fit_single=fs_, fit_plus=fp, fit_minus=fm, extras=extras or {})
