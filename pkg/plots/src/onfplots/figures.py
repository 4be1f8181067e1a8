"""Figure specs and deterministic rendering from onfsim CSV/JSON artifacts.

Every plotted value comes straight from a published CSV column or analysis
JSON field; the only transformations here are axis normalizations already
present as columns (v/c, quotients, t_est/t_vg).  Rendering is pinned to the
Agg backend with fixed geometry and stripped metadata so identical inputs
produce byte-identical images.
"""

from __future__ import annotations

import csv
import glob
import json
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (6.4, 4.2)
DPI = 150

_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 9.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.autolayout": True,
}


class SchemaError(Exception):
    """An input file is missing a required column."""


class InputError(Exception):
    """Input files for a figure are absent."""


def read_table(path: str, required: tuple[str, ...]) -> dict:
    """CSV (with optional leading `# provenance:` comment) -> column dict.

    Numeric columns come back as float arrays, everything else as lists of
    strings.  A missing required column raises SchemaError naming it.
    """
    with open(path) as f:
        rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    for col in required:
        if col not in header:
            raise SchemaError(f"missing column {col!r} in {path}")
    table = {}
    for j, name in enumerate(header):
        vals = [row[j] for row in body]
        try:
            table[name] = np.array([float(v) for v in vals])
        except ValueError:
            table[name] = vals
    return table


def _collect(input_dir: str, pattern: str) -> list[str]:
    return sorted(glob.glob(os.path.join(input_dir, pattern)))


def _model_of(path: str) -> str:
    name = os.path.basename(path)
    return "drude_lorentz" if "drude_lorentz" in name else "constant"


_STYLE = {"constant": {"ls": "-", "color": "C0"},
          "drude_lorentz": {"ls": "--", "color": "C1"}}


# ---------------------------------------------------------------------------
# figure builders (one per figure id)
# ---------------------------------------------------------------------------

def _fig2a(ax, input_dir):
    files = _collect(input_dir, "dispersion_*.csv")
    if not files:
        raise InputError("no dispersion_*.csv inputs")
    cols = ("omega_rad_s", "beta_rad_m", "vacuum_line_rad_m",
            "bulk_line_rad_m")
    for path in files:
        t = read_table(path, cols)
        model = _model_of(path)
        ax.plot(t["omega_rad_s"], t["beta_rad_m"],
                label=f"beta, {model}", **_STYLE[model])
        ax.plot(t["omega_rad_s"], t["vacuum_line_rad_m"], ls=":",
                color="gray", lw=0.8)
        ax.plot(t["omega_rad_s"], t["bulk_line_rad_m"], ls=":",
                color="black", lw=0.8)
    ax.set_xlabel("omega (rad/s)")
    ax.set_ylabel("beta (rad/m)")
    ax.legend()


def _fig2b(ax, input_dir):
    files = _collect(input_dir, "velocities_*.csv")
    if not files:
        raise InputError("no velocities_*.csv inputs")
    cols = ("omega_rad_s", "v_g_over_c", "v_p_over_c", "v_inf_over_c")
    v_inf = None
    for path in files:
        t = read_table(path, cols)
        model = _model_of(path)
        ax.plot(t["omega_rad_s"], t["v_g_over_c"],
                label=f"v_g/c, {model}", ls="-",
                color=_STYLE[model]["color"])
        ax.plot(t["omega_rad_s"], t["v_p_over_c"],
                label=f"v_p/c, {model}", ls="--",
                color=_STYLE[model]["color"], lw=0.9)
        v_inf = float(t["v_inf_over_c"][0])
    ax.axhline(v_inf, ls="--", color="black", lw=1.0, label="v_inf/c")
    ax.set_xlabel("omega (rad/s)")
    ax.set_ylabel("v/c")
    ax.set_ylim(0, 1.05)
    ax.legend()


def _spectrum(ax, input_dir, model):
    files = [p for p in _collect(input_dir, "spectrum_*.csv")
             if _model_of(p) == model]
    if not files:
        raise InputError(f"no spectrum_*.csv inputs for {model}")
    for path in files:
        t = read_table(path, ("omega_rad_s", "s_one"))
        tag = os.path.basename(path).replace("spectrum_", "").replace(
            ".csv", "")
        ax.plot(t["omega_rad_s"], t["s_one"], label=tag)
    ax.set_xlabel("omega (rad/s)")
    ax.set_ylabel("S(omega, R)")
    ax.legend(fontsize=7)


def _fig3a(ax, input_dir):
    _spectrum(ax, input_dir, "constant")


def _fig3b(ax, input_dir):
    _spectrum(ax, input_dir, "drude_lorentz")


def _correlations(ax, input_dir, part):
    files = (_collect(input_dir, "corr_one_point_*.csv")
             + _collect(input_dir, "corr_two_point_*.csv"))
    if not files:
        raise InputError("no corr_*_point_*.csv inputs")
    for path in files:
        t = read_table(path, ("t_fs", "re_F", "im_F"))
        model = _model_of(path)
        kind = "one-point" if "one_point" in path else "two-point"
        ax.plot(t["t_fs"], t[part], label=f"{kind}, {model}",
                ls=_STYLE[model]["ls"], lw=0.9)
    ax.set_xlim(0, 40)
    ax.set_xlabel("t (fs)")
    ax.set_ylabel({"re_F": "Re F(t)", "im_F": "Im F(t)"}[part])
    ax.legend(fontsize=7)


def _fig4a(ax, input_dir):
    _correlations(ax, input_dir, "re_F")


def _fig4b(ax, input_dir):
    _correlations(ax, input_dir, "im_F")


def _populations(ax, input_dir, prep, column):
    files = _collect(input_dir, f"evolution_{prep}_*.csv")
    if not files:
        raise InputError(f"no evolution_{prep}_*.csv inputs")
    for path in files:
        t = read_table(path, ("t_fs", column))
        model = _model_of(path)
        tag = os.path.basename(path).split("_")[-1].replace(".csv", "")
        ax.plot(t["t_fs"], t[column], label=f"{model}, d={tag}",
                ls=_STYLE[model]["ls"], lw=0.9)
    ax.set_yscale("log")
    ax.set_xlabel("t (fs)")
    ax.set_ylabel(column)
    ax.legend(fontsize=7)


def _fig5a(ax, input_dir):
    _populations(ax, input_dir, "symmetric", "P_plus")


def _fig5b(ax, input_dir):
    _populations(ax, input_dir, "antisymmetric", "P_minus")


def _fig6a(ax, input_dir):
    singles = _collect(input_dir, "evolution_single_*.csv")
    if not singles:
        raise InputError("no evolution_single_*.csv inputs")
    base = os.path.basename(singles[0]).replace("evolution_single_", "")
    tag = base.replace(".csv", "")
    series = {"single": "P_plus", "symmetric": "P_plus",
              "antisymmetric": "P_minus"}
    for prep, col in series.items():
        path = os.path.join(input_dir, f"evolution_{prep}_{tag}.csv")
        if not os.path.exists(path):
            raise InputError(f"missing {path}")
        t = read_table(path, ("t_fs", "re_c1", "im_c1", col))
        if prep == "single":
            p = t["re_c1"]**2 + t["im_c1"]**2
        else:
            p = t[col]
        ax.plot(t["t_fs"], p, label=prep, lw=0.9)
    rep_path = os.path.join(input_dir, f"analysis_{tag}.json")
    if os.path.exists(rep_path):
        with open(rep_path) as f:
            rep = json.load(f)
        for key, color in (("t_com_plus_fs", "C1"), ("t_com_minus_fs", "C2")):
            if np.isfinite(rep.get(key, float("nan"))):
                ax.axvline(rep[key], ls=":", color=color, lw=1.0,
                           label=key)
    ax.set_yscale("log")
    ax.set_xlabel("t (fs)")
    ax.set_ylabel("population")
    ax.legend(fontsize=7)


def _sweep_tables(input_dir):
    files = _collect(input_dir, "sweep*.csv")
    if not files:
        raise InputError("no sweep*.csv inputs")
    cols = ("model", "a_nm", "d_over_pi_beta0", "quotient_plus",
            "quotient_minus", "v_com_plus_over_c", "v_com_minus_over_c",
            "v_g0_over_c", "t_est_over_t_vg", "status")
    return [read_table(p, cols) for p in files]


def _fig6b(ax, input_dir):
    for t in _sweep_tables(input_dir):
        ok = np.array([s == "ok" for s in t["status"]])
        for a in np.unique(t["a_nm"][ok]):
            m = ok & (t["a_nm"] == a)
            model = t["model"][int(np.nonzero(m)[0][0])]
            marker = "o" if a < 175 else "D"
            ax.plot(t["d_over_pi_beta0"][m], t["v_com_plus_over_c"][m],
                    marker=marker, ls="none",
                    label=f"{model}, a={a:.0f} nm (+)")
            ax.plot(t["d_over_pi_beta0"][m], t["v_com_minus_over_c"][m],
                    marker=marker, ls="none", mfc="none",
                    label=f"{model}, a={a:.0f} nm (-)")
            ax.axhline(float(t["v_g0_over_c"][m][0]), ls="--", lw=0.8,
                       color="gray")
    ax.set_xlabel("d (pi/beta0 units)")
    ax.set_ylabel("v_com/c")
    ax.legend(fontsize=6)


def _quotients(ax, input_dir, column):
    for t in _sweep_tables(input_dir):
        ok = np.array([s == "ok" for s in t["status"]])
        for model in ("constant", "drude_lorentz"):
            m = ok & np.array([x == model for x in t["model"]])
            if not m.any():
                continue
            marker = "o" if model == "constant" else "^"
            ax.plot(t["a_nm"][m], t[column][m], marker=marker, ls="none",
                    label=model)
    ax.set_xlabel("a (nm)")
    ax.set_ylabel(column)
    ax.legend(fontsize=7)


def _fig7a(ax, input_dir):
    _quotients(ax, input_dir, "quotient_plus")


def _fig7b(ax, input_dir):
    _quotients(ax, input_dir, "quotient_minus")


def _establishment(ax, input_dir, model):
    drew = False
    for t in _sweep_tables(input_dir):
        ok = np.array([s == "ok" for s in t["status"]])
        m = ok & np.array([x == model for x in t["model"]])
        if not m.any():
            continue
        for a in np.unique(t["a_nm"][m]):
            mm = m & (t["a_nm"] == a)
            marker = "o" if a < 175 else "D"
            ax.plot(t["d_over_pi_beta0"][mm], t["t_est_over_t_vg"][mm],
                    marker=marker, ls="none", label=f"a={a:.0f} nm")
            drew = True
    if not drew:
        raise InputError(f"no sweep rows for {model}")
    ax.set_xlabel("d (pi/beta0 units)")
    ax.set_ylabel("t_est / t_vg")
    ax.legend(fontsize=7)


def _fig8a(ax, input_dir):
    _establishment(ax, input_dir, "constant")


def _fig8b(ax, input_dir):
    _establishment(ax, input_dir, "drude_lorentz")


@dataclass(frozen=True)
class FigureSpec:
    fig_id: str
    title: str
    builder: callable


FIGURES = {
    "fig2a": FigureSpec("fig2a", "Dispersion relation", _fig2a),
    "fig2b": FigureSpec("fig2b", "Group and phase velocities", _fig2b),
    "fig3a": FigureSpec("fig3a", "Spectral density, constant", _fig3a),
    "fig3b": FigureSpec("fig3b", "Spectral density, Drude-Lorentz", _fig3b),
    "fig4a": FigureSpec("fig4a", "Correlation functions, real part", _fig4a),
    "fig4b": FigureSpec("fig4b", "Correlation functions, imag part", _fig4b),
    "fig5a": FigureSpec("fig5a", "Symmetric populations", _fig5a),
    "fig5b": FigureSpec("fig5b", "Antisymmetric populations", _fig5b),
    "fig6a": FigureSpec("fig6a", "Communication-time construction", _fig6a),
    "fig6b": FigureSpec("fig6b", "Communication speeds", _fig6b),
    "fig7a": FigureSpec("fig7a", "Superradiant quotients vs radius", _fig7a),
    "fig7b": FigureSpec("fig7b", "Subradiant quotients vs radius", _fig7b),
    "fig8a": FigureSpec("fig8a", "Establishment times, constant", _fig8a),
    "fig8b": FigureSpec("fig8b", "Establishment times, Drude-Lorentz",
                        _fig8b),
}


def build_figure(fig_id: str, input_dir: str):
    """Assemble the matplotlib Figure for fig_id from input_dir."""
    if fig_id not in FIGURES:
        raise KeyError(f"unknown figure {fig_id!r}; available: "
                       f"{', '.join(sorted(FIGURES))}")
    spec = FIGURES[fig_id]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        try:
            spec.builder(ax, input_dir)
        except Exception:
            plt.close(fig)
            raise
        ax.set_title(f"{spec.fig_id}: {spec.title}")
    return fig


def render(fig_id: str, input_dir: str, out_path: str) -> str:
    """Render fig_id to out_path (PNG), atomically and deterministically."""
    fig = build_figure(fig_id, input_dir)
    tmp = out_path + ".tmp"
    try:
        fig.savefig(tmp, dpi=DPI, format="png",
                    metadata={"Software": None})
    finally:
        plt.close(fig)
    os.replace(tmp, out_path)
    return out_path
