"""Guided-mode spectral densities and bath correlation functions.

One-point spectral density of the fundamental mode at the atom position,

    S(omega, R) = coupling * omega * (d beta/d omega) * |e_r(omega, a+R)|^2,

two-point integrand S(omega)*cos(beta(omega)*d), and their Fourier
transforms F(t) = int dw exp(-i(w-w0)t) * integrand computed by zero-padded
FFT on the (uniform) dispersion-table grid.  The physical coupling prefactor
|p|^2/(pi eps0 hbar) is parameterized by the target Markovian amplitude rate
gamma_target = pi*S(omega0); every reported observable is a quotient
insensitive to that choice.

For the Drude-Lorentz model the two-point integrand oscillates without bound
toward the fiber resonance, so the integration is cut at a zero of
cos(beta(omega) d) chosen below the top of the table (hard cutoff).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .constants import GAMMA_TARGET, OMEGA_0
from .waveguide import DispersionTable, FiberGeometry, ModeProfile

NYQUIST_FRACTION = np.pi / 8.0


class BathError(Exception):
    pass


class NyquistError(BathError):
    """Frequency grid too coarse for the cos(beta d) oscillation."""


class CutoffError(BathError):
    """No usable cosine zero below the resonance."""


@dataclass(frozen=True)
class SpectralGrid:
    """Sampled spectral density (and two-point integrand) on a uniform grid."""

    omega: np.ndarray          # rad/s, uniform
    s_one: np.ndarray          # scaled one-point density
    beta: np.ndarray           # rad/m on the same grid
    beta_prime: np.ndarray     # s/m
    coupling_scale: float      # gamma_target = pi*S(omega0), 1/s
    omega0: float
    geometry: FiberGeometry
    model_digest: str
    s_two: np.ndarray | None = None   # s_one * cos(beta d), after cutoff
    d: float = 0.0
    cutoff_omega: float | None = None
    cutoff_index: int | None = None   # grid points kept: omega <= cutoff

    @property
    def delta_omega(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def s_one_at(self, omega) -> float:
        return float(CubicSpline(self.omega, self.s_one)(omega))


def one_point_spectral_density(table: DispersionTable, profile: ModeProfile,
                               geometry: FiberGeometry,
                               gamma_target: float = GAMMA_TARGET,
                               omega0: float = OMEGA_0) -> SpectralGrid:
    """S(omega, R) on the table grid, scaled so that pi*S(omega0) = gamma_target."""
    if profile.model.digest() != table.model.digest() or profile.a != table.a:
        raise BathError("table and profile were built for different fibers")
    if geometry.a != table.a:
        raise BathError("geometry radius does not match the table")
    if not (table.omega[0] < omega0 < table.omega[-1]):
        raise BathError("omega0 outside the table range")
    er2 = profile.e_r_sq_outside(table.omega, table.beta, geometry.r_atom)
    raw = table.omega * table.beta_prime * er2
    scale = gamma_target / (np.pi * float(CubicSpline(table.omega, raw)(omega0)))
    return SpectralGrid(omega=table.omega, s_one=raw * scale,
                        beta=table.beta, beta_prime=table.beta_prime,
                        coupling_scale=gamma_target, omega0=omega0,
                        geometry=geometry, model_digest=table.model.digest())


def two_point_integrand(grid: SpectralGrid, d: float) -> SpectralGrid:
    """Attach S_two(omega) = S_one(omega) cos(beta(omega) d); cos(phi_m-phi_n)=1."""
    if d < 0:
        raise ValueError("d must be >= 0")
    s_two = grid.s_one * np.cos(grid.beta * d)
    return SpectralGrid(omega=grid.omega, s_one=grid.s_one, beta=grid.beta,
                        beta_prime=grid.beta_prime,
                        coupling_scale=grid.coupling_scale, omega0=grid.omega0,
                        geometry=grid.geometry, model_digest=grid.model_digest,
                        s_two=s_two, d=d, cutoff_omega=grid.cutoff_omega,
                        cutoff_index=grid.cutoff_index)


def cosine_zeros(table: DispersionTable, d: float) -> np.ndarray:
    """All omega with beta(omega) d = (k+1/2) pi inside the table range.

    beta is strictly increasing, so each zero is found by inverting the
    dispersion relation and polished on the spline to residual < 1e-9.
    """
    if d <= 0:
        return np.array([])
    phase = table.beta * d / np.pi - 0.5
    k_lo = int(np.ceil(phase[0]))
    k_hi = int(np.floor(phase[-1]))
    if k_hi < max(k_lo, 0):
        return np.array([])
    ks = np.arange(max(k_lo, 0), k_hi + 1)
    targets = (ks + 0.5) * np.pi / d
    om = np.asarray(table.omega_at_beta(targets), dtype=float)
    # Newton polish on the beta spline
    spl = CubicSpline(table.omega, table.beta)
    for _ in range(4):
        om = om - (spl(om) - targets) / spl(om, 1)
    good = (np.abs(spl(om) * d - (ks + 0.5) * np.pi)
            < 1e-9 * np.abs((ks + 0.5) * np.pi))
    return om[good]


def choose_cutoff(table: DispersionTable, d: float,
                  zeros_below_top: int = 2) -> float:
    """Hard-cutoff frequency at a zero of cos(beta d) below the resonance.

    Returns the zero counted `zeros_below_top` places down from the highest
    zero inside the table.  Convergence of downstream observables against
    the next two higher zeros is checked separately (see
    cutoff_convergence_metric in the cli module).
    """
    if table.model.kind != "drude_lorentz":
        return float(table.omega[-1])
    if d <= 0:
        raise CutoffError("cutoff selection needs d > 0")
    zeros = cosine_zeros(table, d)
    if len(zeros) == 0:
        raise CutoffError(
            "no cos(beta d) zero below the resonance; extend the grid or "
            "increase d")
    k = len(zeros) - 1 - zeros_below_top
    if k < 0:
        raise CutoffError(
            f"only {len(zeros)} zeros available, cannot step down "
            f"{zeros_below_top}")
    return float(zeros[k])


def apply_cutoff(grid: SpectralGrid, cutoff_omega: float) -> SpectralGrid:
    """Restrict the integrands to omega <= cutoff_omega (grid untouched)."""
    idx = int(np.searchsorted(grid.omega, cutoff_omega, side="right"))
    if idx < 16:
        raise CutoffError("cutoff leaves fewer than 16 grid points")
    return SpectralGrid(omega=grid.omega, s_one=grid.s_one, beta=grid.beta,
                        beta_prime=grid.beta_prime,
                        coupling_scale=grid.coupling_scale,
                        omega0=grid.omega0, geometry=grid.geometry,
                        model_digest=grid.model_digest, s_two=grid.s_two,
                        d=grid.d, cutoff_omega=float(cutoff_omega),
                        cutoff_index=idx)


@dataclass(frozen=True)
class CorrelationFunction:
    """Complex F(t) on a uniform time grid.

    samples hold t in [0, window/2): the physically usable kernel (the
    second FFT half-window is the t < 0 mirror, kept in full_window for
    diagnostics).  dt = 2 pi / (n_fft * delta_omega).
    """

    dt: float
    samples: np.ndarray        # complex, t >= 0 half-window
    kind: str                  # one_point | two_point
    omega0: float
    delta_omega: float
    n_fft: int
    coupling_scale: float
    full_window: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(len(self.samples))

    @property
    def t_max(self) -> float:
        return self.dt * (len(self.samples) - 1)


def correlation_function(grid: SpectralGrid, kind: str = "one_point",
                         n_fft: int | None = None,
                         dt_target: float | None = None,
                         keep_full_window: bool = False) -> CorrelationFunction:
    """F(t_j) = sum_k dw * integrand(w_k) * exp(-i(w_k - w0) t_j) by FFT.

    Zero-padding to n_fft >= grid size evaluates the same Riemann sum on a
    finer time grid; the time window 2 pi/dw is set by the grid spacing
    alone.  The Nyquist precondition dw * max|beta'| * d <= pi/8 guards the
    cos(beta d) factor sampling; violation raises with the required spacing.
    """
    if kind not in ("one_point", "two_point"):
        raise ValueError("kind must be one_point or two_point")
    vals = grid.s_one if kind == "one_point" else grid.s_two
    if vals is None:
        raise BathError("two_point requested but no S_two on this grid")
    n_keep = grid.cutoff_index if grid.cutoff_index is not None else len(grid.omega)
    om = grid.omega[:n_keep]
    vals = vals[:n_keep]
    dw = grid.delta_omega
    if grid.d > 0:
        bmax = float(np.abs(grid.beta_prime[:n_keep]).max())
        factor = dw * bmax * grid.d
        if factor > NYQUIST_FRACTION:
            raise NyquistError(
                f"dw*max|beta'|*d = {factor:.3e} > pi/8; need dw <= "
                f"{NYQUIST_FRACTION / (bmax * grid.d):.3e} rad/s")
    if n_fft is None:
        if dt_target is None:
            n_fft = 1 << int(np.ceil(np.log2(4 * len(om))))
        else:
            n_fft = 1 << int(np.ceil(np.log2(2 * np.pi / (dt_target * dw))))
    if n_fft < len(om):
        raise ValueError("n_fft smaller than the frequency grid")
    F = np.fft.fft(vals, n_fft) * dw
    t = 2 * np.pi * np.arange(n_fft) / (n_fft * dw)
    # phase shift e^{i(omega0 - om[0]) t}: on anchored grids the ratio is an
    # integer, so the argument reduces mod n_fft exactly (no precision loss
    # from sin/cos of large arguments)
    m = (grid.omega0 - om[0]) / dw
    if abs(m - round(m)) < 1e-9:
        idx = (int(round(m)) * np.arange(n_fft, dtype=np.int64)) % n_fft
        F = F * np.exp(2j * np.pi * idx / n_fft)
    else:
        F = F * np.exp(1j * (grid.omega0 - om[0]) * t)
    half = n_fft // 2
    prov = {
        "kind": kind, "delta_omega": dw, "n_grid": int(len(om)),
        "n_fft": int(n_fft), "cutoff_omega": grid.cutoff_omega,
        "coupling_scale": grid.coupling_scale, "d_m": grid.d,
        "model_digest": grid.model_digest,
    }
    return CorrelationFunction(
        dt=float(t[1]), samples=F[:half], kind=kind, omega0=grid.omega0,
        delta_omega=dw, n_fft=int(n_fft),
        coupling_scale=grid.coupling_scale,
        full_window=F if keep_full_window else None, provenance=prov)


def markovian_rate(grid: SpectralGrid, omega0: float | None = None) -> float:
    """Markov-limit amplitude decay rate gamma_M = pi * S(omega0).

    The population decays at 2*gamma_M in the Markov limit; used to
    normalize every reported quotient.
    """
    w0 = grid.omega0 if omega0 is None else float(omega0)
    n_keep = grid.cutoff_index if grid.cutoff_index is not None else len(grid.omega)
    if not (grid.omega[0] <= w0 <= grid.omega[n_keep - 1]):
        raise BathError("omega0 outside the (cut) spectral grid")
    return float(np.pi * CubicSpline(grid.omega[:n_keep],
                                     grid.s_one[:n_keep])(w0))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def fwhm(corr: CorrelationFunction) -> float:
    """Full width at half maximum of |F| around its global peak.

    For the one-point kernel the peak sits at t = 0 and only the t >= 0
    half is stored; the width is then twice the right half-width.
    """
    a = np.abs(corr.samples)
    ipk = int(np.argmax(a))
    half = a[ipk] / 2.0
    i_hi = ipk
    while i_hi + 1 < len(a) and a[i_hi] > half:
        i_hi += 1
    if ipk == 0:
        return 2.0 * corr.dt * i_hi
    i_lo = ipk
    while i_lo > 0 and a[i_lo] > half:
        i_lo -= 1
    return corr.dt * (i_hi - i_lo)


def two_point_peaks(corr: CorrelationFunction) -> tuple[float, float]:
    """Times of the two retardation peaks of |F_mn| (t = +-beta' d pair).

    The positive-time peak lives in the stored half-window; its negative-
    time partner is read from the mirror samples F(-t) = conj(F(t)) via the
    full window when present, otherwise by symmetry of the stored half.
    Returns (t_neg, t_pos) with t_neg < 0 < t_pos.
    """
    a = np.abs(corr.samples)
    n = len(a)
    # ignore the t=0 neighborhood (one-point-like remnant is absent for
    # two_point kernels, but guard against cutoff ringing at the origin)
    i0 = 2
    ipk = i0 + int(np.argmax(a[i0:n // 2]))
    t_pos = corr.dt * ipk
    if corr.full_window is not None:
        b = np.abs(corr.full_window)
        m = len(b)
        jpk = int(np.argmax(b[m - n // 2:])) + (m - n // 2)
        t_neg = corr.dt * (jpk - m)
    else:
        t_neg = -t_pos  # hermitian symmetry of the transform
    return float(t_neg), float(t_pos)


def plancherel_mismatch(corr: CorrelationFunction, grid: SpectralGrid) -> float:
    """Relative error of dt*sum|F|^2 = 2 pi dw sum|S|^2 over the full window."""
    if corr.full_window is None:
        raise BathError("need keep_full_window=True for the Plancherel check")
    vals = grid.s_one if corr.kind == "one_point" else grid.s_two
    n_keep = grid.cutoff_index if grid.cutoff_index is not None else len(grid.omega)
    vals = vals[:n_keep]
    lhs = corr.dt * float(np.sum(np.abs(corr.full_window)**2))
    rhs = 2 * np.pi * grid.delta_omega * float(np.sum(np.abs(vals)**2))
    return abs(lhs - rhs) / rhs
