"""Fiber dielectric models, HE11 dispersion solver and guided-mode profile.

The fundamental-mode propagation constant beta(omega) solves the exact
step-index eigenvalue equation (n2 = 1 vacuum cladding, HE branch)

    J0(ha)/(ha J1(ha)) = -[(n1^2+n2^2)/(2 n1^2)] K1'(qa)/(qa K1(qa))
                         + 1/(ha)^2 - R(omega, beta),

    R = sqrt( ([(n1^2-n2^2)/(2 n1^2)] K1'(qa)/(qa K1(qa)))^2
              + (beta/k1)^2 (1/(ha)^2 + 1/(qa)^2)^2 ),

with h = sqrt(k1^2 - beta^2), q = sqrt(beta^2 - k2^2), k_j = n_j omega/c and
K1'(x) = -(K0(x) + K2(x))/2.  The mode profile and its normalization follow
the standard quasi-circular HE11 field components; the normalization constant
is fixed by  int_0^2pi dphi int_0^inf dr r n^2(r) |e|^2 = 1  and evaluates in
closed form through Lommel-type Bessel integrals.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp
from scipy.optimize import brentq

from .constants import C, GAMMA_350, N1_SILICA, OMEGA_350


class WaveguideError(Exception):
    pass


class CalibrationError(WaveguideError):
    """Plasma-frequency calibration has no solution."""


class NoGuidedModeError(WaveguideError):
    """No guided HE11 root at the requested frequency."""


class DegenerateModeError(WaveguideError):
    """Vanishing denominator in the mode s parameter."""


class GridConvergenceError(WaveguideError):
    """Dispersion-table grid too coarse for the requested beta' accuracy."""


# ---------------------------------------------------------------------------
# dielectric models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DielectricModel:
    """Constant or Drude-Lorentz fiber permittivity.

    kind='constant' uses n1 only.  kind='drude_lorentz' uses (omega_R,
    gamma_R, omega_p); omega_p is normally fixed by calibrate() so that the
    refractive index at the atomic resonance equals n1.
    """

    kind: str
    n1: float = N1_SILICA
    omega_R: float = OMEGA_350
    gamma_R: float = GAMMA_350
    omega_p: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "drude_lorentz"):
            raise ValueError(f"unknown dielectric kind {self.kind!r}")
        if self.kind == "constant":
            if not self.n1 > 1.0:
                raise ValueError("constant model requires n1 > 1 (guiding)")
        else:
            if self.omega_R <= 0 or self.gamma_R < 0 or self.omega_p <= 0:
                raise ValueError("drude_lorentz requires omega_R > 0, "
                                 "gamma_R >= 0, omega_p > 0")

    @classmethod
    def constant(cls, n1: float = N1_SILICA) -> "DielectricModel":
        return cls(kind="constant", n1=n1)

    @classmethod
    def drude_lorentz(cls, omega0: float, n1: float = N1_SILICA,
                      omega_R: float = OMEGA_350,
                      gamma_R: float = GAMMA_350) -> "DielectricModel":
        """DL model with omega_p calibrated so that n(omega0) = n1."""
        omega_p = calibrate_plasma_frequency(omega_R, gamma_R, omega0, n1)
        return cls(kind="drude_lorentz", n1=n1, omega_R=omega_R,
                   gamma_R=gamma_R, omega_p=omega_p)

    def permittivity(self, omega):
        """Relative permittivity (real part); absorption is dropped."""
        omega = np.asarray(omega, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(self.n1**2, omega.shape).copy() \
                if omega.shape else np.float64(self.n1**2)
        den = (self.omega_R**2 - omega**2) - 1j * self.gamma_R * omega
        return np.real(1.0 + self.omega_p**2 / den)

    def refractive_index(self, omega):
        eps = self.permittivity(omega)
        return np.sqrt(np.maximum(eps, 0.0))

    def guiding_omega_max(self) -> float:
        """Upper end of the guiding range (n > 1)."""
        if self.kind == "constant":
            return np.inf
        return self.omega_R

    def digest(self) -> str:
        payload = json.dumps({
            "kind": self.kind, "n1": self.n1, "omega_R": self.omega_R,
            "gamma_R": self.gamma_R, "omega_p": self.omega_p,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def permittivity(model: DielectricModel, omega):
    return model.permittivity(omega)


def calibrate_plasma_frequency(omega_R: float, gamma_R: float,
                               omega0: float, n1: float) -> float:
    """Plasma frequency such that Re eps_L(omega0) = n1^2 (rel. tol 1e-9).

    One-dimensional root finding on omega_p^2; fails when omega0 >= omega_R
    (the refractive index cannot reach n1 beyond the resonance).
    """
    if omega0 >= omega_R:
        raise CalibrationError(
            f"omega0 = {omega0:.4e} >= omega_R = {omega_R:.4e}: "
            "no plasma frequency reproduces n1 at the atomic line")
    D = (omega_R**2 - omega0**2)**2 + gamma_R**2 * omega0**2

    def miss(wp2):
        return 1.0 + wp2 * (omega_R**2 - omega0**2) / D - n1**2

    # bracketing: miss is increasing in wp2
    hi = 4.0 * (n1**2 - 1.0) * D / (omega_R**2 - omega0**2)
    wp2 = brentq(miss, 0.0, hi, rtol=1e-14)
    wp = float(np.sqrt(wp2))
    eps = 1.0 + wp2 * (omega_R**2 - omega0**2) / D
    if abs(eps - n1**2) > 1e-9 * n1**2:
        raise CalibrationError("plasma-frequency calibration did not converge")
    return wp


@dataclass(frozen=True)
class FiberGeometry:
    """Fiber radius a, atom clearance R from the surface, axial separation d.

    Atoms sit at radial coordinate r = a + R.
    """

    a: float
    R: float = 100e-9
    d: float = 0.0

    def __post_init__(self):
        if self.a <= 0 or self.R < 0 or self.d < 0:
            raise ValueError("require a > 0, R >= 0, d >= 0")

    @property
    def r_atom(self) -> float:
        return self.a + self.R


# ---------------------------------------------------------------------------
# eigenvalue equation
# ---------------------------------------------------------------------------

def _kt(qa):
    """K1'(qa) / (qa K1(qa)) with K1' = -(K0+K2)/2.

    Evaluated with exponentially scaled Bessels (the e^qa factors cancel),
    which stays finite for the huge qa of strongly confined modes.
    """
    return -(sp.kve(0, qa) + sp.kve(2, qa)) / (2.0 * qa * sp.kve(1, qa))


def dispersion_residual(model: DielectricModel, a: float, omega, beta):
    """HE11 eigenvalue residual (LHS - RHS); vectorized in omega/beta.

    Requires k2 < beta < k1 so h and q are real positive; diverges to -inf
    at the q -> 0 end and to +inf at the h -> 0 end of the bracket.
    """
    omega = np.asarray(omega, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n1 = model.refractive_index(omega)
    k1 = n1 * omega / C
    k2 = omega / C
    if np.any(beta <= k2) or np.any(beta >= k1):
        raise NoGuidedModeError("beta outside the (k2, k1) bracket")
    h = np.sqrt(k1**2 - beta**2)
    q = np.sqrt(beta**2 - k2**2)
    ha, qa = h * a, q * a
    kt = _kt(qa)
    lhs = sp.jv(0, ha) / (ha * sp.jv(1, ha))
    n2 = 1.0
    rad = np.sqrt(((n1**2 - n2**2) / (2 * n1**2) * kt)**2
                  + (beta / k1)**2 * (1.0 / ha**2 + 1.0 / qa**2)**2)
    return lhs - (-(n1**2 + n2**2) / (2 * n1**2) * kt + 1.0 / ha**2 - rad)


_BRACKET_DELTA = 1e-12


def _bracket(model, a, omega):
    """(beta_lo, beta_hi) isolating the fundamental root.

    The residual's interior poles sit at J1(ha) = 0; the HE11 root always
    lies above the topmost pole, so the lower end is moved there when poles
    exist inside (k2, k1).
    """
    n1 = float(model.refractive_index(omega))
    if n1 <= 1.0:
        raise NoGuidedModeError(
            f"guiding condition n1 > 1 fails at omega = {omega:.4e}")
    k1 = n1 * omega / C
    k2 = omega / C
    lo = k2 * (1.0 + _BRACKET_DELTA)
    hi = k1 * (1.0 - _BRACKET_DELTA)
    ka = k1 * a
    nz = int(ka / np.pi) + 2
    jz = sp.jn_zeros(1, max(nz, 1))
    jz = jz[jz < ka]
    if len(jz):
        pole = np.sqrt(k1**2 - (jz[0] / a)**2)
        if pole > lo:
            lo = min(pole * (1.0 + 1e-11), hi)
    return lo, hi


def solve_beta(model: DielectricModel, a: float, omega: float) -> float:
    """Fundamental (HE11) propagation constant at omega.

    Bisection to relative tolerance 1e-12 followed by one Newton polish
    step.  In the deep weak-guiding limit the root is indistinguishable from
    the vacuum line in double precision; the bracket floor k2(1+1e-12) is
    returned there (residual already positive at the floor).
    """
    lo, hi = _bracket(model, a, omega)
    rlo = float(dispersion_residual(model, a, omega, lo))
    if not rlo < 0.0:
        return lo
    bl, bh = lo, hi
    while (bh - bl) > 1e-12 * bh:
        bm = 0.5 * (bl + bh)
        if dispersion_residual(model, a, omega, bm) < 0.0:
            bl = bm
        else:
            bh = bm
    beta = 0.5 * (bl + bh)
    res = abs(float(dispersion_residual(model, a, omega, beta)))
    # one Newton polish step with a centered finite-difference derivative,
    # kept only when it improves the residual
    db = 0.5 * (bh - bl)
    if db > 0:
        f0 = float(dispersion_residual(model, a, omega, beta))
        fp = float(dispersion_residual(model, a, omega, min(beta + db, hi)))
        fm = float(dispersion_residual(model, a, omega, max(beta - db, lo)))
        der = (fp - fm) / (2 * db)
        if der != 0.0:
            step = f0 / der
            if abs(step) < 4 * db:
                cand = min(max(beta - step, bl), bh)
                res_cand = abs(float(dispersion_residual(model, a, omega,
                                                         cand)))
                if res_cand < res:
                    beta, res = cand, res_cand
    # the bracket (pole-free by construction) certifies the root; the
    # residual magnitude varies with the local slope and is only sanity-checked
    if not np.isfinite(res):
        raise NoGuidedModeError(
            f"root finding failed at omega = {omega:.4e} (residual not finite)")
    return float(beta)


# ---------------------------------------------------------------------------
# dispersion table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DispersionTable:
    """beta, beta' = d beta/d omega, group and phase velocity on an omega grid."""

    omega: np.ndarray       # rad/s, uniform, increasing
    beta: np.ndarray        # rad/m
    beta_prime: np.ndarray  # s/m
    model: DielectricModel
    a: float
    provenance: dict = field(default_factory=dict)

    @property
    def v_g(self) -> np.ndarray:
        return 1.0 / self.beta_prime

    @property
    def v_p(self) -> np.ndarray:
        return self.omega / self.beta

    @property
    def delta_omega(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def interp_beta(self, omega):
        from scipy.interpolate import CubicSpline
        return CubicSpline(self.omega, self.beta)(omega)

    def interp_beta_prime(self, omega):
        from scipy.interpolate import CubicSpline
        return CubicSpline(self.omega, self.beta_prime)(omega)

    def v_g_at(self, omega) -> float:
        return float(1.0 / self.interp_beta_prime(omega))

    def omega_at_beta(self, beta_value):
        """Inverse of the (strictly increasing) dispersion relation."""
        from scipy.interpolate import CubicSpline
        return CubicSpline(self.beta, self.omega)(beta_value)


def _finite_diff(y, x):
    """Central differences, second-order one-sided at the ends."""
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (x[2:] - x[:-2])
    h0 = x[1] - x[0]
    d[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * h0)
    d[-1] = (3 * y[-1] - 4 * y[-2] + y[-3]) / (2 * h0)
    return d


def build_dispersion_table(model: DielectricModel, a: float,
                           omega_grid: np.ndarray,
                           beta_prime_rtol: float = 1e-6,
                           strict: bool = True) -> DispersionTable:
    """Solve the HE11 root on a uniform grid and differentiate.

    The fine-grid roots are found by vectorized bisection inside narrow
    brackets predicted from a coarse sequential pass (the fundamental branch
    is smooth, so continuation cannot jump to a higher-order root).  beta'
    uses central differences; the grid must pass the convergence check that
    recomputing beta' with doubled spacing moves it by less than
    beta_prime_rtol (a second-order bound on the halving error).
    """
    og = np.asarray(omega_grid, dtype=float)
    if og.ndim != 1 or len(og) < 8:
        raise ValueError("omega_grid must be 1-D with at least 8 points")
    dws = np.diff(og)
    if np.any(dws <= 0) or abs(dws.max() - dws.min()) > 1e-9 * dws.mean():
        raise ValueError("omega_grid must be uniform and strictly increasing")
    if og[-1] >= model.guiding_omega_max():
        raise NoGuidedModeError("grid extends beyond the guiding range")

    warnings = []
    n_coarse = min(len(og), 1501)
    idx = np.unique(np.linspace(0, len(og) - 1, n_coarse).astype(int))
    oc = og[idx]
    bc = np.empty(len(oc))
    for i, om in enumerate(oc):
        bc[i] = solve_beta(model, a, float(om))

    from scipy.interpolate import CubicSpline
    guess = CubicSpline(oc, bc)(og)
    n1 = model.refractive_index(og)
    k1 = n1 * og / C
    k2 = og / C
    # spline guesses can over/undershoot near steep regions; clamp into the
    # physical bracket before building the local search windows
    guess = np.clip(guess, k2 * (1 + 2 * _BRACKET_DELTA),
                    k1 * (1 - 2 * _BRACKET_DELTA))
    lo = np.maximum(guess * (1 - 1e-6), k2 * (1 + _BRACKET_DELTA))
    hi = np.minimum(guess * (1 + 1e-6), k1 * (1 - _BRACKET_DELTA))
    rlo = dispersion_residual(model, a, og, lo)
    rhi = dispersion_residual(model, a, og, hi)
    bad = np.nonzero(~(np.sign(rlo) * np.sign(rhi) < 0))[0]
    beta = np.empty_like(og)
    pinned = np.zeros(len(og), bool)
    for i in bad:  # fallback: scalar solve
        b = solve_beta(model, a, float(og[i]))
        lo[i] = hi[i] = b
        rlo[i] = -1.0
        pinned[i] = True
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        act = ~pinned & (hi - lo > 1e-13 * hi)
        if not act.any():
            break
        rm = np.empty_like(mid)
        rm[act] = dispersion_residual(model, a, og[act], mid[act])
        same = act & (np.sign(rm) == np.sign(rlo))
        lo = np.where(same, mid, lo)
        hi = np.where(act & ~same, mid, hi)
    beta = 0.5 * (lo + hi)

    if np.any(np.diff(beta) <= 0):
        raise WaveguideError("beta not strictly increasing on the grid")
    bp = _finite_diff(beta, og)

    # convergence check against doubled spacing (error ratio 4 for the
    # second-order stencil, so this bounds the halving change well below rtol)
    bp2 = _finite_diff(beta[::2], og[::2])
    rel = np.abs(bp2 - bp[::2]) / np.abs(bp[::2])
    metric = float(rel.max())
    if metric > 4 * beta_prime_rtol:
        msg = (f"beta' grid convergence metric {metric:.2e} exceeds "
               f"{4 * beta_prime_rtol:.0e}; refine the omega grid")
        if strict:
            raise GridConvergenceError(msg)
        warnings.append(msg)

    prov = {
        "model": model.kind, "model_digest": model.digest(), "a_m": a,
        "n_points": len(og), "omega_lo": float(og[0]),
        "omega_hi": float(og[-1]), "beta_prime_metric": metric,
        "warnings": warnings,
    }
    return DispersionTable(omega=og, beta=beta, beta_prime=bp,
                           model=model, a=a, provenance=prov)


# ---------------------------------------------------------------------------
# mode profile
# ---------------------------------------------------------------------------

def mode_s_parameter(beta: float, h: float, q: float, a: float) -> float:
    """HE11 polarization parameter s = (1/ha^2 + 1/qa^2)/(J term + K term)."""
    ha, qa = h * a, q * a
    den = sp.jvp(1, ha) / (ha * sp.jv(1, ha)) + _kt(qa)
    if den == 0 or not np.isfinite(den):
        raise DegenerateModeError("vanishing s-parameter denominator")
    return float((1.0 / ha**2 + 1.0 / qa**2) / den)


def _lommel_j(n, x):
    """int_0^1 J_n(x u)^2 u du * 2 = J_n^2 - J_(n-1) J_(n+1) at x."""
    return sp.jv(n, x)**2 - sp.jv(n - 1, x) * sp.jv(n + 1, x)


def _lommel_k_scaled(n, x):
    """(K_(n-1) K_(n+1) - K_n^2) * e^(2x) at x; pairs with 1/K1(x)^2 e^(2x)."""
    return sp.kve(n - 1, x) * sp.kve(n + 1, x) - sp.kve(n, x)**2


@dataclass(frozen=True)
class ModeProfile:
    """Normalized HE11 mode evaluator for one (model, a) pair.

    Field components (amplitude conventions, phases dropped):
      inside   e_r = A beta/(2h) [(1-s)J0(hr) - (1+s)J2(hr)]
               e_phi = A beta/(2h) [(1-s)J0(hr) + (1+s)J2(hr)]
               e_z = A J1(hr)
      outside  e_r = A beta/(2q) (J1(ha)/K1(qa)) [(1-s)K0(qr) + (1+s)K2(qr)]
               e_phi = A beta/(2q) (J1(ha)/K1(qa)) [(1-s)K0(qr) - (1+s)K2(qr)]
               e_z = A (J1(ha)/K1(qa)) K1(qr)
    A is fixed by 2pi int dr r n^2(r) |e|^2 = 1 (closed form, see below).
    """

    model: DielectricModel
    a: float

    def _params(self, omega, beta):
        n1 = self.model.refractive_index(omega)
        k1 = n1 * omega / C
        k2 = omega / C
        h = np.sqrt(k1**2 - beta**2)
        q = np.sqrt(beta**2 - k2**2)
        s = _s_vec(h * self.a, q * self.a)
        return n1, h, q, s

    def norm_constant_sq(self, omega, beta):
        """A^2 from the closed-form normalization integral.

        With I_Jn = (a^2/2)(Jn^2 - J(n-1)J(n+1)) at ha and
        I_Kn = (a^2/2)(K(n-1)K(n+1) - Kn^2) at qa:

        1/(2 pi A^2) = n1^2 [ 2(beta/2h)^2 ((1-s)^2 I_J0 + (1+s)^2 I_J2) + I_J1 ]
                   + (J1(ha)/K1(qa))^2 [ 2(beta/2q)^2 ((1-s)^2 I_K0 + (1+s)^2 I_K2) + I_K1 ]
        """
        omega = np.asarray(omega, dtype=float)
        beta = np.asarray(beta, dtype=float)
        n1, h, q, s = self._params(omega, beta)
        a = self.a
        ha, qa = h * a, q * a
        half_a2 = a**2 / 2.0
        ij0 = half_a2 * _lommel_j(0, ha)
        ij1 = half_a2 * _lommel_j(1, ha)
        ij2 = half_a2 * _lommel_j(2, ha)
        # scaled K integrals pair with the scaled 1/K1(qa)^2 prefactor so the
        # e^(2qa) factors cancel exactly
        ik0 = half_a2 * _lommel_k_scaled(0, qa)
        ik1 = half_a2 * _lommel_k_scaled(1, qa)
        ik2 = half_a2 * _lommel_k_scaled(2, qa)
        fac = (sp.jv(1, ha) / sp.kve(1, qa))**2
        inner = n1**2 * (2 * (beta / (2 * h))**2
                         * ((1 - s)**2 * ij0 + (1 + s)**2 * ij2) + ij1)
        outer = fac * (2 * (beta / (2 * q))**2
                       * ((1 - s)**2 * ik0 + (1 + s)**2 * ik2) + ik1)
        return 1.0 / (2 * np.pi * (inner + outer))

    def fields(self, omega, beta, r):
        """(e_r, e_phi, e_z) amplitude profiles at radius r (scalar omega)."""
        omega = float(omega)
        beta = float(beta)
        n1, h, q, s = self._params(omega, beta)
        A = np.sqrt(self.norm_constant_sq(omega, beta))
        r = np.atleast_1d(np.asarray(r, dtype=float))
        er = np.empty_like(r)
        ephi = np.empty_like(r)
        ez = np.empty_like(r)
        inside = r < self.a
        ri, ro = r[inside], r[~inside]
        er[inside] = beta / (2 * h) * ((1 - s) * sp.jv(0, h * ri)
                                       - (1 + s) * sp.jv(2, h * ri))
        ephi[inside] = beta / (2 * h) * ((1 - s) * sp.jv(0, h * ri)
                                         + (1 + s) * sp.jv(2, h * ri))
        ez[inside] = sp.jv(1, h * ri)
        # scaled K ratio: K_n(qr)/K1(qa) = kve_n(qr)/kve_1(qa) * e^(-q(r-a))
        fac = sp.jv(1, h * self.a) / sp.kve(1, q * self.a)
        damp = np.exp(-q * (ro - self.a))
        er[~inside] = beta / (2 * q) * fac * damp * (
            (1 - s) * sp.kve(0, q * ro) + (1 + s) * sp.kve(2, q * ro))
        ephi[~inside] = beta / (2 * q) * fac * damp * (
            (1 - s) * sp.kve(0, q * ro) - (1 + s) * sp.kve(2, q * ro))
        ez[~inside] = fac * damp * sp.kve(1, q * ro)
        return A * er, A * ephi, A * ez

    def e_r_sq_outside(self, omega, beta, r):
        """|e_r(omega, r)|^2 for r > a, vectorized over omega/beta.

        Only the evanescent radial component enters the spectral density.
        """
        omega = np.asarray(omega, dtype=float)
        beta = np.asarray(beta, dtype=float)
        r = np.asarray(r, dtype=float)
        if np.any(r <= self.a):
            raise ValueError("e_r_sq_outside requires r > a")
        n1, h, q, s = self._params(omega, beta)
        A2 = self.norm_constant_sq(omega, beta)
        fac = sp.jv(1, h * self.a) / sp.kve(1, q * self.a)
        damp = np.exp(-q * (r - self.a))
        er = beta / (2 * q) * fac * damp * ((1 - s) * sp.kve(0, q * r)
                                            + (1 + s) * sp.kve(2, q * r))
        return A2 * er**2


def _s_vec(ha, qa):
    den = sp.jvp(1, ha) / (ha * sp.jv(1, ha)) + _kt(qa)
    if np.any(den == 0) or not np.all(np.isfinite(den)):
        raise DegenerateModeError("vanishing s-parameter denominator")
    return (1.0 / ha**2 + 1.0 / qa**2) / den


# ---------------------------------------------------------------------------
# disk cache (CSV + JSON sidecar, atomic writes, checksummed)
# ---------------------------------------------------------------------------

TABLE_HEADER = "omega_rad_s,beta_rad_m,beta_prime_s_m,v_g_m_s,v_p_m_s"


def table_cache_key(model: DielectricModel, a: float,
                    omega_grid: np.ndarray) -> str:
    spec = (f"{model.digest()}|a={a!r}|lo={float(omega_grid[0])!r}"
            f"|hi={float(omega_grid[-1])!r}|n={len(omega_grid)}")
    return hashlib.sha256(spec.encode()).hexdigest()[:24]


def table_to_csv(table: DispersionTable) -> str:
    lines = [TABLE_HEADER]
    vg, vp = table.v_g, table.v_p
    for i in range(len(table.omega)):
        vals = (table.omega[i], table.beta[i], table.beta_prime[i],
                vg[i], vp[i])
        lines.append(",".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"


def save_table(table: DispersionTable, path_csv: str) -> None:
    """Atomic create-then-rename write of the CSV and its JSON sidecar."""
    body = table_to_csv(table)
    sidecar = dict(table.provenance)
    sidecar["checksum"] = hashlib.sha256(body.encode()).hexdigest()
    tmp = path_csv + ".tmp"
    with open(tmp, "w") as f:
        f.write(body)
    os.replace(tmp, path_csv)
    tmp_j = path_csv + ".json.tmp"
    with open(tmp_j, "w") as f:
        json.dump(sidecar, f, indent=1, sort_keys=True)
    os.replace(tmp_j, path_csv + ".json")


def load_table(path_csv: str, model: DielectricModel,
               a: float) -> DispersionTable:
    """Re-read a cached table; raises on checksum mismatch."""
    with open(path_csv) as f:
        body = f.read()
    with open(path_csv + ".json") as f:
        sidecar = json.load(f)
    checksum = hashlib.sha256(body.encode()).hexdigest()
    if checksum != sidecar.get("checksum"):
        raise IOError(f"corrupted dispersion cache entry: {path_csv}")
    rows = body.strip().split("\n")
    if rows[0] != TABLE_HEADER:
        raise IOError(f"unexpected cache header in {path_csv}")
    data = np.array([[float(x) for x in row.split(",")] for row in rows[1:]])
    prov = {k: v for k, v in sidecar.items() if k != "checksum"}
    return DispersionTable(omega=data[:, 0], beta=data[:, 1],
                           beta_prime=data[:, 2], model=model, a=a,
                           provenance=prov)


def load_or_build_table(model: DielectricModel, a: float,
                        omega_grid: np.ndarray,
                        cache_dir: str | None = None,
                        strict: bool = True) -> DispersionTable:
    if cache_dir is None:
        return build_dispersion_table(model, a, omega_grid, strict=strict)
    os.makedirs(cache_dir, exist_ok=True)
    key = table_cache_key(model, a, omega_grid)
    path = os.path.join(cache_dir, f"dispersion_{key}.csv")
    if os.path.exists(path) and os.path.exists(path + ".json"):
        try:
            return load_table(path, model, a)
        except (IOError, ValueError):
            pass  # corrupted entry: rebuild below
    table = build_dispersion_table(model, a, omega_grid, strict=strict)
    save_table(table, path)
    return table
