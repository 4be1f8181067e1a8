"""Physical constants and default model parameters (SI units throughout)."""

import numpy as np

C = 299792458.0  # m/s
FINE_STRUCTURE = 7.2973525693e-3
BOHR_RADIUS = 5.29177210903e-11  # m

# silica-like Drude-Lorentz defaults: resonance at 350 nm, damping = electric
# dipole decay rate of a single constituent
OMEGA_350 = 2 * np.pi * C / 350e-9  # rad/s
GAMMA_350 = 4 * FINE_STRUCTURE * BOHR_RADIUS**2 * OMEGA_350**3 / (3 * C**2)  # rad/s

# constant-model refractive index of the fiber at optical frequencies
N1_SILICA = 1.4534

# atomic resonance default: lambda0 = 780 nm
LAMBDA_0 = 780e-9  # m
OMEGA_0 = 2 * np.pi * C / LAMBDA_0  # rad/s

# default coupling scale, expressed as the target Markovian amplitude decay
# rate pi*S(omega0); population 1/e time is then ~1 ps
GAMMA_TARGET = 0.5e12  # 1/s

FS = 1e-15  # s
NM = 1e-9   # m
