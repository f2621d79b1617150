"""Physical constants and unit conventions, collected in one place.

Unit conventions used throughout the package:

* relaxation and pump rates: 1/us
* frequencies (Rabi, detuning, linewidths): MHz
* optical powers: mW

1/us and MHz are numerically identical, so rates and cyclic frequencies mix
freely in formulas; every angular quantity carries an explicit 2*pi.
"""

from __future__ import annotations

# Constants kept to six significant digits.
PLANCK_J_S = 6.62607e-34
SPEED_OF_LIGHT_M_S = 2.99792e8

# NV electron gyromagnetic ratio, rad/(s T) over 2*pi convention folded into
# the sensitivity formula: sensitivity uses 2*pi/GYROMAGNETIC.
GYROMAGNETIC_S_T = 1.761e11

# Nitrogen hyperfine splitting of the ODMR line, MHz.
HYPERFINE_SPLITTING_MHZ = 2.2

# Conversion between a Gaussian FWHM and its sigma, 2*sqrt(2*ln 2).
GAUSSIAN_FWHM_OVER_SIGMA = 2.3548200450309493

# Offset of the simultaneous NV/substitutional-nitrogen spin-flip side
# resonances from the central line, MHz.
SIDE_RESONANCE_OFFSET_MHZ = 33.0

# Five-level optical lifetimes, expressed as rates in 1/us:
# radiative decay of the excited states, intersystem crossing from the
# m_s = +-1 excited state, and singlet relaxation.
GAMMA_RADIATIVE = 1.0 / 0.012
GAMMA_ISC = 1.0 / 0.012
GAMMA_SINGLET = 1.0 / 0.200

# Default population-to-signal contrast parameter theta = (alpha - beta) / (2 alpha).
THETA_DEFAULT = 22.9e-3
