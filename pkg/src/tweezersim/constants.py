"""Unit multipliers and shared physical constants (SI internally, always)."""

from scipy.constants import c as c_light  # noqa: F401  (re-exported)
from scipy.constants import g as g_earth  # noqa: F401
from scipy.constants import hbar, k as k_B  # noqa: F401

# handy multipliers for readable literals; all internal math is plain SI
nm = 1e-9
um = 1e-6
mm = 1e-3
us = 1e-6
ms = 1e-3
uK = 1e-6
kHz = 1e3
MHz = 1e6
