""" Physical constants in SI units """

import math

from scipy import constants as cons

HBAR = cons.hbar
ELEMENTARY_CHARGE = cons.elementary_charge
ATOMIC_MASS = cons.atomic_mass
# Coulomb constant 1/(4 pi eps0)
K_E = 1 / (4 * math.pi * cons.epsilon_0)
TWO_PI = 2 * math.pi
