"""Physical constants (SI unless noted) and unit conversions."""

import math

Q_E = 1.602176634e-19  # elementary charge [C]
HBAR = 1.054571817e-34  # reduced Planck constant [J s]
H_PLANCK = 2.0 * math.pi * HBAR  # [J s]
HBAR_EV = HBAR / Q_E  # [eV s]
H_EV = H_PLANCK / Q_E  # [eV s]
K_B = 1.380649e-23  # Boltzmann constant [J/K]
K_B_EV = K_B / Q_E  # [eV/K]
MU_0 = 4.0e-7 * math.pi  # vacuum permeability [H/m]
M_E = 9.1093837015e-31  # free-electron mass [kg]
GAMMA = 1.76e11  # gyromagnetic ratio [rad s^-1 T^-1]

G_QUANTUM = Q_E**2 / H_PLANCK  # conductance quantum per spin channel [S]


def emu_cc_to_a_per_m(value: float) -> float:
    """Magnetization, emu/cm^3 -> A/m."""
    return value * 1.0e3


def oe_to_a_per_m(value: float) -> float:
    """Magnetic field, Oe -> A/m."""
    return value * 1.0e3 / (4.0 * math.pi)
