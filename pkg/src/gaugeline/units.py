"""Physical constants and the internal unit system.

Natural units with hbar = c = 1 are used throughout.  Energies are carried in
eV and lengths in nm; the two are tied together by hbar*c.  Times are carried
in ns, and angular frequencies are reported in s^-1.

CODATA 2018 values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhysicalConstants:
    fine_structure_alpha: float = 7.2973525693e-3
    hbar_c: float = 197.3269804  # eV nm
    electron_mass: float = 0.51099895000e6  # eV
    speed_of_light: float = 2.99792458e17  # nm/s
    hbar: float = 6.582119569e-16  # eV s

    def __post_init__(self):
        for name in ("fine_structure_alpha", "hbar_c", "electron_mass", "speed_of_light", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def speed_of_light_nm_per_ns(self) -> float:
        return self.speed_of_light * 1e-9

    @property
    def hbar_ns(self) -> float:
        """hbar in eV ns."""
        return self.hbar * 1e9


@dataclass(frozen=True)
class UnitPolicy:
    internal_system: str = "natural: hbar=c=1, energy eV, length nm, time ns"
    reporting_frequency_convention: str = "angular, s^-1"


CONSTANTS = PhysicalConstants()
POLICY = UnitPolicy()

ALPHA = CONSTANTS.fine_structure_alpha
HBAR_C = CONSTANTS.hbar_c
HBAR = CONSTANTS.hbar
ELECTRON_MASS = CONSTANTS.electron_mass
C_NM_PER_NS = CONSTANTS.speed_of_light_nm_per_ns


def energy_to_angular_frequency(energy):
    """Angular frequency in s^-1 of an energy given in eV."""
    return np.asarray(energy) / HBAR if np.ndim(energy) else energy / HBAR


def angular_frequency_to_energy(omega):
    return np.asarray(omega) * HBAR if np.ndim(omega) else omega * HBAR


def energy_to_rad_per_ns(energy):
    return energy_to_angular_frequency(energy) * 1e-9


def length_to_inverse_energy(length):
    """Length in nm expressed as an inverse energy in eV^-1."""
    if np.any(np.asarray(length) < 0):
        raise ValueError("length must be non-negative")
    return np.asarray(length) / HBAR_C if np.ndim(length) else length / HBAR_C


def inverse_energy_to_length(inv_energy):
    return np.asarray(inv_energy) * HBAR_C if np.ndim(inv_energy) else inv_energy * HBAR_C


def coulomb_coupling() -> float:
    """e^2/4pi in eV nm (alpha * hbar c)."""
    return ALPHA * HBAR_C
