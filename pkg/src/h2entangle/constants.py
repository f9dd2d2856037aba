"""Physical constants and unit conversions (atomic units unless noted)."""

HARTREE_EV = 27.211386245988
HBAR_EV_FS = 0.6582119569  # eV fs
AU_TIME_FS = 0.02418884326585747

PROTON_MASS = 1836.15267343  # electron masses
HYDROGEN_MASS = PROTON_MASS + 1.0
PAIR_REDUCED_MASS = PROTON_MASS * HYDROGEN_MASS / (PROTON_MASS + HYDROGEN_MASS)
# reduced mass of the two nuclei used in the WKB integrand
NUCLEAR_REDUCED_MASS = 918.076

IONISATION_LIMIT_EV = 18.1  # H2 -> H+ + H(1s) + e-, relative to H2 ground state
IR_PHOTON_EV = 1.2

# I [W/cm^2] = INTENSITY_AU * E0**2
INTENSITY_AU = 3.509e16


def omega_rad_per_fs(photon_energy_ev: float) -> float:
    """Angular frequency in rad/fs of a photon of the given energy."""
    return photon_energy_ev / HBAR_EV_FS
