"""Doppler physics and spectroscopy of the warm Rb-87 vapour.

Thermal widths, the calibrated optical-depth model, one-photon absorption
spectra across the Zeeman structure, two-photon (ladder) spectra for the
co- and counter-propagating geometries, and the residual-Doppler dephasing
time of the stored coherence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import atomic
from .constants import KB_OVER_AMU, AtomConstants, default_constants
from .errors import DomainError

__all__ = [
    "VapourParams", "doppler_width_rad_s", "doppler_fwhm_ghz", "optical_depth",
    "one_photon_spectrum", "two_photon_spectrum", "residual_doppler_lifetime_ns",
    "thermal_velocity_sigma", "two_photon_linewidth_mhz",
]

ZERO_C_IN_K = 273.15

# single-pass depth calibrated to 200 at (85 C, 6 mm); see optical_depth
_DEPTH_CALIBRATION_T_C = 85.0
_DEPTH_CALIBRATION_L_MM = 6.0
_DEPTH_CALIBRATION_VALUE = 200.0


@dataclass(frozen=True)
class VapourParams:
    """Operating state of the vapour cell."""

    temperature_c: float = 85.0
    cell_length_mm: float = 6.0
    optical_depth: float | None = None   # overrides the density model when set
    field_inhomogeneity_mhz: float = 12.2  # Gaussian broadening of narrow lines

    def __post_init__(self):
        if self.temperature_c <= -ZERO_C_IN_K:
            raise DomainError("temperature below absolute zero")
        if self.cell_length_mm <= 0:
            raise DomainError("cell length must be positive")
        if self.optical_depth is not None and self.optical_depth < 0:
            raise DomainError("optical depth must be non-negative")

    def depth(self) -> float:
        if self.optical_depth is not None:
            return self.optical_depth
        return optical_depth(self.temperature_c, self.cell_length_mm)


def thermal_velocity_sigma(t_c: float, mass_amu: float | None = None) -> float:
    """1-D thermal velocity spread sqrt(kB T / m) in m/s."""
    if t_c <= -ZERO_C_IN_K:
        raise DomainError("temperature below absolute zero")
    m = mass_amu if mass_amu is not None else default_constants().mass_amu
    return math.sqrt(KB_OVER_AMU * (t_c + ZERO_C_IN_K) / m)


def doppler_width_rad_s(t_c: float, wavelength_nm: float,
                        mass_amu: float | None = None) -> float:
    """Gaussian FWHM of the Doppler-broadened line, angular frequency.

    FWHM = (2 pi / lambda) sqrt(8 ln2 kB T / m).
    """
    sigma_v = thermal_velocity_sigma(t_c, mass_amu)
    return (2 * math.pi / (wavelength_nm * 1e-9)) * math.sqrt(8 * math.log(2)) * sigma_v


def doppler_fwhm_ghz(t_c: float, wavelength_nm: float,
                     mass_amu: float | None = None) -> float:
    return doppler_width_rad_s(t_c, wavelength_nm, mass_amu) / (2 * math.pi) / 1e9


def _vapour_number_density(t_c: float) -> float:
    """Saturated Rb number density (m^-3) from the liquid-phase pressure fit."""
    t_k = t_c + ZERO_C_IN_K
    log10_p_torr = 15.88253 - 4529.635 / t_k + 0.00058663 * t_k - 2.99138 * math.log10(t_k)
    p_pa = 133.322 * 10.0 ** log10_p_torr
    return p_pa / (1.380649e-23 * t_k)


def optical_depth(t_c: float, cell_length_mm: float) -> float:
    """Line-centre single-pass depth; calibrated so (85 C, 6 mm) -> 200.

    Density follows the saturated vapour-pressure model; the line-centre cross
    section scales inversely with the Doppler width, hence the 1/sqrt(T)
    factor.  Absolute densities are internal to this function.
    """
    if not (20.0 <= t_c <= 150.0):
        raise DomainError("temperature outside the supported 20-150 C range")
    if cell_length_mm <= 0:
        raise DomainError("cell length must be positive")

    def raw(t, length):
        return _vapour_number_density(t) * (length * 1e-3) / math.sqrt(t + ZERO_C_IN_K)

    cal = _DEPTH_CALIBRATION_VALUE / raw(_DEPTH_CALIBRATION_T_C, _DEPTH_CALIBRATION_L_MM)
    return cal * raw(t_c, cell_length_mm)


def one_photon_spectrum(vapour: VapourParams, b_mt: float, polarization: str,
                        detunings_ghz, constants: AtomConstants | None = None
                        ) -> np.ndarray:
    """Transmission of a weak probe across the Zeeman-split line structure.

    T(D) = exp(-sum_k d w_k V(D - D_k)) with V a unit-peak Gaussian of the
    Doppler width, w_k the relative line strength weighted by the (uniform)
    thermal ground-state populations and normalized so the strongest line
    carries the full configured depth.
    """
    c = constants or default_constants()
    d_grid = np.atleast_1d(np.asarray(detunings_ghz, dtype=float))
    depth = vapour.depth()
    if depth == 0.0:
        return np.ones_like(d_grid)
    s12 = atomic.manifold_spec("5S1/2", c)
    p32 = atomic.manifold_spec("5P3/2", c)
    lines = atomic.transition_lines(s12, p32, b_mt, polarization)
    # uniform populations over the 8 ground sublevels: no optical pumping
    weights = np.array([ln.raw_strength for ln in lines])
    weights /= weights.max()
    centers = np.array([ln.detuning_ghz for ln in lines])
    fwhm = doppler_fwhm_ghz(vapour.temperature_c, c.wavelength_signal_nm, c.mass_amu)
    gauss_coef = 4 * math.log(2) / fwhm ** 2
    od = np.zeros_like(d_grid)
    for w, pos in zip(weights, centers):
        od += depth * w * np.exp(-gauss_coef * (d_grid - pos) ** 2)
    return np.exp(-od)


def two_photon_linewidth_mhz(vapour: VapourParams,
                             geometry: str = "counter",
                             constants: AtomConstants | None = None) -> float:
    """FWHM of a two-photon line: quadrature sum of the residual-Doppler,
    natural and field-inhomogeneity contributions (counter-propagating), or
    the sum-wavevector Doppler width (co-propagating)."""
    c = constants or default_constants()
    sigma_v = thermal_velocity_sigma(vapour.temperature_c, c.mass_amu)
    k_s = 2 * math.pi / (c.wavelength_signal_nm * 1e-9)
    k_c = 2 * math.pi / (c.wavelength_control_nm * 1e-9)
    if geometry == "counter":
        dk = abs(k_s - k_c)
        residual = dk * sigma_v * math.sqrt(8 * math.log(2)) / (2 * math.pi) / 1e6
        natural = c.d52.gamma_fwhm_mhz
        return math.sqrt(residual ** 2 + natural ** 2
                         + vapour.field_inhomogeneity_mhz ** 2)
    if geometry == "co":
        return (k_s + k_c) * sigma_v * math.sqrt(8 * math.log(2)) / (2 * math.pi) / 1e6
    raise DomainError("geometry must be 'counter' or 'co'")


def two_photon_spectrum(vapour: VapourParams, b_mt: float,
                        signal_pol: str, control_pol: str,
                        signal_detuning_ghz: float,
                        control_detunings_ghz,
                        geometry: str = "counter",
                        control_depth: float = 0.5,
                        constants: AtomConstants | None = None):
    """Signal transmission while the control is scanned at fixed signal carrier.

    Absorption features sit where signal_detuning + delta matches a two-photon
    line.  Counter-propagating lines carry the narrow residual-Doppler width;
    co-propagating ones the broad sum-wavevector width.  `control_depth` sets
    the peak optical depth of the strongest line (proportional to control
    power); zero gives flat transmission.  Returns (transmission, warning)
    where warning flags an intermediate detuning inside the Doppler width.
    """
    c = constants or default_constants()
    deltas = np.atleast_1d(np.asarray(control_detunings_ghz, dtype=float))
    gamma_ghz = doppler_fwhm_ghz(vapour.temperature_c, c.wavelength_signal_nm, c.mass_amu)
    warning = abs(signal_detuning_ghz) < gamma_ghz
    if control_depth == 0.0:
        return np.ones_like(deltas), warning
    window = (signal_detuning_ghz + deltas.min() - 1.0,
              signal_detuning_ghz + deltas.max() + 1.0)
    lines = atomic.two_photon_lines(
        b_mt, signal_pol, control_pol, total_window_ghz=window,
        reference_signal_detuning_ghz=signal_detuning_ghz, constants=c)
    grouped = atomic.group_two_photon_lines(lines)
    if not grouped:
        return np.ones_like(deltas), warning
    fwhm_ghz = two_photon_linewidth_mhz(vapour, geometry, c) * 1e-3
    coef = 4 * math.log(2) / fwhm_ghz ** 2
    smax = max(s for _, s, _ in grouped)
    od = np.zeros_like(deltas)
    for pos, strength, _ in grouped:
        delta_line = pos - signal_detuning_ghz
        od += control_depth * (strength / smax) * np.exp(-coef * (deltas - delta_line) ** 2)
    return np.exp(-od), warning


def residual_doppler_lifetime_ns(t_c: float, wavelength_signal_nm: float,
                                 wavelength_control_nm: float,
                                 geometry: str = "counter",
                                 mass_amu: float | None = None) -> float:
    """1/e dephasing time of the stored coherence, 1/(|dk| sigma_v).

    Counter-propagating beams nearly cancel the two-photon wavevector; for
    equal wavelengths the cancellation is perfect and the result unbounded
    (returned as inf).
    """
    sigma_v = thermal_velocity_sigma(t_c, mass_amu)
    k_s = 2 * math.pi / (wavelength_signal_nm * 1e-9)
    k_c = 2 * math.pi / (wavelength_control_nm * 1e-9)
    if geometry == "counter":
        dk = abs(k_s - k_c)
    elif geometry == "co":
        dk = k_s + k_c
    else:
        raise DomainError("geometry must be 'counter' or 'co'")
    if dk == 0.0:
        return math.inf
    return 1e9 / (dk * sigma_v)
