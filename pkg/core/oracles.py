"""
Oracles - Analytic and ODE Reference Solutions
===============================================

Independent references for verification. Nothing here uses the assembly
modules.

Features:
- Skin effect in an infinite straight cylinder (Bessel functions)
- DC port voltage and ohmic power of a uniform cylinder
- Adiabatic heating with temperature-dependent heat capacity
- Lumped-capacitance convection-radiation cooling

Author: Simulation Team
Version: 1.0.0
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import jve

from .exceptions import InvalidArgumentError, OracleRangeError

logger = logging.getLogger(__name__)

KELVIN_OFFSET = 273.15
SIGMA_SB = 5.670374419e-8
MAX_KAPPA_R = 500.0

Scalar = Union[float, Callable]


@dataclass
class OracleResult:
    """Reference values with the formula name, parameters and an error estimate"""
    name: str
    parameters: Dict
    t: np.ndarray
    values: np.ndarray
    error_estimate: float
    dense: Optional[Callable] = field(default=None, repr=False)

    def at(self, t) -> np.ndarray:
        """Reference value at arbitrary times inside the integrated interval"""
        if self.dense is None:
            return np.interp(t, self.t, self.values)
        return self.dense(t)[0]

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def to_dict(self) -> Dict:
        return {'name': self.name, 'parameters': self.parameters,
                'final': self.final, 'error_estimate': self.error_estimate}


# ============================================================================
# SKIN EFFECT
# ============================================================================

def skin_depth(omega: float, mu: float, sigma: float) -> float:
    """delta = sqrt(2 / (omega mu sigma))"""
    if not (omega > 0 and mu > 0 and sigma > 0):
        raise InvalidArgumentError("omega, mu and sigma must be positive")
    return float(np.sqrt(2.0 / (omega * mu * sigma)))


def _kappa(omega: float, mu: float, sigma: float, R: float) -> complex:
    if omega < 0 or mu <= 0 or sigma <= 0 or R <= 0:
        raise InvalidArgumentError("Need omega >= 0 and positive mu, sigma, R")
    kappa = np.sqrt(-1j * omega * mu * sigma)
    if abs(kappa) * R > MAX_KAPPA_R:
        raise OracleRangeError(f"|kappa R| = {abs(kappa) * R:.1f} exceeds {MAX_KAPPA_R}")
    return kappa


def _bessel_ratio(order: int, kappa: complex, r: np.ndarray, R: float) -> np.ndarray:
    """J_order(kappa r) / J_1(kappa R) using exponentially scaled Bessel functions"""
    num = jve(order, kappa * r)
    den = jve(1, kappa * R)
    return num / den * np.exp(np.abs((kappa * r).imag) - abs((kappa * R).imag))


def skin_effect_H(r, I: complex, omega: float, sigma: float, mu: float, R: float) -> np.ndarray:
    """
    H_theta(r) = I / (2 pi R) * J1(kappa r) / J1(kappa R), kappa^2 = -i omega mu sigma

    Raises:
        OracleRangeError: |kappa R| too large for a reliable evaluation
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > R * (1 + 1e-12)):
        raise InvalidArgumentError("Radius outside [0, R]")
    kappa = _kappa(omega, mu, sigma, R)
    if kappa == 0:
        return I * r / (2.0 * np.pi * R ** 2) + 0j
    return I / (2.0 * np.pi * R) * _bessel_ratio(1, kappa, r, R)


def skin_effect_H_tilde(r, I: complex, omega: float, sigma: float, mu: float, R: float) -> np.ndarray:
    """r * H_theta, the quantity carried by the nodal unknowns"""
    return np.asarray(r, dtype=float) * skin_effect_H(r, I, omega, sigma, mu, R)


def skin_effect_current_density(r, I: complex, omega: float, sigma: float, mu: float,
                                R: float) -> np.ndarray:
    """Axial current density J_z(r) = I kappa J0(kappa r) / (2 pi R J1(kappa R))"""
    r = np.asarray(r, dtype=float)
    kappa = _kappa(omega, mu, sigma, R)
    if kappa == 0:
        return np.full(r.shape, I / (np.pi * R ** 2), dtype=complex)
    return I * kappa / (2.0 * np.pi * R) * _bessel_ratio(0, kappa, r, R)


# ============================================================================
# DC CYLINDER
# ============================================================================

def dc_voltage(I: float, L: float, R: float, sigma: float) -> float:
    """V = I L / (sigma pi R^2)"""
    if not (L > 0 and R > 0 and sigma > 0):
        raise InvalidArgumentError("L, R and sigma must be positive")
    return I * L / (sigma * np.pi * R ** 2)


def ohmic_power(I: float, L: float, R: float, sigma: float) -> float:
    """Cycle-averaged Joule power of a uniform current with amplitude I"""
    return 0.5 * abs(I) * abs(dc_voltage(I, L, R, sigma))


# ============================================================================
# ODE ORACLES
# ============================================================================

def _callable(value: Scalar) -> Callable:
    if callable(value):
        return value
    constant = float(value)
    return lambda *_: constant


def adiabatic_heating(theta0: float, Q: Scalar, rho0: float, cp: Scalar, t_end: float,
                      t_eval=None, rtol: float = 1e-10) -> OracleResult:
    """
    Integrate rho0 cp(theta) dtheta/dt = Q

    Args:
        Q: constant source (W/m^3) or Q(t, theta)
        cp: constant or cp(theta)
    """
    if rho0 <= 0 or t_end < 0:
        raise InvalidArgumentError("Need rho0 > 0 and t_end >= 0")
    q_fn = _callable(Q)
    cp_fn = cp if callable(cp) else _callable(cp)

    def rhs(t, y):
        source = float(q_fn(t, y[0]))
        if source < 0:
            raise InvalidArgumentError("Joule source must be non-negative")
        return [source / (rho0 * float(cp_fn(y[0])))]

    t_eval = np.linspace(0.0, t_end, 201) if t_eval is None else np.asarray(t_eval, dtype=float)
    sol = solve_ivp(rhs, (0.0, t_end), [theta0], method='DOP853', t_eval=t_eval,
                    rtol=rtol, atol=rtol, dense_output=True)
    if not sol.success:
        raise OracleRangeError(f"ODE integration failed: {sol.message}")
    return OracleResult(name="adiabatic_heating",
                        parameters={'theta0': theta0, 'rho0': rho0, 't_end': t_end},
                        t=sol.t, values=sol.y[0], error_estimate=rtol * max(1.0, abs(sol.y[0][-1])),
                        dense=sol.sol)


def lumped_radiation_cooling(theta0: float, theta_rad: float, emissivity: float, rho0: float,
                             cp: Scalar, volume: float, area: float, t_end: float,
                             h: float = 0.0, theta_conv: Optional[float] = None,
                             t_eval=None, rtol: float = 1e-10) -> OracleResult:
    """
    Lumped body: rho0 cp V dtheta/dt = -A [sigma eps (T^4 - Tr^4) + h (theta - theta_conv)]

    Radiation uses absolute temperatures.
    """
    if not 0.0 <= emissivity <= 1.0:
        raise InvalidArgumentError(f"Emissivity must lie in [0, 1], got {emissivity}")
    if volume <= 0 or area <= 0:
        raise InvalidArgumentError("Volume and area must be positive")
    cp_fn = cp if callable(cp) else _callable(cp)
    theta_conv = theta_rad if theta_conv is None else theta_conv
    trk4 = (theta_rad + KELVIN_OFFSET) ** 4

    def rhs(t, y):
        tk = y[0] + KELVIN_OFFSET
        loss = SIGMA_SB * emissivity * (tk ** 4 - trk4) + h * (y[0] - theta_conv)
        return [-area * loss / (rho0 * float(cp_fn(y[0])) * volume)]

    t_eval = np.linspace(0.0, t_end, 201) if t_eval is None else np.asarray(t_eval, dtype=float)
    sol = solve_ivp(rhs, (0.0, t_end), [theta0], method='DOP853', t_eval=t_eval,
                    rtol=rtol, atol=rtol, dense_output=True)
    if not sol.success:
        raise OracleRangeError(f"ODE integration failed: {sol.message}")
    return OracleResult(name="lumped_radiation_cooling",
                        parameters={'theta0': theta0, 'theta_rad': theta_rad,
                                    'emissivity': emissivity, 'h': h},
                        t=sol.t, values=sol.y[0], error_estimate=rtol * max(1.0, abs(sol.y[0][-1])),
                        dense=sol.sol)
