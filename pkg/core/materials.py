"""
Materials - Constitutive Laws of the Upset Steel Bar
=====================================================

Temperature-dependent electrical conductivity, thermal conductivity and
specific heat, constant reference density, and the saturating magnetic
permeability with a Curie cutoff. Every law comes with its derivative for
the Newton Jacobian.

Features:
- Closed-form laws with configurable coefficients
- Temperature clamping to the fitted range, logged once per instance
- Constant-coefficient overrides for linear verification runs
- B-H curves and property tables as pandas DataFrames

Temperatures are in Celsius throughout; only the permeability law converts
to Kelvin internally.

Author: Simulation Team
Version: 1.0.0
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import erf

from .exceptions import InvalidArgumentError, MaterialRangeError

logger = logging.getLogger(__name__)

MU0 = 4.0e-7 * np.pi
KELVIN_OFFSET = 273.15


@dataclass
class MaterialModel:
    """
    Steel constitutive model

    Attributes:
        resistivity_coeffs: (c2, c1, c0) of 1/sigma = c2*T^2 + c1*T + c0
        conductivity_coeffs: quartic k(T), highest power first
        cp_gaussians: (amplitude, center, width) triples summed for cp(T)
        rho0: reference density (kg/m^3)
        mu_a, mu_b: saturation law mu = mu0 + f(T) / (a + b|H|)
        curie_temperature: f vanishes at and above this temperature
        reference_temperature: f equals 1 at this temperature
        clamp_range: sigma, k and cp are evaluated at T clamped to this range
        constant_*: override the corresponding law with a constant
    """
    resistivity_coeffs: Tuple[float, float, float] = (-4.3306e-13, 1.0839e-9, 2.0170e-7)
    conductivity_coeffs: Tuple[float, ...] = (-2.7834e-11, 1.1045e-7, -1.3658e-4, 0.04639, 34.0140)
    cp_gaussians: Tuple[Tuple[float, float, float], ...] = (
        (660.9, 723.3, 23.93),
        (288.9, 697.6, 133.5),
        (657.1, 908.1, 1497.0),
    )
    rho0: float = 7799.0
    mu0: float = MU0
    mu_a: float = 2532.35
    mu_b: float = 0.49
    curie_temperature: float = 748.69
    reference_temperature: float = 23.5
    clamp_range: Tuple[float, float] = (0.0, 1500.0)
    constant_sigma: Optional[float] = None
    constant_mu: Optional[float] = None
    constant_k: Optional[float] = None
    constant_cp: Optional[float] = None
    _clamp_reported: bool = field(default=False, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.logger = logging.getLogger(f"{__name__}.MaterialModel")
        if self.rho0 <= 0:
            raise InvalidArgumentError(f"rho0 must be positive, got {self.rho0}")
        for name in ("constant_sigma", "constant_k", "constant_cp"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise InvalidArgumentError(f"{name} must be positive, got {value}")
        if self.constant_mu is not None and self.constant_mu < self.mu0:
            raise InvalidArgumentError(f"constant_mu must be at least mu0, got {self.constant_mu}")
        if self.mu_a <= 0 or self.mu_b < 0:
            raise InvalidArgumentError("Saturation parameters need a > 0 and b >= 0")

    # ========================================================================
    # TEMPERATURE CLAMPING
    # ========================================================================

    def _clamp(self, theta) -> Tuple[np.ndarray, np.ndarray]:
        """Clamped temperatures and the mask of points inside the fitted range"""
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.clamp_range
        inside = (theta >= lo) & (theta <= hi)
        if not np.all(inside) and not self._clamp_reported:
            self._clamp_reported = True
            self.logger.warning(
                f"Temperature outside [{lo:g}, {hi:g}] C (min {np.min(theta):.2f}, "
                f"max {np.max(theta):.2f}); material laws evaluated at the clamped value")
        return np.clip(theta, lo, hi), inside

    # ========================================================================
    # ELECTRICAL CONDUCTIVITY
    # ========================================================================

    def _resistivity(self, theta: np.ndarray) -> np.ndarray:
        c2, c1, c0 = self.resistivity_coeffs
        rho_e = (c2 * theta + c1) * theta + c0
        if np.any(rho_e <= 0.0):
            raise MaterialRangeError("Electrical resistivity is not positive in the evaluated range")
        return rho_e

    def sigma(self, theta) -> np.ndarray:
        """Electrical conductivity (S/m)"""
        if self.constant_sigma is not None:
            return np.full(np.shape(theta), float(self.constant_sigma))
        t, _ = self._clamp(theta)
        return 1.0 / self._resistivity(t)

    def dsigma(self, theta) -> np.ndarray:
        """d sigma / d theta"""
        if self.constant_sigma is not None:
            return np.zeros(np.shape(theta))
        t, inside = self._clamp(theta)
        c2, c1, _ = self.resistivity_coeffs
        rho_e = self._resistivity(t)
        return np.where(inside, -(2.0 * c2 * t + c1) / rho_e ** 2, 0.0)

    # ========================================================================
    # THERMAL PROPERTIES
    # ========================================================================

    def k(self, theta) -> np.ndarray:
        """Thermal conductivity (W/(m K))"""
        if self.constant_k is not None:
            return np.full(np.shape(theta), float(self.constant_k))
        t, _ = self._clamp(theta)
        return np.polyval(self.conductivity_coeffs, t)

    def dk(self, theta) -> np.ndarray:
        if self.constant_k is not None:
            return np.zeros(np.shape(theta))
        t, inside = self._clamp(theta)
        return np.where(inside, np.polyval(np.polyder(self.conductivity_coeffs), t), 0.0)

    def cp(self, theta) -> np.ndarray:
        """Specific heat (J/(kg K))"""
        if self.constant_cp is not None:
            return np.full(np.shape(theta), float(self.constant_cp))
        t, _ = self._clamp(theta)
        total = np.zeros(t.shape)
        for amplitude, center, width in self.cp_gaussians:
            total = total + amplitude * np.exp(-((t - center) / width) ** 2)
        return total

    def dcp(self, theta) -> np.ndarray:
        if self.constant_cp is not None:
            return np.zeros(np.shape(theta))
        t, inside = self._clamp(theta)
        total = np.zeros(t.shape)
        for amplitude, center, width in self.cp_gaussians:
            x = (t - center) / width
            total = total - 2.0 * x / width * amplitude * np.exp(-x ** 2)
        return np.where(inside, total, 0.0)

    def _gaussian_heat(self, lower, upper) -> np.ndarray:
        """Exact integral of the Gaussian cp sum from lower to upper"""
        total = np.zeros(np.broadcast(lower, upper).shape)
        for amplitude, center, width in self.cp_gaussians:
            scale = 0.5 * np.sqrt(np.pi) * amplitude * width
            total = total + scale * (erf((upper - center) / width) - erf((lower - center) / width))
        return total

    def enthalpy(self, theta) -> np.ndarray:
        """
        Specific sensible heat relative to 0 C (J/kg): integral of cp from 0 to theta

        Outside the fitted range cp is held at its clamped value, matching cp().
        """
        theta = np.asarray(theta, dtype=float)
        if self.constant_cp is not None:
            return float(self.constant_cp) * theta
        lo, hi = self.clamp_range
        cp_lo, cp_hi = (float(v) for v in self.cp(np.array([lo, hi])))

        def antiderivative(x):
            x = np.asarray(x, dtype=float)
            inner = self._gaussian_heat(lo, np.clip(x, lo, hi))
            return inner + cp_lo * np.minimum(x - lo, 0.0) + cp_hi * np.maximum(x - hi, 0.0)

        return antiderivative(theta) - antiderivative(0.0)

    # ========================================================================
    # MAGNETIC PERMEABILITY
    # ========================================================================

    def _kelvin_span(self) -> Tuple[float, float]:
        tc = self.curie_temperature + KELVIN_OFFSET
        t0 = self.reference_temperature + KELVIN_OFFSET
        return tc * tc, tc * tc - t0 * t0

    def f(self, theta) -> np.ndarray:
        """Temperature factor of the permeability law, 1 at the reference temperature and 0 from Curie on"""
        theta = np.asarray(theta, dtype=float)
        tc2, span = self._kelvin_span()
        tk = theta + KELVIN_OFFSET
        radicand = np.maximum((tc2 - tk * tk) / span, 0.0)
        return np.where(theta < self.curie_temperature, radicand ** 0.25, 0.0)

    def df(self, theta) -> np.ndarray:
        """One-sided derivative of f; zero at and above Curie, radicand floored at 1e-8"""
        theta = np.asarray(theta, dtype=float)
        tc2, span = self._kelvin_span()
        tk = theta + KELVIN_OFFSET
        radicand = np.maximum((tc2 - tk * tk) / span, 1e-8)
        slope = 0.25 * radicand ** -0.75 * (-2.0 * tk / span)
        return np.where(theta < self.curie_temperature, slope, 0.0)

    def mu(self, H_mod, theta) -> np.ndarray:
        """Magnetic permeability (H/m) at field modulus |H| (A/m)"""
        return self.mu_derivatives(H_mod, theta)[0]

    def mu_derivatives(self, H_mod, theta) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Permeability with its partial derivatives

        Returns:
            (mu, dmu/d|H|, dmu/dtheta)
        """
        H_mod = np.asarray(H_mod, dtype=float)
        theta = np.asarray(theta, dtype=float)
        shape = np.broadcast(H_mod, theta).shape
        if self.constant_mu is not None:
            return (np.full(shape, float(self.constant_mu)), np.zeros(shape), np.zeros(shape))
        if np.any(H_mod < 0.0):
            raise InvalidArgumentError("Field modulus must be non-negative")
        denom = self.mu_a + self.mu_b * H_mod
        fv = self.f(theta)
        mu = self.mu0 + fv / denom
        dmu_dH = -fv * self.mu_b / denom ** 2
        dmu_dtheta = self.df(theta) / denom
        return (np.broadcast_to(mu, shape).copy(), np.broadcast_to(dmu_dH, shape).copy(),
                np.broadcast_to(dmu_dtheta, shape).copy())

    def relative_permeability(self, H_mod, theta) -> np.ndarray:
        return self.mu(H_mod, theta) / self.mu0

    # ========================================================================
    # TABLES
    # ========================================================================

    def bh_curve(self, theta: float, H: Iterable[float]) -> pd.DataFrame:
        """B-H curve at one temperature: columns H, B, mu_r"""
        H = np.asarray(list(H), dtype=float)
        mu = self.mu(H, theta)
        return pd.DataFrame({"H": H, "B": mu * H, "mu_r": mu / self.mu0})

    def property_table(self, thetas: Iterable[float]) -> pd.DataFrame:
        """sigma, k, cp and the zero-field relative permeability against temperature"""
        t = np.asarray(list(thetas), dtype=float)
        return pd.DataFrame({
            "theta": t,
            "sigma": self.sigma(t),
            "k": self.k(t),
            "cp": self.cp(t),
            "mu_r": self.relative_permeability(np.zeros_like(t), t),
        })

    # ========================================================================
    # SERIALIZATION
    # ========================================================================

    def to_dict(self) -> Dict:
        data = asdict(self)
        data.pop("_clamp_reported", None)
        for key, value in list(data.items()):
            if isinstance(value, tuple):
                data[key] = [list(v) if isinstance(v, tuple) else v for v in value]
        return data

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> 'MaterialModel':
        """Build from an override table; missing keys keep the defaults"""
        data = dict(data or {})
        known = {f.name for f in fields(cls) if f.init}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"Unknown material keys: {sorted(unknown)}")
        for key in ("resistivity_coeffs", "conductivity_coeffs", "clamp_range"):
            if key in data:
                data[key] = tuple(float(v) for v in data[key])
        if "cp_gaussians" in data:
            data["cp_gaussians"] = tuple(tuple(float(v) for v in g) for g in data["cp_gaussians"])
        return cls(**data)

    @property
    def is_linear(self) -> bool:
        return all(v is not None for v in (self.constant_sigma, self.constant_mu,
                                           self.constant_k, self.constant_cp))

    def __repr__(self) -> str:
        overrides = {n: getattr(self, n) for n in ("constant_sigma", "constant_mu",
                                                   "constant_k", "constant_cp")
                     if getattr(self, n) is not None}
        return f"MaterialModel(rho0={self.rho0}, curie={self.curie_temperature}, overrides={overrides})"
