"""
Kinematics - Prescribed Axisymmetric Motion
============================================

Evaluates the prescribed displacement u(p, t) of the reference meridional
section and every kinematic tensor the Lagrangian formulations need:

- F2: the 2x2 meridional block of the deformation gradient, I + Grad u
- detF3: determinant of the full 3x3 gradient, (1 + u_r/r_m) * det F2
- N: the pull-back tensor through which azimuthal curls are expressed
  in reference coordinates
- r_current: current radius r_m + u_r

Fields are pure functions of (p, t) scaled by a ramp schedule s(t). The
ratio u_r/r_m is always supplied analytically so nothing is divided by r_m
on the axis.

Author: Simulation Team
Version: 1.0.0
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .exceptions import DegenerateMotionError, InvalidArgumentError
from .mesh import MeridionalMesh

logger = logging.getLogger(__name__)


# ============================================================================
# RAMP SCHEDULES
# ============================================================================

class RampSchedule(ABC):
    """Time profile s(t) in [0, 1] multiplying the displacement shape"""

    @abstractmethod
    def value(self, t: float) -> float:
        ...

    @abstractmethod
    def rate(self, t: float) -> float:
        """ds/dt"""
        ...

    def __call__(self, t: float) -> float:
        return self.value(t)


@dataclass(frozen=True)
class LinearRamp(RampSchedule):
    """s(t) = clamp(t / T, 0, 1)"""
    duration: float

    def value(self, t: float) -> float:
        return float(min(max(t / self.duration, 0.0), 1.0))

    def rate(self, t: float) -> float:
        return 1.0 / self.duration if 0.0 <= t < self.duration else 0.0

    def __str__(self) -> str:
        return f"linear({self.duration:g})"


@dataclass(frozen=True)
class ConstantRamp(RampSchedule):
    """s(t) = level for all t (the stationary reading of the motion)"""
    level: float = 1.0

    def value(self, t: float) -> float:
        return float(self.level)

    def rate(self, t: float) -> float:
        return 0.0

    def __str__(self) -> str:
        return f"constant({self.level:g})"


def ramp_linear(T: float) -> LinearRamp:
    if not T > 0:
        raise InvalidArgumentError(f"Ramp duration must be positive, got {T}")
    return LinearRamp(float(T))


def ramp_constant(s: float = 1.0) -> ConstantRamp:
    if not 0.0 <= s <= 1.0:
        raise InvalidArgumentError(f"Constant ramp level must lie in [0, 1], got {s}")
    return ConstantRamp(float(s))


# ============================================================================
# DISPLACEMENT FIELDS
# ============================================================================

@dataclass
class DisplacementSample:
    """Displacement components and partials at a batch of points (meters)"""
    ur: np.ndarray
    uz: np.ndarray
    ur_over_r: np.ndarray
    dur_dr: np.ndarray
    dur_dz: np.ndarray
    duz_dr: np.ndarray
    duz_dz: np.ndarray

    def scaled(self, s: float) -> 'DisplacementSample':
        return DisplacementSample(*(s * np.asarray(v) for v in (
            self.ur, self.uz, self.ur_over_r, self.dur_dr,
            self.dur_dz, self.duz_dr, self.duz_dz)))


class DisplacementField(ABC):
    """Prescribed motion u(p, t) = s(t) * shape(p)"""

    name = "field"

    def __init__(self, ramp: RampSchedule):
        self.ramp = ramp

    @abstractmethod
    def shape(self, r: np.ndarray, z: np.ndarray) -> DisplacementSample:
        """Displacement at full ramp"""
        ...

    def evaluate(self, r, z, t: float) -> DisplacementSample:
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        return self.shape(r, z).scaled(self.ramp.value(t))

    def velocity(self, r, z, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Material velocity du/dt = ds/dt * shape"""
        sample = self.shape(np.asarray(r, dtype=float), np.asarray(z, dtype=float))
        rate = self.ramp.rate(t)
        return rate * sample.ur, rate * sample.uz

    def __repr__(self) -> str:
        return f"{type(self).__name__}(ramp={self.ramp})"


class ZeroField(DisplacementField):
    """No motion: the current configuration is the reference one"""

    name = "zero"

    def __init__(self, ramp: RampSchedule = ConstantRamp(1.0)):
        super().__init__(ramp)

    def shape(self, r, z) -> DisplacementSample:
        zero = np.zeros(np.broadcast(r, z).shape)
        return DisplacementSample(zero, zero, zero, zero, zero, zero, zero)


class RadialStretchField(DisplacementField):
    """u_r = c * r_m, u_z = 0"""

    name = "radial_stretch"

    def __init__(self, c: float, ramp: RampSchedule = ConstantRamp(1.0)):
        super().__init__(ramp)
        if not c > -1.0:
            raise InvalidArgumentError(f"Stretch coefficient must exceed -1, got {c}")
        self.c = float(c)

    def shape(self, r, z) -> DisplacementSample:
        r, z = np.broadcast_arrays(r, z)
        zero = np.zeros(r.shape)
        c = np.full(r.shape, self.c)
        return DisplacementSample(ur=self.c * r, uz=zero, ur_over_r=c, dur_dr=c.copy(),
                                  dur_dz=zero, duz_dr=zero, duz_dz=zero)

    def __repr__(self) -> str:
        return f"RadialStretchField(c={self.c}, ramp={self.ramp})"


class UpsettingBenchmarkField(DisplacementField):
    """
    Bulging of an electrically upset bar: u_r = r_m * g(z_m), u_z = 0

    g is a cubic near the anvil (z_m <= 0.02 m) and a sum of three Gaussians
    above it. Lengths in meters.
    """

    name = "upsetting_benchmark"

    Z_SWITCH = 0.02
    CUBIC = (-188.2593, 6.1464)
    GAUSSIANS = (
        (1.0793, 0.0293, 0.03104),
        (-18.4974, -0.03324, 0.01705),
        (1.0779, 0.4363, 1.263),
    )

    def __init__(self, ramp: RampSchedule = ConstantRamp(1.0)):
        super().__init__(ramp)

    @classmethod
    def profile(cls, z) -> Tuple[np.ndarray, np.ndarray]:
        """g(z) and dg/dz for both branches of the piecewise law"""
        z = np.asarray(z, dtype=float)
        c3, c2 = cls.CUBIC
        g_low = 1e3 * (c3 * z + c2) * z ** 2
        dg_low = 1e3 * (3.0 * c3 * z ** 2 + 2.0 * c2 * z)

        g_high = np.full(z.shape, -1.0)
        dg_high = np.zeros(z.shape)
        for amplitude, center, width in cls.GAUSSIANS:
            x = (z - center) / width
            bump = amplitude * np.exp(-x ** 2)
            g_high = g_high + bump
            dg_high = dg_high - 2.0 * x / width * bump

        low = z <= cls.Z_SWITCH
        return np.where(low, g_low, g_high), np.where(low, dg_low, dg_high)

    def shape(self, r, z) -> DisplacementSample:
        r, z = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(z, dtype=float))
        g, dg = self.profile(z)
        zero = np.zeros(r.shape)
        return DisplacementSample(ur=r * g, uz=zero, ur_over_r=g, dur_dr=g.copy(),
                                  dur_dz=r * dg, duz_dr=zero, duz_dz=zero)


def upsetting_benchmark_field(ramp: RampSchedule = ConstantRamp(1.0)) -> UpsettingBenchmarkField:
    return UpsettingBenchmarkField(ramp)


def radial_stretch_field(c: float, ramp: RampSchedule = ConstantRamp(1.0)) -> RadialStretchField:
    return RadialStretchField(c, ramp)


def zero_field() -> ZeroField:
    return ZeroField()


# ============================================================================
# KINEMATIC TENSORS
# ============================================================================

@dataclass
class KinematicPoint:
    """
    Kinematic tensors at a batch of points (leading axes follow the input)

    Attributes:
        F2: (..., 2, 2) meridional deformation gradient
        detF2: det F2
        detF3: determinant of the full gradient, radial_factor * detF2
        N: (..., 2, 2) curl pull-back tensor
        radial_factor: 1 + u_r / r_m
        r_current: r_m + u_r (m)
        z_current: z_m + u_z (m)
    """
    F2: np.ndarray
    detF2: np.ndarray
    detF3: np.ndarray
    N: np.ndarray
    radial_factor: np.ndarray
    r_current: np.ndarray
    z_current: np.ndarray

    def finv_t(self) -> np.ndarray:
        """F2^{-T}, mapping reference gradients to current gradients"""
        F = self.F2
        out = np.empty_like(F)
        out[..., 0, 0] = F[..., 1, 1]
        out[..., 0, 1] = -F[..., 1, 0]
        out[..., 1, 0] = -F[..., 0, 1]
        out[..., 1, 1] = F[..., 0, 0]
        return out / self.detF2[..., None, None]


def eval_kinematics(field: DisplacementField, points: np.ndarray, t: float,
                    check: bool = True) -> KinematicPoint:
    """
    Evaluate F2, det F, N and the current position at reference points

    Args:
        field: prescribed displacement
        points: (..., 2) reference coordinates (r_m, z_m)
        t: time (s)
        check: raise on det F <= 0

    Raises:
        DegenerateMotionError: det F <= 0 at some point
    """
    points = np.asarray(points, dtype=float)
    r, z = points[..., 0], points[..., 1]
    u = field.evaluate(r, z, t)

    F2 = np.empty(r.shape + (2, 2))
    F2[..., 0, 0] = 1.0 + u.dur_dr
    F2[..., 0, 1] = u.dur_dz
    F2[..., 1, 0] = u.duz_dr
    F2[..., 1, 1] = 1.0 + u.duz_dz
    detF2 = F2[..., 0, 0] * F2[..., 1, 1] - F2[..., 0, 1] * F2[..., 1, 0]
    radial_factor = 1.0 + u.ur_over_r
    detF3 = radial_factor * detF2

    N = np.empty_like(F2)
    N[..., 0, 0] = u.dur_dz
    N[..., 0, 1] = -1.0 - u.dur_dr
    N[..., 1, 0] = 1.0 + u.duz_dz
    N[..., 1, 1] = -u.duz_dr

    if check:
        bad = (detF3 <= 0.0) | (detF2 <= 0.0) | (radial_factor <= 0.0)
        if np.any(bad):
            idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
            location = (float(r[idx]), float(z[idx]))
            raise DegenerateMotionError(
                f"Degenerate motion: det F = {float(detF3[idx]):.3e}", location=location, t=t)

    return KinematicPoint(F2=F2, detF2=detF2, detF3=detF3, N=N, radial_factor=radial_factor,
                          r_current=r + u.ur, z_current=z + u.uz)


def full_deformation_gradient(field: DisplacementField, points: np.ndarray, t: float) -> np.ndarray:
    """The 3x3 deformation gradient in the cylindrical basis (e_r, e_theta, e_z)"""
    points = np.asarray(points, dtype=float)
    u = field.evaluate(points[..., 0], points[..., 1], t)
    F = np.zeros(points.shape[:-1] + (3, 3))
    F[..., 0, 0] = 1.0 + u.dur_dr
    F[..., 0, 2] = u.dur_dz
    F[..., 1, 1] = 1.0 + u.ur_over_r
    F[..., 2, 0] = u.duz_dr
    F[..., 2, 2] = 1.0 + u.duz_dz
    return F


def push_forward(mesh: MeridionalMesh, field: DisplacementField, t: float) -> MeridionalMesh:
    """
    Mesh whose nodes follow the particles: x = p + u(p, t)

    Raises:
        DegenerateMotionError: a triangle is inverted after the motion
    """
    u = field.evaluate(mesh.nodes[:, 0], mesh.nodes[:, 1], t)
    moved = mesh.nodes + np.column_stack([u.ur, u.uz])
    pushed = mesh.with_nodes(moved)
    areas = pushed.signed_areas()
    if np.any(areas <= 0.0):
        bad = int(np.argmin(areas))
        c = mesh.centroids()[bad]
        raise DegenerateMotionError(f"Triangle {bad} inverted by the motion",
                                    location=(float(c[0]), float(c[1])), t=t)
    return pushed
