"""
Verifier - Solver Against Reference Solutions
=============================================

Small verification runs that compare the finite element engine with the
analytic and ODE oracles. Used by ``run_simulation.py verify``.

Checks:
- dc: low-frequency port voltage against I L / (sigma pi R^2)
- skin: H~ on a mid-height radial line against the Bessel solution
- power: real port power against the integrated Joule density
- adiabatic: uniform-source heating against the integrated ODE
- radiation: well-conducting small body cooling against the lumped ODE

Author: Simulation Team
Version: 1.0.0
"""

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from core import oracles
from core.coupled_solver import newton_solve, step_count
from core.em_assembly import Port, PortSpec, reconstruct_current_density, solve_em_nonlinear
from core.geometry import FormulationMode, element_density_ratio, volume_geometry
from core.kinematics import DisplacementField, RadialStretchField, push_forward, zero_field
from core.materials import MU0, MaterialModel
from core.mesh import MeridionalMesh, ThermalTag, generate_rectangle_mesh
from core.thermal_assembly import ThermalBC, assemble_thermal_eulerian, assemble_thermal_lagrangian

logger = logging.getLogger(__name__)

BAR_RADIUS = 0.02875
BAR_LENGTH = 0.165
BENCHMARK_CURRENT = 35000.0


@dataclass
class CheckResult:
    """One oracle comparison"""
    check: str
    quantity: str
    reference: float
    computed: float
    rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.rel_error <= self.tolerance)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['passed'] = self.passed
        return data


def _relative(computed, reference) -> float:
    reference = np.asarray(reference)
    scale = np.linalg.norm(reference)
    return float(np.linalg.norm(np.asarray(computed) - reference) / scale) if scale > 0 else 0.0


def march_thermal(mesh: MeridionalMesh, mat: MaterialModel, bc: ThermalBC, theta0: float,
                  dt: float, t_end: float, source=None,
                  field: Optional[DisplacementField] = None,
                  mode: FormulationMode = FormulationMode.LAGRANGIAN,
                  lumped: bool = False) -> List[np.ndarray]:
    """
    Implicit-Euler march of the heat equation alone

    The body is held in the configuration given by ``field`` (at rest when
    omitted). Eulerian mode assembles on the pushed-forward mesh with the
    spatial density rho0 / det F.
    """
    field = field or zero_field()
    theta = np.full(mesh.num_nodes, float(theta0))
    history = [theta.copy()]
    for step in range(1, step_count(t_end, dt) + 1):
        t = step * dt
        theta_old = theta
        if mode is FormulationMode.EULERIAN:
            pushed = push_forward(mesh, field, t)
            ratio = element_density_ratio(mesh, field, t)

            def system(x, t=t, theta_old=theta_old, pushed=pushed, ratio=ratio):
                return assemble_thermal_eulerian(pushed, mat, theta_old, x, dt, source, bc,
                                                 t=t, density_ratio=ratio, lumped=lumped)
        else:
            def system(x, t=t, theta_old=theta_old):
                return assemble_thermal_lagrangian(mesh, field, t, mat, theta_old, x, dt,
                                                   source, bc, lumped=lumped)

        result = newton_solve(lambda x: system(x).residual, lambda x: system(x).jacobian.tocsc(),
                              theta_old, tol=1e-10, abs_tol=1e-12)
        theta = result.x
        history.append(theta.copy())
    return history


class Verifier:
    """Runs the verification checks and tabulates them"""

    def __init__(self, nr: int = 16, nz: int = 32):
        self.nr = nr
        self.nz = nz
        self.results: List[CheckResult] = []
        self.logger = logging.getLogger(f"{__name__}.Verifier")
        self.checks: Dict[str, Callable[[], List[CheckResult]]] = {
            'dc': self.check_dc,
            'skin': self.check_skin_effect,
            'power': self.check_power_balance,
            'adiabatic': self.check_adiabatic,
            'radiation': self.check_radiation,
        }

    # ------------------------------------------
    # Electromagnetic checks
    # ------------------------------------------
    def _bar(self, nr: Optional[int] = None, nz: Optional[int] = None) -> MeridionalMesh:
        return generate_rectangle_mesh(BAR_RADIUS, BAR_LENGTH, nr or self.nr, nz or self.nz)

    def _skin_case(self):
        """Linear material with |kappa R| = 6 at 500 Hz"""
        omega = 2.0 * np.pi * 500.0
        sigma = float(MaterialModel().sigma(20.0))
        mu = 36.0 / (BAR_RADIUS ** 2 * omega * sigma)
        mat = MaterialModel(constant_sigma=sigma, constant_mu=max(mu, MU0))
        mesh = self._bar(2 * self.nr, 2 * self.nz)
        theta = np.full(mesh.num_nodes, 20.0)
        ports = PortSpec((Port.current(1, BENCHMARK_CURRENT),))
        solution = solve_em_nonlinear(mesh, zero_field(), 0.0, FormulationMode.LAGRANGIAN,
                                      mat, theta, ports, omega)
        return mesh, mat, theta, omega, solution

    def check_dc(self) -> List[CheckResult]:
        omega = 2.0 * np.pi * 1e-3
        sigma = float(MaterialModel().sigma(20.0))
        mat = MaterialModel(constant_sigma=sigma, constant_mu=MU0)
        mesh = self._bar()
        theta = np.full(mesh.num_nodes, 20.0)
        ports = PortSpec((Port.current(1, BENCHMARK_CURRENT),))
        solution = solve_em_nonlinear(mesh, zero_field(), 0.0, FormulationMode.LAGRANGIAN,
                                      mat, theta, ports, omega)
        reference = oracles.dc_voltage(BENCHMARK_CURRENT, BAR_LENGTH, BAR_RADIUS, sigma)
        computed = abs(solution.port_voltages[1])
        return [CheckResult('dc', '|V1| (V)', reference, computed,
                            abs(computed - reference) / reference, 5e-3)]

    def check_skin_effect(self) -> List[CheckResult]:
        mesh, mat, theta, omega, solution = self._skin_case()
        mid = 0.5 * BAR_LENGTH
        line = np.where(np.isclose(mesh.nodes[:, 1], mid))[0]
        line = line[np.argsort(mesh.nodes[line, 0])]
        r = mesh.nodes[line, 0]
        sigma = float(mat.constant_sigma)
        reference = oracles.skin_effect_H_tilde(r, BENCHMARK_CURRENT, omega, sigma,
                                                float(mat.constant_mu), BAR_RADIUS)
        computed = solution.H[line]
        return [CheckResult('skin', 'H~ on mid-height line (L2)', float(np.linalg.norm(reference)),
                            float(np.linalg.norm(computed)), _relative(computed, reference), 2e-2)]

    def check_power_balance(self) -> List[CheckResult]:
        mesh, mat, theta, omega, solution = self._skin_case()
        post = reconstruct_current_density(mesh, zero_field(), 0.0, FormulationMode.LAGRANGIAN,
                                           mat, theta, solution.H)
        reference = post.P_diss
        computed = solution.port_power.real
        return [CheckResult('power', 'Re S vs P_diss (W)', reference, computed,
                            abs(computed - reference) / reference, 1e-2)]

    # ------------------------------------------
    # Thermal checks
    # ------------------------------------------
    def check_adiabatic(self, Q: float = 5e7, dt: float = 0.05, t_end: float = 20.0) -> List[CheckResult]:
        mat = MaterialModel()
        mesh = generate_rectangle_mesh(BAR_RADIUS, BAR_LENGTH, 2, 4)
        history = march_thermal(mesh, mat, ThermalBC(), 20.0, dt, t_end, source=Q)
        reference = oracles.adiabatic_heating(20.0, Q, mat.rho0, mat.cp, t_end).final
        computed = float(np.mean(history[-1]))
        return [CheckResult('adiabatic', 'theta(t_end) (C)', reference, computed,
                            abs(computed - reference) / reference, 1e-3)]

    def check_radiation(self, dt: float = 0.25, t_end: float = 60.0,
                        mode: FormulationMode = FormulationMode.LAGRANGIAN,
                        stretch: float = 0.0) -> List[CheckResult]:
        """
        Radiative cooling of a small, well-conducting cylinder

        With a radial stretch the body is held at radius (1 + stretch) R while
        its mass stays rho0 pi R^2 L, so only the radiating area grows.
        """
        R, L = 0.01, 0.02
        mat = MaterialModel(constant_k=1e4)
        sides = {side: ThermalTag.CONVRAD for side in ('bottom', 'right', 'top')}
        mesh = generate_rectangle_mesh(R, L, 4, 8, thermal_sides=sides)
        field = RadialStretchField(stretch) if stretch else zero_field()
        bc = ThermalBC(emissivity=0.8, theta_rad=20.0)
        history = march_thermal(mesh, mat, bc, 800.0, dt, t_end, field=field, mode=mode)
        radius = (1.0 + stretch) * R
        reference = oracles.lumped_radiation_cooling(
            800.0, 20.0, 0.8, mat.rho0, mat.cp, volume=np.pi * R ** 2 * L,
            area=2.0 * np.pi * radius * L + 2.0 * np.pi * radius ** 2, t_end=t_end).final
        geom = volume_geometry(mesh, field, t_end, mode)
        mass = geom.capacity * geom.weights
        computed = float(np.sum(geom.interpolate(history[-1]) * mass) / np.sum(mass))
        return [CheckResult('radiation', f'mean theta(t_end) (C), {mode}', reference, computed,
                            abs(computed - reference) / reference, 1e-2)]

    # ------------------------------------------
    # Driver
    # ------------------------------------------
    def run(self, names: Optional[Sequence[str]] = None) -> pd.DataFrame:
        """Run the named checks (all by default) and return one row per comparison"""
        names = list(names) if names else list(self.checks)
        unknown = [n for n in names if n not in self.checks]
        if unknown:
            raise KeyError(f"Unknown checks {unknown}; available: {sorted(self.checks)}")
        self.results = []
        for name in names:
            self.logger.info(f"Running check '{name}'")
            for result in self.checks[name]():
                status = "passed" if result.passed else "FAILED"
                self.logger.info(f"  {result.quantity}: reference {result.reference:.6g}, "
                                 f"computed {result.computed:.6g}, error {result.rel_error:.2e} ({status})")
                self.results.append(result)
        return pd.DataFrame([r.to_dict() for r in self.results])

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)
