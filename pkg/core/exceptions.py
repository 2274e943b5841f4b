"""
Simulation Exceptions
=====================

Single exception hierarchy for the thermo-electromagnetic engine. Library
code raises these; only the command-line entry point turns them into exit
codes.

Author: Simulation Team
Version: 1.0.0
"""

from typing import List, Optional, Sequence, Tuple


class SimulationError(Exception):
    """Base exception for all simulation errors"""
    pass


class InvalidArgumentError(SimulationError, ValueError):
    """Raised when an operation receives arguments outside its domain"""
    pass


class MeshTaggingError(SimulationError):
    """Raised when boundary tags are inconsistent (disconnected ports, open loops)"""
    pass


class DegenerateMotionError(SimulationError):
    """Raised when the prescribed motion inverts or collapses material (det F <= 0)"""

    def __init__(self, message: str, location: Optional[Tuple[float, float]] = None,
                 t: Optional[float] = None):
        super().__init__(message)
        self.location = location
        self.t = t

    def __str__(self) -> str:
        base = super().__str__()
        if self.location is None:
            return base
        return f"{base} at (r={self.location[0]:.6g}, z={self.location[1]:.6g}), t={self.t}"


class MaterialRangeError(SimulationError):
    """Raised when a constitutive law leaves its admissible range"""
    pass


class NonConvergenceError(SimulationError):
    """Raised when Newton-Raphson does not reach the requested tolerance"""

    def __init__(self, message: str, history: Optional[Sequence[float]] = None,
                 final_residual: Optional[float] = None):
        super().__init__(message)
        self.history: List[float] = list(history or [])
        self.final_residual = final_residual


class OracleRangeError(SimulationError):
    """Raised when an analytic reference cannot be evaluated reliably"""
    pass


class ConfigError(SimulationError):
    """Raised for configuration syntax or semantic errors"""

    def __init__(self, message: str, line: Optional[int] = None,
                 key_path: Optional[str] = None):
        super().__init__(message)
        self.line = line
        self.key_path = key_path

    def __str__(self) -> str:
        base = super().__str__()
        if self.line is not None:
            return f"line {self.line}: {base}"
        if self.key_path is not None:
            return f"{self.key_path}: {base}"
        return base
