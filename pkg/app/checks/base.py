from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Protocol, Tuple, runtime_checkable
import logging

import numpy as np

from ..autodiff.gradcheck import ScalarFunction, grad_check
from ..core.config import settings
from ..data.scenes import derive_seed

logger = logging.getLogger(__name__)


@dataclass
class CheckReport:
    """Outcome of one gradient check over all its points"""

    name: str
    max_error: float
    parameter: Optional[str]
    points: int
    coordinates: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        where = f" at '{self.parameter}'" if self.parameter else ""
        return (
            f"{status} {self.name:<24} max rel. error {self.max_error:.3e}{where} "
            f"({self.points} points, {self.coordinates} coordinates, tol {self.tolerance:g})"
        )


@runtime_checkable
class GradientCheck(Protocol):
    """Protocol for gradient checks"""

    @property
    def name(self) -> str:
        """Name of the check"""
        ...

    def run(self, seed: int = 0, points: Optional[int] = None) -> CheckReport:
        """Run the check"""
        ...


class BaseGradientCheck(ABC):
    """Base class for gradient checks.

    Subclasses build a scalar function and a random point; ``run`` compares
    backward against central differences at ``points`` such points.
    """

    points: int = 100
    h: float = 1e-5
    max_coords: Optional[int] = None

    @property
    @abstractmethod
    def name(self) -> str:
        """Name of the check"""
        pass

    @abstractmethod
    def build(self, rng: np.random.Generator) -> Tuple[ScalarFunction, Dict[str, np.ndarray]]:
        """Scalar function of named leaves and the point to check it at"""
        pass

    def coords_for(self, index: int) -> Optional[int]:
        """Coordinates sampled per leaf at the ``index``-th point"""
        return self.max_coords

    def run(self, seed: int = 0, points: Optional[int] = None, tolerance: Optional[float] = None) -> CheckReport:
        points = self.points if points is None else points
        tolerance = settings.GRADCHECK_TOLERANCE if tolerance is None else tolerance
        rng = np.random.default_rng(derive_seed(seed, sum(self.name.encode("utf-8"))))
        worst, worst_name, coordinates = 0.0, None, 0
        for index in range(points):
            fn, point = self.build(rng)
            result = grad_check(fn, point, h=self.h, max_coords=self.coords_for(index), seed=derive_seed(seed, index))
            coordinates += result.checked
            if result.max_error >= worst:
                worst, worst_name = result.max_error, result.parameter
        report = CheckReport(self.name, worst, worst_name, points, coordinates, tolerance)
        if report.passed:
            logger.info(report.line())
        else:
            logger.warning(report.line())
        return report
