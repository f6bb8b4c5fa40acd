from typing import Dict, List, Optional
from functools import wraps
import logging

from .base import BaseGradientCheck, CheckReport, GradientCheck

logger = logging.getLogger(__name__)


def singleton(cls):
    """Share one instance of ``cls`` across the process"""
    instance = None

    @wraps(cls)
    def shared(*args, **kwargs):
        nonlocal instance
        if instance is None:
            instance = cls(*args, **kwargs)
        return instance

    return shared


@singleton
class GradientCheckRegistry:
    """Named gradient checks, run in registration order by ``gradcheck``"""

    def __init__(self):
        self._checks: Dict[str, BaseGradientCheck] = {}

    def register(self, check: BaseGradientCheck, replace: bool = False) -> None:
        """Add a check under its name.

        Args:
            check (BaseGradientCheck): Check to add
            replace (bool): Allow replacing a check with the same name

        Raises:
            ValueError: If the object is not a gradient check or the name is taken
        """
        if not isinstance(check, GradientCheck):
            raise ValueError(f"{type(check).__name__} is not a gradient check")
        if check.name in self._checks and not replace:
            raise ValueError(f"Gradient check '{check.name}' is already registered")
        self._checks[check.name] = check
        logger.debug(f"Registered gradient check {check.name} ({type(check).__name__})")

    def unregister(self, name: str) -> BaseGradientCheck:
        """Remove a check and return it"""
        check = self.get_check(name)
        del self._checks[name]
        logger.debug(f"Unregistered gradient check {name}")
        return check

    def get_check(self, name: str) -> BaseGradientCheck:
        """Look up a check by name"""
        try:
            return self._checks[name]
        except KeyError:
            available = ", ".join(self._checks)
            raise ValueError(f"Unknown gradient check '{name}' (available: {available})") from None

    def run_all(
        self, seed: int = 0, points: Optional[int] = None, only: Optional[List[str]] = None
    ) -> List[CheckReport]:
        """Run the selected (default: all) checks in registration order.

        Every selected name is resolved before the first check runs.
        """
        selected = [self.get_check(name) for name in only] if only else list(self._checks.values())
        reports = [check.run(seed=seed, points=points) for check in selected]
        failed = [report.name for report in reports if not report.passed]
        if failed:
            logger.warning(f"{len(failed)} of {len(reports)} gradient checks failed: {', '.join(failed)}")
        return reports

    @property
    def checks(self) -> Dict[str, BaseGradientCheck]:
        """Registered checks by name"""
        return self._checks.copy()


registry = GradientCheckRegistry()
