"""
Toolkit settings
Tolerances and size caps shared by every module, overridable from the
environment and from the tolerances section of a JSON config
"""

import logging
import os
from dataclasses import dataclass, fields, asdict
from typing import Dict, Any

logger = logging.getLogger(__name__)

MAX_DIMENSION_ENV = "CFQ_MAX_DIMENSION"


@dataclass
class ToolkitSettings:
    """Central tolerance table"""

    prune_threshold: float = 1e-14
    max_dimension: int = 4096
    projector_tolerance: float = 1e-12
    closure_tolerance: float = 1e-10
    integer_spectrum_tolerance: float = 1e-9
    null_space_threshold: float = 1e-9
    kernel_tolerance: float = 1e-12
    bose_fermi_tolerance: float = 1e-10
    unitarity_tolerance: float = 1e-12
    identity_resolution_tolerance: float = 1e-13
    trotter_slope: float = -1.0
    trotter_slope_window: float = 0.2

    @classmethod
    def from_env(cls) -> "ToolkitSettings":
        """
        Build settings from defaults and environment overrides

        Returns:
            ToolkitSettings instance
        """
        instance = cls()
        raw = os.environ.get(MAX_DIMENSION_ENV)
        if raw:
            try:
                instance.max_dimension = int(raw)
            except ValueError:
                raise ValueError(f"{MAX_DIMENSION_ENV} must be an integer, got {raw!r}")
            if instance.max_dimension < 1:
                raise ValueError(f"{MAX_DIMENSION_ENV} must be positive, got {raw!r}")
        return instance

    def update(self, values: Dict[str, Any]) -> None:
        """
        Override tolerances from a mapping

        Args:
            values: Mapping of setting name to new value
        """
        known = {f.name: f.type for f in fields(self)}
        for key, value in values.items():
            if key not in known:
                raise KeyError(f"Unknown tolerance setting: {key}")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError(f"Tolerance {key} must be numeric, got {value!r}")
            cast = int if getattr(self, key).__class__ is int else float
            setattr(self, key, cast(value))
            logger.debug("setting %s = %r", key, value)

    def reset(self) -> None:
        """Restore defaults and environment overrides"""
        fresh = ToolkitSettings.from_env()
        for key, value in asdict(fresh).items():
            setattr(self, key, value)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


# Singleton instance
settings = ToolkitSettings.from_env()
