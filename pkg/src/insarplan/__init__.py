"""Formation and resource planning for a two-UAV bistatic InSAR mission."""

__version__ = "0.1.0"

from .scenario import DerivedConstants, ScenarioConfig, derive_constants, load_scenario  # noqa: E402

__all__ = ["DerivedConstants", "ScenarioConfig", "derive_constants", "load_scenario", "__version__"]
