from typing import Any, List, Optional


class ToolkitError(Exception):
    """Base error; carries the module that raised it and a readable detail"""

    module: str = "toolkit"

    def __init__(self, detail: str, module: Optional[str] = None):
        super().__init__(detail)
        self.detail = detail
        if module is not None:
            self.module = module

    def __str__(self) -> str:
        return f"{self.module}: {self.detail}"


class ConfigError(ToolkitError):
    module = "cli"

    def __init__(self, detail: str, diagnostics: Optional[List[str]] = None):
        super().__init__(detail)
        self.diagnostics = diagnostics or [detail]


class PanelFormatError(ToolkitError):
    module = "panel"


class PanelCoverageError(PanelFormatError):
    """Day axis or calendar does not cover the sales horizon without gaps"""


class PanelParseError(PanelFormatError):
    pass


class InsufficientHistoryError(ToolkitError):
    module = "panel"


class FitError(ToolkitError):
    module = "forecast"

    def __init__(self, detail: str, best_params: Any = None, converged: bool = False):
        super().__init__(detail)
        self.best_params = best_params
        self.converged = converged


class LeakageError(ToolkitError):
    module = "forecast"


class ForecastReferenceError(ToolkitError):
    module = "forecast_io"


class ForecastCoverageError(ToolkitError):
    module = "forecast_io"


class ForecastParseError(ToolkitError):
    module = "forecast_io"


class ForecastExportError(ToolkitError):
    module = "forecast_io"


class UndefinedMetricError(ToolkitError):
    module = "metrics"


class EchelonConfigError(ToolkitError):
    module = "echelon2"


class SweepError(ToolkitError):
    module = "sweep"
