import configparser
import logging
import os
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Union

from pydantic import BaseModel, BeforeValidator, Field, ValidationError, field_validator, model_validator

from shared.errors import ConfigError
from shared.models import NativeModel
from services.echelon2.main import PARTITION_KEYS
from services.forecast.boosting import BoostingHyper, hyper_grid
from services.forecast.main import ModelSettings
from services.metrics.main import POOLING_MODES
from services.panel import count_matching_series

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

OUTPUT_DIR_ENV = "FORECAST_EVAL_OUTPUT_DIR"
SECTIONS = (
    "data", "filter", "splits", "models", "holt_winters", "arima",
    "gbr", "external", "sweep", "echelon", "output",
)


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


CommaList = BeforeValidator(_split_list)


class DataSection(BaseModel):
    sales: Path
    calendar: Path


class SplitsSection(BaseModel):
    valid_days: int = Field(default=28, ge=1)
    test_days: int = Field(default=28, ge=1)


class ModelsSection(BaseModel):
    native: Annotated[List[NativeModel], CommaList] = list(NativeModel)
    seed: int = 0


class HoltWintersSection(BaseModel):
    season_length: int = Field(default=7, ge=2)
    restarts: int = Field(default=2, ge=0)


class ArimaSection(BaseModel):
    max_iter: int = Field(default=2000, ge=1)


class GbrSection(BaseModel):
    n_estimators: int = Field(default=300, ge=0)
    learning_rate: float = Field(default=0.05, gt=0.0)
    max_depth: int = Field(default=6, ge=1)
    min_leaf: int = Field(default=20, ge=1)
    grid_learning_rates: Annotated[List[float], CommaList] = []
    grid_max_depths: Annotated[List[int], CommaList] = []


class SweepSection(BaseModel):
    h: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    b_values: Annotated[List[float], CommaList] = Field(default=[2.0, 5.0, 10.0], min_length=1)
    baseline: str = NativeModel.NAIVE.value
    reference_b: float = Field(default=5.0, gt=0.0, allow_inf_nan=False)
    round_orders: bool = False
    pooling: str = "micro"

    @field_validator("b_values")
    @classmethod
    def check_b_values(cls, value: List[float]) -> List[float]:
        if any(not (0.0 < b < float("inf")) for b in value):
            raise ValueError("every b must be positive and finite")
        if len(set(value)) != len(value):
            raise ValueError("b values repeat")
        return value

    @field_validator("pooling")
    @classmethod
    def check_pooling(cls, value: str) -> str:
        if value not in POOLING_MODES:
            raise ValueError(f"must be one of {POOLING_MODES}")
        return value


class EchelonSection(BaseModel):
    enabled: bool = True
    partition_by: str = "none"
    h_dc: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    # None falls back to the sweep's reference b
    b_dc: Optional[float] = Field(default=None, gt=0.0, allow_inf_nan=False)
    b_store: Optional[float] = Field(default=None, gt=0.0, allow_inf_nan=False)
    initial_dc_inventory: float = Field(default=0.0, ge=0.0, allow_inf_nan=False)

    @field_validator("partition_by")
    @classmethod
    def check_partition(cls, value: str) -> str:
        if value not in PARTITION_KEYS:
            raise ValueError(f"must be one of {PARTITION_KEYS}")
        return value


class OutputSection(BaseModel):
    dir: Path = Path("output")
    verbose: bool = False


class RunConfig(BaseModel):
    """Everything one run needs; paths are absolute once loaded"""

    source: Optional[Path] = None
    data: DataSection
    filter: Dict[str, str] = {}
    splits: SplitsSection = SplitsSection()
    models: ModelsSection = ModelsSection()
    holt_winters: HoltWintersSection = HoltWintersSection()
    arima: ArimaSection = ArimaSection()
    gbr: GbrSection = GbrSection()
    external: Dict[str, Path] = {}
    sweep: SweepSection = SweepSection()
    echelon: EchelonSection = EchelonSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def check_model_names(self) -> "RunConfig":
        native = [m.value for m in self.models.native]
        if len(set(native)) != len(native):
            raise ValueError("models.native lists a model twice")
        clash = sorted(set(native) & set(self.external))
        if clash:
            raise ValueError(f"external forecasts reuse native model names {clash}")
        if self.sweep.baseline not in self.model_names:
            raise ValueError(f"sweep.baseline {self.sweep.baseline!r} is not among models {self.model_names}")
        return self

    @property
    def model_names(self) -> List[str]:
        return [m.value for m in self.models.native] + list(self.external)

    @property
    def seed(self) -> int:
        return self.models.seed

    @property
    def model_settings(self) -> ModelSettings:
        return ModelSettings(
            season_length=self.holt_winters.season_length,
            hw_restarts=self.holt_winters.restarts,
            arima_max_iter=self.arima.max_iter,
            gbr=self.gbr_hyper,
            seed=self.seed,
        )

    @property
    def gbr_hyper(self) -> BoostingHyper:
        return BoostingHyper(
            n_estimators=self.gbr.n_estimators,
            learning_rate=self.gbr.learning_rate,
            max_depth=self.gbr.max_depth,
            min_leaf=self.gbr.min_leaf,
        )

    @property
    def gbr_grid(self) -> List[BoostingHyper]:
        return hyper_grid(self.gbr_hyper, self.gbr.grid_learning_rates, self.gbr.grid_max_depths)

    @property
    def b_dc(self) -> float:
        return self.echelon.b_dc if self.echelon.b_dc is not None else self.sweep.reference_b

    @property
    def b_store(self) -> float:
        return self.echelon.b_store if self.echelon.b_store is not None else self.sweep.reference_b


def read_sections(path: PathLike) -> Dict[str, Dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    # keep case for external model names and filter columns
    parser.optionxform = str
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except configparser.Error as e:
        raise ConfigError(f"config {path} does not parse: {e}")
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown config sections {unknown}")
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _resolve(base: Path, value: Any) -> Any:
    if value is None or value == "":
        return value
    path = Path(value).expanduser()
    return path if path.is_absolute() else (base / path).resolve()


def format_validation_error(error: ValidationError) -> List[str]:
    return [
        f"{'.'.join(str(part) for part in item['loc']) or 'config'}: {item['msg']}"
        for item in error.errors()
    ]


def load_config(path: PathLike) -> RunConfig:
    """Parse and validate the INI run config; only the output directory may come from the environment"""
    path = Path(path).resolve()
    sections: Dict[str, Any] = read_sections(path)
    base = path.parent

    data = sections.get("data", {})
    for name in ("sales", "calendar"):
        if name in data:
            data[name] = _resolve(base, data[name])
    sections["external"] = {name: _resolve(base, value) for name, value in sections.get("external", {}).items()}

    output = sections.setdefault("output", {})
    override = os.getenv(OUTPUT_DIR_ENV)
    if override:
        logger.info("Output directory overridden by %s: %s", OUTPUT_DIR_ENV, override)
        output["dir"] = Path(override).expanduser().resolve()
    else:
        output["dir"] = _resolve(base, output.get("dir", "output"))

    try:
        return RunConfig(source=path, **sections)
    except ValidationError as e:
        diagnostics = format_validation_error(e)
        raise ConfigError("; ".join(diagnostics), diagnostics=diagnostics)


def validate_config(path: PathLike) -> List[str]:
    """Schema and cross-reference diagnostics; empty means the config is runnable"""
    try:
        config = load_config(path)
    except ConfigError as e:
        return e.diagnostics

    diagnostics = []
    for name in ("sales", "calendar"):
        target = getattr(config.data, name)
        if not target.is_file():
            diagnostics.append(f"data.{name}: file not found: {target}")
    for name, target in config.external.items():
        if not target.is_file():
            diagnostics.append(f"external.{name}: forecast file not found: {target}")
    if NativeModel.GBR in config.models.native and config.gbr.n_estimators == 0:
        logger.warning("gbr.n_estimators is 0; boosting reduces to the mean")

    if config.data.sales.is_file():
        try:
            matches = count_matching_series(config.data.sales, config.filter)
        except Exception as e:
            diagnostics.append(f"filter: {e}")
        else:
            if matches == 0:
                described = ", ".join(f"{k}={v}" for k, v in config.filter.items()) or "no filter"
                diagnostics.append(f"filter: {described} matches no series")
    return diagnostics
