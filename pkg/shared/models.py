import datetime as dt
import math
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _read_only(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


class ForecastSplit(str, Enum):
    VALIDATION = "validation"
    TEST = "test"


class NativeModel(str, Enum):
    NAIVE = "naive"
    HOLT_WINTERS = "holt_winters"
    ARIMA = "arima"
    GBR = "gbr"


class SeriesKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    item_id: str = Field(min_length=1)
    dept_id: str = Field(min_length=1)
    store_id: str = Field(min_length=1)
    state_id: str = Field(min_length=1)

    @property
    def series_id(self) -> str:
        return f"{self.item_id}_{self.store_id}"

    @property
    def cat_id(self) -> str:
        return self.dept_id.rsplit("_", 1)[0]

    def sort_key(self) -> Tuple[str, str, str, str]:
        return (self.item_id, self.dept_id, self.store_id, self.state_id)

    def field(self, name: str) -> str:
        if name == "cat_id":
            return self.cat_id
        return getattr(self, name)


class CalendarDay(BaseModel):
    d_index: int = Field(ge=1)
    date: dt.date
    weekday: int = Field(ge=1, le=7)
    month: int = Field(ge=1, le=12)
    event_flags: FrozenSet[str] = frozenset()
    snap_flags: Dict[str, bool] = {}

    def snap_flag(self, state_id: str) -> bool:
        return self.snap_flags.get(state_id, False)


class DayWindow(BaseModel):
    """Inclusive d_index range; end == start - 1 is the empty window"""

    model_config = ConfigDict(frozen=True)

    start: int = Field(ge=1)
    end: int = Field(ge=0)

    @model_validator(mode="after")
    def check_order(self) -> "DayWindow":
        if self.end < self.start - 1:
            raise ValueError(f"window end {self.end} precedes start {self.start}")
        return self

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    @property
    def days(self) -> range:
        return range(self.start, self.end + 1)

    def __contains__(self, d_index: int) -> bool:
        return self.start <= d_index <= self.end

    def overlaps(self, other: "DayWindow") -> bool:
        return self.start <= other.end and other.start <= self.end


class SplitSpec(BaseModel):
    train_end: int
    valid_end: int
    test_end: int
    first_day: int = 1

    @model_validator(mode="after")
    def check_order(self) -> "SplitSpec":
        if not (self.first_day <= self.train_end < self.valid_end < self.test_end):
            raise ValueError(
                f"split boundaries must satisfy train_end < valid_end < test_end, "
                f"got {self.train_end}, {self.valid_end}, {self.test_end}"
            )
        return self

    @property
    def train_window(self) -> DayWindow:
        return DayWindow(start=self.first_day, end=self.train_end)

    @property
    def valid_window(self) -> DayWindow:
        return DayWindow(start=self.train_end + 1, end=self.valid_end)

    @property
    def test_window(self) -> DayWindow:
        return DayWindow(start=self.valid_end + 1, end=self.test_end)


class SeriesPanel(BaseModel):
    """Aligned daily demand for N series on one gap-free day axis"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    keys: List[SeriesKey]
    days: List[CalendarDay]
    demand: np.ndarray

    @field_validator("demand", mode="before")
    @classmethod
    def check_demand(cls, value: Any) -> np.ndarray:
        array = np.asarray(value)
        if array.ndim != 2:
            raise ValueError(f"demand must be a 2-D matrix, got {array.ndim}-D")
        if array.dtype.kind == "f":
            if not np.all(np.isfinite(array)):
                raise ValueError("demand contains non-finite values")
            if np.any(array != np.round(array)):
                raise ValueError("demand must be integer units")
        elif array.dtype.kind not in "iu":
            raise ValueError(f"demand must be numeric, got dtype {array.dtype}")
        array = array.astype(np.int64)
        if np.any(array < 0):
            raise ValueError("demand must be non-negative")
        return _read_only(array)

    @model_validator(mode="after")
    def check_shape(self) -> "SeriesPanel":
        if not self.keys or not self.days:
            raise ValueError("panel needs at least one series and one day")
        if self.demand.shape != (len(self.keys), len(self.days)):
            raise ValueError(
                f"demand shape {self.demand.shape} does not match "
                f"{len(self.keys)} keys x {len(self.days)} days"
            )
        if len(set(self.keys)) != len(self.keys):
            raise ValueError("series keys must be unique")
        for before, after in zip(self.days, self.days[1:]):
            if after.d_index != before.d_index + 1:
                raise ValueError(f"day axis has a gap after d_{before.d_index}")
        return self

    @property
    def n_series(self) -> int:
        return len(self.keys)

    @property
    def n_days(self) -> int:
        return len(self.days)

    @property
    def first_day(self) -> int:
        return self.days[0].d_index

    @property
    def last_day(self) -> int:
        return self.days[-1].d_index

    @property
    def horizon(self) -> DayWindow:
        return DayWindow(start=self.first_day, end=self.last_day)

    def position(self, d_index: int) -> int:
        return d_index - self.first_day

    def window_demand(self, window: DayWindow) -> np.ndarray:
        if window.length and (window.start < self.first_day or window.end > self.last_day):
            raise ValueError(f"window d_{window.start}..d_{window.end} lies outside the panel")
        start = self.position(window.start)
        return self.demand[:, start:start + window.length]

    def subset(self, indices: List[int]) -> "SeriesPanel":
        return SeriesPanel(
            keys=[self.keys[i] for i in indices],
            days=self.days,
            demand=self.demand[list(indices)],
        )

    def with_demand(self, demand: np.ndarray) -> "SeriesPanel":
        return SeriesPanel(keys=self.keys, days=self.days, demand=demand)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SeriesPanel):
            return NotImplemented
        return (
            self.keys == other.keys
            and self.days == other.days
            and np.array_equal(self.demand, other.demand)
        )


class FeatureMatrix(BaseModel):
    """Per-(series, day) regressors; NaN marks history that does not exist yet"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    columns: List[str]
    d_index: List[int]
    values: np.ndarray
    valid: np.ndarray

    @model_validator(mode="after")
    def check_shape(self) -> "FeatureMatrix":
        n_series, n_days, n_columns = self.values.shape
        if n_columns != len(self.columns) or n_days != len(self.d_index):
            raise ValueError("feature values do not match columns x days")
        if self.valid.shape != (n_series, n_days):
            raise ValueError("validity mask does not match the feature rows")
        self.values = _read_only(self.values)
        self.valid = _read_only(self.valid.astype(bool))
        return self

    def position(self, d_index: int) -> int:
        return d_index - self.d_index[0]

    def column_positions(self, columns: List[str]) -> List[int]:
        lookup = {name: i for i, name in enumerate(self.columns)}
        return [lookup[name] for name in columns]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, :, self.columns.index(name)]


class ForecastSet(BaseModel):
    """One-step-ahead point forecasts for every panel series over a window"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    model_name: str = Field(min_length=1)
    split: ForecastSplit
    window: DayWindow
    keys: List[SeriesKey]
    values: np.ndarray
    clamped: bool = False

    @field_validator("values", mode="before")
    @classmethod
    def check_values(cls, value: Any) -> np.ndarray:
        array = np.asarray(value, dtype=float)
        if array.ndim != 2:
            raise ValueError("forecast values must be a series x day matrix")
        if not np.all(np.isfinite(array)):
            raise ValueError("forecast values must be finite")
        return _read_only(array)

    @model_validator(mode="after")
    def check_shape(self) -> "ForecastSet":
        if self.values.shape != (len(self.keys), self.window.length):
            raise ValueError(
                f"forecast shape {self.values.shape} does not match "
                f"{len(self.keys)} series x {self.window.length} days"
            )
        return self

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ForecastSet):
            return NotImplemented
        return (
            self.model_name == other.model_name
            and self.split == other.split
            and self.window == other.window
            and self.keys == other.keys
            and self.clamped == other.clamped
            and np.array_equal(self.values, other.values)
        )


class HoltWintersState(BaseModel):
    """Level, trend and the last m seasonals (oldest first) plus smoothing weights"""

    level: float
    trend: float
    seasonal: Tuple[float, ...]
    alpha: float = Field(ge=0.0, le=1.0)
    beta: float = Field(ge=0.0, le=1.0)
    gamma: float = Field(ge=0.0, le=1.0)
    m: int = Field(default=7, ge=2)

    @model_validator(mode="after")
    def check_buffer(self) -> "HoltWintersState":
        if len(self.seasonal) != self.m:
            raise ValueError(f"seasonal buffer has {len(self.seasonal)} entries, expected {self.m}")
        return self

    @property
    def forecast(self) -> float:
        return self.level + self.trend + self.seasonal[0]


class ArimaParams(BaseModel):
    c: float
    phi: float = Field(gt=-1.0, lt=1.0)
    theta: float = Field(gt=-1.0, lt=1.0)
    sigma2: float = Field(default=0.0, ge=0.0)
    converged: bool = True


class CostParams(BaseModel):
    h: float = Field(gt=0.0, allow_inf_nan=False)
    b: float = Field(gt=0.0, allow_inf_nan=False)


class SeriesAccuracy(BaseModel):
    series_id: str
    rmse: float
    mae: float


class AccuracyReport(BaseModel):
    model_name: str
    split: ForecastSplit
    rmse: float
    mae: float
    mape: float
    mape_unreliable: bool
    n_points: int
    pooling: str = "micro"
    per_series: List[SeriesAccuracy] = []


class SimOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model_name: str
    h: float
    b: float
    avg_cost: float
    fill_rate: float = Field(ge=0.0, le=1.0)
    total_overage_units: float
    total_shortage_units: float
    total_demand: float
    n_cells: int
    per_day_costs: np.ndarray = Field(exclude=True)


class EchelonConfig(BaseModel):
    store_set: List[int] = Field(min_length=1)
    dc_cost: CostParams
    store_shortage: float = Field(gt=0.0, allow_inf_nan=False)
    initial_dc_inventory: float = Field(default=0.0, ge=0.0, allow_inf_nan=False)

    @field_validator("store_set")
    @classmethod
    def check_stores(cls, value: List[int]) -> List[int]:
        if len(set(value)) != len(value):
            raise ValueError("store_set lists a series twice")
        if any(index < 0 for index in value):
            raise ValueError("store_set indices must be non-negative")
        return value


class DCDemand(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    realized: np.ndarray
    forecast: np.ndarray
    orders: np.ndarray


class EchelonOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model_name: str
    partition: str = "all"
    store_set: List[int]
    avg_network_cost: float
    network_fill_rate: float = Field(ge=0.0, le=1.0)
    total_dc_cost: float
    total_store_penalty: float
    store_shortfall: List[float]
    n_days: int
    # per-day arrays: DC inventory (n_days + 1), stock on hand I + Q, and store fulfilments
    dc_inventory: np.ndarray = Field(exclude=True)
    dc_supply: np.ndarray = Field(exclude=True)
    fulfilled: np.ndarray = Field(exclude=True)

    @property
    def shipped(self) -> np.ndarray:
        """Units the DC sent to its stores each day"""
        return self.fulfilled.sum(axis=0)


class SweepSpec(BaseModel):
    h: float = Field(default=1.0, gt=0.0)
    b_values: List[float] = Field(default=[2.0, 5.0, 10.0], min_length=1)
    models: List[ForecastSet]
    baseline: str = "naive"
    reference_b: float = Field(default=5.0, gt=0.0)
    round_orders: bool = False

    @field_validator("b_values")
    @classmethod
    def check_b_values(cls, value: List[float]) -> List[float]:
        if any(not (b > 0 and math.isfinite(b)) for b in value):
            raise ValueError("b_values must be positive and finite")
        return value

    @model_validator(mode="after")
    def check_baseline(self) -> "SweepSpec":
        names = [fs.model_name for fs in self.models]
        if self.baseline not in names:
            raise ValueError(f"baseline {self.baseline!r} is not among models {names}")
        if len(set(names)) != len(names):
            raise ValueError("model names must be unique")
        return self


class SimReportRow(BaseModel):
    model: str
    b: float
    h: float
    avg_cost: float
    fill_rate: float
    rmse: float
    mae: float
    cost_reduction_pct: float
    fill_gain_pp: float


class AffinityCheck(BaseModel):
    model: str
    slope: float
    intercept: float
    residual: float


class RankingRow(BaseModel):
    b: float
    ranking: List[str]


class SimReport(BaseModel):
    baseline: str
    h: float
    reference_b: float
    rows: List[SimReportRow]
    reference_rows: List[SimReportRow]
    affinity: List[AffinityCheck]
    rankings: List[RankingRow]
    fill_rate_spread: Dict[str, float]


class AuditEventType(str, Enum):
    PANEL_LOADED = "panel_loaded"
    FEATURES_BUILT = "features_built"
    MODEL_FITTED = "model_fitted"
    FIT_WARNING = "fit_warning"
    FORECASTS_IMPORTED = "forecasts_imported"
    SIMULATION_COMPLETED = "simulation_completed"
    ECHELON_COMPLETED = "echelon_completed"
    SWEEP_COMPLETED = "sweep_completed"
    STAGE_FAILED = "stage_failed"


class AuditEvent(BaseModel):
    id: str
    event_type: AuditEventType
    module: str
    details: Dict[str, Any] = {}
    created_at: dt.datetime


class RunManifest(BaseModel):
    run_id: str
    status: str = "running"
    started_at: dt.datetime
    finished_at: Optional[dt.datetime] = None
    seed: int
    config_sha256: str
    data_sha256: Dict[str, str] = {}
    versions: Dict[str, str] = {}
    refit_policy: str
    n_series: Optional[int] = None
    splits: Optional[SplitSpec] = None
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    artifacts: List[str] = []
    audit_events: List[AuditEvent] = []
