from .main import (
    LAGS,
    ROLLING_WINDOWS,
    WARMUP_DAYS,
    build_features,
    export_feature_csv,
    feature_columns,
    model_columns,
    rolling_mean,
    training_rows,
    window_rows,
)

__all__ = [
    "LAGS", "ROLLING_WINDOWS", "WARMUP_DAYS", "build_features", "export_feature_csv",
    "feature_columns", "model_columns", "rolling_mean", "training_rows", "window_rows",
]
