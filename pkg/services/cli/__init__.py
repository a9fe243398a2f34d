from .config import RunConfig, load_config, validate_config
from .main import main
from .pipeline import run_pipeline

__all__ = ["RunConfig", "load_config", "main", "run_pipeline", "validate_config"]
