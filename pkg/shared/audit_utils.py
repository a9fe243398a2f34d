import logging
from typing import Any, Dict, List, Optional

from .models import AuditEvent, AuditEventType
from .utils import generate_id, get_current_timestamp

logger = logging.getLogger(__name__)


class AuditJournal:
    """Collects the audit events of one run for the manifest"""

    def __init__(self, run_id: str = "local"):
        self.run_id = run_id
        self.events: List[AuditEvent] = []

    def record(
        self,
        event_type: AuditEventType,
        module: str,
        details: Optional[Dict[str, Any]] = None,
    ) -> Optional[AuditEvent]:
        """Record an audit event and echo it to the log"""
        try:
            event = AuditEvent(
                id=generate_id(self.run_id, len(self.events), event_type.value, module),
                event_type=event_type,
                module=module,
                details=details or {},
                created_at=get_current_timestamp(),
            )
            line = event.model_dump_json()
            self.events.append(event)
            logger.info("[AUDIT] %s: %s", event.event_type.value, line)
            return event
        except Exception as e:
            # Audit failures never break the run
            logger.warning("Failed to record audit event: %s", e)
            return None

    @property
    def failed_stages(self) -> List[str]:
        return [
            event.details.get("stage", event.module)
            for event in self.events
            if event.event_type == AuditEventType.STAGE_FAILED
        ]


# Global journal instance
_audit_journal: Optional[AuditJournal] = None


def get_audit_journal() -> AuditJournal:
    """Get the global audit journal"""
    global _audit_journal
    if _audit_journal is None:
        _audit_journal = AuditJournal()
    return _audit_journal


def reset_audit_journal(run_id: str) -> AuditJournal:
    """Start a fresh journal for a new run"""
    global _audit_journal
    _audit_journal = AuditJournal(run_id)
    return _audit_journal


def audit_panel_loaded(n_series: int, n_days: int, subset: Dict[str, str]):
    get_audit_journal().record(
        AuditEventType.PANEL_LOADED,
        "panel",
        {"n_series": n_series, "n_days": n_days, "filter": dict(subset)},
    )


def audit_features_built(n_columns: int, n_valid_rows: int):
    get_audit_journal().record(
        AuditEventType.FEATURES_BUILT,
        "features",
        {"n_columns": n_columns, "n_valid_rows": n_valid_rows},
    )


def audit_model_fitted(model_name: str, fit_end: Optional[int], summary: Dict[str, Any]):
    """Audit event for a fitted model; keeps only the scalar part of the summary"""
    scalars = {k: v for k, v in summary.items() if isinstance(v, (str, int, float, bool))}
    get_audit_journal().record(
        AuditEventType.MODEL_FITTED,
        "forecast",
        {"model": model_name, "fit_end": fit_end, **scalars},
    )


def audit_fit_warning(model_name: str, series_id: str, message: str):
    get_audit_journal().record(
        AuditEventType.FIT_WARNING,
        "forecast",
        {"model": model_name, "series": series_id, "message": message},
    )


def audit_forecasts_imported(model_name: str, path: str, n_cells: int):
    get_audit_journal().record(
        AuditEventType.FORECASTS_IMPORTED,
        "forecast_io",
        {"model": model_name, "path": path, "n_cells": n_cells},
    )


def audit_simulation_completed(model_name: str, b: float, avg_cost: float, fill_rate: float):
    get_audit_journal().record(
        AuditEventType.SIMULATION_COMPLETED,
        "newsvendor",
        {"model": model_name, "b": b, "avg_cost": avg_cost, "fill_rate": fill_rate},
    )


def audit_echelon_completed(model_name: str, partition: str, avg_network_cost: float, fill_rate: float):
    get_audit_journal().record(
        AuditEventType.ECHELON_COMPLETED,
        "echelon2",
        {
            "model": model_name,
            "partition": partition,
            "avg_network_cost": avg_network_cost,
            "network_fill_rate": fill_rate,
        },
    )


def audit_sweep_completed(n_models: int, b_values: List[float]):
    get_audit_journal().record(
        AuditEventType.SWEEP_COMPLETED,
        "sweep",
        {"n_models": n_models, "b_values": list(b_values)},
    )


def audit_stage_failed(stage: str, module: str, detail: str):
    get_audit_journal().record(
        AuditEventType.STAGE_FAILED,
        module,
        {"stage": stage, "detail": detail},
    )
