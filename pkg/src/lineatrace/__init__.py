"""End-to-end observability for ML pipelines.

Log component runs with their consumed and produced artifact pointers,
get dependencies inferred at ingest, and debug with traces, staleness
verdicts, drift checks, SLA alerts, and flag-driven review rankings.
"""

from .errors import DomainError, ErrorCode, RunValidationError
from .model import (
    AlertRecord,
    ColumnSample,
    Comparator,
    ComponentRun,
    ComponentSpec,
    Phase,
    PointerKind,
    PointerRef,
    PointerVersion,
    SlaSpec,
    StaleReasonCode,
    StalenessReason,
    StalenessVerdict,
    TriggerBinding,
    TriggerResult,
    TriggerStatus,
    infer_kind,
    validate_run_record,
)
from .store import FsckReport, Store, StoreConfig, choose_version, fsck
from .queries import (
    FlaggedRef,
    ReviewEntry,
    ReviewReport,
    RunSummary,
    TraceResult,
    forward_trace,
    history,
    inspect,
    recent,
    review,
    review_from_dict,
    review_to_dict,
    stale_components,
    stale_from_list,
    stale_to_dict,
    summary_from_dict,
    summary_to_dict,
    tag_query,
    trace,
    trace_from_dict,
    trace_to_dict,
)

__all__ = [
    "AlertRecord",
    "ColumnSample",
    "Comparator",
    "ComponentRun",
    "ComponentSpec",
    "DomainError",
    "ErrorCode",
    "FlaggedRef",
    "FsckReport",
    "Phase",
    "PointerKind",
    "PointerRef",
    "PointerVersion",
    "ReviewEntry",
    "ReviewReport",
    "RunSummary",
    "RunValidationError",
    "SlaSpec",
    "StaleReasonCode",
    "StalenessReason",
    "StalenessVerdict",
    "Store",
    "StoreConfig",
    "TraceResult",
    "TriggerBinding",
    "TriggerResult",
    "TriggerStatus",
    "choose_version",
    "forward_trace",
    "fsck",
    "history",
    "infer_kind",
    "inspect",
    "recent",
    "review",
    "review_from_dict",
    "review_to_dict",
    "stale_components",
    "stale_from_list",
    "stale_to_dict",
    "summary_from_dict",
    "summary_to_dict",
    "tag_query",
    "trace",
    "trace_from_dict",
    "trace_to_dict",
    "validate_run_record",
]

__version__ = "0.1.0"
