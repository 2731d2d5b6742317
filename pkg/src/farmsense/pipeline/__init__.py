"""Chained-prompt advisory pipeline: intent parsing, context enrichment,
cited synthesis, proactive alerts, and orchestration."""

from .alerts import ALERT_COOLDOWN_S, AlertEngine, assess_alert, band_violations
from .core import (
    RETRIEVAL_K,
    check_grounding,
    citation_resolves,
    enrich,
    licensed_numbers,
    synthesize,
    synthesis_variables,
)
from .intent import parse_intent, parse_intent_rules
from .orchestrator import (
    CLARIFICATION_TEXT,
    STATUS_TEXT,
    OrchestrationResult,
    Orchestrator,
    StageRecord,
    SummaryScheduler,
)
from .types import (
    AdvisoryReply,
    Alert,
    Citation,
    DataRequirement,
    DatastoreUnavailable,
    EnrichedContext,
    GatheredSeries,
    GroundingViolation,
    MetricRequest,
    PipelineExhausted,
    UnparseableIntent,
    reading_ref,
)

__all__ = [
    "ALERT_COOLDOWN_S",
    "AdvisoryReply",
    "Alert",
    "AlertEngine",
    "CLARIFICATION_TEXT",
    "Citation",
    "DataRequirement",
    "DatastoreUnavailable",
    "EnrichedContext",
    "GatheredSeries",
    "GroundingViolation",
    "MetricRequest",
    "OrchestrationResult",
    "Orchestrator",
    "PipelineExhausted",
    "RETRIEVAL_K",
    "STATUS_TEXT",
    "StageRecord",
    "SummaryScheduler",
    "UnparseableIntent",
    "assess_alert",
    "band_violations",
    "check_grounding",
    "citation_resolves",
    "enrich",
    "licensed_numbers",
    "parse_intent",
    "parse_intent_rules",
    "reading_ref",
    "synthesize",
    "synthesis_variables",
]
