"""Memoryless fair-share cluster scheduling with checkpoint-restart
preemption, plus a deterministic simulator, baselines and metrics."""

from .model import (
    ClusterState,
    Job,
    JobState,
    ModelError,
    UserSpec,
    UsageSnapshot,
    entitled_cpu_count,
    usage_snapshot,
    user_table,
    validate_system,
)
from .policy import (
    IdleFitMode,
    OrderKey,
    PROTECTED_TIER,
    PolicyConfig,
    VictimScope,
    checkpoint_cost,
    is_quantum_protected,
    restart_cost,
    running_victim_order,
    submitted_order,
)
from .runner import Decision, DecisionKind, Disposition, preempt_until, scheduler_pass, try_run
from .engine import (
    SCHEDULERS,
    TRACE_HEADER,
    JobMeta,
    JobOutcome,
    Simulation,
    SimulationError,
    Trace,
    TraceRecord,
    simulate,
)
from .workload import (
    ConfigError,
    GeneratorParams,
    SwfDefaults,
    SwfImportResult,
    SystemConfig,
    WorkloadError,
    WorkloadSpec,
    generate_workload,
    generator_params_from_json,
    import_swf,
    parse_config,
    parse_workload,
    serialize_workload,
    workload_hash,
)
from .metrics import (
    CompareTable,
    CrStats,
    FairnessViolation,
    MetricsReport,
    UserWaits,
    WaitStats,
    build_report,
    compare_report,
    cr_stats,
    fairness_violation_scan,
    format_report,
    utilization,
    wait_stats,
)

__version__ = "0.1.0"
