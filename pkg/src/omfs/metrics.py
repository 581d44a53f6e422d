"""Post-hoc trace analysis: utilization, waits, checkpoint/restart
counts, the entitlement-fairness scan, and scheduler comparison tables.

Everything here re-derives its numbers from trace records alone (plus
the static per-job metadata a trace carries), deliberately not trusting
the engine's own bookkeeping; tests cross-check the two.  Utilization
is exact rational arithmetic, formatted to six decimals only at the
reporting edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .model import UserSpec, entitled_cpu_count
from .policy import PolicyConfig, checkpoint_cost, restart_cost
from .engine import Trace, TraceRecord


def utilization(trace: Trace, horizon: int) -> Fraction:
    """Busy CPU-seconds over available CPU-seconds in [0, horizon].

    The busy level between records is read off ``cpu_idle_after`` of the
    latest record, so the integral is exact.  An empty trace is 0.
    """
    if horizon <= 0:
        raise ValueError(f"horizon {horizon} must be positive")
    if not trace.records:
        return Fraction(0)
    busy = 0
    prev = 0
    idle_level = trace.cpu_total
    for record in trace.records:
        end = min(record.time, horizon)
        if end > prev:
            busy += (trace.cpu_total - idle_level) * (end - prev)
            prev = end
        idle_level = record.cpu_idle_after
    if prev < horizon:
        busy += (trace.cpu_total - idle_level) * (horizon - prev)
    return Fraction(busy, trace.cpu_total * horizon)


# --- fairness ---------------------------------------------------------------

@dataclass(frozen=True)
class FairnessViolation:
    """A user sat below its entitlement with suitable queued work for
    longer than the grace bound."""

    user: str
    start: int
    end: int
    deficit: int     # entitled - running CPUs when the interval opened


def _time_groups(records: Iterable[TraceRecord]):
    group: list[TraceRecord] = []
    for record in records:
        if group and record.time != group[0].time:
            yield group[0].time, group
            group = []
        group.append(record)
    if group:
        yield group[0].time, group


def fairness_violation_scan(
    trace: Trace,
    users: Mapping[str, UserSpec],
    config: PolicyConfig,
) -> list[FairnessViolation]:
    """Scan a fair-share trace for entitlement violations.

    After every event timestamp the scan asks, per user: does the user
    have a queued job that fits its entitlement headroom
    (cpu_count <= entitled - running) and that the scheduler would
    actually admit?  Non-preemptable jobs count only if they also clear
    the non-preemptable cap (nonp + cpu < entitled); being refused by
    that cap is by design, not unfairness.  Checkpoint limbo is not
    "queued": a victim waiting out its checkpoint write cannot be run.

    A violation is any maximal such interval longer than the grace
    bound: quantum_seconds plus the largest per-job checkpoint+restart
    round trip (reclaiming entitled capacity can legitimately wait for a
    protected quantum to expire and for a victim's state to move).
    """
    if trace.scheduler != "omfs":
        raise ValueError(f"fairness scan applies to fair-share traces, got {trace.scheduler!r}")

    max_cr = max(
        (checkpoint_cost(meta, config) + restart_cost(meta, config) for meta in trace.jobs.values()),
        default=0,
    )
    grace = config.quantum_seconds + max_cr

    running: set[int] = set()
    queued: set[int] = set()
    open_since: dict[str, tuple[int, int]] = {}
    violations: list[FairnessViolation] = []

    def close(user: str, now: int) -> None:
        start, deficit = open_since.pop(user)
        if now - start > grace:
            violations.append(FairnessViolation(user, start, now, deficit))

    def evaluate(now: int) -> None:
        totals: dict[str, int] = {u: 0 for u in users}
        nonp: dict[str, int] = {u: 0 for u in users}
        for jid in running:
            meta = trace.jobs[jid]
            totals[meta.user] += meta.cpu_count
            if not meta.preemptable:
                nonp[meta.user] += meta.cpu_count
        for user in users:
            entitled = entitled_cpu_count(users[user].percent, trace.cpu_total)
            headroom = entitled - totals[user]
            eligible = False
            for jid in queued:
                meta = trace.jobs[jid]
                if meta.user != user or meta.cpu_count > headroom:
                    continue
                if not meta.preemptable and nonp[user] + meta.cpu_count >= entitled:
                    continue
                eligible = True
                break
            if eligible and user not in open_since:
                open_since[user] = (now, headroom)
            elif not eligible and user in open_since:
                close(user, now)

    for now, group in _time_groups(trace.records):
        for record in group:
            jid = record.job_id
            if record.event == "submit":
                queued.add(jid)
            elif record.event == "start":
                queued.discard(jid)
                running.add(jid)
            elif record.event in ("checkpoint", "kill", "finish"):
                running.discard(jid)
            elif record.event in ("checkpoint_done", "resubmit"):
                queued.add(jid)
            elif record.event == "unrunnable":
                queued.discard(jid)
        evaluate(now)

    for user in sorted(open_since):
        close(user, trace.horizon)
    violations.sort(key=lambda v: (v.start, v.user))
    return violations


# --- waits and checkpoint/restart counts ------------------------------------

@dataclass(frozen=True)
class UserWaits:
    jobs_started: int
    mean_wait: float
    max_wait: int


@dataclass(frozen=True)
class WaitStats:
    """First-start waits (submit to first start) and requeue waits
    (checkpoint availability to restart), derived from records only."""

    started: int
    never_started: int
    mean_wait: float | None
    max_wait: int | None
    requeue_wait_total: int
    per_user: dict[str, UserWaits]


def wait_stats(trace: Trace) -> WaitStats:
    first_start: dict[int, int] = {}
    requeue_total = 0
    requeued_at: dict[int, int] = {}
    for record in trace.records:
        if record.event == "start":
            if record.job_id not in first_start:
                first_start[record.job_id] = record.time
            since = requeued_at.pop(record.job_id, None)
            if since is not None and record.detail.startswith("restart"):
                requeue_total += record.time - since
        elif record.event == "checkpoint_done":
            requeued_at[record.job_id] = record.time

    waits = {
        jid: first_start[jid] - trace.jobs[jid].submit_time for jid in first_start
    }
    per_user: dict[str, UserWaits] = {}
    for user in sorted({meta.user for meta in trace.jobs.values()}):
        user_waits = [w for jid, w in waits.items() if trace.jobs[jid].user == user]
        if user_waits:
            per_user[user] = UserWaits(
                jobs_started=len(user_waits),
                mean_wait=sum(user_waits) / len(user_waits),
                max_wait=max(user_waits),
            )
    return WaitStats(
        started=len(waits),
        never_started=len(trace.jobs) - len(waits),
        mean_wait=sum(waits.values()) / len(waits) if waits else None,
        max_wait=max(waits.values()) if waits else None,
        requeue_wait_total=requeue_total,
        per_user=per_user,
    )


@dataclass(frozen=True)
class CrStats:
    checkpoint_ops: int
    restart_ops: int
    kills: int


def cr_stats(trace: Trace) -> CrStats:
    checkpoints = restarts = kills = 0
    for record in trace.records:
        if record.event == "checkpoint":
            checkpoints += 1
        elif record.event == "kill":
            kills += 1
        elif record.event == "start" and record.detail.startswith("restart"):
            restarts += 1
    return CrStats(checkpoint_ops=checkpoints, restart_ops=restarts, kills=kills)


# --- reports ----------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    scheduler: str
    workload_hash: str
    horizon: int
    n_jobs: int
    n_finished: int
    utilization: Fraction
    waits: WaitStats
    cr: CrStats
    fairness_violations: tuple[FairnessViolation, ...]


def build_report(trace: Trace, users: Mapping[str, UserSpec], config: PolicyConfig) -> MetricsReport:
    """Assemble the standard per-run report.

    The fairness scan only makes sense against the fair-share scheduler;
    baseline reports carry an empty violation tuple.
    """
    finished = sum(1 for out in trace.outcomes.values() if out.final_state == "finished")
    violations: tuple[FairnessViolation, ...] = ()
    if trace.scheduler == "omfs":
        violations = tuple(fairness_violation_scan(trace, users, config))
    horizon = max(trace.horizon, 1)
    return MetricsReport(
        scheduler=trace.scheduler,
        workload_hash=trace.workload_hash,
        horizon=trace.horizon,
        n_jobs=len(trace.jobs),
        n_finished=finished,
        utilization=utilization(trace, horizon) if trace.records else Fraction(0),
        waits=wait_stats(trace),
        cr=cr_stats(trace),
        fairness_violations=violations,
    )


def format_report(report: MetricsReport) -> str:
    """Stable line-oriented rendering for stdout."""
    w = report.waits
    lines = [
        f"scheduler {report.scheduler}",
        f"workload {report.workload_hash}",
        f"jobs {report.n_jobs}",
        f"finished {report.n_finished}",
        f"never_started {w.never_started}",
        f"horizon {report.horizon}",
        f"utilization {float(report.utilization):.6f}",
        f"mean_wait {'n/a' if w.mean_wait is None else format(w.mean_wait, '.2f')}",
        f"max_wait {'n/a' if w.max_wait is None else w.max_wait}",
        f"requeue_wait_total {w.requeue_wait_total}",
        f"checkpoints {report.cr.checkpoint_ops}",
        f"restarts {report.cr.restart_ops}",
        f"kills {report.cr.kills}",
        f"fairness_violations {len(report.fairness_violations)}",
    ]
    for v in report.fairness_violations:
        lines.append(f"violation user={v.user} start={v.start} end={v.end} deficit={v.deficit}")
    for user, uw in w.per_user.items():
        lines.append(
            f"user {user} started={uw.jobs_started} mean_wait={uw.mean_wait:.2f} max_wait={uw.max_wait}"
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CompareTable:
    """Side-by-side metrics for several schedulers on one workload."""

    schedulers: tuple[str, ...]
    rows: tuple[tuple[str, tuple[str, ...]], ...]
    notes: tuple[str, ...]

    def to_csv(self) -> str:
        lines = ["metric," + ",".join(self.schedulers)]
        for name, values in self.rows:
            lines.append(name + "," + ",".join(values))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max(len(name) for name, _ in self.rows)
        cols = [max(len(s), max(len(row[1][i]) for row in self.rows)) for i, s in enumerate(self.schedulers)]
        lines = ["  ".join(["metric".ljust(width)] + [s.rjust(c) for s, c in zip(self.schedulers, cols)])]
        for name, values in self.rows:
            lines.append("  ".join([name.ljust(width)] + [v.rjust(c) for v, c in zip(values, cols)]))
        lines.extend(self.notes)
        return "\n".join(lines) + "\n"


def compare_report(reports: dict[str, MetricsReport]) -> CompareTable:
    """Tabulate runs of the same workload under different schedulers.

    Refuses to compare runs whose workload hashes differ: a comparison
    across different inputs is meaningless.  When both the fair-share
    scheduler and the capped baseline are present, the pooling gain
    (utilization difference) is computed and flagged.
    """
    if not reports:
        raise ValueError("nothing to compare")
    hashes = {r.workload_hash for r in reports.values()}
    if len(hashes) > 1:
        raise ValueError(f"workload hash mismatch across reports: {sorted(hashes)}")

    names = tuple(reports)

    def row(label: str, fmt) -> tuple[str, tuple[str, ...]]:
        return (label, tuple(fmt(reports[n]) for n in names))

    rows = [
        row("utilization", lambda r: f"{float(r.utilization):.6f}"),
        row("horizon", lambda r: str(r.horizon)),
        row("finished", lambda r: str(r.n_finished)),
        row("never_started", lambda r: str(r.waits.never_started)),
        row("mean_wait", lambda r: "n/a" if r.waits.mean_wait is None else f"{r.waits.mean_wait:.2f}"),
        row("max_wait", lambda r: "n/a" if r.waits.max_wait is None else str(r.waits.max_wait)),
        row("checkpoints", lambda r: str(r.cr.checkpoint_ops)),
        row("restarts", lambda r: str(r.cr.restart_ops)),
        row("kills", lambda r: str(r.cr.kills)),
        row("fairness_violations", lambda r: str(len(r.fairness_violations))),
    ]
    notes: list[str] = []
    if "omfs" in reports and "capped" in reports:
        gain = reports["omfs"].utilization - reports["capped"].utilization
        rows.append(
            (
                "pooling_gain_vs_capped",
                tuple(f"{float(reports[n].utilization - reports['capped'].utilization):+.6f}" for n in names),
            )
        )
        status = "ok" if gain >= 0 else "VIOLATED"
        notes.append(f"pooling gain {float(gain):+.2f} (omfs >= capped: {status})")
    return CompareTable(schedulers=names, rows=tuple(rows), notes=tuple(notes))
