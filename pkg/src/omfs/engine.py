"""Deterministic discrete-event simulation driving the schedulers.

Time is integer seconds.  The event list is a heap keyed by
(time, seq), where seq is a global insertion counter, so ties replay in
creation order and identical inputs always produce byte-identical
traces.  No randomness lives here; seeds only ever shape workloads.

Per timestamp the engine is strict about ordering: first *every* event
carrying that timestamp is applied (finishes before scheduling, so a
pass never evicts a job whose completion is already due), then
scheduler passes run, draining any zero-cost follow-up events between
passes, until the timestamp is quiescent, and only then does time
advance.  Passes repeat until one admits nothing because an eviction
late in a pass can open entitlement headroom for a job attempted
earlier in it; stopping after one pass would strand an eligible job
until the next event.

Eviction frees CPUs immediately; writing the checkpoint image only
delays when the victim is runnable again (it sits in limbo, in no
queue, until its checkpoint_done event).  Restart latency occupies the
CPUs without accruing work.  Stale finish/restart events superseded by
an eviction are detected by per-job run epochs and dropped.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .baselines import backfill_pass, capped_pass, fcfs_pass
from .model import ClusterState, Job, JobState, UserSpec, validate_system
from .policy import PolicyConfig, checkpoint_cost, restart_cost, submitted_order
from .runner import Decision, Disposition, try_run
from .workload import WorkloadError, WorkloadSpec, workload_hash

log = logging.getLogger("omfs.engine")

SCHEDULERS = ("omfs", "fcfs", "backfill", "capped")

TRACE_HEADER = "time,seq,event,job_id,user,cpus,cpu_idle_after,detail"


class SimulationError(RuntimeError):
    """Engine self-check failure: corrupt event flow or a livelocked
    scheduling cascade."""


class EventKind(Enum):
    SUBMIT = "submit"
    FINISH = "finish"
    CHECKPOINT_DONE = "checkpoint_done"
    RESTART_DONE = "restart_done"
    QUANTUM_EXPIRED = "quantum_expired"
    WAKEUP = "wakeup"


@dataclass(frozen=True)
class Event:
    """One scheduled occurrence.  ``epoch`` snapshots the target job's
    run epoch at scheduling time; a mismatch at delivery marks the event
    stale (the run it belonged to was ended by an eviction)."""

    time: int
    seq: int
    kind: EventKind
    job_id: int | None = None
    epoch: int = 0


@dataclass(frozen=True)
class TraceRecord:
    time: int
    seq: int
    event: str
    job_id: int | None
    user: str
    cpus: int | None
    cpu_idle_after: int
    detail: str

    def to_csv_row(self) -> str:
        job_id = "" if self.job_id is None else str(self.job_id)
        cpus = "" if self.cpus is None else str(self.cpus)
        return (
            f"{self.time},{self.seq},{self.event},{job_id},"
            f"{self.user},{cpus},{self.cpu_idle_after},{self.detail}"
        )


@dataclass(frozen=True)
class JobMeta:
    """Static facts about one job, carried alongside the records because
    the CSV rows cannot express them and post-hoc scans need them."""

    user: str
    cpu_count: int
    total_runtime: int
    estimated_runtime: int | None
    preemptable: bool
    checkpointable: bool
    submit_time: int
    priority: int


@dataclass
class JobOutcome:
    """Per-job summary accumulated by the engine as it runs."""

    final_state: str
    first_start: int | None = None
    finish_time: int | None = None
    wait: int | None = None            # submit -> first start
    requeue_wait: int = 0              # checkpoint_done -> restart, summed
    turnaround: int | None = None      # submit -> finish
    checkpoints: int = 0
    restarts: int = 0


@dataclass
class Trace:
    """Everything one simulation run produced.

    ``to_csv`` is the canonical on-disk form: LF line endings, UTF-8,
    one fixed header line.  Identical inputs yield byte-identical CSV.
    """

    scheduler: str
    cpu_total: int
    workload_hash: str
    records: list[TraceRecord]
    jobs: dict[int, JobMeta]
    outcomes: dict[int, JobOutcome]
    horizon: int

    def to_csv(self) -> str:
        lines = [TRACE_HEADER]
        lines.extend(r.to_csv_row() for r in self.records)
        return "\n".join(lines) + "\n"


class Simulation:
    """One simulation run over a copied workload; construct and call
    ``run()`` once."""

    def __init__(
        self,
        spec: WorkloadSpec,
        config: PolicyConfig,
        scheduler: str = "omfs",
        seed: int = 0,
    ):
        if scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {scheduler!r}; choose from {', '.join(SCHEDULERS)}")
        problems = validate_system(spec.users, spec.cpu_total)
        if problems:
            raise WorkloadError("; ".join(problems))
        self.spec = spec
        self.config = config
        self.scheduler = scheduler
        self.seed = seed
        self.users: Mapping[str, UserSpec] = spec.users
        # jobs are templates; simulate copies so one spec runs many times
        self.jobs: dict[int, Job] = {j.id: j.fresh_copy() for j in spec.jobs}
        self.state = ClusterState(cpu_total=spec.cpu_total)
        self.records: list[TraceRecord] = []
        self._events: list[tuple[int, int, Event]] = []
        self._event_seq = itertools.count()
        self._record_seq = itertools.count()
        self._epoch: dict[int, int] = {jid: 0 for jid in self.jobs}
        self._work_start: dict[int, int] = {}
        self._requeued_at: dict[int, int] = {}
        self._outcomes: dict[int, JobOutcome] = {
            jid: JobOutcome(final_state=JobState.SUBMITTED.value) for jid in self.jobs
        }
        self._parked: set[int] = set()          # capped: unrunnable forever
        self._last_reservation: tuple[int, int] | None = None
        self._pass_limit = 10 * max(1, len(self.jobs)) + 100
        self._finished = False
        for job in sorted(self.jobs.values(), key=lambda j: (j.submit_time, j.id)):
            self._push(job.submit_time, EventKind.SUBMIT, job.id)

    # -- plumbing ------------------------------------------------------------

    def _push(self, time: int, kind: EventKind, job_id: int | None = None, epoch: int = 0) -> None:
        event = Event(time, next(self._event_seq), kind, job_id, epoch)
        heapq.heappush(self._events, (event.time, event.seq, event))

    def _record(
        self,
        event: str,
        job: Job | None = None,
        detail: str = "",
        cpu_idle_after: int | None = None,
    ) -> None:
        idle = self.state.cpu_idle if cpu_idle_after is None else cpu_idle_after
        self.records.append(
            TraceRecord(
                time=self.state.now,
                seq=next(self._record_seq),
                event=event,
                job_id=None if job is None else job.id,
                user="" if job is None else job.user,
                cpus=None if job is None else job.cpu_count,
                cpu_idle_after=idle,
                detail=detail,
            )
        )

    # -- event application ---------------------------------------------------

    def apply_event(self, event: Event) -> bool:
        """Apply one event; returns True when a scheduler pass is due."""
        kind = event.kind
        if kind is EventKind.WAKEUP:
            self._record("wakeup")
            return True
        job = self.jobs.get(event.job_id)
        if job is None:
            raise SimulationError(f"{kind.value} event for unknown job {event.job_id}")

        if kind is EventKind.SUBMIT:
            if job.state is not JobState.SUBMITTED:
                raise SimulationError(f"submit for job {job.id} in state {job.state.value}")
            self.state.submitted.append(job)
            self._record("submit", job)
            return True

        if kind is EventKind.FINISH:
            if job.state is not JobState.RUNNING or event.epoch != self._epoch[job.id]:
                return False   # run ended by an eviction; the trace already says so
            job.completed_runtime = job.total_runtime
            job.state = JobState.FINISHED
            self.state.running.remove(job)
            self._record("finish", job)
            out = self._outcomes[job.id]
            out.finish_time = self.state.now
            out.turnaround = self.state.now - job.submit_time
            return True

        if kind is EventKind.CHECKPOINT_DONE:
            if job.state is not JobState.CHECKPOINTED:
                raise SimulationError(f"checkpoint_done for job {job.id} in state {job.state.value}")
            self.state.submitted.append(job)
            self._requeued_at[job.id] = self.state.now
            self._record("checkpoint_done", job)
            return True

        if kind is EventKind.RESTART_DONE:
            if job.state is not JobState.RUNNING or event.epoch != self._epoch[job.id]:
                return False
            self._record("restart_done", job)
            return False

        if kind is EventKind.QUANTUM_EXPIRED:
            if job.state is not JobState.RUNNING or event.epoch != self._epoch[job.id]:
                self._record("quantum_expired", job, detail="stale")
                return False
            self._record("quantum_expired", job, detail="demoted")
            return True   # newly evictable capacity: worth a pass

        raise SimulationError(f"unhandled event kind {kind}")

    # -- job lifecycle bookkeeping -------------------------------------------

    def _accrue(self, job: Job) -> None:
        """Bank the work an evicted job did in its current run."""
        work_start = self._work_start[job.id]
        accrued = max(0, self.state.now - work_start)
        if job.completed_runtime + accrued > job.total_runtime:
            raise SimulationError(f"job {job.id} evicted past its own completion")
        job.completed_runtime += accrued

    def _start_bookkeeping(
        self, job: Job, resumed: bool, detail_extra: str = "", cpu_idle_after: int | None = None
    ) -> None:
        """Schedule the events a (re)start implies and record it.  The
        queue/state mutation already happened in the scheduler."""
        self._epoch[job.id] += 1
        epoch = self._epoch[job.id]
        now = self.state.now
        latency = restart_cost(job, self.config) if resumed else 0
        self._work_start[job.id] = now + latency
        if latency > 0:
            self._push(now + latency, EventKind.RESTART_DONE, job.id, epoch)
        finish_at = now + latency + job.remaining_runtime
        self._push(finish_at, EventKind.FINISH, job.id, epoch)
        # the expiry event only exists to trigger a pass at the protection
        # boundary; pointless when the job is projected to be gone by then
        if (
            self.config.quantum_protection
            and self.config.quantum_seconds > 0
            and now + self.config.quantum_seconds < finish_at
        ):
            self._push(now + self.config.quantum_seconds, EventKind.QUANTUM_EXPIRED, job.id, epoch)
        detail = "restart" if resumed else "fresh"
        if detail_extra:
            detail = f"{detail} {detail_extra}"
        self._record("start", job, detail=detail, cpu_idle_after=cpu_idle_after)
        out = self._outcomes[job.id]
        if out.first_start is None:
            out.first_start = now
            out.wait = now - job.submit_time
        if resumed:
            out.restarts += 1
            queued_since = self._requeued_at.pop(job.id, None)
            if queued_since is not None:
                out.requeue_wait += now - queued_since

    def _apply_victims(self, decision: Decision, evictor: Job) -> None:
        """Trace the evictions of one admission, oldest record first.

        Records carry intermediate idle counts: each victim's record
        shows the idle CPUs right after that eviction, so capacity
        conservation is checkable at every single record.
        """
        freed = sum(self.jobs[vid].cpu_count for vid, _ in decision.victims)
        idle = decision.cpu_idle_after + evictor.cpu_count - freed
        for vid, disposition in decision.victims:
            victim = self.jobs[vid]
            idle += victim.cpu_count
            self._accrue(victim)
            self._epoch[vid] += 1     # cancels the run's finish/quantum events
            out = self._outcomes[vid]
            if disposition is Disposition.CHECKPOINTED:
                # the runner requeues the victim instantly; availability
                # waits for the checkpoint image, so hold it in limbo
                self.state.submitted.remove(victim)
                cost = checkpoint_cost(victim, self.config)
                self._push(self.state.now + cost, EventKind.CHECKPOINT_DONE, vid)
                out.checkpoints += 1
                self._record("checkpoint", victim, detail=f"cost={cost} by={evictor.id}", cpu_idle_after=idle)
            else:
                self._record("kill", victim, detail=f"by={evictor.id}", cpu_idle_after=idle)
                if self.config.resubmit_killed:
                    victim.state = JobState.SUBMITTED
                    victim.completed_runtime = 0
                    self.state.submitted.append(victim)
                    self._record("resubmit", victim, cpu_idle_after=idle)

    # -- scheduler passes ----------------------------------------------------

    def _fair_share_pass(self) -> bool:
        admitted = False
        for job in sorted(self.state.submitted, key=submitted_order):
            resumed = job.state is JobState.CHECKPOINTED
            self.state.submitted.remove(job)
            decision = try_run(job, self.state, self.users, self.config)
            if decision.kind.is_requeue:
                self._record("requeue", job, detail=decision.kind.value)
                continue
            if decision.victims:
                self._apply_victims(decision, job)
            self._start_bookkeeping(job, resumed)
            admitted = True
        return admitted

    def _baseline_pass(self) -> bool:
        pass_fn = {"fcfs": fcfs_pass, "backfill": backfill_pass, "capped": capped_pass}[self.scheduler]
        actions = pass_fn(self.state, self.users, self.config)
        # the pass already admitted everything; rebuild the stepwise idle
        # counts so each record reflects the state right after its action
        idle = self.state.cpu_idle + sum(a.job.cpu_count for a in actions if a.kind == "start")
        admitted = False
        for action in actions:
            if action.kind == "start":
                idle -= action.job.cpu_count
                self._start_bookkeeping(
                    action.job, resumed=False, detail_extra=action.detail, cpu_idle_after=idle
                )
                admitted = True
            elif action.kind == "reserve":
                key = (action.job.id, int(action.detail.split("=", 1)[1]))
                if key != self._last_reservation:   # unchanged reservations are not re-logged
                    self._last_reservation = key
                    self._record("reserve", action.job, detail=action.detail, cpu_idle_after=idle)
            elif action.kind == "unrunnable":
                self._parked.add(action.job.id)
                self._record("unrunnable", action.job, detail=action.detail, cpu_idle_after=idle)
            else:
                raise SimulationError(f"unknown baseline action {action.kind!r}")
        return admitted

    def _run_pass(self) -> bool:
        if self.scheduler == "omfs":
            return self._fair_share_pass()
        return self._baseline_pass()

    # -- main loop -----------------------------------------------------------

    def _drain(self, now: int) -> bool:
        trigger = False
        while self._events and self._events[0][0] == now:
            _, _, event = heapq.heappop(self._events)
            trigger = self.apply_event(event) or trigger
        return trigger

    def run(self) -> Trace:
        if self._finished:
            raise SimulationError("simulation already ran")
        self._finished = True
        log.info("simulate scheduler=%s jobs=%d cpu_total=%d", self.scheduler, len(self.jobs), self.spec.cpu_total)
        while self._events:
            now = self._events[0][0]
            if now < self.state.now:
                raise SimulationError(f"time reversed: {now} after {self.state.now}")
            self.state.now = now
            trigger = self._drain(now)
            passes = 0
            while trigger:
                passes += 1
                if passes > self._pass_limit:
                    raise SimulationError(
                        f"scheduling livelock at t={now}: {passes} passes without quiescence "
                        "(zero-cost checkpoint thrash needs the quantum or tiered victim scope)"
                    )
                admitted = self._run_pass()
                trigger = self._drain(now) or admitted
            log.debug("t=%d quiescent after %d passes", now, passes)
        return self._finalize()

    def _finalize(self) -> Trace:
        for jid, job in self.jobs.items():
            out = self._outcomes[jid]
            out.final_state = "unrunnable" if jid in self._parked else job.state.value
        meta = {
            j.id: JobMeta(
                user=j.user,
                cpu_count=j.cpu_count,
                total_runtime=j.total_runtime,
                estimated_runtime=j.estimated_runtime,
                preemptable=j.preemptable,
                checkpointable=j.checkpointable,
                submit_time=j.submit_time,
                priority=j.priority,
            )
            for j in self.spec.jobs
        }
        horizon = self.records[-1].time if self.records else 0
        log.info("simulated %d records, horizon=%d", len(self.records), horizon)
        return Trace(
            scheduler=self.scheduler,
            cpu_total=self.spec.cpu_total,
            workload_hash=workload_hash(self.spec),
            records=self.records,
            jobs=meta,
            outcomes=self._outcomes,
            horizon=horizon,
        )


def simulate(
    spec: WorkloadSpec,
    config: PolicyConfig,
    scheduler: str = "omfs",
    seed: int = 0,
) -> Trace:
    """Run one workload to completion under one scheduler.

    ``seed`` is accepted for interface symmetry with workload generation
    but the engine itself is deterministic: identical inputs produce
    byte-identical traces.
    """
    return Simulation(spec, config, scheduler, seed).run()
