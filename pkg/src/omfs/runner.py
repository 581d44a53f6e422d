"""Admission and preemption: the memoryless fair-share runner.

A dequeued job J of user u leaves ``try_run`` through exactly one of
five exits, checked in this order:

  1. J is not preemptable and u's running non-preemptable CPUs plus J
     would reach u's entitlement: refused.  The non-preemptable class
     may never fill the entitlement (note the >=): some entitled
     capacity must stay reclaimable, or a later preemption could only
     kill.
  2. Idle CPUs fit J: run.  Idle capacity is free for anyone regardless
     of entitlement; in STRICT mode "fit" means strictly more idle than
     requested, in INCLUSIVE mode an exact fit also runs.
  3. J does not fit u's remaining entitlement headroom
     (cpu_count > entitled - total): refused.  Borrowed capacity above
     the entitlement is only ever obtained through exit 2.
  4. J fits the headroom: evict running jobs, cheapest victim first,
     until J's request is covered, then run.
  5. Quantum protection left too few evictable CPUs: refused with the
     state untouched.

Exits 1, 3 and 5 put J back into the submitted queue unchanged; the
runner keeps no memory of refusals, so the same job is simply attempted
again on a later pass.

The fairness consequence of this shape: a user with suitable queued
work can always claim up to its entitlement, because exit 4 may evict
any unprotected job on the cluster, and over-entitled users are bled
first.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .model import (
    ClusterState,
    Job,
    JobState,
    ModelError,
    UsageSnapshot,
    UserSpec,
    entitled_cpu_count,
    usage_snapshot,
)
from .policy import (
    IdleFitMode,
    PolicyConfig,
    is_quantum_protected,
    running_victim_order,
    submitted_order,
)


class DecisionKind(Enum):
    RUN = "run"
    RUN_AFTER_PREEMPTION = "run_after_preemption"
    REQUEUE_OVER_NONPREEMPTABLE_CAP = "requeue_over_nonpreemptable_cap"
    REQUEUE_NO_ENTITLEMENT_FIT = "requeue_no_entitlement_fit"
    REQUEUE_PROTECTED_CAPACITY = "requeue_protected_capacity"

    @property
    def is_requeue(self) -> bool:
        return self.value.startswith("requeue")


class Disposition(Enum):
    """What happened to an evicted job."""

    CHECKPOINTED = "checkpointed"   # progress kept, back in the queue
    DROPPED = "dropped"             # no checkpoint support: work lost


@dataclass(frozen=True)
class Decision:
    """Outcome of one admission attempt.

    ``victims`` lists (job id, disposition) in eviction order; empty for
    every kind except RUN_AFTER_PREEMPTION.  ``cpu_idle_after`` is the
    derived idle count after the whole attempt, recorded for tracing.
    """

    kind: DecisionKind
    job_id: int
    victims: tuple[tuple[int, Disposition], ...]
    cpu_idle_after: int


def _user_usage(user: str, running: list[Job], cpu_total: int, users: Mapping[str, UserSpec]) -> UsageSnapshot:
    """Snapshot of one user over an explicit running list (possibly a
    scratch list mid-victim-selection, hence not taking ClusterState)."""
    p = np = 0
    for j in running:
        if j.user != user:
            continue
        if j.preemptable:
            p += j.cpu_count
        else:
            np += j.cpu_count
    return UsageSnapshot(user, p, np, p + np, entitled_cpu_count(users[user].percent, cpu_total))


def preempt_until(
    needed: int,
    state: ClusterState,
    users: Mapping[str, UserSpec],
    config: PolicyConfig,
) -> list[tuple[int, Disposition]] | None:
    """Evict running jobs, cheapest victim first, until at least
    ``needed`` CPUs are idle.

    Victim choice is re-evaluated after every eviction: a user bled back
    within its entitlement stops being a preferred target mid-loop.
    Checkpointable victims go straight back to the submitted queue with
    their progress kept; anything else is dropped for good.  Freed CPUs
    count immediately, whatever a checkpoint may cost in wall time.

    Returns victims in eviction order, or None when quantum protection
    leaves too few evictable CPUs; in that case the state is untouched.
    """
    if needed > state.cpu_total:
        raise ModelError(f"cannot free {needed} CPUs on a {state.cpu_total}-CPU cluster")

    # Phase one: pick victims against a scratch copy, so an infeasible
    # request rolls back without ever having mutated anything.
    remaining = list(state.running)
    idle = state.cpu_idle
    chosen: list[Job] = []
    while idle < needed:
        candidates = [j for j in remaining if not is_quantum_protected(j, state.now, config)]
        if not candidates:
            return None
        victim = min(
            candidates,
            key=lambda j: running_victim_order(
                j, state.now, _user_usage(j.user, remaining, state.cpu_total, users), config
            ),
        )
        remaining.remove(victim)
        chosen.append(victim)
        idle += victim.cpu_count

    # Phase two: commit.
    victims: list[tuple[int, Disposition]] = []
    for v in chosen:
        state.running.remove(v)
        if v.checkpointable:
            v.state = JobState.CHECKPOINTED
            v.checkpoint_count += 1
            state.submitted.append(v)
            victims.append((v.id, Disposition.CHECKPOINTED))
        else:
            v.state = JobState.KILLED
            victims.append((v.id, Disposition.DROPPED))
    return victims


def _refuse(job: Job, state: ClusterState, kind: DecisionKind) -> Decision:
    state.submitted.append(job)
    return Decision(kind, job.id, (), state.cpu_idle)


def try_run(
    job: Job,
    state: ClusterState,
    users: Mapping[str, UserSpec],
    config: PolicyConfig,
) -> Decision:
    """Attempt to run one dequeued job, mutating ``state`` in place.

    ``job`` must be off-queue and in state SUBMITTED or CHECKPOINTED.
    On a requeue decision the job is appended back to the submitted
    queue and nothing else changes.
    """
    if job.state not in (JobState.SUBMITTED, JobState.CHECKPOINTED):
        raise ModelError(f"job {job.id} not admissible (state {job.state.value})")
    if job.cpu_count > state.cpu_total:
        raise ModelError(f"job {job.id} wants {job.cpu_count} of {state.cpu_total} CPUs")

    snap = usage_snapshot(job.user, state, users)

    if not job.preemptable and snap.non_preemptable_cpus + job.cpu_count >= snap.entitled_cpus:
        return _refuse(job, state, DecisionKind.REQUEUE_OVER_NONPREEMPTABLE_CAP)

    idle = state.cpu_idle
    if config.idle_fit_mode is IdleFitMode.INCLUSIVE:
        fits_idle = idle >= job.cpu_count
    else:
        fits_idle = idle > job.cpu_count
    if fits_idle:
        state.admit(job)
        return Decision(DecisionKind.RUN, job.id, (), state.cpu_idle)

    if job.cpu_count > snap.entitled_cpus - snap.total_cpus:
        return _refuse(job, state, DecisionKind.REQUEUE_NO_ENTITLEMENT_FIT)

    victims = preempt_until(job.cpu_count, state, users, config)
    if victims is None:
        return _refuse(job, state, DecisionKind.REQUEUE_PROTECTED_CAPACITY)
    state.admit(job)
    return Decision(DecisionKind.RUN_AFTER_PREEMPTION, job.id, tuple(victims), state.cpu_idle)


def scheduler_pass(
    state: ClusterState,
    users: Mapping[str, UserSpec],
    config: PolicyConfig,
) -> list[Decision]:
    """One admission sweep over the submitted queue.

    Every job queued at the start of the pass is attempted exactly once,
    in queue order.  Jobs requeued by their own attempt, and victims
    checkpointed back into the queue, wait for the next pass; a pass
    never retries, so a blocked head job cannot spin the scheduler.
    """
    decisions: list[Decision] = []
    for job in sorted(state.submitted, key=submitted_order):
        state.submitted.remove(job)   # identity-based; Job has eq=False
        decisions.append(try_run(job, state, users, config))
    return decisions
