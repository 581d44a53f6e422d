"""Baseline schedulers the fair-share runner is measured against.

All three ignore preemption and checkpoint flags:

* ``fcfs``      strict arrival order with head-of-line blocking
* ``backfill``  FCFS plus conservative backfilling behind a single
                reservation for the blocked head
* ``capped``    static partitions sized to the entitlements, no borrowing

A baseline pass mutates the cluster state like the fair-share runner
does (admitted jobs move to the running queue at ``state.now``) and
returns a list of actions for the caller to record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .model import ClusterState, Job, ModelError, UserSpec, entitled_cpu_count
from .policy import PolicyConfig


@dataclass(frozen=True)
class Action:
    """One observable baseline step: kind is 'start', 'reserve' or
    'unrunnable'."""

    kind: str
    job: Job
    detail: str = ""


def arrival_order(job: Job) -> tuple[int, int]:
    """Cross-user queue order for the baselines: submit time, then id.

    User-local priorities are not comparable across users, so the
    baselines do not look at them.
    """
    return (job.submit_time, job.id)


def _estimate(job: Job) -> tuple[int, bool]:
    """(walltime estimate, fell back to the true runtime?)"""
    if job.estimated_runtime is not None:
        return job.estimated_runtime, False
    return job.total_runtime, True


def _estimated_end(job: Job, now: int) -> int:
    """Projected completion of a running job.

    A job past its estimate is assumed to finish imminently rather than
    in the past: reservations keep moving instead of freezing at a time
    that has already elapsed.
    """
    est, _ = _estimate(job)
    assert job.last_start_time is not None
    return max(job.last_start_time + est, now + 1)


def fcfs_pass(state: ClusterState, users: Mapping[str, UserSpec], config: PolicyConfig) -> list[Action]:
    """First-come-first-served: the head job runs iff it fits the idle
    CPUs (inclusive); otherwise the whole queue blocks behind it."""
    actions: list[Action] = []
    for job in sorted(state.submitted, key=arrival_order):
        if job.cpu_count > state.cpu_idle:
            break
        state.submitted.remove(job)
        state.admit(job)
        actions.append(Action("start", job))
    return actions


def backfill_pass(state: ClusterState, users: Mapping[str, UserSpec], config: PolicyConfig) -> list[Action]:
    """FCFS plus conservative backfilling.

    When the head blocks, one reservation is computed for it: the
    earliest time at which projected completions (from walltime
    estimates) free enough CPUs.  Later jobs may start out of order iff
    they fit the idle CPUs now and either finish by the reservation or
    fit within the CPUs the reservation leaves spare.  Only the head
    holds a reservation; everything behind it waits or backfills.
    """
    actions: list[Action] = []
    queue = sorted(state.submitted, key=arrival_order)

    while queue and queue[0].cpu_count <= state.cpu_idle:
        job = queue.pop(0)
        state.submitted.remove(job)
        state.admit(job)
        actions.append(Action("start", job))
    if not queue:
        return actions

    head = queue[0]
    now = state.now
    idle = state.cpu_idle
    ends = sorted((_estimated_end(j, now), j.cpu_count) for j in state.running)
    freed = 0
    reserve_at = None
    for end, cpus in ends:
        freed += cpus
        if idle + freed >= head.cpu_count:
            reserve_at = end
            break
    if reserve_at is None:
        # idle + every running CPU = cpu_total >= any valid request
        raise ModelError(f"job {head.id} can never fit the cluster")
    # CPUs projected free at the reservation beyond what the head needs;
    # jobs ending at exactly reserve_at all contribute.
    freed_by_then = sum(c for e, c in ends if e <= reserve_at)
    extra = idle + freed_by_then - head.cpu_count
    actions.append(Action("reserve", head, f"at={reserve_at}"))

    for job in queue[1:]:
        if job.cpu_count > idle:
            continue
        est, fallback = _estimate(job)
        if now + est <= reserve_at:
            pass                      # returns its CPUs before the head needs them
        elif job.cpu_count <= extra:
            extra -= job.cpu_count    # runs through the reservation on spare CPUs
        else:
            continue
        state.submitted.remove(job)
        state.admit(job)
        idle -= job.cpu_count
        actions.append(Action("start", job, "est_fallback" if fallback else ""))
    return actions


def capped_pass(state: ClusterState, users: Mapping[str, UserSpec], config: PolicyConfig) -> list[Action]:
    """Static partitions: each user owns exactly its entitlement and may
    never borrow idle CPUs from anyone else.

    A job wider than its user's whole partition can never start; it is
    reported unrunnable once and removed from the queue.
    """
    actions: list[Action] = []
    used: dict[str, int] = {}
    for j in state.running:
        used[j.user] = used.get(j.user, 0) + j.cpu_count
    for job in sorted(state.submitted, key=arrival_order):
        cap = entitled_cpu_count(users[job.user].percent, state.cpu_total)
        if job.cpu_count > cap:
            state.submitted.remove(job)
            actions.append(Action("unrunnable", job, f"partition={cap}"))
            continue
        if used.get(job.user, 0) + job.cpu_count <= cap:
            state.submitted.remove(job)
            state.admit(job)
            used[job.user] = used.get(job.user, 0) + job.cpu_count
            actions.append(Action("start", job))
    return actions
