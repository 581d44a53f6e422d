"""Scheduling policy: queue orders, quantum protection, eviction tiers,
and the checkpoint/restart cost model.

Two orders matter and they are different.

The *submitted* queue serves the highest user-local priority first; ties
go to the earlier submit time, then the lower id.  A checkpointed job
keeps its original submit time and priority, so eviction never resets
its aging: the scheduler stays memoryless, all ordering state lives in
the job itself.

The *running* queue is ordered for eviction, cheapest victim first:

  tier 0   unprotected jobs whose owner is above its entitlement
  tier 1   unprotected jobs whose owner is within its entitlement
  tier 2   quantum-protected jobs (never picked while protection is on)

Within a tier: lowest user-local priority first, then the longest
uninterrupted run (earliest last start), then submit time and id.
Preferring the longest-running victim sounds backwards but is the
anti-thrashing choice: that job has already banked its quantum of
uninterrupted progress, while a recently (re)started one would lose its
restart investment.

``VictimScope.SINGLE_TIER`` collapses tiers 0 and 1 into one
entitlement-blind order (config token ``paper_literal``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from .model import Job, JobState, ModelError, UsageSnapshot


class IdleFitMode(Enum):
    STRICT = "strict"        # idle CPUs must strictly exceed the request
    INCLUSIVE = "inclusive"  # idle CPUs may exactly cover the request


class VictimScope(Enum):
    SINGLE_TIER = "paper_literal"
    OVER_ENTITLEMENT_FIRST = "over_entitlement_first"


#: Victim tier of quantum-protected jobs; never dequeued by preemption.
PROTECTED_TIER = 2


@dataclass(frozen=True)
class PolicyConfig:
    """Knobs governing admission, eviction and checkpoint/restart costs.

    Durations are simulation seconds.  The cost of a checkpoint
    (restart) is ``fixed + per_cpu * cpu_count``, rounded up to a whole
    second; zero cost models instant state capture.

    ``quantum_seconds`` is the minimal uninterrupted run a job is owed
    before it can be evicted again; ``quantum_protection`` turns that
    shield off entirely (quantum 0 has the same effect).
    """

    quantum_seconds: int = 1800
    checkpoint_cost_fixed: float = 0
    checkpoint_cost_per_cpu: float = 0
    restart_cost_fixed: float = 0
    restart_cost_per_cpu: float = 0
    idle_fit_mode: IdleFitMode = IdleFitMode.STRICT
    quantum_protection: bool = True
    victim_scope: VictimScope = VictimScope.OVER_ENTITLEMENT_FIRST
    resubmit_killed: bool = False

    def __post_init__(self) -> None:
        for name in (
            "quantum_seconds",
            "checkpoint_cost_fixed",
            "checkpoint_cost_per_cpu",
            "restart_cost_fixed",
            "restart_cost_per_cpu",
        ):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be non-negative")


class OrderKey(NamedTuple):
    """Totally ordered sort key; lower sorts first (dequeued sooner).

    ``victim_tier`` is 0 for submitted-queue keys, where tiers do not
    apply.  ``tiebreak`` is a tuple of ints; its composition differs
    between the two queues but always ends in the job id, so the order
    is total.
    """

    victim_tier: int
    user_local_priority: int
    tiebreak: tuple


def submitted_order(job: Job) -> OrderKey:
    """Dequeue key for the submitted queue.

    Highest user-local priority first (hence the negation), then
    earliest submit time, then lowest id.  Applies equally to fresh and
    checkpointed jobs; a checkpointed job re-enters exactly where its
    original submit time puts it.
    """
    if job.state not in (JobState.SUBMITTED, JobState.CHECKPOINTED):
        raise ModelError(f"job {job.id} is not queued (state {job.state.value})")
    return OrderKey(0, -job.priority, (job.submit_time, job.id))


def is_quantum_protected(job: Job, now: int, config: PolicyConfig) -> bool:
    """True while a running job may not be evicted.

    A job is protected for its first ``quantum_seconds`` of uninterrupted
    runtime after every (re)start; at exactly one quantum it is demoted
    to eviction candidacy.  With protection disabled nothing is ever
    protected.
    """
    if job.state is not JobState.RUNNING or job.last_start_time is None:
        raise ModelError(f"job {job.id} is not running")
    if not config.quantum_protection:
        return False
    return now - job.last_start_time < config.quantum_seconds


def running_victim_order(
    job: Job, now: int, snapshot: UsageSnapshot, config: PolicyConfig
) -> OrderKey:
    """Eviction key for one running job; lower = evicted sooner.

    ``snapshot`` must describe the job's own user against the state the
    selection is evaluated in; callers re-evaluate after every eviction,
    because evicting one job can push its user back within entitlement
    and out of tier 0.
    """
    if is_quantum_protected(job, now, config):
        tier = PROTECTED_TIER
    elif (
        config.victim_scope is VictimScope.OVER_ENTITLEMENT_FIRST
        and snapshot.total_cpus <= snapshot.entitled_cpus
    ):
        tier = 1
    else:
        tier = 0
    return OrderKey(tier, job.priority, (job.last_start_time, job.submit_time, job.id))


def checkpoint_cost(job: Job, config: PolicyConfig) -> int:
    """Seconds to write the checkpoint image, rounded up."""
    return math.ceil(config.checkpoint_cost_fixed + config.checkpoint_cost_per_cpu * job.cpu_count)


def restart_cost(job: Job, config: PolicyConfig) -> int:
    """Seconds to restore a checkpointed job before it makes progress."""
    return math.ceil(config.restart_cost_fixed + config.restart_cost_per_cpu * job.cpu_count)
