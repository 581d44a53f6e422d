"""Core domain types for the fair-share cluster model.

The resource model is deliberately one-dimensional: a cluster is
``cpu_total`` interchangeable CPUs, a job demands ``cpu_count`` of them
for ``total_runtime`` seconds of work, and a user owns an integer
percentage of the pool.  A user's entitlement is
``floor(percent * cpu_total / 100)``, computed in exact integer
arithmetic; no floats are involved anywhere in the capacity accounting.

Time is integer seconds throughout.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping


class ModelError(ValueError):
    """A violated precondition or malformed domain value."""


class JobState(Enum):
    SUBMITTED = "submitted"
    RUNNING = "running"
    CHECKPOINTED = "checkpointed"
    KILLED = "killed"
    FINISHED = "finished"


@dataclass(frozen=True)
class UserSpec:
    """A named user owning an integer share of the cluster, in percent."""

    name: str
    percent: int

    def __post_init__(self) -> None:
        # bool is an int subclass; reject it explicitly
        if not isinstance(self.percent, int) or isinstance(self.percent, bool):
            raise ModelError(f"user {self.name!r}: percent must be an integer, got {self.percent!r}")
        if not 0 <= self.percent <= 100:
            raise ModelError(f"user {self.name!r}: percent {self.percent} outside [0, 100]")


def user_table(percents: Mapping[str, int]) -> dict[str, UserSpec]:
    """Convenience constructor: {name: percent} -> {name: UserSpec}."""
    return {name: UserSpec(name, pct) for name, pct in percents.items()}


@dataclass(eq=False)
class Job:
    """One unit of work: a CPU demand plus an amount of runtime.

    ``priority`` is user-local: it orders jobs of the same user against
    each other and is never compared across users.  ``completed_runtime``
    is the work preserved across checkpoints; a job finishes when it
    reaches ``total_runtime``.  ``checkpointable`` implies ``preemptable``
    (a checkpoint is taken only when the scheduler evicts the job).

    Jobs have identity semantics (eq=False): queue membership is by
    object, so two distinct jobs with equal fields never alias.
    """

    id: int
    user: str
    cpu_count: int
    total_runtime: int
    submit_time: int = 0
    priority: int = 0
    preemptable: bool = False
    checkpointable: bool = False
    estimated_runtime: int | None = None
    completed_runtime: int = 0
    state: JobState = JobState.SUBMITTED
    last_start_time: int | None = None
    checkpoint_count: int = 0

    def __post_init__(self) -> None:
        if self.cpu_count < 0:
            raise ModelError(f"job {self.id}: cpu_count {self.cpu_count} negative")
        if self.total_runtime < 0:
            raise ModelError(f"job {self.id}: total_runtime {self.total_runtime} negative")
        if self.submit_time < 0:
            raise ModelError(f"job {self.id}: submit_time {self.submit_time} negative")
        if self.priority < 0:
            raise ModelError(f"job {self.id}: priority {self.priority} negative")
        if self.estimated_runtime is not None and self.estimated_runtime < 0:
            raise ModelError(f"job {self.id}: estimated_runtime negative")
        if self.checkpointable and not self.preemptable:
            raise ModelError(f"job {self.id}: checkpointable requires preemptable")
        if not 0 <= self.completed_runtime <= self.total_runtime:
            raise ModelError(
                f"job {self.id}: completed_runtime {self.completed_runtime} "
                f"outside [0, {self.total_runtime}]"
            )

    @property
    def remaining_runtime(self) -> int:
        return self.total_runtime - self.completed_runtime

    def fresh_copy(self) -> "Job":
        """Independent copy, for running one workload template many times."""
        return dataclasses.replace(self)


@dataclass(frozen=True)
class UsageSnapshot:
    """A user's running CPU consumption split by preemptability, plus the
    entitlement it is measured against."""

    user: str
    preemptable_cpus: int
    non_preemptable_cpus: int
    total_cpus: int
    entitled_cpus: int


@dataclass
class ClusterState:
    """The two queues plus the clock.

    ``cpu_idle`` is derived from the running queue rather than stored, so
    it can never drift from queue membership.  The submitted queue holds
    jobs waiting to be (re)started, including checkpointed ones; queue
    *order* is a policy concern, the list here is plain insertion order.
    """

    cpu_total: int
    submitted: list[Job] = field(default_factory=list)
    running: list[Job] = field(default_factory=list)
    now: int = 0

    def __post_init__(self) -> None:
        if self.cpu_total < 0:
            raise ModelError(f"cpu_total {self.cpu_total} negative")

    @property
    def cpu_idle(self) -> int:
        return self.cpu_total - sum(j.cpu_count for j in self.running)

    def running_for(self, user: str) -> list[Job]:
        return [j for j in self.running if j.user == user]

    def admit(self, job: Job) -> None:
        """Move a dequeued job onto the CPUs at the current time."""
        job.state = JobState.RUNNING
        job.last_start_time = self.now
        self.running.append(job)

    def check_invariants(self) -> None:
        """Cheap structural sanity; used by tests and debug paths."""
        if not 0 <= self.cpu_idle <= self.cpu_total:
            raise ModelError(f"cpu_idle {self.cpu_idle} outside [0, {self.cpu_total}]")
        seen: set[int] = set()
        for j in self.running + self.submitted:
            if id(j) in seen:
                raise ModelError(f"job {j.id} present in both queues")
            seen.add(id(j))
        for j in self.running:
            if j.state is not JobState.RUNNING:
                raise ModelError(f"running queue holds job {j.id} in state {j.state.value}")


def entitled_cpu_count(percent: int, cpu_total: int) -> int:
    """CPUs guaranteed to a user: floor(percent * cpu_total / 100).

    Pure integer arithmetic; entitlements across a valid user set can
    never sum past ``cpu_total``.
    """
    if not 0 <= percent <= 100:
        raise ModelError(f"percent {percent} outside [0, 100]")
    if cpu_total < 0:
        raise ModelError(f"cpu_total {cpu_total} negative")
    return percent * cpu_total // 100


def usage_snapshot(user: str, state: ClusterState, users: Mapping[str, UserSpec]) -> UsageSnapshot:
    """Current consumption of one user, split by preemptability.

    Raises KeyError for a user absent from the table.
    """
    spec = users[user]
    p = np = 0
    for job in state.running:
        if job.user != user:
            continue
        if job.preemptable:
            p += job.cpu_count
        else:
            np += job.cpu_count
    return UsageSnapshot(
        user=user,
        preemptable_cpus=p,
        non_preemptable_cpus=np,
        total_cpus=p + np,
        entitled_cpus=entitled_cpu_count(spec.percent, state.cpu_total),
    )


def validate_system(users: Mapping[str, UserSpec], cpu_total: int) -> list[str]:
    """Check a system configuration; an empty list means acceptable.

    Every violated constraint is reported, not just the first.
    """
    problems: list[str] = []
    if cpu_total <= 0:
        problems.append(f"cpu_total {cpu_total} must be positive")
    total = 0
    for name, spec in users.items():
        if name != spec.name:
            problems.append(f"user table key {name!r} does not match spec name {spec.name!r}")
        if not 0 <= spec.percent <= 100:
            problems.append(f"user {name!r}: percent {spec.percent} outside [0, 100]")
        total += spec.percent
    if total > 100:
        problems.append(f"user percent sum {total} exceeds 100")
    return problems
