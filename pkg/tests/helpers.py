"""Shared test utilities: random state builders, trace replay checks,
and fixture workloads."""

from __future__ import annotations

import random

from omfs import (
    ClusterState,
    Job,
    JobState,
    PolicyConfig,
    Trace,
    UserSpec,
    WorkloadSpec,
    entitled_cpu_count,
    restart_cost,
    user_table,
)


def random_admission_state(rng: random.Random) -> tuple[ClusterState, dict[str, UserSpec], Job]:
    """A random mid-simulation cluster plus one candidate job.

    Biased toward busy clusters so all admission paths get exercised;
    percents are drawn so their sum stays valid.
    """
    cpu_total = rng.randint(1, 32)
    names = [chr(ord("A") + i) for i in range(rng.randint(1, 4))]
    percents: dict[str, int] = {}
    remaining = 100
    for name in names:
        p = rng.randint(0, remaining)
        percents[name] = p
        remaining -= p
    users = user_table(percents)

    now = 100
    running: list[Job] = []
    target_busy = rng.choice([0, cpu_total // 2, cpu_total, cpu_total, cpu_total])
    busy = 0
    job_id = 1
    while busy < target_busy:
        cpus = rng.randint(1, min(cpu_total - busy, 8))
        preemptable = rng.random() < 0.7
        job = Job(
            id=job_id,
            user=rng.choice(names),
            cpu_count=cpus,
            total_runtime=rng.randint(100, 10000),
            submit_time=rng.randint(0, 50),
            priority=rng.randint(0, 3),
            preemptable=preemptable,
            checkpointable=preemptable and rng.random() < 0.7,
        )
        job.state = JobState.RUNNING
        job.last_start_time = rng.randint(0, 90)
        running.append(job)
        busy += cpus
        job_id += 1

    waiting: list[Job] = []
    for _ in range(rng.randint(0, 3)):
        preemptable = rng.random() < 0.7
        waiting.append(
            Job(
                id=job_id,
                user=rng.choice(names),
                cpu_count=rng.randint(0, cpu_total),
                total_runtime=rng.randint(100, 10000),
                submit_time=rng.randint(0, now),
                priority=rng.randint(0, 3),
                preemptable=preemptable,
                checkpointable=preemptable and rng.random() < 0.7,
            )
        )
        job_id += 1

    preemptable = rng.random() < 0.7
    candidate = Job(
        id=job_id,
        user=rng.choice(names),
        cpu_count=rng.randint(0, cpu_total),
        total_runtime=rng.randint(100, 10000),
        submit_time=rng.randint(0, now),
        priority=rng.randint(0, 3),
        preemptable=preemptable,
        checkpointable=preemptable and rng.random() < 0.7,
    )
    state = ClusterState(cpu_total=cpu_total, submitted=waiting, running=running, now=now)
    return state, users, candidate


# --- trace replay checks ----------------------------------------------------

_LEAVES_CPUS = ("checkpoint", "kill", "finish")


def assert_capacity_conserved(trace: Trace) -> None:
    """cpu_idle_after must equal cpu_total minus the running widths at
    every single record."""
    running: dict[int, int] = {}
    for record in trace.records:
        if record.event == "start":
            assert record.job_id not in running, f"double start: {record}"
            running[record.job_id] = record.cpus
        elif record.event in _LEAVES_CPUS:
            assert record.job_id in running, f"{record.event} while not running: {record}"
            del running[record.job_id]
        derived = trace.cpu_total - sum(running.values())
        assert record.cpu_idle_after == derived, (
            f"capacity drift at {record}: recorded {record.cpu_idle_after}, derived {derived}"
        )
        assert 0 <= record.cpu_idle_after <= trace.cpu_total, record
    assert not running, f"jobs left running at trace end: {sorted(running)}"


def assert_work_conserved(trace: Trace, config: PolicyConfig) -> None:
    """Finished jobs' running intervals (minus restart latency) must sum
    exactly to their total runtime."""
    work: dict[int, int] = {jid: 0 for jid in trace.jobs}
    work_began: dict[int, int] = {}
    for record in trace.records:
        jid = record.job_id
        if record.event == "start":
            latency = restart_cost(trace.jobs[jid], config) if record.detail.startswith("restart") else 0
            work_began[jid] = record.time + latency
        elif record.event in _LEAVES_CPUS:
            began = work_began.pop(jid)
            work[jid] += max(0, record.time - began)
        elif record.event == "resubmit":
            work[jid] = 0   # killed-and-resubmitted jobs redo everything
    for jid, meta in trace.jobs.items():
        if trace.outcomes[jid].final_state == "finished":
            assert work[jid] == meta.total_runtime, (
                f"job {jid}: accounted work {work[jid]} != total_runtime {meta.total_runtime}"
            )


def assert_no_protected_evictions(trace: Trace, config: PolicyConfig) -> None:
    """With protection on, no eviction may hit a job running for less
    than the quantum."""
    if not config.quantum_protection or config.quantum_seconds == 0:
        return
    started_at: dict[int, int] = {}
    for record in trace.records:
        if record.event == "start":
            started_at[record.job_id] = record.time
        elif record.event in ("checkpoint", "kill"):
            ran_for = record.time - started_at[record.job_id]
            assert ran_for >= config.quantum_seconds, (
                f"job {record.job_id} evicted after {ran_for}s < quantum {config.quantum_seconds}s"
            )


def assert_nonpreemptable_cap(trace: Trace, users: dict[str, UserSpec]) -> None:
    """Every admission of a non-preemptable job must leave its user's
    non-preemptable usage strictly below the entitlement."""
    assert trace.scheduler == "omfs"
    nonp_running: dict[str, int] = {}
    running_jobs: set[int] = set()
    for record in trace.records:
        meta = trace.jobs.get(record.job_id)
        if record.event == "start":
            running_jobs.add(record.job_id)
            if not meta.preemptable:
                entitled = entitled_cpu_count(users[meta.user].percent, trace.cpu_total)
                before = nonp_running.get(meta.user, 0)
                assert before + meta.cpu_count < entitled, (
                    f"job {record.job_id} admitted with non-preemptable load "
                    f"{before}+{meta.cpu_count} >= entitlement {entitled}"
                )
                nonp_running[meta.user] = before + meta.cpu_count
        elif record.event in _LEAVES_CPUS and record.job_id in running_jobs:
            running_jobs.discard(record.job_id)
            if not meta.preemptable:
                nonp_running[meta.user] -= meta.cpu_count


# --- fixture workloads ------------------------------------------------------

def pooling_fixture() -> WorkloadSpec:
    """One over-demanding user, two idle ones: static partitions waste
    half the cluster, pooling does not.  All values hand-picked so the
    utilizations come out as exact fractions."""
    return WorkloadSpec(
        cpu_total=16,
        users=user_table({"A": 50, "B": 25, "C": 25}),
        jobs=[
            Job(
                id=i,
                user="A",
                cpu_count=4,
                total_runtime=1000,
                submit_time=0,
                preemptable=True,
                checkpointable=True,
                estimated_runtime=1000,
            )
            for i in range(1, 13)
        ],
    )


def bursty_pooling_workload(seed: int) -> WorkloadSpec:
    """Seeded variant of the pooling shape: user A floods the cluster in
    bursts, user B stays idle.  Job widths never exceed A's partition,
    so the capped baseline can run everything, just slowly."""
    rng = random.Random(seed)
    jobs = []
    clock = 0
    for i in range(1, rng.randint(14, 22)):
        if rng.random() < 0.6:
            clock += rng.randint(0, 400)
        jobs.append(
            Job(
                id=i,
                user="A",
                cpu_count=rng.randint(1, 8),
                total_runtime=rng.randint(200, 2500),
                submit_time=clock,
                preemptable=True,
                checkpointable=True,
                estimated_runtime=rng.randint(2500, 3000),
            )
        )
    return WorkloadSpec(cpu_total=16, users=user_table({"A": 50, "B": 50}), jobs=jobs)


def contention_workload(seed: int, preemptable_bias: float = 0.85) -> WorkloadSpec:
    """Two users fighting over a small cluster; enough overlap that the
    fair-share runner has to preempt."""
    rng = random.Random(seed)
    cpu_total = rng.choice([8, 12, 16])
    users = user_table({"A": 50, "B": 30, "C": 20})
    jobs = []
    job_id = 1
    for user, count in (("A", 14), ("B", 12), ("C", 8)):
        clock = 0
        entitled = entitled_cpu_count(users[user].percent, cpu_total)
        for _ in range(count):
            if rng.random() < 0.5:
                clock += rng.randint(1, 900)
            preemptable = rng.random() < preemptable_bias
            width_cap = max(1, entitled if not preemptable else cpu_total // 2)
            jobs.append(
                Job(
                    id=job_id,
                    user=user,
                    cpu_count=rng.randint(1, width_cap),
                    total_runtime=rng.randint(100, 2200),
                    submit_time=clock,
                    priority=rng.randint(0, 2),
                    preemptable=preemptable,
                    checkpointable=preemptable and rng.random() < 0.8,
                    estimated_runtime=rng.randint(2200, 2600),
                )
            )
            job_id += 1
    return WorkloadSpec(cpu_total=cpu_total, users=users, jobs=jobs)
