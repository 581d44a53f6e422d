"""Core model: entitlements, usage snapshots, system validation."""

import random
from fractions import Fraction

import pytest

from omfs import (
    ClusterState,
    Job,
    JobState,
    ModelError,
    UserSpec,
    entitled_cpu_count,
    usage_snapshot,
    user_table,
    validate_system,
)


class TestEntitledCpuCount:
    def test_half_of_sixteen(self):
        assert entitled_cpu_count(50, 16) == 8

    def test_zero_percent(self):
        assert entitled_cpu_count(0, 128) == 0

    def test_thirtythree_of_hundred(self):
        assert entitled_cpu_count(33, 100) == 33

    def test_rounds_down(self):
        # 30% of 17 = 5.1; exact rational floor, no float rounding
        assert entitled_cpu_count(30, 17) == 5
        assert entitled_cpu_count(30, 17) == Fraction(30 * 17, 100).__floor__()

    def test_full_percent_is_whole_cluster(self):
        assert entitled_cpu_count(100, 23) == 23

    def test_out_of_range_percent(self):
        with pytest.raises(ModelError):
            entitled_cpu_count(101, 16)
        with pytest.raises(ModelError):
            entitled_cpu_count(-1, 16)

    def test_matches_rational_floor_everywhere(self):
        rng = random.Random(7)
        for _ in range(500):
            percent = rng.randint(0, 100)
            cpu_total = rng.randint(0, 4096)
            expected = Fraction(percent * cpu_total, 100).__floor__()
            assert entitled_cpu_count(percent, cpu_total) == expected

    def test_entitlements_never_oversubscribe(self):
        rng = random.Random(11)
        for _ in range(300):
            cpu_total = rng.randint(1, 512)
            remaining = 100
            shares = []
            for _ in range(rng.randint(1, 6)):
                p = rng.randint(0, remaining)
                shares.append(p)
                remaining -= p
            assert sum(entitled_cpu_count(p, cpu_total) for p in shares) <= cpu_total


class TestUserSpec:
    def test_percent_bounds(self):
        UserSpec("A", 0)
        UserSpec("A", 100)
        with pytest.raises(ModelError):
            UserSpec("A", 101)
        with pytest.raises(ModelError):
            UserSpec("A", -5)

    def test_percent_must_be_integer(self):
        with pytest.raises(ModelError):
            UserSpec("A", 50.5)
        with pytest.raises(ModelError):
            UserSpec("A", True)


class TestJob:
    def test_checkpointable_requires_preemptable(self):
        with pytest.raises(ModelError):
            Job(id=1, user="A", cpu_count=1, total_runtime=10, checkpointable=True)
        Job(id=1, user="A", cpu_count=1, total_runtime=10, preemptable=True, checkpointable=True)

    def test_completed_bounded_by_total(self):
        with pytest.raises(ModelError):
            Job(id=1, user="A", cpu_count=1, total_runtime=10, completed_runtime=11)
        job = Job(id=1, user="A", cpu_count=1, total_runtime=10, completed_runtime=10)
        assert job.remaining_runtime == 0

    def test_negative_fields_rejected(self):
        with pytest.raises(ModelError):
            Job(id=1, user="A", cpu_count=-1, total_runtime=10)
        with pytest.raises(ModelError):
            Job(id=1, user="A", cpu_count=1, total_runtime=-1)
        with pytest.raises(ModelError):
            Job(id=1, user="A", cpu_count=1, total_runtime=1, submit_time=-2)

    def test_identity_semantics(self):
        a = Job(id=1, user="A", cpu_count=1, total_runtime=10)
        b = Job(id=1, user="A", cpu_count=1, total_runtime=10)
        assert a != b
        queue = [a, b]
        queue.remove(b)
        assert queue == [a]

    def test_fresh_copy_is_independent(self):
        a = Job(id=1, user="A", cpu_count=1, total_runtime=10)
        b = a.fresh_copy()
        b.state = JobState.RUNNING
        b.completed_runtime = 5
        assert a.state is JobState.SUBMITTED
        assert a.completed_runtime == 0


class TestClusterState:
    def test_cpu_idle_is_derived(self):
        state = ClusterState(cpu_total=16)
        assert state.cpu_idle == 16
        job = Job(id=1, user="A", cpu_count=5, total_runtime=10)
        state.now = 3
        state.admit(job)
        assert state.cpu_idle == 11
        assert job.state is JobState.RUNNING
        assert job.last_start_time == 3
        state.running.remove(job)
        assert state.cpu_idle == 16

    def test_invariant_check_flags_double_membership(self):
        job = Job(id=1, user="A", cpu_count=1, total_runtime=10)
        state = ClusterState(cpu_total=4)
        state.admit(job)
        state.submitted.append(job)
        with pytest.raises(ModelError):
            state.check_invariants()


class TestUsageSnapshot:
    def _state(self):
        state = ClusterState(cpu_total=16)
        for job in (
            Job(id=1, user="A", cpu_count=3, total_runtime=10, preemptable=True),
            Job(id=2, user="A", cpu_count=1, total_runtime=10, preemptable=True),
            Job(id=3, user="A", cpu_count=2, total_runtime=10),
            Job(id=4, user="B", cpu_count=6, total_runtime=10, preemptable=True),
        ):
            state.admit(job)
        return state

    def test_split_by_preemptability(self):
        users = user_table({"A": 50, "B": 25})
        snap = usage_snapshot("A", self._state(), users)
        assert snap.preemptable_cpus == 4
        assert snap.non_preemptable_cpus == 2
        assert snap.total_cpus == 6
        assert snap.entitled_cpus == 8

    def test_other_user(self):
        users = user_table({"A": 50, "B": 25})
        snap = usage_snapshot("B", self._state(), users)
        assert snap.total_cpus == 6
        assert snap.non_preemptable_cpus == 0
        assert snap.entitled_cpus == 4

    def test_idle_user(self):
        users = user_table({"A": 50, "B": 25, "C": 25})
        snap = usage_snapshot("C", self._state(), users)
        assert snap.total_cpus == 0
        assert snap.entitled_cpus == 4

    def test_unknown_user(self):
        with pytest.raises(KeyError):
            usage_snapshot("Z", self._state(), user_table({"A": 50}))


class TestValidateSystem:
    def test_ok(self):
        assert validate_system(user_table({"A": 60, "B": 40}), 16) == []

    def test_undersubscribed_ok(self):
        assert validate_system(user_table({"A": 10}), 4) == []

    def test_oversubscribed(self):
        problems = validate_system(user_table({"A": 60, "B": 60}), 16)
        assert len(problems) == 1
        assert "120" in problems[0] and "exceeds 100" in problems[0]

    def test_bad_cpu_total(self):
        problems = validate_system(user_table({"A": 10}), 0)
        assert any("cpu_total" in p for p in problems)

    def test_every_violation_reported(self):
        users = {"A": UserSpec("A", 70), "B": UserSpec("B", 70)}
        problems = validate_system(users, -1)
        assert len(problems) == 2
