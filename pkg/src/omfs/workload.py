"""Workload and configuration I/O.

Native workload format, line oriented, UTF-8::

    # cpu_total 16
    # user A 50
    # user B 25
    # id submit runtime est_runtime cpus user priority flags
    1 0 3600 4000 4 A 0 PC
    2 10 600 600 2 B 1 -

Lines starting with ``#`` are comments; ``# cpu_total N`` and
``# user NAME PERCENT`` are recognized as declarations and must precede
the job lines they govern.  Job lines carry 7 or 8 whitespace-separated
fields; the flags field is ``P`` (preemptable), ``PC`` (preemptable and
checkpointable), or ``-``/omitted for neither.  ``C`` alone is rejected:
a checkpoint is only ever taken at eviction, so checkpointable without
preemptable is meaningless.

The same module reads the standard workload format used by public
scheduling archives (18 whitespace-separated fields per job, ``;``
comment headers), generates synthetic workloads deterministically from a
seed, and parses the JSON system configuration.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, fields as dataclass_fields
from typing import NamedTuple

from .model import Job, ModelError, UserSpec, validate_system
from .policy import IdleFitMode, PolicyConfig, VictimScope


class WorkloadError(ValueError):
    """Malformed workload content; carries the offending line when known."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        super().__init__(message if line_no is None else f"line {line_no}: {message}")


class ConfigError(ValueError):
    """Malformed system configuration."""


@dataclass
class WorkloadSpec:
    """A complete simulation input: cluster size, user table, job list.

    Jobs are templates; a simulation copies them before mutating
    anything, so one spec can be run many times.
    """

    cpu_total: int
    users: dict[str, UserSpec]
    jobs: list[Job]

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for job in self.jobs:
            if job.id in seen:
                raise WorkloadError(f"duplicate job id {job.id}")
            seen.add(job.id)
            if job.user not in self.users:
                raise WorkloadError(f"job {job.id}: unknown user {job.user!r}")
            if job.cpu_count > self.cpu_total:
                raise WorkloadError(
                    f"job {job.id}: cpu_count {job.cpu_count} exceeds cpu_total {self.cpu_total}"
                )


def serialize_workload(spec: WorkloadSpec) -> str:
    """Canonical native-format text: users sorted by name, jobs by id.

    Canonical output makes the workload hash stable: equal specs always
    serialize to identical bytes.
    """
    lines = [f"# cpu_total {spec.cpu_total}"]
    for name in sorted(spec.users):
        lines.append(f"# user {name} {spec.users[name].percent}")
    lines.append("# id submit runtime est_runtime cpus user priority flags")
    for job in sorted(spec.jobs, key=lambda j: j.id):
        flags = ("P" if job.preemptable else "") + ("C" if job.checkpointable else "")
        est = job.estimated_runtime if job.estimated_runtime is not None else job.total_runtime
        lines.append(
            f"{job.id} {job.submit_time} {job.total_runtime} {est} "
            f"{job.cpu_count} {job.user} {job.priority} {flags or '-'}"
        )
    return "\n".join(lines) + "\n"


def workload_hash(spec: WorkloadSpec) -> str:
    """SHA-256 of the canonical serialization; ties traces to inputs."""
    return hashlib.sha256(serialize_workload(spec).encode("utf-8")).hexdigest()


def _int_field(raw: str, name: str, line_no: int, minimum: int = 0) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise WorkloadError(f"field {name!r}: invalid integer {raw!r}", line_no) from None
    if value < minimum:
        raise WorkloadError(f"field {name!r}: {value} below {minimum}", line_no)
    return value


def parse_workload(text: str) -> WorkloadSpec:
    """Parse native-format text; errors name the offending line."""
    cpu_total: int | None = None
    users: dict[str, UserSpec] = {}
    jobs: list[Job] = []
    seen_ids: set[int] = set()

    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            tokens = line[1:].split()
            if tokens[:1] == ["cpu_total"]:
                if cpu_total is not None:
                    raise WorkloadError("duplicate cpu_total declaration", line_no)
                if len(tokens) != 2:
                    raise WorkloadError("cpu_total declaration needs one value", line_no)
                cpu_total = _int_field(tokens[1], "cpu_total", line_no, minimum=1)
            elif tokens[:1] == ["user"]:
                if len(tokens) != 3:
                    raise WorkloadError("user declaration needs a name and a percent", line_no)
                name = tokens[1]
                if name in users:
                    raise WorkloadError(f"duplicate user {name!r}", line_no)
                percent = _int_field(tokens[2], "percent", line_no)
                try:
                    users[name] = UserSpec(name, percent)
                except ModelError as exc:
                    raise WorkloadError(str(exc), line_no) from None
            continue

        f = line.split()
        if len(f) not in (7, 8):
            raise WorkloadError(f"expected 7 or 8 fields, got {len(f)}", line_no)
        if cpu_total is None:
            raise WorkloadError("job line before cpu_total declaration", line_no)
        job_id = _int_field(f[0], "id", line_no)
        if job_id in seen_ids:
            raise WorkloadError(f"duplicate job id {job_id}", line_no)
        seen_ids.add(job_id)
        submit = _int_field(f[1], "submit", line_no)
        runtime = _int_field(f[2], "runtime", line_no)
        est = _int_field(f[3], "est_runtime", line_no)
        cpus = _int_field(f[4], "cpus", line_no)
        user = f[5]
        if user not in users:
            raise WorkloadError(f"unknown user {user!r}", line_no)
        priority = _int_field(f[6], "priority", line_no)
        flags = f[7] if len(f) == 8 else "-"
        if flags == "-":
            flags = ""
        if not set(flags) <= {"P", "C"} or len(flags) != len(set(flags)):
            raise WorkloadError(f"bad flags {f[7]!r} (want P, PC or -)", line_no)
        if "C" in flags and "P" not in flags:
            raise WorkloadError("flag C requires flag P: checkpoints are taken at eviction", line_no)
        if cpus > cpu_total:
            raise WorkloadError(f"cpus {cpus} exceeds cpu_total {cpu_total}", line_no)
        jobs.append(
            Job(
                id=job_id,
                user=user,
                cpu_count=cpus,
                total_runtime=runtime,
                submit_time=submit,
                priority=priority,
                preemptable="P" in flags,
                checkpointable="C" in flags,
                estimated_runtime=est,
            )
        )

    if cpu_total is None:
        raise WorkloadError("missing cpu_total declaration")
    return WorkloadSpec(cpu_total=cpu_total, users=users, jobs=jobs)


# --- standard archive format ------------------------------------------------

@dataclass(frozen=True)
class SwfDefaults:
    """Fills the attributes the archive format does not carry.

    ``estimate_factor`` pads true runtimes into walltime estimates
    (>= 1, ceil).  ``strict`` turns skip-with-warning into a hard error.
    ``cpu_total`` of None means "max job width in the file";
    ``user_percents`` of None means an equal split floor(100/n) over the
    users appearing in the file (named u<id>).
    """

    preemptable: bool = True
    checkpointable: bool = True
    estimate_factor: float = 1.0
    cpu_total: int | None = None
    user_percents: dict[str, int] | None = None
    strict: bool = False

    def __post_init__(self) -> None:
        if self.estimate_factor < 1.0:
            raise ConfigError(f"estimate_factor {self.estimate_factor} below 1")


class SwfImportResult(NamedTuple):
    spec: WorkloadSpec
    skipped_lines: list[int]


def import_swf(text: str, defaults: SwfDefaults = SwfDefaults()) -> SwfImportResult:
    """Import an 18-field archive workload.

    Field use (1-based): 1 id, 2 submit, 4 runtime, 8 requested CPUs
    with field 5 (allocated) as fallback, 12 user id.  ``;`` header
    lines are ignored.  Unusable rows (short, negative runtime or
    submit, no CPU count) are skipped and reported in lenient mode,
    rejected in strict mode.
    """
    rows: list[tuple[int, int, int, int, int]] = []   # id, submit, runtime, cpus, uid
    skipped: list[int] = []
    seen_ids: set[int] = set()

    def unusable(line_no: int, why: str) -> None:
        if defaults.strict:
            raise WorkloadError(why, line_no)
        skipped.append(line_no)

    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        f = line.split()
        if len(f) < 18:
            unusable(line_no, f"expected 18 fields, got {len(f)}")
            continue
        try:
            job_id = int(f[0])
            submit = int(f[1])
            runtime = int(f[3])
            allocated = int(f[4])
            requested = int(f[7])
            uid = int(f[11])
        except ValueError:
            unusable(line_no, "non-integer field")
            continue
        if runtime < 0:
            unusable(line_no, "runtime unset")
            continue
        if submit < 0:
            unusable(line_no, "submit time unset")
            continue
        cpus = requested if requested >= 0 else allocated
        if cpus < 0:
            unusable(line_no, "no processor count")
            continue
        if job_id in seen_ids:
            unusable(line_no, f"duplicate job id {job_id}")
            continue
        seen_ids.add(job_id)
        rows.append((job_id, submit, runtime, cpus, uid))

    if defaults.user_percents is not None:
        users = {name: UserSpec(name, pct) for name, pct in defaults.user_percents.items()}
    else:
        uids = sorted({uid for *_, uid in rows})
        share = 100 // len(uids) if uids else 0
        users = {f"u{uid}": UserSpec(f"u{uid}", share) for uid in uids}

    if defaults.cpu_total is not None:
        cpu_total = defaults.cpu_total
    else:
        cpu_total = max((cpus for _, _, _, cpus, _ in rows), default=1)
        cpu_total = max(cpu_total, 1)

    jobs: list[Job] = []
    for job_id, submit, runtime, cpus, uid in rows:
        user = f"u{uid}"
        if user not in users:
            raise WorkloadError(f"user {user!r} absent from the configured user table")
        if cpus > cpu_total:
            raise WorkloadError(f"job {job_id}: cpus {cpus} exceeds cpu_total {cpu_total}")
        est = max(runtime, math.ceil(runtime * defaults.estimate_factor))
        jobs.append(
            Job(
                id=job_id,
                user=user,
                cpu_count=cpus,
                total_runtime=runtime,
                submit_time=submit,
                priority=0,
                preemptable=defaults.preemptable,
                checkpointable=defaults.checkpointable and defaults.preemptable,
                estimated_runtime=est,
            )
        )
    return SwfImportResult(WorkloadSpec(cpu_total=cpu_total, users=users, jobs=jobs), skipped)


# --- synthetic workloads ----------------------------------------------------

@dataclass(frozen=True)
class GeneratorParams:
    """Parameters of the synthetic workload generator.

    The same params always produce the same workload: a single seeded
    RNG is consumed in a fixed order (users sorted, one arrival stream
    each).  ``burstiness`` is the probability that a job arrives at the
    same instant as its predecessor; otherwise gaps are exponential with
    mean ``1 / arrival_rate`` seconds.  Estimates are drawn uniformly in
    [runtime, runtime * estimate_pad_max], so they never undershoot.
    """

    seed: int
    n_jobs: int
    users: tuple[tuple[str, int], ...]
    cpu_total: int
    arrival_rate: float = 0.01
    runtime_min: int = 60
    runtime_max: int = 3600
    cpu_min: int = 1
    cpu_max: int = 4
    fraction_preemptable: float = 1.0
    fraction_checkpointable: float = 1.0
    burstiness: float = 0.0
    estimate_pad_max: float = 1.0
    max_priority: int = 0

    def validate(self) -> None:
        if self.n_jobs < 0:
            raise WorkloadError(f"n_jobs {self.n_jobs} negative")
        if not self.users:
            raise WorkloadError("no users")
        if self.cpu_total <= 0:
            raise WorkloadError(f"cpu_total {self.cpu_total} must be positive")
        if self.arrival_rate <= 0:
            raise WorkloadError(f"arrival_rate {self.arrival_rate} must be positive")
        if not 1 <= self.runtime_min <= self.runtime_max:
            raise WorkloadError(
                f"degenerate runtime bounds [{self.runtime_min}, {self.runtime_max}]"
            )
        if not 1 <= self.cpu_min <= self.cpu_max:
            raise WorkloadError(f"degenerate cpu bounds [{self.cpu_min}, {self.cpu_max}]")
        if self.cpu_max > self.cpu_total:
            raise WorkloadError(f"cpu_max {self.cpu_max} exceeds cpu_total {self.cpu_total}")
        for name, value in (
            ("fraction_preemptable", self.fraction_preemptable),
            ("fraction_checkpointable", self.fraction_checkpointable),
            ("burstiness", self.burstiness),
        ):
            if not 0.0 <= value <= 1.0:
                raise WorkloadError(f"{name} {value} outside [0, 1]")
        if self.estimate_pad_max < 1.0:
            raise WorkloadError(f"estimate_pad_max {self.estimate_pad_max} below 1")
        if self.max_priority < 0:
            raise WorkloadError(f"max_priority {self.max_priority} negative")


def generate_workload(params: GeneratorParams) -> WorkloadSpec:
    """Deterministically generate a workload from seeded parameters."""
    params.validate()
    users = {name: UserSpec(name, pct) for name, pct in params.users}
    problems = validate_system(users, params.cpu_total)
    if problems:
        raise WorkloadError("; ".join(problems))

    rng = random.Random(params.seed)
    per_user = params.n_jobs // len(users)
    extra = params.n_jobs % len(users)
    rows = []
    for index, name in enumerate(sorted(users)):
        count = per_user + (1 if index < extra else 0)
        clock = 0.0
        for k in range(count):
            if rng.random() >= params.burstiness:
                clock += rng.expovariate(params.arrival_rate)
            runtime = rng.randint(params.runtime_min, params.runtime_max)
            cpus = rng.randint(params.cpu_min, params.cpu_max)
            preemptable = rng.random() < params.fraction_preemptable
            checkpointable = preemptable and rng.random() < params.fraction_checkpointable
            est = math.ceil(runtime * rng.uniform(1.0, params.estimate_pad_max))
            priority = rng.randint(0, params.max_priority)
            rows.append((int(clock), name, k, runtime, cpus, preemptable, checkpointable, est, priority))

    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    jobs = [
        Job(
            id=job_id,
            user=name,
            cpu_count=cpus,
            total_runtime=runtime,
            submit_time=submit,
            priority=priority,
            preemptable=preemptable,
            checkpointable=checkpointable,
            estimated_runtime=max(est, runtime),
        )
        for job_id, (submit, name, _k, runtime, cpus, preemptable, checkpointable, est, priority)
        in enumerate(rows, start=1)
    ]
    return WorkloadSpec(cpu_total=params.cpu_total, users=users, jobs=jobs)


def generator_params_from_json(text: str) -> GeneratorParams:
    """Parse generator parameters from JSON; unknown keys are rejected."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorkloadError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise WorkloadError("generator parameters must be a JSON object")
    allowed = {f.name for f in dataclass_fields(GeneratorParams)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise WorkloadError(f"unknown generator parameter(s): {', '.join(unknown)}")
    for required in ("seed", "n_jobs", "users", "cpu_total"):
        if required not in data:
            raise WorkloadError(f"missing generator parameter {required!r}")
    raw_users = data["users"]
    if not isinstance(raw_users, list) or not all(
        isinstance(u, list) and len(u) == 2 and isinstance(u[0], str) for u in raw_users
    ):
        raise WorkloadError('generator "users" must be a list of [name, percent] pairs')
    data = dict(data, users=tuple((name, pct) for name, pct in raw_users))
    try:
        params = GeneratorParams(**data)
    except TypeError as exc:
        raise WorkloadError(str(exc)) from None
    params.validate()
    return params


# --- system configuration ---------------------------------------------------

@dataclass(frozen=True)
class SystemConfig:
    """Everything a config file may carry.

    ``users`` and ``cpu_total`` are optional; when present they override
    whatever the workload file declares.
    """

    users: dict[str, UserSpec] | None
    cpu_total: int | None
    policy: PolicyConfig
    swf_defaults: SwfDefaults


_TOP_KEYS = {
    "cpu_total",
    "users",
    "quantum_seconds",
    "checkpoint_cost",
    "restart_cost",
    "idle_fit_mode",
    "quantum_protection",
    "victim_scope",
    "resubmit_killed",
    "swf_defaults",
}
_COST_KEYS = {"fixed", "per_cpu"}
_SWF_KEYS = {"preemptable", "checkpointable", "estimate_factor", "strict"}


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _check_int(value, key: str, minimum: int = 0) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), f"{key} must be an integer")
    _require(value >= minimum, f"{key} must be >= {minimum}")
    return value


def _check_number(value, key: str) -> float:
    _require(
        isinstance(value, (int, float)) and not isinstance(value, bool),
        f"{key} must be a number",
    )
    _require(value >= 0, f"{key} must be non-negative")
    return value


def _check_bool(value, key: str) -> bool:
    _require(isinstance(value, bool), f"{key} must be true or false")
    return value


def _cost_pair(data: dict, key: str) -> tuple[float, float]:
    value = data.get(key, {})
    _require(isinstance(value, dict), f"{key} must be an object with fixed/per_cpu")
    unknown = sorted(set(value) - _COST_KEYS)
    _require(not unknown, f"unknown {key} key(s): {', '.join(unknown)}")
    return (
        _check_number(value.get("fixed", 0), f"{key}.fixed"),
        _check_number(value.get("per_cpu", 0), f"{key}.per_cpu"),
    )


def parse_config(text: str) -> SystemConfig:
    """Parse the JSON system configuration.

    Every key is optional and defaults apply; unknown keys are rejected
    so that typos fail loudly instead of silently running defaults.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    _require(isinstance(data, dict), "config must be a JSON object")
    unknown = sorted(set(data) - _TOP_KEYS)
    _require(not unknown, f"unknown config key(s): {', '.join(unknown)}")

    users: dict[str, UserSpec] | None = None
    if "users" in data:
        raw = data["users"]
        _require(isinstance(raw, dict) and raw, "users must be a non-empty object of name: percent")
        users = {}
        total = 0
        for name, pct in raw.items():
            _require(
                isinstance(pct, int) and not isinstance(pct, bool),
                f"user {name!r}: percent must be an integer",
            )
            try:
                users[name] = UserSpec(name, pct)
            except ModelError as exc:
                raise ConfigError(str(exc)) from None
            total += pct
        _require(total <= 100, f"user percent sum {total} exceeds 100")

    cpu_total = _check_int(data["cpu_total"], "cpu_total", minimum=1) if "cpu_total" in data else None

    ckpt_fixed, ckpt_per_cpu = _cost_pair(data, "checkpoint_cost")
    rst_fixed, rst_per_cpu = _cost_pair(data, "restart_cost")

    fit_raw = data.get("idle_fit_mode", IdleFitMode.STRICT.value)
    try:
        fit = IdleFitMode(fit_raw)
    except ValueError:
        valid = ", ".join(m.value for m in IdleFitMode)
        raise ConfigError(f"idle_fit_mode {fit_raw!r} not one of: {valid}") from None

    scope_raw = data.get("victim_scope", VictimScope.OVER_ENTITLEMENT_FIRST.value)
    try:
        scope = VictimScope(scope_raw)
    except ValueError:
        valid = ", ".join(m.value for m in VictimScope)
        raise ConfigError(f"victim_scope {scope_raw!r} not one of: {valid}") from None

    policy = PolicyConfig(
        quantum_seconds=_check_int(data.get("quantum_seconds", 1800), "quantum_seconds"),
        checkpoint_cost_fixed=ckpt_fixed,
        checkpoint_cost_per_cpu=ckpt_per_cpu,
        restart_cost_fixed=rst_fixed,
        restart_cost_per_cpu=rst_per_cpu,
        idle_fit_mode=fit,
        quantum_protection=_check_bool(data.get("quantum_protection", True), "quantum_protection"),
        victim_scope=scope,
        resubmit_killed=_check_bool(data.get("resubmit_killed", False), "resubmit_killed"),
    )

    raw_swf = data.get("swf_defaults", {})
    _require(isinstance(raw_swf, dict), "swf_defaults must be an object")
    unknown = sorted(set(raw_swf) - _SWF_KEYS)
    _require(not unknown, f"unknown swf_defaults key(s): {', '.join(unknown)}")
    swf = SwfDefaults(
        preemptable=_check_bool(raw_swf.get("preemptable", True), "swf_defaults.preemptable"),
        checkpointable=_check_bool(raw_swf.get("checkpointable", True), "swf_defaults.checkpointable"),
        estimate_factor=_check_number(raw_swf.get("estimate_factor", 1.0), "swf_defaults.estimate_factor"),
        cpu_total=cpu_total,
        user_percents={n: s.percent for n, s in users.items()} if users else None,
        strict=_check_bool(raw_swf.get("strict", False), "swf_defaults.strict"),
    )
    return SystemConfig(users=users, cpu_total=cpu_total, policy=policy, swf_defaults=swf)
