"""Straight-line reference implementation of the fair-share admission
procedure, used as a test oracle.

Deliberately independent of the package internals: it keeps its own
queues as plain lists, re-derives every aggregate inline, and returns
path names instead of decision objects.  Mirrors the single-tier victim
order (no entitlement tiers, no quantum), which is the configuration the
equivalence tests pin.
"""


def reference_try_run(job, running, submitted, cpu_total, percents):
    """Attempt one job against mutable ``running``/``submitted`` lists.

    Returns (path, victim ids in eviction order) where path is one of
    refused_nonpreemptable | ran_idle | refused_no_fit | ran_preempt.
    """
    pable = sum(j.cpu_count for j in running if j.user == job.user and j.preemptable)
    nonp = sum(j.cpu_count for j in running if j.user == job.user and not j.preemptable)
    total = pable + nonp
    entitled = (percents[job.user] * cpu_total) // 100
    cpu_idle = cpu_total - sum(j.cpu_count for j in running)

    if (not job.preemptable) and nonp + job.cpu_count >= entitled:
        submitted.append(job)
        return "refused_nonpreemptable", []

    if cpu_idle > job.cpu_count:
        running.append(job)
        return "ran_idle", []

    if job.cpu_count > entitled - total:
        submitted.append(job)
        return "refused_no_fit", []

    victims = []
    while cpu_idle < job.cpu_count:
        victim = min(running, key=lambda j: (j.priority, j.last_start_time, j.submit_time, j.id))
        running.remove(victim)
        if victim.checkpointable:
            submitted.append(victim)
        victims.append(victim.id)
        cpu_idle += victim.cpu_count
    running.append(job)
    return "ran_preempt", victims
