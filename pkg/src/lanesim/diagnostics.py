"""Process-wide diagnostic counters (border-clamped samples, aborted
rollouts, skipped training batches). Purely informational; never affects
numerical results."""

COUNTERS = {
    "oob_samples": 0,
    "aborted_rollouts": 0,
    "skipped_batches": 0,
}


def reset(name=None):
    if name is None:
        for k in COUNTERS:
            COUNTERS[k] = 0
    else:
        COUNTERS[name] = 0
