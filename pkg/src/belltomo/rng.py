"""Counter-based random streams with per-run, per-draw addressing.

Every random decision in a run is addressed by (master_seed, run_id,
draw_index).  Philox is a counter-based generator: keying it with the
master seed and advancing the 128-bit counter by four blocks per run
gives each run a disjoint, order-independent slice of one stream, so the
same triple always yields the same draw no matter how runs are sharded
or interleaved.

Draw indices are fixed protocol-wide:

    0  alice preparation label        7  rC axis choice
    1  bob preparation label          8  rC outcome
    2  pA axis choice                 9  rD axis choice
    3  pA outcome                    10  rD outcome
    4  pB axis choice                11  alice basis choice (two-source variant)
    5  pB outcome                    12  bob basis choice (two-source variant)
    6  q (Bell) outcome

Slots 13..15 are reserved.  A Philox counter block carries four 64-bit
words, so 16 double draws per run is exactly four counter increments.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "RngStream",
    "block_for_runs",
    "sample_index",
    "SLOTS_PER_RUN",
    "DRAW_ALICE_LABEL",
    "DRAW_BOB_LABEL",
    "DRAW_PA_AXIS",
    "DRAW_PA_OUT",
    "DRAW_PB_AXIS",
    "DRAW_PB_OUT",
    "DRAW_Q",
    "DRAW_RC_AXIS",
    "DRAW_RC_OUT",
    "DRAW_RD_AXIS",
    "DRAW_RD_OUT",
    "DRAW_ALICE_BASIS",
    "DRAW_BOB_BASIS",
]

DRAW_ALICE_LABEL = 0
DRAW_BOB_LABEL = 1
DRAW_PA_AXIS = 2
DRAW_PA_OUT = 3
DRAW_PB_AXIS = 4
DRAW_PB_OUT = 5
DRAW_Q = 6
DRAW_RC_AXIS = 7
DRAW_RC_OUT = 8
DRAW_RD_AXIS = 9
DRAW_RD_OUT = 10
DRAW_ALICE_BASIS = 11
DRAW_BOB_BASIS = 12

SLOTS_PER_RUN = 16
_BLOCKS_PER_RUN = SLOTS_PER_RUN // 4

MIN_SAMPLED_PROBABILITY = 1e-14


def block_for_runs(master_seed: int, start: int, count: int) -> np.ndarray:
    """Uniform draw blocks for runs start..start+count-1, one row per run.

    A Philox counter block yields four doubles, so advancing the counter
    by four per run makes row r of this array identical to the block an
    RngStream(master_seed, start + r) would materialize on its own.
    """
    bitgen = np.random.Philox(key=master_seed, counter=start * _BLOCKS_PER_RUN)
    return np.random.Generator(bitgen).random(count * SLOTS_PER_RUN).reshape(count, SLOTS_PER_RUN)


def sample_index(u: float, probabilities) -> int:
    """Inverse-CDF outcome sampling, trusting the caller's inputs.

    Probabilities below 1e-14 are never selected; ``u`` is rescaled by
    the surviving mass so the remainder stays a distribution.
    """
    total = 0.0
    for pk in probabilities:
        if pk >= MIN_SAMPLED_PROBABILITY:
            total += pk
    if total <= 0.0:
        raise ValueError("all outcome probabilities vanish")
    target = u * total
    acc = 0.0
    last = 0
    for k, pk in enumerate(probabilities):
        if pk < MIN_SAMPLED_PROBABILITY:
            continue
        acc += pk
        last = k
        if target < acc:
            return k
    return last


class RngStream:
    """The 16 uniform draws belonging to one (master_seed, run_id) pair."""

    def __init__(self, master_seed: int, run_id: int, _block: np.ndarray | None = None):
        if master_seed < 0 or master_seed > 2**64 - 1:
            raise ValueError(f"master_seed must fit in 64 bits, got {master_seed!r}")
        if run_id < 0:
            raise ValueError(f"run_id must be non-negative, got {run_id!r}")
        self.master_seed = master_seed
        self.run_id = run_id
        if _block is None:
            _block = block_for_runs(master_seed, run_id, 1)[0]
        self._block = _block

    def uniform(self, slot: int) -> float:
        """The uniform [0, 1) draw at the given slot of this run."""
        if not 0 <= slot < SLOTS_PER_RUN:
            raise ValueError(f"draw slot must be 0..{SLOTS_PER_RUN - 1}, got {slot!r}")
        return float(self._block[slot])

    def choice_index(self, slot: int, n: int) -> int:
        """Uniform index in range(n) from the slot's draw."""
        if n < 1:
            raise ValueError(f"choice over empty range at slot {slot}")
        idx = int(self.uniform(slot) * n)
        return min(idx, n - 1)

    def pick_outcome(self, slot: int, probabilities) -> int:
        """Sample an outcome index by inverse CDF over the given probabilities.

        Probabilities below 1e-14 are treated as exactly zero, so those
        outcomes are never sampled; the remainder is renormalized.
        """
        p = np.asarray(probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0 or not np.all(np.isfinite(p)) or np.any(p < -1e-9):
            raise ValueError(f"invalid probability vector {probabilities!r}")
        return sample_index(self.uniform(slot), p)
