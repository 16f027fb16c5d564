"""Counter-based random streams.

Every round owns a fixed block of ``ROUND_WIDTH`` uniforms drawn from a Philox
stream keyed by the session seed. Round ``i`` starts at counter ``i * 10``, so a
single round can be regenerated on its own and any split of a session into
batches reproduces the same numbers.

Session-level draws (which coincident rounds Bob discloses, sweep seeds) come
from separate Philox streams that differ in the third counter word, so they
never overlap the round blocks.
"""

from __future__ import annotations

import numpy as np

ROUND_WIDTH = 40
# Philox emits four 64-bit words per counter step, one double per word.
_STEPS_PER_ROUND = ROUND_WIDTH // 4

SEED_MAX = 2**64 - 1

# Slot layout inside a round block.
SOURCE_PHASE = 0
ALICE_CHOICE = 1
BOB_GUESS = 2
EVE_BOB = 3        # 8 slots: angle, 6 detector slots, vacuum guess
EVE_ALICE = 11     # same layout, used only for the symmetric attack
ALICE_DETECT = 19  # 6 slots, see optics.DETECT_WIDTH
ALICE_RESOLVE = 25
BOB_DETECT = 26
BOB_RESOLVE = 32

EVE_WIDTH = 8

# Session-level stream tags.
TAG_DISCLOSURE = 1
TAG_SWEEP = 2
TAG_AUX = 3


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def round_uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniforms for rounds ``start .. start+count-1``, shape ``(count, ROUND_WIDTH)``."""
    seed = check_seed(seed)
    if start < 0 or count < 0:
        raise ValueError("start and count must be non-negative")
    bitgen = np.random.Philox(key=seed, counter=[start * _STEPS_PER_ROUND, 0, 0, 0])
    return np.random.Generator(bitgen).random((count, ROUND_WIDTH))


def session_generator(seed: int, tag: int) -> np.random.Generator:
    """Generator for session-level draws, disjoint from every round block."""
    seed = check_seed(seed)
    if tag < 1:
        raise ValueError("session stream tags start at 1")
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, tag, 0]))


def derive_seed(seed: int, index: int) -> int:
    """Independent child seed number ``index`` of ``seed`` (used for sweep points)."""
    seq = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=(int(index),))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
