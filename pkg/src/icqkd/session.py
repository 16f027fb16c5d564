"""A full session: quantum transmission, error check, announcement and sifting."""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import rng as streams
from . import theory
from .config import SessionConfig
from .protocol import (
    ErrorCheckResult, RoundBatch, SiftedKey, error_check_batch, iter_batches, sift_batch,
)


@dataclass
class SessionResult:
    config: SessionConfig
    batch: RoundBatch
    check: ErrorCheckResult
    key: SiftedKey

    @property
    def aborted(self) -> bool:
        return self.check.abort

    @property
    def records(self):
        return self.batch.records()


def resolve_threshold(config: SessionConfig, disclosed: int) -> float:
    if config.abort_threshold is not None:
        return config.abort_threshold
    if config.is_noiseless:
        return 0.0
    return theory.abort_threshold(theory.honest_expectation(config).qber, disclosed)


def run_session(config: SessionConfig, chunk: int = 200_000) -> SessionResult:
    batch = RoundBatch.concat(list(iter_batches(config, chunk)))
    n_coincident = int(batch.coincident.sum())
    disclosed = int(math.floor(config.error_check_fraction * n_coincident + 0.5))
    check = error_check_batch(batch, config.error_check_fraction,
                              streams.session_generator(config.seed, streams.TAG_DISCLOSURE),
                              resolve_threshold(config, disclosed))
    # Step 5 is still simulated after an abort so the would-be key can be inspected.
    key = sift_batch(batch, exclude=check.disclosed_indices)
    return SessionResult(config, batch, check, key)
