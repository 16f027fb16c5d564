"""Session metrics, sweeps and the comparisons built on them."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .config import SessionConfig, with_overrides
from .protocol import ErrorCheckResult, SiftedKey, as_batch
from .rng import derive_seed
from .session import SessionResult, run_session


@dataclass(frozen=True)
class SessionStats:
    rounds_total: int
    coincident: int
    sifted: int
    disclosed: int
    disclosed_errors: int
    mismatches: int
    pns_stolen: int
    pns_stolen_coincident: int
    eve_intercepts: int
    eve_identified: int
    eve_detection: bool
    abort_threshold: Optional[float] = None

    @property
    def qber(self) -> Optional[float]:
        return self.mismatches / self.sifted if self.sifted else None

    @property
    def sift_rate(self) -> Optional[float]:
        """Sifted bits over the coincident rounds not spent on the error check."""
        eligible = self.coincident - self.disclosed
        return self.sifted / eligible if eligible else None

    @property
    def raw_key_rate_per_round(self) -> float:
        return self.sifted / self.rounds_total if self.rounds_total else 0.0

    @property
    def error_check_rate(self) -> Optional[float]:
        return self.disclosed_errors / self.disclosed if self.disclosed else None

    @property
    def pns_stolen_fraction(self) -> float:
        return self.pns_stolen / self.rounds_total if self.rounds_total else 0.0

    @property
    def pns_leak_fraction(self) -> Optional[float]:
        """Share of coincident rounds in which Eve kept a photon."""
        return self.pns_stolen_coincident / self.coincident if self.coincident else None

    @property
    def eve_phase_id_rate(self) -> Optional[float]:
        return self.eve_identified / self.eve_intercepts if self.eve_intercepts else None

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        for name in ("qber", "sift_rate", "raw_key_rate_per_round", "error_check_rate",
                     "pns_stolen_fraction", "pns_leak_fraction", "eve_phase_id_rate"):
            out[name] = getattr(self, name)
        return out


_COUNTS = ("rounds_total", "coincident", "sifted", "disclosed", "disclosed_errors", "mismatches",
           "pns_stolen", "pns_stolen_coincident", "eve_intercepts", "eve_identified")


def compute_stats(records, sifted_pairs, error_check_result: ErrorCheckResult) -> SessionStats:
    batch = as_batch(records)
    if isinstance(sifted_pairs, SiftedKey):
        sifted, mismatches = len(sifted_pairs), sifted_pairs.mismatches
    else:
        sifted = len(sifted_pairs)
        mismatches = sum(p.alice_bit != p.bob_bit for p in sifted_pairs)
    coincident = batch.coincident
    check = error_check_result
    return SessionStats(
        rounds_total=len(batch),
        coincident=int(coincident.sum()),
        sifted=sifted,
        disclosed=check.disclosed,
        disclosed_errors=check.errors,
        mismatches=int(mismatches),
        pns_stolen=int(batch.eve_stole.sum()),
        pns_stolen_coincident=int((batch.eve_stole & coincident).sum()),
        eve_intercepts=int(batch.eve_intercepted.sum()),
        eve_identified=int(batch.eve_identified.sum()),
        eve_detection=check.abort,
        abort_threshold=check.threshold if check.disclosed else None,
    )


def session_stats(result: SessionResult) -> SessionStats:
    return compute_stats(result.batch, result.key, result.check)


def merge_stats(a: SessionStats, b: SessionStats) -> SessionStats:
    """Combine stats of two disjoint batches; ratios follow from the summed counts."""
    counts = {name: getattr(a, name) + getattr(b, name) for name in _COUNTS}
    threshold = a.abort_threshold if a.abort_threshold == b.abort_threshold else None
    return SessionStats(**counts, eve_detection=a.eve_detection or b.eve_detection, abort_threshold=threshold)


def bb84_reference_sift(records) -> tuple[int, Optional[float]]:
    """Sift the same coincidences the way BB84 would.

    Alice's group plays the role of her basis and Bob's analyser sign his; a
    round survives only when the two agree.
    """
    batch = as_batch(records)
    coincident = batch.coincident
    alice_basis = batch.group_is_phi[coincident]
    bob_basis = batch.theta2_sign[coincident] < 0
    kept = int(np.count_nonzero(alice_basis == bob_basis))
    total = int(coincident.sum())
    return kept, (kept / total if total else None)


def fit_scaling_exponent(x: Sequence[float], y: Sequence[float], counts: Sequence[float] | None = None) -> float:
    """Slope of log(y) against log(x); ``counts`` weights each point by its Poisson precision."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    w = None if counts is None else np.sqrt(np.asarray(counts, dtype=float))
    slope, _ = np.polyfit(np.log(x), np.log(y), 1, w=w)
    return float(slope)


def mismatch_penalty(n_x: float, n_y: float, samples: int, rng: np.random.Generator,
                     config: SessionConfig | None = None) -> float:
    """QBER with unequal mode means minus the QBER with both modes at their average."""
    if not (0 < n_x < 1 and 0 < n_y < 1):
        raise ValueError("n_x and n_y must lie in (0, 1)")
    mean = 0.5 * (n_x + n_y)
    seed_a, seed_b = (int(s) for s in rng.integers(0, 2**63, size=2))
    base = config or SessionConfig(n_c=mean, rounds=samples)
    skewed = with_overrides(base, n_c=mean, n_x=n_x, n_y=n_y, rounds=samples, seed=seed_a,
                            error_check_fraction=0.0)
    equal = with_overrides(base, n_c=mean, n_x=None, n_y=None, rounds=samples, seed=seed_b,
                           error_check_fraction=0.0)
    q_skewed = session_stats(run_session(skewed)).qber or 0.0
    q_equal = session_stats(run_session(equal)).qber or 0.0
    return q_skewed - q_equal


SWEEP_KEYS = {
    "n_c": "n_c",
    "transmittance": "channel.transmittance",
    "dark_count_prob": "detector.dark_count_prob",
    "eve": "eve.kind",
}


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    values: tuple
    stats: tuple[SessionStats, ...]
    seeds: tuple[int, ...]

    def rows(self) -> list[dict[str, Any]]:
        return [{"parameter": self.parameter, "value": v, "seed": s, **st.to_dict()}
                for v, s, st in zip(self.values, self.seeds, self.stats)]


def _point(config: SessionConfig) -> SessionStats:
    return session_stats(run_session(config))


def sweep_configs(config: SessionConfig, parameter: str, values: Sequence[Any],
                  matched_seeds: bool = False) -> list[SessionConfig]:
    if len(values) == 0:
        raise ValueError("sweep needs at least one value")
    key = SWEEP_KEYS.get(parameter, parameter)
    out = []
    for i, value in enumerate(values):
        seed = config.seed if matched_seeds else derive_seed(config.seed, i)
        out.append(with_overrides(config, **{key: value, "seed": seed}))
    return out


def sweep(config: SessionConfig, parameter: str, values: Sequence[Any], *,
          matched_seeds: bool = False, max_workers: int | None = None) -> SweepResult:
    """One full session per value. Seeds are independent unless ``matched_seeds``."""
    configs = sweep_configs(config, parameter, values, matched_seeds)
    if max_workers and max_workers > 1:
        with ProcessPoolExecutor(max_workers) as pool:
            stats = list(pool.map(_point, configs))
    else:
        stats = [_point(c) for c in configs]
    return SweepResult(parameter, tuple(values), tuple(stats), tuple(c.seed for c in configs))
