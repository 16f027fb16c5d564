"""The six-step key-generation protocol.

Scalar operations (``source_emit``, ``alice_choose``, ``bob_infer_bit`` ...)
mirror the individual protocol steps.  ``simulate_rounds`` runs the same steps
on numpy arrays for a block of rounds; every random choice it makes comes from
the round's own block of uniforms (see :mod:`icqkd.rng`), which is what makes
``run_round(config, i)`` agree with row ``i`` of any session.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from . import rng as streams
from .adversary import (
    HALF, QUARTER, EveKind, EveRecord, EveTarget, intercept_resend_arrays, pns_arrays,
)
from .config import DoubleClickPolicy, SessionConfig
from .optics import (
    CLICK_LABELS, DETECT_WIDTH, DOUBLE, MINUS, NO_CLICK, PLUS, CorrelationFunction,
    DetectionEvent, PulsePair, alice_terms, bob_terms, detect_from_uniforms, split_means,
)

C1, C2, C3, C4 = CorrelationFunction.C1, CorrelationFunction.C2, CorrelationFunction.C3, CorrelationFunction.C4


class GroupLabel(enum.Enum):
    PSI = "Psi"
    PHI = "Phi"

    @property
    def members(self) -> tuple[CorrelationFunction, CorrelationFunction]:
        return (C1, C2) if self is GroupLabel.PSI else (C3, C4)


class Outcome(enum.Enum):
    YES = "Yes"
    NO = "No"


BIT_ASSIGNMENT = {C1: 0, C2: 1, C3: 0, C4: 1}
# Bob's analyser angle -> the pair of correlation functions it guesses
GUESS_SETS = {+1: frozenset({C1, C4}), -1: frozenset({C2, C3})}


def group_of(c: CorrelationFunction) -> GroupLabel:
    return GroupLabel.PSI if c in (C1, C2) else GroupLabel.PHI


def effective_correlation(group: GroupLabel, bit: int) -> CorrelationFunction:
    """The member of ``group`` that carries ``bit``: what Alice's click says she really shared."""
    return next(c for c in group.members if BIT_ASSIGNMENT[c] == bit)


def _angle_sign(theta2: float) -> int:
    for sign in (+1, -1):
        if math.isclose(theta2, sign * QUARTER, abs_tol=1e-9):
            return sign
    raise ValueError(f"Bob's analyser must sit at +/-45 deg, got {math.degrees(theta2):g} deg")


# ------------------------------------------------------------------ types

@dataclass(frozen=True)
class AliceRound:
    group: GroupLabel
    chosen_c: CorrelationFunction
    theta1: float
    detection: Optional[DetectionEvent] = None
    recorded_bit: Optional[int] = None


@dataclass(frozen=True)
class BobRound:
    theta2: float
    detection: Optional[DetectionEvent] = None
    outcome: Optional[Outcome] = None
    inferred_bit: Optional[int] = None

    @property
    def guess_set(self) -> frozenset:
        return GUESS_SETS[_angle_sign(self.theta2)]


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    phi_m: float
    alice: AliceRound
    bob: BobRound
    coincident: bool
    eve: Optional[EveRecord] = None


@dataclass(frozen=True)
class SiftedBitPair:
    alice_bit: int
    bob_bit: int
    round_index: int


@dataclass(frozen=True)
class ErrorCheckResult:
    error_rate: Optional[float]
    abort: bool
    disclosed_indices: tuple[int, ...]
    errors: int = 0
    threshold: float = 0.0

    @property
    def disclosed(self) -> int:
        return len(self.disclosed_indices)


# ------------------------------------------------------- uniform -> choice

def phase_sign_from_uniform(u):
    return np.where(np.asarray(u) < 0.5, 1, -1).astype(np.int8)


def c_index_from_uniform(u):
    return np.minimum((np.asarray(u) * 4).astype(np.int8), 3)


def theta2_sign_from_uniform(u):
    return np.where(np.asarray(u) < 0.5, 1, -1).astype(np.int8)


# ------------------------------------------------------- scalar steps

def source_emit(n_c: float, rng: np.random.Generator) -> tuple[float, PulsePair]:
    if not 0.0 < n_c < 1.0:
        raise ValueError(f"n_c = {n_c} violates n_x = n_y = n_c < 1")
    phi_m = int(phase_sign_from_uniform(rng.random())) * HALF
    return phi_m, PulsePair(n_c, n_c, phi_m, 0.0, 0.0)


def alice_choose(rng: np.random.Generator) -> tuple[GroupLabel, CorrelationFunction]:
    c = CorrelationFunction.from_index(c_index_from_uniform(rng.random()))
    return group_of(c), c


def bob_guess(rng: np.random.Generator) -> float:
    return int(theta2_sign_from_uniform(rng.random())) * QUARTER


def alice_record(round: AliceRound) -> AliceRound:
    """Plus click is bit 1, minus click bit 0, whatever Cn she nominally chose."""
    det = round.detection
    if det is None:
        raise ValueError("Alice's detection is not set")
    bit = (1 if det.plus_click else 0) if det.is_valid else None
    return replace(round, recorded_bit=bit)


def bob_record(round: BobRound) -> BobRound:
    det = round.detection
    if det is None:
        raise ValueError("Bob's detection is not set")
    outcome = (Outcome.YES if det.plus_click else Outcome.NO) if det.is_valid else None
    return replace(round, outcome=outcome)


def bob_infer_bit(group: GroupLabel, theta2: float, outcome: Outcome) -> int:
    """Step 6: 'Yes' confirms the guessed member of the announced group, 'No' picks the other one."""
    if outcome is None:
        raise ValueError("no outcome: the round was not a coincidence")
    guessed = GUESS_SETS[_angle_sign(theta2)]
    hit = next(c for c in group.members if c in guessed)
    if outcome is Outcome.YES:
        return BIT_ASSIGNMENT[hit]
    other = next(c for c in group.members if c is not hit)
    return BIT_ASSIGNMENT[other]


def expected_bob_outcome(group: GroupLabel, alice_bit: int, theta2: float) -> Outcome:
    """What Alice predicts Bob saw, from her effective Cn and his announced angle."""
    c = effective_correlation(group, alice_bit)
    return Outcome.YES if c in GUESS_SETS[_angle_sign(theta2)] else Outcome.NO


# vectorised counterparts on integer codes

def alice_bits_from_clicks(code) -> np.ndarray:
    code = np.asarray(code)
    return np.where(code == PLUS, 1, np.where(code == MINUS, 0, -1)).astype(np.int8)


def bob_outcomes_from_clicks(code) -> np.ndarray:
    """1 = Yes, 0 = No, -1 = no valid detection."""
    return alice_bits_from_clicks(code)


def infer_bits(group_is_phi, theta2_sign, outcome) -> np.ndarray:
    psi_bit = (np.asarray(theta2_sign) < 0) ^ (np.asarray(outcome) == 0)
    return (psi_bit ^ np.asarray(group_is_phi, dtype=bool)).astype(np.int8)


def expected_outcomes(group_is_phi, alice_bit, theta2_sign) -> np.ndarray:
    """Array form of :func:`expected_bob_outcome` (1 = Yes)."""
    group_is_phi = np.asarray(group_is_phi, dtype=bool)
    alice_bit = np.asarray(alice_bit)
    # effective C index: Psi -> C1/C2 (0/1), Phi -> C3/C4 (2/3)
    c_eff = 2 * group_is_phi + (alice_bit == 1)
    in_plus_set = (c_eff == 0) | (c_eff == 3)
    return np.where(np.asarray(theta2_sign) > 0, in_plus_set, ~in_plus_set).astype(np.int8)


def resolve_double_clicks(code, policy: DoubleClickPolicy, u) -> np.ndarray:
    code = np.asarray(code, dtype=np.int8)
    if policy is DoubleClickPolicy.RANDOM_ASSIGN:
        return np.where(code == DOUBLE, np.where(np.asarray(u) < 0.5, PLUS, MINUS), code).astype(np.int8)
    return code


# ------------------------------------------------------- round engine

_FIELDS = (
    "round_index", "phi_sign", "c_index", "theta1", "theta2_sign",
    "alice_click", "alice_raw_click", "alice_bit", "alice_plus_photons", "alice_minus_photons",
    "bob_click", "bob_raw_click", "bob_outcome", "bob_plus_photons", "bob_minus_photons",
    "eve_click", "eve_inferred", "eve_guessed", "eve_stole",
)


@dataclass
class RoundBatch:
    """Struct-of-arrays transcript of consecutive rounds.

    Click columns hold codes 0 (none), 1 (+), 2 (-), 3 (both); ``alice_click``
    and ``bob_click`` are after the double-click policy, the ``*_raw_click``
    columns before it.  Eve columns are -1 / nan / False when nobody listened.
    """

    round_index: np.ndarray
    phi_sign: np.ndarray
    c_index: np.ndarray
    theta1: np.ndarray
    theta2_sign: np.ndarray
    alice_click: np.ndarray
    alice_raw_click: np.ndarray
    alice_bit: np.ndarray
    alice_plus_photons: np.ndarray
    alice_minus_photons: np.ndarray
    bob_click: np.ndarray
    bob_raw_click: np.ndarray
    bob_outcome: np.ndarray
    bob_plus_photons: np.ndarray
    bob_minus_photons: np.ndarray
    eve_click: np.ndarray
    eve_inferred: np.ndarray
    eve_guessed: np.ndarray
    eve_stole: np.ndarray
    eve_kind: EveKind = EveKind.NONE

    def __len__(self) -> int:
        return len(self.round_index)

    @property
    def group_is_phi(self) -> np.ndarray:
        return self.c_index >= 2

    @property
    def coincident(self) -> np.ndarray:
        return (self.alice_bit >= 0) & (self.bob_outcome >= 0)

    @property
    def eve_identified(self) -> np.ndarray:
        """Eve read phi_m off a click and got it right."""
        return ~np.isnan(self.eve_inferred) & (np.sign(self.eve_inferred) == self.phi_sign)

    @property
    def eve_intercepted(self) -> np.ndarray:
        return self.eve_click >= 0

    def take(self, index) -> "RoundBatch":
        return RoundBatch(**{f: getattr(self, f)[index] for f in _FIELDS}, eve_kind=self.eve_kind)

    @classmethod
    def concat(cls, batches: Sequence["RoundBatch"]) -> "RoundBatch":
        if not batches:
            raise ValueError("nothing to concatenate")
        return cls(**{f: np.concatenate([getattr(b, f) for b in batches]) for f in _FIELDS},
                   eve_kind=batches[0].eve_kind)

    def record(self, i: int) -> RoundRecord:
        c = CorrelationFunction.from_index(self.c_index[i])
        a_code, b_code = int(self.alice_click[i]), int(self.bob_click[i])
        alice = AliceRound(
            group=group_of(c), chosen_c=c, theta1=float(self.theta1[i]),
            detection=DetectionEvent(bool(a_code & PLUS), bool(a_code & MINUS),
                                     int(self.alice_plus_photons[i]), int(self.alice_minus_photons[i])),
            recorded_bit=None if self.alice_bit[i] < 0 else int(self.alice_bit[i]),
        )
        bob = BobRound(
            theta2=int(self.theta2_sign[i]) * QUARTER,
            detection=DetectionEvent(bool(b_code & PLUS), bool(b_code & MINUS),
                                     int(self.bob_plus_photons[i]), int(self.bob_minus_photons[i])),
            outcome=None if self.bob_outcome[i] < 0 else (Outcome.YES if self.bob_outcome[i] == 1 else Outcome.NO),
        )
        eve = None
        if self.eve_kind is not EveKind.NONE:
            click = int(self.eve_click[i])
            eve = EveRecord(
                round_index=int(self.round_index[i]),
                measured_click=None if click < 0 else CLICK_LABELS[click],
                inferred_phi_m=None if np.isnan(self.eve_inferred[i]) else float(self.eve_inferred[i]),
                guessed=bool(self.eve_guessed[i]),
                stole_photon=bool(self.eve_stole[i]),
            )
        return RoundRecord(int(self.round_index[i]), int(self.phi_sign[i]) * HALF, alice, bob,
                           bool(self.coincident[i]), eve)

    def records(self) -> list[RoundRecord]:
        return [self.record(i) for i in range(len(self))]

    def __iter__(self) -> Iterator[RoundRecord]:
        return (self.record(i) for i in range(len(self)))

    @classmethod
    def from_records(cls, records: Iterable[RoundRecord]) -> "RoundBatch":
        records = list(records)
        eve_kind = EveKind.NONE
        cols: dict[str, list] = {f: [] for f in _FIELDS}
        for r in records:
            a_det, b_det = r.alice.detection, r.bob.detection
            a_code = a_det.code if a_det is not None else NO_CLICK
            b_code = b_det.code if b_det is not None else NO_CLICK
            cols["round_index"].append(r.round_index)
            cols["phi_sign"].append(1 if r.phi_m > 0 else -1)
            cols["c_index"].append(r.alice.chosen_c.index)
            cols["theta1"].append(r.alice.theta1)
            cols["theta2_sign"].append(_angle_sign(r.bob.theta2))
            cols["alice_click"].append(a_code)
            cols["alice_raw_click"].append(a_code)
            cols["alice_bit"].append(-1 if r.alice.recorded_bit is None else r.alice.recorded_bit)
            cols["alice_plus_photons"].append(a_det.plus_photons if a_det else 0)
            cols["alice_minus_photons"].append(a_det.minus_photons if a_det else 0)
            cols["bob_click"].append(b_code)
            cols["bob_raw_click"].append(b_code)
            cols["bob_outcome"].append(-1 if r.bob.outcome is None else int(r.bob.outcome is Outcome.YES))
            cols["bob_plus_photons"].append(b_det.plus_photons if b_det else 0)
            cols["bob_minus_photons"].append(b_det.minus_photons if b_det else 0)
            e = r.eve
            if e is not None and e.measured_click is not None:
                eve_kind = EveKind.INTERCEPT_RESEND
            elif e is not None and eve_kind is EveKind.NONE:
                eve_kind = EveKind.PNS
            labels = {v: k for k, v in CLICK_LABELS.items()}
            cols["eve_click"].append(-1 if e is None or e.measured_click is None else labels[e.measured_click])
            cols["eve_inferred"].append(np.nan if e is None or e.inferred_phi_m is None else e.inferred_phi_m)
            cols["eve_guessed"].append(bool(e and e.guessed))
            cols["eve_stole"].append(bool(e and e.stole_photon))
        dtypes = {"round_index": np.int64, "theta1": float, "eve_inferred": float,
                  "eve_guessed": bool, "eve_stole": bool,
                  "alice_plus_photons": np.int64, "alice_minus_photons": np.int64,
                  "bob_plus_photons": np.int64, "bob_minus_photons": np.int64}
        arrays = {f: np.asarray(v, dtype=dtypes.get(f, np.int8)) for f, v in cols.items()}
        return cls(**arrays, eve_kind=eve_kind)


def as_batch(records) -> RoundBatch:
    return records if isinstance(records, RoundBatch) else RoundBatch.from_records(records)


def simulate_rounds(config: SessionConfig, start: int, count: int, *, uniforms: np.ndarray | None = None,
                    phi_sign=None, c_index=None, theta2_sign=None) -> RoundBatch:
    """Rounds ``start .. start+count-1`` of the session described by ``config``.

    ``phi_sign``, ``c_index`` and ``theta2_sign`` override the random choices
    (used by the truth table and the worked examples); everything else still
    comes from the round uniforms.
    """
    u = streams.round_uniforms(config.seed, start, count) if uniforms is None else np.atleast_2d(uniforms)
    n = len(u)
    idx = np.arange(start, start + n, dtype=np.int64)

    def forced(value, default):
        return default if value is None else np.broadcast_to(np.asarray(value, dtype=np.int8), (n,)).copy()

    phi_sign = forced(phi_sign, phase_sign_from_uniform(u[:, streams.SOURCE_PHASE]))
    c_index = forced(c_index, c_index_from_uniform(u[:, streams.ALICE_CHOICE]))
    theta2_sign = forced(theta2_sign, theta2_sign_from_uniform(u[:, streams.BOB_GUESS]))

    n_x, n_y = config.source_means
    offset = config.phase_offset
    phi = phi_sign * HALF
    ax, ay, aphi = np.full(n, n_x), np.full(n, n_y), phi.astype(float)
    bx, by, bphi = ax.copy(), ay.copy(), aphi.copy()

    eve = config.eve
    eve_click = np.full(n, -1, dtype=np.int8)
    eve_inferred = np.full(n, np.nan)
    eve_guessed = np.zeros(n, dtype=bool)
    eve_stole = np.zeros(n, dtype=bool)
    eve_slots_bob = u[:, streams.EVE_BOB:streams.EVE_BOB + streams.EVE_WIDTH]
    eve_slots_alice = u[:, streams.EVE_ALICE:streams.EVE_ALICE + streams.EVE_WIDTH]
    both = eve.target is EveTarget.BOTH
    if eve.kind is EveKind.INTERCEPT_RESEND:
        level = config.resend_level
        r = intercept_resend_arrays(bx, by, bphi, offset, eve, level, eve_slots_bob)
        bx, by, bphi = r.n_x, r.n_y, r.phi_m
        eve_click, eve_inferred, eve_guessed = r.click.astype(np.int8), r.inferred, r.guessed
        if both:
            ra = intercept_resend_arrays(ax, ay, aphi, offset, eve, level, eve_slots_alice)
            ax, ay, aphi = ra.n_x, ra.n_y, ra.phi_m
    elif eve.kind is EveKind.PNS:
        bx, by, eve_stole = pns_arrays(bx, by, eve_slots_bob[:, 1])
        if both:
            ax, ay, stole_a = pns_arrays(ax, ay, eve_slots_alice[:, 1])
            eve_stole = eve_stole | stole_a

    t_a, t_b = config.channel.transmittance_alice, config.channel.transmittance_bob
    ax, ay, bx, by = ax * t_a, ay * t_a, bx * t_b, by * t_b

    theta1 = np.full(n, config.theta1)
    mu_p, mu_m = split_means(ax, ay, alice_terms(c_index, theta1, aphi + offset))
    a = detect_from_uniforms(mu_p, mu_m, config.detector_alice,
                             u[:, streams.ALICE_DETECT:streams.ALICE_DETECT + DETECT_WIDTH])
    a_code = resolve_double_clicks(a.code, config.double_click_policy, u[:, streams.ALICE_RESOLVE])

    mu_p, mu_m = split_means(bx, by, bob_terms(theta2_sign * QUARTER, bphi + offset))
    b = detect_from_uniforms(mu_p, mu_m, config.detector_bob,
                             u[:, streams.BOB_DETECT:streams.BOB_DETECT + DETECT_WIDTH])
    b_code = resolve_double_clicks(b.code, config.double_click_policy, u[:, streams.BOB_RESOLVE])

    return RoundBatch(
        round_index=idx, phi_sign=phi_sign, c_index=c_index, theta1=theta1, theta2_sign=theta2_sign,
        alice_click=a_code, alice_raw_click=a.code, alice_bit=alice_bits_from_clicks(a_code),
        alice_plus_photons=a.plus_photons, alice_minus_photons=a.minus_photons,
        bob_click=b_code, bob_raw_click=b.code, bob_outcome=bob_outcomes_from_clicks(b_code),
        bob_plus_photons=b.plus_photons, bob_minus_photons=b.minus_photons,
        eve_click=eve_click, eve_inferred=eve_inferred, eve_guessed=eve_guessed, eve_stole=eve_stole,
        eve_kind=eve.kind,
    )


def iter_batches(config: SessionConfig, chunk: int = 200_000) -> Iterator[RoundBatch]:
    for start in range(0, config.rounds, chunk):
        yield simulate_rounds(config, start, min(chunk, config.rounds - start))


def run_round(config: SessionConfig, round_index: int = 0, **choices) -> RoundRecord:
    """One round, drawn from its own substream of ``config.seed``.

    Keyword overrides ``phi_sign``, ``c_index``, ``theta2_sign`` pin the random choices.
    """
    return simulate_rounds(config, round_index, 1, **choices).record(0)


# ------------------------------------------------------- sifting and checking

@dataclass(frozen=True)
class SiftedKey:
    round_index: np.ndarray
    alice_bits: np.ndarray
    bob_bits: np.ndarray
    rate: Optional[float]

    def __len__(self) -> int:
        return len(self.round_index)

    @property
    def pairs(self) -> list[SiftedBitPair]:
        return [SiftedBitPair(int(a), int(b), int(i))
                for a, b, i in zip(self.alice_bits, self.bob_bits, self.round_index)]

    @property
    def mismatches(self) -> int:
        return int(np.count_nonzero(self.alice_bits != self.bob_bits))


def sift_batch(batch: RoundBatch, exclude: Iterable[int] = ()) -> SiftedKey:
    """Steps 5-6 on arrays: every non-disclosed coincident round gives a bit pair."""
    coincident = batch.coincident
    keep = coincident & ~np.isin(batch.round_index, np.fromiter(exclude, dtype=np.int64))
    bob_bits = infer_bits(batch.group_is_phi[keep], batch.theta2_sign[keep], batch.bob_outcome[keep])
    # no basis discard: every non-disclosed coincident round survives
    eligible = int(np.count_nonzero(keep))
    rate = None if eligible == 0 else len(bob_bits) / eligible
    return SiftedKey(batch.round_index[keep], batch.alice_bit[keep].astype(np.int8), bob_bits, rate)


def sift(records, exclude: Iterable[int] = ()) -> tuple[list[SiftedBitPair], Optional[float]]:
    key = sift_batch(as_batch(records), exclude)
    return key.pairs, key.rate


def error_check_batch(batch: RoundBatch, fraction: float, rng: np.random.Generator,
                      threshold: float = 0.0) -> ErrorCheckResult:
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"error-check fraction must lie in [0, 1], got {fraction}")
    candidates = batch.round_index[batch.coincident]
    k = int(math.floor(fraction * len(candidates) + 0.5))
    if k == 0:
        return ErrorCheckResult(None, False, (), 0, threshold)
    chosen = np.sort(rng.choice(candidates, size=k, replace=False))
    order = np.argsort(batch.round_index, kind="stable")
    pos = order[np.searchsorted(batch.round_index[order], chosen)]
    expected = expected_outcomes(batch.group_is_phi[pos], batch.alice_bit[pos], batch.theta2_sign[pos])
    errors = int(np.count_nonzero(expected != batch.bob_outcome[pos]))
    rate = errors / k
    return ErrorCheckResult(rate, rate > threshold, tuple(int(i) for i in chosen), errors, threshold)


def error_check(records, fraction: float, rng: np.random.Generator,
                threshold: float = 0.0) -> ErrorCheckResult:
    """Bob discloses a random share of his coincident (angle, outcome) pairs; Alice checks them.

    Alice aborts when the observed error rate exceeds ``threshold``.
    """
    return error_check_batch(as_batch(records), fraction, rng, threshold)
