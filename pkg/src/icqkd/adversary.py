"""Channel loss and the two eavesdropping models.

Eve sits at the source output and acts on the Bob-bound beam (optionally on
both beams).  Intercept-resend Eve measures exactly like Bob, infers the
modulated phase from her click and resends a fresh pulse; PNS Eve removes one
photon from multi-photon pulses and touches nothing else.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .optics import (
    CLICK_LABELS, IDEAL_DETECTOR, MINUS, PLUS, PulsePair, bob_terms,
    detect_from_uniforms, poisson_quantile, split_means,
)
from .rng import EVE_WIDTH

QUARTER = math.pi / 4
HALF = math.pi / 2


class Party(enum.Enum):
    ALICE = "alice"
    BOB = "bob"


class EveKind(enum.Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept_resend"
    PNS = "pns"


class ResendPolicy(enum.Enum):
    RESEND_ON_CLICK_ELSE_VACUUM = "resend_on_click_else_vacuum"
    RESEND_ALWAYS_GUESS_ON_VACUUM = "resend_always_guess_on_vacuum"


class EveTarget(enum.Enum):
    BOB = "bob"
    BOTH = "both"


@dataclass(frozen=True)
class ChannelParams:
    transmittance_alice: float = 1.0
    transmittance_bob: float = 1.0

    def __post_init__(self):
        for name in ("transmittance_alice", "transmittance_bob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def for_party(self, party: Party) -> float:
        return self.transmittance_alice if party is Party.ALICE else self.transmittance_bob


@dataclass(frozen=True)
class EveStrategy:
    """Eve's attack. ``theta_e`` is in radians; ``None`` means a fresh +/-45 deg choice per round."""

    kind: EveKind = EveKind.NONE
    theta_e: Optional[float] = QUARTER
    resend_policy: ResendPolicy = ResendPolicy.RESEND_ALWAYS_GUESS_ON_VACUUM
    target: EveTarget = EveTarget.BOB
    resend_n_c: Optional[float] = None

    @property
    def active(self) -> bool:
        return self.kind is not EveKind.NONE


NO_EVE = EveStrategy()


@dataclass(frozen=True)
class EveRecord:
    round_index: int
    measured_click: Optional[str] = None  # 'none', '+', '-', 'both'; None when Eve did not measure
    inferred_phi_m: Optional[float] = None
    guessed: bool = False
    stole_photon: bool = False


def apply_channel(pulse: PulsePair, params: ChannelParams, party: Party) -> PulsePair:
    return pulse.scaled(params.for_party(party))


class ResendArrays(NamedTuple):
    n_x: np.ndarray
    n_y: np.ndarray
    phi_m: np.ndarray
    click: np.ndarray         # Eve's click code
    inferred: np.ndarray      # inferred phi_m, nan when she had to guess or sent nothing
    guessed: np.ndarray


def eve_angles(strategy: EveStrategy, u_angle: np.ndarray) -> np.ndarray:
    if strategy.theta_e is None:
        return np.where(u_angle < 0.5, QUARTER, -QUARTER)
    return np.full(np.shape(u_angle), strategy.theta_e)


def infer_phase(theta_e, click_sign, offset, u_tie) -> np.ndarray:
    """Pick the phi_m in {+90, -90} whose interference sign matches Eve's click.

    When both candidates fit equally (e.g. an analyser at 0 deg) she guesses.
    """
    score_up = click_sign * np.cos(2 * theta_e + HALF + offset)
    score_down = click_sign * np.cos(2 * theta_e - HALF + offset)
    tie = np.isclose(score_up, score_down, atol=1e-9)
    guess = np.where(u_tie < 0.5, HALF, -HALF)
    return np.where(tie, guess, np.where(score_up > score_down, HALF, -HALF))


def intercept_resend_arrays(n_x, n_y, phi_m, offset, strategy: EveStrategy, resend_n_c,
                            u: np.ndarray) -> ResendArrays:
    """Vectorised intercept-resend over rows of ``u`` (``EVE_WIDTH`` columns)."""
    theta_e = eve_angles(strategy, u[:, 0])
    mu_plus, mu_minus = split_means(n_x, n_y, bob_terms(theta_e, np.asarray(phi_m) + offset))
    clicks = detect_from_uniforms(mu_plus, mu_minus, IDEAL_DETECTOR, u[:, 1:7])
    code = clicks.code
    single = (code == PLUS) | (code == MINUS)
    sign = np.where(code == PLUS, 1.0, -1.0)
    inferred = infer_phase(theta_e, sign, offset, u[:, 7])
    guess = np.where(u[:, 7] < 0.5, HALF, -HALF)

    resend_phi = np.where(single, inferred, guess)
    if strategy.resend_policy is ResendPolicy.RESEND_ON_CLICK_ELSE_VACUUM:
        level = np.where(single, resend_n_c, 0.0)
        guessed = np.zeros(code.shape, dtype=bool)
    else:
        level = np.full(code.shape, float(resend_n_c))
        guessed = ~single
    # a tie on a single click is a guess too
    tie = single & np.isclose(np.cos(2 * theta_e + HALF + offset), np.cos(2 * theta_e - HALF + offset), atol=1e-9)
    guessed = guessed | tie
    inferred_out = np.where(single & ~tie, inferred, np.nan)
    return ResendArrays(level, level.copy(), resend_phi, code, inferred_out, guessed)


def pns_arrays(n_x, n_y, u_count) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns forwarded ``(n_x, n_y, stole)``; means shrink by (k-1)/k when k >= 2 photons."""
    n_x = np.asarray(n_x, dtype=float)
    n_y = np.asarray(n_y, dtype=float)
    k = poisson_quantile(u_count, n_x + n_y)
    stole = k >= 2
    scale = np.where(stole, (k - 1) / np.maximum(k, 1), 1.0)
    return n_x * scale, n_y * scale, stole


def eve_intercept_resend(pulse: PulsePair, strategy: EveStrategy, rng: np.random.Generator,
                         round_index: int = 0) -> tuple[PulsePair, EveRecord]:
    if strategy.kind is not EveKind.INTERCEPT_RESEND:
        raise ValueError(f"intercept-resend needs an InterceptResend strategy, got {strategy.kind.value}")
    resend_n_c = strategy.resend_n_c if strategy.resend_n_c is not None else 0.5 * pulse.total
    offset = pulse.phi_A - pulse.phi_B
    r = intercept_resend_arrays(
        np.array([pulse.n_x]), np.array([pulse.n_y]), np.array([pulse.phi_m]), offset,
        strategy, resend_n_c, rng.random((1, EVE_WIDTH)),
    )
    resent = PulsePair(float(r.n_x[0]), float(r.n_y[0]), float(r.phi_m[0]), pulse.phi_A, pulse.phi_B)
    inferred = None if np.isnan(r.inferred[0]) else float(r.inferred[0])
    record = EveRecord(round_index, CLICK_LABELS[int(r.click[0])], inferred, bool(r.guessed[0]), False)
    return resent, record


def eve_pns(pulse: PulsePair, rng: np.random.Generator, strategy: EveStrategy = EveStrategy(EveKind.PNS),
            round_index: int = 0) -> tuple[PulsePair, EveRecord]:
    if strategy.kind is not EveKind.PNS:
        raise ValueError(f"photon-number splitting needs a PNS strategy, got {strategy.kind.value}")
    u = rng.random(EVE_WIDTH)
    n_x, n_y, stole = pns_arrays(pulse.n_x, pulse.n_y, u[1])
    forwarded = PulsePair(float(n_x), float(n_y), pulse.phi_m, pulse.phi_A, pulse.phi_B)
    return forwarded, EveRecord(round_index, stole_photon=bool(stole))
