"""Closed-form expectations for the detection model.

These are exact enumerations over the protocol's discrete choices with
analytic Poisson click probabilities; the Monte-Carlo engine never calls them
except to set the automatic abort threshold.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .adversary import HALF, QUARTER, EveKind, EveTarget, ResendPolicy
from .config import DoubleClickPolicy, SessionConfig
from .optics import CorrelationFunction, DetectorParams, alice_interference_term, bob_interference_term, split_means
from .protocol import GroupLabel, Outcome, bob_infer_bit, group_of


def click_probability(mu: float, det: DetectorParams) -> float:
    """P(a threshold detector fires) for a Poisson mean ``mu``."""
    return 1.0 - (1.0 - det.dark_count_prob) * math.exp(-det.efficiency * mu)


def single_photon_probability(mu: float) -> float:
    return mu * math.exp(-mu)


def multiphoton_probability(mu: float) -> float:
    """P(k >= 2) for a Poisson pulse of mean ``mu``."""
    return -math.expm1(-mu) - mu * math.exp(-mu)


def dark_port_residual(n_x: float, n_y: float) -> float:
    """Mean left in the destructive port at full interference: (sqrt(n_x) - sqrt(n_y))^2 / 2."""
    return 0.5 * (math.sqrt(n_x) - math.sqrt(n_y)) ** 2


def valid_outcomes(mu_plus: float, mu_minus: float, det: DetectorParams,
                   policy: DoubleClickPolicy) -> tuple[float, float]:
    """P(valid '+'), P(valid '-') after the double-click policy."""
    p = click_probability(mu_plus, det)
    m = click_probability(mu_minus, det)
    plus_only, minus_only, double = p * (1 - m), m * (1 - p), p * m
    if policy is DoubleClickPolicy.RANDOM_ASSIGN:
        return plus_only + 0.5 * double, minus_only + 0.5 * double
    return plus_only, minus_only


@dataclass(frozen=True)
class Expectation:
    coincidence: float   # P(coincident) per round
    error: float         # P(coincident and bits differ) per round

    @property
    def qber(self) -> float:
        return self.error / self.coincidence if self.coincidence > 0 else 0.0


def _alice_valid(config: SessionConfig, c: CorrelationFunction, phi: float) -> tuple[float, float]:
    nx, ny = config.source_means
    t = config.channel.transmittance_alice
    term = alice_interference_term(c, config.theta1, phi + config.phase_offset)
    mp, mm = split_means(nx * t, ny * t, term)
    return valid_outcomes(float(mp), float(mm), config.detector_alice, config.double_click_policy)


def _bob_valid(config: SessionConfig, theta2: float, phi: float, nx: float, ny: float) -> tuple[float, float]:
    t = config.channel.transmittance_bob
    term = bob_interference_term(theta2, phi + config.phase_offset)
    mp, mm = split_means(nx * t, ny * t, term)
    return valid_outcomes(float(mp), float(mm), config.detector_bob, config.double_click_policy)


def _accumulate(group: GroupLabel, theta2: float, alice: tuple[float, float],
                bob: tuple[float, float]) -> tuple[float, float]:
    coinc = err = 0.0
    for bit, pa in ((1, alice[0]), (0, alice[1])):
        for outcome, pb in ((Outcome.YES, bob[0]), (Outcome.NO, bob[1])):
            coinc += pa * pb
            if bob_infer_bit(group, theta2, outcome) != bit:
                err += pa * pb
    return coinc, err


def honest_expectation(config: SessionConfig) -> Expectation:
    """Coincidence probability and QBER with no eavesdropper, averaged over all 16 choices."""
    nx, ny = config.source_means
    coinc = err = 0.0
    for phi, c, sign in itertools.product((HALF, -HALF), CorrelationFunction, (1, -1)):
        theta2 = sign * QUARTER
        dc, de = _accumulate(group_of(c), theta2, _alice_valid(config, c, phi), _bob_valid(config, theta2, phi, nx, ny))
        coinc += dc / 16
        err += de / 16
    return Expectation(coinc, err)


def intercept_resend_expectation(config: SessionConfig) -> Expectation:
    """Same enumeration with intercept-resend Eve on Bob's beam, summing over her four outcomes."""
    eve = config.eve
    if eve.kind is not EveKind.INTERCEPT_RESEND or eve.target is not EveTarget.BOB:
        raise ValueError("needs an intercept-resend strategy aimed at Bob's beam")
    nx, ny = config.source_means
    level = config.resend_level
    angles = (QUARTER, -QUARTER) if eve.theta_e is None else (eve.theta_e,)
    ideal = DetectorParams()
    coinc = err = 0.0
    for phi, c, sign, theta_e in itertools.product((HALF, -HALF), CorrelationFunction, (1, -1), angles):
        w = 1 / (16 * len(angles))
        theta2 = sign * QUARTER
        term = bob_interference_term(theta_e, phi + config.phase_offset)
        mp, mm = (float(v) for v in split_means(nx, ny, term))
        p, m = click_probability(mp, ideal), click_probability(mm, ideal)
        # (probability, resent phase distribution as [(phase, weight)], resent level)
        branches = []
        for prob, click_sign in ((p * (1 - m), 1.0), (m * (1 - p), -1.0)):
            up = click_sign * math.cos(2 * theta_e + HALF + config.phase_offset)
            down = click_sign * math.cos(2 * theta_e - HALF + config.phase_offset)
            if math.isclose(up, down, abs_tol=1e-9):
                phases = [(HALF, 0.5), (-HALF, 0.5)]
            else:
                phases = [(HALF if up > down else -HALF, 1.0)]
            branches.append((prob, phases, level))
        silent = (1 - p) * (1 - m) + p * m
        if eve.resend_policy is ResendPolicy.RESEND_ALWAYS_GUESS_ON_VACUUM:
            branches.append((silent, [(HALF, 0.5), (-HALF, 0.5)], level))
        alice = _alice_valid(config, c, phi)
        for prob, phases, lvl in branches:
            for phase, pw in phases:
                bob = _bob_valid(config, theta2, phase, lvl, lvl)
                dc, de = _accumulate(group_of(c), theta2, alice, bob)
                coinc += w * prob * pw * dc
                err += w * prob * pw * de
    return Expectation(coinc, err)


def abort_threshold(expected_error_rate: float, disclosed: int) -> float:
    """Expected honest error rate plus three binomial standard deviations."""
    if disclosed <= 0:
        return expected_error_rate
    e = expected_error_rate
    return e + 3.0 * math.sqrt(e * (1 - e) / disclosed)


def pns_stolen_coincident_fraction(config: SessionConfig, kmax: int = 40) -> float:
    """P(stolen | coincident) with PNS Eve on Bob's beam, summing over the split photon number."""
    nx, ny = config.source_means
    mu = nx + ny
    ks = np.arange(kmax + 1)
    pk = np.exp(-mu + ks * math.log(mu) - np.array([math.lgamma(k + 1) for k in ks])) if mu > 0 else (ks == 0) * 1.0
    scale = np.where(ks >= 2, (ks - 1) / np.maximum(ks, 1), 1.0)
    coinc = stolen = 0.0
    for phi, c, sign in itertools.product((HALF, -HALF), CorrelationFunction, (1, -1)):
        theta2 = sign * QUARTER
        alice = _alice_valid(config, c, phi)
        pa = alice[0] + alice[1]
        for k, w in zip(ks, pk):
            bob = _bob_valid(config, theta2, phi, nx * scale[k], ny * scale[k])
            pc = pa * (bob[0] + bob[1]) * w / 16
            coinc += pc
            if k >= 2:
                stolen += pc
    return stolen / coinc
