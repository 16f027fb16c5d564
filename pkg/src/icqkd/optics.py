"""Two-mode weak-coherent-state detection model.

Everything here works at the level of per-port Poisson means: the interference
term of a party fixes how the pulse energy ``n_x + n_y`` is split between the
transmitted ('+') and reflected ('-') detectors, and each detector then sees a
Poisson photon number.  Angles are in radians.

The array-level helpers (``split_means``, ``detect_from_uniforms``) accept numpy
arrays and are what the session engine runs on; the scalar operations wrap them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

DETECT_WIDTH = 6  # uniforms per detection: count+, count-, thin+, thin-, dark+, dark-

# click codes used by the vectorised engine
NO_CLICK, PLUS, MINUS, DOUBLE = 0, 1, 2, 3
CLICK_LABELS = {NO_CLICK: "none", PLUS: "+", MINUS: "-", DOUBLE: "both"}


@dataclass(frozen=True)
class PulsePair:
    """The optical signal of one round as seen by one party."""

    n_x: float
    n_y: float
    phi_m: float
    phi_A: float = 0.0
    phi_B: float = 0.0

    def __post_init__(self):
        if not (self.n_x >= 0 and self.n_y >= 0):
            raise ValueError(f"mean photon numbers must be >= 0, got ({self.n_x}, {self.n_y})")

    @property
    def total(self) -> float:
        return self.n_x + self.n_y

    @property
    def interference_phase(self) -> float:
        """Phase entering the interference terms; equals ``phi_m`` when the arms are matched."""
        return self.phi_m + self.phi_A - self.phi_B

    def scaled(self, factor: float) -> "PulsePair":
        return PulsePair(self.n_x * factor, self.n_y * factor, self.phi_m, self.phi_A, self.phi_B)


class CorrelationFunction(enum.Enum):
    """Alice's four settings, valued as (outer sign, sign on phi_m)."""

    C1 = (-1, +1)
    C2 = (+1, -1)
    C3 = (-1, -1)
    C4 = (+1, +1)

    @property
    def alice_sign_outer(self) -> int:
        return self.value[0]

    @property
    def alice_sign_phase(self) -> int:
        return self.value[1]

    @property
    def index(self) -> int:
        return _C_ORDER.index(self)

    @classmethod
    def from_index(cls, i: int) -> "CorrelationFunction":
        return _C_ORDER[int(i)]


_C_ORDER = (CorrelationFunction.C1, CorrelationFunction.C2, CorrelationFunction.C3, CorrelationFunction.C4)
OUTER_SIGNS = np.array([c.alice_sign_outer for c in _C_ORDER])
PHASE_SIGNS = np.array([c.alice_sign_phase for c in _C_ORDER])


@dataclass(frozen=True)
class DetectorParams:
    efficiency: float = 1.0
    dark_count_prob: float = 0.0

    def __post_init__(self):
        for name in ("efficiency", "dark_count_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


IDEAL_DETECTOR = DetectorParams()


@dataclass(frozen=True)
class DetectionEvent:
    plus_click: bool
    minus_click: bool
    plus_photons: int = 0
    minus_photons: int = 0

    @property
    def is_valid(self) -> bool:
        return self.plus_click != self.minus_click

    @property
    def is_vacuum(self) -> bool:
        return not (self.plus_click or self.minus_click)

    @property
    def is_double(self) -> bool:
        return self.plus_click and self.minus_click

    @property
    def code(self) -> int:
        return int(self.plus_click) + 2 * int(self.minus_click)

    @property
    def label(self) -> str:
        return CLICK_LABELS[self.code]


class Clicks(NamedTuple):
    plus: np.ndarray
    minus: np.ndarray
    plus_photons: np.ndarray
    minus_photons: np.ndarray

    @property
    def code(self) -> np.ndarray:
        return self.plus.astype(np.int8) + 2 * self.minus.astype(np.int8)


def alice_interference_term(c: CorrelationFunction, theta1: float, phi_m: float) -> float:
    return c.alice_sign_outer * math.cos(2 * theta1 + c.alice_sign_phase * phi_m)


def alice_terms(c_index, theta1, phi_m) -> np.ndarray:
    """Array form of :func:`alice_interference_term` with ``c_index`` in 0..3."""
    c_index = np.asarray(c_index)
    return OUTER_SIGNS[c_index] * np.cos(2 * np.asarray(theta1) + PHASE_SIGNS[c_index] * np.asarray(phi_m))


def bob_interference_term(theta2: float, phi_m: float) -> float:
    """Bob's term does not depend on Alice's setting."""
    return math.cos(2 * theta2 + phi_m)


def bob_terms(theta2, phi_m) -> np.ndarray:
    return np.cos(2 * np.asarray(theta2) + np.asarray(phi_m))


def split_means(n_x, n_y, term):
    """Per-port means ``(mu_plus, mu_minus)``; their sum is exactly ``n_x + n_y``.

    The larger port is computed first and the smaller one by subtraction, which
    is exact in floating point (Sterbenz), so energy conservation holds bit-for-bit.
    """
    n_x, n_y, term = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (n_x, n_y, term)))
    total = n_x + n_y
    swing = 2.0 * np.sqrt(n_x * n_y) * term
    big = np.minimum(0.5 * (total + np.abs(swing)), total)
    small = total - big
    mu_plus = np.where(swing >= 0, big, small)
    mu_minus = np.where(swing >= 0, small, big)
    return mu_plus, mu_minus


def port_means(pulse: PulsePair, term: float) -> tuple[float, float]:
    if abs(term) > 1.0 + 1e-12:
        raise ValueError(f"interference term must lie in [-1, 1], got {term}")
    mu_plus, mu_minus = split_means(pulse.n_x, pulse.n_y, term)
    return float(mu_plus), float(mu_minus)


def poisson_quantile(u, mu) -> np.ndarray:
    """Inverse-CDF Poisson draw. Most weak pulses are empty, so only ``u >= e^-mu`` hits scipy."""
    u, mu = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(mu, dtype=float))
    out = np.zeros(u.shape, dtype=np.int64)
    hit = u >= np.exp(-mu)
    if hit.any():
        out[hit] = np.maximum(stats.poisson.ppf(u[hit], mu[hit]), 0).astype(np.int64)
    return out


def binomial_quantile(u, n, p: float) -> np.ndarray:
    u, n = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(n, dtype=np.int64))
    if p >= 1.0:
        return n.copy()
    out = np.zeros(n.shape, dtype=np.int64)
    hit = n > 0
    if hit.any() and p > 0.0:
        out[hit] = np.maximum(stats.binom.ppf(u[hit], n[hit], p), 0).astype(np.int64)
    return out


def detect_from_uniforms(mu_plus, mu_minus, det: DetectorParams, u: np.ndarray) -> Clicks:
    """Threshold detection of both ports driven by ``DETECT_WIDTH`` uniforms per event."""
    u = np.asarray(u, dtype=float)
    n_plus = poisson_quantile(u[..., 0], mu_plus)
    n_minus = poisson_quantile(u[..., 1], mu_minus)
    kept_plus = binomial_quantile(u[..., 2], n_plus, det.efficiency)
    kept_minus = binomial_quantile(u[..., 3], n_minus, det.efficiency)
    plus = (kept_plus > 0) | (u[..., 4] < det.dark_count_prob)
    minus = (kept_minus > 0) | (u[..., 5] < det.dark_count_prob)
    return Clicks(plus, minus, kept_plus, kept_minus)


def sample_detection(mu_plus: float, mu_minus: float, det: DetectorParams,
                     rng: np.random.Generator) -> DetectionEvent:
    if mu_plus < 0 or mu_minus < 0:
        raise ValueError("port means must be >= 0")
    c = detect_from_uniforms(mu_plus, mu_minus, det, rng.random(DETECT_WIDTH))
    return DetectionEvent(bool(c.plus), bool(c.minus), int(c.plus_photons), int(c.minus_photons))


def sample_detections(mu_plus, mu_minus, det: DetectorParams, rng: np.random.Generator,
                      size: int) -> Clicks:
    """Batch version of :func:`sample_detection`; means broadcast against ``size``."""
    return detect_from_uniforms(mu_plus, mu_minus, det, rng.random((size, DETECT_WIDTH)))


def two_photon_expectation(pulse: PulsePair, theta: float) -> float:
    """Unnormalised two-photon intensity at an analyser set to ``theta``."""
    nx, ny = pulse.n_x, pulse.n_y
    s = nx + ny
    value = s * s + 2 * s * math.sqrt(nx * ny) * math.cos(2 * theta + pulse.interference_phase)
    return max(value, 0.0)  # rounding at the n_x == n_y minimum
