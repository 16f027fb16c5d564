"""Session configuration and its flat ``key = value`` text format.

Nested fields use dotted keys::

    # ideal run with a lossy link to Bob
    n_c = 0.1
    rounds = 100000
    seed = 42
    channel.transmittance_bob = 0.5
    eve.kind = intercept_resend
    alpha_eta_intact = false

``key: value`` is accepted as well, and for one-liners entries may be separated
by ``;`` or ``,`` and wrapped in braces: ``{n_c: 0.1, rounds: 1000, seed: 7}``.
Angles are in degrees here and converted to radians on the way in.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from .adversary import ChannelParams, EveKind, EveStrategy, EveTarget, ResendPolicy
from .optics import DetectorParams
from .rng import SEED_MAX


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class DoubleClickPolicy(enum.Enum):
    DISCARD = "discard"
    RANDOM_ASSIGN = "random_assign"


@dataclass(frozen=True)
class SessionConfig:
    n_c: float
    rounds: int
    seed: int = 0
    theta1_deg: float = 45.0
    detector_alice: DetectorParams = field(default_factory=DetectorParams)
    detector_bob: DetectorParams = field(default_factory=DetectorParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    eve: EveStrategy = field(default_factory=EveStrategy)
    alpha_eta_intact: bool = True
    error_check_fraction: float = 0.1
    double_click_policy: DoubleClickPolicy = DoubleClickPolicy.DISCARD
    abort_threshold: Optional[float] = None
    # diagnostics only: unequal source modes and a static arm mismatch
    n_x: Optional[float] = None
    n_y: Optional[float] = None
    phase_offset_deg: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.n_c < 1.0):
            raise ConfigError("n_c", f"got {self.n_c}; the protocol requires n_x = n_y = n_c < 1 (and n_c > 0)")
        if int(self.rounds) != self.rounds or self.rounds < 1:
            raise ConfigError("rounds", f"must be a positive integer, got {self.rounds}")
        if not 0 <= self.seed <= SEED_MAX:
            raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {self.seed}")
        if not 0.0 <= self.error_check_fraction <= 1.0:
            raise ConfigError("error_check_fraction", f"must lie in [0, 1], got {self.error_check_fraction}")
        if self.abort_threshold is not None and not 0.0 <= self.abort_threshold <= 1.0:
            raise ConfigError("abort_threshold", f"must lie in [0, 1], got {self.abort_threshold}")
        for key in ("n_x", "n_y"):
            v = getattr(self, key)
            if v is not None and not 0.0 <= v < 1.0:
                raise ConfigError(key, f"must lie in [0, 1), got {v}")
        if self.eve.kind is EveKind.INTERCEPT_RESEND and self.alpha_eta_intact:
            raise ConfigError("eve.kind", "intercept_resend needs alpha_eta_intact = false "
                                          "(Eve can only measure once the phase-coding layer is broken)")
        if self.eve.resend_n_c is not None and not 0.0 < self.eve.resend_n_c < 1.0:
            raise ConfigError("eve.resend_n_c", f"must lie in (0, 1), got {self.eve.resend_n_c}")

    @property
    def theta1(self) -> float:
        return math.radians(self.theta1_deg)

    @property
    def phase_offset(self) -> float:
        return math.radians(self.phase_offset_deg)

    @property
    def source_means(self) -> tuple[float, float]:
        nx = self.n_c if self.n_x is None else self.n_x
        ny = self.n_c if self.n_y is None else self.n_y
        return nx, ny

    @property
    def resend_level(self) -> float:
        return self.n_c if self.eve.resend_n_c is None else self.eve.resend_n_c

    @property
    def is_noiseless(self) -> bool:
        return (self.detector_alice.dark_count_prob == 0.0 and self.detector_bob.dark_count_prob == 0.0
                and self.n_x is None and self.n_y is None and self.phase_offset_deg == 0.0)


# ---------------------------------------------------------------- parsing

def _norm(text: str) -> str:
    return "".join(ch for ch in text.lower() if ch.isalnum())


def _enum(cls):
    def parse(raw: str):
        for member in cls:
            if _norm(raw) in (_norm(member.value), _norm(member.name)):
                return member
        options = ", ".join(m.value for m in cls)
        raise ValueError(f"expected one of {options}")
    return parse


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _int(raw: str) -> int:
    value = float(raw)
    if not value.is_integer():
        raise ValueError("expected an integer")
    return int(raw) if raw.lstrip("+-").isdigit() else int(value)


def _optional(parse):
    def wrapped(raw: str):
        return None if raw.lower() in ("none", "null", "") else parse(raw)
    return wrapped


def _eve_angle(raw: str) -> Optional[float]:
    return None if raw.lower() == "random" else float(raw)


_PARSERS = {
    "n_c": float,
    "rounds": _int,
    "seed": _int,
    "theta1_deg": float,
    "alpha_eta_intact": _bool,
    "error_check_fraction": float,
    "double_click_policy": _enum(DoubleClickPolicy),
    "abort_threshold": _optional(float),
    "n_x": _optional(float),
    "n_y": _optional(float),
    "phase_offset_deg": float,
    "detector.alice.efficiency": float,
    "detector.alice.dark_count_prob": float,
    "detector.bob.efficiency": float,
    "detector.bob.dark_count_prob": float,
    "channel.transmittance_alice": float,
    "channel.transmittance_bob": float,
    "eve.kind": _enum(EveKind),
    "eve.theta_deg": _eve_angle,
    "eve.resend_policy": _enum(ResendPolicy),
    "eve.target": _enum(EveTarget),
    "eve.resend_n_c": _optional(float),
}

# shorthands that fan out to both parties
_ALIASES = {
    "detector.efficiency": ("detector.alice.efficiency", "detector.bob.efficiency"),
    "detector.dark_count_prob": ("detector.alice.dark_count_prob", "detector.bob.dark_count_prob"),
    "channel.transmittance": ("channel.transmittance_alice", "channel.transmittance_bob"),
    "eve": ("eve.kind",),
}

REQUIRED = ("n_c", "rounds")


def parse_text(text: str) -> dict[str, str]:
    body = text.strip()
    if body.startswith("{") and body.endswith("}"):
        body = body[1:-1]
    entries: dict[str, str] = {}
    for line in body.replace(";", "\n").replace(",", "\n").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(line, "expected 'key = value'")
        key, raw = (part.strip() for part in line.split(sep, 1))
        if key in entries:
            raise ConfigError(key, "given more than once")
        entries[key] = raw.strip("'\"")
    return entries


def from_mapping(mapping: Mapping[str, Any]) -> SessionConfig:
    """Build a config from dotted keys. Values may be strings or already-typed."""
    flat: dict[str, Any] = {}
    for key, value in mapping.items():
        targets = _ALIASES.get(key, (key,))
        for target in targets:
            if target not in _PARSERS:
                raise ConfigError(key, "unknown key")
            if isinstance(value, str):
                try:
                    value_t = _PARSERS[target](value)
                except ValueError as exc:
                    raise ConfigError(key, f"cannot parse {value!r}: {exc}") from None
            else:
                value_t = value
            flat[target] = value_t
    for key in REQUIRED:
        if key not in flat:
            raise ConfigError(key, "required")

    def take(key, default):
        return flat.get(key, default)

    try:
        detector_alice = DetectorParams(take("detector.alice.efficiency", 1.0),
                                        take("detector.alice.dark_count_prob", 0.0))
        detector_bob = DetectorParams(take("detector.bob.efficiency", 1.0),
                                      take("detector.bob.dark_count_prob", 0.0))
    except ValueError as exc:
        raise ConfigError("detector", str(exc)) from None
    try:
        channel = ChannelParams(take("channel.transmittance_alice", 1.0),
                                take("channel.transmittance_bob", 1.0))
    except ValueError as exc:
        raise ConfigError("channel", str(exc)) from None
    theta_e = take("eve.theta_deg", 45.0)
    eve = EveStrategy(
        kind=take("eve.kind", EveKind.NONE),
        theta_e=None if theta_e is None else math.radians(theta_e),
        resend_policy=take("eve.resend_policy", ResendPolicy.RESEND_ALWAYS_GUESS_ON_VACUUM),
        target=take("eve.target", EveTarget.BOB),
        resend_n_c=take("eve.resend_n_c", None),
    )
    return SessionConfig(
        n_c=float(flat["n_c"]),
        rounds=int(flat["rounds"]),
        seed=int(take("seed", 0)),
        theta1_deg=float(take("theta1_deg", 45.0)),
        detector_alice=detector_alice,
        detector_bob=detector_bob,
        channel=channel,
        eve=eve,
        alpha_eta_intact=bool(take("alpha_eta_intact", True)),
        error_check_fraction=float(take("error_check_fraction", 0.1)),
        double_click_policy=take("double_click_policy", DoubleClickPolicy.DISCARD),
        abort_threshold=take("abort_threshold", None),
        n_x=take("n_x", None),
        n_y=take("n_y", None),
        phase_offset_deg=float(take("phase_offset_deg", 0.0)),
    )


def load_config(source: str | Path) -> SessionConfig:
    """Parse a config file path or inline config text. Unreadable files raise ``OSError``."""
    if isinstance(source, Path) or ("=" not in source and ":" not in source and "\n" not in source):
        text = Path(source).read_text()
    else:
        text = source
    return from_mapping(parse_text(text))


def to_flat(config: SessionConfig) -> dict[str, Any]:
    """Dotted-key view with JSON-friendly values; inverse of :func:`from_mapping`."""
    eve = config.eve
    return {
        "n_c": config.n_c,
        "rounds": config.rounds,
        "seed": config.seed,
        "theta1_deg": config.theta1_deg,
        "alpha_eta_intact": config.alpha_eta_intact,
        "error_check_fraction": config.error_check_fraction,
        "double_click_policy": config.double_click_policy.value,
        "abort_threshold": config.abort_threshold,
        "n_x": config.n_x,
        "n_y": config.n_y,
        "phase_offset_deg": config.phase_offset_deg,
        "detector.alice.efficiency": config.detector_alice.efficiency,
        "detector.alice.dark_count_prob": config.detector_alice.dark_count_prob,
        "detector.bob.efficiency": config.detector_bob.efficiency,
        "detector.bob.dark_count_prob": config.detector_bob.dark_count_prob,
        "channel.transmittance_alice": config.channel.transmittance_alice,
        "channel.transmittance_bob": config.channel.transmittance_bob,
        "eve.kind": eve.kind.value,
        "eve.theta_deg": "random" if eve.theta_e is None else round(math.degrees(eve.theta_e), 12),
        "eve.resend_policy": eve.resend_policy.value,
        "eve.target": eve.target.value,
        "eve.resend_n_c": eve.resend_n_c,
    }


def dump_config(config: SessionConfig) -> str:
    lines = []
    for key, value in to_flat(config).items():
        if value is None:
            value = "none"
        elif isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def with_overrides(config: SessionConfig, **overrides: Any) -> SessionConfig:
    """Copy of ``config`` with dotted keys replaced (pass them via ``**{"a.b": v}``)."""
    flat = to_flat(config)
    for key, value in overrides.items():
        for target in _ALIASES.get(key, (key,)):
            if target not in flat:
                raise ConfigError(key, "unknown key")
            flat[target] = value
    return from_mapping({k: (v if v is not None else "none") for k, v in flat.items()})
