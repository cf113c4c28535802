"""Ebbinghaus retention curves and the reinforcement staircase.

The classical curve is Retention(t) = e^(-rate * t) with t in days. The
extended form multiplies in a reinforcement factor built from usage
frequency and caller-supplied signals, capped at 1, with failed security
compliance forcing retention to zero. The staircase simulator resets the
curve to a plateau at each reinforcement event and resumes decay from there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import NegativeTimeError, NonMonotonicEventsError
from .model import ReinforcementSignal

#: Default strength of each reinforcement factor in the extended curve.
DEFAULT_KAPPA = 0.5


@dataclass(frozen=True)
class ReinforcementEvent:
    """One reinforcement: the day it happens and the plateau it resets to."""

    at_day: float
    plateau: float

    def __post_init__(self) -> None:
        if self.at_day < 0:
            raise ValueError(f"event day must be >= 0, got {self.at_day}")
        if not 0.0 < self.plateau <= 1.0:
            raise ValueError(f"plateau must be in (0, 1], got {self.plateau}")


@dataclass(frozen=True)
class RetentionTrajectory:
    """Sampled retention curve: (day, retention) pairs plus its parameters."""

    samples: tuple[tuple[float, float], ...]
    decay_rate: float
    events: tuple[ReinforcementEvent, ...]


def retention(t_days: float, decay_rate: float) -> float:
    """Classical exponential retention; retention(0) == 1."""
    if t_days < 0:
        raise NegativeTimeError(f"elapsed days must be >= 0, got {t_days}")
    if decay_rate <= 0:
        raise ValueError(f"decay rate must be > 0, got {decay_rate}")
    return math.exp(-decay_rate * t_days)


def retention_extended(
    t_days: float,
    decay_rate: float,
    signal: ReinforcementSignal,
    frequency: int,
    *,
    kappa_frequency: float = DEFAULT_KAPPA,
    kappa_emotional: float = DEFAULT_KAPPA,
    kappa_contextual: float = DEFAULT_KAPPA,
    kappa_social: float = DEFAULT_KAPPA,
) -> float:
    """Retention with multiplicative reinforcement, capped at 1.

    Reduces exactly to the classical curve when frequency is 0 and all
    signal fields are 0. security_compliance acts as a veto: False means
    the memory is not retained at all.
    """
    if frequency < 0:
        raise ValueError(f"frequency must be >= 0, got {frequency}")
    base = retention(t_days, decay_rate)
    if not signal.security_compliance:
        return 0.0
    factor = (
        (1.0 + kappa_frequency * math.log1p(frequency))
        * (1.0 + kappa_emotional * signal.emotional_valence)
        * (1.0 + kappa_contextual * signal.contextual_relevance)
        * (1.0 + kappa_social * signal.social_consensus)
    )
    return min(1.0, base * factor)


def staircase_value(
    t_days: float, decay_rate: float, events: Sequence[ReinforcementEvent]
) -> float:
    """Retention at time t under reset-to-plateau reinforcement semantics."""
    anchor_day, anchor_level = 0.0, 1.0
    for event in events:
        if event.at_day <= t_days:
            anchor_day, anchor_level = event.at_day, event.plateau
        else:
            break
    return anchor_level * math.exp(-decay_rate * (t_days - anchor_day))


def simulate_staircase(
    decay_rate: float,
    events: Sequence[ReinforcementEvent],
    horizon_days: float,
    step_days: float,
) -> RetentionTrajectory:
    """Sample the staircase curve every step_days from 0 through horizon_days."""
    if step_days <= 0:
        raise ValueError(f"step_days must be > 0, got {step_days}")
    if horizon_days < 0:
        raise NegativeTimeError(f"horizon_days must be >= 0, got {horizon_days}")
    if decay_rate <= 0:
        raise ValueError(f"decay rate must be > 0, got {decay_rate}")
    ordered = tuple(events)
    for previous, current in zip(ordered, ordered[1:]):
        if current.at_day <= previous.at_day:
            raise NonMonotonicEventsError(
                f"events must be strictly increasing: {previous.at_day} then {current.at_day}"
            )

    samples: list[tuple[float, float]] = []
    step_count = int(math.floor(horizon_days / step_days + 1e-12))
    for i in range(step_count + 1):
        day = i * step_days
        samples.append((day, staircase_value(day, decay_rate, ordered)))
    return RetentionTrajectory(samples=tuple(samples), decay_rate=decay_rate, events=ordered)


def trajectory_to_csv(trajectory: RetentionTrajectory) -> str:
    """CSV rendering with the columns day,retention."""
    lines = ["day,retention"]
    lines.extend(f"{day:.6f},{value:.9f}" for day, value in trajectory.samples)
    return "\n".join(lines) + "\n"
