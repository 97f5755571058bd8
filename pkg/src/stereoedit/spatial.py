"""Stereo spatialization: pan-law level cues, interaural delay, scene mixing."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .audio import SAMPLE_RATE, AudioBuffer, SourceClip

HEAD_RADIUS_M = 0.0875
SPEED_OF_SOUND_M_S = 343.0


class Direction(enum.Enum):
    LEFT = "left"
    FRONT = "front"
    RIGHT = "right"

    @property
    def azimuth_deg(self) -> float:
        return {"left": -90.0, "front": 0.0, "right": 90.0}[self.value]

    @classmethod
    def from_text(cls, text: str) -> "Direction":
        return cls(text.strip().lower())


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 20.0)


def itd_samples(azimuth_deg: float, sample_rate_hz: int = SAMPLE_RATE) -> float:
    """Woodworth interaural delay in samples.

    tau = (r/c) * (theta + sin(theta)). Positive for sources on the right,
    meaning the left channel is the delayed (far) one.
    """
    if not -90.0 <= azimuth_deg <= 90.0:
        raise ValueError("azimuth must be in [-90, 90] degrees")
    theta = np.deg2rad(azimuth_deg)
    tau = (HEAD_RADIUS_M / SPEED_OF_SOUND_M_S) * (theta + np.sin(theta))
    return float(tau * sample_rate_hz)


def pan_gains(azimuth_deg: float) -> tuple[float, float]:
    """Constant-power (left, right) gains over the frontal half-plane.

    The pan angle spans [pi/8, 3*pi/8] so hard left/right keeps an audible
    contralateral channel (the delayed copy the interaural-delay cue lives
    in); gains satisfy left^2 + right^2 = 1 for every azimuth.
    """
    if azimuth_deg == 0.0:
        g = float(np.sqrt(0.5))  # exact channel symmetry at front
        return g, g
    phi = np.pi / 4.0 + np.deg2rad(azimuth_deg) / 4.0
    return float(np.cos(phi)), float(np.sin(phi))


@dataclass(frozen=True)
class EventSpec:
    """One independently editable sound event inside a scene."""

    event_id: str
    label: str
    clip: SourceClip
    direction: Direction
    gain_db: float

    def with_gain(self, gain_db: float) -> "EventSpec":
        return replace(self, gain_db=gain_db)

    def with_direction(self, direction: Direction) -> "EventSpec":
        return replace(self, direction=direction)


@dataclass(frozen=True)
class Scene:
    events: tuple[EventSpec, ...]
    duration_seconds: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        ids = [e.event_id for e in self.events]
        if len(set(ids)) != len(ids):
            raise ValueError("event_id values must be unique within a scene")

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.events]

    @property
    def num_samples(self) -> int:
        return round(self.duration_seconds * SAMPLE_RATE)

    def next_event_id(self) -> str:
        # never reuse a freed id, so trajectory metadata stays unambiguous
        highest = -1
        for e in self.events:
            if e.event_id.startswith("e") and e.event_id[1:].isdigit():
                highest = max(highest, int(e.event_id[1:]))
        return f"e{highest + 1}"


def spatialize(clip: SourceClip, direction: Direction, gain_db: float = 0.0) -> AudioBuffer:
    """Render a mono clip to stereo with level and integer-sample delay cues.

    Front yields identical channels and no delay. The contralateral channel
    is delayed by round(itd_samples(azimuth)), head-padded with zeros and
    tail-truncated so the canonical length is preserved.
    """
    az = direction.azimuth_deg
    gl, gr = pan_gains(az)
    g = db_to_linear(gain_db)
    left = clip.samples * (gl * g)
    right = clip.samples * (gr * g)

    delay = round(itd_samples(az))
    if delay > 0:  # source on the right: left channel is far
        left = _delay(left, delay)
    elif delay < 0:  # source on the left: right channel is far
        right = _delay(right, -delay)
    return AudioBuffer(np.stack([left, right]))


def _delay(x: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros_like(x)
    out[n:] = x[: len(x) - n]
    return out


def render_event(event: EventSpec) -> AudioBuffer:
    return spatialize(event.clip, event.direction, event.gain_db)


def render_scene(scene: Scene) -> AudioBuffer:
    """Sample-wise superposition of all spatialized events. Never clips."""
    total = np.zeros((2, scene.num_samples))
    for event in scene.events:
        total += render_event(event).samples
    return AudioBuffer(total)
