"""Exact event-level execution of atomic edit steps.

The scene-backed implementation here is the reference ("oracle") editor:
every step becomes a parameter change on one event, and the audio is always
re-rendered from the scene, so inverses hold to float precision. External
learned editors plug in through the same ``edit(audio, step)`` surface via
subprocess or HTTP adapters.
"""

from __future__ import annotations

import base64
import json
import logging
import random
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .audio import AudioBuffer, fit_duration, normalize_rms, read_wav, write_wav
from .catalog import Catalog, retrieve_clip
from .errors import (AdapterProtocolError, AdapterTimeout, AmbiguousTarget,
                     EmptySceneResult, TargetNotFound)
from .plans import (Add, AtomicStep, Change, EditPlan, Extract, Remove,
                    TurnDown, TurnUp, normalize_label, serialize_step)
from .spatial import Direction, EventSpec, Scene, render_scene

log = logging.getLogger(__name__)

CLIP_REFERENCE_DBFS = -20.0


@dataclass(frozen=True)
class EditOutcome:
    scene_after: Scene
    audio_after: AudioBuffer
    edited_event_ids: tuple[str, ...]


def match_target(scene: Scene, label: str, direction: Direction | None = None):
    """Event ids whose label matches under normalized comparison, optionally
    filtered by direction."""
    key = normalize_label(label)
    return [e.event_id for e in scene.events
            if normalize_label(e.label) == key
            and (direction is None or e.direction == direction)]


def _require_one(scene: Scene, label: str, direction: Direction | None) -> EventSpec:
    ids = match_target(scene, label, direction)
    if not ids:
        where = f" at {direction.value}" if direction else ""
        raise TargetNotFound(f"no event labeled {label!r}{where}")
    if len(ids) > 1:
        raise AmbiguousTarget(
            f"{len(ids)} events labeled {label!r}; add a direction qualifier")
    return next(e for e in scene.events if e.event_id == ids[0])


def apply_step(scene: Scene, step: AtomicStep,
               catalog: Catalog | None = None,
               rng: random.Random | None = None) -> EditOutcome:
    """Apply one atomic step, returning the mutated scene and its render."""
    if isinstance(step, Add):
        if catalog is None:
            raise ValueError("Add steps require a catalog")
        clip = retrieve_clip(catalog, step.label, rng or random.Random(0))
        clip = normalize_rms(fit_duration(clip, scene.duration_seconds),
                             CLIP_REFERENCE_DBFS)
        event = EventSpec(event_id=scene.next_event_id(),
                          label=step.label,
                          clip=clip,
                          direction=step.direction or Direction.FRONT,
                          gain_db=step.gain_db if step.gain_db is not None else 0.0)
        after = Scene(scene.events + (event,), scene.duration_seconds)
        return EditOutcome(after, render_scene(after), (event.event_id,))

    if isinstance(step, Remove):
        target = _require_one(scene, step.label, step.direction)
        remaining = tuple(e for e in scene.events if e.event_id != target.event_id)
        if not remaining:
            raise EmptySceneResult(
                f"removing {step.label!r} would leave an empty scene")
        after = Scene(remaining, scene.duration_seconds)
        return EditOutcome(after, render_scene(after), (target.event_id,))

    if isinstance(step, Extract):
        target = _require_one(scene, step.label, step.direction)
        after = Scene((target,), scene.duration_seconds)
        return EditOutcome(after, render_scene(after), (target.event_id,))

    if isinstance(step, (TurnUp, TurnDown)):
        target = _require_one(scene, step.label, None)
        delta = step.delta_db if isinstance(step, TurnUp) else -step.delta_db
        updated = target.with_gain(target.gain_db + delta)
        after = Scene(tuple(updated if e.event_id == target.event_id else e
                            for e in scene.events), scene.duration_seconds)
        return EditOutcome(after, render_scene(after), (target.event_id,))

    if isinstance(step, Change):
        target = _require_one(scene, step.label, step.from_)
        updated = target.with_direction(step.to)
        after = Scene(tuple(updated if e.event_id == target.event_id else e
                            for e in scene.events), scene.duration_seconds)
        return EditOutcome(after, render_scene(after), (target.event_id,))

    raise TypeError(f"unknown step type: {type(step).__name__}")


def execute_plan(scene: Scene, plan: EditPlan,
                 catalog: Catalog | None = None,
                 rng: random.Random | None = None):
    """Run all steps sequentially.

    Returns the trajectory [(scene_0, audio_0), ..., (scene_n, audio_n)];
    element 0 is the untouched initial scene.
    """
    trajectory = [(scene, render_scene(scene))]
    current = scene
    for i, step in enumerate(plan.steps):
        try:
            outcome = apply_step(current, step, catalog=catalog, rng=rng)
        except Exception as exc:
            exc.args = (f"step {i} ({serialize_step(step)}): {exc}",)
            raise
        current = outcome.scene_after
        trajectory.append((current, outcome.audio_after))
    return trajectory


# ---------------------------------------------------------------------------
# Editor interface
# ---------------------------------------------------------------------------

class Editor:
    """Anything that can turn (audio, atomic step) into edited audio."""

    def edit(self, audio_before: AudioBuffer, step: AtomicStep) -> AudioBuffer:
        raise NotImplementedError


class OracleEditor(Editor):
    """Scene-backed exact editor; tracks its own scene state across calls."""

    def __init__(self, scene: Scene, catalog: Catalog | None = None,
                 rng: random.Random | None = None):
        self.scene = scene
        self.catalog = catalog
        self.rng = rng or random.Random(0)

    def edit(self, audio_before: AudioBuffer, step: AtomicStep) -> AudioBuffer:
        outcome = apply_step(self.scene, step, catalog=self.catalog, rng=self.rng)
        self.scene = outcome.scene_after
        return outcome.audio_after


def _check_adapter_output(audio_before: AudioBuffer, path: Path) -> AudioBuffer:
    if not path.is_file():
        raise AdapterProtocolError(f"editor produced no output file at {path}")
    try:
        rate, data = read_wav(path)
    except Exception as exc:
        raise AdapterProtocolError(f"unreadable editor output: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != 2:
        raise AdapterProtocolError("editor output is not stereo")
    if rate != audio_before.sample_rate_hz:
        raise AdapterProtocolError(
            f"editor output rate {rate} != {audio_before.sample_rate_hz}")
    if data.shape[0] != audio_before.num_samples:
        raise AdapterProtocolError(
            f"editor output length {data.shape[0]} != {audio_before.num_samples}")
    return AudioBuffer(data.T)


class SubprocessEditorAdapter(Editor):
    """File-exchange protocol: write input.wav + step.txt, run a command,
    read back output.wav of identical shape.

    The command is a list of argv tokens; the placeholders {input}, {step}
    and {output} are substituted with absolute file paths.
    """

    def __init__(self, command: list[str], work_dir, timeout_s: float = 60.0):
        self.command = list(command)
        self.work_dir = Path(work_dir)
        self.timeout_s = timeout_s
        self._calls = 0

    def edit(self, audio_before: AudioBuffer, step: AtomicStep) -> AudioBuffer:
        self._calls += 1
        call_dir = self.work_dir / f"call_{self._calls:04d}"
        call_dir.mkdir(parents=True, exist_ok=True)
        input_path = call_dir / "input.wav"
        step_path = call_dir / "step.txt"
        output_path = call_dir / "output.wav"
        write_wav(input_path, audio_before)
        step_path.write_text(serialize_step(step) + "\n")

        argv = [tok.format(input=input_path, step=step_path, output=output_path)
                for tok in self.command]
        try:
            proc = subprocess.run(argv, capture_output=True,
                                  timeout=self.timeout_s)
        except subprocess.TimeoutExpired as exc:
            raise AdapterTimeout(
                f"editor command timed out after {self.timeout_s}s") from exc
        if proc.returncode != 0:
            raise AdapterProtocolError(
                f"editor command failed (exit {proc.returncode}): "
                f"{proc.stderr.decode(errors='replace')[:500]}")
        return _check_adapter_output(audio_before, output_path)


class HttpEditorAdapter(Editor):
    """POSTs {"step": text, "audio_b64": <float32 wav>} and expects the same
    shape back under "audio_b64"."""

    def __init__(self, url: str, work_dir, timeout_s: float = 60.0, session=None):
        import requests

        self.url = url
        self.work_dir = Path(work_dir)
        self.timeout_s = timeout_s
        self.session = session or requests.Session()

    def edit(self, audio_before: AudioBuffer, step: AtomicStep) -> AudioBuffer:
        self.work_dir.mkdir(parents=True, exist_ok=True)
        input_path = self.work_dir / "input.wav"
        output_path = self.work_dir / "output.wav"
        write_wav(input_path, audio_before)
        payload = {
            "step": serialize_step(step),
            "audio_b64": base64.b64encode(input_path.read_bytes()).decode("ascii"),
        }
        try:
            resp = self.session.post(self.url, json=payload, timeout=self.timeout_s)
        except Exception as exc:
            raise AdapterTimeout(f"editor endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise AdapterProtocolError(f"editor endpoint returned {resp.status_code}")
        try:
            body = resp.json()
            wav_bytes = base64.b64decode(body["audio_b64"])
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise AdapterProtocolError(f"malformed editor response: {exc}") from exc
        output_path.write_bytes(wav_bytes)
        return _check_adapter_output(audio_before, output_path)
