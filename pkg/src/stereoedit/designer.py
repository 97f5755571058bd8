"""Plan designers: rule-based scenario templates and an LLM endpoint client.

Both produce (high-level instruction, atomic steps) pairs for a sampled
scene and guarantee that every emitted plan passes ``validate_plan`` against
its own source labels. Template mode is pure and fully offline; LLM mode
speaks a generic chat-completion JSON protocol so any compatible provider
works.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import random
import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import (AuthFailure, EndpointUnreachable, MalformedResponse,
                     NoCompatibleScenario, ValidationFailed)
from .plans import (Add, Change, EditPlan, Remove, TurnDown, TurnUp,
                    normalize_label, parse_plan_json, validate_plan)
from .spatial import Direction

log = logging.getLogger(__name__)


def base_prompt() -> str:
    return resources.files("stereoedit.assets").joinpath("base_prompt.txt") \
        .read_text(encoding="utf-8")


class DesignerMode(enum.Enum):
    TEMPLATE = "template"
    LLM = "llm"


@dataclass(frozen=True)
class DesignerConfig:
    mode: DesignerMode = DesignerMode.TEMPLATE
    endpoint_url: str | None = None
    api_key_env: str = "STEREOEDIT_API_KEY"
    model_name: str | None = None
    max_retries: int = 3
    temperature: float | None = None
    batch_size: int = 15

    def __post_init__(self):
        if self.mode is DesignerMode.LLM and not self.endpoint_url:
            raise ValueError("LLM designer mode requires endpoint_url")


# ---------------------------------------------------------------------------
# Template designer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioTemplate:
    name: str
    instruction_pattern: str
    compatible_labels: frozenset[str]
    compatible_add_labels: tuple[str, ...]

    def incompatible(self, scene_labels) -> list[str]:
        return [l for l in scene_labels
                if normalize_label(l) not in self.compatible_labels]


def _theme(name, instruction, compatible, adds) -> ScenarioTemplate:
    return ScenarioTemplate(
        name=name,
        instruction_pattern=instruction,
        compatible_labels=frozenset(normalize_label(l) for l in compatible),
        compatible_add_labels=tuple(adds),
    )


BUILTIN_THEMES: tuple[ScenarioTemplate, ...] = (
    _theme("coffee shop", "Make this sound like a busy coffee shop",
           ["crowd chatter", "keyboard typing", "phone ringing", "bell ring",
            "footsteps"],
           ["crowd chatter", "keyboard typing"]),
    _theme("train station", "Make this sound like a train station",
           ["crowd chatter", "footsteps", "bell ring", "traffic noise",
            "engine rev"],
           ["crowd chatter", "bell ring"]),
    _theme("forest night", "Make this sound like a forest at night",
           ["owl hoot", "cricket chirp", "wind", "stream water"],
           ["owl hoot", "cricket chirp"]),
    _theme("beach", "Make this sound like a beach",
           ["waves", "seagull call", "wind", "crowd chatter"],
           ["waves", "seagull call"]),
    _theme("sunny park", "Craft this sound to feel like a park on a sunny day",
           ["bird chirp", "crowd chatter", "footsteps", "wind", "dog bark"],
           ["bird chirp", "crowd chatter"]),
    _theme("quiet farm", "Make this audio sound like a quiet farm",
           ["rooster crow", "dog bark", "wind", "bird chirp"],
           ["rooster crow", "dog bark"]),
    _theme("rainy evening", "Make this sound like a rainy evening",
           ["rain", "thunder", "wind"],
           ["rain", "thunder"]),
    _theme("campfire", "Make this sound like a night around a campfire",
           ["fire crackle", "cricket chirp", "owl hoot", "wind"],
           ["fire crackle", "cricket chirp"]),
    _theme("busy street", "Make this sound like a busy city street",
           ["traffic noise", "engine rev", "crowd chatter", "footsteps",
            "phone ringing"],
           ["traffic noise", "crowd chatter"]),
    _theme("mountain stream", "Make this sound like a hike along a mountain stream",
           ["stream water", "bird chirp", "wind"],
           ["stream water", "bird chirp"]),
    _theme("office", "Make this sound like a busy office",
           ["keyboard typing", "phone ringing", "clock tick", "crowd chatter"],
           ["keyboard typing", "phone ringing"]),
    _theme("harbor", "Make this sound like a harbor in the morning",
           ["seagull call", "waves", "bell ring", "wind"],
           ["seagull call", "waves"]),
    _theme("countryside morning", "Make this sound like a countryside morning",
           ["rooster crow", "bird chirp", "wind", "dog bark", "stream water"],
           ["rooster crow", "bird chirp"]),
    _theme("stormy coast", "Make this sound like a stormy coastline",
           ["waves", "thunder", "wind", "rain", "seagull call"],
           ["thunder", "waves"]),
    _theme("old library", "Make this sound like an old library",
           ["clock tick", "footsteps", "keyboard typing"],
           ["clock tick", "footsteps"]),
    _theme("garden afternoon", "Make this sound like a quiet afternoon in a garden",
           ["bird chirp", "wind", "cricket chirp", "stream water"],
           ["bird chirp", "wind"]),
    _theme("city night", "Make this sound like a city at night",
           ["traffic noise", "crowd chatter", "phone ringing", "engine rev"],
           ["traffic noise", "phone ringing"]),
    _theme("meadow", "Make this sound like a meadow in summer",
           ["cricket chirp", "bird chirp", "wind"],
           ["cricket chirp", "wind"]),
    _theme("marketplace", "Make this sound like an open-air marketplace",
           ["crowd chatter", "bell ring", "footsteps", "dog bark"],
           ["crowd chatter", "footsteps"]),
    _theme("winter cabin", "Make this sound like a warm cabin in winter",
           ["fire crackle", "wind", "clock tick", "owl hoot"],
           ["fire crackle", "clock tick"]),
)

_DIRECTIONS = (Direction.LEFT, Direction.FRONT, Direction.RIGHT)


def design_plan_template(scene_labels, rng: random.Random,
                         themes: tuple[ScenarioTemplate, ...] = BUILTIN_THEMES,
                         ) -> EditPlan:
    """Deterministic rule-based designer.

    Picks a scenario theme, removes 1-2 theme-incompatible sources (never
    all), modifies 0-2 of the survivors, and adds 0-2 theme-fitting sources.
    The result always passes validate_plan against scene_labels.
    """
    scene_labels = list(scene_labels)
    if len(scene_labels) < 2:
        raise NoCompatibleScenario("need at least two scene labels")
    scene_keys = {normalize_label(l) for l in scene_labels}

    order = list(themes)
    rng.shuffle(order)
    theme = None
    for candidate in order:
        if candidate.incompatible(scene_labels):
            theme = candidate
            break
    if theme is None:
        raise NoCompatibleScenario(
            "no scenario theme finds a removable source in "
            + ", ".join(scene_labels))

    incompatible = theme.incompatible(scene_labels)
    max_removes = min(2, len(incompatible), len(scene_labels) - 1)
    n_removes = rng.randint(1, max_removes)
    removed = rng.sample(incompatible, n_removes)

    remaining = [l for l in scene_labels if l not in removed]
    n_mods = rng.randint(0, min(2, len(remaining)))
    mod_targets = rng.sample(remaining, n_mods)
    mods = []
    for target in mod_targets:
        kind = rng.choice(("turn_up", "turn_down", "change"))
        if kind == "turn_up":
            mods.append(TurnUp(label=target, delta_db=float(rng.randint(1, 6))))
        elif kind == "turn_down":
            mods.append(TurnDown(label=target, delta_db=float(rng.randint(1, 6))))
        else:
            mods.append(Change(label=target, to=rng.choice(_DIRECTIONS)))

    add_candidates = [a for a in theme.compatible_add_labels
                      if normalize_label(a) not in scene_keys]
    n_adds = rng.randint(0, min(2, len(add_candidates)))
    adds = [Add(label=label,
                direction=rng.choice(_DIRECTIONS),
                gain_db=float(rng.randint(0, 6)))
            for label in rng.sample(add_candidates, n_adds)]

    steps = tuple(Remove(label=l) for l in removed) + tuple(mods) + tuple(adds)
    plan = EditPlan(instruction=theme.instruction_pattern,
                    sound_sources=tuple(scene_labels),
                    steps=steps)
    report = validate_plan(plan, scene_labels)
    if not report.is_valid:  # guards template-ontology regressions
        raise NoCompatibleScenario(
            f"theme {theme.name!r} produced an invalid plan: {report.violations}")
    return plan


# ---------------------------------------------------------------------------
# LLM designer
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"^\s*```[a-zA-Z0-9_-]*\s*\n(.*?)\n\s*```\s*$", re.DOTALL)


def strip_markdown_fence(text: str) -> str:
    m = _FENCE_RE.match(text)
    return m.group(1) if m else text


@dataclass
class DesignerBatchResult:
    plans: list  # EditPlan | None, aligned with the input batch
    failures: dict  # index -> exception
    retry_counts: dict  # index -> number of individual re-requests

    @property
    def dropped_indices(self) -> list[int]:
        return sorted(self.failures)


def _default_transport(config: DesignerConfig):
    import requests

    api_key = os.environ.get(config.api_key_env)
    if not api_key:
        raise AuthFailure(
            f"environment variable {config.api_key_env} is not set")
    session = requests.Session()

    def post(payload: dict) -> str:
        headers = {"Authorization": f"Bearer {api_key}"}
        try:
            resp = session.post(config.endpoint_url, json=payload,
                                headers=headers, timeout=120)
        except requests.RequestException as exc:
            raise EndpointUnreachable(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthFailure(f"endpoint returned {resp.status_code}")
        if resp.status_code >= 400:
            raise EndpointUnreachable(f"endpoint returned {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected response shape: {exc}") from exc

    return post


def _build_payload(config: DesignerConfig, user_text: str) -> dict:
    payload = {
        "messages": [
            {"role": "system", "content": base_prompt()},
            {"role": "user", "content": user_text},
        ],
    }
    if config.model_name:
        payload["model"] = config.model_name
    if config.temperature is not None:
        payload["temperature"] = config.temperature
    return payload


def _single_request_text(scene_labels) -> str:
    return ("Sound sources:\n"
            + json.dumps(list(scene_labels))
            + "\nReturn exactly one JSON object in the specified format.")


def _batch_request_text(batch) -> str:
    return ("Here are {} sets of sound sources:\n{}\n"
            "Return a JSON array with exactly one output object per set, "
            "in the same order.".format(
                len(batch), json.dumps([list(b) for b in batch])))


def _parse_content(content: str, expect_list: bool):
    body = strip_markdown_fence(content).strip()
    try:
        data = json.loads(body)
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"response is not JSON: {exc}") from exc
    if expect_list:
        if not isinstance(data, list):
            raise MalformedResponse("expected a JSON array of plans")
        return data
    return data


def _plan_from_obj(obj, scene_labels) -> EditPlan:
    try:
        plan = parse_plan_json(json.dumps(obj))
    except Exception as exc:
        raise MalformedResponse(f"plan does not match schema: {exc}") from exc
    report = validate_plan(plan, scene_labels)
    if not report.is_valid:
        raise ValidationFailed(
            "; ".join(f"{v.rule_id}: {v.message}" for v in report.violations))
    if not plan.sound_sources:
        plan = EditPlan(instruction=plan.instruction,
                        sound_sources=tuple(scene_labels),
                        steps=plan.steps, warnings=plan.warnings)
    return plan


def design_plan_llm(scene_labels_batch, config: DesignerConfig,
                    transport=None) -> DesignerBatchResult:
    """Request plans for a batch of scenes from a chat-completion endpoint.

    Each scene's plan is parsed and validated; individual failures are
    re-requested up to config.max_retries, then logged and dropped. The
    transport argument (payload dict -> content string) exists for tests
    and alternative providers.
    """
    if transport is None:
        transport = _default_transport(config)

    batch = [list(labels) for labels in scene_labels_batch]
    plans: list = [None] * len(batch)
    failures: dict = {}
    retry_counts: dict = {i: 0 for i in range(len(batch))}
    pending_error: dict = {}
    pending = list(range(len(batch)))

    # initial pass, chunked by batch_size
    for start in range(0, len(batch), max(1, config.batch_size)):
        chunk = list(range(start, min(start + max(1, config.batch_size),
                                      len(batch))))
        if len(chunk) == 1:
            text = _single_request_text(batch[chunk[0]])
        else:
            text = _batch_request_text([batch[i] for i in chunk])
        try:
            content = transport(_build_payload(config, text))
            objs = _parse_content(content, expect_list=len(chunk) > 1)
            if len(chunk) == 1:
                objs = [objs]
            if len(objs) != len(chunk):
                raise MalformedResponse(
                    f"expected {len(chunk)} plans, got {len(objs)}")
        except (EndpointUnreachable, AuthFailure):
            raise
        except Exception as exc:
            for i in chunk:
                pending_error[i] = exc
            continue
        for i, obj in zip(chunk, objs):
            try:
                plans[i] = _plan_from_obj(obj, batch[i])
                pending.remove(i)
            except Exception as exc:
                pending_error[i] = exc

    # individual retries
    for i in list(pending):
        if plans[i] is not None:
            continue
        last_error = pending_error.get(i)
        while retry_counts[i] < config.max_retries and plans[i] is None:
            retry_counts[i] += 1
            log.info("designer retry %d/%d for scene %d (%s)",
                     retry_counts[i], config.max_retries, i, last_error)
            try:
                content = transport(
                    _build_payload(config, _single_request_text(batch[i])))
                obj = _parse_content(content, expect_list=False)
                plans[i] = _plan_from_obj(obj, batch[i])
            except (EndpointUnreachable, AuthFailure):
                raise
            except Exception as exc:
                last_error = exc
        if plans[i] is None:
            log.warning("designer dropped scene %d after %d retries: %s",
                        i, retry_counts[i], last_error)
            failures[i] = last_error

    return DesignerBatchResult(plans=plans, failures=failures,
                               retry_counts=retry_counts)
