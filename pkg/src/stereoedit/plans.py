"""Edit-plan language: atomic steps, template text, JSON form, validation.

Two surface forms are supported and kept convertible:

* template text, one step per line, e.g.
  ``Add the sound of rooster crowing at right with 3 db``
* structured JSON with ``sound sources`` / ``complex editing instruction`` /
  ``atomic editing steps`` keys, each step an
  ``{"operation": ..., "target": ..., "effect": ...}`` object.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import JsonSyntaxError, ParseError, SchemaError
from .spatial import Direction

MIN_DELTA_DB = 0.0
MAX_DELTA_DB = 6.0


def normalize_label(label: str) -> str:
    """Case-insensitive, whitespace-collapsed comparison key."""
    return " ".join(label.lower().split())


# ---------------------------------------------------------------------------
# Atomic steps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AtomicStep:
    label: str


@dataclass(frozen=True)
class Add(AtomicStep):
    direction: Direction | None = None
    gain_db: float | None = None


@dataclass(frozen=True)
class Remove(AtomicStep):
    direction: Direction | None = None


@dataclass(frozen=True)
class Extract(AtomicStep):
    direction: Direction | None = None


@dataclass(frozen=True)
class TurnUp(AtomicStep):
    delta_db: float = 0.0


@dataclass(frozen=True)
class TurnDown(AtomicStep):
    delta_db: float = 0.0


@dataclass(frozen=True)
class Change(AtomicStep):
    to: Direction = Direction.FRONT
    from_: Direction | None = None


@dataclass(frozen=True)
class EditPlan:
    instruction: str
    sound_sources: tuple[str, ...]
    steps: tuple[AtomicStep, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sound_sources", tuple(self.sound_sources))
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "warnings", tuple(self.warnings))


# ---------------------------------------------------------------------------
# Template text form
# ---------------------------------------------------------------------------

_DIR = r"(left|front|right)"
_NUM = r"([-+]?\d+(?:\.\d+)?)"

_ADD_RE = re.compile(
    rf"add the sound of (.+?)(?: at {_DIR})?(?: (?:with|by) {_NUM}\s*db)?",
    re.IGNORECASE,
)
_REMOVE_RE = re.compile(
    rf"remove the sound of (.+?)(?: at (?:the )?{_DIR})?", re.IGNORECASE)
_EXTRACT_RE = re.compile(
    rf"extract the sound of (.+?)(?: at (?:the )?{_DIR})?", re.IGNORECASE)
_TURN_RE = re.compile(
    rf"turn (up|down) (?:the )?(?:the )?sound of (.+?) by {_NUM}\s*db",
    re.IGNORECASE,
)
_CHANGE_RE = re.compile(
    rf"change the sound of (.+?)(?: from {_DIR})? to {_DIR}", re.IGNORECASE)


def parse_step(text: str) -> AtomicStep:
    """Parse one canonical template sentence into an AtomicStep."""
    line = text.strip()
    lowered = line.lower()

    if lowered.startswith("add "):
        m = _ADD_RE.fullmatch(line)
        if not m:
            raise ParseError(f"malformed add step: {line!r}", position=0,
                             expected="Add the sound of <label> [at <dir>] [with <n> db]")
        label, d, n = m.group(1), m.group(2), m.group(3)
        return Add(label=label,
                   direction=Direction.from_text(d) if d else None,
                   gain_db=float(n) if n is not None else None)

    if lowered.startswith("remove "):
        m = _REMOVE_RE.fullmatch(line)
        if not m:
            raise ParseError(f"malformed remove step: {line!r}", position=0,
                             expected="Remove the sound of <label> [at <dir>]")
        return Remove(label=m.group(1),
                      direction=Direction.from_text(m.group(2)) if m.group(2) else None)

    if lowered.startswith("extract "):
        m = _EXTRACT_RE.fullmatch(line)
        if not m:
            raise ParseError(f"malformed extract step: {line!r}", position=0,
                             expected="Extract the sound of <label> [at <dir>]")
        return Extract(label=m.group(1),
                       direction=Direction.from_text(m.group(2)) if m.group(2) else None)

    if lowered.startswith("turn "):
        m = _TURN_RE.fullmatch(line)
        if not m:
            raise ParseError(f"malformed turn step: {line!r}", position=0,
                             expected="Turn up/down the sound of <label> by <n> dB")
        cls = TurnUp if m.group(1).lower() == "up" else TurnDown
        return cls(label=m.group(2), delta_db=float(m.group(3)))

    if lowered.startswith("change "):
        m = _CHANGE_RE.fullmatch(line)
        if not m:
            raise ParseError(f"malformed change step: {line!r}", position=0,
                             expected="Change the sound of <label> [from <dir>] to <dir>")
        return Change(label=m.group(1),
                      from_=Direction.from_text(m.group(2)) if m.group(2) else None,
                      to=Direction.from_text(m.group(3)))

    raise ParseError(
        f"unrecognized step: {line!r}", position=0,
        expected="one of: Add / Remove / Extract / Turn up / Turn down / Change")


def _fmt_db(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def serialize_step(step: AtomicStep) -> str:
    """Emit the canonical template sentence; inverse of parse_step."""
    if isinstance(step, Add):
        out = f"Add the sound of {step.label}"
        if step.direction is not None:
            out += f" at {step.direction.value}"
        if step.gain_db is not None:
            out += f" with {_fmt_db(step.gain_db)} db"
        return out
    if isinstance(step, Remove):
        out = f"Remove the sound of {step.label}"
        if step.direction is not None:
            out += f" at {step.direction.value}"
        return out
    if isinstance(step, Extract):
        out = f"Extract the sound of {step.label}"
        if step.direction is not None:
            out += f" at {step.direction.value}"
        return out
    if isinstance(step, TurnUp):
        return f"Turn up the sound of {step.label} by {_fmt_db(step.delta_db)} dB"
    if isinstance(step, TurnDown):
        return f"Turn down the sound of {step.label} by {_fmt_db(step.delta_db)} dB"
    if isinstance(step, Change):
        out = f"Change the sound of {step.label}"
        if step.from_ is not None:
            out += f" from {step.from_.value}"
        return out + f" to {step.to.value}"
    raise TypeError(f"unknown step type: {type(step).__name__}")


def parse_plan_text(text: str) -> EditPlan:
    """Parse a block of template lines (one step per line) into a plan."""
    steps = [parse_step(line) for line in text.splitlines() if line.strip()]
    return EditPlan(instruction="", sound_sources=(), steps=tuple(steps))


def serialize_plan_text(plan: EditPlan) -> str:
    return "\n".join(serialize_step(s) for s in plan.steps)


# ---------------------------------------------------------------------------
# JSON form (base-prompt output shape)
# ---------------------------------------------------------------------------

_EFFECT_ADD_RE = re.compile(
    rf"(?:at {_DIR})?\s*(?:(?:by|with)\s*{_NUM}\s*db)?", re.IGNORECASE)
_EFFECT_TURN_RE = re.compile(rf"(?:by\s+)?{_NUM}\s*db", re.IGNORECASE)
_EFFECT_CHANGE_RE = re.compile(rf"(?:from {_DIR}\s+)?to {_DIR}", re.IGNORECASE)
_EFFECT_AT_RE = re.compile(rf"at (?:the )?{_DIR}", re.IGNORECASE)

_PLACEHOLDER_TARGETS = {"none", "null", "nil", "n/a", "placeholder", ""}

_KNOWN_PLAN_KEYS = {"sound sources", "complex editing instruction",
                    "atomic editing steps"}
_KNOWN_STEP_KEYS = {"operation", "target", "effect"}


def _effect_is_empty(effect) -> bool:
    return effect is None or str(effect).strip().lower() in {"", "none", "null"}


def _step_from_json(obj: dict, index: int) -> AtomicStep:
    if not isinstance(obj, dict):
        raise SchemaError(f"step {index}: expected an object")
    missing = {"operation", "target"} - set(obj)
    if missing:
        raise SchemaError(f"step {index}: missing key(s) {sorted(missing)}")
    op = str(obj["operation"]).strip().lower()
    target = obj["target"]
    if not isinstance(target, str) or not target.strip():
        raise SchemaError(f"step {index}: target must be a non-empty string")
    target = target.strip()
    effect = obj.get("effect")

    if op == "add":
        if target.lower() in _PLACEHOLDER_TARGETS:
            raise SchemaError(
                f"step {index}: add target must describe the new sound, "
                f"got placeholder {target!r}")
        if _effect_is_empty(effect):
            return Add(label=target)
        m = _EFFECT_ADD_RE.fullmatch(str(effect).strip())
        if not m or (m.group(1) is None and m.group(2) is None):
            raise SchemaError(f"step {index}: malformed add effect {effect!r}")
        return Add(label=target,
                   direction=Direction.from_text(m.group(1)) if m.group(1) else None,
                   gain_db=float(m.group(2)) if m.group(2) is not None else None)

    if op in ("remove", "extract"):
        cls = Remove if op == "remove" else Extract
        if _effect_is_empty(effect):
            return cls(label=target)
        m = _EFFECT_AT_RE.fullmatch(str(effect).strip())
        if not m:
            raise SchemaError(f"step {index}: malformed {op} effect {effect!r}")
        return cls(label=target, direction=Direction.from_text(m.group(1)))

    if op in ("turn up", "turn down", "turnup", "turndown"):
        if _effect_is_empty(effect):
            raise SchemaError(f"step {index}: {op} requires a dB effect")
        m = _EFFECT_TURN_RE.fullmatch(str(effect).strip())
        if not m:
            raise SchemaError(f"step {index}: malformed volume effect {effect!r}")
        cls = TurnUp if "up" in op else TurnDown
        return cls(label=target, delta_db=float(m.group(1)))

    if op == "change":
        if _effect_is_empty(effect):
            raise SchemaError(f"step {index}: change requires a 'to <dir>' effect")
        m = _EFFECT_CHANGE_RE.fullmatch(str(effect).strip())
        if not m:
            raise SchemaError(f"step {index}: malformed change effect {effect!r}")
        return Change(label=target,
                      from_=Direction.from_text(m.group(1)) if m.group(1) else None,
                      to=Direction.from_text(m.group(2)))

    raise SchemaError(f"step {index}: unknown operation {obj['operation']!r}")


def _step_to_json(step: AtomicStep) -> dict:
    if isinstance(step, Add):
        parts = []
        if step.direction is not None:
            parts.append(f"at {step.direction.value}")
        if step.gain_db is not None:
            parts.append(f"by {_fmt_db(step.gain_db)}dB")
        return {"operation": "add", "target": step.label,
                "effect": " ".join(parts) if parts else "None"}
    if isinstance(step, (Remove, Extract)):
        op = "remove" if isinstance(step, Remove) else "extract"
        effect = f"at {step.direction.value}" if step.direction else "None"
        return {"operation": op, "target": step.label, "effect": effect}
    if isinstance(step, TurnUp):
        return {"operation": "turn up", "target": step.label,
                "effect": f"{_fmt_db(step.delta_db)}dB"}
    if isinstance(step, TurnDown):
        return {"operation": "turn down", "target": step.label,
                "effect": f"{_fmt_db(step.delta_db)}dB"}
    if isinstance(step, Change):
        effect = f"to {step.to.value}"
        if step.from_ is not None:
            effect = f"from {step.from_.value} " + effect
        return {"operation": "change", "target": step.label, "effect": effect}
    raise TypeError(f"unknown step type: {type(step).__name__}")


def plan_to_json(plan: EditPlan) -> dict:
    return {
        "sound sources": list(plan.sound_sources),
        "complex editing instruction": plan.instruction,
        "atomic editing steps": [_step_to_json(s) for s in plan.steps],
    }


def parse_plan_json(data) -> EditPlan:
    """Parse the base-prompt JSON shape (or a bare list of step objects)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise JsonSyntaxError(str(exc)) from exc

    if isinstance(data, list):
        steps = tuple(_step_from_json(s, i) for i, s in enumerate(data))
        return EditPlan(instruction="", sound_sources=(), steps=steps)

    if not isinstance(data, dict):
        raise SchemaError("plan JSON must be an object or a list of steps")

    warnings = tuple(f"ignored unknown key {k!r}"
                     for k in data if k not in _KNOWN_PLAN_KEYS)
    if "atomic editing steps" not in data:
        raise SchemaError("missing required key 'atomic editing steps'")
    raw_steps = data["atomic editing steps"]
    if not isinstance(raw_steps, list):
        raise SchemaError("'atomic editing steps' must be a list")

    step_warnings = []
    steps = []
    for i, raw in enumerate(raw_steps):
        if isinstance(raw, dict):
            step_warnings.extend(
                f"step {i}: ignored unknown key {k!r}"
                for k in raw if k not in _KNOWN_STEP_KEYS)
        steps.append(_step_from_json(raw, i))

    sources = data.get("sound sources", [])
    if not isinstance(sources, list) or not all(isinstance(s, str) for s in sources):
        raise SchemaError("'sound sources' must be a list of strings")

    return EditPlan(
        instruction=str(data.get("complex editing instruction", "")),
        sound_sources=tuple(sources),
        steps=tuple(steps),
        warnings=warnings + tuple(step_warnings),
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    rule_id: str
    step_index: int | None
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def rule_ids(self) -> list[str]:
        return [v.rule_id for v in self.violations]


def validate_plan(plan: EditPlan, scene_labels) -> ValidationReport:
    """Check a plan against the closed rule set R1-R6.

    R1 non-Add targets must match a scene label; R2 removes in [1,2] and at
    least one source kept; R3 at most two adds; R4 added labels must not
    duplicate scene labels; R5 dB values within [0, 6]; R6 no step may
    target a label introduced by a later Add.
    """
    labels = {normalize_label(l) for l in scene_labels}
    add_positions: dict[str, list[int]] = {}
    for i, step in enumerate(plan.steps):
        if isinstance(step, Add):
            add_positions.setdefault(normalize_label(step.label), []).append(i)

    violations: list[Violation] = []

    for i, step in enumerate(plan.steps):
        if isinstance(step, Add):
            continue
        key = normalize_label(step.label)
        if key in labels:
            continue
        later = [j for j in add_positions.get(key, []) if j > i]
        if later:
            violations.append(Violation(
                "R6", i,
                f"step {i} targets {step.label!r} which is only introduced "
                f"by a later add (step {later[0]})"))
        else:
            violations.append(Violation(
                "R1", i,
                f"step {i} targets {step.label!r} which matches no scene label"))

    removes = [i for i, s in enumerate(plan.steps) if isinstance(s, Remove)]
    if removes:
        if len(removes) > 2:
            violations.append(Violation(
                "R2", None, f"{len(removes)} removes; at most 2 allowed"))
        remove_keys = {normalize_label(plan.steps[i].label) for i in removes}
        if labels and not (labels - remove_keys):
            violations.append(Violation(
                "R2", None, "plan removes every sound source; keep at least one"))

    adds = [i for i, s in enumerate(plan.steps) if isinstance(s, Add)]
    if len(adds) > 2:
        violations.append(Violation(
            "R3", None, f"{len(adds)} adds; at most 2 allowed"))

    for i in adds:
        step = plan.steps[i]
        if normalize_label(step.label) in labels:
            violations.append(Violation(
                "R4", i, f"added label {step.label!r} duplicates a scene label"))

    for i, step in enumerate(plan.steps):
        value = None
        if isinstance(step, (TurnUp, TurnDown)):
            value = step.delta_db
        elif isinstance(step, Add) and step.gain_db is not None:
            value = step.gain_db
        if value is not None and not MIN_DELTA_DB <= value <= MAX_DELTA_DB:
            violations.append(Violation(
                "R5", i,
                f"step {i} dB value {value} outside "
                f"[{MIN_DELTA_DB:g}, {MAX_DELTA_DB:g}]"))

    return ValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# Canonical ordering
# ---------------------------------------------------------------------------

def _step_group(step: AtomicStep) -> int:
    if isinstance(step, (Remove, Extract)):
        return 0
    if isinstance(step, (TurnUp, TurnDown, Change)):
        return 1
    return 2  # Add


def canonicalize_plan(plan: EditPlan) -> EditPlan:
    """Stable reorder into remove/extract, then modify, then add."""
    ordered = tuple(sorted(plan.steps, key=_step_group))
    return EditPlan(instruction=plan.instruction,
                    sound_sources=plan.sound_sources,
                    steps=ordered,
                    warnings=plan.warnings)
