import random
import sys
import textwrap

import numpy as np
import pytest

from stereoedit.audio import SAMPLE_RATE, SourceClip
from stereoedit.engine import (OracleEditor, SubprocessEditorAdapter,
                               apply_step, execute_plan, match_target)
from stereoedit.errors import (AdapterProtocolError, AdapterTimeout,
                               AmbiguousTarget, EmptySceneResult,
                               TargetNotFound)
from stereoedit.plans import (Add, Change, EditPlan, Extract, Remove,
                              TurnDown, TurnUp)
from stereoedit.spatial import (Direction, EventSpec, Scene, db_to_linear,
                                render_scene)


def _clip(label, seed=0, n=24000):
    rng = np.random.default_rng(seed)
    return SourceClip(label=label, samples=rng.uniform(-0.3, 0.3, n))


def _scene():
    n = 24000
    return Scene((
        EventSpec("e0", "rain", _clip("rain", 1, n), Direction.LEFT, -3.0),
        EventSpec("e1", "dog bark", _clip("dog bark", 2, n), Direction.FRONT, 0.0),
        EventSpec("e2", "clock tick", _clip("clock tick", 3, n), Direction.RIGHT, -1.0),
    ), n / SAMPLE_RATE)


def test_match_target():
    scene = _scene()
    assert match_target(scene, "Dog  Bark") == ["e1"]
    assert match_target(scene, "rain", Direction.LEFT) == ["e0"]
    assert match_target(scene, "rain", Direction.RIGHT) == []


def test_remove():
    scene = _scene()
    out = apply_step(scene, Remove(label="rain"))
    assert [e.event_id for e in out.scene_after.events] == ["e1", "e2"]
    assert out.edited_event_ids == ("e0",)
    np.testing.assert_array_equal(out.audio_after.samples,
                                  render_scene(out.scene_after).samples)


def test_remove_missing_raises():
    with pytest.raises(TargetNotFound):
        apply_step(_scene(), Remove(label="whale song"))


def test_remove_last_event_raises():
    scene = Scene(_scene().events[:1], 1.0)
    with pytest.raises(EmptySceneResult):
        apply_step(scene, Remove(label="rain"))


def test_ambiguous_needs_direction():
    n = 24000
    scene = Scene((
        EventSpec("e0", "rain", _clip("rain", 1, n), Direction.LEFT, 0.0),
        EventSpec("e1", "rain", _clip("rain", 2, n), Direction.RIGHT, 0.0),
    ), 1.0)
    with pytest.raises(AmbiguousTarget):
        apply_step(scene, Remove(label="rain"))
    out = apply_step(scene, Remove(label="rain", direction=Direction.LEFT))
    assert out.edited_event_ids == ("e0",)


def test_extract_keeps_spatialization():
    scene = _scene()
    out = apply_step(scene, Extract(label="clock tick"))
    assert [e.event_id for e in out.scene_after.events] == ["e2"]
    only = Scene((scene.events[2],), scene.duration_seconds)
    np.testing.assert_array_equal(out.audio_after.samples,
                                  render_scene(only).samples)


def test_turn_up_down_adjust_gain():
    scene = _scene()
    up = apply_step(scene, TurnUp(label="dog bark", delta_db=3.0))
    assert up.scene_after.events[1].gain_db == 3.0
    down = apply_step(scene, TurnDown(label="dog bark", delta_db=2.0))
    assert down.scene_after.events[1].gain_db == -2.0


def test_turn_up_scales_isolated_event_rms():
    scene = _scene()
    before = apply_step(scene, Extract(label="dog bark")).audio_after
    turned = apply_step(scene, TurnUp(label="dog bark", delta_db=6.0)).scene_after
    after = apply_step(turned, Extract(label="dog bark")).audio_after
    assert after.rms() / before.rms() == pytest.approx(db_to_linear(6.0),
                                                       rel=1e-12)


def test_change_direction():
    scene = _scene()
    out = apply_step(scene, Change(label="rain", to=Direction.RIGHT))
    assert out.scene_after.events[0].direction is Direction.RIGHT
    with pytest.raises(TargetNotFound):
        apply_step(scene, Change(label="rain", from_=Direction.RIGHT,
                                 to=Direction.FRONT))


def test_add_requires_catalog():
    with pytest.raises(ValueError):
        apply_step(_scene(), Add(label="wind"))


def test_add_appends_event(catalog):
    scene = _scene()
    out = apply_step(scene, Add(label="wind", direction=Direction.LEFT,
                                gain_db=2.0),
                     catalog=catalog, rng=random.Random(0))
    added = out.scene_after.events[-1]
    assert added.event_id == "e3"
    assert added.direction is Direction.LEFT
    assert added.gain_db == 2.0
    assert len(added.clip.samples) == scene.num_samples


def test_add_defaults_front_zero_db(catalog):
    out = apply_step(_scene(), Add(label="wind"), catalog=catalog,
                     rng=random.Random(0))
    added = out.scene_after.events[-1]
    assert added.direction is Direction.FRONT and added.gain_db == 0.0


def test_execute_plan_trajectory_shape(catalog):
    scene = _scene()
    plan = EditPlan(instruction="", sound_sources=tuple(scene.labels), steps=(
        Remove(label="rain"),
        TurnUp(label="dog bark", delta_db=2.0),
        Add(label="wind"),
    ))
    traj = execute_plan(scene, plan, catalog=catalog, rng=random.Random(0))
    assert len(traj) == 4
    np.testing.assert_array_equal(traj[0][1].samples,
                                  render_scene(scene).samples)


def test_execute_plan_error_names_step():
    scene = _scene()
    plan = EditPlan(instruction="", sound_sources=(), steps=(
        Remove(label="rain"), Remove(label="whale song")))
    with pytest.raises(TargetNotFound, match="step 1"):
        execute_plan(scene, plan)


def test_oracle_editor_tracks_scene(catalog):
    scene = _scene()
    editor = OracleEditor(scene, catalog=catalog, rng=random.Random(0))
    audio0 = render_scene(scene)
    after_add = editor.edit(audio0, Add(label="wind"))
    assert len(editor.scene.events) == 4
    after_remove = editor.edit(after_add, Remove(label="wind"))
    np.testing.assert_array_equal(after_remove.samples, audio0.samples)


# ---------------------------------------------------------------------------
# Subprocess adapter
# ---------------------------------------------------------------------------

PASSTHROUGH = textwrap.dedent("""
    import sys, shutil
    shutil.copyfile(sys.argv[1], sys.argv[2])
""")


def test_subprocess_adapter_passthrough(tmp_path):
    script = tmp_path / "editor.py"
    script.write_text(PASSTHROUGH)
    adapter = SubprocessEditorAdapter(
        [sys.executable, str(script), "{input}", "{output}"],
        work_dir=tmp_path / "work")
    audio = render_scene(_scene())
    out = adapter.edit(audio, Remove(label="rain"))
    np.testing.assert_allclose(out.samples,
                               audio.samples.astype(np.float32), atol=0)
    assert (tmp_path / "work" / "call_0001" / "step.txt").read_text() \
        == "Remove the sound of rain\n"


def test_subprocess_adapter_failure(tmp_path):
    script = tmp_path / "bad.py"
    script.write_text("import sys; sys.exit(3)")
    adapter = SubprocessEditorAdapter([sys.executable, str(script), "{input}"],
                                      work_dir=tmp_path / "work")
    with pytest.raises(AdapterProtocolError, match="exit 3"):
        adapter.edit(render_scene(_scene()), Remove(label="rain"))


def test_subprocess_adapter_timeout(tmp_path):
    script = tmp_path / "slow.py"
    script.write_text("import time; time.sleep(30)")
    adapter = SubprocessEditorAdapter([sys.executable, str(script)],
                                      work_dir=tmp_path / "work", timeout_s=0.5)
    with pytest.raises(AdapterTimeout):
        adapter.edit(render_scene(_scene()), Remove(label="rain"))


def test_subprocess_adapter_wrong_shape(tmp_path):
    # editor writes a mono file: protocol violation
    script = tmp_path / "mono.py"
    script.write_text(textwrap.dedent("""
        import sys
        import numpy as np
        from scipy.io import wavfile
        wavfile.write(sys.argv[1], 24000, np.zeros(100, dtype=np.float32))
    """))
    adapter = SubprocessEditorAdapter([sys.executable, str(script), "{output}"],
                                      work_dir=tmp_path / "work")
    with pytest.raises(AdapterProtocolError, match="stereo"):
        adapter.edit(render_scene(_scene()), Remove(label="rain"))
