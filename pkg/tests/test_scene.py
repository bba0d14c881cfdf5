import json

import numpy as np
import pytest

from eip.scene import ConfigError, SceneConfig, build_scene, object_id, run_scene

FAST = dict(grid_nodes=32, sensor_width_m=0.125, sensor_height_m=0.125, press_speed_m_per_s=0.3)


def test_poisson_half_names_field():
    with pytest.raises(ConfigError) as info:
        SceneConfig(poisson_ratio=0.5).validate()
    assert info.value.field == "poisson_ratio"
    assert "poisson_ratio" in str(info.value)


@pytest.mark.parametrize(
    "field,value",
    [
        ("youngs_modulus", 0.0),
        ("density_kg_per_m3", -1.0),
        ("grid_nodes", 8),
        ("dt_seconds", 0.0),
        ("press_speed_m_per_s", 40.0),  # CFL bound at dt = 1e-4
        ("sensor_width_m", 0.1),  # not a multiple of the particle spacing
        ("sensor_thickness_m", 1.0 / 256),
        ("chamfer_threshold", -1e-6),
        ("object_mesh", "builtin:teapot"),
        ("object_mesh", "/nonexistent/mesh.obj"),
        ("affine_source", "mixed"),
    ],
)
def test_invalid_fields_rejected(field, value):
    with pytest.raises(ConfigError) as info:
        SceneConfig(**{field: value}).validate()
    assert info.value.field == field


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="colour"):
        SceneConfig.from_dict({"colour": "red"})


def test_dict_round_trip():
    cfg = SceneConfig(object_center_m=(0.4, 0.5, 0.3), press_direction=(1, 0, -1), hold_steps=7)
    d = json.loads(json.dumps(cfg.to_dict()))
    assert SceneConfig.from_dict(d) == cfg


def test_relative_mesh_path_resolves_against_config(tmp_path):
    from eip import primitives
    from eip.mesh_io import save_obj

    save_obj(primitives.zoo()["cube"], tmp_path / "cube.obj")
    (tmp_path / "scene.json").write_text(json.dumps({"object_mesh": "cube.obj"}))
    cfg = SceneConfig.load(tmp_path / "scene.json")
    assert cfg.object_mesh == str(tmp_path / "cube.obj")
    assert object_id(cfg) == "cube"


def test_load_rejects_non_object(tmp_path):
    (tmp_path / "s.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        SceneConfig.load(tmp_path / "s.json")


def test_frame_shape_defaults_to_contact_grid():
    assert SceneConfig(grid_nodes=64).frame_shape == (32, 32)
    assert SceneConfig(frame_height_px=8, frame_width_px=4).frame_shape == (8, 4)


@pytest.mark.parametrize("direction", [(0, 0, -1), (1, 0, 0), (1, -1, -1)])
def test_pad_faces_object_without_overlap(direction):
    scene = build_scene(SceneConfig(press_direction=direction, **FAST))
    d = np.asarray(direction, float) / np.linalg.norm(direction)
    st = scene.state
    contact = st.x[st.layer == 0]
    # contact layer sits in the plane at the object's extreme point along -d, offset by h / 2
    reach = np.max((scene.mesh.vertices - np.asarray(scene.config.object_center_m)) @ -d)
    heights = (contact - np.asarray(scene.config.object_center_m)) @ -d
    np.testing.assert_allclose(heights, reach + 0.5 * scene.config.spacing, atol=1e-12)
    # deeper layers lie further from the object
    assert np.all((st.x[st.layer == 1] - contact.mean(0)) @ -d > 0)
    np.testing.assert_allclose(st.frame[2], d, atol=1e-12)


def test_run_scene_terminates_and_records_l():
    result = run_scene(build_scene(SceneConfig(chamfer_threshold=1e-4, **FAST)))
    assert result.terminal_step is not None
    steps, ls = zip(*result.l_series)
    assert steps[-1] == result.terminal_step
    assert ls[-1] >= 1e-4 > ls[-2]
    assert result.terminal_frame.metadata["steps"] == result.terminal_step
    assert result.terminal_frame.normal_component().min() < 0


def test_run_scene_without_terminal_runs_full_press():
    cfg = SceneConfig(chamfer_threshold=1e9, max_press_steps=20, hold_steps=5, **FAST)
    result = run_scene(build_scene(cfg))
    assert result.terminal_step is None
    assert result.state.n == 25
    assert result.terminal_frame is result.final_frame
