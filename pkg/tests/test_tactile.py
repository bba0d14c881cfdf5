import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import pad_state
from eip.primitives import box
from eip.scene import SceneConfig, build_scene, run_scene
from eip.tactile import (
    FrameShapeError,
    TactileFrame,
    export_frame,
    extract_frame,
    read_pgm16,
    read_tfr,
    stack_touches,
    write_tfr,
)


def frame_of(data, normal=(0.0, 0.0, -1.0)):
    return TactileFrame(np.asarray(data, dtype=float), {"contact_normal": list(normal)})


def test_undeformed_frame_is_zero():
    frame = extract_frame(pad_state(), 16, 16)
    assert frame.data.shape == (16, 16, 3)
    assert np.all(frame.data == 0.0)
    assert frame.metadata["time_step"] == 0


def test_rigidly_translated_pad_reads_zero():
    from eip.mpm import step

    v = (0.0, 0.0, -0.1)
    state = pad_state(velocity=v)
    for _ in range(10):
        step(state, v)
    assert np.abs(extract_frame(state, 8, 8).data).max() < 1e-12


def test_empty_pixels_are_exactly_zero():
    state = pad_state()
    state.x[:, 2] -= 1e-4  # every contact particle moved
    frame = extract_frame(state, 64, 64)  # finer than the 16 x 16 contact layer
    filled = np.any(frame.data != 0.0, axis=2)
    assert filled.sum() == 256
    assert np.all(np.isfinite(frame.data))
    assert np.all(frame.data[~filled] == 0.0)


def test_frame_pixel_means():
    state = pad_state()
    layer0 = np.nonzero(state.layer == 0)[0]
    state.x[layer0, 2] += np.linspace(0, 1e-3, len(layer0))
    frame = extract_frame(state, 1, 1)
    assert frame.data[0, 0, 2] == pytest.approx(np.linspace(0, 1e-3, len(layer0)).mean())


def test_no_contact_layer_rejected():
    state = pad_state()
    state.layer[:] = 1
    with pytest.raises(ValueError):
        extract_frame(state, 4, 4)


def test_flat_wall_press_reads_minus_delta():
    """Press a pad into a wall that covers its whole face.

    The wall top lies just above a grid-node plane, so the outermost sticky
    nodes coincide with the mesh surface, and the contact-layer particles start
    on that surface.  ``delta`` is the hand travel from there.
    """
    n = 128
    dx = 1.0 / n
    h = 0.5 * dx
    top = 51 * dx + 0.01 * h
    wall = box((0.4, 0.4, top - 0.2), (0.3, 0.3, 0.2))
    delta, speed = 0.02, 0.1
    cfg = SceneConfig(
        grid_nodes=n, object_center_m=(0.5, 0.5, 0.3), sensor_width_m=0.0625, sensor_height_m=0.0625,
        sensor_thickness_m=0.0625, press_speed_m_per_s=speed,
        max_press_steps=int(round(delta / (speed * 1e-4))), hold_steps=300, chamfer_threshold=1e9,
    )
    scene = build_scene(cfg, mesh=wall)
    for arr in (scene.state.x, scene.state.rest):
        arr[:, 2] -= 0.5 * h  # contact-layer centres onto the wall surface
    result = run_scene(scene)
    normal = result.final_frame.normal_component()
    filled = np.any(result.final_frame.data != 0.0, axis=2)
    assert filled.all()
    np.testing.assert_allclose(normal[filled], -delta, rtol=0.10)


def test_centered_sphere_press_is_symmetric():
    cfg = SceneConfig(grid_nodes=64, press_speed_m_per_s=0.3, chamfer_threshold=5e-3)
    result = run_scene(build_scene(cfg))
    z = result.terminal_frame.normal_component()
    assert z.min() < 0
    rms = np.sqrt(np.mean(z**2))
    assert np.sqrt(np.mean((z - np.rot90(z)) ** 2)) < 0.05 * rms


def test_stack_single_frame():
    data = np.random.default_rng(0).normal(size=(4, 5, 3))
    stack = stack_touches([frame_of(data)])
    np.testing.assert_array_equal(stack.tensor, data)


def test_stack_ten_frames_shape_and_order():
    frames = [frame_of(np.full((64, 64, 3), float(i))) for i in range(10)]
    stack = stack_touches(frames)
    assert stack.tensor.shape == (64, 64, 30)
    for i in range(10):
        assert np.all(stack.block(i) == i)


def test_stack_shape_mismatch():
    with pytest.raises(FrameShapeError):
        stack_touches([frame_of(np.zeros((4, 4, 3))), frame_of(np.zeros((4, 5, 3)))])
    with pytest.raises(FrameShapeError):
        stack_touches([])


def test_tfr_zero_frame_layout(tmp_path):
    path = export_frame(frame_of(np.zeros((4, 4, 3))), tmp_path / "z.tfr", "tfr")
    raw = path.read_bytes()
    header = struct.calcsize("<4sHIII")
    assert struct.unpack_from("<4sHIII", raw) == (b"EIPT", 1, 4, 4, 3)
    payload = np.frombuffer(raw[header:], dtype="<f4")
    assert payload.size == 48 and np.all(payload == 0)
    assert len(raw) == header + 48 * 4


@settings(max_examples=30)
@given(arrays(np.float32, st.tuples(st.integers(1, 8), st.integers(1, 8), st.integers(1, 9))))
def test_tfr_round_trip_bit_identical(tmp_path_factory, tensor):
    path = tmp_path_factory.mktemp("tfr") / "t.tfr"
    write_tfr(tensor, path)
    back = read_tfr(path)
    assert back.dtype == np.float32
    np.testing.assert_array_equal(back.view(np.uint32), tensor.view(np.uint32))


def test_tfr_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.tfr"
    path.write_bytes(b"NOPE" + bytes(14))
    with pytest.raises(ValueError):
        read_tfr(path)


def test_pgm16_constant_frame(tmp_path):
    path = tmp_path / "c.pgm"
    export_frame(frame_of(np.full((3, 5, 3), 0.25)), path, "pgm16")
    img = read_pgm16(path)
    assert img.shape == (3, 5)
    assert np.all(img == img[0, 0])
    assert "min -0.25" in (tmp_path / "c.pgm.range.txt").read_text()


def test_pgm16_linear_mapping(tmp_path):
    data = np.zeros((2, 2, 3))
    data[..., 2] = [[0.0, -1.0], [-0.5, -0.25]]  # normal component is -z
    path = tmp_path / "m.pgm"
    export_frame(frame_of(data), path, "pgm16")
    np.testing.assert_array_equal(read_pgm16(path), [[0, 65535], [32768, 16384]])


def test_ply_export(tmp_path):
    state = pad_state()
    frame = extract_frame(state, 4, 4)
    text = export_frame(frame, tmp_path / "f.ply", "ply").read_text()
    assert "element vertex 256" in text
    assert "property double dz" in text


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        export_frame(frame_of(np.zeros((1, 1, 3))), tmp_path / "x", "png")
