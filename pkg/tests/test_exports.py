import numpy as np
import pytest

from src.models.errors import ArtifactFormatError
from src.services import engine
from src.services.engine import GameEnv
from src.utils.exports import frame_to_array, read_ppm, read_trace, write_ppm, write_trace


def test_frame_written_as_ppm(tmp_path, specs):
    state = engine.reset(specs["spaceinvaders"], 0, seed=0)
    frame = engine.render(state, 3)
    path = str(tmp_path / "frames" / "first.ppm")
    write_ppm(frame, path)
    restored = read_ppm(path)
    assert restored == frame
    np.testing.assert_array_equal(frame_to_array(restored), engine.render_array(state, 3))


def test_read_ppm_rejects_other_formats(tmp_path):
    path = tmp_path / "image.ppm"
    path.write_bytes(b"P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(ArtifactFormatError):
        read_ppm(str(path))


def test_trace_round_trip(tmp_path, tiny):
    env = GameEnv(tiny, record_trace=True)
    env.reset()
    for key in ("left", "left", "none"):
        env.step(key)
    path = str(tmp_path / "trace.jsonl")
    write_trace(env.trace, path)
    assert read_trace(path) == env.trace
    assert read_trace(path)[1]["reward"] == 1
