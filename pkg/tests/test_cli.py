import json

import pytest

import cli
from src.services.gamespec import SPECS_DIR, parse
from src.utils.exports import read_ppm, read_trace
from tests.conftest import ROOT


@pytest.fixture(autouse=True)
def repo_root(monkeypatch):
    monkeypatch.chdir(ROOT)


def test_spec_parse_prints_canonical_form(capsys, specs):
    assert cli.main(["--quiet", "spec", "parse", str(SPECS_DIR / "roadrash.game")]) == 0
    assert parse(capsys.readouterr().out) == specs["roadrash"]


def test_spec_variant(capsys, specs):
    assert cli.main(["--quiet", "spec", "variant", "myaliensv1", "--variant", "mod-colorsize"]) == 0
    assert "color=250,160,0" in capsys.readouterr().out


def test_not_applicable_exits_with_json_error(capsys):
    assert cli.main(["--quiet", "spec", "variant", "roadrash", "--variant", "mod-position"]) == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "NotApplicable"


def test_missing_file_is_an_unexpected_error(capsys, tmp_path):
    assert cli.main(["--quiet", "spec", "parse", str(tmp_path / "nope.game")]) == 1
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "FileNotFoundError"


def test_identify(capsys):
    assert cli.main(["--quiet", "identify", "myaliensv1"]) == 0
    out = capsys.readouterr().out
    assert "agent identified by Uniqueness" in out
    assert "MoveRight" in out


def test_train_random_cell(capsys, tmp_path):
    assert cli.main(["--quiet", "train", "--game", "myaliensv1", "--algo", "random", "--runs", "2",
                     "--out", str(tmp_path)]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["cell"] == "myaliensv1__base__random"
    assert not summary["skipped"]
    assert (tmp_path / "myaliensv1__base__random" / "curve.csv").exists()


def test_train_then_eval_qtable(capsys, tmp_path):
    assert cli.main(["--quiet", "train", "--game", "roadrash", "--epochs", "100", "--runs", "1",
                     "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    model = tmp_path / "roadrash__base__qlearn" / "qtable_seed0.txt"
    assert cli.main(["--quiet", "eval", "--model", str(model), "--game", "roadrash", "--variant", "mod-image",
                     "--runs", "2"]) == 0
    result = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert result["runs"] == 2
    assert result["variant"] == "mod-image"


def test_eval_rejects_model_of_other_game(capsys, tmp_path):
    model = tmp_path / "q.txt"
    model.write_text("# actions: none left right\n# game: roadrash\n")
    assert cli.main(["--quiet", "eval", "--model", str(model), "--game", "myaliensv1"]) == 2
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "ArtifactFormatError"


def test_identify_writes_first_frame(capsys, tmp_path):
    assert cli.main(["--quiet", "identify", "spaceinvaders", "--frames", str(tmp_path)]) == 0
    assert "first frame written" in capsys.readouterr().out
    frame = read_ppm(str(tmp_path / "spaceinvaders_base_seed0.ppm"))
    assert (frame.width, frame.height) == (30 * 4, 20 * 4)


def test_eval_with_categories_and_trace(capsys, tmp_path):
    assert cli.main(["--quiet", "train", "--game", "roadrash", "--epochs", "100", "--runs", "1",
                     "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    cell = tmp_path / "roadrash__base__qlearn"
    trace_dir = tmp_path / "trace"
    assert cli.main(["--quiet", "eval", "--model", str(cell / "qtable_seed0.txt"), "--game", "roadrash",
                     "--runs", "2", "--categories", str(cell / "categories_seed0.txt"),
                     "--dump-trace", str(trace_dir)]) == 0
    result = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert result["trace"] == str(trace_dir / "trace.jsonl")
    steps = read_trace(result["trace"])
    assert steps[-1]["status"] in ("won", "lost")
    assert [s["step"] for s in steps] == list(range(len(steps)))
    assert read_ppm(str(trace_dir / "last.ppm")).width == 4 * 4


def test_eval_rejects_categories_for_checkpoints(capsys, tmp_path):
    assert cli.main(["--quiet", "eval", "--model", str(tmp_path / "net.ckpt"), "--game", "roadrash",
                     "--categories", str(tmp_path / "c.txt")]) == 2
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "ConfigError"
