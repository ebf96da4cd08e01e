from __future__ import annotations

import json
import logging
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from gevrey_kam import __version__
from gevrey_kam.cli import main
from gevrey_kam.config import config_hash, validate_config
from gevrey_kam.conversational import build_orchestrator
from gevrey_kam.errors import ConfigError, SumsetBlowupError
from gevrey_kam.logging import setup_logging
from gevrey_kam.types import ExperimentState
from gevrey_kam.utils.serialize import to_jsonable

FREE_ENERGY = float(2 * np.cos(2 * np.pi * 0.3))
QUICK_SCAN = 'scan = {"n_energies": 200, "k_max": 2}\nrotation = {"n_iter": 1000}\n'


def _run(tmp_path: Path, command: str, text: str, out: str = "out") -> tuple[int, Path]:
    cfg = tmp_path / f"{command}.cfg"
    cfg.write_text(text, encoding="utf-8")
    out_dir = tmp_path / out
    code = main([command, "--config", str(cfg), "--out", str(out_dir), "--threads", "2"])
    return code, out_dir


def _json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def test_unknown_key_exits_2(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    code, out = _run(tmp_path, "reduce", "alpha = golden\nenergy = 0.5\ncolour = blue\n")
    assert code == 2
    assert "config error" in capsys.readouterr().err
    assert not out.exists()


def test_r_above_r0_exits_2(tmp_path: Path) -> None:
    code, _ = _run(tmp_path, "gaps", "alpha = golden\nr = 2.0\n")
    assert code == 2


def test_reduce_without_perturbation(tmp_path: Path) -> None:
    code, out = _run(tmp_path, "reduce", "alpha = golden\nenergy = 0.5\nseed = 7\n")
    assert code == 0
    summary = _json(out / "summary.json")
    assert summary["steps"] == 0
    assert summary["mode"] == "almost"
    assert summary["degree"] == [0]
    prov = summary["provenance"]
    assert prov["version"] == __version__
    assert prov["seed"] == 7
    cfg = validate_config("reduce", {"alpha": "golden", "energy": 0.5, "seed": 7})
    assert prov["config_hash"] == config_hash(cfg)

    lines = (out / "trace.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# ")
    assert f"config_hash={prov['config_hash']}" in lines[0]
    assert pd.read_csv(out / "trace.csv", comment="#").empty
    trace = _json(out / "trace.json")
    assert trace["steps"] == []
    assert trace["provenance"] == prov
    assert _json(out / "run.json")["config"]["energy"] == 0.5


def test_thickness_and_sumset(tmp_path: Path) -> None:
    code, out = _run(tmp_path, "thickness", 'sets = ["middle_thirds:3", [[0, 1]]]\n')
    assert code == 0
    sets = _json(out / "thickness.json")["sets"]
    assert sets[0]["thickness"]["tau"] == pytest.approx(1.0)
    assert sets[0]["components"] == 8
    assert sets[1]["thickness"]["tau"] == "inf"

    code, out = _run(tmp_path, "sumset", 'sets = ["middle_thirds:2", "middle_thirds:2"]\n', "sum")
    assert code == 0
    report = _json(out / "sumset.json")
    assert report["newhouse"]["passed"]
    assert report["is_interval"]
    frame = pd.read_csv(out / "sumset.csv", comment="#")
    assert frame.to_numpy().tolist() == [[0.0, 2.0]]


def test_sumset_blowup_exits_1(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    text = 'sets = ["middle_thirds:6", "middle_thirds:6"]\ncap = 100\n'
    code, _ = _run(tmp_path, "sumset", text)
    assert code == 1
    assert "SumsetBlowupError" in capsys.readouterr().err


def test_outputs_are_byte_identical(tmp_path: Path) -> None:
    text = 'sets = ["middle_thirds:4", [[0, 0.2], [0.5, 1]]]\ncoarsen = 0.01\n'
    _, first = _run(tmp_path, "sumset", text, "first")
    _, second = _run(tmp_path, "sumset", text, "second")
    names = sorted(p.name for p in first.iterdir())
    assert names == ["run.json", "sumset.csv", "sumset.json"]
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_free_gaps_are_empty(tmp_path: Path) -> None:
    code, out = _run(tmp_path, "gaps", "alpha = golden\n" + QUICK_SCAN)
    assert code == 0
    gaps = pd.read_csv(out / "gaps.csv", comment="#")
    assert gaps.empty
    assert list(gaps.columns) == ["k", "E_minus", "E_plus", "length", "bound", "pass"]
    labels = pd.read_csv(out / "labels.csv", comment="#")
    assert list(labels.columns)[-3:] == ["rho", "residual", "uh"]
    assert not (out / "decay.csv").exists()
    summary = _json(out / "summary.json")
    assert summary["gaps"] == 0
    assert summary["all_passed"]
    assert summary["unconfirmed"] == []
    assert summary["hull"] == pytest.approx([-2.0, 2.0], abs=1e-3)
    assert summary["diameter_check"]["diameter"] == pytest.approx(4.0, abs=2e-3)


def test_free_interval(tmp_path: Path) -> None:
    text = 'problems = [{"alpha": "golden"}, {"alpha": "silver"}]\n' + QUICK_SCAN
    code, out = _run(tmp_path, "interval", text)
    assert code == 0
    report = _json(out / "interval.json")
    assert report["is_interval"]
    assert report["newhouse"]["passed"]
    assert len(report["sum"]) == 1
    assert report["sum"][0] == pytest.approx([-4.0, 4.0], abs=2e-3)


def test_free_duality_is_exact(tmp_path: Path) -> None:
    text = f"alpha = golden\ncoupling = 2.0\nenergy = {FREE_ENERGY!r}\n"
    code, out = _run(tmp_path, "duality", text)
    assert code == 0
    report = _json(out / "duality.json")
    assert report["eigenfunction"]["residual"] <= 1e-12
    assert report["eigenfunction"]["window"] == 0
    assert report["goodness"]["good"]
    u = pd.read_csv(out / "eigenfunction.csv", comment="#")
    assert list(u.columns) == ["n1", "re", "im"]
    assert u["n1"].tolist() == [0]
    assert u["re"].iloc[0] == pytest.approx(1.0, abs=1e-14)
    assert u["im"].iloc[0] == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize(
    ("edge_analysis", "expected"),
    [(False, ["planner", "gaps", "export"]), (True, ["planner", "gaps", "edges", "export"])],
)
def test_gaps_route(edge_analysis: bool, expected: list[str]) -> None:
    cfg = validate_config("gaps", {"alpha": "golden", "edge_analysis": edge_analysis})
    app = build_orchestrator("gaps")
    for agent in app.agents.values():
        agent.fn = None

    def scan(state: ExperimentState) -> ExperimentState:
        state.results["gaps"] = SimpleNamespace(gaps=[])
        return state

    app.agents["gaps"].fn = scan
    final = app.invoke(ExperimentState("gaps", cfg, "unused"))
    assert [step["to"] for step in final.notes["conversation_log"]] == expected
    assert final.notes["conversation_rounds"] == len(expected)


def test_orchestrator_routes() -> None:
    with pytest.raises(ConfigError):
        build_orchestrator("plot")
    app = build_orchestrator("thickness")
    assert app.start == "planner"
    assert app.agents["planner"].next_agent == "thickness"
    assert app.agents["thickness"].next_agent == "export"
    assert app.agents["export"].next_agent is None


def test_to_jsonable() -> None:
    payload = {
        "a": np.float64(np.inf),
        "b": [np.int64(3), np.nan, 1 + 2j],
        "c": np.array([[1.5, -np.inf]]),
        "d": np.bool_(True),
    }
    assert to_jsonable(payload) == {
        "a": "inf",
        "b": [3, "nan", [1.0, 2.0]],
        "c": [[1.5, "-inf"]],
        "d": True,
    }


def test_setup_logging_levels() -> None:
    setup_logging("DEBUG", capture_warnings=False)
    assert logging.getLogger().level == logging.DEBUG
    assert logging.getLogger("joblib").level == logging.WARNING
    setup_logging("error", capture_warnings=False)
    assert logging.getLogger().level == logging.ERROR
    assert logging.getLogger("joblib").level == logging.ERROR


def test_orchestrator_names_failing_agent() -> None:
    cfg = validate_config("sumset", {"sets": ["middle_thirds:2", "middle_thirds:2"]})
    app = build_orchestrator("sumset")

    def blowup(state: ExperimentState) -> ExperimentState:
        raise SumsetBlowupError("too many components")

    app.agents["sumset"].fn = blowup
    state = ExperimentState("sumset", cfg, "unused")
    with pytest.raises(SumsetBlowupError):
        app.invoke(state)
    assert state.notes["failed_agent"] == "sumset"
    assert [step["to"] for step in state.notes["conversation_log"]] == ["planner", "sumset"]
    assert state.notes["conversation_log"][1]["payload_keys"] == ["artifacts"]
