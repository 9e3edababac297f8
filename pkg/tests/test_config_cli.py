import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochdda import cli
from stochdda.config import AlgorithmSpec, ConfigError, ExperimentConfig, GraphSpec, NetworkSpec, ProblemSpec


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def smoke(tmp_path, **over):
    data = {
        "problem": {"family": "logistic", "n": 6, "m": 5, "samples_per_agent": 20, "mu": 0.05, "phi": 0.01},
        "network": {"kind": "gossip", "graph": {"type": "cycle"}},
        "algorithms": [{"name": "dda", "a_factor": 0.9}, "pg_extra", "p2d2", "dsm", "cdda"],
        "T": 10,
        "seed": 1,
        "out": str(tmp_path / "out"),
    }
    data.update(over)
    return data


# -- config -------------------------------------------------------------------------


def test_defaults_roundtrip():
    cfg = ExperimentConfig()
    assert ExperimentConfig.from_dict(json.loads(cfg.to_json())) == cfg


@given(
    st.sampled_from(["logistic", "quadratic"]), st.integers(2, 12), st.floats(0, 0.5),
    st.sampled_from(["gossip", "bernoulli", "time_invariant"]), st.integers(0, 2**32 - 1), st.integers(0, 5000),
    st.lists(st.sampled_from(["dda", "pg_extra", "p2d2", "dsm", "cdda"]), min_size=1, max_size=5),
)
def test_config_roundtrip_property(family, n, mu, kind, seed, T, algos):
    cfg = ExperimentConfig(
        problem=ProblemSpec(family=family, n=n, mu=mu, L=1.0),
        network=NetworkSpec(kind=kind, graph=GraphSpec(type="cycle")),
        algorithms=[AlgorithmSpec(name=a) for a in algos],
        seed=seed,
        T=T,
    )
    cfg.validate()
    again = ExperimentConfig.from_dict(json.loads(cfg.to_json()))
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()


@pytest.mark.parametrize("patch, where", [
    ({"problem": {"family": "poisson"}}, "problem.family"),
    ({"problem": {"n": 0}}, "problem.n"),
    ({"problem": {"colour": 1}}, "problem"),
    ({"network": {"kind": "ring"}}, "network.kind"),
    ({"network": {"graph": {"type": "grid"}}}, "network.graph"),
    ({"algorithms": [{"name": "admm"}]}, "algorithms[0].name"),
    ({"algorithms": [{"name": "dda", "a": -1}]}, "algorithms[0].a"),
    ({"algorithms": [{"name": "dda", "a": 60.0}]}, "algorithms[0].a"),
    ({"algorithms": [{"name": "p2d2", "alpha": 1.5}]}, "algorithms[0].alpha"),
    ({"T": "ten"}, "T"),
    ({"problem": {"family": "lasso"}, "algorithms": ["dsm"]}, "algorithms[0].name"),
])
def test_config_errors_name_the_field(patch, where):
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_dict(patch)
    assert e.value.path == where


def test_graph_file_resolved_relative_to_config(tmp_path):
    (tmp_path / "graphs").mkdir()
    (tmp_path / "graphs" / "ring.txt").write_text("# ring\n0 1\n1 2\n2 3\n3 0\n")
    path = write_config(tmp_path, {"problem": {"n": 4}, "network": {"graph": {"type": "file", "path": "graphs/ring.txt"}}})
    cfg = ExperimentConfig.load(path)
    assert cfg.build_graph().edge_list == [(0, 1), (0, 3), (1, 2), (2, 3)]


def test_fixed_matrix_file(tmp_path):
    np.savetxt(tmp_path / "P.csv", np.full((3, 3), 1 / 3), delimiter=",")
    cfg = ExperimentConfig.from_dict(
        {"problem": {"n": 3}, "network": {"kind": "time_invariant", "matrix_path": "P.csv"}}, base_dir=tmp_path
    )
    np.testing.assert_allclose(cfg.build_network().P, 1 / 3)


def test_problem_hash_tracks_problem_only(tmp_path):
    a = ExperimentConfig.from_dict(smoke(tmp_path))
    b = ExperimentConfig.from_dict(smoke(tmp_path, T=99))
    c = ExperimentConfig.from_dict(smoke(tmp_path, seed=2))
    assert a.problem_hash() == b.problem_hash() != c.problem_hash()
    assert a.config_hash() != b.config_hash()


# -- CLI ------------------------------------------------------------------------------


def test_run_writes_T_plus_one_rows_and_is_deterministic(tmp_path, capsys):
    path = write_config(tmp_path, smoke(tmp_path))
    assert cli.main(["run", "--config", str(path)]) == 0
    out = tmp_path / "out"
    first = {p.name: p.read_bytes() for p in out.glob("*.csv")}
    assert set(first) == {"dda.csv", "pg_extra.csv", "p2d2.csv", "dsm.csv", "cdda.csv"}
    for name, content in first.items():
        lines = content.decode().split("\n")
        assert lines[0] == ",".join(cli.CSV_COLUMNS)
        assert lines[-1] == "" and len(lines) - 2 == 11, name
        assert b"\r" not in content
    assert cli.main(["run", "--config", str(path)]) == 0
    assert {p.name: p.read_bytes() for p in out.glob("*.csv")} == first
    summary = json.loads((out / "summary.json").read_text())
    assert summary["algorithms"]["dda"]["status"] == "ok"
    assert "final_rse" in summary["algorithms"]["cdda"]
    assert summary["algorithms"]["dda"]["violations"]["lemma5"] == 0


def test_run_flag_overrides(tmp_path):
    path = write_config(tmp_path, smoke(tmp_path))
    out = tmp_path / "other"
    assert cli.main(["run", "--config", str(path), "--out", str(out), "--algos", "dda,cdda", "--T", "4", "--seed", "3"]) == 0
    assert sorted(p.name for p in out.glob("*.csv")) == ["cdda.csv", "dda.csv"]
    assert len((out / "dda.csv").read_text().splitlines()) == 6


def test_check_reports_feasible_cycle(tmp_path, capsys):
    path = write_config(tmp_path, smoke(tmp_path))
    assert cli.main(["check", "--config", str(path)]) == 0
    text = capsys.readouterr().out
    assert "cond16: True" in text and "a_grid:" in text
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert 0 < rep["beta"] < 1 and rep["abar"] > 0


def test_check_disconnected_graph_exit_code(tmp_path, capsys):
    (tmp_path / "g.txt").write_text("0 1\n2 3\n4 5\n")
    data = smoke(tmp_path)
    data["network"]["graph"] = {"type": "file", "path": "g.txt"}
    path = write_config(tmp_path, data)
    assert cli.main(["check", "--config", str(path)]) == cli.EXIT_PRECONDITION
    assert "beta" in capsys.readouterr().err


def test_check_complete_averaging_beta_zero(tmp_path):
    np.savetxt(tmp_path / "P.txt", np.full((6, 6), 1 / 6))
    data = smoke(tmp_path)
    data["network"] = {"kind": "time_invariant", "matrix_path": "P.txt"}
    path = write_config(tmp_path, data)
    assert cli.main(["check", "--config", str(path)]) == 0
    assert json.loads((tmp_path / "out" / "report.json").read_text())["beta"] == 0.0


def test_config_error_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, {"problem": {"family": "poisson"}})
    assert cli.main(["run", "--config", str(path)]) == cli.EXIT_CONFIG
    assert "problem.family" in capsys.readouterr().err
    (tmp_path / "bad.json").write_text("{not json")
    assert cli.main(["run", "--config", str(tmp_path / "bad.json")]) == cli.EXIT_CONFIG


def test_reference_cache_and_tolerance(tmp_path, capsys):
    data = smoke(tmp_path)
    path = write_config(tmp_path, data)
    assert cli.main(["reference", "--config", str(path)]) == 0
    first = (tmp_path / "out" / "reference.json").read_text()
    assert "computed" in capsys.readouterr().out
    assert cli.main(["reference", "--config", str(path)]) == 0
    assert "cache hit" in capsys.readouterr().out
    assert (tmp_path / "out" / "reference.json").read_text() == first
    data["reference"] = {"tol": 1e-6}
    path = write_config(tmp_path, data, "loose.json")
    assert cli.main(["reference", "--config", str(path)]) == 0
    loose = json.loads((tmp_path / "out" / "reference.json").read_text())
    tight = json.loads(first)
    assert loose["iterations"] < tight["iterations"] and loose["residual"] > tight["residual"]


def test_reference_quadratic_matches_closed_form(tmp_path):
    data = smoke(tmp_path, problem={"family": "quadratic", "n": 3, "m": 4, "mu": 0.2, "L": 1.0})
    path = write_config(tmp_path, data)
    assert cli.main(["reference", "--config", str(path)]) == 0
    x = np.array(json.loads((tmp_path / "out" / "reference.json").read_text())["x_star"])
    inst = ExperimentConfig.load(path).build_problem()
    H = sum(C.T @ C for C in inst.features)
    rhs = sum(C.T @ b for C, b in zip(inst.features, inst.targets))
    np.testing.assert_allclose(x, np.linalg.solve(H, rhs), atol=1e-10)


def test_sweep_writes_grid(tmp_path):
    path = write_config(tmp_path, smoke(tmp_path))
    assert cli.main(["sweep", "--config", str(path), "--factors", "0.1,0.5", "--T", "5"]) == 0
    rows = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("a_factor,a,final_rse") and len(rows) == 3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_run_records_partial_failure(tmp_path):
    data = smoke(tmp_path, algorithms=[{"name": "pg_extra", "a": 1e3}, "cdda"], T=400)
    path = write_config(tmp_path, data)
    code = cli.main(["run", "--config", str(path)])
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["algorithms"]["cdda"]["status"] == "ok"
    assert summary["algorithms"]["pg_extra"]["status"] == "failed"
    assert code == cli.EXIT_NUMERICAL


def test_example_configs_parse():
    from pathlib import Path

    for p in sorted((Path(__file__).parent.parent / "scripts" / "configs").glob("*.json")):
        ExperimentConfig.load(p)
