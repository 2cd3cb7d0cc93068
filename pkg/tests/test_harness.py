import csv
import io
import json

import numpy as np
import pytest

from flexvrp import cli
from flexvrp.errors import ConfigError, ParseError
from flexvrp.harness import (
    CSV_COLUMNS, format_coords, make_inconvenience, parse_config_text,
    parse_coords, parse_coords_text, run_experiment, sample_instance, synthetic_map, to_csv,
)
from flexvrp.model import TABLE1, CostParams, Instance, Node, validate_instance

from conftest import tri_node


# coordinates ---------------------------------------------------------------------

def test_parse_two_nodes():
    nodes = parse_coords_text("0 1.5 2.0\n1 3.0 4.0")
    assert [(n.id, n.x, n.y) for n in nodes] == [(0, 1.5, 2.0), (1, 3.0, 4.0)]


def test_parse_comments_and_blank_lines():
    assert len(parse_coords_text("# header\n\n0 1 2  # depot\n")) == 1


@pytest.mark.parametrize("text, line", [
    ("x y", 1),
    ("0 1 2\n1 1", 2),
    ("0 1 2\n0 3 4", 2),
    ("0 1 2\n\n2 nan 1", 3),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_coords_text(text)
    assert info.value.line == line


def test_thousand_node_file_round_trip(tmp_path):
    nodes = synthetic_map(1000, 0)
    path = tmp_path / "map.txt"
    path.write_text(format_coords(nodes))
    back = parse_coords(path)
    assert len(back) == 1000
    np.testing.assert_allclose([(n.x, n.y) for n in back], [(n.x, n.y) for n in nodes], atol=1e-6)


# sampling ------------------------------------------------------------------------

def test_sampling_is_deterministic():
    nodes = synthetic_map(200, 3)
    a = sample_instance(nodes, 6, 2, seed=11)
    b = sample_instance(nodes, 6, 2, seed=11)
    assert a.to_dict() == b.to_dict()
    assert sample_instance(nodes, 6, 2, seed=12).to_dict() != a.to_dict()


def test_sampling_shape_and_windows():
    inst = sample_instance(synthetic_map(), 20, 5, seed=0)
    assert len(inst.customers) == 20 and inst.vehicles == 5
    T = inst.travel_time
    horizon = 1.5 * max(T[0, j] + T[j, 1] for j in inst.customers)
    for j in inst.customers:
        assert T[0, j] - 1e-12 <= inst.tau[j] <= horizon + 1e-12
    assert inst.nodes[0].x == inst.nodes[1].x and inst.nodes[0].y == inst.nodes[1].y
    fn = inst.inconvenience[2]
    assert fn.segments == ((TABLE1["gamma"], TABLE1["chi"][0]), (-TABLE1["gamma"], TABLE1["chi"][1]))


def test_sampling_gamma_override():
    inst = sample_instance(synthetic_map(50, 1), 3, 1, seed=0, inconvenience=make_inconvenience(gamma=5.0))
    assert all(f.slopes.tolist() == [5.0, -5.0] for f in inst.inconvenience.values())


def test_sampling_too_few_nodes():
    with pytest.raises(ConfigError):
        sample_instance(synthetic_map(5, 0), 5, 1, seed=0)


# configuration ---------------------------------------------------------------------

def test_config_parsing():
    cfg = parse_config_text(
        "customers = 4\nvehicles=1\nrepetitions=2\nmethods = monolithic, oracle\n"
        "sweep = delta_bar\nvalues = 0.5, 1.0\ngamma = 5\ncharge_idle = false\nq_max = none\n")
    assert (cfg.customers, cfg.vehicles, cfg.repetitions) == (4, 1, 2)
    assert cfg.methods == ["monolithic", "oracle"]
    assert cfg.values == [0.5, 1.0]
    assert (cfg.gamma1, cfg.gamma2) == (5.0, -5.0)
    assert cfg.charge_idle is False and cfg.q_max is None
    assert cfg.inconvenience(1.0).delta_bar == 1.0


@pytest.mark.parametrize("text", [
    "repetitions = 0",
    "sweep = gamma",
    "sweep = speed\nvalues = 1",
    "methods = magic",
    "nonsense = 1",
    "customers = many",
    "no equals sign",
])
def test_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


# experiments -----------------------------------------------------------------------

TINY = "customers = 3\nvehicles = 1\nrepetitions = 2\nmethods = monolithic, oracle, vrp\nmap_size = 60\n"


def test_experiment_rows_and_csv_schema():
    rows = run_experiment(parse_config_text(TINY))
    runs = [r for r in rows if r["row_type"] == "run"]
    means = [r for r in rows if r["row_type"] == "mean"]
    assert len(runs) == 6 and len(means) == 3
    assert all(r["status"] == "ok" for r in runs)
    for seed in (0, 1):
        objs = {r["method"]: r["objective"] for r in runs if r["seed"] == seed}
        assert objs["monolithic"] == pytest.approx(objs["oracle"], abs=1e-6)
        assert objs["monolithic"] <= objs["vrp"] + 1e-9
    text = to_csv(rows)
    reader = csv.reader(io.StringIO(text))
    assert tuple(next(reader)) == CSV_COLUMNS
    assert sum(1 for _ in reader) == len(rows)


def test_experiment_reproducible_apart_from_timing():
    cfg = parse_config_text(TINY + "sweep = gamma\nvalues = 0.05, 5\n")
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_seconds"} for r in rows]  # noqa: E731
    assert strip(run_experiment(cfg)) == strip(run_experiment(cfg))


def test_experiment_records_failures_and_continues():
    rows = run_experiment(parse_config_text(
        "customers = 4\nvehicles = 2\nmethods = gbd, vrp\nmax_iters = 1\nliteral_master = true\n"
        "map_size = 60\n"))
    status = {r["method"]: r["status"] for r in rows if r["row_type"] == "run"}
    assert status == {"gbd": "limit", "vrp": "ok"}


# CLI -------------------------------------------------------------------------------

def test_cli_end_to_end(tmp_path, capsys):
    coords = tmp_path / "map.txt"
    inst_path = tmp_path / "inst.json"
    cuts = tmp_path / "cuts.txt"
    model = tmp_path / "model.lp"
    assert cli.main(["map", "--out", str(coords), "--count", "40"]) == cli.EXIT_OK
    assert cli.main(["gen", "--nodes", str(coords), "--customers", "3", "--vehicles", "1",
                     "--seed", "4", "--out", str(inst_path)]) == cli.EXIT_OK
    assert len(Instance.load(inst_path).customers) == 3
    capsys.readouterr()
    assert cli.main(["solve", "--instance", str(inst_path), "--method", "bdd",
                     "--dump-cuts", str(cuts), "--dump-model", str(model)]) == cli.EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["method"] == "bdd"
    dumped = model.read_text()
    assert dumped.startswith("\\ P2\nMinimize") and "x_0_1_0" in dumped
    assert cuts.exists()
    assert cli.main(["compare", "--instance", str(inst_path),
                     "--methods", "monolithic,oracle"]) == cli.EXIT_OK
    both = json.loads(capsys.readouterr().out)
    assert both["monolithic"]["objective"] == pytest.approx(both["oracle"]["objective"], abs=1e-6)


def test_cli_sweep_writes_csv(tmp_path):
    cfg = tmp_path / "exp.cfg"
    out = tmp_path / "out.csv"
    cfg.write_text(TINY)
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out)]) == cli.EXIT_OK
    assert out.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_cli_exit_codes(tmp_path):
    inst_path = tmp_path / "tri.json"
    tri_node().save(inst_path)
    assert cli.main(["solve", "--instance", str(inst_path), "--method", "gbd", "--max-iters", "1",
                     "--literal-master"]) == cli.EXIT_LIMIT
    assert cli.main(["solve", "--instance", str(tmp_path / "missing.json")]) == cli.EXIT_INPUT
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1 2\nbroken\n")
    assert cli.main(["gen", "--nodes", str(bad), "--customers", "1", "--vehicles", "1",
                     "--out", str(tmp_path / "x.json")]) == cli.EXIT_INPUT
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("repetitions = 0\n")
    assert cli.main(["sweep", "--config", str(cfg)]) == cli.EXIT_INPUT
    with pytest.raises(SystemExit) as info:
        cli.main(["solve"])
    assert info.value.code == cli.EXIT_INPUT


def test_cli_oracle_too_large(tmp_path):
    inst = sample_instance(synthetic_map(60, 0), 9, 1, seed=0, params=CostParams())
    path = tmp_path / "big.json"
    inst.save(path)
    assert cli.main(["solve", "--instance", str(path), "--method", "oracle"]) == cli.EXIT_INPUT


def test_sampling_avoids_coincident_points():
    # nine copies of one point plus two distinct ones: every sample must pick distinct points
    nodes = [Node(i, 0.0, 0.0) for i in range(9)] + [Node(9, 1.0, 0.0), Node(10, 0.0, 1.0)]
    for seed in range(20):
        inst = sample_instance(nodes, 2, 1, seed)
        assert validate_instance(inst) == []
    with pytest.raises(ConfigError):
        sample_instance(nodes, 3, 1, seed=0)
