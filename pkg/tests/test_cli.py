import json

from toralspec.cli import main, run


def strip_time(report):
    return {k: v for k, v in report.items() if k != "wall_time"}


def test_periodic_points_command():
    code, rep = run(["periodic-points", "--matrix", "2,1;1,1", "--n", "2"])
    assert code == 0
    assert rep["results"]["count"] == 5
    assert rep["checks"][0]["passed"]


def test_newton_command():
    code, rep = run(["newton", "--poly", "1,-3,1", "--p", "2"])
    assert code == 0
    assert all(s == "0" for s, _ in rep["results"]["slopes"])


def test_product_formula_command():
    code, rep = run(["product-formula", "--poly=-1/2,-3/2,1"])
    assert code == 0 and rep["results"]["ell"] == 2


def test_subshift_command(tmp_path):
    code, rep = run(["subshift", "--maxpow2", "10", "--maxpow3", "7", "--L", "6", "--out", str(tmp_path)])
    assert code == 0
    assert rep["results"]["product_min_distance"] >= rep["results"]["delta0"] > 0
    assert (tmp_path / "factor_curves.csv").read_text().startswith("p,n,distance")


def test_same_seed_same_json():
    argv = ["close-orbit", "--n", "30", "--eps", "0.1", "--seed", "3"]
    a = strip_time(run(argv)[1])
    b = strip_time(run(argv)[1])
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_trace_spec_command(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("M=12\n0,0 ; 0 ; 5\n1/2,1/2 ; 17 ; 22\n", encoding="utf-8")
    code, rep = run(["trace-spec", "--spec", str(spec), "--eps", "0.1"])
    assert code == 0
    code, rep = run(["trace-spec", "--spec", str(spec), "--eps", "0.1", "--n", "40"])
    assert code == 0


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# experiment\nn = 3\nmatrix = 2,1;1,1\n", encoding="utf-8")
    code, rep = run(["periodic-points", "--config", str(cfg)])
    assert code == 0 and rep["results"]["count"] == 16
    code, rep = run(["periodic-points", "--config", str(cfg), "--n", "2"])
    assert rep["results"]["count"] == 5


def test_input_errors_exit_2(capsys):
    assert run(["no-such-command"])[0] == 2
    code, rep = run(["periodic-points", "--matrix", "1,1;1,1"])
    assert code == 2 and rep["error"]["type"]
    code, rep = run(["periodic-points", "--matrix", "1,1;0,1", "--n", "2"])
    assert code == 2 and rep["error"]["type"] == "InfinitePeriodicSetError"
    assert run(["trace-spec"])[0] == 2


def test_check_failure_exit_1():
    code, rep = run(["close-orbit", "--point", "307829/1000000,40973/1000000", "--n", "20", "--eps", "0.05"])
    assert code == 1 and rep["error"]["type"] == "ClosingFailedError"


def test_main_prints_json(capsys):
    assert main(["bounded-below", "--poly", "1,-3,1", "--horizon", "20"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["results"]["max_gap"] == 1
