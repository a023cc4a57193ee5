import json

import pytest

from gwlab.cli import EXIT_OK, EXIT_STAT, EXIT_USAGE, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bounds_717(capsys):
    code, out, _ = run(capsys, "bounds", "--beta", "717")
    assert code == EXIT_OK
    row = [l for l in out.splitlines() if ",C_paper," in l][0]
    assert float(row.split(",")[3]) < 1
    assert "paper/beta_star" in out and "direct/beta_star" in out


def test_bounds_d2(capsys):
    code, out, _ = run(capsys, "bounds", "--beta", "2", "--d", "2", "--format", "json")
    assert code == EXIT_OK
    body = json.loads(out)
    rows = {r["name"]: r["value"] for r in body["results"]["beta=2.0"]}
    assert rows["p_inf"] == pytest.approx(0.8 * 0.6)
    assert rows["divergent"] == 1  # 27/(4*5) > 1
    code, out, _ = run(capsys, "bounds", "--beta", "1.0", "--d", "2", "--format", "json")
    rows = {r["name"]: r["value"] for r in json.loads(out)["results"]["beta=1.0"]}
    assert rows["p_inf"] == pytest.approx(2 / 9)


def test_bounds_grid_flags_divergence(capsys):
    code, out, _ = run(capsys, "bounds", "--beta-grid", "2", "1000", "4")
    assert code == EXIT_OK
    assert out.count(",divergent,1,") == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["bounds", "--beta", "1.0"],
        ["bounds"],
        ["simulate", "--beta", "3", "--steps", "10"],
        ["simulate", "--beta", "3", "--dist", "0:1"],
        ["simulate", "--beta", "3", "--dist", "const:1", "--d", "2"],
        ["enumerate", "--max-len", "21"],
        ["nosuch"],
        ["rate", "--beta", "100", "--eps", "0"],
    ],
)
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_simulate_and_outputs(tmp_path, capsys):
    prefix = tmp_path / "ray"
    args = ["simulate", "--dist", "const:1", "--beta", "3", "--steps", "200000",
            "--replicas", "2", "--seed", "7", "--out", str(prefix)]
    code, out, _ = run(capsys, *args)
    assert code == EXIT_OK
    first = (prefix.with_suffix(".csv").read_bytes(), prefix.with_suffix(".json").read_bytes())
    assert out.encode() == first[0]
    body = json.loads(first[1])
    assert body["config"]["seed"] == 7 and body["seeds"] == [[7, 0], [7, 1]]
    assert "elapsed_s" in json.loads(prefix.with_suffix(".timing.json").read_text())
    run(capsys, *args)
    assert first == (prefix.with_suffix(".csv").read_bytes(), prefix.with_suffix(".json").read_bytes())


def test_enumerate_strict(capsys):
    code, out, _ = run(capsys, "enumerate", "--max-len", "16", "--mode", "strict")
    assert code == EXIT_OK
    assert "max_tau_by_B,B=1,5," in out
    assert "exceptions_4k+1,0," in out


def test_statistical_failure_exit_code(capsys):
    # eps = 0 gives a zero gap, so positivity cannot be established
    code, _, err = run(capsys, "monotonicity", "--beta", "5", "--eps", "0", "--segments", "2000",
                       "--steps", "20000")
    assert code == EXIT_STAT
    assert "FAILED gap/" in err


def test_lemmas_small(capsys):
    code, out, _ = run(capsys, "lemmas", "--beta", "10", "--eps", "1", "--dist", "const:2",
                       "--segments", "50000", "--trials", "20000", "--steps", "100000", "--seed", "1")
    assert code == EXIT_OK
    assert "window_3k+1/segments" in out and ",info" in out
