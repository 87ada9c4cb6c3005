import json
import math

import pytest

from laminate_orbits import cli, model, persist

from test_continuation import small_orbit


def run(tmp_path, *args):
    return cli.main(["--out", str(tmp_path), *args])


def test_singular_writes_period(tmp_path):
    assert run(tmp_path, "singular", "--mu", "0") == 0
    data = json.loads((tmp_path / "singular.json").read_text())
    assert data["T0"] == pytest.approx(2.2592, abs=1e-4)
    assert data["config_hash"]
    head = (tmp_path / "singular.csv").read_text().splitlines()[:3]
    assert head[0].startswith("# config_hash=")
    assert head[1].startswith("# version=")


def test_singular_jump_points(tmp_path):
    assert run(tmp_path, "singular", "--mu", "0.041") == 0
    data = json.loads((tmp_path / "singular.json").read_text())
    assert data["u_jump"] == pytest.approx(math.sqrt(2 * 0.041 + 0.25), abs=1e-12)


def test_singular_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(a, "singular", "--mu", "-0.05")
    run(b, "singular", "--mu", "-0.05")
    for name in ("singular.json", "singular.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.parametrize(
    "args",
    [
        ["singular", "--mu", "-0.2"],
        ["singular"],
        ["continue", "--from", "missing.json", "--param", "mu", "--to", "0.0"],
        ["continue", "--param", "eps", "--to", "0.5"],
        ["scaling", "--grid", ""],
        ["folds", "--grid", ""],
        ["seed", "--eps", "0.5"],
    ],
)
def test_input_errors_exit_2(tmp_path, args):
    assert run(tmp_path, *args) == cli.EXIT_INPUT


def test_seed_below_homotopy_range_exits_3(tmp_path, capsys):
    assert run(tmp_path, "seed", "--eps", "1e-6") == cli.EXIT_SEED
    assert "continue --param eps" in capsys.readouterr().err


def test_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mu": 0.0}))
    assert run(tmp_path, "--config", str(cfg), "singular") == 0
    assert run(tmp_path, "--config", str(tmp_path / "nope.json"), "singular") == cli.EXIT_INPUT


def test_parse_grid():
    g = cli.parse_grid("1e-6:1e-3:2")
    assert len(g) == 7
    assert g[0] == pytest.approx(1e-6) and g[-1] == pytest.approx(1e-3)
    assert cli.parse_grid("0.1, 0.01") == [0.1, 0.01]
    with pytest.raises(cli.UsageError):
        cli.parse_grid("1:2")


def test_continue_from_file(tmp_path):
    orb = small_orbit(N=20)
    src = tmp_path / "start.json"
    persist.save_orbit(src, orb)
    out = tmp_path / "run"
    to = orb.params.mu * 2
    assert run(out, "continue", "--from", str(src), "--param", "mu", "--to", repr(to), "--ds-max", "0.02") == 0
    br = json.loads((out / "branch.json").read_text())
    assert br["meta"]["reason"] == "target reached"
    rows = persist.read_csv(out / "branch.csv")
    assert list(rows[0]) == list(persist.BRANCH_COLUMNS)
    assert float(rows[-1]["mu"]) == pytest.approx(to, abs=1e-14)
    last = persist.load_orbit(out / "last_orbit.json")
    assert abs(model.hamiltonian(last.states[0]) - to) <= 1e-8


def test_presets_resolve():
    assert cli._number("mu_l") == -0.12489619925
    assert cli._number("mu_c") == 1.5378905702e-5
    assert cli._number("mu_r") == 0.04100005066
