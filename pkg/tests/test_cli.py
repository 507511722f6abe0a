import json
import subprocess
import sys

import numpy as np
import pytest

from qmc import cli
from qmc.channels import depolarizing_channel, measurement_channel, unitary_channel
from qmc.generators import ghz_state, ginibre_state, haar_unitary, product_state


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(path, obj):
    path.write_text(cli.dumps(obj))
    return path


def test_state_round_trip(rng):
    rho = ginibre_state(rng, [2, 3], ["X", "Y"])
    back = cli.state_from_json(json.loads(cli.dumps(cli.state_to_json(rho))), 1e-9)
    assert back.labels == ("X", "Y") and np.abs(back.matrix - rho.matrix).max() == 0


def test_channel_round_trip(rng):
    ch = unitary_channel(haar_unitary(rng, 3))
    back = cli.channel_from_json(json.loads(cli.dumps(cli.channel_to_json(ch))))
    assert np.abs(back.kraus[0] - ch.kraus[0]).max() == 0


def test_info_ghz_and_product(tmp_path, capsys, rng):
    g = write(tmp_path / "g.json", cli.state_to_json(ghz_state()))
    code, out, _ = run(capsys, "info", g)
    rep = json.loads(out)
    assert code == 0 and abs(rep["results"]["cmi"] - 1) < 1e-9
    assert rep["command"] == "info" and rep["tolerances"]["tol"] == 1e-9 and len(rep["inputs"][0]) == 64
    p = write(tmp_path / "p.json", cli.state_to_json(product_state(rng, [2, 2, 2])))
    code, out, _ = run(capsys, "info", p)
    assert abs(json.loads(out)["results"]["cmi"]) < 1e-10


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, out, err = run(capsys, "info", bad)
    assert code == 2 and out == "" and "malformed" in err
    code, _, _ = run(capsys, "info", tmp_path / "missing.json")
    assert code == 2
    code, _, _ = run(capsys, "frobnicate")
    assert code == 2
    neg = write(tmp_path / "neg.json", {"dims": [2], "matrix": [[[1.5, 0], [0, 0]], [[0, 0], [-0.5, 0]]]})
    code, _, err = run(capsys, "info", neg)
    assert code == 3 and "semidefinite" in err
    mismatch = write(tmp_path / "mm.json", {"dims": [3], "matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]})
    assert run(capsys, "info", mismatch)[0] == 3
    huge = write(tmp_path / "huge.json", {"dims": [16, 16, 17], "matrix": []})
    code, _, err = run(capsys, "info", huge)
    assert code == 3 and "4096" in err


def test_gen_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["gen", "markov", "--blocks", "2x1,1x2", "--q", "0.3,0.7", "--seed", "7"]
    assert run(capsys, *args, "--output", a)[0] == 0
    assert run(capsys, *args, "--output", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    code, out, _ = run(capsys, "decompose", a)
    res = json.loads(out)["results"]
    assert code == 0 and sorted(map(tuple, res["block_dims"])) == [(1, 2), (2, 1)]
    assert sorted(res["q"]) == pytest.approx([0.3, 0.7], abs=1e-8)
    # decomposition factors are themselves valid state files
    blk = res["decomposition"]["blocks"][0]
    cli.state_from_json(blk["rho_AbL"], 1e-9)
    # byte-identical reports on repeat
    assert run(capsys, "decompose", a)[1] == out


def test_gen_kinds(tmp_path, capsys):
    for kind, extra in (("ginibre", ["--dims", "2,3"]), ("classical-chain", ["--dims", "2,2,3"]),
                        ("ghz", ["--d", "3"])):
        code, out, _ = run(capsys, "gen", kind, *extra)
        assert code == 0
        cli.state_from_json(json.loads(out), 1e-9)
    code, out, _ = run(capsys, "gen", "cq-ensemble", "--d", "3", "--n", "4", "--commuting")
    ens = cli.ensemble_from_json(json.loads(out), 1e-9)
    assert len(ens.states) == 4
    assert run(capsys, "gen", "markov", "--blocks", "2x1", "--q", "0.5,0.5")[0] == 3
    assert run(capsys, "gen", "markov", "--blocks", "2by1")[0] == 3


def test_decompose_ghz_and_chain(tmp_path, capsys):
    g = write(tmp_path / "g.json", cli.state_to_json(ghz_state()))
    code, out, _ = run(capsys, "decompose", g)
    res = json.loads(out)["results"]
    assert code == 1 and not res["passed"] and abs(res["cmi"] - 1) < 1e-9
    c = tmp_path / "c.json"
    run(capsys, "gen", "classical-chain", "--dims", "2,3,2", "--output", c)
    code, out, _ = run(capsys, "decompose", c)
    assert code == 0 and json.loads(out)["results"]["block_dims"] == [[1, 1]] * 3


def test_recover(tmp_path, capsys, rng):
    m = tmp_path / "m.json"
    run(capsys, "gen", "markov", "--output", m)
    g = write(tmp_path / "g.json", cli.state_to_json(ghz_state()))
    p = write(tmp_path / "p.json", cli.state_to_json(product_state(rng, [2, 2, 2])))
    code, out, _ = run(capsys, "recover", m, g, p, "--jobs", "2")
    reps = json.loads(out)
    assert code == 1 and len(reps) == 3
    assert reps[0]["results"]["recovery_residual"] < 1e-8
    assert reps[1]["results"]["recovery_residual"] > 0.1
    assert reps[2]["results"]["recovery_residual"] < 1e-10
    assert reps[2]["results"]["kraus_rank"] >= 1


def test_qec_and_holevo(tmp_path, capsys, rng):
    sigma = write(tmp_path / "s.json", cli.state_to_json(ginibre_state(rng, [2])))
    u = write(tmp_path / "u.json", cli.channel_to_json(unitary_channel(haar_unitary(rng, 2))))
    dep = write(tmp_path / "d.json", cli.channel_to_json(depolarizing_channel(2)))
    code, out, _ = run(capsys, "qec", sigma, u)
    assert code == 0 and json.loads(out)["results"]["recoverable"]
    code, out, _ = run(capsys, "qec", sigma, dep)
    res = json.loads(out)["results"]
    assert code == 1 and abs(res["gap"] - 2 * res["entropy"]) < 1e-9

    e = tmp_path / "e.json"
    run(capsys, "gen", "cq-ensemble", "--d", "3", "--n", "3", "--commuting", "--output", e)
    basis = cli.decode_matrix(json.loads(e.read_text())["eigenbasis"])
    meas = write(tmp_path / "meas.json", cli.channel_to_json(measurement_channel(basis)))
    code, out, _ = run(capsys, "holevo", e, meas)
    res = json.loads(out)["results"]
    assert code == 0 and res["saturated"] and res["commuting"]


def test_pretty(tmp_path, capsys):
    g = write(tmp_path / "g.json", cli.state_to_json(ghz_state()))
    code, out, _ = run(capsys, "info", g, "--pretty")
    assert code == 0 and "cmi: 1" in out and "matrix" not in out


def test_console_script_stdin():
    state = cli.dumps(cli.state_to_json(ghz_state()))
    proc = subprocess.run([sys.executable, "-m", "qmc.cli", "info"], input=state,
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and abs(json.loads(proc.stdout)["results"]["cmi"] - 1) < 1e-9
