import json

import pytest

from dhap import serialize as ser
from dhap.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, main
from dhap.functions import CoefficientMap, DyadicFunction


def run(argv):
    return main([str(a) for a in argv])


def gen(tmp_path, kind, M, seed=0):
    out = tmp_path / f"{kind}-{M}-{seed}.json"
    assert run(["gen", "--kind", kind, "--m", M, "--seed", seed, "-o", out]) == EXIT_OK
    return out


def test_gen_is_deterministic(tmp_path):
    a = gen(tmp_path, "kernel", 3, 4).read_bytes()
    b = tmp_path / "again.json"
    run(["gen", "--kind", "kernel", "--m", 3, "--seed", 4, "-o", b])
    assert a == b.read_bytes()


def test_gen_rejects_bad_m(tmp_path):
    assert run(["gen", "--kind", "function", "--m", 0, "-o", tmp_path / "x.json"]) == EXIT_INPUT


def test_decompose_zero_weights(tmp_path):
    M = 2
    inp = tmp_path / "zero.json"
    inp.write_text(ser.dumps(ser.to_json(CoefficientMap(M))))
    out = tmp_path / "dec.json"
    assert run(["decompose", "--kind", "tree_slice", "--input", inp, "--delta", 1, "-o", out]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert len(doc["trees"]) == 1
    assert len(doc["trees"][0]["tiles"]) == 2 ** (2 * M + 1) - 1
    assert doc["exceptional"] == []
    assert json.loads(out.with_suffix(".measured.json").read_text()) == doc["measured"]


@pytest.mark.parametrize("kind,source", [
    ("tree_slice", "carleson_weights"), ("tree_select", "carleson_weights"),
    ("mean_select", "function"), ("atoms", "mean_zero_function"),
])
def test_decompose_then_render(tmp_path, kind, source):
    inp = gen(tmp_path, source, 3)
    out = tmp_path / f"{kind}.json"
    args = ["decompose", "--kind", kind, "--input", inp, "-o", out]
    if kind == "tree_slice":
        args += ["--algorithm", "heavy-light"]
    assert run(args) == EXIT_OK
    first = out.read_bytes()
    assert run(args) == EXIT_OK and out.read_bytes() == first
    svg = tmp_path / f"{kind}.svg"
    assert run(["render", "--input", out, "-o", svg]) == EXIT_OK
    assert svg.read_text().lstrip().startswith("<?xml")
    svg2 = tmp_path / f"{kind}-2.svg"
    run(["render", "--input", out, "-o", svg2])
    assert svg.read_bytes() == svg2.read_bytes()


def test_decompose_single_haar_atom(tmp_path):
    M = 2
    f = DyadicFunction(M, [0] * 4 + [1] * 2 + [-1] * 2 + [0] * 8)
    inp = tmp_path / "haar.json"
    inp.write_text(ser.dumps(ser.to_json(f)))
    out = tmp_path / "atoms.json"
    assert run(["decompose", "--kind", "atoms", "--input", inp, "-o", out]) == EXIT_OK
    assert len(json.loads(out.read_text())["atoms"]) == 1


def test_render_empty_tileset(tmp_path):
    inp = tmp_path / "empty.json"
    inp.write_text(json.dumps({"M": 2, "tiles": []}))
    out = tmp_path / "empty.svg"
    assert run(["render", "--input", inp, "-o", out, "--half-plane"]) == EXIT_OK
    assert "<svg" in out.read_text()


def test_paraproduct_ops(tmp_path):
    f = gen(tmp_path, "mean_zero_function", 3, 1)
    g = gen(tmp_path, "mean_zero_function", 3, 2)
    h = gen(tmp_path, "mean_zero_function", 3, 3)
    out = tmp_path / "r.json"
    assert run(["paraproduct", "--op", "identity", "--f", f, "--g", g, "-o", out]) == EXIT_OK
    assert json.loads(out.read_text())["residual"] <= 1e-9
    assert run(["paraproduct", "--op", "permute", "--f", f, "--g", g, "--h", h, "-o", out]) == EXIT_OK
    assert json.loads(out.read_text())["discrepancy"] <= 1e-9
    for op in ("hl", "lh", "hh"):
        assert run(["paraproduct", "--op", op, "--f", f, "--g", g, "-o", out]) == EXIT_OK
        assert isinstance(ser.load_any(json.loads(out.read_text())), DyadicFunction)
    assert run(["paraproduct", "--op", "report", "--m", 3, "--trials", 3, "-o", out]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["trials"] == 3 and len(doc["per_trial"]) == 3


def test_input_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(["render", "--input", bad]) == EXIT_INPUT
    assert run(["render", "--input", tmp_path / "missing.json"]) == EXIT_INPUT
    f = gen(tmp_path, "function", 2)
    assert run(["decompose", "--kind", "tree_slice", "--input", f]) == EXIT_INPUT
    assert run(["paraproduct", "--op", "identity", "--f", f]) == EXIT_INPUT
    assert "dhap:" in capsys.readouterr().err


def test_hypothesis_failure_exits_1(tmp_path):
    a = gen(tmp_path, "carleson_weights", 2)
    # a size bound below the measured maximal size breaks the precondition
    code = run(["decompose", "--kind", "tree_slice", "--input", a, "--delta", 1, "--c0", 0.1])
    assert code == EXIT_FAIL


def test_verify_and_tolerance_env(tmp_path, monkeypatch, capsys):
    out = tmp_path / "rep"
    assert run(["verify", "--suite", "core", "--m", 2, "--out", out, "--quiet"]) == EXIT_OK
    assert json.loads((out / "report.json").read_text())["config"]["tau_rel"] == 1e-9
    monkeypatch.setenv("DHAP_TOL", "1e-6")
    assert run(["verify", "--suite", "core", "--m", 2, "--out", out]) == EXIT_OK
    assert json.loads((out / "report.json").read_text())["config"]["tau_rel"] == 1e-6
    monkeypatch.setenv("DHAP_TOL", "loose")
    assert run(["verify", "--suite", "core", "--m", 2, "--out", out]) == EXIT_INPUT
    monkeypatch.delenv("DHAP_TOL")
    assert run(["verify", "--suite", "core", "--m", 2, "--trials", 0, "--out", out]) == EXIT_INPUT
    capsys.readouterr()


def test_unknown_subcommand_exits_usage():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
