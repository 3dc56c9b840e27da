import json

import pytest

from dhap.errors import ConfigInvalid
from dhap.suites import SUITES, RunConfig, SuiteReport, run_suite, write_report


@pytest.mark.parametrize("name", SUITES)
def test_each_suite_passes_small(name):
    report = run_suite(name, RunConfig(M=3, trials=3, seed=5))
    assert report.checks
    assert report.passed, [(c.name, c.seed, c.detail) for c in report.failures]
    assert all(c.name.startswith(name + ".") for c in report.checks)


def test_core_exhaustive_at_m3():
    report = run_suite("core", RunConfig(M=3, trials=1))
    names = {c.name for c in report.checks}
    assert {"core.order_matches_containment", "core.nesting", "core.order_transitive"} <= names
    assert report.passed


def test_tb_zero_kernel_fixture():
    report = run_suite("tb", RunConfig(M=2, trials=2))
    check = next(c for c in report.checks if c.name == "tb.zero_kernel_certificates")
    assert check.passed and check.value == 0.0


def test_paraproduct_identity_residual_reported():
    report = run_suite("paraproduct", RunConfig(M=4, trials=5))
    assert report.passed
    assert any("identity" in k or "product" in k for k in report.constants)


@pytest.mark.parametrize("kwargs", [
    {"trials": 0}, {"M": 0}, {"M": 13}, {"tau_rel": 0.0}, {"tau_abs": -1.0},
    {"seed": -1}, {"seed": 2**64}, {"c_acc": 0.0},
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigInvalid):
        RunConfig(**kwargs)


def test_unknown_suite():
    with pytest.raises(ConfigInvalid):
        run_suite("nonsense", RunConfig(M=2))


def test_failures_are_named_with_seed():
    report = SuiteReport("x", RunConfig(M=2))
    report.check("x.ok", True)
    report.check("x.bad", False, value=2.0, bound=1.0, seed=42, detail="ratio")
    assert not report.passed
    assert [c.name for c in report.failures] == ["x.bad"]
    text = report.to_text()
    assert text.startswith("suite x: FAIL (1/2 checks)")
    assert "[FAIL] x.bad value=2 bound=1 seed=42  (ratio)" in text
    d = report.to_dict()
    assert d["summary"] == {"checks": 2, "failed": 1}
    assert d["checks"][0]["name"] == "x.bad"


def test_tolerance_override_reaches_suites():
    tight = run_suite("paraproduct", RunConfig(M=3, trials=2, tau_rel=1e-30, tau_abs=1e-300))
    loose = run_suite("paraproduct", RunConfig(M=3, trials=2))
    assert loose.passed
    assert len(tight.checks) == len(loose.checks)


def test_written_reports_are_reproducible(tmp_path):
    cfg = RunConfig(M=2, trials=2, seed=9)
    a = write_report(run_suite("all", cfg), tmp_path / "a")
    b = write_report(run_suite("all", cfg), tmp_path / "b")
    assert set(a) == {"report.json", "report.txt", "constants.csv", "figure.svg", "timings.json"} | \
        {k for k in a if k.endswith(".svg")}
    for name in a:
        if name == "timings.json":
            continue
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    doc = json.loads((tmp_path / "a" / "report.json").read_text())
    assert doc["passed"] and doc["config"]["M"] == 2
    assert "timings" not in doc
    assert set(json.loads((tmp_path / "a" / "timings.json").read_text())) == set(SUITES)
