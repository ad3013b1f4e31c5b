import json
import subprocess
import sys
from fractions import Fraction

import pytest

from courant_tdual import cli
from courant_tdual.courant import Section, build_from_base_data
from courant_tdual.exterior import ComplexSignature, InvariantForm
from courant_tdual.qla import QuadraticLieAlgebra
from courant_tdual.spinor import InvariantSpinor, SpinorSpace
from courant_tdual.tdual import DualityMaps

from support import EXAMPLES, example, package

KEYS = {"command", "inputDigest", "residuals", "result", "timings", "exitStatus"}


def run(tmp_path, *argv):
    out = tmp_path / "report.json"
    status = cli.main(list(argv) + ["--output", str(out)])
    doc = json.loads(out.read_text())
    assert set(doc) == KEYS
    assert doc["exitStatus"] == status
    return status, doc


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.mark.parametrize("name", EXAMPLES)
def test_demo_passes(tmp_path, name):
    status, doc = run(tmp_path, "demo", name)
    assert status == cli.EXIT_OK
    assert all(r["isZero"] for r in doc["residuals"])
    assert doc["result"]["example"] == name


def test_check_from_file_and_example_agree(tmp_path):
    data = example("affine-so3").data
    path = write(tmp_path, "data.json", data.to_json())
    s1, from_file = run(tmp_path, "check", "--input", path)
    s2, from_example = run(tmp_path, "check", "--example", "affine-so3")
    assert s1 == s2 == cli.EXIT_OK
    assert from_file["residuals"] == from_example["residuals"]
    assert len(from_file["inputDigest"]) == 64
    assert from_example["inputDigest"] is None


def test_decompose_reports_twelve_equations(tmp_path):
    status, doc = run(tmp_path, "decompose", "--example", "heterotic-so3")
    assert status == cli.EXIT_OK
    assert len(doc["residuals"]) == 12


def test_parse_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(tmp_path, "check", "--input", str(bad))[0] == cli.EXIT_PARSE
    assert run(tmp_path, "check", "--input", write(tmp_path, "x.json", {"g": 1}))[0] == cli.EXIT_PARSE
    assert run(tmp_path, "check")[0] == cli.EXIT_PARSE
    assert run(tmp_path, "demo", "no-such-example")[0] == cli.EXIT_PARSE


def test_dualize_then_verify(tmp_path):
    status, rep = run(tmp_path, "dualize", "--example", "heisenberg-1")
    assert status == cli.EXIT_OK
    path = write(tmp_path, "pkg.json", rep)
    status, doc = run(tmp_path, "verify", "--input", path)
    assert status == cli.EXIT_OK
    assert doc["result"]["dualCurvatureHarmonic"] == {"tt1": {}}


def test_corrupted_beta_is_a_residual_failure(tmp_path):
    doc = package("exact-flux-1").to_json()
    doc["F"]["beta"]["terms"][0]["coeff"]["modes"][0]["cos"] = "-2"
    status, rep = run(tmp_path, "verify", "--input", write(tmp_path, "pkg.json", doc))
    assert status == cli.EXIT_RESIDUAL
    assert any(not r["isZero"] for r in rep["residuals"])


def test_not_integral_exit_code(tmp_path):
    base = ComplexSignature(2, ())
    H2 = InvariantForm.monomial(base, ["dx1", "dx2"], Fraction(1, 3))
    data = build_from_base_data(QuadraticLieAlgebra.zero(), 2, [{}], [[]], H2=[H2])
    status, rep = run(tmp_path, "dualize", "--input", write(tmp_path, "data.json", data.to_json()))
    assert status == cli.EXIT_INTEGRALITY
    assert "error" in rep["result"]


def test_tau_and_rho_match_library(tmp_path):
    pkg = package("exact-flux-1")
    maps = DualityMaps(pkg)
    path = write(tmp_path, "pkg.json", pkg.to_json())
    s = InvariantSpinor.from_json(maps.space_M, [{"gens": ["th1"], "fock": [], "coeff": 1}])
    status, doc = run(tmp_path, "tau", "--input", path, "--spinor", write(tmp_path, "s.json", s.to_json()))
    assert status == cli.EXIT_OK
    assert doc["result"]["spinor"] == json.loads(json.dumps(maps.tau(s).to_json()))
    u = Section(pkg.source.sig, InvariantForm.monomial(pkg.source.sig, ["th1"]))
    status, doc = run(tmp_path, "rho", "--input", path, "--section", write(tmp_path, "u.json", u.to_json()))
    assert status == cli.EXIT_OK
    assert doc["result"]["section"] == json.loads(json.dumps(maps.rho(u).to_json()))


def test_dirac_of_one_is_minus_h(tmp_path):
    data = example("exact-flux-1").data
    space = SpinorSpace(data.sig, data.g)
    spinor = write(tmp_path, "s.json", [{"gens": [], "fock": [], "coeff": 1}])
    status, doc = run(tmp_path, "dirac", "--example", "exact-flux-1", "--spinor", spinor)
    assert status == cli.EXIT_OK
    assert InvariantSpinor.from_json(space, doc["result"]["spinor"]) == InvariantSpinor.from_form(space, -data.H)


def test_report_is_deterministic(tmp_path):
    _, a = run(tmp_path, "demo", "affine-so3", "--seed", "5")
    _, b = run(tmp_path, "demo", "affine-so3", "--seed", "5")
    a.pop("timings"), b.pop("timings")
    assert cli.dumps(a) == cli.dumps(b)
    assert json.loads(cli.dumps(a)) == a


def test_float_annotations(tmp_path):
    _, doc = run(tmp_path, "dualize", "--example", "exact-flux-1", "--float")
    assert '"cosFloat": -1.0' in cli.dumps(doc)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "courant_tdual", "check", "--example", "exact-flux-2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "check"
