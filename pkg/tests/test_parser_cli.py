"""Expression grammar, manifest orchestration, CLI determinism."""

import json
import random

import pytest

from conftest import random_series
from crreflect.cli import main
from crreflect.context import VariableContext
from crreflect.exprparse import ParseError, parse_expression
from crreflect.gaussian import gr
from crreflect.manifest import (AnalysisFailure, Manifest, ManifestError,
                                render_report, run)

CTX = VariableContext(("z1", "w1", "zeta1", "xi1"))


def test_heisenberg_defining_expression():
    s = parse_expression("w1 - xi1 - i*z1*zeta1", CTX, 8)
    assert s.coefficient((0, 1, 0, 0)) == gr(1)
    assert s.coefficient((0, 0, 0, 1)) == gr(-1)
    assert s.coefficient((1, 0, 1, 0)) == gr(0, -1)


def test_coefficient_forms():
    assert parse_expression("3/2*i*z1^2", CTX, 8).coefficient(
        (2, 0, 0, 0)) == gr(0, "3/2")
    assert parse_expression("(1/2+3/4*i)*w1", CTX, 8).coefficient(
        (0, 1, 0, 0)) == gr("1/2", "3/4")
    assert parse_expression("(1-2/3*i)", CTX, 8).constant_term() == \
        gr(1, "-2/3")
    assert parse_expression("7", CTX, 8).constant_term() == gr(7)
    assert parse_expression("-i", CTX, 8).constant_term() == gr(0, -1)


def test_malformed_input_reports_position():
    with pytest.raises(ParseError) as err:
        parse_expression("z1^^2", CTX, 8)
    assert err.value.position == 3
    with pytest.raises(ParseError):
        parse_expression("z1 + + w1", CTX, 8)
    with pytest.raises(ParseError):
        parse_expression("bogus1", CTX, 8)


def test_exponent_overflow_warns_and_truncates():
    warnings = []
    s = parse_expression("z1^9 + w1", CTX, 8, warnings=warnings)
    assert warnings and s == parse_expression("w1", CTX, 8)


def test_print_parse_roundtrip_random():
    rng = random.Random(21)
    for _ in range(20):
        f = random_series(CTX, 6, rng, degree=4, density=0.3)
        assert parse_expression(str(f), CTX, 6) == f
    zero = parse_expression("0", CTX, 6)
    assert zero.is_zero()


def test_aliases():
    s = parse_expression("t2 - tau2 - i*t1*tau1", CTX, 8,
                         aliases={"t1": "z1", "t2": "w1",
                                  "tau1": "zeta1", "tau2": "xi1"})
    assert s == parse_expression("w1 - xi1 - i*z1*zeta1", CTX, 8)


HEIS_MANIFEST = {
    "order": 6,
    "seed": 0,
    "source": {"m": 1, "d": 1, "rho": ["w1 - xi1 - i*z1*zeta1"]},
    "map": ["z1", "w1"],
    "analyses": [
        {"name": "verify-cr"},
        {"name": "classify-manifold", "kmax": 3},
        {"name": "minimality", "kmax": 5},
        {"name": "reflection", "Gmax": 3, "betamax": 2},
    ],
}


def test_run_heisenberg_manifest():
    report = run(Manifest(HEIS_MANIFEST))
    results = {a["name"]: a["result"] for a in report["analyses"]}
    assert results["verify-cr"]["ok"]
    assert results["classify-manifold"]["nd1"]["status"] == "holds"
    assert results["minimality"]["minimal"] and \
        results["minimality"]["nu0"] == 2
    assert results["reflection"]["identities"]["ok"]
    gammas = [tuple(t["gamma"]) for t in results["reflection"]["components"]]
    assert gammas == [(0,), (1,)]


def test_run_deterministic_bytes():
    a = render_report(run(Manifest(HEIS_MANIFEST)))
    b = render_report(run(Manifest(HEIS_MANIFEST)))
    assert a == b


def test_empty_analyses_gives_provenance_only():
    report = run(Manifest({
        "order": 4, "source": {"m": 1, "d": 1,
                               "rho": ["w1 - xi1 - i*z1*zeta1"]},
    }))
    assert report["analyses"] == []
    assert report["provenance"]["order"] == 4


def test_bounds_checked_against_order():
    data = dict(HEIS_MANIFEST)
    data["analyses"] = [{"name": "classify-manifold", "kmax": 9}]
    with pytest.raises(ManifestError):
        Manifest(data)


def test_missing_map_is_surfaced():
    data = {
        "order": 4,
        "source": {"m": 1, "d": 1, "rho": ["w1 - xi1 - i*z1*zeta1"]},
        "analyses": [{"name": "verify-cr"}],
    }
    with pytest.raises(AnalysisFailure) as err:
        run(Manifest(data))
    assert err.value.name == "verify-cr"


def test_ex121_manifest_flags_degeneracy():
    data = {
        "order": 6,
        "source": {"m": 2, "d": 1,
                   "rho": ["w1 - xi1 - i*z1*zeta1"]},
        "analyses": [{"name": "classify-manifold", "kmax": 3},
                     {"name": "degeneracy-field", "Dmax": 3}],
    }
    report = run(Manifest(data))
    results = {a["name"]: a["result"] for a in report["analyses"]}
    assert results["classify-manifold"]["nd5"]["status"] == "fails"
    witness = results["classify-manifold"]["nd5"]["witness"]
    assert witness[0]["terms"] == [] and witness[1]["terms"]
    assert results["degeneracy-field"]["found"]


def test_cli_end_to_end(tmp_path, capsys):
    mpath = tmp_path / "m.json"
    mpath.write_text(json.dumps(HEIS_MANIFEST))
    out = tmp_path / "report.json"
    code = main(["analyze", str(mpath), "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert "minimality: minimal" in text
    report = json.loads(out.read_text())
    assert report["provenance"]["order"] == 6


def test_cli_order_override(tmp_path):
    mpath = tmp_path / "m.json"
    data = dict(HEIS_MANIFEST, analyses=[])
    mpath.write_text(json.dumps(data))
    out = tmp_path / "r.json"
    assert main(["analyze", str(mpath), "--order", "5",
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["provenance"]["order"] == 5


def test_cli_parse_check(capsys):
    assert main(["parse-check", "w1 - xi1 - i*z1*zeta1"]) == 0
    assert "w1" in capsys.readouterr().out
    assert main(["parse-check", "z1^^2"]) == 1
    assert "position" in capsys.readouterr().err


def test_cli_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip()
