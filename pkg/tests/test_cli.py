import math
from pathlib import Path

import pytest

from flatsym import cli
from flatsym.fmt import csv_text, fmt

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out.strip(), err.strip()


def test_jacobi_summary(capsys):
    assert run(capsys, "jacobi", "--model", "hyperbolic", "--t", "1.0") == (0, "f1=1.5430806348 f2=-1.1752011936", "")


def test_cmn_exact_summary(capsys):
    assert run(capsys, "cmn", "--m", "0", "--n", "1", "--exact")[:2] == (0, "0 + 1*pi")


def test_crofton_summary(capsys):
    code, out, _ = run(capsys, "crofton", "--x", "0,1", "--y", "0,2.71828182845", "--n", "100000", "--seed", "7")
    assert code == 0
    fields = dict(item.split("=") for item in out.split())
    assert abs(float(fields["estimate"]) - 2.0) < 3 * float(fields["stderr"])


@pytest.mark.parametrize(
    "argv",
    [
        ["crofton"],
        ["deform"],
        ["flow", "--tol", "0"],
        ["flow", "--model", "randers:eps=0.9"],
        ["flow", "--start", "0,1"],
        ["flow", "--field", "W"],
        ["cmn", "--m", "0", "--n", "0"],
        ["pairing", "--m-min", "2"],
        ["nonsense"],
        ["crofton", "--seed", "1", "--n", "10"],
    ],
)
def test_configuration_errors_exit_1(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_config_file_and_unknown_keys(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text("[model]\nid = hyperbolic\n[jacobi]\nt = 1.0\n")
    assert run(capsys, "jacobi", "--config", str(good))[1] == "f1=1.5430806348 f2=-1.1752011936"
    # flags override the file
    assert run(capsys, "jacobi", "--config", str(good), "--t", "0")[1] == "f1=1 f2=0"
    bad = tmp_path / "bad.ini"
    bad.write_text("[jacobi]\nspeed = 3\n")
    assert run(capsys, "jacobi", "--config", str(bad))[0] == 1
    section = tmp_path / "section.ini"
    section.write_text("[plots]\ncolor = red\n")
    assert run(capsys, "jacobi", "--config", str(section))[0] == 1
    assert run(capsys, "jacobi", "--config", str(tmp_path / "missing.ini"))[0] == 1


def test_invariant_failure_exits_2(capsys):
    # the printed sign of the transported theta gives visible holonomy
    code, _, err = run(
        capsys, "holonomy", "--model", "randers:eps=0.02", "--probes", "1", "--tol", "1e-6",
        "--theta-rate-sign", "-1",
    )
    assert code == 2
    assert "exceeds threshold" in err


def test_pairing_numeric_route_reports_disagreement(capsys):
    code, _, err = run(capsys, "pairing", "--m-max", "5", "--numeric")
    assert code == 2
    assert "adjudicated=none" in err


def test_pairing_golden_files(tmp_path, capsys):
    assert run(capsys, "pairing", "--out", str(tmp_path))[0] == 0
    for reading in ("R1", "R2"):
        assert (tmp_path / f"pairing_{reading}.csv").read_bytes() == (GOLDEN / f"pairing_{reading}.csv").read_bytes()


def test_golden_matches_numeric_images():
    from fractions import Fraction

    from flatsym import exact

    for reading in ("R1", "R2"):
        lines = (GOLDEN / f"pairing_{reading}.csv").read_text().splitlines()[1:]
        for line in lines:
            m, r, a, b, image = line.split(",")
            value = exact.QPi(Fraction(a), Fraction(b))
            assert value == exact.pairing_coefficient_exact(int(m), r)
            assert float(image) == pytest.approx(exact.pairing_coefficient_from_quad(int(m), r), rel=1e-8)


SMOKE = [
    ["flow"],
    ["jacobi"],
    ["crofton", "--seed", "3"],
    ["holonomy"],
    ["cmn", "--table", "6"],
    ["genfun"],
    ["pairing"],
    ["reduce"],
    ["deform", "--seed", "3"],
]
ARTIFACTS = {
    "flow": ["flow.csv", "flow.svg"],
    "jacobi": ["jacobi.csv", "jacobi.svg"],
    "crofton": ["crofton.csv"],
    "holonomy": ["holonomy.txt"],
    "cmn": ["cmn.csv"],
    "genfun": ["genfun.csv"],
    "pairing": ["pairing_R1.csv", "pairing_R2.csv"],
    "reduce": ["reduce.csv"],
    "deform": ["deform.csv"],
}


@pytest.mark.parametrize("argv", SMOKE, ids=[a[0] for a in SMOKE])
def test_every_command_end_to_end(argv, tmp_path, capsys):
    code, out, err = run(capsys, *argv, "--out", str(tmp_path))
    assert code == 0, err
    assert out
    for name in ARTIFACTS[argv[0]]:
        assert (tmp_path / name).stat().st_size > 0


@pytest.mark.parametrize("argv", SMOKE, ids=[a[0] for a in SMOKE])
def test_artifacts_byte_identical(argv, tmp_path, capsys):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run(capsys, *argv, "--out", str(first))[0] == 0
    assert run(capsys, *argv, "--out", str(second))[0] == 0
    for name in ARTIFACTS[argv[0]]:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_svg_is_well_formed(tmp_path, capsys):
    import xml.etree.ElementTree as ET

    run(capsys, "flow", "--out", str(tmp_path))
    root = ET.parse(tmp_path / "flow.svg").getroot()
    assert root.tag.endswith("svg")
    assert root.attrib["version"] == "1.1"


def test_fmt_rules():
    assert fmt(math.cosh(1)) == "1.5430806348"
    assert fmt(-math.sinh(1)) == "-1.1752011936"
    assert fmt(0.0) == "0"
    assert fmt(3) == "3"
    assert fmt(2.0) == "2"
    assert fmt(1.25e-9) == "1.25e-09"
    # round half to even on the last kept digit
    assert (fmt(0.125, 1), fmt(0.375, 1), fmt(2.5, 0), fmt(3.5, 0)) == ("0.12", "0.38", "2", "4")
    assert csv_text(("a", "b"), [(1, 0.5)]) == "a,b\n1,0.5\n"
