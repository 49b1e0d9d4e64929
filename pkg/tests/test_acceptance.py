"""The twelve acceptance criteria, one test (or one pass/fail pair) each.

Each test prints a line ``criterion N (...): PASS|FAIL ...``; the lines are
repeated in the terminal summary. The two parts that are known to fail are
marked strict xfail so that an unexpected pass would also be reported.
"""

import math
import time

import numpy as np
import pytest

from flatsym import cli, connection, deformation, exact, flows, metrics
from flatsym.deformation import HolDiff
from flatsym.metrics import CATALOG, FinslerModel, UPoint, parse_model

from conftest import record_criterion, sample_points

HYP = FinslerModel()


def test_criterion_01_jacobi_closed_form():
    start = time.perf_counter()
    pair = flows.jacobi(HYP, UPoint(0.2, 1.1, 0.4), (-5.0, 5.0), 1e-10)
    elapsed = time.perf_counter() - start
    ts = pair.ts
    err1 = np.max(np.abs(pair.f1 - np.cosh(ts)) / np.cosh(ts))
    nz = ts != 0
    err2 = np.max(np.abs(pair.f2[nz] + np.sinh(ts[nz])) / np.abs(np.sinh(ts[nz])))
    ok = max(err1, err2) <= 1e-8 and elapsed < 1.0 and ts[0] == -5.0 and ts[-1] == 5.0
    assert record_criterion(1, "Jacobi closed form", ok, f"rel_err={max(err1, err2):.2e} runtime={elapsed:.2f}s")


def test_criterion_02_generating_function():
    start = time.perf_counter()
    nonzero = sum(r != 0 for m in range(1, 9) for order in range(13) for r in exact.genfun_check(m, order))
    elapsed = time.perf_counter() - start
    ok = nonzero == 0 and elapsed < 10.0
    assert record_criterion(2, "generating function", ok, f"nonzero_residuals={nonzero} runtime={elapsed:.2f}s")


def test_criterion_03_exact_vs_quadrature():
    worst = 0.0
    for total in range(1, 13):
        for m in range(total + 1):
            worst = max(worst, abs(float(exact.cmn_exact(m, total - m)) - exact.cmn_quad(m, total - m)))
    spots = (
        exact.cmn_exact(0, 1) == exact.QPi(0, 1)
        and exact.cmn_exact(1, 0) == exact.QPi(2, 0)
        and exact.cmn_exact(1, 1) == exact.QPi(-2, 1)
        and abs(exact.cmn_quad(0, 1) - math.pi) <= 1e-10
        and abs(exact.cmn_quad(1, 0) - 2.0) <= 1e-10
        and abs(exact.cmn_quad(1, 1) - (math.pi - 2.0)) <= 1e-10
    )
    ok = worst <= 1e-10 and spots
    assert record_criterion(3, "exact vs quadrature", ok, f"max_diff={worst:.2e} spot_values={spots}")


def test_criterion_04a_pairing_nonzero():
    smallest = min(abs(float(exact.pairing_coefficient_exact(m, r))) for r in exact.READINGS for m in range(3, 11))
    assert record_criterion("4a", "pairing nonzero, both readings", smallest > 1e-12, f"min_abs={smallest:.4g}")


@pytest.mark.xfail(strict=True, reason="numeric route agrees with neither parenthesis reading; see decisions ledger")
def test_criterion_04b_pairing_numeric_agreement():
    reading, table = exact.adjudicate_reading((3, 4, 5), 1e-6)
    detail = " ".join(
        f"m={m}:numeric={num:.5g},R1={vals['R1']:.5g},R2={vals['R2']:.5g}" for m, (num, vals) in table.items()
    )
    assert record_criterion("4b", "pairing numeric agreement", reading is not None, f"adjudicated={reading} {detail}")


def test_criterion_05_flatness():
    loop = connection.square_loop()
    hyp = connection.holonomy_loop(HYP, loop, connection.default_probes(20), 1e-8)
    randers = connection.holonomy_loop(parse_model("randers:eps=0.02"), loop, connection.default_probes(2), 1e-8)
    ok = hyp < 1e-5 and randers < 1e-5
    assert record_criterion(5, "flatness", ok, f"hyperbolic={hyp:.2e} (20 probes) randers={randers:.2e} (2 probes)")


def test_criterion_06_crofton():
    details = []
    ok = True
    for d in (1.0, 2.0, 0.5):
        a, b = (0.0, 1.0), (0.0, math.exp(d))
        oracle = abs(math.log(b[1] / a[1]))
        res = connection.crofton_measure(HYP, a, b, 1_000_000, seed=2024)
        within_se = abs(res.estimate - 2 * oracle) <= 3 * res.stderr
        within_pct = abs(res.estimate - 2 * oracle) <= 0.01 * 2 * oracle
        ok = ok and within_se and within_pct
        details.append(f"d={d}:est={res.estimate:.5f},se={res.stderr:.1e}")
    assert record_criterion(6, "Crofton", ok, " ".join(details))


VARIATION_A = 0.7 + 0.4j
VARIATION_EPS = (2e-4, 5e-5)


@pytest.fixture(scope="module")
def measured_variations():
    """Measured (dC, dK) by symmetric eps-differences at 20 points for m = 1..4."""
    pts = sample_points(np.random.default_rng(7), 20)
    out = {}
    for m in (1, 2, 3, 4):
        a = HolDiff(m, (VARIATION_A,))
        per_eps = {eps: [deformation.measured_invariant_variation(a, q, eps) for q in pts] for eps in VARIATION_EPS}
        out[m] = (a, pts, per_eps)
    return out


def _converges(a, pts, per_eps, index, formula):
    """Residual small at the finer eps and shrinking with eps (or already at the noise floor)."""
    coarse_eps, fine_eps = VARIATION_EPS
    ref = [formula(a)(q) for q in pts]
    fine = max(abs(v[index] - r) for v, r in zip(per_eps[fine_eps], ref))
    coarse = max(abs(v[index] - r) for v, r in zip(per_eps[coarse_eps], ref))
    scale = max(1.0, max(abs(v[index]) for v in per_eps[fine_eps]))
    shrinking = coarse / fine >= 8 or fine <= 1e-5 * scale
    return fine <= 1e-3 * scale and shrinking, fine / scale


def test_criterion_07a_dC_and_m2(measured_variations):
    details = []
    ok = True
    for m, (a, pts, per_eps) in measured_variations.items():
        good, rel = _converges(a, pts, per_eps, 0, deformation.delta_C)
        ok = ok and good
        details.append(f"m={m}:dC_rel_resid={rel:.1e}")
    _, _, per_eps = measured_variations[2]
    m2 = max(max(abs(c), abs(k)) for c, k in per_eps[VARIATION_EPS[1]])
    ok = ok and m2 <= 1e-5
    details.append(f"m=2:max|dC|,|dK|={m2:.1e}")
    assert record_criterion("7a", "variation dC and m=2 zeros", ok, " ".join(details))


@pytest.mark.xfail(strict=True, reason="printed dK is off by (4-m^2)/2 u for m != 2; see decisions ledger")
def test_criterion_07b_dK_printed(measured_variations):
    details = []
    ok = True
    for m, (a, pts, per_eps) in measured_variations.items():
        good, rel = _converges(a, pts, per_eps, 1, deformation.delta_K)
        ok = ok and good
        details.append(f"m={m}:dK_rel_resid={rel:.1e}")
    assert record_criterion("7b", "variation dK (printed formula)", ok, " ".join(details))


def test_criterion_07c_dK_rederived(measured_variations):
    # not part of the criterion; shows what the measurement does match
    details = []
    ok = True
    for m, (a, pts, per_eps) in measured_variations.items():
        good, rel = _converges(a, pts, per_eps, 1, deformation.delta_K_rederived)
        ok = ok and good
        details.append(f"m={m}:dK_rel_resid={rel:.1e}")
    assert record_criterion("7c", "variation dK (re-derived formula, supplementary)", ok, " ".join(details))


def test_criterion_08_casimir_cr_identities():
    pts = sample_points(np.random.default_rng(8), 100)
    ok = True
    details = []
    for m in range(1, 7):
        a = HolDiff(m, (VARIATION_A, 0.3, -0.2j))
        for name, fn in (("cr", deformation.cr_residual), ("casimir", deformation.casimir_residual)):
            coarse = max(fn(a, q, 1e-2) for q in pts)
            fine = max(fn(a, q, 5e-3) for q in pts)
            ratio = coarse / fine
            ok = ok and 3.6 <= ratio <= 4.4
            details.append(f"m={m}:{name}_ratio={ratio:.3f}")
    assert record_criterion(8, "Casimir and CR identities", ok, " ".join(details[:4]) + " ...")


def test_criterion_09_cr_closure():
    rng = np.random.default_rng(9)
    pts = sample_points(rng, 20)
    ts = rng.uniform(-2.0, 2.0, 20)
    worst = 0.0
    for m in (1, 2, 3, 4, 5):
        a = HolDiff(m, (VARIATION_A, 0.5j))
        for q, t in zip(pts, ts):
            worst = max(worst, abs(deformation.cr_closure_residual(a, q, float(t), 1e-4)))
    assert record_criterion(9, "CR closure", worst < 1e-6, f"max_residual={worst:.2e}")


def test_criterion_10_so_reduction():
    red = connection.so_reduction(HYP, UPoint(0.1, 1.2, 0.7), (0.0, 5.0))
    ts = np.linspace(0.0, 5.0, 51)
    tau_err = max(abs(red.tau(t) + t) for t in ts)
    F1 = np.array([red.F1(t) for t in ts])
    increasing = bool(np.all(np.diff(F1) > 0))
    lam0 = abs(red.lam(0.0))
    horiz = red.horizontality_residual_at_0
    ok = tau_err < 1e-12 and increasing and lam0 < 1e-8 and horiz < 1e-6
    assert record_criterion(
        10, "SO reduction", ok, f"tau_err={tau_err:.1e} F1_increasing={increasing} lambda0={lam0:.1e} horizontality={horiz:.1e}"
    )


def test_criterion_11_structure_equations():
    u = UPoint(0.2, 1.1, 0.7)
    worst_rate = math.inf
    for model_id in CATALOG:
        model = parse_model(model_id)
        coarse = np.array(metrics.structure_residuals(model, u, 1e-2))
        fine = np.array(metrics.structure_residuals(model, u, 5e-3))
        worst_rate = min(worst_rate, float(np.min(np.log2(coarse / fine))))
    pts = sample_points(np.random.default_rng(11), 10)
    sck = max(
        max(abs(fr.S), abs(fr.C), abs(fr.K + 1))
        for fr in (metrics.frame_and_coframe(HYP, UPoint(*q)) for q in pts)
    )
    ok = worst_rate > 1.8 and sck <= 1e-6
    assert record_criterion(11, "structure equations", ok, f"min_order={worst_rate:.3f} hyperbolic_SCK_err={sck:.1e}")


def test_criterion_12_determinism(tmp_path, capsys):
    commands = [
        ["flow", "--model", "randers:eps=0.02"],
        ["jacobi", "--model", "conformal:amp=0.1"],
        ["crofton", "--seed", "12", "--n", "200000"],
        ["cmn", "--table", "8"],
        ["genfun"],
        ["pairing"],
        ["reduce"],
        ["deform", "--seed", "12"],
    ]
    same = True
    files = 0
    for argv in commands:
        dirs = [tmp_path / f"{argv[0]}_{i}" for i in range(2)]
        for d in dirs:
            assert cli.main([*argv, "--out", str(d)]) == 0
        for path in sorted(dirs[0].glob("*.csv")):
            files += 1
            same = same and path.read_bytes() == (dirs[1] / path.name).read_bytes()
    capsys.readouterr()
    assert record_criterion(12, "determinism", same and files >= 9, f"csv_files_compared={files}")
