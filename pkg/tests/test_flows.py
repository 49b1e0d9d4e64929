import math

import numpy as np
import pytest
from scipy.integrate import trapezoid
from hypothesis import given
from hypothesis import strategies as st

from flatsym import flows
from flatsym.metrics import CATALOG, FinslerModel, UPoint, frame_fast, parse_model

HYP = FinslerModel()
RANDERS = parse_model("randers:eps=0.01")


def test_vertical_geodesic_endpoint():
    traj = flows.flow(HYP, "X", UPoint(0.0, 1.0, math.pi / 2), 1.0, 1e-10)
    assert traj.endpoint() == pytest.approx([0.0, math.e, math.pi / 2], abs=1e-8)
    assert not traj.truncated


@pytest.mark.parametrize("model_id", ["hyperbolic", "conformal:amp=0.1"])
def test_z_flow_rotates_fibre(model_id):
    traj = flows.flow(parse_model(model_id), "Z", UPoint(0.3, 1.4, 0.2), 1.7, 1e-10)
    assert traj.endpoint() == pytest.approx([0.3, 1.4, 1.9], abs=1e-9)


@pytest.mark.parametrize("model_id", [m for m in CATALOG if m.startswith("randers")])
def test_z_flow_finsler_stays_on_fibre(model_id):
    # phi is the Euclidean direction angle, so Z = d/dphi / eta_phi and the
    # time to turn from phi0 to phi1 is the integral of eta_phi
    model = parse_model(model_id)
    traj = flows.flow(model, "Z", UPoint(0.3, 1.4, 0.2), 1.7, 1e-10)
    x, y, phi1 = traj.endpoint()
    assert (x, y) == pytest.approx((0.3, 1.4), abs=1e-12)
    grid = np.linspace(0.2, phi1, 401)
    eta_phi = [frame_fast(model, UPoint(0.3, 1.4, p)).eta[2] for p in grid]
    assert trapezoid(eta_phi, grid) == pytest.approx(1.7, abs=1e-5)


@pytest.mark.parametrize("start", [(0.0, 1.0, 0.0), (0.3, 1.2, 0.8)])
def test_y_flow_follows_rotated_geodesic(start):
    x0, y0, phi0 = start
    traj = flows.flow(HYP, "Y", UPoint(*start), 1.0, 1e-10)
    # geodesic through the start point with tangent angle phi0 - pi/2
    tangent = phi0 - math.pi / 2
    if abs(math.cos(tangent)) < 1e-12:
        dist = np.abs(traj.states[:, 0] - x0)
    else:
        center = x0 + y0 * math.tan(tangent)
        radius = y0 / abs(math.cos(tangent))
        dist = np.abs(np.hypot(traj.states[:, 0] - center, traj.states[:, 1]) - radius)
    assert np.max(dist) < 1e-8
    # unit speed for the hyperbolic metric
    x, y, _ = traj.endpoint()
    assert math.acosh(1 + ((x - x0) ** 2 + (y - y0) ** 2) / (2 * y * y0)) == pytest.approx(1.0, abs=1e-8)


def test_flow_truncates_at_boundary():
    traj = flows.flow(HYP, "X", UPoint(0.0, 1.0, -math.pi / 2), 20.0, 1e-10)
    assert traj.truncated
    assert traj.endpoint()[1] <= 1e-5


def test_flow_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        flows.flow(HYP, "X", UPoint(0.0, 1.0, 0.0), 1.0, 0.0)


@pytest.mark.parametrize("model_id", ["hyperbolic", "randers:eps=0.02"])
def test_endpoint_reproducible_under_halved_tolerance(model_id):
    model = parse_model(model_id)
    tol = 1e-9
    a = flows.flow(model, "X", UPoint(0.1, 0.9, 1.0), 2.0, tol).endpoint()
    b = flows.flow(model, "X", UPoint(0.1, 0.9, 1.0), 2.0, tol / 2).endpoint()
    assert np.max(np.abs(a - b)) <= 10 * tol


@pytest.mark.parametrize("model_id", ["hyperbolic", "conformal:amp=0.1"])
def test_riemannian_geodesics_retrace(model_id):
    model = parse_model(model_id)
    start = UPoint(0.2, 1.1, 0.5)
    q = flows.flow_map(model, "X", start.as_array(), 1.3, 1e-11)
    back = flows.flow_map(model, "X", q + np.array([0, 0, math.pi]), 1.3, 1e-11)
    assert back[:2] == pytest.approx(start.as_array()[:2], abs=1e-8)
    turn = (back[2] - math.pi - start.phi + math.pi) % (2 * math.pi) - math.pi
    assert turn == pytest.approx(0.0, abs=1e-8)


def test_jacobi_hyperbolic_closed_form():
    f1, f2, f1p, f2p = flows.jacobi_at(HYP, UPoint(0.4, 0.8, 2.0), 1.0, 1e-11)
    assert (f1, f2) == pytest.approx((math.cosh(1), -math.sinh(1)), rel=1e-9)
    assert (f1p, f2p) == pytest.approx((math.sinh(1), -math.cosh(1)), rel=1e-9)


@pytest.mark.parametrize("model_id", CATALOG)
def test_jacobi_initial_data(model_id):
    pair = flows.jacobi(parse_model(model_id), UPoint(0.0, 1.0, 0.3), (-0.5, 0.5))
    i = int(np.argmin(np.abs(pair.ts)))
    assert pair.ts[i] == 0.0
    assert (pair.f1[i], pair.f2[i], pair.f1p[i], pair.f2p[i]) == (1.0, 0.0, 0.0, -1.0)


def test_jacobi_randers_f2_monotone():
    pair = flows.jacobi(RANDERS, UPoint(0.1, 1.0, 0.7), (-3.0, 3.0))
    assert np.all(pair.f2p < 0)
    pos = pair.ts > 0
    neg = pair.ts < 0
    assert np.all(np.diff(np.abs(pair.f2[pos])) > 0)
    assert np.all(np.diff(np.abs(pair.f2[neg][::-1])) > 0)


@pytest.mark.parametrize("model_id", ["hyperbolic", "conformal:amp=0.1"])
def test_wronskian_constant(model_id):
    pair = flows.jacobi(parse_model(model_id), UPoint(-0.2, 1.3, 1.1), (-2.0, 2.0), 1e-11)
    assert np.max(np.abs(pair.wronskian() + 1.0)) < 1e-6


def test_jacobi_convergence_order():
    anchor = UPoint(0.2, 1.1, 0.4)
    steps, errors = [], []
    for tol in (1e-6, 1e-8, 1e-10):
        pair = flows.jacobi(HYP, anchor, (-5.0, 5.0), tol)
        err = np.max(np.abs(pair.f1 - np.cosh(pair.ts)) / np.cosh(pair.ts))
        steps.append(len(pair.ts))
        errors.append(err)
    order = -np.polyfit(np.log(steps), np.log(errors), 1)[0]
    assert order >= 4


def test_jacobi_requires_zero_in_range():
    with pytest.raises(ValueError):
        flows.jacobi(HYP, UPoint(0, 1, 0), (0.5, 1.0))


def test_jacobi_functions_match_pair():
    fn = flows.JacobiFunctions(RANDERS, UPoint(0.0, 1.0, 0.2), 2.0)
    direct = flows.jacobi_at(RANDERS, UPoint(0.0, 1.0, 0.2), 1.3, 1e-11)
    assert fn.values(1.3) == pytest.approx(direct, abs=1e-7)


def test_transport_coefficients_hyperbolic_closed_form():
    k = flows.transport_coefficients(HYP, [0, 1, 0], 0.8)
    assert (k.f1, k.f2, k.f1p, k.f2p, k.c, k.e) == pytest.approx(
        (math.cosh(0.8), -math.sinh(0.8), math.sinh(0.8), -math.cosh(0.8), 0, 0)
    )


def test_trajectory_rows_shape():
    rows = list(flows.trajectory_rows(flows.flow(HYP, "X", UPoint(0, 1, 0.3), 0.5)))
    assert all(len(r) == 4 for r in rows)
    pair = flows.jacobi(HYP, UPoint(0, 1, 0.3), (-0.2, 0.2))
    assert all(len(r) == 10 for r in flows.trajectory_rows(pair))


@given(st.floats(-5, 5))
def test_jacobi_closed_form_property(t):
    pair = flows.jacobi(HYP, UPoint(0.0, 1.0, 0.0), (min(t, 0.0), max(t, 0.0)), 1e-10)
    i = int(np.argmin(np.abs(pair.ts - t)))
    assert pair.f1[i] == pytest.approx(math.cosh(pair.ts[i]), rel=1e-8)
    assert pair.f2[i] == pytest.approx(-math.sinh(pair.ts[i]), rel=1e-8, abs=1e-12)
