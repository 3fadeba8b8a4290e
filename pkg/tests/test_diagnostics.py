import dataclasses
import math

import numpy as np
import pytest

from striaflow.grid import (
    VectorField,
    constant_field,
    field_from_values,
    zero_mean,
)
from striaflow.dynamics import FlowMarkers, StratifiedState, grad_velocity
from striaflow.diagnostics import (
    DEGENERACY_FLOOR,
    LOG_LIPSCHITZ_CALIBRATION,
    RECORD_COLUMNS,
    DegenerateFamilyError,
    DiagnosticsRecord,
    InteriorSampleError,
    LifespanInputs,
    VectorFieldFamily,
    cz_ratio,
    grad_sup_norm,
    lifespan_bound,
    lipschitz_audit,
    nondegeneracy,
    patch_interior_holder,
    striated_norm,
    theta,
    tilde_norm,
    timeseries_sample,
    vector_lp,
)
from striaflow.dyadic import build_ladder
from striaflow.scenarios import taylor_green, vortex_patch
from conftest import random_field

WORKED_LIFESPAN = 1.0 / (9.0 * math.log(math.e + 1.0))


def _unit_frame(grid):
    return VectorFieldFamily(
        members=(VectorField((constant_field(grid, 1.0), constant_field(grid, 0.0))),),
        epsilon=0.5,
    )


def test_nondegeneracy_of_constant_frame(grid64):
    fam = _unit_frame(grid64)
    assert nondegeneracy(fam) == 1.0


def test_nondegeneracy_takes_the_best_member(grid64):
    x, _ = grid64.meshgrid()
    weak = VectorField(
        (field_from_values(grid64, 0.1 * np.cos(x)), constant_field(grid64, 0.0))
    )
    strong = VectorField((constant_field(grid64, 0.0), constant_field(grid64, 0.7)))
    fam = VectorFieldFamily(members=(weak, strong), epsilon=0.5)
    assert abs(nondegeneracy(fam) - 0.7) < 1e-15


def test_tilde_norm_of_constant_unit_field(grid64, ladder64):
    fam = _unit_frame(grid64)
    got = tilde_norm(ladder64, fam.members[0], 0.5)
    assert abs(got - 2.0 ** (-0.5)) < 1e-14


def test_striated_norm_closed_form(grid64, ladder64):
    """Single-band field along the constant frame: every piece is exact.

    f = cos 6x lives in block 2, so div(f e_1) = -6 sin 6x scores
    2^(2*(eps-1)) * 6 = 3 in the eps-1 Holder norm, the frame contributes
    sup|f| * 2^(-1/2), and the nondegeneracy divisor is one.
    """
    fam = _unit_frame(grid64)
    x, _ = grid64.meshgrid()
    f = field_from_values(grid64, np.cos(6.0 * x))
    got = striated_norm(ladder64, f, fam)
    expected = 3.0 + 2.0 ** (-0.5)
    assert abs(got - expected) < 1e-12


def test_striated_norm_epsilon_override(grid64, ladder64):
    fam = _unit_frame(grid64)
    x, _ = grid64.meshgrid()
    f = field_from_values(grid64, np.cos(6.0 * x))
    a = striated_norm(ladder64, f, fam, eps=0.25)
    b = striated_norm(ladder64, f, fam, eps=0.75)
    assert a != b


def test_degenerate_frame_raises(grid64, ladder64):
    zero = VectorField(
        (constant_field(grid64, 0.5 * DEGENERACY_FLOOR), constant_field(grid64, 0.0))
    )
    fam = VectorFieldFamily(members=(zero,), epsilon=0.5)
    f = constant_field(grid64, 1.0)
    with pytest.raises(DegenerateFamilyError):
        striated_norm(ladder64, f, fam)


def test_family_validation(grid64):
    with pytest.raises(ValueError):
        VectorFieldFamily(members=(), epsilon=0.5)
    e1 = VectorField((constant_field(grid64, 1.0), constant_field(grid64, 0.0)))
    for bad_eps in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            VectorFieldFamily(members=(e1,), epsilon=bad_eps)


def test_theta_envelope():
    assert theta(0.0, 5.0) == 0.0
    assert abs(theta(1.0, 1.0) - math.log(math.e + 1.0)) < 1e-15
    rng = np.random.default_rng(0)
    for _ in range(100):
        l = float(rng.uniform(1e-8, 10.0))
        s = float(rng.uniform(0.0, 100.0))
        assert theta(l, s) >= l


def test_grad_and_vector_norms_cell_flow(grid64):
    x, y = grid64.meshgrid()
    omega = field_from_values(grid64, 2.0 * np.sin(x) * np.sin(y))
    gu = grad_velocity(omega)
    assert abs(grad_sup_norm(gu) - 1.0) < 1e-12
    from striaflow.dynamics import biot_savart

    u = biot_savart(omega)
    assert abs(vector_lp(u, math.inf) - 1.0) < 1e-12
    # mean |u|^2 = mean(sin^2 cos^2 + cos^2 sin^2) = 1/2
    assert abs(vector_lp(u, 2.0) - 2.0 ** (-0.5)) < 1e-12
    with pytest.raises(ValueError):
        vector_lp(u, 0.5)


def test_cz_ratio_cell_flow_closed_form(grid64):
    """Frobenius gradient of the cell flow equals |omega|/sqrt(2) pointwise,
    so the q=2 ratio collapses to (q-1)/q^2 = 1/4."""
    x, y = grid64.meshgrid()
    omega = field_from_values(grid64, 2.0 * np.sin(x) * np.sin(y))
    gu = grad_velocity(omega)
    assert abs(cz_ratio(gu, omega, 2.0) - 0.25) < 1e-12


def test_cz_ratio_zero_vorticity(grid64):
    omega = constant_field(grid64, 0.0)
    gu = grad_velocity(omega)
    assert cz_ratio(gu, omega, 2.0) == 0.0


def test_lipschitz_audit_cell_flow(grid64, ladder64):
    bundle = taylor_green(grid64, amp=0.0)
    fam = VectorFieldFamily(members=bundle.state.x_fields, epsilon=bundle.epsilon)
    aud = lipschitz_audit(ladder64, bundle.state.omega, fam, q=2.0)
    assert abs(aud.lhs - 1.0) < 1e-12
    assert aud.rhs_shape > aud.lhs
    assert aud.calibrated() <= 1.0


def test_lipschitz_audit_edge_cases(grid64, ladder64):
    fam = _unit_frame(grid64)
    zero = constant_field(grid64, 0.0)
    aud = lipschitz_audit(ladder64, zero, fam, q=2.0)
    assert (aud.lhs, aud.rhs_shape, aud.ratio) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        lipschitz_audit(ladder64, zero, fam, q=1.0)
    with pytest.raises(ValueError):
        lipschitz_audit(ladder64, zero, fam, q=math.inf)


def test_calibration_constant_is_frozen():
    assert LOG_LIPSCHITZ_CALIBRATION == 0.082


def test_patch_ensemble_stays_calibrated(grid64):
    ladder = build_ladder(grid64)
    for width in (3.0, 4.0):
        bundle = vortex_patch(grid64, width_cells=width)
        fam = VectorFieldFamily(members=bundle.state.x_fields, epsilon=bundle.epsilon)
        aud = lipschitz_audit(ladder, bundle.state.omega, fam, q=2.0)
        assert aud.calibrated() <= 1.0


def test_lifespan_worked_value():
    inp = LifespanInputs(l0=1.0, a0=0.0, s0=1.0, gamma0=0.0, r0=0.0)
    assert abs(lifespan_bound(inp) - WORKED_LIFESPAN) < 1e-12


def test_lifespan_calibration_rescales():
    inp = LifespanInputs(l0=1.0, a0=0.0, s0=1.0, gamma0=0.0, r0=0.0, calibration=2.0)
    assert abs(lifespan_bound(inp) - 2.0 * WORKED_LIFESPAN) < 1e-12


@pytest.mark.parametrize("name", ["a0", "gamma0", "r0"])
def test_lifespan_strictly_decreasing(name):
    base = LifespanInputs(l0=1.2, a0=0.5, s0=2.0, gamma0=0.7, r0=0.3)
    t0 = lifespan_bound(base)
    bumped = dataclasses.replace(base, **{name: getattr(base, name) + 1.0})
    assert lifespan_bound(bumped) < t0


def test_lifespan_input_validation():
    with pytest.raises(ValueError):
        LifespanInputs(l0=-1.0, a0=0.0, s0=1.0, gamma0=0.0, r0=0.0)
    with pytest.raises(ValueError):
        LifespanInputs(l0=1.0, a0=math.nan, s0=1.0, gamma0=0.0, r0=0.0)
    with pytest.raises(ValueError):
        LifespanInputs(l0=1.0, a0=0.0, s0=1.0, gamma0=0.0, r0=0.0, p=2.0)
    with pytest.raises(ValueError):
        LifespanInputs(l0=1.0, a0=0.0, s0=1.0, gamma0=0.0, r0=0.0, q=1.5)
    with pytest.raises(ValueError):
        # 1/p + 1/q = 1/8 + 1/4 < 1/2
        LifespanInputs(l0=1.0, a0=0.0, s0=1.0, gamma0=0.0, r0=0.0, p=8.0, q=4.0)
    with pytest.raises(ValueError):
        LifespanInputs(l0=1.0, a0=0.0, s0=1.0, gamma0=0.0, r0=0.0, delta=1.0)
    with pytest.raises(ValueError):
        LifespanInputs(l0=1.0, a0=0.0, s0=1.0, gamma0=0.0, r0=0.0, calibration=0.0)
    with pytest.raises(ValueError):
        lifespan_bound(LifespanInputs(l0=0.0, a0=0.0, s0=1.0, gamma0=0.0, r0=0.0))


def test_record_validation_and_serialization():
    kwargs = dict(
        t=0.0, l=1.0, a=0.0, gamma=1.0, s=2.0, theta=theta(1.0, 2.0),
        u_accum=0.0, i_x=1.0, rho_min=1.0, rho_max=2.0,
        cz_ratio_2=0.2, cz_ratio_4=0.2, cz_ratio_8=0.2,
        lipschitz_lhs=1.0, lipschitz_rhs=20.0, lipschitz_ratio=0.05,
        pressure_residual=1e-11,
    )
    rec = DiagnosticsRecord(**kwargs)
    row = rec.csv_row()
    assert len(row) == len(RECORD_COLUMNS)
    assert row[-1] == ""  # interior holder absent outside patch scenarios
    with pytest.raises(ValueError):
        DiagnosticsRecord(**{**kwargs, "theta": 0.5})  # below l
    with pytest.raises(ValueError):
        DiagnosticsRecord(**{**kwargs, "s": math.inf})


def test_timeseries_sample_contents(grid64, ladder64):
    bundle = taylor_green(grid64)
    fam = VectorFieldFamily(members=bundle.state.x_fields, epsilon=bundle.epsilon)
    rec = timeseries_sample(bundle.state, ladder64, fam, u_accum=0.37)
    assert rec.t == 0.0
    assert rec.u_accum == 0.37
    assert rec.i_x == 1.0
    assert rec.rho_min < rec.rho_max
    assert rec.theta >= rec.l
    assert rec.pressure_residual <= 1e-9


def test_interior_holder_needs_enough_points(grid64):
    f = constant_field(grid64, 1.0)
    t = np.linspace(0.0, 2.0 * np.pi, 12, endpoint=False)
    tiny = np.pi + 0.01 * np.stack([np.cos(t), np.sin(t)], axis=1)
    with pytest.raises(InteriorSampleError):
        patch_interior_holder(f, FlowMarkers(tiny), eps=0.5)


def test_interior_holder_bounded_by_gradient(grid64):
    """For a smooth field the quotient |f(x)-f(y)|/|x-y|^eps over pairs at
    most 4 cells apart is at most sup|grad f| * (4h)^(1-eps)."""
    bundle = vortex_patch(grid64)
    x, y = grid64.meshgrid()
    f = field_from_values(grid64, np.sin(x) + 0.5 * np.cos(2.0 * y))
    val = patch_interior_holder(f, bundle.markers, eps=0.5)
    h = grid64.spacing
    cap = np.sqrt(2.0) * (4.0 * h) ** 0.5  # sup|grad f| <= sqrt(2) here
    assert 0.0 < val <= cap * (1.0 + 1e-12)


def test_interior_holder_argument_validation(grid64):
    bundle = vortex_patch(grid64)
    f = constant_field(grid64, 1.0)
    with pytest.raises(ValueError):
        patch_interior_holder(f, bundle.markers, eps=1.5)
    with pytest.raises(ValueError):
        patch_interior_holder(f, bundle.markers, eps=0.5, margin_cells=0.0)
