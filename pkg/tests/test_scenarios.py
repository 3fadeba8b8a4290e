import math

import numpy as np
import pytest
from scipy.special import erfc

from striaflow.grid import GridSpec, VectorField, constant_field
from striaflow.paraproduct import derive_along
from striaflow.diagnostics import VectorFieldFamily, nondegeneracy
from striaflow.scenarios import taylor_green, vortex_patch


def test_cell_vortex_fields(grid64):
    bundle = taylor_green(grid64, amp=0.2)
    x, y = grid64.meshgrid()
    assert np.max(np.abs(bundle.state.omega.values() - 2.0 * np.sin(x) * np.sin(y))) < 1e-13
    assert np.max(np.abs(bundle.state.rho.values() - (1.0 + 0.2 * np.cos(x)))) < 1e-13
    assert bundle.name == "taylor_green"
    assert not bundle.boundary_loop
    assert bundle.epsilon == 0.5


def test_cell_vortex_constant_density_limit(grid64):
    bundle = taylor_green(grid64, amp=0.0)
    coeffs = bundle.state.rho.coeffs
    assert coeffs[0, 0] == 1.0
    off = coeffs.copy()
    off[0, 0] = 0.0
    assert np.max(np.abs(off)) < 1e-16


def test_cell_vortex_frame_is_the_unit_direction(grid64):
    bundle = taylor_green(grid64)
    xf = bundle.state.x_fields[0]
    assert np.max(np.abs(xf[0].values() - 1.0)) < 1e-14
    assert np.max(np.abs(xf[1].values())) < 1e-14


def test_cell_vortex_markers_sit_on_the_circle(grid64):
    bundle = taylor_green(grid64, marker_radius=0.7, marker_count=48)
    p = bundle.markers.positions
    assert p.shape == (48, 2)
    r = np.hypot(p[:, 0] - math.pi, p[:, 1] - math.pi)
    assert np.max(np.abs(r - 0.7)) < 1e-12


def test_cell_vortex_validation(grid64):
    with pytest.raises(ValueError):
        taylor_green(grid64, amp=-0.1)
    with pytest.raises(ValueError):
        taylor_green(grid64, amp=0.5)  # touches the admissible floor
    with pytest.raises(ValueError):
        taylor_green(grid64, marker_count=0)
    with pytest.raises(ValueError):
        taylor_green(GridSpec(n=64, length=1.0))


def test_patch_divergence_is_bitwise_zero(grid64):
    bundle = vortex_patch(grid64)
    xf = bundle.state.x_fields[0]
    assert np.max(np.abs(xf.divergence().coeffs)) == 0.0


def test_patch_striation_cancels_at_start(grid64):
    bundle = vortex_patch(grid64)
    omega = bundle.state.omega
    xf = bundle.state.x_fields[0]
    aligned = derive_along(omega, xf)
    e1 = VectorField((constant_field(grid64, 1.0), constant_field(grid64, 0.0)))
    transverse = derive_along(omega, e1)
    ratio = np.max(np.abs(aligned.values())) / np.max(np.abs(transverse.values()))
    assert ratio < 1e-10


def test_patch_frame_stays_nondegenerate_off_grid(grid64):
    bundle = vortex_patch(grid64)
    fam = VectorFieldFamily(members=bundle.state.x_fields, epsilon=bundle.epsilon)
    assert nondegeneracy(fam) > 0.1


def test_patch_density_plateaus(grid64):
    """The exterior plateau reaches rho_outside to rounding; the interior
    plateau carries the documented erf ramp defect. The defect is at least
    the analytic center value (phi never exceeds 1) and at most the value
    at the worst half-cell offset from the off-grid center."""
    width = 4.0
    bundle = vortex_patch(grid64, width_cells=width)
    vals = bundle.state.rho.values()
    assert abs(float(np.min(vals)) - 1.0) < 1e-9
    gap = 2.0 - float(np.max(vals))
    w = _phi_width(grid64, width)
    h = grid64.spacing
    s_half = (2.0 - 2.0 * math.cos(0.5 * h)) * (1.0 / 1.3**2 + 1.0 / 0.9**2)
    lo_cap = 0.5 * erfc(1.0 / w)
    hi_cap = 0.5 * erfc((1.0 - s_half) / w)
    assert lo_cap <= gap <= hi_cap


def _phi_width(grid, width_cells, center=(3.2, 3.1), axes=(1.3, 0.9)):
    # mirror of the scenario's width normalization at the steepest boundary point
    from striaflow.scenarios import _boundary_markers

    cx, cy = center
    a, b = axes
    pos = _boundary_markers(center, axes, 256)
    gx = 2.0 * np.sin(pos[:, 0] - cx) / (a * a)
    gy = 2.0 * np.sin(pos[:, 1] - cy) / (b * b)
    return width_cells * grid.spacing * float(np.max(np.hypot(gx, gy)))


def test_patch_markers_lie_on_the_level_curve(grid64):
    bundle = vortex_patch(grid64, marker_count=64)
    p = bundle.markers.positions
    cx, cy = 3.2, 3.1
    a, b = 1.3, 0.9
    s = (2.0 - 2.0 * np.cos(p[:, 0] - cx)) / (a * a) + (
        2.0 - 2.0 * np.cos(p[:, 1] - cy)
    ) / (b * b)
    assert np.max(np.abs(s - 1.0)) < 1e-12


def test_patch_scales_with_amplitude(grid64):
    lo = vortex_patch(grid64, amp=0.5)
    hi = vortex_patch(grid64, amp=2.0)
    ratio = np.max(np.abs(hi.state.omega.values())) / np.max(
        np.abs(lo.state.omega.values())
    )
    assert abs(ratio - 4.0) < 1e-10


def test_patch_validation(grid64):
    with pytest.raises(ValueError):
        vortex_patch(grid64, width_cells=1.0)
    with pytest.raises(ValueError):
        vortex_patch(grid64, semi_axes=(0.0, 0.9))
    with pytest.raises(ValueError):
        vortex_patch(grid64, semi_axes=(2.5, 0.9))
    with pytest.raises(ValueError):
        vortex_patch(grid64, rho_inside=-1.0)
    with pytest.raises(ValueError):
        vortex_patch(grid64, marker_count=4)
    with pytest.raises(ValueError):
        vortex_patch(grid64, center=(0.3, 3.1))  # boundary touches the edge margin
    with pytest.raises(ValueError):
        vortex_patch(grid64, width_cells=6.0)  # ramp swallows the interior at n=64
    with pytest.raises(ValueError):
        vortex_patch(grid64, rho_inside=3.0)  # exceeds the admissible ceiling
    with pytest.raises(ValueError):
        vortex_patch(GridSpec(n=64, length=4.0))
