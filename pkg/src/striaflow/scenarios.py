"""Closed-form initial states.

Two scenario families: a cellular vortex with an optional density ripple
(steady when the ripple vanishes), and a mollified elliptical vortex patch
whose striation direction is the rotated gradient of the patch level-set.
Both assume the 2*pi box; formulas are written in raw coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .dynamics import FlowMarkers, StratifiedState
from .grid import (
    GridSpec,
    VectorField,
    constant_field,
    field_from_values,
    zero_mean,
)


@dataclass(frozen=True)
class ScenarioBundle:
    """Initial state plus the marker set and family index that go with it.

    boundary_loop says whether the markers trace a closed material boundary
    (patch) or are merely passive tracers (cellular vortex); only closed
    loops feed the interior Holder probe.
    """

    state: StratifiedState
    markers: FlowMarkers
    epsilon: float
    name: str
    boundary_loop: bool


def _require_box(grid: GridSpec):
    if abs(grid.length - 2.0 * math.pi) > 1e-12:
        raise ValueError(
            f"scenario formulas assume a 2*pi box, got length {grid.length!r}"
        )


def _require_bounds(rho_vals, rho_star: float, rho_star_upper: float):
    lo = float(np.min(rho_vals))
    hi = float(np.max(rho_vals))
    if lo < rho_star:
        raise ValueError(
            f"initial density minimum {lo:.6g} undercuts rho_star={rho_star:.6g}"
        )
    if hi > rho_star_upper:
        raise ValueError(
            f"initial density maximum {hi:.6g} exceeds rho_star_upper={rho_star_upper:.6g}"
        )


def taylor_green(
    grid: GridSpec,
    amp: float = 0.2,
    epsilon: float = 0.5,
    marker_radius: float = 0.5,
    marker_count: int = 64,
    rho_star: float = 0.5,
    rho_star_upper: float = 2.5,
) -> ScenarioBundle:
    """Cellular vortex omega = 2 sin x sin y with density 1 + amp cos x.

    amp = 0 gives an exact steady state of the constant-density system with
    velocity (sin x cos y, -cos x sin y). The striation family is the single
    constant field (1, 0); markers sit on a passive circle around the box
    center.
    """
    _require_box(grid)
    if amp < 0.0:
        raise ValueError(f"density ripple amplitude must be nonnegative, got {amp}")
    if amp >= rho_star:
        raise ValueError(
            f"density ripple amp={amp} >= rho_star={rho_star}: the ripple floor "
            "1 - amp would cross the admissible lower bound"
        )
    if not (0 < marker_count):
        raise ValueError("marker_count must be positive")
    xg, yg = grid.meshgrid()
    omega = field_from_values(grid, 2.0 * np.sin(xg) * np.sin(yg))
    rho_vals = 1.0 + amp * np.cos(xg)
    _require_bounds(rho_vals, rho_star, rho_star_upper)
    rho = field_from_values(grid, rho_vals)
    family = VectorField((constant_field(grid, 1.0), constant_field(grid, 0.0)))
    th = np.linspace(0.0, 2.0 * math.pi, marker_count, endpoint=False)
    c = math.pi
    markers = FlowMarkers(
        np.stack([c + marker_radius * np.cos(th), c + marker_radius * np.sin(th)], axis=1)
    )
    state = StratifiedState(0.0, rho, omega, (family,))
    return ScenarioBundle(state, markers, epsilon, "taylor_green", False)


def _ellipse_level(xg, yg, center, axes):
    """Two-mode periodic level function s with s = 0 at the center.

    s approximates ((x-cx)/a)^2 + ((y-cy)/b)^2 near the center and stays
    periodic; the patch boundary is the curve s = 1.
    """
    cx, cy = center
    a, b = axes
    return (2.0 - 2.0 * np.cos(xg - cx)) / (a * a) + (2.0 - 2.0 * np.cos(yg - cy)) / (b * b)


def _boundary_markers(center, axes, count: int) -> np.ndarray:
    """Points on the curve s = 1, one per ray from the center, by bisection."""
    cx, cy = center
    a, b = axes
    th = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
    dx, dy = np.cos(th), np.sin(th)

    def s_of(t):
        return (2.0 - 2.0 * np.cos(t * dx)) / (a * a) + (2.0 - 2.0 * np.cos(t * dy)) / (b * b)

    # s increases along each ray while both offsets stay below pi.
    cap = math.pi / np.maximum(np.abs(dx), np.abs(dy))
    if np.any(s_of(cap) < 1.0):
        raise ValueError(
            f"semi-axes {axes} are too large: the boundary curve does not close "
            "inside the periodic box"
        )
    lo = np.zeros_like(th)
    hi = cap.copy()
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = s_of(mid) < 1.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    t = 0.5 * (lo + hi)
    return np.stack([cx + t * dx, cy + t * dy], axis=1)


def vortex_patch(
    grid: GridSpec,
    center=(3.2, 3.1),
    semi_axes=(1.3, 0.9),
    width_cells: float = 4.0,
    rho_inside: float = 2.0,
    rho_outside: float = 1.0,
    amp: float = 1.0,
    epsilon: float = 0.5,
    marker_count: int = 256,
    rho_star: float = 0.5,
    rho_star_upper: float = 2.5,
) -> ScenarioBundle:
    """Mollified elliptical vortex patch with tangent-aligned striation.

    The level set phi = 1 - s (s the two-mode periodic ellipse function)
    defines the patch; the error-function ramp G = (1 + erf(phi/w))/2, with
    w chosen so the transition e-folds over width_cells cells at the
    steepest boundary point, builds both the vorticity amp*(G - mean G) and
    the density rho_outside + (rho_inside - rho_outside)*G. An analytic ramp
    keeps the spectrum clean (dealias-band tail at machine level for
    width_cells >= 3), which is what makes the vorticity start perfectly
    striated: its derivative along the member cancels to rounding. The
    price is that the interior plateau undershoots the nominal inside value
    by erfc(1/w)/2 (about 1.6e-4 at the defaults); the outside value is
    attained exactly to machine precision because the exterior plateau is
    several times deeper. The striation member is the rotated level-set
    gradient (-d_y phi, d_x phi): a two-mode field, divergence-free by
    construction, annihilating every function of phi. The default center
    sits off-grid for every power-of-two n, keeping the family
    nondegenerate at the two critical points of phi.
    """
    _require_box(grid)
    if width_cells < 2.0:
        raise ValueError(
            f"mollification width must be at least 2 grid cells, got {width_cells}"
        )
    a, b = semi_axes
    if not (0.0 < a < 2.0 and 0.0 < b < 2.0):
        raise ValueError(f"semi-axes must lie in (0, 2), got {semi_axes}")
    if rho_inside <= 0.0 or rho_outside <= 0.0:
        raise ValueError("densities must be positive")
    if marker_count < 8:
        raise ValueError("marker_count must be at least 8 for a usable boundary loop")

    positions = _boundary_markers(center, semi_axes, marker_count)
    h = grid.spacing
    margin = 5.0 * h
    if np.min(positions) < margin or np.max(positions) > grid.length - margin:
        raise ValueError(
            "patch boundary comes within 5 cells of the box edge; "
            "shrink the axes or recenter"
        )

    cx, cy = center
    xg, yg = grid.meshgrid()
    s_vals = _ellipse_level(xg, yg, center, semi_axes)
    phi = 1.0 - s_vals
    # Steepness of phi on the boundary sets the width scale so that the
    # thinnest part of the layer still spans width_cells cells.
    gx_b = 2.0 * np.sin(positions[:, 0] - cx) / (a * a)
    gy_b = 2.0 * np.sin(positions[:, 1] - cy) / (b * b)
    gbar = float(np.max(np.hypot(gx_b, gy_b)))
    phi_w = width_cells * h * gbar
    if phi_w >= 1.0:
        raise ValueError(
            f"layer width {phi_w:.3g} (phi units) swallows the patch "
            "interior; reduce width_cells or enlarge the axes"
        )
    profile = 0.5 * (1.0 + erf(phi / phi_w))

    omega = zero_mean(field_from_values(grid, amp * profile))
    rho_vals = rho_outside + (rho_inside - rho_outside) * profile
    _require_bounds(rho_vals, rho_star, rho_star_upper)
    rho = field_from_values(grid, rho_vals)

    tangent = VectorField(
        (
            field_from_values(grid, 2.0 * np.sin(yg - cy) / (b * b)),
            field_from_values(grid, -2.0 * np.sin(xg - cx) / (a * a)),
        )
    )
    state = StratifiedState(0.0, rho, omega, (tangent,))
    return ScenarioBundle(state, FlowMarkers(positions), epsilon, "vortex_patch", True)
