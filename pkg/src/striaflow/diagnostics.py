"""Scalar diagnostics for stratified vorticity runs.

Everything a run reports about one state snapshot lives here: velocity and
vorticity norms, the directional-regularity norms measured along a frame of
transported vector fields, a log-Lipschitz audit of the velocity gradient,
gradient-to-vorticity ratio checks, the explicit lower bound on the
guaranteed existence time, and an interior Holder probe for patch scenarios.

Conventions (documented once, used everywhere):
  - vector fields take euclidean pointwise magnitude before L^p quadrature;
  - the velocity-gradient matrix uses the entrywise max for L^inf (so a
    Taylor-Green cell audits to exactly 1) and the Frobenius magnitude for
    finite exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .dyadic import DyadicLadder, holder_norm, lebesgue_norm
from .dynamics import FlowMarkers, StratifiedState, biot_savart, grad_velocity
from .grid import SpectralField, VectorField, derivative
from .paraproduct import derive_along, div_along
from .pressure import EllipticConfig, PressureSolution, solve_pressure

DEGENERACY_FLOOR = 1e-12


class DegenerateFamilyError(ValueError):
    """The frame's nondegeneracy value is numerically zero."""


class InteriorSampleError(ValueError):
    """Too few grid points qualify as patch interior."""


@dataclass(frozen=True)
class VectorFieldFamily:
    """A finite frame of direction fields sharing one grid.

    members holds the direction fields; epsilon is the Holder index in
    (0, 1) at which regularity along the frame is measured.
    """

    members: tuple
    epsilon: float

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if len(members) < 1:
            raise ValueError("family needs at least one member field")
        g = members[0].grid
        for x in members[1:]:
            if x.grid != g:
                raise ValueError("family members must share one grid")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def grid(self):
        return self.members[0].grid


def nondegeneracy(family: VectorFieldFamily) -> float:
    """Grid infimum over x of the max over members of |X(x)|.

    In two dimensions the wedge of a single vector has the same euclidean
    length as the vector itself, so no exterior algebra appears.
    """
    best = None
    for x in family.members:
        m = x.magnitude()
        best = m if best is None else np.maximum(best, m)
    return float(np.min(best))


def tilde_norm(ladder: DyadicLadder, x: VectorField, eps: float) -> float:
    """Holder size of a direction field together with its divergence.

    Componentwise Holder norms are maxed, the divergence term is added:
    a constant unit field at eps = 1/2 scores 2^(-1/2).
    """
    comp = max(holder_norm(ladder, x[0], eps), holder_norm(ladder, x[1], eps))
    return comp + holder_norm(ladder, x.divergence(), eps)


def striated_norm(
    ladder: DyadicLadder,
    f: SpectralField,
    family: VectorFieldFamily,
    eps: float | None = None,
) -> float:
    """Holder norm of f measured along the frame.

    (sup|f| * worst tilde_norm + worst holder_norm of div(f X) at eps - 1),
    all divided by the nondegeneracy value. Raises DegenerateFamilyError
    when that value sits below DEGENERACY_FLOOR.
    """
    if eps is None:
        eps = family.epsilon
    floor = nondegeneracy(family)
    if floor < DEGENERACY_FLOOR:
        raise DegenerateFamilyError(
            f"frame nondegeneracy {floor:.3e} is below {DEGENERACY_FLOOR:.0e}; "
            "the striated norm is undefined for a degenerate frame"
        )
    sup_f = lebesgue_norm(f, math.inf)
    frame = max(tilde_norm(ladder, x, eps) for x in family.members)
    dform = max(holder_norm(ladder, div_along(f, x), eps - 1.0) for x in family.members)
    return (sup_f * frame + dform) / floor


def theta(l: float, s: float) -> float:
    """Logarithmic envelope l * log(e + s/l), continued by 0 at l = 0.

    The log factor is clamped at 1 from below so theta >= l holds exactly
    in floating point, not just analytically.
    """
    if l == 0.0:
        return 0.0
    return l * max(math.log(math.e + s / l), 1.0)


def grad_sup_norm(grad_u) -> float:
    """Entrywise sup norm of a 2x2 matrix of fields."""
    return max(lebesgue_norm(g, math.inf) for row in grad_u for g in row)


def _frobenius_lp(grad_u, q: float) -> float:
    sq = None
    for row in grad_u:
        for g in row:
            v = g.values()
            sq = v * v if sq is None else sq + v * v
    mag = np.sqrt(sq)
    if math.isinf(q):
        return float(np.max(mag))
    return float(np.mean(mag**q) ** (1.0 / q))


def vector_lp(u: VectorField, p: float) -> float:
    """L^p quadrature norm of the pointwise euclidean magnitude."""
    m = u.magnitude()
    if math.isinf(p):
        return float(np.max(m))
    if p < 1.0:
        raise ValueError(f"Lebesgue exponent must be in [1, inf], got {p}")
    return float(np.mean(m**p) ** (1.0 / p))


def cz_ratio(grad_u, omega: SpectralField, q: float) -> float:
    """(q-1) ||grad u||_q / (q^2 ||omega||_q); 0 when the vorticity vanishes.

    The gradient recovery from vorticity is bounded on L^q with constant
    growing like q^2/(q-1), so this ratio should stay of order one and never
    blow up as q grows; the run asserts it stays within a fixed envelope.
    """
    om_q = lebesgue_norm(omega, q)
    if om_q == 0.0:
        return 0.0
    return _frobenius_lp(grad_u, q) * (q - 1.0) / (q * q * om_q)


# One-time calibration of the log-Lipschitz envelope. rhs_shape in
# lipschitz_audit carries no absolute constant, so the raw ratio is only
# meaningful relative to a measured reference. The reference ensemble:
# mollified elliptical patches with width_cells in {3, 4, 6}, density
# contrasts 2:1 and 4:1, vorticity amplitudes {0.5, 1, 2}, grids n in
# {64, 128}, each sampled at t = 0 and after 5 and 10 steps of dt = 0.01
# (90 samples). Maximum observed ratio: 0.0545 (t = 0, n = 64, width 4).
# The frozen constant is 1.5x that maximum; states off the calibration
# set (cellular flows, evolved patches) stay below it with margin.
LOG_LIPSCHITZ_CALIBRATION = 0.082


@dataclass(frozen=True)
class LipschitzAudit:
    lhs: float
    rhs_shape: float
    ratio: float

    def calibrated(self) -> float:
        """Ratio rescaled by the frozen envelope constant; audited runs
        keep this at or below one."""
        return self.ratio / LOG_LIPSCHITZ_CALIBRATION


def lipschitz_audit(
    ladder: DyadicLadder,
    omega: SpectralField,
    family: VectorFieldFamily,
    q: float,
    eps: float | None = None,
    grad_u=None,
) -> LipschitzAudit:
    """Measured max|grad u| against its log-interpolation envelope shape.

        rhs_shape = q^2/(q-1) ||omega||_q
                    + (eps(1-eps))^(-1) ||omega||_inf log(e + striated/||omega||_inf)

    The lhs is the entrywise sup norm of the recovered velocity gradient.
    Zero vorticity returns (0, 0, 0). Passing a precomputed gradient matrix
    skips one Biot-Savart inversion.
    """
    if eps is None:
        eps = family.epsilon
    if not (1.0 < q < math.inf):
        raise ValueError(f"audit exponent q must lie in (1, inf), got {q}")
    sup_om = lebesgue_norm(omega, math.inf)
    if sup_om == 0.0:
        return LipschitzAudit(0.0, 0.0, 0.0)
    if grad_u is None:
        grad_u = grad_velocity(omega)
    lhs = grad_sup_norm(grad_u)
    stri = striated_norm(ladder, omega, family, eps)
    rhs = (q * q / (q - 1.0)) * lebesgue_norm(omega, q)
    rhs += sup_om * math.log(math.e + stri / sup_om) / (eps * (1.0 - eps))
    return LipschitzAudit(lhs, rhs, lhs / rhs)


@dataclass(frozen=True)
class LifespanInputs:
    """Initial-norm bundle feeding the existence-time lower bound.

    l0 is the velocity-plus-vorticity size ||u||_p + max(||om||_q, ||om||_inf),
    a0 the density-gradient sup, s0 the striated vorticity norm, gamma0 the
    frame tilde norm, r0 the directional density-gradient norm measured one
    derivative down. delta > 1 is the pressure-estimate exponent and
    calibration rescales the whole bound.
    """

    l0: float
    a0: float
    s0: float
    gamma0: float
    r0: float
    p: float = math.inf
    q: float = 2.0
    delta: float = 1.01
    calibration: float = 1.0

    def __post_init__(self):
        for name in ("l0", "a0", "s0", "gamma0", "r0"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if not self.p > 2.0:
            raise ValueError(f"p must lie in (2, inf], got {self.p}")
        if not (2.0 <= self.q < math.inf):
            raise ValueError(f"q must lie in [2, inf), got {self.q}")
        inv_p = 0.0 if math.isinf(self.p) else 1.0 / self.p
        if inv_p + 1.0 / self.q < 0.5:
            raise ValueError(
                f"indices p={self.p}, q={self.q} violate 1/p + 1/q >= 1/2"
            )
        if not self.delta > 1.0:
            raise ValueError(f"delta must exceed 1, got {self.delta}")
        if not self.calibration > 0.0:
            raise ValueError(f"calibration must be positive, got {self.calibration}")


def lifespan_bound(inp: LifespanInputs) -> float:
    """Explicit lower bound on the guaranteed existence time.

        T = C min(l0, s0) / [ l0 log(e + s0/l0) (1 + l0 + s0)^2
                              (1 + a0^(delta+3)) (1 + gamma0^3 + r0) ]

    Worked value: l0 = s0 = 1 with a0 = gamma0 = r0 = 0 and C = 1 gives
    1/(9 log(e+1)), about 0.08460. Strictly decreasing in a0, gamma0, r0.
    """
    if inp.l0 <= 0.0:
        raise ValueError("l0 must be positive: the bound divides by l0 log(e + s0/l0)")
    envelope = theta(inp.l0, inp.s0)
    num = min(inp.l0, inp.s0)
    den = envelope * (1.0 + inp.l0 + inp.s0) ** 2
    den *= 1.0 + inp.a0 ** (inp.delta + 3.0)
    den *= 1.0 + inp.gamma0**3 + inp.r0
    return inp.calibration * num / den


RECORD_COLUMNS = (
    "t",
    "L",
    "A",
    "Gamma",
    "S",
    "Theta",
    "U",
    "I_X",
    "rho_min",
    "rho_max",
    "cz_ratio_2",
    "cz_ratio_4",
    "cz_ratio_8",
    "lipschitz_lhs",
    "lipschitz_rhs",
    "lipschitz_ratio",
    "pressure_residual",
    "interior_holder",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One sampled row of the scalar run diagnostics.

    CSV column order follows RECORD_COLUMNS; u_accum serializes under the
    header U and holds the accumulated integral of ||grad u||_inf up to t.
    interior_holder is populated for patch scenarios only and serializes to
    an empty cell otherwise. Construction rejects non-finite entries and
    enforces theta >= l.
    """

    t: float
    l: float
    a: float
    gamma: float
    s: float
    theta: float
    u_accum: float
    i_x: float
    rho_min: float
    rho_max: float
    cz_ratio_2: float
    cz_ratio_4: float
    cz_ratio_8: float
    lipschitz_lhs: float
    lipschitz_rhs: float
    lipschitz_ratio: float
    pressure_residual: float
    interior_holder: float | None = None

    def __post_init__(self):
        for name, v in zip(RECORD_COLUMNS, self.as_tuple()):
            if v is None:
                continue
            if not math.isfinite(v):
                raise ValueError(f"diagnostics field {name} is not finite: {v}")
        if self.theta < self.l:
            raise ValueError(
                f"log envelope must dominate: Theta={self.theta} < L={self.l}"
            )

    def as_tuple(self):
        return (
            self.t,
            self.l,
            self.a,
            self.gamma,
            self.s,
            self.theta,
            self.u_accum,
            self.i_x,
            self.rho_min,
            self.rho_max,
            self.cz_ratio_2,
            self.cz_ratio_4,
            self.cz_ratio_8,
            self.lipschitz_lhs,
            self.lipschitz_rhs,
            self.lipschitz_ratio,
            self.pressure_residual,
            self.interior_holder,
        )

    def csv_row(self):
        return ["" if v is None else repr(float(v)) for v in self.as_tuple()]


def timeseries_sample(
    state: StratifiedState,
    ladder: DyadicLadder,
    family: VectorFieldFamily,
    p: float = math.inf,
    q: float = 2.0,
    u_accum: float = 0.0,
    pressure: PressureSolution | None = None,
    elliptic: EllipticConfig | None = None,
    interior_holder: float | None = None,
) -> DiagnosticsRecord:
    """Sample every scalar diagnostic of one state into a record.

    The pressure residual comes from the supplied solution when the caller
    already holds one (the run loop does); otherwise a fresh solve happens
    here, warm-started from the state's cache. S is the worst Holder norm of
    the derivative of omega along a frame member, measured at eps - 1.
    """
    eps = family.epsilon
    u = biot_savart(state.omega)
    gu = grad_velocity(state.omega, u=u)
    l_val = vector_lp(u, p) + max(
        lebesgue_norm(state.omega, q), lebesgue_norm(state.omega, math.inf)
    )
    a_val = float(
        np.max(np.hypot(derivative(state.rho, 0).values(), derivative(state.rho, 1).values()))
    )
    gamma = max(tilde_norm(ladder, x, eps) for x in family.members)
    s_val = max(
        holder_norm(ladder, derive_along(state.omega, x), eps - 1.0)
        for x in family.members
    )
    audit = lipschitz_audit(ladder, state.omega, family, q, eps=eps, grad_u=gu)
    if pressure is None:
        pressure = solve_pressure(
            state.rho, u, elliptic if elliptic is not None else EllipticConfig(),
            initial=state.pi_cache,
        )
    rho_vals = state.rho.values()
    return DiagnosticsRecord(
        t=state.time,
        l=l_val,
        a=a_val,
        gamma=gamma,
        s=s_val,
        theta=theta(l_val, s_val),
        u_accum=u_accum,
        i_x=nondegeneracy(family),
        rho_min=float(np.min(rho_vals)),
        rho_max=float(np.max(rho_vals)),
        cz_ratio_2=cz_ratio(gu, state.omega, 2.0),
        cz_ratio_4=cz_ratio(gu, state.omega, 4.0),
        cz_ratio_8=cz_ratio(gu, state.omega, 8.0),
        lipschitz_lhs=audit.lhs,
        lipschitz_rhs=audit.rhs_shape,
        lipschitz_ratio=audit.ratio,
        pressure_residual=pressure.residual,
        interior_holder=interior_holder,
    )


def patch_interior_holder(
    f: SpectralField,
    markers: FlowMarkers,
    eps: float,
    margin_cells: float = 3.0,
    max_cells: int = 4,
) -> float:
    """Worst finite-difference Holder quotient strictly inside a marker loop.

    Grid points count as interior when their winding number about the closed
    marker polyline is nonzero and their distance to the polyline exceeds
    margin_cells * spacing. Quotients |f(x) - f(y)| / |x - y|^eps run over
    pairs of interior points at most max_cells cells apart. Raises
    InteriorSampleError when fewer than 10 points qualify.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if margin_cells <= 0.0:
        raise ValueError(f"margin must be positive, got {margin_cells}")
    grid = f.grid
    xs, ys = grid.meshgrid()
    winding, dist = kernels.polyline_interior_distance(
        markers.positions[:, 0], markers.positions[:, 1], xs.ravel(), ys.ravel()
    )
    h = grid.spacing
    inside = (winding != 0) & (dist > margin_cells * h)
    count = int(np.sum(inside))
    if count < 10:
        raise InteriorSampleError(
            f"only {count} grid points lie inside the marker loop beyond the "
            f"{margin_cells}-cell margin; need at least 10"
        )
    r = int(max_cells)
    offsets = [
        (di, dj)
        for di in range(0, r + 1)
        for dj in range(-r, r + 1)
        if (di > 0 or dj > 0) and di * di + dj * dj <= r * r
    ]
    return kernels.holder_pair_max(
        f.values(),
        inside.reshape(grid.n, grid.n),
        np.asarray(offsets, dtype=np.int64),
        h,
        eps,
    )
