"""Time evolution of the stratified vorticity system on the torus.

State variables: density rho (transported), scalar vorticity omega, and a
family of striation vector fields X, each advected and stretched by the
flow:

    d_t rho   + u . grad rho   = 0,
    d_t omega + u . grad omega + baroclinic(rho, Pi) = 0,
    d_t X     + u . grad X     = d_X u,

with u recovered from omega by the Biot-Savart law

    u = (d_2, -d_1) (-Lap)^{-1} omega,

which is the right inverse of the scalar curl omega = d_1 u^2 - d_2 u^1
among mean-zero divergence-free fields. The baroclinic torque is the
scalar d_1(1/rho) d_2(Pi) - d_2(1/rho) d_1(Pi); its sign is pinned by the
curl-consistency identity (the curl of the momentum tendency must equal
the vorticity tendency), exposed here as curl_consistency_residual.

Every quadratic nonlinearity is de-aliased (2/3 rule). Time stepping is
classical RK4 with the pressure re-solved at every stage (warm-started
from the previous stage, converged to the configured tolerance each time).
The vorticity mean is projected to zero after every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import (
    GridSpec,
    SpectralField,
    VectorField,
    derivative,
    inv_neg_laplacian,
    pointwise_product,
)
from .pressure import EllipticConfig, PressureSolution, advective_term, solve_pressure

__all__ = [
    "StratifiedState",
    "FlowMarkers",
    "IntegrationError",
    "biot_savart",
    "grad_velocity",
    "baroclinic",
    "rhs",
    "RhsResult",
    "step_rk4",
    "cfl_dt",
    "advance_markers",
    "curl_consistency_residual",
    "curl",
]


class IntegrationError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class StratifiedState:
    """Immutable snapshot of the prognostic variables at one time."""

    time: float
    rho: SpectralField
    omega: SpectralField
    x_fields: tuple
    pi_cache: SpectralField | None = None

    @property
    def grid(self) -> GridSpec:
        return self.omega.grid

    def __post_init__(self):
        if self.rho.grid != self.omega.grid:
            raise ValueError("state fields must share one grid")
        for xf in self.x_fields:
            if xf.grid != self.omega.grid:
                raise ValueError("striation fields must share the state grid")


@dataclass(frozen=True)
class FlowMarkers:
    """Material marker positions, shape (m, 2), wrapped into [0, length)."""

    positions: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2:
            raise ValueError(f"marker array must be (m, 2), got {p.shape}")
        object.__setattr__(self, "positions", p)


def biot_savart(omega: SpectralField) -> VectorField:
    """Mean-zero divergence-free velocity with curl(u) = omega."""
    psi = inv_neg_laplacian(omega)
    u1 = derivative(psi, 1)
    u2 = SpectralField(psi.grid, -derivative(psi, 0).coeffs, real=psi.real)
    return VectorField((u1, u2))


def curl(u: VectorField) -> SpectralField:
    d = derivative(u[1], 0)
    return SpectralField(u.grid, d.coeffs - derivative(u[0], 1).coeffs, real=d.real)


def grad_velocity(omega: SpectralField, u: VectorField | None = None):
    """Velocity-gradient matrix G[i][k] = d_k u^i recovered from omega.

    Spectrally G is omega times rational multipliers xi_i xi_k / |xi|^2;
    implemented through the stream function. The trace vanishes exactly and
    the antisymmetric part carries omega/2 off the diagonal. Passing the
    already-reconstructed velocity skips the Biot-Savart inversion.
    """
    if u is None:
        u = biot_savart(omega)
    return tuple(
        tuple(derivative(u[i], k) for k in range(2)) for i in range(2)
    )


def _inverse_density(rho: SpectralField) -> SpectralField:
    vals = rho.values()
    if float(np.min(vals)) <= 0.0:
        raise ValueError("density must stay positive")
    grid = rho.grid
    import scipy.fft as sfft

    coeffs = sfft.fft2(1.0 / vals) / (grid.n * grid.n)
    return SpectralField(grid, np.where(grid.dealias_mask, coeffs, 0.0), real=True)


def baroclinic(rho: SpectralField, pi: SpectralField) -> SpectralField:
    """Scalar torque d_1(1/rho) d_2(Pi) - d_2(1/rho) d_1(Pi)."""
    inv_rho = _inverse_density(rho)
    t1 = pointwise_product(derivative(inv_rho, 0), derivative(pi, 1))
    t2 = pointwise_product(derivative(inv_rho, 1), derivative(pi, 0))
    return SpectralField(rho.grid, t1.coeffs - t2.coeffs, real=t1.real and t2.real)


def _advect(u: VectorField, f: SpectralField) -> SpectralField:
    """u . grad(f), de-aliased."""
    p0 = pointwise_product(u[0], derivative(f, 0))
    p1 = pointwise_product(u[1], derivative(f, 1))
    return SpectralField(f.grid, p0.coeffs + p1.coeffs, real=p0.real and p1.real)


@dataclass
class RhsResult:
    drho: SpectralField
    domega: SpectralField
    dx_fields: tuple
    pressure: PressureSolution
    u: VectorField
    grad_u: tuple


def rhs(state: StratifiedState, elliptic: EllipticConfig = EllipticConfig()) -> RhsResult:
    """Tendencies of (rho, omega, X) at the state's instant."""
    u = biot_savart(state.omega)
    sol = solve_pressure(state.rho, u, elliptic, initial=state.pi_cache)
    torque = baroclinic(state.rho, sol.pi)

    adv_omega = _advect(u, state.omega)
    domega = SpectralField(state.grid, -adv_omega.coeffs - torque.coeffs, real=True)
    drho = SpectralField(state.grid, -_advect(u, state.rho).coeffs, real=True)

    gu = grad_velocity(state.omega, u=u)
    dxs = []
    for xf in state.x_fields:
        comps = []
        for i in range(2):
            stretch0 = pointwise_product(xf[0], gu[i][0])
            stretch1 = pointwise_product(xf[1], gu[i][1])
            adv = _advect(u, xf[i])
            comps.append(
                SpectralField(
                    state.grid,
                    -adv.coeffs + stretch0.coeffs + stretch1.coeffs,
                    real=True,
                )
            )
        dxs.append(VectorField(comps))
    return RhsResult(
        drho=drho,
        domega=domega,
        dx_fields=tuple(dxs),
        pressure=sol,
        u=u,
        grad_u=gu,
    )


def _axpy(f: SpectralField, g: SpectralField, a: float) -> SpectralField:
    return SpectralField(f.grid, f.coeffs + a * g.coeffs, real=f.real and g.real)


def _shift_state(state: StratifiedState, k: RhsResult, a: float, pi_cache) -> StratifiedState:
    xs = tuple(
        VectorField((_axpy(xf[0], dk[0], a), _axpy(xf[1], dk[1], a)))
        for xf, dk in zip(state.x_fields, k.dx_fields)
    )
    return StratifiedState(
        time=state.time + a,
        rho=_axpy(state.rho, k.drho, a),
        omega=_axpy(state.omega, k.domega, a),
        x_fields=xs,
        pi_cache=pi_cache,
    )


def step_rk4(
    state: StratifiedState,
    dt: float,
    elliptic: EllipticConfig = EllipticConfig(),
    k1: RhsResult | None = None,
) -> tuple[StratifiedState, RhsResult]:
    """One classical RK4 step; returns (new_state, k1_result_used).

    The pressure is solved afresh inside each stage evaluation; the cache
    stored on the new state is the final stage's converged solution (a warm
    start for the next step, never a substitute for a solve). Passing a
    precomputed k1 avoids re-evaluating the first stage when the caller has
    already sampled it (e.g. for CFL or diagnostics).
    """
    if not (dt > 0.0 and np.isfinite(dt)):
        raise ValueError(f"time step must be positive and finite, got {dt}")
    if k1 is None:
        k1 = rhs(state, elliptic)
    k2 = rhs(_shift_state(state, k1, 0.5 * dt, k1.pressure.pi), elliptic)
    k3 = rhs(_shift_state(state, k2, 0.5 * dt, k2.pressure.pi), elliptic)
    k4 = rhs(_shift_state(state, k3, dt, k3.pressure.pi), elliptic)

    def combine(getter):
        a = getter(k1).coeffs + 2.0 * getter(k2).coeffs + 2.0 * getter(k3).coeffs + getter(k4).coeffs
        return a * (dt / 6.0)

    grid = state.grid
    new_omega_coeffs = state.omega.coeffs + combine(lambda k: k.domega)
    new_omega_coeffs[0, 0] = 0.0
    new_rho = SpectralField(grid, state.rho.coeffs + combine(lambda k: k.drho), real=True)
    new_omega = SpectralField(grid, new_omega_coeffs, real=True)
    new_xs = []
    for idx in range(len(state.x_fields)):
        comps = []
        for i in range(2):
            inc = (
                k1.dx_fields[idx][i].coeffs
                + 2.0 * k2.dx_fields[idx][i].coeffs
                + 2.0 * k3.dx_fields[idx][i].coeffs
                + k4.dx_fields[idx][i].coeffs
            ) * (dt / 6.0)
            comps.append(SpectralField(grid, state.x_fields[idx][i].coeffs + inc, real=True))
        new_xs.append(VectorField(comps))

    for name, fld in (("rho", new_rho), ("omega", new_omega)):
        if not np.all(np.isfinite(fld.coeffs)):
            raise IntegrationError(
                f"non-finite values in {name} after step to t={state.time + dt:.6g}",
                diagnostics={"time": state.time + dt, "field": name},
            )

    new_state = StratifiedState(
        time=state.time + dt,
        rho=new_rho,
        omega=new_omega,
        x_fields=tuple(new_xs),
        pi_cache=k4.pressure.pi,
    )
    return new_state, k1


def cfl_dt(
    state: StratifiedState,
    courant: float,
    dt_max: float = np.inf,
    u: VectorField | None = None,
) -> float:
    """Advective CFL step: courant * spacing / max|u|, capped at dt_max."""
    if u is None:
        u = biot_savart(state.omega)
    umax = u.max_norm()
    if umax <= 0.0:
        return float(dt_max)
    return float(min(courant * state.grid.spacing / umax, dt_max))


def _band_restriction(f: SpectralField):
    """Coefficients and integer frequencies restricted to the kept band."""
    n = f.grid.n
    freqs = np.fft.fftfreq(n, d=1.0 / n)
    keep = np.where(np.abs(freqs) <= n / 3.0)[0]
    sub = f.coeffs[np.ix_(keep, keep)]
    return sub, freqs[keep]


def _velocity_at(u: VectorField, pts: np.ndarray) -> np.ndarray:
    """Exact trigonometric-series evaluation of u at off-grid points."""
    grid = u.grid
    scale = 2.0 * np.pi / grid.length
    out = np.empty_like(pts)
    for c in range(2):
        sub, fr = _band_restriction(u[c])
        out[:, c] = _kernels.trig_eval(sub, fr, fr, scale, pts[:, 0], pts[:, 1])
    return out


def advance_markers(markers: FlowMarkers, u: VectorField, dt: float) -> FlowMarkers:
    """RK4 update of marker positions in the frozen velocity field u."""
    p = markers.positions
    length = u.grid.length
    k1 = _velocity_at(u, p)
    k2 = _velocity_at(u, p + 0.5 * dt * k1)
    k3 = _velocity_at(u, p + 0.5 * dt * k2)
    k4 = _velocity_at(u, p + dt * k3)
    new = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return FlowMarkers(positions=np.mod(new, length))


def curl_consistency_residual(
    state: StratifiedState,
    elliptic: EllipticConfig = EllipticConfig(),
    baroclinic_fn=baroclinic,
) -> float:
    """Relative mismatch between two routes to the vorticity tendency.

    Route A: curl of the momentum tendency -(u.grad u) - (1/rho) grad Pi.
    Route B: the vorticity equation -(u.grad omega) - baroclinic_fn(rho, Pi).
    Both use identical de-aliasing, so agreement is at machine precision
    when the baroclinic scalar carries the correct sign; a flipped sign
    shows up at the size of the torque itself.
    """
    u = biot_savart(state.omega)
    sol = solve_pressure(state.rho, u, elliptic, initial=state.pi_cache)
    inv_rho = _inverse_density(state.rho)

    adv = advective_term(u)
    pres = tuple(pointwise_product(inv_rho, derivative(sol.pi, i)) for i in range(2))
    tend = tuple(
        SpectralField(state.grid, -adv[i].coeffs - pres[i].coeffs, real=True) for i in range(2)
    )
    route_a = curl(VectorField(tend))

    torque = baroclinic_fn(state.rho, sol.pi)
    route_b_coeffs = -_advect(u, state.omega).coeffs - torque.coeffs

    num = float(np.sqrt(np.sum(np.abs(route_a.coeffs - route_b_coeffs) ** 2)))
    den = float(np.sqrt(np.sum(np.abs(route_b_coeffs) ** 2)))
    return num / max(den, 1e-300)
