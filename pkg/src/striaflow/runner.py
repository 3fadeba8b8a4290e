"""Run orchestration: the time loop with invariant monitors, a validation
battery over every module contract, and refinement studies in dt and n.

The loop keeps exactly one right-hand-side evaluation per stage: the stage-1
result drives the CFL choice, the diagnostics record, marker advection, and
the accumulated integral of ||grad u||_inf, then feeds the integrator so
nothing is computed twice.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as kernels
from .config import RunConfig, config_digest, parse_config_text, to_ini
from .diagnostics import (
    DiagnosticsRecord,
    LifespanInputs,
    RECORD_COLUMNS,
    VectorFieldFamily,
    grad_sup_norm,
    lifespan_bound,
    nondegeneracy,
    patch_interior_holder,
    striated_norm,
    theta,
    timeseries_sample,
    vector_lp,
)
from .dyadic import bernstein_audit, block, build_ladder, lebesgue_norm
from .dynamics import (
    FlowMarkers,
    IntegrationError,
    StratifiedState,
    advance_markers,
    baroclinic,
    biot_savart,
    cfl_dt,
    curl,
    curl_consistency_residual,
    rhs,
    step_rk4,
)
from .grid import (
    GridSpec,
    SpectralField,
    VectorField,
    check_hermitian,
    derivative,
    field_from_values,
    pointwise_product,
    scale,
    to_spectral,
)
from .paraproduct import paraproduct, remainder
from .pressure import EllipticConfig, energy_audit, solve_pressure
from .scenarios import ScenarioBundle, taylor_green, vortex_patch
from .snapshot_io import read_snapshot, state_from_snapshot, write_snapshot

TELEMETRY_COLUMNS = ("step", "t", "dt", "iterations", "residual")


class InvariantViolation(RuntimeError):
    """A monitored hypothesis failed during time stepping."""


@dataclass
class RunResult:
    state: StratifiedState
    markers: FlowMarkers | None
    records: list
    steps: int
    u_integral: float
    summary: dict
    out_dir: str | None


def build_scenario(cfg: RunConfig) -> ScenarioBundle:
    """Instantiate the configured initial data on its grid."""
    grid = GridSpec(n=cfg.n, length=cfg.length)
    p = cfg.scenario_params
    if cfg.scenario_name == "taylor_green":
        return taylor_green(
            grid,
            amp=p["amp"],
            epsilon=cfg.epsilon,
            marker_radius=p["marker_radius"],
            marker_count=p["marker_count"],
            rho_star=cfg.rho_star,
            rho_star_upper=cfg.rho_star_upper,
        )
    if cfg.scenario_name == "vortex_patch":
        return vortex_patch(
            grid,
            center=(p["center_x"], p["center_y"]),
            semi_axes=(p["semi_axis_x"], p["semi_axis_y"]),
            width_cells=p["width_cells"],
            rho_inside=p["rho_inside"],
            rho_outside=p["rho_outside"],
            amp=p["amp"],
            epsilon=cfg.epsilon,
            marker_count=p["marker_count"],
            rho_star=cfg.rho_star,
            rho_star_upper=cfg.rho_star_upper,
        )
    raise ValueError(f"unknown scenario {cfg.scenario_name!r}")


def _family_of(state: StratifiedState, eps: float) -> VectorFieldFamily:
    return VectorFieldFamily(members=state.x_fields, epsilon=eps)


def _div_x_relative(state: StratifiedState) -> float:
    """max ||div X||_inf over members, relative to max ||grad X||_inf."""
    div_max = 0.0
    grad_max = 0.0
    for xf in state.x_fields:
        div_max = max(div_max, lebesgue_norm(xf.divergence(), math.inf))
        for i in (0, 1):
            for j in (0, 1):
                grad_max = max(grad_max, lebesgue_norm(derivative(xf[i], j), math.inf))
    if grad_max == 0.0:
        return 0.0
    return div_max / grad_max


def _lifespan_inputs(
    cfg: RunConfig, ladder, family: VectorFieldFamily, state: StratifiedState,
    rec0: DiagnosticsRecord,
) -> LifespanInputs:
    rho = state.rho
    grad_rho = VectorField((derivative(rho, 0), derivative(rho, 1)))
    a0 = max(vector_lp(grad_rho, cfg.q), vector_lp(grad_rho, math.inf))
    s0 = striated_norm(ladder, state.omega, family)
    r0 = max(
        striated_norm(ladder, derivative(rho, 0), family),
        striated_norm(ladder, derivative(rho, 1), family),
    )
    return LifespanInputs(
        l0=rec0.l, a0=a0, s0=s0, gamma0=rec0.gamma, r0=r0,
        p=cfg.p, q=cfg.q, delta=cfg.elliptic.delta,
    )


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def run(cfg: RunConfig, out_dir=None, observer=None) -> RunResult:
    """Advance the configured scenario to t_end under invariant monitors.

    observer, when given, is called as observer(step_index, new_state) after
    each accepted step and before the monitors; returning a state replaces
    the stepped one, which is how tests inject faults the monitors must
    catch. Raises InvariantViolation when transported density leaves its
    initial range by more than one part in a thousand of that range, and
    lets IntegrationError from non-finite fields propagate. Partial output
    is still flushed when a monitor trips and out_dir is set.
    """
    bundle = build_scenario(cfg)
    state = bundle.state
    markers = bundle.markers
    eps = bundle.epsilon
    grid = state.grid
    ladder = build_ladder(grid)
    elliptic = cfg.elliptic
    digest = config_digest(cfg)
    is_patch = bundle.boundary_loop

    rho0 = state.rho.values()
    lo0 = float(np.min(rho0))
    hi0 = float(np.max(rho0))
    rho_tol = 1e-3 * (hi0 - lo0) + 1e-12 * max(1.0, abs(hi0))
    div_rel_initial = _div_x_relative(state)
    i_x_initial = nondegeneracy(_family_of(state, eps))

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "config_echo.ini"), "w", encoding="utf-8") as fh:
            fh.write(to_ini(cfg))

    records: list[DiagnosticsRecord] = []
    telemetry: list[tuple] = []
    u_integral = 0.0
    steps = 0
    t_end = cfg.t_end
    t_eps = 1e-12 * max(1.0, t_end)
    t_star = None
    lifespan_in = None

    def _record(st, k1):
        ih = None
        if is_patch and markers is not None:
            ih = patch_interior_holder(
                st.omega, markers, eps, margin_cells=cfg.interior_margin_cells
            )
        rec = timeseries_sample(
            st, ladder, _family_of(st, eps), p=cfg.p, q=cfg.q,
            u_accum=u_integral, pressure=k1.pressure, interior_holder=ih,
        )
        records.append(rec)
        return rec

    def _flush(final_state, tag):
        if out_dir is None:
            return
        _write_csv(
            os.path.join(out_dir, "diagnostics.csv"),
            RECORD_COLUMNS,
            [r.csv_row() for r in records],
        )
        _write_csv(
            os.path.join(out_dir, "pressure_telemetry.csv"),
            TELEMETRY_COLUMNS,
            [
                (s, repr(t), repr(dt), it, repr(res))
                for (s, t, dt, it, res) in telemetry
            ],
        )
        write_snapshot(
            os.path.join(out_dir, "snapshots", tag),
            final_state, markers, config_digest=digest, epsilon=eps,
        )

    try:
        while True:
            k1 = rhs(state, elliptic)
            at_end = state.time >= t_end - t_eps
            if steps % cfg.record_stride == 0 or at_end:
                rec = _record(state, k1)
                if steps == 0:
                    lifespan_in = _lifespan_inputs(
                        cfg, ladder, _family_of(state, eps), state, rec
                    )
                    t_star = lifespan_bound(lifespan_in)
            if (
                out_dir is not None
                and cfg.snapshot_stride > 0
                and steps % cfg.snapshot_stride == 0
                and not at_end
            ):
                write_snapshot(
                    os.path.join(out_dir, "snapshots", f"step_{steps:06d}"),
                    state, markers, config_digest=digest, epsilon=eps,
                )
            if at_end:
                break

            dt = cfl_dt(state, cfg.courant, cfg.dt_max, u=k1.u)
            dt = min(dt, t_end - state.time)
            telemetry.append(
                (steps, state.time, dt, k1.pressure.iterations, k1.pressure.residual)
            )
            u_integral += grad_sup_norm(k1.grad_u) * dt
            new_state, _ = step_rk4(state, dt, elliptic, k1=k1)
            if markers is not None:
                markers = advance_markers(markers, k1.u, dt)
            if observer is not None:
                replaced = observer(steps, new_state)
                if replaced is not None:
                    new_state = replaced

            rv = new_state.rho.values()
            lo = float(np.min(rv))
            hi = float(np.max(rv))
            if lo < lo0 - rho_tol or hi > hi0 + rho_tol:
                raise InvariantViolation(
                    f"density range [{lo:.12g}, {hi:.12g}] at t={new_state.time:.6g} "
                    f"left the initial range [{lo0:.12g}, {hi0:.12g}] by more than "
                    f"{rho_tol:.3g}: transport must preserve density bounds "
                    f"(maximum principle)"
                )
            state = new_state
            steps += 1
    except (InvariantViolation, IntegrationError):
        _flush(state, "last_good")
        raise

    rho_f = state.rho.values()
    summary = {
        "scenario": cfg.scenario_name,
        "n": grid.n,
        "t_final": state.time,
        "steps": steps,
        "u_integral": u_integral,
        "lifespan_bound": t_star,
        "lifespan_inputs": {
            "l0": lifespan_in.l0,
            "a0": lifespan_in.a0,
            "s0": lifespan_in.s0,
            "gamma0": lifespan_in.gamma0,
            "r0": lifespan_in.r0,
            "p": lifespan_in.p,
            "q": lifespan_in.q,
            "delta": lifespan_in.delta,
            "calibration": lifespan_in.calibration,
        },
        "rho_initial_range": [lo0, hi0],
        "rho_final_range": [float(np.min(rho_f)), float(np.max(rho_f))],
        "rho_tolerance": rho_tol,
        "div_x_rel_initial": div_rel_initial,
        "div_x_rel_final": _div_x_relative(state),
        "i_x_initial": i_x_initial,
        "i_x_final": nondegeneracy(_family_of(state, eps)),
        "records": len(records),
        "config_digest": digest,
    }
    if out_dir is not None:
        _flush(state, "final")
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return RunResult(
        state=state, markers=markers, records=records, steps=steps,
        u_integral=u_integral, summary=summary, out_dir=out_dir,
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def diagnose_snapshot(snapshot_dir, p=math.inf, q=2.0) -> DiagnosticsRecord:
    """Recompute the scalar record for a stored state (fresh pressure solve)."""
    bundle = read_snapshot(snapshot_dir)
    state, _ = state_from_snapshot(bundle)
    eps = float(bundle.meta.get("epsilon", 0.5))
    ladder = build_ladder(state.grid)
    family = _family_of(state, eps)
    return timeseries_sample(state, ladder, family, p=p, q=q)


# ---------------------------------------------------------------------------
# validation battery


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rand_field(grid: GridSpec, rng, amplitude=1.0) -> SpectralField:
    vals = rng.standard_normal((grid.n, grid.n)) * amplitude
    from .grid import dealias

    f = dealias(to_spectral(grid, vals))
    return f


def validate(n: int = 64, seed: int = 0, mutations=None) -> list[CheckResult]:
    """Run every module's invariant checks; returns one result per check.

    mutations is a set of fault names used by tests to prove the battery
    detects broken internals: 'flip_baroclinic' reverses the torque sign in
    the consistency check, 'detune_ladder' rescales one dyadic block inside
    the partition check. A healthy build passes everything with mutations
    empty; with a mutation active the corresponding check must fail.
    """
    mutations = set(mutations or ())
    unknown = mutations - {"flip_baroclinic", "detune_ladder"}
    if unknown:
        raise ValueError(f"unknown mutation flags: {sorted(unknown)}")
    grid = GridSpec(n=n)
    ladder = build_ladder(grid)
    rng = np.random.default_rng(seed)
    results: list[CheckResult] = []

    def check(name):
        def wrap(fn):
            try:
                detail = fn()
                results.append(CheckResult(name, True, detail))
            except AssertionError as exc:
                results.append(CheckResult(name, False, str(exc)))
            except Exception as exc:  # noqa: BLE001 - battery reports, not crashes
                results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
            return fn

        return wrap

    @check("grid_transform_roundtrip")
    def _():
        vals = rng.standard_normal((n, n))
        f = to_spectral(grid, vals)
        err = float(np.max(np.abs(f.values() - vals)))
        assert err <= 1e-12, f"roundtrip error {err:.3e}"
        x = grid.axis_coords()
        s = to_spectral(grid, np.sin(x)[:, None] + 0.0 * x[None, :])
        d_err = float(np.max(np.abs(derivative(s, 0).values() - np.cos(x)[:, None])))
        assert d_err <= 1e-12, f"derivative error {d_err:.3e}"
        return f"roundtrip {err:.1e}, d/dx sin {d_err:.1e}"

    @check("spectral_symmetry")
    def _():
        f = _rand_field(grid, rng)
        assert check_hermitian(f), "random real field lost conjugate symmetry"
        return "conjugate symmetry holds"

    @check("ladder_partition")
    def _():
        f = _rand_field(grid, rng)
        total = None
        for j in ladder.blocks():
            b = block(ladder, f, j)
            c = b.coeffs * (1.0 + 1e-6) if ("detune_ladder" in mutations and j == 2) else b.coeffs
            total = c if total is None else total + c
        err = float(np.max(np.abs(total - f.coeffs)))
        assert err <= 1e-12, f"partition defect {err:.3e}"
        return f"partition defect {err:.1e}"

    @check("ladder_orthogonality")
    def _():
        f = _rand_field(grid, rng)
        worst = 0.0
        for j in ladder.blocks():
            for k in ladder.blocks():
                if abs(j - k) < 2:
                    continue
                bjk = block(ladder, block(ladder, f, k), j)
                worst = max(worst, float(np.max(np.abs(bjk.coeffs))))
        assert worst == 0.0, f"distant blocks overlap: {worst:.3e}"
        return "distant blocks exactly disjoint"

    @check("product_decomposition")
    def _():
        worst = 0.0
        for _ in range(5):
            u = _rand_field(grid, rng)
            v = _rand_field(grid, rng)
            total = paraproduct(ladder, u, v)
            total = total.coeffs + paraproduct(ladder, v, u).coeffs
            total = total + remainder(ladder, u, v).coeffs
            err = float(np.max(np.abs(total - pointwise_product(u, v).coeffs)))
            worst = max(worst, err)
        assert worst <= 1e-12, f"decomposition defect {worst:.3e}"
        return f"worst defect over 5 pairs {worst:.1e}"

    @check("band_gradient_envelope")
    def _():
        rows, flagged = bernstein_audit(ladder, samples=20, seed=seed)
        assert not flagged, "gradient/band ratio grows with the band index"
        meds = [r[2] for r in rows]
        return f"ratio medians within [{min(meds):.3f}, {max(meds):.3f}]"

    @check("velocity_reconstruction")
    def _():
        from .grid import zero_mean

        om = zero_mean(_rand_field(grid, rng))
        u = biot_savart(om)
        div = lebesgue_norm(u.divergence(), math.inf)
        assert div <= 1e-13, f"divergence {div:.3e}"
        back = curl(u)
        from .grid import dealias

        err = float(np.max(np.abs(back.coeffs - dealias(om).coeffs)))
        assert err <= 1e-12, f"curl mismatch {err:.3e}"
        xs, ys = grid.meshgrid()
        tg = to_spectral(grid, 2.0 * np.sin(xs) * np.sin(ys))
        utg = biot_savart(tg)
        closed = float(
            max(
                np.max(np.abs(utg[0].values() - np.sin(xs) * np.cos(ys))),
                np.max(np.abs(utg[1].values() + np.cos(xs) * np.sin(ys))),
            )
        )
        assert closed <= 1e-12, f"closed-form cell mismatch {closed:.3e}"
        return f"div {div:.1e}, curl {err:.1e}, cell {closed:.1e}"

    @check("pressure_closed_form")
    def _():
        xs, ys = grid.meshgrid()
        from .grid import constant_field

        rho = constant_field(grid, 1.0)
        u = biot_savart(to_spectral(grid, 2.0 * np.sin(xs) * np.sin(ys)))
        sol = solve_pressure(rho, u, EllipticConfig(tol=1e-12))
        want = (np.cos(2.0 * xs) + np.cos(2.0 * ys)) / 4.0
        err = float(np.max(np.abs(sol.pi.values() - want)))
        assert err <= 1e-8, f"closed-form pressure error {err:.3e}"
        return f"error {err:.1e} in {sol.iterations} iterations"

    @check("pressure_energy_bound")
    def _():
        for _ in range(10):
            rho_vals = 1.5 + 0.8 * np.tanh(_rand_field(grid, rng).values())
            rho = field_from_values(grid, rho_vals)
            u = biot_savart(_rand_field(grid, rng))
            sol = solve_pressure(rho, u, EllipticConfig())
            audit = energy_audit(rho, u, sol.pi)
            assert audit.ok, f"gradient bound fails: {audit.lhs:.6g} > {audit.rhs:.6g}"
        return "10 random states within the gradient bound"

    @check("tendency_consistency")
    def _():
        fn = baroclinic
        if "flip_baroclinic" in mutations:
            fn = lambda rho, pi: scale(baroclinic(rho, pi), -1.0)  # noqa: E731
        worst = 0.0
        for _ in range(3):
            rho_vals = 1.5 + 0.8 * np.tanh(_rand_field(grid, rng).values())
            st = StratifiedState(
                time=0.0,
                rho=field_from_values(grid, rho_vals),
                omega=_rand_field(grid, rng),
                x_fields=(),
            )
            worst = max(worst, curl_consistency_residual(st, baroclinic_fn=fn))
        assert worst <= 1e-10, f"tendency routes disagree by {worst:.3e}"
        return f"worst relative mismatch {worst:.1e}"

    @check("transport_bounds")
    def _():
        b = taylor_green(grid)
        st = b.state
        v0 = st.rho.values()
        lo0, hi0 = float(np.min(v0)), float(np.max(v0))
        tol = 1e-3 * (hi0 - lo0)
        ell = EllipticConfig()
        for _ in range(5):
            st, _k = step_rk4(st, 1e-3, ell)
        v = st.rho.values()
        lo, hi = float(np.min(v)), float(np.max(v))
        assert lo >= lo0 - tol and hi <= hi0 + tol, (
            f"density [{lo:.6g}, {hi:.6g}] escaped [{lo0:.6g}, {hi0:.6g}]"
        )
        return f"overshoot {max(lo0 - lo, hi - hi0):.1e} after 5 steps"

    @check("frame_annihilation")
    def _():
        from .paraproduct import derive_along

        b = vortex_patch(grid)
        worst = 0.0
        for xf in b.state.x_fields:
            worst = max(
                worst,
                lebesgue_norm(derive_along(b.state.omega, xf), math.inf),
            )
        assert worst <= 1e-10, f"frame fails to annihilate the profile: {worst:.3e}"
        return f"directional derivative {worst:.1e}"

    @check("marker_loop")
    def _():
        b = vortex_patch(grid)
        pos = b.markers.positions
        from .scenarios import _ellipse_level

        xs = pos[:, 0]
        ys = pos[:, 1]
        s = _ellipse_level(xs, ys, (3.2, 3.1), (1.3, 0.9))
        err = float(np.max(np.abs(s - 1.0)))
        assert err <= 1e-12, f"markers off the level curve by {err:.3e}"
        return f"level-curve residual {err:.1e}"

    @check("lifespan_oracle")
    def _():
        base = LifespanInputs(l0=1.0, a0=0.0, s0=1.0, gamma0=0.0, r0=0.0)
        want = 1.0 / (9.0 * math.log(math.e + 1.0))
        got = lifespan_bound(base)
        err = abs(got - want)
        assert err <= 1e-12, f"worked value off by {err:.3e}"
        for name in ("a0", "gamma0", "r0"):
            bumped = replace(base, **{name: 2.0})
            assert lifespan_bound(bumped) < got, f"bound not decreasing in {name}"
        return f"worked value {got:.12g}"

    @check("log_envelope_floor")
    def _():
        for _ in range(100):
            l = float(rng.uniform(0.0, 5.0))
            s = float(rng.uniform(0.0, 50.0))
            th = theta(l, s)
            assert th >= l, f"theta {th} fell below l {l}"
        assert theta(0.0, 3.0) == 0.0, "theta(0, s) must vanish"
        return "theta >= l on 100 samples"

    @check("snapshot_roundtrip")
    def _():
        import tempfile

        b = taylor_green(grid)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "snap")
            write_snapshot(path, b.state, b.markers, config_digest="check", epsilon=b.epsilon)
            back = read_snapshot(path)
            same = np.array_equal(back.arrays["rho"], b.state.rho.values())
            same &= np.array_equal(back.arrays["omega"], b.state.omega.values())
            same &= np.array_equal(back.markers, b.markers.positions)
            assert same, "stored arrays differ from the state"
        return "arrays stored and reloaded bitwise"

    @check("config_echo_roundtrip")
    def _():
        cfg = parse_config_text("[scenario]\nname = vortex_patch\n")
        again = parse_config_text(to_ini(cfg))
        assert cfg == again, "echo changed the resolved configuration"
        assert config_digest(cfg) == config_digest(again), "digest unstable"
        return "echo and digest stable"

    @check("determinism")
    def _():
        cfg = RunConfig(
            n=32, t_end=3e-3, dt_max=1e-3, record_stride=1,
            scenario_name="taylor_green",
            scenario_params={"amp": 0.2, "marker_radius": 0.5, "marker_count": 16},
        )
        rows_a = [r.csv_row() for r in run(cfg).records]
        rows_b = [r.csv_row() for r in run(cfg).records]
        assert rows_a == rows_b, "two identical runs produced different records"
        return f"{len(rows_a)} records reproduced bitwise"

    @check("kernel_backend_parity")
    def _():
        from ._kernels import fallback

        if kernels.backend_name() != "compiled":
            return "numpy backend active, nothing to compare"
        vals = rng.standard_normal((24, 24))
        interior = np.zeros((24, 24), dtype=bool)
        interior[6:18, 6:18] = True
        offsets = np.array(
            [(di, dj) for di in range(0, 4) for dj in range(-3, 4)
             if (di > 0 or dj > 0) and di * di + dj * dj <= 9],
            dtype=np.int64,
        )
        a = kernels.holder_pair_max(vals, interior, offsets, 0.1, 0.5)
        b = fallback.holder_pair_max(
            vals, np.ascontiguousarray(interior, dtype=np.uint8), offsets, 0.1, 0.5
        )
        assert a == b, f"holder kernel mismatch: {a!r} vs {b!r}"
        return "compiled and python kernels agree bitwise"

    return results


# ---------------------------------------------------------------------------
# refinement studies


def _l2_diff(a: SpectralField, b: SpectralField) -> float:
    d = a.values() - b.values()
    return float(np.sqrt(np.mean(d * d)))


def _advance_fixed(state: StratifiedState, dt: float, steps: int,
                   elliptic: EllipticConfig) -> StratifiedState:
    for _ in range(steps):
        state, _ = step_rk4(state, dt, elliptic)
    return state


def _restrict_field(f: SpectralField, coarse: GridSpec) -> SpectralField:
    """Spectral projection onto the coarse grid's de-aliased band."""
    fine = f.grid
    if coarse.length != fine.length:
        raise ValueError("restriction requires matching box lengths")
    if coarse.n >= fine.n:
        raise ValueError("restriction target must be strictly coarser")
    kmax = int(coarse.n / 3.0)
    ks = np.concatenate([np.arange(0, kmax + 1), np.arange(-kmax, 0)])
    fi = np.mod(ks, fine.n)
    ci = np.mod(ks, coarse.n)
    out = np.zeros((coarse.n, coarse.n), dtype=np.complex128)
    out[np.ix_(ci, ci)] = f.coeffs[np.ix_(fi, fi)]
    return SpectralField(coarse, out, real=f.real)


def _restrict_state(state: StratifiedState, coarse: GridSpec) -> StratifiedState:
    return StratifiedState(
        time=state.time,
        rho=_restrict_field(state.rho, coarse),
        omega=_restrict_field(state.omega, coarse),
        x_fields=tuple(
            VectorField((
                _restrict_field(xf[0], coarse),
                _restrict_field(xf[1], coarse),
            ))
            for xf in state.x_fields
        ),
    )


def temporal_refinement(cfg: RunConfig, levels: int = 3, t_horizon: float = 0.2,
                        coarse_steps: int = 5) -> dict:
    """Halve a fixed dt repeatedly; estimate the integrator's order.

    The order comes from ratios of successive solution differences at the
    shared horizon, so no exact solution is needed; a fourth-order scheme
    should land near 4. The elliptic tolerance is tightened so solver noise
    sits well below the smallest expected difference.
    """
    if levels < 3:
        raise ValueError(f"temporal study needs >= 3 levels, got {levels}")
    bundle = build_scenario(cfg)
    elliptic = EllipticConfig(
        tol=min(cfg.elliptic.tol, 1e-12),
        max_iter=max(cfg.elliptic.max_iter, 800),
        method=cfg.elliptic.method,
        delta=cfg.elliptic.delta,
    )
    dts = []
    finals = []
    for k in range(levels):
        m = coarse_steps * 2**k
        dt = t_horizon / m
        finals.append(_advance_fixed(bundle.state, dt, m, elliptic))
        dts.append(dt)
    diffs_om = [
        _l2_diff(finals[k].omega, finals[k + 1].omega) for k in range(levels - 1)
    ]
    diffs_rho = [
        _l2_diff(finals[k].rho, finals[k + 1].rho) for k in range(levels - 1)
    ]
    orders = []
    for d in (diffs_om, diffs_rho):
        for k in range(len(d) - 1):
            if d[k] > 0.0 and d[k + 1] > 0.0:
                orders.append(math.log2(d[k] / d[k + 1]))
    monotone = all(
        d[k + 1] < d[k] for d in (diffs_om, diffs_rho) for k in range(len(d) - 1)
    )
    order = min(orders) if orders else float("nan")
    flag = (not monotone) or (not orders) or not (3.0 <= order <= 5.0)
    return {
        "dt": dts,
        "diffs_omega": diffs_om,
        "diffs_rho": diffs_rho,
        "orders": orders,
        "order": order,
        "monotone": monotone,
        "flag": flag,
    }


def spatial_refinement(cfg: RunConfig, levels: int = 3, t_horizon: float = 0.2,
                       dt: float = 0.01) -> dict:
    """Evolve spectrally projected copies of one initial state at n, 2n, ...

    The initial data lives on the finest grid and each coarser level gets
    its band-limited projection, so all levels solve the same problem. The
    error of a level is the L2 gap to the projected finest solution; each
    doubling should shrink it sharply (spectral accuracy), and the report
    flags ratios that fail to reach one order of magnitude.
    """
    if levels < 2:
        raise ValueError(f"spatial study needs >= 2 levels, got {levels}")
    n_list = [cfg.n * 2**k for k in range(levels + 1)]
    fine_cfg = replace(cfg, n=n_list[-1])
    bundle = build_scenario(fine_cfg)
    steps = int(round(t_horizon / dt))
    elliptic = cfg.elliptic
    fine_final = _advance_fixed(bundle.state, dt, steps, elliptic)

    errors_om = []
    errors_rho = []
    for n in n_list[:-1]:
        coarse = GridSpec(n=n, length=cfg.length)
        start = _restrict_state(bundle.state, coarse)
        final = _advance_fixed(start, dt, steps, elliptic)
        errors_om.append(_l2_diff(final.omega, _restrict_field(fine_final.omega, coarse)))
        errors_rho.append(_l2_diff(final.rho, _restrict_field(fine_final.rho, coarse)))
    ratios = [
        errors_om[k] / errors_om[k + 1] if errors_om[k + 1] > 0.0 else math.inf
        for k in range(len(errors_om) - 1)
    ]
    flag = any(r < 10.0 for r in ratios) or any(
        errors_om[k + 1] > errors_om[k] for k in range(len(errors_om) - 1)
    )
    return {
        "n": n_list[:-1],
        "reference_n": n_list[-1],
        "errors_omega": errors_om,
        "errors_rho": errors_rho,
        "ratios": ratios,
        "flag": flag,
    }


def converge(cfg: RunConfig, levels: int = 3, out_dir=None) -> dict:
    """Run both refinement studies and optionally write their tables."""
    temporal = temporal_refinement(cfg, levels=max(levels, 3))
    spatial = spatial_refinement(cfg, levels=max(levels - 1, 2))
    report = {"temporal": temporal, "spatial": spatial,
              "flag": temporal["flag"] or spatial["flag"]}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        rows = []
        for k, dt in enumerate(temporal["dt"]):
            dom = temporal["diffs_omega"][k] if k < len(temporal["diffs_omega"]) else ""
            drh = temporal["diffs_rho"][k] if k < len(temporal["diffs_rho"]) else ""
            rows.append(("temporal", repr(dt), _r(dom), _r(drh)))
        for k, n in enumerate(spatial["n"]):
            rows.append(
                ("spatial", n, _r(spatial["errors_omega"][k]), _r(spatial["errors_rho"][k]))
            )
        _write_csv(
            os.path.join(out_dir, "convergence.csv"),
            ("study", "parameter", "err_omega", "err_rho"),
            rows,
        )
        with open(os.path.join(out_dir, "convergence.json"), "w", encoding="utf-8") as fh:
            json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


def _r(v):
    return repr(float(v)) if v != "" else ""
