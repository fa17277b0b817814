"""Explicit monotone time integration of the catalog flows.

Forward Euler with a per-step CFL restriction computed from the current
gradient bound.  Cross-derivative terms in n-D graph flows use the diagonal
stencil splitting so that the update stays order-preserving whenever the
coefficient matrix is diagonally dominant on the data actually probed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .fields import Field, Grid1D, GridND, field_to_csv
from .flows import DegeneracyProfile, FullyNonlinear1D, GraphFlowND, Quasilinear1D

__all__ = [
    "BoundaryCondition",
    "TimeStepPlan",
    "Trajectory",
    "SolverError",
    "BlowUpError",
    "evolve",
    "evolve_pair_ordered",
    "solve_auxiliary_phi",
]


class SolverError(RuntimeError):
    pass


class BlowUpError(SolverError):
    pass


@dataclass(frozen=True)
class BoundaryCondition:
    """periodic | dirichlet(value(x, t)) | neumann_zero."""

    kind: str
    value: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("periodic", "dirichlet", "neumann_zero"):
            raise ValueError(f"unknown bc kind {self.kind!r}")
        if self.kind == "dirichlet" and self.value is None:
            raise ValueError("dirichlet bc needs a value callable")


@dataclass(frozen=True)
class TimeStepPlan:
    t_end: float
    cfl_safety: float = 0.5
    max_grad_clip: float = 100.0

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if not 0.0 < self.cfl_safety < 1.0:
            raise ValueError("cfl_safety must lie in (0, 1)")
        if self.max_grad_clip <= 0:
            raise ValueError("max_grad_clip must be positive")


@dataclass
class Trajectory:
    """Snapshots (time, Field) at the requested output times."""

    snapshots: list = field(default_factory=list)
    dt_stats: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    @property
    def fields(self) -> list:
        return [f for _, f in self.snapshots]

    def append(self, t: float, f: Field) -> None:
        if self.snapshots and t <= self.snapshots[-1][0]:
            raise ValueError("snapshot times must be strictly increasing")
        self.snapshots.append((t, f))

    def export(self, out_dir, flow_id: str = "", bc: str = "", extra: dict | None = None):
        import os

        fields_dir = os.path.join(out_dir, "fields")
        os.makedirs(fields_dir, exist_ok=True)
        for t, f in self.snapshots:
            field_to_csv(f, os.path.join(fields_dir, f"t={t:.6g}.csv"))
        manifest = {
            "flow": flow_id,
            "bc": bc,
            "output_times": [t for t, _ in self.snapshots],
            "dt_stats": self.dt_stats,
        }
        if self.snapshots:
            g = self.snapshots[0][1].grid
            axes = [g] if isinstance(g, Grid1D) else list(g.axes)
            manifest["grid"] = [
                {"x_lo": a.x_lo, "x_hi": a.x_hi, "n_cells": a.n_cells, "topology": a.topology}
                for a in axes
            ]
        if extra:
            manifest.update(extra)
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        return manifest


# --- discrete operators -----------------------------------------------------


def _pad_1d(u: np.ndarray, bc: BoundaryCondition, grid: Grid1D, t: float) -> np.ndarray:
    """Return u extended by one ghost node on each side."""
    if bc.kind == "periodic":
        return np.concatenate([u[-1:], u, u[:1]])
    if bc.kind == "neumann_zero":
        return np.concatenate([u[1:2], u, u[-2:-1]])
    # dirichlet: ghost by linear extrapolation (only derivatives at interior
    # nodes are used; boundary nodes are overwritten each step)
    return np.concatenate([[2 * u[0] - u[1]], u, [2 * u[-1] - u[-2]]])


def _rhs_quasilinear(flow: Quasilinear1D, u, x, t, h, bc, grid):
    up = _pad_1d(u, bc, grid, t)
    ux = (up[2:] - up[:-2]) / (2 * h)
    uxx = (up[2:] - 2 * u + up[:-2]) / h ** 2
    return flow.a(ux, u, x, t) * uxx + flow.b(ux), ux


def _rhs_fully_nonlinear(flow: FullyNonlinear1D, u, x, t, h, bc, grid):
    up = _pad_1d(u, bc, grid, t)
    ux = (up[2:] - up[:-2]) / (2 * h)
    uxx = (up[2:] - 2 * u + up[:-2]) / h ** 2
    return flow.F(uxx, ux, u, x, t), ux


def _pad_nd(u: np.ndarray, bc: BoundaryCondition, axis: int) -> np.ndarray:
    if bc.kind == "periodic":
        lo = np.take(u, [-1], axis=axis)
        hi = np.take(u, [0], axis=axis)
    elif bc.kind == "neumann_zero":
        lo = np.take(u, [1], axis=axis)
        hi = np.take(u, [-2], axis=axis)
    else:
        lo = 2 * np.take(u, [0], axis=axis) - np.take(u, [1], axis=axis)
        hi = 2 * np.take(u, [-1], axis=axis) - np.take(u, [-2], axis=axis)
    return np.concatenate([lo, u, hi], axis=axis)


def _rhs_graph_nd(flow: GraphFlowND, u, t, grids, bc):
    """a^ij(Du) D_ij u with monotone diagonal splitting of cross terms.

    Requires equal spacing on all axes when n > 1 (needed by the diagonal
    stencils).  Returns (rhs, Du) with Du shaped grid + (n,).
    """
    n = u.ndim
    hs = [g.h for g in grids]
    up = u
    for ax in range(n):
        up = _pad_nd(up, bc, ax)
    core = (slice(1, -1),) * n

    def shift(arr, offsets):
        sl = tuple(slice(1 + o, arr.shape[i] - 1 + o) for i, o in enumerate(offsets))
        return arr[sl]

    grads = []
    for ax in range(n):
        off_p = [0] * n
        off_m = [0] * n
        off_p[ax] = 1
        off_m[ax] = -1
        grads.append((shift(up, off_p) - shift(up, off_m)) / (2 * hs[ax]))
    Du = np.stack(grads, axis=-1)

    # coefficient matrices at every node
    vec = getattr(flow, "coeff_field", None)
    if vec is not None:
        A = vec(Du)
    else:
        flat = Du.reshape(-1, n)
        A = np.array([flow.coeff(p) for p in flat]).reshape(u.shape + (n, n))

    second = []
    for ax in range(n):
        off_p = [0] * n
        off_m = [0] * n
        off_p[ax] = 1
        off_m[ax] = -1
        second.append((shift(up, off_p) - 2 * u + shift(up, off_m)) / hs[ax] ** 2)

    if n == 1:
        rhs = A[..., 0, 0] * second[0]
        stab = np.abs(A[..., 0, 0]) / hs[0] ** 2
    else:
        h = hs[0]
        if any(abs(hi - h) > 1e-12 * h for hi in hs):
            raise SolverError("graph flows with n > 1 need equal axis spacing")
        diag_coeff = [A[..., i, i].copy() for i in range(n)]
        rhs = np.zeros_like(u)
        stab = np.zeros_like(u)
        for i in range(n):
            for j in range(i + 1, n):
                aij = A[..., i, j]
                pos = np.maximum(aij, 0.0)
                neg = np.maximum(-aij, 0.0)
                off_pp = [0] * n
                off_pp[i] = 1
                off_pp[j] = 1
                off_pm = [0] * n
                off_pm[i] = 1
                off_pm[j] = -1
                dpp = (shift(up, off_pp) - 2 * u + shift(up, [-o for o in off_pp])) / h ** 2
                dpm = (shift(up, off_pm) - 2 * u + shift(up, [-o for o in off_pm])) / h ** 2
                rhs += pos * dpp + neg * dpm
                stab += (pos + neg) / h ** 2
                diag_coeff[i] -= pos + neg
                diag_coeff[j] -= pos + neg
        for i in range(n):
            rhs += diag_coeff[i] * second[i]
            stab += np.abs(diag_coeff[i]) / h ** 2
    if flow.b is not None:
        rhs = rhs + flow.b(Du)
    return rhs, Du, stab


# --- time stepping ----------------------------------------------------------


def _check_bc_compatible(grid, bc: BoundaryCondition):
    axes = [grid] if isinstance(grid, Grid1D) else list(grid.axes)
    for ax in axes:
        if bc.kind == "periodic" and ax.topology != "periodic":
            raise SolverError("periodic bc on a bounded grid")
        if bc.kind in ("dirichlet", "neumann_zero") and ax.topology != "bounded":
            raise SolverError(f"{bc.kind} bc needs a bounded grid")


def _apply_dirichlet(u: np.ndarray, grid, bc: BoundaryCondition, t: float):
    if bc.kind != "dirichlet":
        return
    if u.ndim == 1:
        x = grid.nodes() if isinstance(grid, Grid1D) else grid.axes[0].nodes()
        u[0] = bc.value(x[0], t)
        u[-1] = bc.value(x[-1], t)
        return
    mesh = grid.meshgrid()
    for ax in range(u.ndim):
        for side in (0, -1):
            idx = [slice(None)] * u.ndim
            idx[ax] = side
            idx = tuple(idx)
            coords = np.stack([m[idx] for m in mesh], axis=-1)
            u[idx] = np.apply_along_axis(lambda c: bc.value(c, t), -1, coords)


class _Stepper:
    """One explicit Euler step, shared by evolve and evolve_pair_ordered."""

    def __init__(self, flow, u0: Field, bc: BoundaryCondition, plan: TimeStepPlan):
        _check_bc_compatible(u0.grid, bc)
        self.flow = flow
        self.grid = u0.grid
        self.bc = bc
        self.plan = plan
        self.scale = max(1.0, float(np.max(np.abs(u0.values))))
        if isinstance(self.grid, Grid1D):
            self.grids = [self.grid]
            self.x = self.grid.nodes()
        else:
            self.grids = list(self.grid.axes)
            self.x = None
        self.n = len(self.grids)
        self.hmin = min(g.h for g in self.grids)

    def rhs_and_dt(self, u: np.ndarray, t: float):
        flow, plan = self.flow, self.plan
        if isinstance(flow, Quasilinear1D):
            h = self.grids[0].h
            rhs, ux = _rhs_quasilinear(flow, u, self.x, t, h, self.bc, self.grid)
            gmax = float(np.max(np.abs(ux)))
            if gmax > plan.max_grad_clip:
                raise BlowUpError(f"|Du| = {gmax:.3g} exceeds max_grad_clip at t = {t:.3g}")
            pprobe = np.linspace(-gmax, gmax, 33)
            amax = float(np.max(flow.a(pprobe, np.zeros_like(pprobe), np.zeros_like(pprobe), t)))
            stab_max = amax / h ** 2
        elif isinstance(flow, FullyNonlinear1D):
            h = self.grids[0].h
            rhs, ux = _rhs_fully_nonlinear(flow, u, self.x, t, h, self.bc, self.grid)
            gmax = float(np.max(np.abs(ux)))
            if gmax > plan.max_grad_clip:
                raise BlowUpError(f"|Du| = {gmax:.3g} exceeds max_grad_clip at t = {t:.3g}")
            up = _pad_1d(u, self.bc, self.grid, t)
            uxx = (up[2:] - 2 * u + up[:-2]) / h ** 2
            dmax = float(np.max(flow.dF_dr(uxx, ux, u, self.x, t)))
            stab_max = dmax / h ** 2
        elif isinstance(flow, GraphFlowND):
            rhs, Du, stab = _rhs_graph_nd(flow, u, t, self.grids, self.bc)
            gmax = float(np.max(np.linalg.norm(Du, axis=-1)))
            if gmax > plan.max_grad_clip:
                raise BlowUpError(f"|Du| = {gmax:.3g} exceeds max_grad_clip at t = {t:.3g}")
            stab_max = float(np.max(stab))
        else:
            raise SolverError(f"unsupported flow type {type(flow)!r}")
        dt = plan.cfl_safety / (2.0 * stab_max) if stab_max > 0 else plan.t_end
        if dt < 1e-14 * plan.t_end:
            raise SolverError(f"CFL time step underflow (dt = {dt:.3g})")
        return rhs, dt

    def advance(self, u: np.ndarray, t: float, dt: float, rhs: np.ndarray) -> np.ndarray:
        unew = u + dt * rhs
        t_new = t + dt
        _apply_dirichlet(unew, self.grid, self.bc, t_new)
        if not np.all(np.isfinite(unew)) or np.max(np.abs(unew)) > 1e6 * self.scale:
            raise BlowUpError(f"solution blow-up at t = {t_new:.3g}")
        return unew


def _prep_output_times(plan: TimeStepPlan, output_times) -> list:
    if output_times is None:
        out = [plan.t_end]
    else:
        out = sorted(float(t) for t in output_times)
    if any(t <= 0 or t > plan.t_end + 1e-12 for t in out):
        raise ValueError("output times must lie in (0, t_end]")
    return out


def evolve(flow, u0: Field, bc: BoundaryCondition, plan: TimeStepPlan,
           output_times: Sequence[float] | None = None) -> Trajectory:
    """Forward-Euler evolution; snapshots at t = 0 and each output time."""
    stepper = _Stepper(flow, u0, bc, plan)
    out = _prep_output_times(plan, output_times)
    traj = Trajectory()
    traj.append(0.0, u0)

    u = u0.values.copy()
    _apply_dirichlet(u, u0.grid, bc, 0.0)
    t = 0.0
    n_steps = 0
    dt_min, dt_max = np.inf, 0.0
    pending = list(out)
    while pending:
        rhs, dt = stepper.rhs_and_dt(u, t)
        target = pending[0]
        dt = min(dt, target - t)
        u = stepper.advance(u, t, dt, rhs)
        t += dt
        n_steps += 1
        dt_min, dt_max = min(dt_min, dt), max(dt_max, dt)
        if t >= target - 1e-14:
            t = target
            traj.append(t, Field(u0.grid, u.copy(), time=t))
            pending.pop(0)
    traj.dt_stats = {"n_steps": n_steps, "dt_min": dt_min, "dt_max": dt_max}
    return traj


def evolve_pair_ordered(flow, u0_low: Field, u0_high: Field, bc: BoundaryCondition,
                        plan: TimeStepPlan, output_times: Sequence[float] | None = None):
    """Evolve an ordered pair with an identical dt sequence.

    Returns (traj_low, traj_high, min_gap_series) where the gap series holds
    min over nodes of (high - low) after every step.
    """
    if np.any(u0_low.values > u0_high.values):
        raise ValueError("initial data not ordered: u0_low > u0_high somewhere")
    s_lo = _Stepper(flow, u0_low, bc, plan)
    s_hi = _Stepper(flow, u0_high, bc, plan)
    out = _prep_output_times(plan, output_times)

    traj_lo, traj_hi = Trajectory(), Trajectory()
    traj_lo.append(0.0, u0_low)
    traj_hi.append(0.0, u0_high)
    ulo = u0_low.values.copy()
    uhi = u0_high.values.copy()
    _apply_dirichlet(ulo, u0_low.grid, bc, 0.0)
    _apply_dirichlet(uhi, u0_high.grid, bc, 0.0)
    gaps = [float(np.min(uhi - ulo))]
    t = 0.0
    pending = list(out)
    while pending:
        rhs_lo, dt_lo = s_lo.rhs_and_dt(ulo, t)
        rhs_hi, dt_hi = s_hi.rhs_and_dt(uhi, t)
        dt = min(dt_lo, dt_hi, pending[0] - t)
        ulo = s_lo.advance(ulo, t, dt, rhs_lo)
        uhi = s_hi.advance(uhi, t, dt, rhs_hi)
        t += dt
        gaps.append(float(np.min(uhi - ulo)))
        if t >= pending[0] - 1e-14:
            t = pending[0]
            traj_lo.append(t, Field(u0_low.grid, ulo.copy(), time=t))
            traj_hi.append(t, Field(u0_high.grid, uhi.copy(), time=t))
            pending.pop(0)
    return traj_lo, traj_hi, np.array(gaps)


def solve_auxiliary_phi(profile: DegeneracyProfile, grid: Grid1D, plan: TimeStepPlan,
                        output_times: Sequence[float] | None = None):
    """Evolve the auxiliary 1-D barrier phi_t = 4 alpha_tilde(|phi'|) phi''.

    Initial data is a steep ramp of width 2h pinned to 0 at z = 0 and to 1
    at the far boundary.  Returns (trajectory, one-sided phi'(0, t) list).
    """
    if grid.topology != "bounded" or grid.x_lo != 0.0:
        raise ValueError("auxiliary phi needs a bounded grid on [0, Z_max]")
    z = grid.nodes()
    u0 = np.clip(z / (2 * grid.h), 0.0, 1.0)
    flow = Quasilinear1D(
        a=lambda p, q, x, t: 4.0 * np.asarray(profile.alpha_tilde(np.abs(p)), dtype=float),
        b=lambda p: np.zeros_like(p),
        A=4.0 * profile.A0,
        P=profile.P,
        lambda_of_K=lambda K: 0.0,
        Lambda_of_K=lambda K: 4.0 * max(
            float(profile.alpha_tilde(s)) for s in np.linspace(0, K, 65)
        ),
        name="auxiliary-phi",
    )
    bc = BoundaryCondition("dirichlet", value=lambda x, t: 0.0 if x <= 0.0 else 1.0)
    traj = evolve(flow, Field(grid, u0), bc, plan, output_times)
    slopes = []
    for t, f in traj.snapshots:
        v = f.values
        slopes.append(float((-3 * v[0] + 4 * v[1] - v[2]) / (2 * grid.h)))
    return traj, slopes
