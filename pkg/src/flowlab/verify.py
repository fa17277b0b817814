"""Estimate checks: each bound becomes a function from trajectories and
barriers to a VerificationReport.

Checks are pure and deterministic; defects are signed (negative means the
bound holds with margin) and ``passed`` is always max_defect <= tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import erf as _erf

from . import barriers
from .fields import Field, Grid1D, gradient
from .reports import VerificationReport

__all__ = [
    "ModulusOfContinuity",
    "lipschitz_modulus",
    "holder_modulus",
    "PreconditionError",
    "check_comparison",
    "double_coordinate_defect",
    "gradient_bound_check",
    "displacement_check",
    "count_intersections",
    "intersection_monotonicity",
    "heat_zero_counting_gradient",
    "barrier_family_gradient",
    "gradient_function",
    "eh_bound_check",
    "convergence_to_initial_data",
    "fit_exponent",
]


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class ModulusOfContinuity:
    """Concave continuous omega with omega(0) = 0, plus its left derivative."""

    omega: Callable[[float], float]
    left_derivative: Callable[[float], float]

    def probe(self, r_samples) -> None:
        """Sampled sanity check: nonnegative, nondecreasing, midpoint-concave."""
        r = np.sort(np.asarray(r_samples, dtype=float))
        vals = np.array([self.omega(ri) for ri in r])
        if np.any(vals < -1e-12):
            raise ValueError("omega must be nonnegative")
        if np.any(np.diff(vals) < -1e-12):
            raise ValueError("omega must be nondecreasing")
        mid = np.array([self.omega(0.5 * (a + b)) for a, b in zip(r[:-1], r[1:])])
        if np.any(mid + 1e-12 < 0.5 * (vals[:-1] + vals[1:])):
            raise ValueError("omega must be concave")


def lipschitz_modulus(L: float) -> ModulusOfContinuity:
    return ModulusOfContinuity(lambda r: L * r, lambda r: L)


def holder_modulus(alpha: float, C: float = 1.0) -> ModulusOfContinuity:
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    return ModulusOfContinuity(
        lambda r: C * r ** alpha,
        lambda r: C * alpha * r ** (alpha - 1.0) if r > 0 else np.inf,
    )


def fit_exponent(times, values) -> float:
    """Least-squares slope of log(values) against log(times)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(t <= 0) or np.any(v <= 0):
        raise ValueError("exponent fit needs positive times and values")
    return float(np.polyfit(np.log(t), np.log(v), 1)[0])


# --- ordering / comparison --------------------------------------------------


def check_comparison(min_gap_series, scale: float = 1.0) -> VerificationReport:
    """Defect = -min over steps of the ordered-pair gap; tolerance
    1e-12 * scale absorbs roundoff of the identical-step updates."""
    gaps = np.asarray(min_gap_series, dtype=float)
    i = int(np.argmin(gaps))
    return VerificationReport(
        check_id="comparison",
        max_defect=float(-gaps[i]),
        tolerance=1e-12 * scale,
        witness={"step": i, "min_gap": float(gaps[i])},
        metadata={"n_steps": int(gaps.size), "scale": scale},
    )


# --- double-coordinate estimate ---------------------------------------------


def double_coordinate_defect(traj, b: barriers.PsiBarrier, M: float,
                             region: str = "full",
                             t_window=None) -> VerificationReport:
    """Max over periodic node pairs and snapshots of
    Z = u(y,t) - u(x,t) - phi(|y-x|, t) with phi(z,t) = 2M psi(z/2M, t/4M^2).

    Out-of-range barrier arguments clamp phi to 2M (conservative).  Region
    "G" restricts pair distances to |y-x| <= z_M(t).  Tolerance is
    10 h (1 + max |phi'|) over the probed region.
    """
    if region not in ("full", "G"):
        raise ValueError("region must be 'full' or 'G'")
    grid = traj.fields[0].grid
    if not isinstance(grid, Grid1D) or grid.topology != "periodic":
        raise PreconditionError("double-coordinate check needs a periodic 1-D grid")
    h = grid.h
    n = grid.n_nodes
    period = grid.x_hi - grid.x_lo

    worst = -np.inf
    witness = {}
    max_slope = 0.0
    for t, f in traj.snapshots:
        if t <= 0:
            continue
        if t_window is not None and not (t_window[0] <= t <= t_window[1]):
            continue
        u = f.values
        lags = np.arange(1, n)
        dists = np.minimum(lags, n - lags) * h
        if region == "G":
            zm = float(barriers.z_M(t, M, b.c))
            keep = dists <= zm
            lags, dists = lags[keep], dists[keep]
        if lags.size == 0:
            continue
        phi_vals = barriers.phi_double_coordinate(b, dists, t, M)
        # slope of phi sampled at the probed distances, for the tolerance
        zs = np.linspace(0.5 * h, max(float(np.max(dists)), 2.0 * h), 256)
        pv = barriers.phi_double_coordinate(b, zs, t, M)
        max_slope = max(max_slope, float(np.max(np.abs(np.gradient(pv, zs)))))
        for lag, d, pval in zip(lags, dists, phi_vals):
            diff = np.roll(u, -lag) - u
            Z = np.max(diff) - pval
            if Z > worst:
                worst = float(Z)
                witness = {
                    "t": float(t),
                    "distance": float(d),
                    "max_pair_diff": float(np.max(diff)),
                    "phi": float(pval),
                }
    tol = 10.0 * h * (1.0 + max_slope)
    return VerificationReport(
        check_id=f"double-coordinate:{region}",
        max_defect=worst if np.isfinite(worst) else 0.0,
        tolerance=tol,
        witness=witness,
        metadata={"M": M, "c": b.c, "h": h, "period": period,
                  "max_phi_slope": max_slope},
    )


def gradient_bound_check(traj, bound: Callable[[float], float],
                         grid_tol: float = 0.0,
                         t_window=None) -> VerificationReport:
    """Max over snapshots of (max |Du|(t) - bound(t))."""
    worst = -np.inf
    witness = {}
    for t, f in traj.snapshots:
        if t <= 0:
            continue
        if t_window is not None and not (t_window[0] <= t <= t_window[1]):
            continue
        g = np.linalg.norm(gradient(f), axis=-1)
        defect = float(np.max(g) - bound(t))
        if defect > worst:
            worst = defect
            witness = {"t": float(t), "max_grad": float(np.max(g)),
                       "bound": float(bound(t))}
    return VerificationReport(
        check_id="gradient-bound",
        max_defect=worst if np.isfinite(worst) else 0.0,
        tolerance=grid_tol,
        witness=witness,
        metadata={"t_window": list(t_window) if t_window else None},
    )


# --- displacement estimates -------------------------------------------------


def displacement_check(traj, kind: str, *, Lambda_of_K=None, L=None, h=0.0,
                       alpha=None, m=0, omega: ModulusOfContinuity = None,
                       half_height=None, jump=0.0,
                       grid_tol: float = 0.0) -> VerificationReport:
    """Displacement bounds for non-smooth initial data.

    kind "lipschitz": pointwise u <= erf-cone barrier above L|x - h|.
    kind "step": for x < jump, u <= min(4c/|x-jump| sqrt(Lambda t/pi) - c, c)
      with c = half_height and Lambda = Lambda_of_K(2c/|x-jump|).
    kind "holder": apex value u(h, t) fitted exponent vs alpha/(2+m(1-alpha)).
    kind "modulus": apex value u(h, t) <= inf_k [2 omega'(k) sqrt(Lambda t/pi)
      - omega'(k) k + omega(k)].
    """
    grid = traj.fields[0].grid
    if not isinstance(grid, Grid1D):
        raise PreconditionError("displacement checks are one-dimensional")
    x = grid.nodes()

    if kind == "lipschitz":
        if L is None or Lambda_of_K is None:
            raise ValueError("lipschitz kind needs L and Lambda_of_K")
        cone = barriers.ConeBarrier(L=L, h=h, Lambda=float(Lambda_of_K(L)))
        worst, witness = -np.inf, {}
        for t, f in traj.snapshots:
            if t <= 0:
                continue
            v = barriers.cone_barrier_eval(cone, x, t)
            d = f.values - v
            i = int(np.argmax(d))
            if d[i] > worst:
                worst = float(d[i])
                witness = {"t": float(t), "x": float(x[i]), "u": float(f.values[i]),
                           "barrier": float(v[i])}
        return VerificationReport("displacement:lipschitz", worst, grid_tol,
                                  witness, {"L": L, "h": h})

    if kind == "step":
        if half_height is None or Lambda_of_K is None:
            raise ValueError("step kind needs half_height and Lambda_of_K")
        c = float(half_height)
        worst, witness = -np.inf, {}
        for t, f in traj.snapshots:
            if t <= 0:
                continue
            left = x < jump
            xi = np.abs(x[left] - jump)
            Lam = np.array([float(Lambda_of_K(2.0 * c / d)) for d in xi])
            env = np.minimum(4.0 * c / xi * np.sqrt(Lam * t / np.pi) - c, c)
            d = f.values[left] - env
            i = int(np.argmax(d))
            if d[i] > worst:
                worst = float(d[i])
                witness = {"t": float(t), "x": float(x[left][i]),
                           "envelope": float(env[i])}
        return VerificationReport("displacement:step", worst, grid_tol,
                                  witness, {"half_height": c, "jump": jump})

    if kind == "holder":
        if alpha is None:
            raise ValueError("holder kind needs alpha")
        i0 = int(np.argmin(np.abs(x - h)))
        times = [t for t, _ in traj.snapshots if t > 0]
        vals = [abs(f.values[i0] - traj.fields[0].values[i0])
                for t, f in traj.snapshots if t > 0]
        fitted = fit_exponent(times, vals)
        target = alpha / (2.0 + m * (1.0 - alpha))
        defect = abs(fitted - target) / target
        return VerificationReport(
            "displacement:holder", defect, 0.10,
            {"fitted_exponent": fitted, "target": target},
            {"alpha": alpha, "m": m, "apex": float(x[i0])})

    if kind == "modulus":
        if omega is None or Lambda_of_K is None:
            raise ValueError("modulus kind needs omega and Lambda_of_K")
        i0 = int(np.argmin(np.abs(x - h)))
        worst, witness = -np.inf, {}
        k_max = float(x[-1] - x[0])
        for t, f in traj.snapshots:
            if t <= 0:
                continue

            def envelope(k):
                dk = omega.left_derivative(k)
                lam = float(Lambda_of_K(dk)) if np.isfinite(dk) else 0.0
                return (2.0 * dk * np.sqrt(lam * t / np.pi)
                        - dk * k + omega.omega(k)) if np.isfinite(dk) else np.inf

            res = minimize_scalar(envelope, bounds=(1e-8 * k_max, k_max),
                                  method="bounded")
            ct = min(float(res.fun), envelope(k_max))
            d = abs(f.values[i0] - traj.fields[0].values[i0]) - ct
            if d > worst:
                worst = float(d)
                witness = {"t": float(t), "c_t": ct,
                           "k_star": float(res.x)}
        return VerificationReport("displacement:modulus", worst, grid_tol,
                                  witness, {"apex": float(x[i0])})

    raise ValueError(f"unknown displacement kind {kind!r}")


# --- intersection counting --------------------------------------------------


def _strict_signs(w: np.ndarray, eps_tie: float) -> np.ndarray:
    s = np.where(w > eps_tie, 1, np.where(w < -eps_tie, -1, 0))
    return s


def count_intersections(u: Field, phi: Field, eps_tie: float = 1e-9) -> int:
    """Sign changes of w = u - phi along the grid.

    Samples with |w| <= eps_tie inherit the previous strict sign (tie rule);
    bounded grids require strict signs at both boundary nodes.
    """
    if u.values.shape != phi.values.shape:
        raise PreconditionError("fields live on different grids")
    grid = u.grid
    if not isinstance(grid, Grid1D):
        raise PreconditionError("intersection counting is one-dimensional")
    w = u.values - phi.values
    s = _strict_signs(w, eps_tie)
    if grid.topology == "bounded" and (s[0] == 0 or s[-1] == 0):
        raise PreconditionError(
            "intersection on the boundary: |u - phi| <= eps_tie at an endpoint")
    strict = s[s != 0]
    if strict.size == 0:
        return 0
    changes = int(np.sum(strict[1:] != strict[:-1]))
    if grid.topology == "periodic":
        changes += int(strict[-1] != strict[0])
    return changes


def intersection_monotonicity(traj_u, traj_phi,
                              eps_tie: float = 1e-9) -> VerificationReport:
    """Pass iff the intersection count never increases across snapshots."""
    times_u = [t for t, _ in traj_u.snapshots]
    times_p = [t for t, _ in traj_phi.snapshots]
    if times_u != times_p:
        raise PreconditionError("trajectories have different snapshot times")
    counts = [count_intersections(fu, fp, eps_tie)
              for (_, fu), (_, fp) in zip(traj_u.snapshots, traj_phi.snapshots)]
    rises = np.diff(counts)
    worst = int(np.max(rises)) if rises.size else 0
    i = int(np.argmax(rises)) if rises.size else 0
    return VerificationReport(
        check_id="intersection-monotonicity",
        max_defect=float(max(worst, 0)),
        tolerance=0.0,
        witness={"t_before": times_u[i], "t_after": times_u[i + 1] if rises.size else None,
                 "counts": counts},
        metadata={"eps_tie": eps_tie},
    )


# --- zero-counting gradient bounds ------------------------------------------


def heat_zero_counting_gradient(traj, M: float, c: float,
                                rel_tol: float = 0.02,
                                gradient_of: Callable = None,
                                tail_floor: float = 0.0) -> VerificationReport:
    """For the heat flow u_t = u_xx/(4c) on a bounded interval with |u| < M:
    u_x <= 2N sqrt(c/(pi t)) exp(-inverf(u/N)^2), N = M / erf(sqrt(c) d / (2 sqrt t))
    with d the distance to the boundary.  Defect is relative to the bound.

    ``gradient_of(x, t)`` optionally supplies an analytic u_x; the default
    discrete gradient has a large relative error deep in the exponential
    tail, where the bound is near-equality.  With discrete gradients set
    ``tail_floor`` > 0 to skip nodes whose bound is below tail_floor times
    the per-snapshot peak bound (skipped count goes to the metadata).
    """
    grid = traj.fields[0].grid
    if not isinstance(grid, Grid1D) or grid.topology != "bounded":
        raise PreconditionError("heat zero-counting check needs a bounded 1-D grid")
    x = grid.nodes()
    dist = np.minimum(x - grid.x_lo, grid.x_hi - x)
    interior = slice(1, -1)

    worst, witness = -np.inf, {}
    n_saturated = 0
    n_tail_skipped = 0
    for t, f in traj.snapshots:
        if t <= 0:
            continue
        u = f.values
        if np.any(np.abs(u) > M * (1.0 + 1e-12)):
            raise PreconditionError(f"|u| > M at t = {t:g}")
        ux = gradient_of(x, t) if gradient_of is not None else gradient(f)[..., 0]
        N = M / _erf(np.sqrt(c) * dist[interior] / (2.0 * np.sqrt(t)))
        ratio = u[interior] / N
        # nodes where u/N rounds to +-1 have bound and gradient both
        # vanishing; the relative defect is ill-defined there
        live = np.abs(ratio) < 1.0 - 1e-12
        n_saturated += int(np.sum(~live))
        if not np.any(live):
            continue
        bound = (2.0 * N[live] * np.sqrt(c / (np.pi * t))
                 * np.exp(-barriers.inverf(ratio[live]) ** 2))
        if tail_floor > 0.0:
            keep = bound >= tail_floor * float(np.max(bound))
            n_tail_skipped += int(np.sum(~keep))
            if not np.any(keep):
                continue
        else:
            keep = slice(None)
        rel = (ux[interior][live][keep] - bound[keep]) / bound[keep]
        i = int(np.argmax(rel))
        if rel[i] > worst:
            worst = float(rel[i])
            witness = {"t": float(t), "x": float(x[interior][live][keep][i]),
                       "u_x": float(ux[interior][live][keep][i]),
                       "bound": float(bound[keep][i])}
    return VerificationReport(
        check_id="heat-zero-counting",
        max_defect=worst if np.isfinite(worst) else 0.0,
        tolerance=rel_tol,
        witness=witness,
        metadata={"M": M, "c": c, "relative": True,
                  "n_saturated": n_saturated, "n_tail_skipped": n_tail_skipped},
    )


def barrier_family_gradient(traj_u, flow, M: float, d: float,
                            probe_times: Optional[Sequence[float]] = None,
                            grid_tol: float = 0.0,
                            width_factor: float = 8.0) -> VerificationReport:
    """Compare u_x against the gradient of a matched-height evolved step
    barrier.

    One reference barrier (step at 0 on a wide interval) is evolved with the
    same flow; translates phi^s(x) = phi^0(x - s) supply the family, and the
    member through each probe point is found by inverting the monotone
    profile.  Probes whose height falls outside the profile range are flagged
    inconclusive in the metadata rather than failed.
    """
    from .solver import BoundaryCondition, TimeStepPlan, evolve

    grid = traj_u.fields[0].grid
    if not isinstance(grid, Grid1D):
        raise PreconditionError("barrier-family check is one-dimensional")
    if probe_times is None:
        probe_times = [t for t, _ in traj_u.snapshots if t > 0]
    probe_times = sorted(probe_times)
    t_end = probe_times[-1]

    W = width_factor * max(d, 1.0)
    bgrid = Grid1D(-W, W, 1024, "bounded")
    bx = bgrid.nodes()
    u0 = Field(bgrid, M * np.sign(bx + 1e-300))
    bc = BoundaryCondition("dirichlet", value=lambda xx, tt: M if xx > 0 else -M)
    btraj = evolve(flow, u0, bc, TimeStepPlan(t_end=t_end), probe_times)
    profiles = {t: f.values for t, f in btraj.snapshots if t > 0}

    x = grid.nodes()
    worst, witness = -np.inf, {}
    inconclusive = 0
    snap = {t: f for t, f in traj_u.snapshots}
    for t in probe_times:
        if t not in snap or t not in profiles:
            continue
        u = snap[t].values
        ux = gradient(snap[t])[..., 0]
        prof = profiles[t]
        prof_x = np.gradient(prof, bx)
        lo, hi = prof[1], prof[-2]
        for i in range(1, len(x) - 1):
            if not (lo < u[i] < hi):
                inconclusive += 1
                continue
            # profile is monotone increasing: invert by interpolation
            xi = np.interp(u[i], prof, bx)
            slope = np.interp(xi, bx, prof_x)
            defect = float(ux[i] - slope)
            if defect > worst:
                worst = defect
                witness = {"t": float(t), "x": float(x[i]), "u": float(u[i]),
                           "barrier_slope": float(slope)}
    return VerificationReport(
        check_id="barrier-family-gradient",
        max_defect=worst if np.isfinite(worst) else 0.0,
        tolerance=grid_tol,
        witness=witness,
        metadata={"M": M, "d": d, "inconclusive_probes": inconclusive},
    )


# --- gradient function and graph-flow bounds --------------------------------


def gradient_function(f: Field) -> Field:
    """v = sqrt(1 + |Du|^2), pointwise from the discrete gradient."""
    g = gradient(f)
    return f.with_values(np.sqrt(1.0 + np.sum(g ** 2, axis=-1)))


def eh_bound_check(traj, M: float, kind: str = "periodic", *, c: float,
                   q: float = 2.0, R: float = None, T_prime: float = np.inf,
                   t_min: float = 0.0, grid_tol: float = 0.0) -> VerificationReport:
    """Gradient-function bounds for graph mean curvature flow.

    kind "periodic": v <= t^(1/2) exp(c (|u| - 2M)^2 / (4t)).
    kind "interior": v <= t^(q/2) exp(c q (u + 2M)^2 / (4t)) / eta with the
    localizer eta = R^2 - 2nt - |x|^2 + u^2 required positive at probes.
    """
    grid = traj.fields[0].grid
    n = traj.fields[0].ndim
    worst, witness = -np.inf, {}
    for t, f in traj.snapshots:
        if t <= 0 or t > T_prime or t < t_min:
            continue
        v = gradient_function(f).values
        u = f.values
        if kind == "periodic":
            bound = np.sqrt(t) * np.exp(c * (np.abs(u) - 2.0 * M) ** 2 / (4.0 * t))
        elif kind == "interior":
            if R is None:
                raise ValueError("interior kind needs R")
            if isinstance(grid, Grid1D):
                xx2 = grid.nodes() ** 2
            else:
                xx2 = sum(m ** 2 for m in grid.meshgrid())
            eta = R ** 2 - 2.0 * n * t - xx2 + u ** 2
            mask = eta > 0
            bound = np.full_like(u, np.inf)
            bound[mask] = (t ** (q / 2.0)
                           * np.exp(c * q * (u[mask] + 2.0 * M) ** 2 / (4.0 * t))
                           / eta[mask])
        else:
            raise ValueError(f"unknown kind {kind!r}")
        darr = v - bound
        i = np.unravel_index(int(np.argmax(darr)), darr.shape)
        if darr[i] > worst:
            worst = float(darr[i])
            witness = {"t": float(t), "v": float(v[i]), "bound": float(bound[i])}
    return VerificationReport(
        check_id=f"eh-bound:{kind}",
        max_defect=worst if np.isfinite(worst) else 0.0,
        tolerance=grid_tol,
        witness=witness,
        metadata={"M": M, "c": c, "q": q, "R": R, "T_prime": T_prime},
    )


def convergence_to_initial_data(traj, omega: ModulusOfContinuity, n: int = None,
                                grid_tol: float = 0.0) -> VerificationReport:
    """Sphere-barrier bound |u(., t) - u0| <= sqrt(2nt) + omega(sqrt(2nt))
    at interior nodes, per snapshot."""
    u0 = traj.fields[0].values
    if n is None:
        n = traj.fields[0].ndim
    interior = tuple(slice(1, -1) for _ in range(u0.ndim))
    worst, witness = -np.inf, {}
    for t, f in traj.snapshots:
        if t <= 0:
            continue
        r = np.sqrt(2.0 * n * t)
        delta = r + omega.omega(r)
        d = float(np.max(np.abs(f.values[interior] - u0[interior]))) - delta
        if d > worst:
            worst = d
            witness = {"t": float(t), "delta": float(delta)}
    return VerificationReport(
        check_id="convergence-to-initial-data",
        max_defect=worst if np.isfinite(worst) else 0.0,
        tolerance=grid_tol,
        witness=witness,
        metadata={"n": n},
    )
