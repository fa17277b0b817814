"""Catalog of parabolic operators with structural metadata.

Each entry packages the operator callable(s) together with the degeneracy
constants (A, P) and parabolicity envelopes (lambda(K), Lambda(K)) that the
verification checks consume.  Metadata is supplied by the catalog, not
inferred; sampled consistency checks guard against wrong metadata.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .reports import VerificationReport

__all__ = [
    "Quasilinear1D",
    "FullyNonlinear1D",
    "GraphFlowND",
    "DegeneracyProfile",
    "mcf_graph",
    "heat_1d",
    "csf",
    "plaplace_reg",
    "get_flow",
    "catalog_ids",
    "alpha",
    "alpha_closed_form",
    "bernstein_E",
    "check_degeneracy",
]


@dataclass(frozen=True)
class DegeneracyProfile:
    """Radial lower envelope alpha_tilde(s) with constants A0, P such that
    alpha_tilde(s) * s^2 >= A0 for s >= P."""

    alpha_tilde: Callable[[float], float]
    A0: float
    P: float

    def __post_init__(self):
        if self.A0 <= 0 or self.P <= 0:
            raise ValueError("A0 and P must be positive")


@dataclass(frozen=True)
class Quasilinear1D:
    """u_t = a(u_x, u, x, t) u_xx + b(u_x) with degeneracy metadata."""

    a: Callable[[np.ndarray, np.ndarray, np.ndarray, float], np.ndarray]
    b: Callable[[np.ndarray], np.ndarray]
    A: float
    P: float
    lambda_of_K: Callable[[float], float]
    Lambda_of_K: Callable[[float], float]
    name: str = "quasilinear1d"


@dataclass(frozen=True)
class FullyNonlinear1D:
    """u_t = F(u_xx, u_x, u, x, t) with dF/dr > 0."""

    F: Callable
    dF_dr: Callable
    name: str = "fullynonlinear1d"


@dataclass(frozen=True)
class GraphFlowND:
    """u_t = a^ij(Du) D_ij u + b(Du) with symmetric PSD coefficient matrix."""

    n: int
    coeff: Callable[[np.ndarray], np.ndarray]
    b: Optional[Callable[[np.ndarray], float]] = None
    coeff_field: Optional[Callable[[np.ndarray], np.ndarray]] = None
    Lambda_of_K: Callable[[float], float] = lambda K: 1.0
    lambda_of_K: Callable[[float], float] = lambda K: 1.0
    degeneracy: Optional[DegeneracyProfile] = None
    name: str = "graphflow"


def mcf_graph(n: int) -> GraphFlowND:
    """Mean curvature flow for graphs: coeff(p) = I - p p^T / (1 + |p|^2)."""
    if n < 1:
        raise ValueError("dimension must be >= 1")

    def coeff(p):
        p = np.asarray(p, dtype=float)
        return np.eye(n) - np.outer(p, p) / (1.0 + p @ p)

    def coeff_field(P):
        P = np.asarray(P, dtype=float)
        pp = np.sum(P ** 2, axis=-1)
        outer = P[..., :, None] * P[..., None, :]
        return np.eye(n) - outer / (1.0 + pp)[..., None, None]

    profile = DegeneracyProfile(lambda s: 1.0 / (1.0 + np.asarray(s) ** 2), A0=0.5, P=1.0)
    return GraphFlowND(
        n=n,
        coeff=coeff,
        coeff_field=coeff_field,
        Lambda_of_K=lambda K: 1.0,
        lambda_of_K=lambda K: 1.0 / (1.0 + K ** 2),
        degeneracy=profile,
        name=f"mcf{n}d",
    )


def csf() -> Quasilinear1D:
    """Curve shortening flow for graphs: u_t = u_xx / (1 + u_x^2)."""
    return Quasilinear1D(
        a=lambda p, q, x, t: 1.0 / (1.0 + p ** 2),
        b=lambda p: np.zeros_like(p),
        A=0.5,
        P=1.0,
        lambda_of_K=lambda K: 1.0 / (1.0 + K ** 2),
        Lambda_of_K=lambda K: 1.0,
        name="csf",
    )


def heat_1d(c: float) -> Quasilinear1D:
    """Linear heat equation u_t = u_xx / (4c).

    a p^2 is unbounded above, so the (A, P) certificate is taken at P = 1:
    A = P^2/(4c).
    """
    if c <= 0:
        raise ValueError("c must be positive")
    a_val = 1.0 / (4.0 * c)
    return Quasilinear1D(
        a=lambda p, q, x, t: np.full_like(np.asarray(p, dtype=float), a_val),
        b=lambda p: np.zeros_like(p),
        A=a_val,  # = P^2/(4c) with P = 1
        P=1.0,
        lambda_of_K=lambda K: a_val,
        Lambda_of_K=lambda K: a_val,
        name="heat",
    )


def plaplace_reg(q: float = -1.0, eps: float = 0.1) -> Quasilinear1D:
    """Regularized p-Laplacian-style flow a(p) = (eps^2 + p^2)^((q-2)/2).

    For q < 0 the degeneracy condition a(p) p^2 >= A fails at large |p|,
    which makes this the stock counterexample entry.
    """
    expo = (q - 2.0) / 2.0

    def a(p, qq, x, t):
        return (eps ** 2 + p ** 2) ** expo

    return Quasilinear1D(
        a=a,
        b=lambda p: np.zeros_like(p),
        A=min((eps ** 2 + 1.0) ** expo, 1.0),
        P=1.0,
        lambda_of_K=lambda K: (eps ** 2 + K ** 2) ** expo if expo < 0 else eps ** (2 * expo),
        Lambda_of_K=lambda K: eps ** (2 * expo) if expo < 0 else (eps ** 2 + K ** 2) ** expo,
        name="plaplace-reg",
    )


def catalog_ids() -> list[str]:
    return ["heat", "csf", "mcf2d", "mcf3d", "plaplace-reg", "aniso:<norm-id>"]


def get_flow(flow_id: str, **params):
    """Resolve a catalog entry by string id.

    Known ids: "heat" (param c), "csf", "mcf2d", "mcf3d",
    "plaplace-reg" (params q, eps), "aniso:<norm-id>".
    """
    if flow_id == "heat":
        return heat_1d(float(params.get("c", 0.25)))
    if flow_id == "csf":
        return csf()
    if flow_id == "mcf2d":
        return mcf_graph(2)
    if flow_id == "mcf3d":
        return mcf_graph(3)
    if flow_id == "plaplace-reg":
        return plaplace_reg(float(params.get("q", -1.0)), float(params.get("eps", 0.1)))
    if flow_id.startswith("aniso:"):
        from . import finsler

        norm = finsler.norm_by_id(flow_id.split(":", 1)[1], **params)
        return finsler.aniso_flow(norm)
    raise KeyError(f"unknown flow id {flow_id!r}")


# --- directional degeneracy functional -------------------------------------


def _unit_directions(n: int, n_dirs: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0]])
    if n == 2:
        theta = np.pi * (np.arange(n_dirs) + 0.5) / n_dirs
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    # Fibonacci lattice on the half sphere (v and -v give the same value)
    k = np.arange(n_dirs)
    z = (k + 0.5) / n_dirs  # (0, 1): upper hemisphere
    phi = k * np.pi * (3.0 - np.sqrt(5.0))
    rho = np.sqrt(1.0 - z ** 2)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def _angles_to_dir(theta: np.ndarray, n: int) -> np.ndarray:
    if n == 2:
        return np.array([np.cos(theta[0]), np.sin(theta[0])])
    return np.array(
        [
            np.sin(theta[0]) * np.cos(theta[1]),
            np.sin(theta[0]) * np.sin(theta[1]),
            np.cos(theta[0]),
        ]
    )


def _dir_to_angles(v: np.ndarray) -> np.ndarray:
    if v.shape[0] == 2:
        return np.array([np.arctan2(v[1], v[0])])
    return np.array([np.arccos(np.clip(v[2], -1, 1)), np.arctan2(v[1], v[0])])


def alpha_closed_form(A: np.ndarray, p: np.ndarray) -> float:
    """|p|^2 / (p^T A^{-1} p), valid for strictly positive-definite A."""
    p = np.asarray(p, dtype=float)
    return float(p @ p / (p @ np.linalg.solve(A, p)))


def alpha(A: np.ndarray, p: np.ndarray, n_dirs: int = 4096) -> float:
    """Directional degeneracy |p|^2 inf_v (v^T A v)/(v . p)^2 over unit v.

    Sampled over quasi-uniform directions then refined by Nelder-Mead descent
    from the best candidates.  For strictly positive-definite A the closed
    form |p|^2/(p^T A^{-1} p) is checked against the sampled value.
    """
    A = np.asarray(A, dtype=float)
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    pp = float(p @ p)
    if pp == 0.0:
        raise ValueError("alpha undefined at p = 0")

    if n == 1:
        return float(A[0, 0])

    dirs = _unit_directions(n, n_dirs)
    vp = dirs @ p
    quad = np.einsum("ki,ij,kj->k", dirs, A, dirs)
    mask = np.abs(vp) > 1e-12 * np.sqrt(pp)
    vals = np.full(n_dirs, np.inf)
    vals[mask] = pp * quad[mask] / vp[mask] ** 2

    def objective(theta):
        v = _angles_to_dir(np.atleast_1d(theta), n)
        d = v @ p
        if abs(d) < 1e-14 * np.sqrt(pp):
            return np.inf
        return pp * (v @ A @ v) / d ** 2

    best = np.argsort(vals)[:8]
    result = float(np.min(vals[best]))
    for idx in best:
        theta0 = _dir_to_angles(dirs[idx])
        res = minimize(
            objective,
            theta0,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400},
        )
        result = min(result, float(res.fun))

    # cross-check against the closed form when A is safely positive definite
    eigmin = float(np.linalg.eigvalsh(A)[0])
    if eigmin > 1e-10:
        closed = alpha_closed_form(A, p)
        if abs(result - closed) > 1e-4 * max(1.0, abs(closed)):
            raise ArithmeticError(
                f"sampled alpha {result} disagrees with closed form {closed}"
            )
        result = min(result, closed)
    return result


def bernstein_E(A: np.ndarray, p: np.ndarray) -> float:
    """Bernstein functional p^T A p."""
    p = np.asarray(p, dtype=float)
    return float(p @ np.asarray(A, dtype=float) @ p)


def check_degeneracy(profile: DegeneracyProfile, s_samples) -> VerificationReport:
    """Check alpha_tilde(s) s^2 >= A0 on every sample of [P, s_max]."""
    s = np.asarray(s_samples, dtype=float)
    if s.size == 0:
        raise ValueError("empty sample set")
    s = s[s >= profile.P]
    if s.size == 0:
        raise ValueError("samples must cover [P, s_max]")
    vals = np.array([profile.alpha_tilde(si) * si ** 2 for si in s])
    margin = vals - profile.A0
    i = int(np.argmin(margin))
    return VerificationReport(
        check_id="degeneracy",
        max_defect=float(-margin[i]),
        tolerance=0.0,
        witness={"s": float(s[i]), "alpha_tilde_s2": float(vals[i])},
        metadata={"A0": profile.A0, "P": profile.P, "n_samples": int(s.size)},
    )
