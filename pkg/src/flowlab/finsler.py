"""Anisotropic norm machinery: norm families with closed-form derivatives,
flow-coefficient generation, and sampled structural-constant certificates.

Norms act on covectors in R^(n+1).  Index 0 is the vertical (graph) covector
phi^0; indices 1..n are spatial.  All derivatives are hand-derived closed
forms; finite differences are used only as test oracles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .reports import VerificationReport

__all__ = [
    "FinslerNorm",
    "AnisoConstants",
    "euclidean_norm",
    "elliptic_norm",
    "quartic_norm",
    "builtin_norms",
    "norm_by_id",
    "flow_coefficients",
    "aniso_flow",
    "estimate_A_P",
    "cartan_Q",
    "check_smallness",
    "check_symmetry",
    "trace_lower_bound",
    "cross_term_bound",
    "estimate_S_eps",
    "certify",
]


@dataclass(frozen=True)
class FinslerNorm:
    """Positive convex 1-homogeneous function on covectors, with analytic
    derivatives to third order.  ``symmetric_flag`` claims evenness in the
    phi^0 coordinate: F(p + phi^0) = F(p - phi^0) for spatial p."""

    id: str
    dim: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    third: Callable[[np.ndarray], np.ndarray]
    symmetric_flag: bool


@dataclass
class AnisoConstants:
    """Empirical structural certificate for one norm (sampled, not proved)."""

    norm_id: str
    A: float
    P: float
    k: float
    C1: float
    C2: Optional[float] = None
    S_eps: dict = field(default_factory=dict)
    sample_spec: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {
            "norm_id": self.norm_id,
            "A": self.A,
            "P": self.P,
            "k": self.k,
            "C1": self.C1,
            "C2": self.C2,
            "S_eps": {str(k): v for k, v in self.S_eps.items()},
            "sample_spec": self.sample_spec,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_jsonable(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


class NormConstructionError(ValueError):
    pass


# --- norm catalog -----------------------------------------------------------


def euclidean_norm(dim: int = 3) -> FinslerNorm:
    """F(w) = |w| with the round unit ball."""
    if dim < 2:
        raise ValueError("dim must be >= 2")

    def value(w):
        return float(np.linalg.norm(w))

    def grad(w):
        r = np.linalg.norm(w)
        return np.asarray(w, dtype=float) / r

    def hess(w):
        w = np.asarray(w, dtype=float)
        r = np.linalg.norm(w)
        wh = w / r
        return (np.eye(dim) - np.outer(wh, wh)) / r

    def third(w):
        w = np.asarray(w, dtype=float)
        r = np.linalg.norm(w)
        wh = w / r
        I = np.eye(dim)
        T = (
            -np.einsum("ij,k->ijk", I, wh)
            - np.einsum("ik,j->ijk", I, wh)
            - np.einsum("jk,i->ijk", I, wh)
            + 3.0 * np.einsum("i,j,k->ijk", wh, wh, wh)
        )
        return T / r ** 2

    return FinslerNorm("euclid", dim, value, grad, hess, third, symmetric_flag=True)


def elliptic_norm(M: np.ndarray, norm_id: Optional[str] = None) -> FinslerNorm:
    """F(w) = sqrt(w^T M w) for symmetric positive-definite M.

    Symmetric in the vertical coordinate exactly when row 0 of M has no
    off-diagonal entries.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NormConstructionError("M must be a square matrix")
    if not np.allclose(M, M.T):
        raise NormConstructionError("M must be symmetric")
    if np.linalg.eigvalsh(M)[0] <= 0:
        raise NormConstructionError("M must be positive definite")
    dim = M.shape[0]
    symmetric = bool(np.all(M[0, 1:] == 0.0))

    def value(w):
        w = np.asarray(w, dtype=float)
        return float(np.sqrt(w @ M @ w))

    def grad(w):
        w = np.asarray(w, dtype=float)
        return M @ w / value(w)

    def hess(w):
        w = np.asarray(w, dtype=float)
        F = value(w)
        m = M @ w
        return M / F - np.outer(m, m) / F ** 3

    def third(w):
        w = np.asarray(w, dtype=float)
        F = value(w)
        m = M @ w
        T = (
            -np.einsum("ij,k->ijk", M, m)
            - np.einsum("ik,j->ijk", M, m)
            - np.einsum("jk,i->ijk", M, m)
        ) / F ** 3
        return T + 3.0 * np.einsum("i,j,k->ijk", m, m, m) / F ** 5

    if norm_id is None:
        norm_id = "elliptic:" + ";".join(
            ",".join(repr(float(v)) for v in row) for row in M
        )
    return FinslerNorm(norm_id, dim, value, grad, hess, third, symmetric_flag=symmetric)


def quartic_norm(delta: float, dim: int = 3) -> FinslerNorm:
    """F(w) = |w| (1 + delta * sum w_i^4 / |w|^4) = r + delta * S / r^3.

    Admitted only if the sampled minimum tangent-Hessian eigenvalue exceeds
    1e-6 (convexity pre-check); delta = 0 reduces to the Euclidean norm.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    d = float(delta)

    def value(w):
        w = np.asarray(w, dtype=float)
        r = np.linalg.norm(w)
        return float(r + d * np.sum(w ** 4) / r ** 3)

    def grad(w):
        w = np.asarray(w, dtype=float)
        r = np.linalg.norm(w)
        S = np.sum(w ** 4)
        Si = 4.0 * w ** 3
        # grad(r) + delta * (S_i r^-3 - 3 S w_i r^-5)
        return w / r + d * (Si / r ** 3 - 3.0 * S * w / r ** 5)

    def hess(w):
        w = np.asarray(w, dtype=float)
        r = np.linalg.norm(w)
        wh = w / r
        I = np.eye(dim)
        S = np.sum(w ** 4)
        Si = 4.0 * w ** 3
        Sij = np.diag(12.0 * w ** 2)
        gi = -3.0 * w / r ** 5
        gij = -3.0 * I / r ** 5 + 15.0 * np.outer(w, w) / r ** 7
        H_r = (I - np.outer(wh, wh)) / r
        H_u = Sij / r ** 3 + np.outer(Si, gi) + np.outer(gi, Si) + S * gij
        return H_r + d * H_u

    def third(w):
        w = np.asarray(w, dtype=float)
        r = np.linalg.norm(w)
        wh = w / r
        I = np.eye(dim)
        S = np.sum(w ** 4)
        Si = 4.0 * w ** 3
        Sij = np.diag(12.0 * w ** 2)
        Sijk = np.zeros((dim, dim, dim))
        idx = np.arange(dim)
        Sijk[idx, idx, idx] = 24.0 * w
        gi = -3.0 * w / r ** 5
        gij = -3.0 * I / r ** 5 + 15.0 * np.outer(w, w) / r ** 7
        gijk = 15.0 * (
            np.einsum("ij,k->ijk", I, w)
            + np.einsum("ik,j->ijk", I, w)
            + np.einsum("jk,i->ijk", I, w)
        ) / r ** 7 - 105.0 * np.einsum("i,j,k->ijk", w, w, w) / r ** 9
        T_r = (
            -np.einsum("ij,k->ijk", I, wh)
            - np.einsum("ik,j->ijk", I, wh)
            - np.einsum("jk,i->ijk", I, wh)
            + 3.0 * np.einsum("i,j,k->ijk", wh, wh, wh)
        ) / r ** 2
        # Leibniz expansion of (S * g)_ijk with g = r^-3
        T_u = (
            Sijk / r ** 3
            + np.einsum("ij,k->ijk", Sij, gi)
            + np.einsum("ik,j->ijk", Sij, gi)
            + np.einsum("jk,i->ijk", Sij, gi)
            + np.einsum("i,jk->ijk", Si, gij)
            + np.einsum("j,ik->ijk", Si, gij)
            + np.einsum("k,ij->ijk", Si, gij)
            + S * gijk
        )
        return T_r + d * T_u

    nf = FinslerNorm(f"quartic:{delta}", dim, value, grad, hess, third, symmetric_flag=True)
    if d != 0.0:
        _check_convexity(nf)
    return nf


def _check_convexity(nf: FinslerNorm, n_samples: int = 500, min_eig: float = 1e-6):
    rng = np.random.default_rng(0)
    for w in rng.normal(size=(n_samples, nf.dim)):
        w /= np.linalg.norm(w)
        H = nf.hess(w)
        # drop the homogeneity null direction, keep tangent eigenvalues
        eigs = np.sort(np.linalg.eigvalsh(H))
        if eigs[1] <= min_eig:
            raise NormConstructionError(
                f"norm {nf.id!r} fails the convexity probe: tangent eigenvalue "
                f"{eigs[1]:.3g} <= {min_eig:.0e}"
            )


def builtin_norms(n: int) -> list:
    """Catalog of norms on R^(n+1): Euclidean, a diagonal elliptic example,
    and a small quartic perturbation."""
    if n < 1:
        raise ValueError("n must be >= 1")
    dim = n + 1
    M = np.diag(1.0 + 0.5 * np.arange(dim))
    return [
        euclidean_norm(dim),
        elliptic_norm(M),
        quartic_norm(1e-3, dim),
    ]


def _parse_matrix_spec(spec: str) -> np.ndarray:
    rows = [[float(v) for v in row.split(",")] for row in spec.split(";")]
    if len(rows) == 1:
        return np.diag(rows[0])
    return np.array(rows)


def norm_by_id(norm_id: str, dim: int = 3, **params) -> FinslerNorm:
    """Resolve "euclid", "elliptic:<M-spec>", "quartic:<delta>".

    The elliptic M-spec is either a comma list (diagonal) or semicolon-joined
    rows; its size fixes the dimension.
    """
    if norm_id == "euclid":
        return euclidean_norm(dim)
    if norm_id.startswith("elliptic:"):
        return elliptic_norm(_parse_matrix_spec(norm_id.split(":", 1)[1]), norm_id)
    if norm_id.startswith("quartic:"):
        return quartic_norm(float(norm_id.split(":", 1)[1]), dim)
    raise KeyError(f"unknown norm id {norm_id!r}")


# --- flow generation --------------------------------------------------------


def _z_of(p: np.ndarray) -> np.ndarray:
    """Covector p - phi^0 for spatial p: component 0 is -1."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return np.concatenate([[-1.0], p])


def _embed(q: np.ndarray) -> np.ndarray:
    q = np.atleast_1d(np.asarray(q, dtype=float))
    return np.concatenate([[0.0], q])


def flow_coefficients(nf: FinslerNorm, p: np.ndarray) -> np.ndarray:
    """Spatial block of F(z) D^2 F|_z at z = p - phi^0; symmetric PSD."""
    z = _z_of(p)
    return nf.value(z) * nf.hess(z)[1:, 1:]


def aniso_flow(nf: FinslerNorm):
    """Graph flow u_t = [F D^ij F](Du) u_ij generated by the norm."""
    from .flows import GraphFlowND

    n = nf.dim - 1

    def _envelope(K, reducer):
        vals = []
        for s in np.linspace(0.0, max(K, 1e-9), 17):
            for v in _spatial_directions(n, 16):
                eigs = np.linalg.eigvalsh(flow_coefficients(nf, s * v))
                vals.append(reducer(eigs))
        return float(reducer(np.array(vals)))

    return GraphFlowND(
        n=n,
        coeff=lambda p: flow_coefficients(nf, p),
        Lambda_of_K=lambda K: _envelope(K, np.max),
        lambda_of_K=lambda K: _envelope(K, np.min),
        name=f"aniso:{nf.id}",
    )


# --- sampled structural constants -------------------------------------------


def _spatial_directions(n: int, n_dirs: int) -> np.ndarray:
    """Quasi-uniform unit vectors in R^n."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        theta = 2 * np.pi * (np.arange(n_dirs) + 0.5) / n_dirs
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    rng = np.random.default_rng(12345)
    v = rng.normal(size=(n_dirs, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _sphere_points(dim: int, count: int, rng) -> np.ndarray:
    v = rng.normal(size=(count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def estimate_A_P(nf: FinslerNorm, s_max: float = 1e3, n_dirs: int = 64,
                 n_scales: int = 120, plateau_rtol: float = 1e-2):
    """Sampled constants (A, P) with B(p) = F D^2 F|_{p - phi^0}(p, p) >= A
    whenever F(p) >= P.

    B is sampled over spatial directions and scales; P is the smallest grid
    scale whose tail infimum reaches half the large-scale plateau
    min_dirs F D^2 F|_p(phi^0, phi^0).  Raises if the plateau is not reached
    at s_max.
    """
    n = nf.dim - 1
    dirs = _spatial_directions(n, n_dirs)
    scales = np.unique(np.concatenate([np.geomspace(0.05, s_max, n_scales), [1.0]]))

    B = np.empty((len(dirs), len(scales)))
    limits = np.empty(len(dirs))
    for i, v in enumerate(dirs):
        # normalize so that F(p) equals the scale exactly
        v_unit = v / nf.value(_embed(v))
        for j, s in enumerate(scales):
            p = s * v_unit
            z = _z_of(p)
            pe = _embed(p)
            B[i, j] = nf.value(z) * (pe @ nf.hess(z) @ pe)
        ph = _embed(v_unit)
        e0 = np.zeros(nf.dim)
        e0[0] = 1.0
        limits[i] = nf.value(ph) * (e0 @ nf.hess(ph) @ e0)

    rel = np.abs(B[:, -1] - limits) / np.maximum(np.abs(limits), 1e-300)
    if np.max(rel) > plateau_rtol:
        raise RuntimeError(
            f"plateau not reached at s_max={s_max:g} "
            f"(relative gap {np.max(rel):.3g})"
        )

    plateau = float(np.min(limits))
    # tail infimum over all samples with F(p) >= scale
    tail_min = np.minimum.accumulate(B.min(axis=0)[::-1])[::-1]
    target = 0.5 * plateau
    ok = np.nonzero(tail_min >= target)[0]
    if ok.size == 0:
        raise RuntimeError("no sampled scale attains half the plateau value")
    j = int(ok[0])
    return float(tail_min[j]), float(scales[j])


def _hat(nf: FinslerNorm, z: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Project q onto the tangent plane of the unit ball at z."""
    c = float(nf.grad(z) @ q) / nf.value(z)
    return q - c * z


def cartan_Q(nf: FinslerNorm, z: np.ndarray, p: np.ndarray, q: np.ndarray,
             r: np.ndarray) -> float:
    """Cartan tensor F^2(z) D^3 F|_z on hat-projected tangent covectors."""
    z = np.asarray(z, dtype=float)
    if np.all(z == 0.0):
        raise ValueError("cartan_Q undefined at z = 0")
    ph = _hat(nf, z, np.asarray(p, dtype=float))
    qh = _hat(nf, z, np.asarray(q, dtype=float))
    rh = _hat(nf, z, np.asarray(r, dtype=float))
    T = nf.third(z)
    return float(nf.value(z) ** 2 * np.einsum("ijk,i,j,k->", T, ph, qh, rh))


def check_smallness(nf: FinslerNorm, n_z: int = 200, n_triples: int = 20,
                    seed: int = 7):
    """Empirical C1: max of |Q(p,q,r)| over the normalizing bracket
    [F^3 D^2F(p,p) D^2F(q,q) D^2F(r,r)]^(1/2), with threshold checks
    C1^2 < 4/sqrt(n) and the interior variant C1^2 < 2/sqrt(n)."""
    rng = np.random.default_rng(seed)
    n = nf.dim - 1
    C1 = 0.0
    for z in _sphere_points(nf.dim, n_z, rng):
        F = nf.value(z)
        H = nf.hess(z)
        T = nf.third(z)
        for _ in range(n_triples):
            trio = [_hat(nf, z, v) for v in rng.normal(size=(3, nf.dim))]
            denom_sq = F ** 3
            for v in trio:
                denom_sq *= float(v @ H @ v)
            if denom_sq <= 0:
                raise ArithmeticError(f"degenerate tangent Hessian for {nf.id!r}")
            Q = F ** 2 * float(np.einsum("ijk,i,j,k->", T, *trio))
            C1 = max(C1, abs(Q) / np.sqrt(denom_sq))
    return C1, bool(C1 ** 2 < 4.0 / np.sqrt(n)), bool(C1 ** 2 < 2.0 / np.sqrt(n))


def check_symmetry(nf: FinslerNorm, n_samples: int = 200, seed: int = 11,
                   tolerance: float = 1e-10) -> VerificationReport:
    """Probe F(p + phi^0) = F(p - phi^0) for spatial p, together with its
    derivative consequences DF|_p(phi^0) = 0 and the vanishing of
    D^3 F|_p(phi^0, ., .) entries."""
    rng = np.random.default_rng(seed)
    n = nf.dim - 1
    worst = 0.0
    witness = {}
    for _ in range(n_samples):
        p_sp = rng.normal(size=n) * 10.0 ** rng.uniform(-1, 1)
        p = _embed(p_sp)
        e0 = np.zeros(nf.dim)
        e0[0] = 1.0
        d_val = abs(nf.value(p + e0) - nf.value(p - e0))
        d_grad = abs(float(nf.grad(p) @ e0))
        T = nf.third(p)
        d_third = max(float(np.max(np.abs(T[0, 1:, 1:]))), abs(float(T[0, 0, 0])))
        d = max(d_val, d_grad, d_third)
        if d > worst:
            worst = d
            witness = {
                "p": p_sp.tolist(),
                "value_defect": d_val,
                "grad_defect": d_grad,
                "third_defect": d_third,
            }
    report = VerificationReport(
        check_id=f"symmetry:{nf.id}",
        max_defect=worst,
        tolerance=tolerance,
        witness=witness,
        metadata={"n_samples": n_samples, "claimed_symmetric": nf.symmetric_flag},
    )
    return report


def trace_lower_bound(nf: FinslerNorm, s_max: float = 1e3, n_dirs: int = 64,
                      n_scales: int = 120) -> float:
    """Empirical min over sampled p of trace of the spatial flow-coefficient
    block; requires n > 1."""
    n = nf.dim - 1
    if n <= 1:
        raise ValueError("trace lower bound needs n > 1")
    k = np.inf
    scales = np.concatenate([[0.0], np.geomspace(0.05, s_max, n_scales)])
    for v in _spatial_directions(n, n_dirs):
        for s in scales:
            k = min(k, float(np.trace(flow_coefficients(nf, s * v))))
    return k


def cross_term_bound(nf: FinslerNorm, s_max: float = 1e3, n_dirs: int = 32,
                     n_scales: int = 60, n_q: int = 16, seed: int = 3) -> float:
    """Empirical C2 with F D^2 F|_{p-phi^0}(p, q) <= C2 F(q)/F(p - phi^0)
    for spatial p, q; requires the symmetry condition."""
    if not nf.symmetric_flag:
        raise ValueError("cross_term_bound assumes the symmetry condition")
    rng = np.random.default_rng(seed)
    n = nf.dim - 1
    qs = _sphere_points(n, n_q, rng)
    C2 = 0.0
    for v in _spatial_directions(n, n_dirs):
        for s in np.geomspace(0.05, s_max, n_scales):
            p = s * v
            z = _z_of(p)
            G = nf.value(z) * nf.hess(z)
            pe = _embed(p)
            for q in qs:
                qe = _embed(q)
                val = nf.value(z) * abs(float(pe @ G @ qe)) / nf.value(qe)
                C2 = max(C2, val)
    return C2


def estimate_S_eps(nf: FinslerNorm, eps: float, s_grid=None, n_dirs: int = 24,
                   n_q: int = 12, seed: int = 5):
    """Smallest sampled scale S with |F D(F D^2 F)|_{p-phi^0}(p, q^, q^)| <=
    eps G(p,p)^(1/2) G(q,q) for all sampled F(p) >= S; None if the grid never
    satisfies the bound (non-convergence flag)."""
    if s_grid is None:
        s_grid = np.geomspace(1.0, 1e4, 40)
    rng = np.random.default_rng(seed)
    n = nf.dim - 1
    qs = _sphere_points(n, n_q, rng)
    worst = np.zeros(len(s_grid))
    for j, s in enumerate(s_grid):
        m = 0.0
        for v in _spatial_directions(n, n_dirs):
            p = s * v
            z = _z_of(p)
            F = nf.value(z)
            H = nf.hess(z)
            T = nf.third(z)
            G = F * H
            pe = _embed(p)
            Gpp = float(pe @ G @ pe)
            for q in qs:
                qh = _hat(nf, z, _embed(q))
                Gqq = float(qh @ G @ qh)
                # F * D(F D^2 F)(p, qh, qh) = F (DF(p) D2F(qh,qh) + F D3F(p,qh,qh))
                dG = F * (
                    float(nf.grad(z) @ pe) * float(qh @ H @ qh)
                    + F * float(np.einsum("ijk,i,j,k->", T, pe, qh, qh))
                )
                m = max(m, abs(dG) / (np.sqrt(Gpp) * Gqq))
        worst[j] = m
    ok = worst <= eps
    # require the bound to hold for every sampled scale from S onward
    tail_ok = np.logical_and.accumulate(ok[::-1])[::-1]
    idx = np.nonzero(tail_ok)[0]
    if idx.size == 0:
        return None
    return float(s_grid[int(idx[0])])


def certify(nf: FinslerNorm, s_max: float = 1e3, eps_values=(0.5, 0.1),
            path=None) -> AnisoConstants:
    """Assemble the sampled structural certificate for one norm."""
    A, P = estimate_A_P(nf, s_max=s_max)
    n = nf.dim - 1
    k = trace_lower_bound(nf, s_max=s_max) if n > 1 else float("nan")
    C1, _, _ = check_smallness(nf)
    C2 = cross_term_bound(nf, s_max=s_max) if nf.symmetric_flag else None
    S_eps = {}
    if nf.symmetric_flag:
        for eps in eps_values:
            S_eps[eps] = estimate_S_eps(nf, eps)
    consts = AnisoConstants(
        norm_id=nf.id,
        A=A,
        P=P,
        k=k,
        C1=C1,
        C2=C2,
        S_eps=S_eps,
        sample_spec={"s_max": s_max, "n_dirs": 64, "n_scales": 120},
    )
    if path is not None:
        consts.to_json(path)
    return consts
