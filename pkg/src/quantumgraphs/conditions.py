"""Vertex conditions: matrix pairs, Grassmannian subspaces, charts, presets.

Conditions constraining a trace vector (U, U') come in two equivalent forms:
a matrix pair (A, B) with A U + B U' = 0, and the solution subspace P of half
dimension inside the trace space.  Everything here converts between the two,
tests self-adjointness (P Lagrangian for the trace symplectic form), builds
the standard presets, and provides chart coordinates, projectors, and
geodesics on the Grassmannian of condition subspaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import null_space, orth

from .exceptions import ChartError, DegenerateConditionsError, GraphSpecError
from .graphs import MetricGraph

RANK_RTOL = 1e-10  # numerical rank cut, relative to the largest singular value


@dataclass(frozen=True)
class ConditionsAB:
    """Matrix-pair form: rows of [A B] are the individual conditions.

    A acts on endpoint values, B on inward derivatives; the stacked block
    [A B] must have full row rank, which is checked on construction.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        B = np.asarray(self.B, dtype=complex)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise GraphSpecError("A and B must be square matrices of equal shape")
        sv = np.linalg.svd(np.hstack([A, B]), compute_uv=False)
        if sv[-1] <= RANK_RTOL * sv[0]:
            raise DegenerateConditionsError(
                f"degenerate conditions: rank [A B] < {A.shape[0]} "
                f"(sigma_min/sigma_max = {sv[-1] / sv[0]:.2e})")

    @property
    def n_conditions(self) -> int:
        return self.A.shape[0]

    def residual(self, trace: np.ndarray) -> float:
        """Relative violation |A U + B U'| / |(U, U')| of one trace vector."""
        h = self.n_conditions
        r = self.A @ trace[:h] + self.B @ trace[h:]
        return float(np.linalg.norm(r) / max(np.linalg.norm(trace), 1e-300))


@dataclass(frozen=True)
class ConditionSubspace:
    """Grassmannian form: the columns of `basis` span the condition subspace."""

    basis: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.basis, dtype=complex)
        object.__setattr__(self, "basis", Y)
        if Y.ndim != 2 or Y.shape[0] != 2 * Y.shape[1]:
            raise GraphSpecError("subspace basis must have shape (4m, 2m)")
        sv = np.linalg.svd(Y, compute_uv=False)
        if sv[-1] <= RANK_RTOL * sv[0]:
            raise DegenerateConditionsError("subspace basis is rank deficient")

    @cached_property
    def orthonormal(self) -> np.ndarray:
        q, _ = np.linalg.qr(self.basis)
        return q

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        q = self.orthonormal
        return q @ q.conj().T

    def residual(self, trace: np.ndarray) -> float:
        """Relative distance of a trace vector from the subspace."""
        q = self.orthonormal
        r = trace - q @ (q.conj().T @ trace)
        return float(np.linalg.norm(r) / max(np.linalg.norm(trace), 1e-300))


Conditions = ConditionsAB | ConditionSubspace


def from_AB(c: ConditionsAB) -> ConditionSubspace:
    """Solution subspace of A U + B U' = 0, with an orthonormal basis."""
    ker = null_space(np.hstack([c.A, c.B]), rcond=RANK_RTOL)
    if ker.shape[1] != c.n_conditions:
        raise DegenerateConditionsError(
            f"kernel dimension {ker.shape[1]} != {c.n_conditions}")
    return ConditionSubspace(ker)


def to_AB(P: ConditionSubspace) -> ConditionsAB:
    """Matrix pair whose rows orthonormally span the orthogonal complement of P.

    (A, B) is only determined up to an invertible left factor, so equality of
    conditions is always a subspace test, never a matrix comparison.
    """
    W = null_space(P.basis.conj().T, rcond=RANK_RTOL).conj().T
    if W.shape[0] != P.dim:
        raise DegenerateConditionsError("complement dimension mismatch")
    h = P.dim
    return ConditionsAB(W[:, :h], W[:, h:])


def as_pair(c: Conditions) -> ConditionsAB:
    return c if isinstance(c, ConditionsAB) else to_AB(c)


def as_subspace(c: Conditions) -> ConditionSubspace:
    return c if isinstance(c, ConditionSubspace) else from_AB(c)


# ----------------------------------------------------------- symplectic form

def symplectic_form(xi: np.ndarray, eta: np.ndarray) -> complex:
    """Trace symplectic form <U'_xi, U_eta> - <U_xi, U'_eta> (second slot conjugated)."""
    xi = np.asarray(xi, dtype=complex).ravel()
    eta = np.asarray(eta, dtype=complex).ravel()
    if xi.shape != eta.shape or xi.size % 2:
        raise GraphSpecError("trace vectors must share an even dimension")
    h = xi.size // 2
    return complex(np.vdot(eta[:h], xi[h:]) - np.vdot(eta[h:], xi[:h]))


def lagrangian_defect(P: ConditionSubspace) -> float:
    """Norm of the symplectic Gram matrix on P; zero iff P is Lagrangian."""
    Y = P.orthonormal
    h = Y.shape[0] // 2
    JY = np.vstack([Y[h:], -Y[:h]])
    return float(np.linalg.norm(Y.conj().T @ JY, 2))


def is_self_adjoint(c: Conditions, tol: float = 1e-10) -> tuple[bool, float]:
    """Self-adjointness test with a witness.

    For the pair form this is Hermiticity of A B* (equivalently the condition
    subspace is Lagrangian); the witness is the norm of the anti-Hermitian
    part, relative to the scale of A B*.
    """
    if isinstance(c, ConditionSubspace):
        w = lagrangian_defect(c)
        return w < tol, w
    K = c.A @ c.B.conj().T
    w = float(np.linalg.norm(K - K.conj().T, 2))
    scale = max(np.linalg.norm(c.A, 2) * np.linalg.norm(c.B, 2), 1.0)
    return w < tol * scale, w


def unitary_conditions(U: np.ndarray) -> ConditionsAB:
    """Self-adjoint conditions A = U - I, B = i(U + I) from a unitary U.

    A B* = -i (U - U*) is Hermitian for every unitary U, which makes this the
    standard generator of random self-adjoint conditions.
    """
    U = np.asarray(U, dtype=complex)
    I = np.eye(U.shape[0])
    return ConditionsAB(U - I, 1j * (U + I))


# ------------------------------------------------------------------- charts

@dataclass(frozen=True)
class ChartFrame:
    """Chart of the Grassmannian around a base subspace.

    The ambient space splits as range(p0) + range(r); subspaces transversal
    to range(r) are graphs of linear maps from the base to the complement,
    whose matrix entries serve as local coordinates.
    """

    p0: np.ndarray  # (4m, 2m) basis of the base point
    r: np.ndarray   # (4m, 2m) basis of a complement

    @cached_property
    def stacked(self) -> np.ndarray:
        return np.hstack([self.p0, self.r])

    @cached_property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.stacked))


def chart_frame(P0: ConditionSubspace, R: ConditionSubspace | np.ndarray | None = None) -> ChartFrame:
    p0 = P0.orthonormal
    if R is None:
        r = null_space(p0.conj().T, rcond=RANK_RTOL)
    else:
        r = R.orthonormal if isinstance(R, ConditionSubspace) else np.asarray(R, dtype=complex)
    frame = ChartFrame(p0, r)
    sv = np.linalg.svd(frame.stacked, compute_uv=False)
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise ChartError("base point and complement do not span the trace space")
    return frame


def chart_coords(frame: ChartFrame, P: ConditionSubspace) -> np.ndarray:
    """Coordinate matrix of P in the chart: P = {(x, coords @ x)}.

    Fails with an explicit chart error when P is not transversal to the
    complement, in which case the caller must re-chart.
    """
    Y = np.linalg.solve(frame.stacked, P.basis)
    h = frame.p0.shape[1]
    X, Z = Y[:h], Y[h:]
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise ChartError("subspace outside chart: not a graph over the base point")
    return np.linalg.solve(X.conj().T, Z.conj().T).conj().T  # Z @ X^{-1}


def subspace_from_coords(frame: ChartFrame, coords: np.ndarray) -> ConditionSubspace:
    return ConditionSubspace(frame.p0 + frame.r @ np.asarray(coords, dtype=complex))


def chart_projector(frame: ChartFrame, coords: np.ndarray) -> np.ndarray:
    """Projector onto the charted subspace along the complement.

    Its entries are affine in the chart coordinates, which is the concrete,
    finite-dimensional form of analytic dependence on the subspace.
    """
    coords = np.asarray(coords, dtype=complex)
    h = frame.p0.shape[1]
    n = frame.stacked.shape[0]
    M = np.zeros((n, n), dtype=complex)
    M[:h, :h] = np.eye(h)
    M[h:, :h] = coords
    T = frame.stacked
    return np.linalg.solve(T.conj().T, (T @ M).conj().T).conj().T  # T M T^{-1}


# ------------------------------------------------------------------ geometry

def principal_angles(P: ConditionSubspace | np.ndarray, Q: ConditionSubspace | np.ndarray) -> np.ndarray:
    """Principal angles (ascending, radians) between two subspaces."""
    Yp = P.orthonormal if isinstance(P, ConditionSubspace) else orth(np.asarray(P, dtype=complex))
    Yq = Q.orthonormal if isinstance(Q, ConditionSubspace) else orth(np.asarray(Q, dtype=complex))
    s = np.linalg.svd(Yp.conj().T @ Yq, compute_uv=False)
    return np.arccos(np.clip(s, 0.0, 1.0))


def subspace_gap(P, Q) -> float:
    """Largest principal angle."""
    angles = principal_angles(P, Q)
    return float(angles.max()) if angles.size else 0.0


def grassmann_path(P_start: ConditionSubspace, P_end: ConditionSubspace, t: float) -> ConditionSubspace:
    """Point at parameter t on the principal-angle geodesic from P_start to P_end.

    Endpoints are reproduced (t = 0, 1); the path is chart-free, so it may
    cross loci where no single pair representation with invertible B exists.
    For subspace pairs with right-angle principal directions the minimal
    geodesic is not unique; the SVD orientation fixes a deterministic choice.
    """
    Y0 = P_start.orthonormal
    Y1 = P_end.orthonormal
    if Y0.shape != Y1.shape:
        raise GraphSpecError("subspaces live in different trace spaces")
    U, s, Vh = np.linalg.svd(Y0.conj().T @ Y1)
    s = np.clip(s, -1.0, 1.0)
    theta = np.arccos(s)
    p = Y0 @ U
    target = Y1 @ Vh.conj().T
    G = target - p * s[np.newaxis, :]
    W = np.zeros_like(G)
    big = theta > 1e-9
    if big.any():
        W[:, big] = G[:, big] / np.sin(theta[big])[np.newaxis, :]
    t = float(t)
    gamma = p * np.cos(t * theta)[np.newaxis, :] + W * np.sin(t * theta)[np.newaxis, :]
    return ConditionSubspace(gamma)


# ------------------------------------------------------------------- presets

_LOCAL_KINDS = ("dirichlet", "neumann", "kirchhoff", "delta", "boundary-angle")


def local_block(kind: str, degree: int, params: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Local condition rows (A, B) for one vertex of the given degree.

    Row layout: continuity chains first, then the derivative balance (for
    kirchhoff/delta); dirichlet and neumann pin each endpoint separately;
    boundary-angle mixes cos(t) u + sin(t) u' = 0 at degree-1 vertices.
    """
    params = params or {}
    d = degree
    A = np.zeros((d, d), dtype=complex)
    B = np.zeros((d, d), dtype=complex)
    if kind == "dirichlet":
        A[:] = np.eye(d)
        return A, B
    if kind == "neumann":
        B[:] = np.eye(d)
        return A, B
    if kind in ("kirchhoff", "delta"):
        alpha = complex(params.get("alpha", 0.0)) if kind == "delta" else 0.0
        if kind == "delta" and d == 0:
            raise GraphSpecError("delta condition on an isolated vertex")
        for i in range(d - 1):
            A[i, i] = 1.0
            A[i, i + 1] = -1.0
        if d >= 1:
            B[d - 1, :] = 1.0
            A[d - 1, 0] = -alpha  # derivative balance: sum of inward derivatives = alpha * u(v)
        return A, B
    if kind == "boundary-angle":
        if d != 1:
            raise GraphSpecError("boundary-angle applies to degree-1 vertices only")
        t = float(params.get("t", 0.0))
        A[0, 0] = math.cos(t)
        B[0, 0] = math.sin(t)
        return A, B
    raise GraphSpecError(f"unknown local condition {kind!r}")


def per_vertex(graph: MetricGraph, mapping: dict) -> ConditionsAB:
    """Assemble per-vertex local blocks into global conditions.

    `mapping` sends a vertex id to ("kind", params) or to an explicit
    (A_local, B_local) pair whose columns follow the incident-endpoint order
    returned by `graph.endpoints_at`.
    """
    m2 = graph.trace.n_endpoints
    A = np.zeros((m2, m2), dtype=complex)
    B = np.zeros((m2, m2), dtype=complex)
    row = 0
    for v in graph.vertices:
        eps = graph.endpoints_at(v)
        d = len(eps)
        entry = mapping.get(v)
        if entry is None:
            raise GraphSpecError(f"no condition given for vertex {v!r}")
        if isinstance(entry, tuple) and entry and isinstance(entry[0], str):
            kind = entry[0]
            params = entry[1] if len(entry) > 1 else None
            Al, Bl = local_block(kind, d, params)
        else:
            Al, Bl = entry
            Al = np.asarray(Al, dtype=complex)
            Bl = np.asarray(Bl, dtype=complex)
            if Al.shape != (d, d) or Bl.shape != (d, d):
                raise GraphSpecError(f"local block at {v!r} must be {d}x{d}")
        slots = [graph.trace.slot(e, w) for e, w in eps]
        A[np.ix_(range(row, row + d), slots)] = Al
        B[np.ix_(range(row, row + d), slots)] = Bl
        row += d
    if row != m2:
        raise GraphSpecError("vertex degrees do not sum to the number of endpoints")
    return ConditionsAB(A, B)


def preset(name: str, graph: MetricGraph, params: dict | None = None) -> ConditionsAB:
    """Uniform preset on every vertex.

    dirichlet / neumann / kirchhoff need no parameters; delta takes alpha
    (scalar or per-vertex map); boundary-angle takes t for every degree-1
    vertex (scalar or per-vertex map) and imposes kirchhoff elsewhere.
    """
    params = params or {}
    if name not in _LOCAL_KINDS:
        raise GraphSpecError(f"unknown preset {name!r}")

    def value_for(v, key, default=0.0):
        raw = params.get(key, default)
        return raw.get(v, default) if isinstance(raw, dict) else raw

    mapping: dict = {}
    for v in graph.vertices:
        if name == "delta":
            mapping[v] = ("delta", {"alpha": value_for(v, "alpha")})
        elif name == "boundary-angle":
            if graph.degree(v) == 1:
                mapping[v] = ("boundary-angle", {"t": value_for(v, "t")})
            else:
                mapping[v] = ("kirchhoff",)
        else:
            mapping[v] = (name,)
    return per_vertex(graph, mapping)
