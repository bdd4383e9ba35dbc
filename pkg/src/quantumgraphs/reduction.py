"""Discrete reductions of the metric-graph eigenvalue problem.

Three backends turn the continuous problem at a fixed spectral parameter into
a finite matrix whose rank deficiency marks an eigenvalue:

* ``dtn``          A + B D(lam) on endpoint values; classic, undefined on the
                   union of edge Dirichlet spectra.
* ``dotted-dtn``   the same after splitting every Dirichlet-hit edge at a
                   fresh Kirchhoff vertex, which pushes the Dirichlet spectrum
                   away from lam; defined for every lam.
* ``intersection`` the stacked basis [P | Q(lam)] of the condition subspace
                   and the direct sum of per-edge solution trace spaces;
                   pole-free and entire in lam, the default everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import edges as _edges
from .conditions import (Conditions, ConditionsAB, ConditionSubspace, as_pair,
                         as_subspace)
from .exceptions import (BackendPreconditionError, DirichletSingularityError,
                         GraphSpecError, NotAnEigenvalueError)
from .graphs import END, START, MetricGraph, dot_positions, insert_dot
from .potentials import ZeroPotential

BACKENDS = ("dtn", "dotted-dtn", "intersection")

# Residual gate for vectors claimed to lie in a numerical null space.
NULLVEC_RTOL = 1e-6


def _canonical_backend(name: str) -> str:
    alias = {"dotted": "dotted-dtn", "dot": "dotted-dtn"}
    name = alias.get(name, name)
    if name not in BACKENDS:
        raise GraphSpecError(f"unknown backend {name!r}; pick one of {BACKENDS}")
    return name


# ------------------------------------------------------------------ classic DtN

def dtn_matrix(graph: MetricGraph, lam) -> np.ndarray:
    """Endpoint-indexed assembly D(lam) of the per-edge DtN blocks."""
    tr = graph.trace
    D = np.zeros((tr.n_endpoints, tr.n_endpoints), dtype=complex)
    for e in graph.edges:
        try:
            blk = _edges.dtn_block(lam, e.length, e.potential)
        except DirichletSingularityError as exc:
            exc.edge_id = e.id
            raise
        p0 = tr.slot(e.id, START)
        p1 = tr.slot(e.id, END)
        D[np.ix_((p0, p1), (p0, p1))] += blk
    return D


def assemble_dtn(graph: MetricGraph, c: Conditions, lam) -> np.ndarray:
    """Classic reduction A + B D(lam) acting on endpoint values."""
    pair = as_pair(c)
    if pair.n_conditions != graph.trace.n_endpoints:
        raise GraphSpecError("conditions sized for a different graph")
    return pair.A + pair.B @ dtn_matrix(graph, lam)


# ----------------------------------------------------------------- dotted DtN

@dataclass(frozen=True)
class DottedProblem:
    """A graph with dots inserted, plus the transported conditions."""

    graph: MetricGraph
    conditions: ConditionsAB
    endpoint_map: dict[tuple[str, str], tuple[str, str]]  # old endpoint -> new endpoint
    plan: dict[str, float]


def apply_dots(graph: MetricGraph, plan: dict[str, float]) -> tuple[MetricGraph, dict]:
    """Insert the planned dots; map old endpoints to their new owners."""
    g = graph
    emap = {(e.id, w): (e.id, w) for e in graph.edges for w in (START, END)}
    for eid in sorted(plan):
        g = insert_dot(g, eid, plan[eid])
        emap[(eid, START)] = (f"{eid}.a", START)
        emap[(eid, END)] = (f"{eid}.b", END)
    return g, emap


def extend_conditions(c: Conditions, graph: MetricGraph, dotted: MetricGraph,
                      endpoint_map: dict) -> ConditionsAB:
    """Transport conditions to a dotted graph, adding Kirchhoff rows at each dot.

    Original rows keep their coefficients on the surviving endpoints; each dot
    contributes a value-matching row and an inward-derivative balance row,
    which together glue the two sub-edges back into one smooth solution.
    """
    pair = as_pair(c)
    old_tr, new_tr = graph.trace, dotted.trace
    n_new = new_tr.n_endpoints
    A = np.zeros((n_new, n_new), dtype=complex)
    B = np.zeros((n_new, n_new), dtype=complex)
    n_old = old_tr.n_endpoints
    for (eid, w), (nid, nw) in endpoint_map.items():
        A[:n_old, new_tr.slot(nid, nw)] = pair.A[:, old_tr.slot(eid, w)]
        B[:n_old, new_tr.slot(nid, nw)] = pair.B[:, old_tr.slot(eid, w)]
    row = n_old
    for dot in dotted.dot_vertices:
        if dot in graph.dot_vertices:
            continue
        (ea, wa), (eb, wb) = dotted.endpoints_at(dot)
        A[row, new_tr.slot(ea, wa)] = 1.0
        A[row, new_tr.slot(eb, wb)] = -1.0
        B[row + 1, new_tr.slot(ea, wa)] = 1.0
        B[row + 1, new_tr.slot(eb, wb)] = 1.0
        row += 2
    if row != n_new:
        raise GraphSpecError("dot bookkeeping mismatch while extending conditions")
    return ConditionsAB(A, B)


def dotted_problem(graph: MetricGraph, c: Conditions, lam,
                   plan: dict[str, float] | None = None) -> DottedProblem:
    """Dotted graph and transported conditions for one spectral parameter.

    With no explicit plan the dots are chosen pointwise in lam (an empty plan
    when lam misses every edge Dirichlet spectrum, in which case the problem
    is the original one).
    """
    if plan is None:
        plan = dot_positions(graph, float(np.real(lam)))
    dotted, emap = apply_dots(graph, plan)
    cond = extend_conditions(c, graph, dotted, emap) if plan else as_pair(c)
    return DottedProblem(dotted, cond, emap, dict(plan))


def assemble_modified_dtn(graph: MetricGraph, c: Conditions, lam,
                          plan: dict[str, float] | None = None) -> np.ndarray:
    """Classic reduction on the dotted graph; defined for every lam."""
    prob = dotted_problem(graph, c, lam, plan)
    return assemble_dtn(prob.graph, prob.conditions, lam)


# --------------------------------------------------------------- intersection

def solution_trace_columns(graph: MetricGraph, lam, basis: str = "cs") -> tuple[np.ndarray, np.ndarray]:
    """Columns spanning Q(lam), the direct sum of per-edge solution trace spaces.

    Returns (raw columns of shape (4m, 2m), per-column scale factors): column
    2i and 2i+1 carry the trace vectors of the fundamental pair of edge i,
    embedded at its trace slots, and are scaled by 1/max(1, norm) so the
    assembled singular values stay O(1).  The zero set is invariant under
    positive column scaling.
    """
    tr = graph.trace
    n, h = tr.dim, tr.n_endpoints
    Q = np.zeros((n, h), dtype=complex)
    for i, e in enumerate(graph.edges):
        if basis == "cs":
            cols = _edges.edge_trace_subspace(lam, e.length, e.potential)
        elif basis == "exp":
            if not isinstance(e.potential, ZeroPotential):
                raise GraphSpecError("exponential basis requires potential-free edges")
            cols = _edges.exp_trace_subspace(lam, e.length)
        else:
            raise GraphSpecError(f"unknown edge basis {basis!r}")
        p0, p1 = tr.slot(e.id, START), tr.slot(e.id, END)
        rows = (p0, h + p0, p1, h + p1)  # value@0, deriv@0, value@l, deriv@l
        Q[rows, 2 * i] = cols[:, 0]
        Q[rows, 2 * i + 1] = cols[:, 1]
    scales = 1.0 / np.maximum(1.0, np.linalg.norm(Q, axis=0))
    return Q, scales


def assemble_intersection(graph: MetricGraph, c: Conditions, lam,
                          basis: str = "cs") -> np.ndarray:
    """Stacked-basis matrix N(lam) = [P | Q(lam)] of shape 4m x 4m.

    dim(P intersect Q) = 4m - rank N(lam); an eigenvalue is exactly a rank
    deficiency.  Entire in lam and well defined on the Dirichlet spectrum.
    """
    P = as_subspace(c)
    if P.basis.shape[0] != graph.trace.dim:
        raise GraphSpecError("conditions sized for a different graph")
    Q, scales = solution_trace_columns(graph, lam, basis)
    return np.hstack([P.orthonormal, Q * scales[np.newaxis, :]])


# ------------------------------------------------------------------- secular

@dataclass(frozen=True)
class SecularSample:
    """Diagnostics of one backend matrix at one spectral parameter."""

    lam: float | complex
    backend: str
    dim: int
    smallest: tuple[float, ...]   # ascending, at least the smallest 4 (or all)
    largest: float
    log_abs_det: float
    det_phase: complex

    @property
    def sigma_min(self) -> float:
        return self.smallest[0]

    @property
    def cond(self) -> float:
        return self.largest / self.smallest[0] if self.smallest[0] > 0 else math.inf


def _column_normalized(M: np.ndarray) -> np.ndarray:
    scale = 1.0 / np.maximum(1.0, np.linalg.norm(M, axis=0))
    return M * scale[np.newaxis, :]


def backend_matrix(backend: str, graph: MetricGraph, c: Conditions, lam,
                   plan: dict[str, float] | None = None) -> np.ndarray:
    backend = _canonical_backend(backend)
    if backend == "dtn":
        return assemble_dtn(graph, c, lam)
    if backend == "dotted-dtn":
        return assemble_modified_dtn(graph, c, lam, plan)
    return assemble_intersection(graph, c, lam)


def secular(backend: str, graph: MetricGraph, c: Conditions, lam) -> SecularSample:
    """Singular values and determinant of the backend matrix at lam.

    Singular values are those of the column-normalized matrix (the scan
    quantity, scale-stable); the determinant is of the raw matrix, kept in
    overflow-safe log-magnitude form.
    """
    backend = _canonical_backend(backend)
    M = backend_matrix(backend, graph, c, lam)
    sv = np.linalg.svd(_column_normalized(M), compute_uv=False)
    asc = np.sort(sv)
    phase, logdet = np.linalg.slogdet(M)
    keep = min(max(4, 1), len(asc))
    return SecularSample(lam=lam, backend=backend, dim=M.shape[0],
                         smallest=tuple(float(s) for s in asc[:keep]),
                         largest=float(asc[-1]),
                         log_abs_det=float(logdet), det_phase=complex(phase))


# ------------------------------------------------------- null-vector recovery

@dataclass(frozen=True)
class EdgeCoefficients:
    """Edge-wise expansion f = a1 C + a2 S of a metric-graph function."""

    lam: float | complex
    coeffs: dict[str, tuple[complex, complex]]

    def trace_vector(self, graph: MetricGraph) -> np.ndarray:
        """Trace vector (U, U') of the expanded function."""
        tr = graph.trace
        out = np.zeros(tr.dim, dtype=complex)
        h = tr.n_endpoints
        for e in graph.edges:
            a1, a2 = self.coeffs.get(e.id, (0.0, 0.0))
            eb = _edges.cs_values(self.lam, e.length, e.potential)
            p0, p1 = tr.slot(e.id, START), tr.slot(e.id, END)
            out[p0] = a1
            out[h + p0] = a2
            out[p1] = a1 * eb.C + a2 * eb.S
            out[h + p1] = -(a1 * eb.Cp + a2 * eb.Sp)
        return out

    def sample(self, graph: MetricGraph, edge_id: str, xs) -> np.ndarray:
        """Values of the function along one edge."""
        e = graph.edge(edge_id)
        a1, a2 = self.coeffs.get(edge_id, (0.0, 0.0))
        C, S, _, _ = _edges.cs_profile(self.lam, e.length, e.potential, xs)
        return a1 * C + a2 * S


def solution_from_nullvector(backend: str, graph: MetricGraph, c: Conditions,
                             lam, vec: np.ndarray) -> EdgeCoefficients:
    """Recover per-edge coefficients from a null vector of the backend matrix.

    The input must actually lie in the numerical null space; for the dtn
    backends the coefficients follow from the endpoint values together with
    the DtN derivative data, for the intersection backend they are read off
    the Q-block components.
    """
    backend = _canonical_backend(backend)
    vec = np.asarray(vec, dtype=complex).ravel()
    M = backend_matrix(backend, graph, c, lam)
    if M.shape[1] != vec.size:
        raise GraphSpecError(f"null vector of dimension {vec.size}, expected {M.shape[1]}")
    res = np.linalg.norm(M @ vec) / max(np.linalg.norm(vec), 1e-300)
    if res > NULLVEC_RTOL:
        raise NotAnEigenvalueError(
            f"vector is not in the numerical null space (residual {res:.2e})")

    if backend == "intersection":
        h = graph.trace.n_endpoints
        _, scales = solution_trace_columns(graph, lam)
        beta = -vec[h:] * scales
        coeffs = {e.id: (complex(beta[2 * i]), complex(beta[2 * i + 1]))
                  for i, e in enumerate(graph.edges)}
        return EdgeCoefficients(lam, coeffs)

    if backend == "dtn":
        work_graph, U = graph, vec
    else:
        prob = dotted_problem(graph, c, lam)
        work_graph, U = prob.graph, vec
    Up = dtn_matrix(work_graph, lam) @ U
    tr = work_graph.trace
    coeffs: dict[str, tuple[complex, complex]] = {}
    for e in work_graph.edges:
        p0 = tr.slot(e.id, START)
        coeffs[e.id] = (complex(U[p0]), complex(Up[p0]))
    if backend == "dotted-dtn":
        # A solution gluing smoothly across a dot solves the original edge's
        # equation, so the first sub-edge's coefficients are the edge's own.
        merged: dict[str, tuple[complex, complex]] = {}
        for e in graph.edges:
            merged[e.id] = coeffs[f"{e.id}.a"] if f"{e.id}.a" in coeffs else coeffs[e.id]
        coeffs = merged
    return EdgeCoefficients(lam, coeffs)


def null_basis(backend: str, graph: MetricGraph, c: Conditions, lam,
               mult_rtol: float = 1e-6) -> np.ndarray:
    """Orthonormal basis of the numerical null space of the backend matrix."""
    M = backend_matrix(_canonical_backend(backend), graph, c, lam)
    Mn = _column_normalized(M)
    _, sv, Vh = np.linalg.svd(Mn)
    cut = mult_rtol * sv[0] if sv[0] > 0 else mult_rtol
    null = Vh[sv < cut].conj().T
    # undo the column scaling so the vectors annihilate the raw matrix
    scale = 1.0 / np.maximum(1.0, np.linalg.norm(M, axis=0))
    raw = null * scale[:, np.newaxis]
    if raw.shape[1]:
        raw, _ = np.linalg.qr(raw)
    return raw


def nullity(backend: str, graph: MetricGraph, c: Conditions, lam,
            mult_rtol: float = 1e-6) -> int:
    M = backend_matrix(_canonical_backend(backend), graph, c, lam)
    sv = np.linalg.svd(_column_normalized(M), compute_uv=False)
    return int(np.sum(sv < mult_rtol * sv[0]))
