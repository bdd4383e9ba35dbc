"""Eigenvalue search on real windows, eigenfunctions, and branch tracking.

The secular quantity is the smallest singular value of a backend matrix.  A
window is scanned on a grid that is uniform in k = sqrt(lambda) (mean spacing
of eigenvalues in k is pi / total length, so a fixed oversampling per mean
spacing cannot skip minima); every local minimum is then refined by a
bracketed golden-section search and accepted when the refined singular value
vanishes at tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import edges as _edges
from . import reduction as _red
from .conditions import (Conditions, as_pair, as_subspace, is_self_adjoint)
from .exceptions import (BackendPreconditionError, GraphSpecError,
                         NotAnEigenvalueError)
from .graphs import MetricGraph, dirichlet_indices, dot_positions
from .potentials import SampledPotential, is_closed_form


@dataclass(frozen=True)
class ScanOptions:
    """Search knobs; the defaults are the documented contract."""

    oversample: int = 8          # grid points per mean eigenvalue spacing in k
    eig_tol: float = 1e-8        # accept a refined minimum below this (times sigma_max)
    mult_rtol: float = 1e-6      # nullity cut, relative to sigma_max
    dedup_tol: float = 1e-8      # merge refined minima closer than this (relative)
    refine_rel: float = 1e-11    # golden-section bracket width target (relative)
    negative_step: float = 0.25  # lambda step cap below 0


DEFAULT_OPTIONS = ScanOptions()


@dataclass(frozen=True)
class Eigenvalue:
    lam: float
    multiplicity: int
    backend: str
    residual: float
    width: float


# ----------------------------------------------------------- matrix families

def matrix_family(graph: MetricGraph, c: Conditions, backend: str):
    """lam -> backend matrix, with fixed condition data precomputed.

    For the dotted backend the dots are re-planned at every lam; refinement
    uses `frozen_dotted_family` instead so the matrix family stays continuous
    across a bracket that straddles a Dirichlet point.
    """
    backend = _red._canonical_backend(backend)
    if backend == "intersection":
        P = as_subspace(c).orthonormal

        def matfn(lam):
            Q, scales = _red.solution_trace_columns(graph, lam)
            return np.hstack([P, Q * scales[np.newaxis, :]])
    elif backend == "dtn":
        pair = as_pair(c)

        def matfn(lam):
            return pair.A + pair.B @ _red.dtn_matrix(graph, lam)
    else:
        pair = as_pair(c)

        def matfn(lam):
            return _red.assemble_modified_dtn(graph, pair, lam)
    return matfn


def frozen_dotted_family(graph: MetricGraph, c: Conditions, lams):
    """Dotted family with one dot plan shared by all the given lam values."""
    plan: dict[str, float] = {}
    for lam in lams:
        for eid, pos in dot_positions(graph, float(lam)).items():
            plan.setdefault(eid, pos)
    pair = as_pair(c)
    prob = _red.dotted_problem(graph, pair, lams[0], plan)

    def matfn(lam):
        return _red.assemble_dtn(prob.graph, prob.conditions, lam)

    return matfn


def _smin(M: np.ndarray) -> float:
    return float(np.linalg.svd(_red._column_normalized(M), compute_uv=False)[-1])


# ------------------------------------------------------------------ scanning

def _scan_grid(window: tuple[float, float], l_total: float, opts: ScanOptions) -> np.ndarray:
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise GraphSpecError(f"window must satisfy lo < hi, got [{lo}, {hi}]")
    dk = math.pi / (l_total * opts.oversample)
    parts = []
    if lo < 0:
        step = min(opts.negative_step, dk)
        parts.append(np.arange(lo, min(hi, 0.0), step))
    k_lo = math.sqrt(max(lo, 0.0))
    k_hi = math.sqrt(max(hi, 0.0))
    if k_hi > k_lo or hi >= 0:
        ks = np.arange(k_lo, k_hi + dk, dk)
        parts.append(ks ** 2)
    grid = np.unique(np.clip(np.concatenate(parts), lo, hi))
    if grid[0] > lo:
        grid = np.concatenate([[lo], grid])
    if grid[-1] < hi:
        grid = np.concatenate([grid, [hi]])
    return grid


def _golden(f, a: float, b: float, rel: float) -> tuple[float, float, float]:
    """Golden-section minimum of f on [a, b]; returns (argmin, width, value)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(200):
        if (b - a) <= rel * (1.0 + abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = c if fc < fd else d
    return x, b - a, min(fc, fd)


def scan_matrix_family(matfn, window: tuple[float, float], l_total: float,
                       opts: ScanOptions = DEFAULT_OPTIONS,
                       refine_matfn_for=None) -> list[tuple[float, int, float, float]]:
    """Locate rank-deficiency points of a matrix family on a real window.

    Returns (lam, multiplicity, sigma_min, bracket width) tuples.  Every local
    minimum of the scanned singular value is refined; a cheap pre-filter would
    risk skipping genuine minima whose nearest grid sample is still O(1).
    `refine_matfn_for(a, b)` may supply a replacement family for refinement
    on the bracket [a, b] (used by the dotted backend).
    """
    grid = _scan_grid(window, l_total, opts)
    vals = np.array([_smin(matfn(t)) for t in grid])

    brackets: list[tuple[float, float]] = []
    for i in range(1, len(grid) - 1):
        if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]:
            if vals[i] < vals[i - 1] or vals[i] < vals[i + 1]:
                brackets.append((grid[i - 1], grid[i + 1]))
    if len(grid) >= 2 and vals[0] < vals[1]:
        brackets.append((grid[0], grid[1]))
    if len(grid) >= 2 and vals[-1] < vals[-2]:
        brackets.append((grid[-2], grid[-1]))

    found: list[tuple[float, int, float, float]] = []
    for a, b in brackets:
        local = matfn if refine_matfn_for is None else refine_matfn_for(a, b)
        lam, width, smin = _golden(lambda t: _smin(local(t)), a, b,
                                   rel=opts.refine_rel)
        M = local(lam)
        sv = np.linalg.svd(_red._column_normalized(M), compute_uv=False)
        if sv[-1] >= opts.eig_tol * max(1.0, sv[0]):
            continue
        mult = int(np.sum(sv < opts.mult_rtol * sv[0]))
        if not (window[0] <= lam <= window[1]):
            continue
        found.append((float(lam), mult, float(sv[-1]), float(width)))

    found.sort()
    merged: list[tuple[float, int, float, float]] = []
    for item in found:
        if merged and abs(item[0] - merged[-1][0]) <= opts.dedup_tol * (1.0 + abs(item[0])):
            if item[2] < merged[-1][2]:
                merged[-1] = item
        else:
            merged.append(item)
    return merged


# ------------------------------------------------------------- public search

def _check_dtn_window(graph: MetricGraph, window) -> None:
    hits = []
    for e in graph.edges:
        hits += [lam for _, lam in dirichlet_indices(e, window[1])
                 if window[0] <= lam <= window[1]]
    if hits:
        raise BackendPreconditionError(
            f"window [{window[0]}, {window[1]}] intersects the edge Dirichlet "
            f"spectrum at {sorted(hits)[:4]}{'...' if len(hits) > 4 else ''}; "
            "the classic dtn backend is undefined there",
            hint="switch to the 'dotted-dtn' or 'intersection' backend")


def eigenvalues_in(graph: MetricGraph, c: Conditions, window: tuple[float, float],
                   backend: str = "intersection",
                   opts: ScanOptions = DEFAULT_OPTIONS,
                   certify: bool = True) -> list[Eigenvalue]:
    """All eigenvalues in a real window, with multiplicities and certificates.

    Self-adjoint conditions have real spectrum, which is what a real-window
    scan can promise; for non-self-adjoint conditions the search still runs
    but is flagged as best-effort (complex eigenvalues are invisible to it).
    """
    backend = _red._canonical_backend(backend)
    ok, witness = is_self_adjoint(as_pair(c))
    if not ok:
        warnings.warn(f"conditions are not self-adjoint (witness {witness:.2e}); "
                      "real-window search is best-effort", stacklevel=2)
    if backend == "dtn":
        _check_dtn_window(graph, window)

    matfn = matrix_family(graph, c, backend)
    refine_for = None
    if backend == "dotted-dtn":
        def refine_for(a, b):
            pts = []
            pad = 0.05 * (b - a)
            for e in graph.edges:
                pts += [lam for _, lam in dirichlet_indices(e, b + pad)
                        if a - pad <= lam <= b + pad]
            if not pts:
                return matfn
            return frozen_dotted_family(graph, c, sorted(pts))

    raw = scan_matrix_family(matfn, window, graph.total_length, opts, refine_for)
    out = []
    for lam, mult, smin, width in raw:
        res = math.nan
        if certify:
            basis = eigenfunction_basis(graph, c, lam, backend=backend, opts=opts)
            res = max(residual(graph, c, lam, f) for f in basis)
        out.append(Eigenvalue(lam=lam, multiplicity=mult, backend=backend,
                              residual=res, width=width))
    return out


def eigenfunction_basis(graph: MetricGraph, c: Conditions, lam: float,
                        backend: str = "intersection",
                        opts: ScanOptions = DEFAULT_OPTIONS) -> list[_red.EdgeCoefficients]:
    """Basis of the numerical eigenspace at a detected eigenvalue."""
    backend = _red._canonical_backend(backend)
    nb = _red.null_basis(backend, graph, c, lam, mult_rtol=opts.mult_rtol)
    if nb.shape[1] == 0:
        raise NotAnEigenvalueError(f"lambda = {lam} is not an eigenvalue "
                                   f"(no numerical null space)")
    return [_red.solution_from_nullvector(backend, graph, c, lam, nb[:, j])
            for j in range(nb.shape[1])]


def residual(graph: MetricGraph, c: Conditions, lam: float,
             f: _red.EdgeCoefficients, n_samples: int = 64) -> float:
    """Eigenpair certificate: vertex-condition violation plus equation error.

    The expansion in the fundamental pair satisfies the edge equation
    identically for closed-form potentials; for sampled potentials the
    equation error is estimated from the integrated derivative data.
    """
    tau = f.trace_vector(graph)
    cond_res = c.residual(tau)  # violation in either representation
    ode_res = 0.0
    for e in graph.edges:
        if not isinstance(e.potential, SampledPotential):
            continue
        a1, a2 = f.coeffs.get(e.id, (0.0, 0.0))
        if a1 == 0 and a2 == 0:
            continue
        h = 1e-4 * e.length
        xs = np.linspace(h, e.length - h, n_samples)
        grid = np.concatenate([xs - h, xs, xs + h])
        C, S, Cp, Sp = _edges.cs_profile(lam, e.length, e.potential, grid)
        fv = a1 * C + a2 * S
        fp = a1 * Cp + a2 * Sp
        n = len(xs)
        second = (fp[2 * n:] - fp[:n]) / (2 * h)
        eq = -second + (e.potential(xs) - lam) * fv[n:2 * n]
        scale = max(np.max(np.abs(fv[n:2 * n])), 1e-300)
        ode_res = max(ode_res, float(np.max(np.abs(eq)) / scale))
    return max(cond_res, ode_res)


# ------------------------------------------------------------ path tracking

@dataclass(frozen=True)
class EigencurveSample:
    t: float
    eigenvalues: tuple[tuple[float, int], ...]  # sorted (lam, multiplicity)
    b_singular: bool

    @property
    def flat(self) -> tuple[float, ...]:
        return tuple(lam for lam, mult in self.eigenvalues for _ in range(mult))


@dataclass(frozen=True)
class Branch:
    t: np.ndarray
    lam: np.ndarray


@dataclass
class TrackResult:
    samples: list[EigencurveSample]
    branches: list[Branch]
    report: dict


def _b_singular(c: Conditions) -> bool:
    pair = as_pair(c)
    sv = np.linalg.svd(pair.B, compute_uv=False)
    return bool(sv[-1] <= 1e-10 * max(sv[0], 1.0))


def track_along_path(graph: MetricGraph, path, t_grid, window,
                     backend: str = "intersection",
                     opts: ScanOptions = DEFAULT_OPTIONS,
                     cheb_nodes: int = 24, held_out: int = 10,
                     rng: np.random.Generator | None = None) -> TrackResult:
    """Eigenvalue branches along a path of vertex conditions, with smoothness evidence.

    ``path(t)`` returns the conditions at parameter t.  Branches are matched
    by sorted order with a velocity-extrapolation check that flags crossing
    ambiguity; each branch present over the whole grid is re-sampled at
    Chebyshev nodes, fitted, and validated on held-out points.  Spectral
    accuracy of that fit across points where the pair representation breaks
    down (B singular) is the tracked smoothness evidence.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        samples = []
        for t in t_grid:
            c = path(t)
            evs = eigenvalues_in(graph, c, window, backend=backend, opts=opts,
                                 certify=False)
            samples.append(EigencurveSample(
                t=float(t),
                eigenvalues=tuple((ev.lam, ev.multiplicity) for ev in evs),
                b_singular=_b_singular(c)))

    counts = {len(s.flat) for s in samples}
    n_branch = min(counts) if counts else 0
    full = (len(counts) == 1)
    crossings = []
    lam_rows = []
    for s in samples:
        lam_rows.append(np.asarray(s.flat[:n_branch]))
    lam_mat = np.vstack(lam_rows) if n_branch else np.zeros((len(samples), 0))

    for j in range(n_branch):
        col = lam_mat[:, j]
        for i in range(2, len(col)):
            pred = col[i - 1] + (col[i - 1] - col[i - 2])
            tol = 1e-6 + 0.5 * abs(col[i - 1] - col[i - 2]) + 1e-6 * abs(col[i - 1])
            others = np.abs(lam_mat[i] - pred)
            if others.size > 1 and np.min(np.delete(others, j)) < 1e-6:
                crossings.append((float(t_grid[i]), j))

    branches = [Branch(t=t_grid.copy(), lam=lam_mat[:, j].copy())
                for j in range(n_branch)]

    report: dict = {
        "nodes": cheb_nodes,
        "window": [float(window[0]), float(window[1])],
        "all_t_same_count": full,
        "b_singular_at": [s.t for s in samples if s.b_singular],
        "crossing_flags": crossings,
        "branches": [],
    }

    if rng is None:
        rng = np.random.default_rng(0)
    t0, t1 = float(t_grid[0]), float(t_grid[-1])

    def branch_value(t: float, guess: float) -> float:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            evs = eigenvalues_in(graph, path(t), window, backend=backend,
                                 opts=opts, certify=False)
        vals = [ev.lam for ev in evs for _ in range(ev.multiplicity)]
        if not vals:
            return math.nan
        return min(vals, key=lambda v: abs(v - guess))

    for j, br in enumerate(branches):
        interp = lambda t: float(np.interp(t, br.t, br.lam))
        xc = np.cos(np.pi * (np.arange(cheb_nodes) + 0.5) / cheb_nodes)
        tc = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * xc
        yc = np.array([branch_value(t, interp(t)) for t in tc])
        fit = np.polynomial.Chebyshev.fit(tc, yc, deg=cheb_nodes - 1,
                                          domain=[t0, t1])
        th = np.sort(rng.uniform(t0, t1, held_out))
        yh = np.array([branch_value(t, interp(t)) for t in th])
        rel = np.max(np.abs(fit(th) - yh) / (1.0 + np.abs(yh)))
        dlam = np.diff(br.lam)
        dfit = np.diff(fit(br.t))
        jumps = np.abs(dlam - dfit) / (1.0 + np.abs(br.lam[:-1]))
        report["branches"].append({
            "index": j,
            "fit_rel_error": float(rel),
            "max_unexplained_jump": float(np.max(jumps)) if jumps.size else 0.0,
        })

    return TrackResult(samples=samples, branches=branches, report=report)
