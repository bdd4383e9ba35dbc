"""Metric-graph data model, trace indexing, dotted graphs, and rose folding.

A metric graph is a finite combinatorial graph whose edges carry lengths and
potentials.  The trace vector of a function collects its values U and inward
derivatives U' at every edge endpoint; the canonical layout is fixed by the
lexicographic edge order (start endpoint before end), with the full vector
being the concatenation (U, U') of length 4|E|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from . import edges as _edges
from .exceptions import GraphSpecError
from .potentials import (ConstantPotential, Potential, ZERO, ZeroPotential,
                         is_closed_form, potential_from_spec)

START = "start"
END = "end"

# An edge is "dotted" for a given lam when |S_l|, measured against the natural
# oscillation scale, drops below this.  Much looser than the dtn_block refusal
# threshold, so dotted assembly never sees a refusal from a sub-edge.
DOT_TRIGGER = 1e-3


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str
    length: float
    potential: Potential = ZERO


@dataclass(frozen=True)
class TraceIndex:
    """Bijection between edge endpoints and trace-vector positions.

    Endpoint slot of edge i (in sorted-id order) is 2i for its start and
    2i + 1 for its end; values occupy slots 0 .. 2|E|-1 and inward derivatives
    occupy 2|E| .. 4|E|-1 of the full trace vector.
    """

    edge_ids: tuple[str, ...]

    @cached_property
    def _pos(self) -> dict[str, int]:
        return {e: i for i, e in enumerate(self.edge_ids)}

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    @property
    def n_endpoints(self) -> int:
        return 2 * len(self.edge_ids)

    @property
    def dim(self) -> int:
        return 4 * len(self.edge_ids)

    def slot(self, edge_id: str, which: str) -> int:
        if which not in (START, END):
            raise GraphSpecError(f"endpoint must be {START!r} or {END!r}, got {which!r}")
        return 2 * self._pos[edge_id] + (0 if which == START else 1)

    def endpoint(self, slot: int) -> tuple[str, str]:
        edge_id = self.edge_ids[slot // 2]
        return edge_id, START if slot % 2 == 0 else END

    def value_index(self, edge_id: str, which: str) -> int:
        return self.slot(edge_id, which)

    def deriv_index(self, edge_id: str, which: str) -> int:
        return self.n_endpoints + self.slot(edge_id, which)


@dataclass(frozen=True)
class MetricGraph:
    """Immutable metric graph; all operations on it are pure functions."""

    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    dot_vertices: tuple[str, ...] = ()  # degree-2 vertices that demand Kirchhoff gluing

    @cached_property
    def trace(self) -> TraceIndex:
        return TraceIndex(tuple(e.id for e in self.edges))

    @cached_property
    def _by_id(self) -> dict[str, Edge]:
        return {e.id: e for e in self.edges}

    def edge(self, edge_id: str) -> Edge:
        return self._by_id[edge_id]

    @cached_property
    def _incidence(self) -> dict[str, tuple[tuple[str, str], ...]]:
        inc: dict[str, list[tuple[str, str]]] = {v: [] for v in self.vertices}
        for e in self.edges:
            inc[e.src].append((e.id, START))
            inc[e.dst].append((e.id, END))
        return {v: tuple(ps) for v, ps in inc.items()}

    def endpoints_at(self, vertex: str) -> tuple[tuple[str, str], ...]:
        """Edge endpoints incident to a vertex; a loop contributes both of its ends."""
        return self._incidence[vertex]

    def degree(self, vertex: str) -> int:
        return len(self._incidence[vertex])

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def total_length(self) -> float:
        return float(sum(e.length for e in self.edges))


def build_graph(spec: dict) -> MetricGraph:
    """Validate a parsed graph description and fix the canonical trace layout."""
    try:
        vertex_ids = [str(v) for v in spec["vertices"]]
        edge_specs = list(spec["edges"])
    except (KeyError, TypeError) as exc:
        raise GraphSpecError("graph description needs 'vertices' and 'edges'") from exc
    if len(set(vertex_ids)) != len(vertex_ids):
        raise GraphSpecError("duplicate vertex id")
    vset = set(vertex_ids)

    built = []
    for es in edge_specs:
        try:
            eid, src, dst = str(es["id"]), str(es["from"]), str(es["to"])
            length = float(es["length"])
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphSpecError(f"malformed edge entry {es!r}") from exc
        if src not in vset or dst not in vset:
            raise GraphSpecError(f"edge {eid!r} references unknown vertex")
        if not (length > 0 and math.isfinite(length)):
            raise GraphSpecError(f"edge {eid!r}: non-positive length")
        pot = potential_from_spec(es.get("potential"))
        _validate_potential(pot, length, eid)
        built.append(Edge(eid, src, dst, length, pot))
    if not built:
        raise GraphSpecError("graph needs at least one edge")
    ids = [e.id for e in built]
    if len(set(ids)) != len(ids):
        raise GraphSpecError("duplicate edge id")
    return MetricGraph(tuple(sorted(vertex_ids)), tuple(sorted(built, key=lambda e: e.id)))


def _validate_potential(pot: Potential, length: float, eid: str) -> None:
    from .potentials import PiecewiseConstantPotential, SampledPotential
    if isinstance(pot, PiecewiseConstantPotential):
        if pot.breakpoints and not (0 < pot.breakpoints[0] and pot.breakpoints[-1] < length):
            raise GraphSpecError(f"edge {eid!r}: potential breakpoints outside (0, length)")
    if isinstance(pot, SampledPotential):
        if pot.x[0] > 1e-12 or pot.x[-1] < length - 1e-12:
            raise GraphSpecError(f"edge {eid!r}: sampled potential grid must cover [0, length]")


def graph_from_edges(edge_list, extra_vertices=()) -> MetricGraph:
    """Convenience constructor from (id, src, dst, length[, potential]) tuples."""
    spec_edges = []
    verts = set(extra_vertices)
    built = []
    for item in edge_list:
        eid, src, dst, length = item[:4]
        pot = item[4] if len(item) > 4 else ZERO
        verts.update((src, dst))
        built.append(Edge(str(eid), str(src), str(dst), float(length), pot))
        if length <= 0:
            raise GraphSpecError(f"edge {eid!r}: non-positive length")
    if not built:
        raise GraphSpecError("graph needs at least one edge")
    ids = [e.id for e in built]
    if len(set(ids)) != len(ids):
        raise GraphSpecError("duplicate edge id")
    return MetricGraph(tuple(sorted(verts)), tuple(sorted(built, key=lambda e: e.id)))


# --------------------------------------------------------------- Dirichlet data

def dirichlet_indices(edge: Edge, lam_max: float) -> list[tuple[int, float]]:
    """Indexed edge Dirichlet eigenvalues (n, lam_n) with lam_n <= lam_max.

    Zero and constant potentials use the closed form (n pi / l)^2 (+ shift);
    anything else locates the zeros of lam -> S(lam, l) numerically.
    """
    l = edge.length
    pot = edge.potential
    if isinstance(pot, (ZeroPotential, ConstantPotential)):
        shift = pot.min_value
        out = []
        n = 1
        while shift + (n * math.pi / l) ** 2 <= lam_max:
            out.append((n, shift + (n * math.pi / l) ** 2))
            n += 1
        return out
    return _dirichlet_numeric(edge, lam_max)


def _dirichlet_numeric(edge: Edge, lam_max: float) -> list[tuple[int, float]]:
    l, pot = edge.length, edge.potential
    lo = pot.min_value
    if lam_max <= lo:
        return []

    def s_of(lam: float) -> float:
        return float(np.real(_edges.cs_values(lam, l, pot).S))

    # In k = sqrt(lam - min V) the zeros are ~ pi/l apart; 16 samples per
    # spacing cannot skip a sign change of the (simple-zero) function S.
    dk = math.pi / (16 * l)
    k_hi = math.sqrt(lam_max - lo)
    ks = np.arange(0.0, k_hi + dk, dk)
    lams = lo + ks ** 2
    vals = [s_of(t) for t in lams]
    roots = []
    for i in range(len(lams) - 1):
        if vals[i] == 0.0:
            roots.append(lams[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(s_of, lams[i], lams[i + 1], xtol=1e-13, rtol=1e-15))
    roots = [r for r in roots if r <= lam_max]
    return [(n + 1, float(r)) for n, r in enumerate(sorted(roots))]


def _dirichlet_index_at(edge: Edge, lam: float) -> int:
    """Index n of the edge Dirichlet eigenvalue closest to lam (assumed a hit)."""
    pot = edge.potential
    if isinstance(pot, (ZeroPotential, ConstantPotential)):
        k = math.sqrt(max(lam - pot.min_value, 0.0))
        return max(1, round(k * edge.length / math.pi))
    spacing = (math.pi / edge.length) ** 2  # local gap scale, good enough for counting
    hits = dirichlet_indices(edge, lam + 0.25 * spacing)
    if not hits:
        return 1
    n, lam_n = min(hits, key=lambda t: abs(t[1] - lam))
    return n


def _sine_scale(lam: float, edge: Edge) -> float:
    """Natural magnitude of S(lam, l): min(l, 1/k) away from Dirichlet points."""
    k = math.sqrt(max(float(np.real(lam)) - edge.potential.min_value, 0.0))
    return min(edge.length, 1.0 / k) if k > 0 else edge.length


def dot_positions(graph: MetricGraph, lam: float) -> dict[str, float]:
    """Interior positions splitting every Dirichlet-hit edge away from lam.

    An edge appears in the map only when lam sits on its Dirichlet spectrum
    (at the dotting tolerance).  The returned position avoids the zeros of the
    edge Dirichlet eigenfunction, so lam is not a Dirichlet eigenvalue of
    either sub-segment: for closed-form potentials the first arch midpoint
    l/(2n) is exact, otherwise the eigenfunction |S(lam, .)| is sampled and
    its maximizer taken.
    """
    plan: dict[str, float] = {}
    for e in graph.edges:
        eb = _edges.cs_values(lam, e.length, e.potential)
        if abs(eb.S) >= DOT_TRIGGER * _sine_scale(lam, e):
            continue
        n = _dirichlet_index_at(e, lam)
        if is_closed_form(e.potential) and isinstance(e.potential, (ZeroPotential, ConstantPotential)):
            plan[e.id] = e.length / (2 * n)
            continue
        xs = np.linspace(0.0, e.length, 64 * (n + 1) + 2)[1:-1]
        _, S, _, _ = _edges.cs_profile(lam, e.length, e.potential, xs)
        order = np.argsort(-np.abs(S))
        pos = None
        for idx in order[:16]:
            x = float(xs[idx])
            sub_b = _edges.cs_values(lam, e.length - x, e.potential.restrict(x, e.length))
            if (abs(S[idx]) > 3 * DOT_TRIGGER * _sine_scale(lam, e)
                    and abs(sub_b.S) > DOT_TRIGGER * _sine_scale(lam, e)):
                pos = x
                break
        if pos is None:  # extremely defensive; the maximizer always clears in practice
            pos = float(xs[order[0]])
        plan[e.id] = pos
    return plan


# ------------------------------------------------------------------- dotting

def insert_dot(graph: MetricGraph, edge_id: str, position: float) -> MetricGraph:
    """Split an edge at an interior position, marking the new vertex for Kirchhoff gluing.

    The two sub-edges inherit the restricted potential; functions matching in
    value and first derivative across the dot are exactly the solutions on the
    original edge, so the spectrum is unchanged once Kirchhoff conditions are
    imposed there.
    """
    e = graph.edge(edge_id)
    x = float(position)
    if not (0.0 < x < e.length):
        raise GraphSpecError(f"dot position {x} outside (0, {e.length}) on edge {edge_id!r}")
    dot = f"{edge_id}.dot"
    if dot in graph.vertices:
        raise GraphSpecError(f"vertex id {dot!r} already taken")
    ea = Edge(f"{edge_id}.a", e.src, dot, x, e.potential.restrict(0.0, x))
    eb = Edge(f"{edge_id}.b", dot, e.dst, e.length - x, e.potential.restrict(x, e.length))
    new_edges = tuple(sorted((eo for eo in graph.edges if eo.id != edge_id), key=lambda t: t.id))
    new_edges = tuple(sorted(new_edges + (ea, eb), key=lambda t: t.id))
    return MetricGraph(tuple(sorted(graph.vertices + (dot,))), new_edges,
                       graph.dot_vertices + (dot,))


def fold_to_rose(graph: MetricGraph) -> tuple[MetricGraph, np.ndarray]:
    """Fold all vertices into one, turning every edge into a loop petal.

    Edge ids, lengths and potentials are untouched, so the canonical trace
    layout is unchanged: the returned permutation (old slot -> new slot) is
    the identity, and conditions transported through it leave the spectrum
    invariant.
    """
    hub = sorted(graph.vertices)[0]
    petals = tuple(replace(e, src=hub, dst=hub) for e in graph.edges)
    rose = MetricGraph((hub,), petals)
    return rose, np.arange(graph.trace.dim)
