"""Monotone coupling of the cluster measures across all edge weights.

A label state Z assigns each edge a value in [0,1]; thresholding at p
yields the projection omega_p = {Z <= p}, and a single label Markov chain
makes every projection perform the heat-bath dynamics simultaneously.  The
update law at an edge with connection threshold T (the minimax label over
paths between its endpoints, without the edge) has distribution function
p for p >= T and p/(p+(1-p)q) below, hence a Dirac atom of mass
T - T/(T+(1-T)q) at T for q > 1.  The atom copies the threshold edge's
label bit for bit; provenance tokens make "copied together" exact, and a
cloud is a maximal set of edges sharing a token -- edges that appear
simultaneously as p sweeps upward.

Finite volume with free boundary conditions only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sp_stats

from . import _kernels
from .lattice import LatticeDomain, TorusDomain
from .measure import Configuration, ModelParams
from .rng import child_generator

SENTINEL_PROVENANCE = 0  # "no path": the atom there has zero mass


class CouplingError(ValueError):
    pass


@dataclass(frozen=True)
class Label:
    value: float
    provenance: int


@dataclass
class LabelState:
    """Label per edge plus the provenance counter of its chain."""

    domain: LatticeDomain | TorusDomain
    values: np.ndarray
    provenance: np.ndarray
    next_token: int

    @staticmethod
    def fresh(domain, rng: np.random.Generator) -> "LabelState":
        vals = rng.random(domain.n_edges)
        prov = np.arange(1, domain.n_edges + 1, dtype=np.int64)
        return LabelState(domain, vals, prov, next_token=domain.n_edges)

    def label(self, e: int) -> Label:
        return Label(float(self.values[e]), int(self.provenance[e]))

    def dump_csv(self, path):
        """Snapshot format: one row per edge, the label printed with 17
        significant digits and the provenance token as an unsigned 64-bit
        integer."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["edge", "value", "provenance"])
            for e in range(self.domain.n_edges):
                w.writerow([e, f"{self.values[e]:.17g}",
                            int(np.uint64(self.provenance[e]))])


@dataclass
class Cloud:
    level: float
    edges: list


def project(z: LabelState, p: float) -> Configuration:
    """Threshold projection: edge open iff its label is at most p."""
    if not 0.0 <= p <= 1.0:
        raise CouplingError("projection level outside [0,1]")
    return Configuration(z.domain, z.values <= p)


def threshold(z: LabelState, e: int) -> Label:
    """Connection threshold of edge e: the lowest level at which its
    endpoints join without it = the minimax (bottleneck) path value, with
    the provenance of the label achieving it.  (1, sentinel) when no path
    exists; the atom at 1 has zero mass, so the sentinel is never copied."""
    parent = np.arange(z.domain.n_vertices, dtype=np.int64)
    eu = z.domain.edges[:, 0].astype(np.int64)
    ev = z.domain.edges[:, 1].astype(np.int64)
    val, te = _kernels.bottleneck_threshold(eu, ev, z.values, np.int64(e),
                                            np.int64(z.domain.n_vertices), parent)
    if te < 0:
        return Label(1.0, SENTINEL_PROVENANCE)
    return Label(float(val), int(z.provenance[te]))


def atom_mass(t: float, q: float) -> float:
    """Mass of the Dirac atom at the threshold: T - T/(T+(1-T)q)."""
    return t - t / (t + (1.0 - t) * q)


def sample_update(t: Label, params: ModelParams, rng: np.random.Generator,
                  fresh_token: int) -> tuple[Label, int]:
    """Inverse-distribution sampling of the update label.

    Draw V uniform: below the corner value T/(T+(1-T)q) the label is
    V q / (1 + V (q-1)) with a fresh token; between the corner and T it is
    the atom, copying the threshold's value and token; above T it is V with
    a fresh token.  Returns (label, next fresh token counter).
    """
    q = params.q
    T = t.value
    V = float(rng.random())
    corner = T / (T + (1.0 - T) * q)
    if V < corner:
        fresh_token += 1
        return Label(V * q / (1.0 + V * (q - 1.0)), fresh_token), fresh_token
    if V <= T:
        return Label(T, t.provenance), fresh_token
    fresh_token += 1
    return Label(V, fresh_token), fresh_token


def step(z: LabelState, params: ModelParams, rng: np.random.Generator) -> None:
    """Replace one uniformly chosen edge's label via the update law; all
    threshold projections simultaneously perform a heat-bath update."""
    e = int(rng.integers(0, z.domain.n_edges))
    lab, z.next_token = sample_update(threshold(z, e), params, rng, z.next_token)
    z.values[e] = lab.value
    z.provenance[e] = lab.provenance


class CouplingChain:
    """Kernel-driven label chain (free boundary conditions)."""

    def __init__(self, domain, q: float, seed=0):
        if q < 1.0:
            raise CouplingError("q must be >= 1 for the update law to be a "
                                "distribution function")
        self.domain = domain
        self.q = float(q)
        self.rng = seed if isinstance(seed, np.random.Generator) else child_generator(seed)
        self.state = LabelState.fresh(domain, self.rng)
        self._eu = domain.edges[:, 0].astype(np.int64)
        self._ev = domain.edges[:, 1].astype(np.int64)
        self._parent = np.arange(domain.n_vertices, dtype=np.int64)

    def _draw(self, k: int):
        edges = self.rng.integers(0, self.domain.n_edges, size=k, dtype=np.int64)
        uniforms = self.rng.random(k)
        return edges, uniforms

    def run_steps(self, n_steps: int) -> None:
        if n_steps <= 0:
            return
        edges, uniforms = self._draw(n_steps)
        tok = _kernels.coupling_steps(
            self._eu, self._ev, self.state.values, self.state.provenance,
            np.int64(self.domain.n_vertices), self.q, edges, uniforms,
            self._parent, np.int64(self.state.next_token))
        self.state.next_token = int(tok)

    def run_sweeps(self, sweeps: int, thin: int = 1, collect=None) -> None:
        E = self.domain.n_edges
        done = 0
        while done < sweeps:
            block = min(thin, sweeps - done)
            self.run_steps(block * E)
            done += block
            if collect is not None and block == thin:
                collect(self.state)


def run_to_equilibrium(z: LabelState, params: ModelParams,
                       rng: np.random.Generator, sweeps: int,
                       collect=None) -> None:
    """Python-path chain run on an existing label state (used by the tests;
    bulk work goes through CouplingChain)."""
    E = z.domain.n_edges
    for s in range(sweeps):
        for _ in range(E):
            step(z, params, rng)
        if collect is not None:
            collect(z)


def clouds(z: LabelState) -> list[Cloud]:
    """Maximal groups of edges sharing a provenance token (hence a label
    value bit for bit); singletons are size-1 clouds."""
    groups: dict[int, list[int]] = {}
    for e in range(z.domain.n_edges):
        groups.setdefault(int(z.provenance[e]), []).append(e)
    out = []
    for token, edges in sorted(groups.items()):
        vals = {float(z.values[e]) for e in edges}
        if len(vals) != 1:
            raise CouplingError("provenance group with unequal values")
        out.append(Cloud(level=vals.pop(), edges=edges))
    return out


def threshold_oracle(z: LabelState, e: int) -> Label:
    """Independent check of the threshold: binary search over the sorted
    label values, testing connectivity of the projection without e."""
    dom = z.domain
    u, v = (int(x) for x in dom.edges[e])
    order = np.argsort(z.values, kind="mergesort")
    lo, hi = 0, dom.n_edges  # first index in `order` whose level connects
    while lo < hi:
        mid = (lo + hi) // 2
        level = float(z.values[order[mid]])
        adj: dict[int, list[int]] = {}
        for k in range(dom.n_edges):
            if k != e and z.values[k] <= level:
                a, b = (int(x) for x in dom.edges[k])
                adj.setdefault(a, []).append(b)
                adj.setdefault(b, []).append(a)
        seen = {u}
        stack = [u]
        while stack:
            w = stack.pop()
            for t in adj.get(w, ()):
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        if v in seen:
            hi = mid
        else:
            lo = mid + 1
    if lo == dom.n_edges:
        return Label(1.0, SENTINEL_PROVENANCE)
    te = int(order[lo])
    return Label(float(z.values[te]), int(z.provenance[te]))


def conditional_independence_statistic(samples: list[LabelState], p: float,
                                       min_samples: int = 10_000) -> dict:
    """Chi-square test of the coupling's Markov-in-p structure on a 2-edge
    domain: conditioned on the projection at level p, the labels at or
    below p and the labels above p must be independent.

    Feature per edge: the indicator that its label falls in the lower half
    of its conditional support ([0, p/2] for open edges, (p, (1+p)/2] for
    closed ones).  The literal midpoint p/2 applied to the above-p labels
    would be constant given the projection and carry no power, so the
    midpoint of the conditional support is used on each side.
    """
    if not samples:
        raise CouplingError("no samples")
    E = samples[0].domain.n_edges
    if E != 2:
        raise CouplingError("the conditional-independence check runs on 2-edge domains")
    if len(samples) < min_samples:
        raise CouplingError(f"need at least {min_samples} samples, got {len(samples)}")

    cells: dict[int, dict[tuple, int]] = {}
    marg = np.zeros(4)
    for z in samples:
        v = z.values
        omega = (1 if v[0] <= p else 0) | ((1 if v[1] <= p else 0) << 1)
        marg[omega] += 1
        feat_lo = tuple(int(v[e] <= p / 2.0) for e in range(E) if v[e] <= p)
        feat_hi = tuple(int(v[e] <= (1.0 + p) / 2.0) for e in range(E) if v[e] > p)
        cells.setdefault(omega, {}).setdefault((feat_lo, feat_hi), 0)
        cells[omega][(feat_lo, feat_hi)] += 1

    stat, dof = 0.0, 0
    for omega, table in cells.items():
        los = sorted({k[0] for k in table})
        his = sorted({k[1] for k in table})
        if len(los) < 2 or len(his) < 2:
            continue
        obs = np.array([[table.get((a, b), 0) for b in his] for a in los], dtype=float)
        total = obs.sum()
        expect = obs.sum(axis=1, keepdims=True) * obs.sum(axis=0, keepdims=True) / total
        with np.errstate(invalid="ignore", divide="ignore"):
            contrib = np.where(expect > 0, (obs - expect) ** 2 / expect, 0.0)
        stat += float(contrib.sum())
        dof += (len(los) - 1) * (len(his) - 1)
    p_value = float(sp_stats.chi2.sf(stat, dof)) if dof > 0 else 1.0
    return {
        "statistic": stat,
        "dof": dof,
        "p_value": p_value,
        "n_samples": len(samples),
        "projection_marginal": (marg / marg.sum()).tolist(),
    }
