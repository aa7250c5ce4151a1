"""Monte Carlo handover counting along random-waypoint trajectories.

The serving state is tracked at arc-length samples of the trajectory and
changes between consecutive samples are resolved into atomic events, with
local midpoint bisection whenever a step contains more than one event.

Counting conventions (per AP-selection method):
  * comp_jt: a cluster event is a grid-cell change of the UE position;
    established/dropped AP connections are the realized populations of the
    entered/left cells.
  * pue: every swap in the K-closest set is one AP connection established
    and one dropped; the control plane processes every swap.
  * hybrid: a cluster event is a K-th-closest swap whose outgoing and
    incoming APs lie in different CPU clusters (a crossing of the
    cross-cluster K-th-order Voronoi boundary); established/dropped AP
    connections are the realized populations of the incoming/outgoing AP's
    clusters. Serving-cluster-set entries and departures (with the actual
    whole-cluster connection counts they imply) are tallied separately so
    either convention can be reported.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .analytics import RateResult, h_ap_pue
from .errors import ParameterError
from .geometry import (
    Deployment,
    NetworkParams,
    assign_clusters,
    pack_cluster_keys,
    sample_deployment,
)
from .mobility import (
    DEFAULT_RAYLEIGH_SCALE_KM,
    Trajectory,
    generate_trajectory,
)

_MAX_REFINE_DEPTH = 12


@dataclass(frozen=True)
class HandoverTally:
    """Event counts for one trajectory over one deployment."""

    cluster_events: int = 0
    ap_connections_established: int = 0
    ap_connections_dropped: int = 0
    ctrl_events: int = 0
    observed_time: float = 0.0          # s
    # auxiliary counters
    kset_changes: int = 0               # K-set swaps of any kind
    cluster_entries: int = 0            # serving-cluster-set additions
    cluster_departures: int = 0         # serving-cluster-set removals
    ap_adds_at_entries: int = 0         # whole-cluster connects at entries
    ap_drops_at_departures: int = 0

    def __post_init__(self):
        for name in ("cluster_events", "ap_connections_established",
                     "ap_connections_dropped", "ctrl_events"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.observed_time < 0:
            raise ParameterError("observed_time must be >= 0")


@dataclass(frozen=True)
class CampaignConfig:
    """One Monte Carlo campaign: independent (deployment, trajectory) runs."""

    params: NetworkParams
    method: str
    v: float                       # m/s
    n_runs: int
    n_segments: int = 20
    step: float | None = None      # km; None = default_step(params, method)
    rng_seed: int = 0
    rayleigh_scale: float = DEFAULT_RAYLEIGH_SCALE_KM

    def __post_init__(self):
        if self.method not in ("comp_jt", "pue", "hybrid"):
            raise ParameterError(f"unknown method {self.method!r}")
        if self.v <= 0:
            raise ParameterError("v must be > 0")
        if self.n_runs < 1:
            raise ParameterError("n_runs must be >= 1")
        if self.n_segments < 1:
            raise ParameterError("n_segments must be >= 1")
        if self.step is not None:
            if self.step <= 0:
                raise ParameterError("step must be > 0")
            if self.step > self.params.L / 20.0:
                raise ParameterError("step must be <= L/20")

    @property
    def density_ratio(self) -> float:
        """AP-to-UE density ratio retained for reporting."""
        return self.params.lambda_ap / self.params.lambda_ue


@dataclass(frozen=True)
class RunRecord:
    run: int
    tally: HandoverTally


@dataclass(frozen=True)
class CampaignResult:
    config: CampaignConfig
    rates: RateResult
    runs: list = field(repr=False, default_factory=list)


def default_step(params: NetworkParams, method: str) -> float:
    """Sampling step resolving cluster boundaries, K-set boundaries and the
    expected spacing between K-set swaps.

    The K-th-order Voronoi boundary is the finest feature: events lost to
    within-step round trips scale linearly with step, ~0.3% at a twentieth of
    the mean swap spacing."""
    step = min(params.L / 50.0, 0.25 / math.sqrt(params.lambda_ap))
    if method in ("pue", "hybrid"):
        swaps_per_km = h_ap_pue(1000.0, params.lambda_ap, params.K)
        if swaps_per_km > 0:
            step = min(step, 1.0 / (20.0 * swaps_per_km))
    return step


def default_guard(lambda_ap: float, K: int, L: float) -> float:
    """Guard margin wide enough that every cluster that can serve a UE in
    the inner window is fully covered by the AP sampling window."""
    r_hi = math.sqrt((K + 6.0 * math.sqrt(K) + 9.0) / (lambda_ap * math.pi))
    return max(3.0 / math.sqrt(lambda_ap), r_hi) + math.sqrt(2.0) * L


def _resolve_cell_steps(origin, L, p0, c0, p1, c1, depth):
    """Atomic (from_cell, to_cell) grid steps between two samples."""
    di = int(c1[0] - c0[0])
    dj = int(c1[1] - c0[1])
    if di == 0 and dj == 0:
        return []
    if abs(di) + abs(dj) == 1:
        return [(tuple(c0), tuple(c1))]
    if depth >= _MAX_REFINE_DEPTH:
        steps = []
        cur = (int(c0[0]), int(c0[1]))
        sx = 1 if di > 0 else -1
        while cur[0] != c1[0]:
            nxt = (cur[0] + sx, cur[1])
            steps.append((cur, nxt))
            cur = nxt
        sy = 1 if dj > 0 else -1
        while cur[1] != c1[1]:
            nxt = (cur[0], cur[1] + sy)
            steps.append((cur, nxt))
            cur = nxt
        return steps
    pm = 0.5 * (p0 + p1)
    cm = assign_clusters([pm], origin, L)[0]
    return (_resolve_cell_steps(origin, L, p0, c0, pm, cm, depth + 1)
            + _resolve_cell_steps(origin, L, pm, cm, p1, c1, depth + 1))


def _resolve_swaps(tree, K, p0, s0, p1, s1, depth):
    """Atomic (out_ap, in_ap) swaps of the K-closest set between samples."""
    outs = s0 - s1
    if not outs:
        return []
    if len(outs) == 1 or depth >= _MAX_REFINE_DEPTH:
        return list(zip(sorted(outs), sorted(s1 - s0)))
    pm = 0.5 * (p0 + p1)
    _, im = tree.query(pm, k=K)
    sm = frozenset(int(j) for j in np.atleast_1d(im))
    return (_resolve_swaps(tree, K, p0, s0, pm, sm, depth + 1)
            + _resolve_swaps(tree, K, pm, sm, p1, s1, depth + 1))


def _count_comp(deployment: Deployment, pts: np.ndarray) -> dict:
    origin, L = deployment.grid_origin, deployment.L
    cells = assign_clusters(pts, origin, L)
    changed = np.nonzero(np.any(cells[1:] != cells[:-1], axis=1))[0]
    events = 0
    est = drop = 0
    for i in changed:
        for c_from, c_to in _resolve_cell_steps(
                origin, L, pts[i], cells[i], pts[i + 1], cells[i + 1], 0):
            events += 1
            from_key, to_key = pack_cluster_keys(np.array([c_from, c_to]))
            est += deployment.cluster_size(to_key)
            drop += deployment.cluster_size(from_key)
    return dict(cluster_events=events, ap_connections_established=est,
                ap_connections_dropped=drop, ctrl_events=events,
                cluster_entries=events, cluster_departures=events,
                ap_adds_at_entries=est, ap_drops_at_departures=drop)


def _count_knn(deployment: Deployment, pts: np.ndarray, K: int,
               hybrid: bool) -> dict:
    tree = deployment.kdtree
    keys = deployment.cluster_keys
    _, idx = tree.query(pts, k=K)
    idx = idx.reshape(len(pts), K)
    sorted_ids = np.sort(idx, axis=1)
    changed = np.nonzero(np.any(sorted_ids[1:] != sorted_ids[:-1], axis=1))[0]

    swaps = 0
    crossings = 0
    est = drop = 0
    entries = departures = 0
    adds_actual = drops_actual = 0
    counts = Counter(int(k) for k in keys[idx[0]]) if hybrid else None

    sets = {}

    def kset(i):
        if i not in sets:
            sets[i] = frozenset(int(j) for j in sorted_ids[i])
        return sets[i]

    for i in changed:
        for a, b in _resolve_swaps(tree, K, pts[i], kset(i),
                                   pts[i + 1], kset(i + 1), 0):
            swaps += 1
            if not hybrid:
                est += 1
                drop += 1
                continue
            ka = int(keys[a])
            kb = int(keys[b])
            if ka != kb:
                crossings += 1
                est += deployment.cluster_size(kb)
                drop += deployment.cluster_size(ka)
            counts[ka] -= 1
            if counts[ka] == 0:
                del counts[ka]
                departures += 1
                drops_actual += deployment.cluster_size(ka)
            counts[kb] += 1
            if counts[kb] == 1:
                entries += 1
                adds_actual += deployment.cluster_size(kb)
    if hybrid:
        return dict(cluster_events=crossings, ap_connections_established=est,
                    ap_connections_dropped=drop, ctrl_events=crossings,
                    kset_changes=swaps, cluster_entries=entries,
                    cluster_departures=departures,
                    ap_adds_at_entries=adds_actual,
                    ap_drops_at_departures=drops_actual)
    return dict(cluster_events=0, ap_connections_established=est,
                ap_connections_dropped=drop, ctrl_events=est,
                kset_changes=swaps)


def count_handovers(deployment: Deployment, trajectory: Trajectory,
                    method: str, params: NetworkParams,
                    step: float | None = None) -> HandoverTally:
    """Count handover events along one trajectory over one deployment."""
    if method not in ("comp_jt", "pue", "hybrid"):
        raise ParameterError(f"unknown method {method!r}")
    if step is None:
        step = default_step(params, method)
    if step <= 0:
        raise ParameterError("step must be > 0")
    pts = trajectory.sample_arclength(step)
    if len(pts) < 2:
        return HandoverTally(observed_time=trajectory.total_time)
    if method == "comp_jt":
        fields_ = _count_comp(deployment, pts)
    else:
        if deployment.n_aps < params.K:
            raise ParameterError(
                f"deployment has {deployment.n_aps} APs, need K={params.K}")
        fields_ = _count_knn(deployment, pts, params.K, method == "hybrid")
    return HandoverTally(observed_time=trajectory.total_time, **fields_)


def estimate_rates(tallies) -> RateResult:
    """Pooled empirical rates with 95% CIs from the per-run rate spread."""
    tallies = list(tallies)
    if len(tallies) < 2:
        raise ParameterError("need at least 2 tallies to estimate rates")
    times = np.array([t.observed_time for t in tallies], dtype=float)
    if np.any(times <= 0):
        raise ParameterError("all tallies must have observed_time > 0")
    total_t = times.sum()
    n = len(tallies)

    def pooled_and_ci(counts):
        counts = np.asarray(counts, dtype=float)
        per_run = counts / times
        ci = 1.96 * per_run.std(ddof=1) / math.sqrt(n)
        return counts.sum() / total_t, ci

    h_c, ci_c = pooled_and_ci([t.cluster_events for t in tallies])
    h_ap, ci_ap = pooled_and_ci([t.ap_connections_established for t in tallies])
    h_ctrl, ci_ctrl = pooled_and_ci([t.ctrl_events for t in tallies])
    return RateResult(h_c=h_c, h_ap=h_ap, h_ctrl=h_ctrl, kind="empirical",
                      ci95_halfwidth=ci_ctrl, h_c_ci95=ci_c, h_ap_ci95=ci_ap)


def _run_one(config: CampaignConfig, seed_seq) -> HandoverTally:
    rng = np.random.default_rng(seed_seq)
    deployment = sample_deployment(config.params, rng)
    trajectory = generate_trajectory(config.v, config.n_segments,
                                     config.rayleigh_scale,
                                     config.params.inner_window, rng)
    return count_handovers(deployment, trajectory, config.method,
                           config.params, config.step)


def _worker(args):
    config, entropy, idx = args
    child = np.random.SeedSequence(entropy=entropy,
                                   spawn_key=(idx,))
    return idx, _run_one(config, child)


def _n_workers(n_runs: int) -> int:
    cap = os.environ.get("CF_MOBILITY_THREADS", "")
    try:
        cap_n = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        cap_n = 1
    return max(1, min(n_runs, os.cpu_count() or 1, cap_n))


def run_campaign(config: CampaignConfig) -> CampaignResult:
    """Run the campaign; deterministic given config.rng_seed regardless of
    worker count or execution order."""
    root = np.random.SeedSequence(config.rng_seed)
    children = root.spawn(config.n_runs)
    workers = _n_workers(config.n_runs)
    tallies: list = [None] * config.n_runs
    if workers > 1 and config.n_runs >= 8:
        from concurrent.futures import ProcessPoolExecutor
        args = [(config, config.rng_seed, i) for i in range(config.n_runs)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for idx, tally in pool.map(_worker, args, chunksize=8):
                tallies[idx] = tally
    else:
        for i, child in enumerate(children):
            tallies[i] = _run_one(config, child)
    rates = estimate_rates(tallies)
    runs = [RunRecord(run=i, tally=t) for i, t in enumerate(tallies)]
    return CampaignResult(config=config, rates=rates, runs=runs)
