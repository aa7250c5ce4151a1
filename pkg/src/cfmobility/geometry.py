"""Network geometry: PPP sampling, square-grid CPU clusters, K-nearest
queries and serving-set formation for the three AP-selection methods.

Conventions used throughout the package:
  * lengths in km, densities in points/km², speeds in m/s, rates in 1/s;
  * cluster IDs are integer grid cells (ix, iy) relative to a grid origin,
    with ix = floor((x - ox) / L) (a point exactly on a grid line lands in
    the cell with the larger index);
  * nearest-neighbour ties are broken by AP index ascending.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InsufficientPointsError, ParameterError
from .quadrature import adaptive_simpson

METHODS = ("comp_jt", "pue", "hybrid")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1] in km."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ParameterError(f"empty rectangle: {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def lower_left(self) -> tuple[float, float]:
        return (self.x0, self.y0)

    def shrink(self, margin: float) -> "Rect":
        return Rect(self.x0 + margin, self.y0 + margin,
                    self.x1 - margin, self.y1 - margin)

    def expand(self, margin: float) -> "Rect":
        return Rect(self.x0 - margin, self.y0 - margin,
                    self.x1 + margin, self.y1 + margin)

    def contains(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        x, y = xy[..., 0], xy[..., 1]
        return ((x >= self.x0) & (x <= self.x1)
                & (y >= self.y0) & (y <= self.y1))

    @staticmethod
    def square(side: float, origin: tuple[float, float] = (0.0, 0.0)) -> "Rect":
        ox, oy = origin
        return Rect(ox, oy, ox + side, oy + side)


@dataclass(frozen=True)
class NetworkParams:
    """Densities and cluster geometry every formula consumes.

    Q is always the derived mean cluster population lambda_ap * L**2; pass
    either L or Q to the factory, never an inconsistent pair.
    """

    lambda_ap: float
    lambda_ue: float
    L: float
    Q: float
    K: int
    window: Rect
    guard: float

    def __post_init__(self):
        if self.lambda_ap <= 0:
            raise ParameterError("lambda_ap must be > 0")
        if self.lambda_ue <= 0:
            raise ParameterError("lambda_ue must be > 0")
        if self.L <= 0:
            raise ParameterError("cluster side L must be > 0")
        if self.K < 1 or int(self.K) != self.K:
            raise ParameterError("K must be a positive integer")
        if abs(self.Q - self.lambda_ap * self.L ** 2) > 1e-9 * self.Q:
            raise ParameterError(
                f"Q={self.Q} inconsistent with lambda*L^2="
                f"{self.lambda_ap * self.L ** 2}")
        if self.guard < 0:
            raise ParameterError("guard must be >= 0")
        inner = self.window.shrink(self.guard)  # raises if empty
        del inner

    @staticmethod
    def make(lambda_ap: float, K: int, *, Q: float | None = None,
             L: float | None = None, window: Rect, guard: float = 0.0,
             lambda_ue: float | None = None) -> "NetworkParams":
        if lambda_ap <= 0:
            raise ParameterError("lambda_ap must be > 0")
        if (Q is None) == (L is None):
            raise ParameterError("give exactly one of Q or L")
        if L is None:
            if Q is None or Q <= 0:
                raise ParameterError("Q must be > 0")
            L = math.sqrt(Q / lambda_ap)
        Q = lambda_ap * L ** 2
        if lambda_ue is None:
            lambda_ue = lambda_ap / 10.0
        return NetworkParams(lambda_ap=lambda_ap, lambda_ue=lambda_ue, L=L,
                             Q=Q, K=int(K), window=window, guard=guard)

    @property
    def inner_window(self) -> Rect:
        """Observation window for trajectories (window minus the guard)."""
        return self.window.shrink(self.guard)


def sample_ppp(density: float, window: Rect, rng_seed) -> np.ndarray:
    """Sample a homogeneous PPP of the given density on ``window``.

    ``rng_seed`` may be an int or a numpy Generator. Returns an (N, 2)
    float array; N is Poisson(density * area).
    """
    if density <= 0:
        raise ParameterError("density must be > 0")
    rng = np.random.default_rng(rng_seed) if not isinstance(
        rng_seed, np.random.Generator) else rng_seed
    n = rng.poisson(density * window.area)
    pts = rng.uniform(size=(n, 2))
    pts[:, 0] = window.x0 + pts[:, 0] * window.width
    pts[:, 1] = window.y0 + pts[:, 1] * window.height
    return pts


def assign_clusters(points, grid_origin, L: float) -> np.ndarray:
    """Grid-cell index (ix, iy) of each point for a square grid of pitch L.

    A point exactly on a grid line is assigned to the cell with the larger
    index (floor of an exactly-integral ratio).
    """
    if L <= 0:
        raise ParameterError("grid pitch L must be > 0")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ox, oy = grid_origin
    ids = np.empty(pts.shape, dtype=np.int64)
    ids[:, 0] = np.floor((pts[:, 0] - ox) / L)
    ids[:, 1] = np.floor((pts[:, 1] - oy) / L)
    return ids


# Offset added to grid indices when packing (ix, iy) into one int64 key;
# keeps keys positive for any realistic window.
_KEY_OFF = 1 << 20


def pack_cluster_keys(ids: np.ndarray) -> np.ndarray:
    ids = np.atleast_2d(np.asarray(ids, dtype=np.int64))
    return (ids[:, 0] + _KEY_OFF) * (1 << 42) + (ids[:, 1] + _KEY_OFF)


def unpack_cluster_key(key: int) -> tuple[int, int]:
    ix, iy = divmod(int(key), 1 << 42)
    return (ix - _KEY_OFF, iy - _KEY_OFF)


@dataclass(frozen=True)
class Deployment:
    """A realized AP point process with its grid clustering.

    ``cluster_ids[i]`` is recomputable from ``ap_positions[i]``; the packed
    ``cluster_keys`` plus the ``cluster_sizes`` map are what the simulator
    consumes in its hot path.
    """

    ap_positions: np.ndarray          # (N, 2) km
    cluster_ids: np.ndarray           # (N, 2) int
    grid_origin: tuple[float, float]  # km
    L: float                          # grid pitch, km
    cluster_keys: np.ndarray = field(repr=False, default=None)
    cluster_sizes: dict = field(repr=False, default=None)
    kdtree: cKDTree = field(repr=False, default=None, compare=False)

    @property
    def n_aps(self) -> int:
        return len(self.ap_positions)

    def cluster_size(self, key: int) -> int:
        return self.cluster_sizes.get(int(key), 0)


def make_deployment(ap_positions, grid_origin, L: float) -> Deployment:
    """Build a Deployment (cluster assignment, packed keys, KD-tree)."""
    pts = np.atleast_2d(np.asarray(ap_positions, dtype=float))
    if pts.size == 0:
        pts = pts.reshape(0, 2)
    ids = assign_clusters(pts, grid_origin, L) if len(pts) else \
        np.empty((0, 2), dtype=np.int64)
    keys = pack_cluster_keys(ids) if len(pts) else np.empty(0, dtype=np.int64)
    uniq, counts = np.unique(keys, return_counts=True)
    sizes = {int(k): int(c) for k, c in zip(uniq, counts)}
    tree = cKDTree(pts) if len(pts) else None
    pts.setflags(write=False)
    ids.setflags(write=False)
    keys.setflags(write=False)
    return Deployment(ap_positions=pts, cluster_ids=ids,
                      grid_origin=(float(grid_origin[0]), float(grid_origin[1])),
                      L=float(L), cluster_keys=keys, cluster_sizes=sizes,
                      kdtree=tree)


def sample_deployment(params: NetworkParams, rng_seed) -> Deployment:
    """PPP of APs over the full (guarded) window, clustered on a grid
    anchored at the window's lower-left corner."""
    pts = sample_ppp(params.lambda_ap, params.window, rng_seed)
    return make_deployment(pts, params.window.lower_left, params.L)


def k_closest(point, deployment: Deployment, K: int) -> np.ndarray:
    """Indices of the K nearest APs, distance ascending, ties by index.

    Deterministic under permutation of equidistant APs: the full candidate
    set is re-sorted by (distance, index) before truncation.
    """
    if K < 1:
        raise ParameterError("K must be >= 1")
    n = deployment.n_aps
    if n < K:
        raise InsufficientPointsError(
            f"deployment has {n} APs, need K={K}")
    p = np.asarray(point, dtype=float)
    kk = min(n, K + 8)
    while True:
        dists, idx = deployment.kdtree.query(p, k=kk)
        dists = np.atleast_1d(dists)
        idx = np.atleast_1d(idx)
        order = np.lexsort((idx, dists))
        dists, idx = dists[order], idx[order]
        # Widen if the K-th distance ties the candidate boundary.
        if kk == n or dists[K - 1] < dists[kk - 1]:
            return idx[:K].copy()
        kk = min(n, kk * 2)


@dataclass(frozen=True)
class ServingSet:
    """Method-tagged serving description.

    ap_ids: for pue the K closest APs ordered by distance; for comp_jt and
    hybrid all APs of the serving clusters, ordered by index.
    cluster_ids: () for pue, one cell for comp_jt, the cells of the K
    closest APs for hybrid.
    """

    method: str
    ap_ids: tuple
    cluster_ids: tuple


def serving_set(method: str, point, deployment: Deployment,
                params: NetworkParams) -> ServingSet:
    """Form the serving set for one UE position under the given method."""
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}; one of {METHODS}")
    if method == "comp_jt":
        cid = assign_clusters([point], deployment.grid_origin, deployment.L)[0]
        key = pack_cluster_keys(cid[None, :])[0]
        members = np.nonzero(deployment.cluster_keys == key)[0]
        return ServingSet(method, tuple(int(i) for i in members),
                          (tuple(int(c) for c in cid),))
    knn = k_closest(point, deployment, params.K)
    if method == "pue":
        return ServingSet(method, tuple(int(i) for i in knn), ())
    keys = deployment.cluster_keys[knn]
    uniq = np.unique(keys)
    members = np.nonzero(np.isin(deployment.cluster_keys, uniq))[0]
    cells = tuple(unpack_cluster_key(k) for k in uniq)
    return ServingSet(method, tuple(int(i) for i in members), cells)


def _crossing_prob_by_quadrature(L: float, r: float) -> float:
    """P(L, r) via averaging the no-cross probability over orientation.

    For a segment at angle theta the two grid-line families are crossed
    independently with probabilities min(1, r|cos|/L) and min(1, r|sin|/L);
    averaging 1 - product(no-cross) over theta in [0, pi/2] gives P.
    Integrates only where the product is nonzero (both r cos < L and
    r sin < L) so the integrand stays smooth.
    """
    c = r / L

    def no_cross(theta: float) -> float:
        return max(0.0, 1.0 - c * math.cos(theta)) * \
            max(0.0, 1.0 - c * math.sin(theta))

    if c <= 1.0:
        lo, hi = 0.0, math.pi / 2.0
    else:
        # product vanishes outside (acos(1/c), asin(1/c))
        lo = math.acos(1.0 / c)
        hi = math.asin(1.0 / c)
        if lo >= hi:
            return 1.0
    integral = adaptive_simpson(no_cross, lo, hi, tol=1e-9)
    return 1.0 - (2.0 / math.pi) * integral


def buffon_square_grid_crossing_prob(L: float, r: float) -> float:
    """Probability a uniformly placed and oriented segment of length r
    crosses at least one line of a square grid of pitch L.

    Closed form (4 r L - r^2) / (pi L^2) for r <= L; quadrature for
    L < r < sqrt(2) L; exactly 1 beyond the cell diagonal.
    """
    if L <= 0:
        raise ParameterError("grid pitch L must be > 0")
    if r < 0:
        raise ParameterError("segment length r must be >= 0")
    if r == 0.0:
        return 0.0
    if r <= L:
        return (4.0 * r * L - r * r) / (math.pi * L * L)
    if r >= math.sqrt(2.0) * L:
        return 1.0
    return _crossing_prob_by_quadrature(L, r)
