import math

import numpy as np
import pytest

from cfmobility.errors import InsufficientPointsError, ParameterError
from cfmobility.geometry import (
    NetworkParams,
    Rect,
    _crossing_prob_by_quadrature,
    assign_clusters,
    buffon_square_grid_crossing_prob,
    k_closest,
    make_deployment,
    sample_deployment,
    sample_ppp,
    serving_set,
)

KM2 = Rect.square(1.0)


class TestRect:
    def test_empty_raises(self):
        with pytest.raises(ParameterError):
            Rect(0, 0, 0, 1)

    def test_shrink_expand(self):
        r = Rect.square(4.0).expand(1.0)
        assert r.area == pytest.approx(36.0)
        assert r.shrink(1.0).area == pytest.approx(16.0)


class TestNetworkParams:
    def test_q_derived(self):
        p = NetworkParams.make(100.0, 5, Q=20.0, window=Rect.square(4.0))
        assert p.L == pytest.approx(math.sqrt(0.2))
        assert p.lambda_ue == pytest.approx(10.0)

    def test_inconsistent_q_rejected(self):
        with pytest.raises(ParameterError):
            NetworkParams(lambda_ap=100.0, lambda_ue=10.0, L=0.5, Q=20.0,
                          K=5, window=Rect.square(4.0), guard=0.0)

    def test_guard_leaves_inner_window(self):
        with pytest.raises(ParameterError):
            NetworkParams.make(100.0, 5, Q=20.0, window=Rect.square(4.0),
                               guard=2.0)
        p = NetworkParams.make(100.0, 5, Q=20.0, window=Rect.square(4.0),
                               guard=1.0)
        assert p.inner_window.area == pytest.approx(4.0)

    def test_bad_inputs(self):
        for kwargs in (dict(lambda_ap=-1.0, K=5, Q=20.0),
                       dict(lambda_ap=100.0, K=0, Q=20.0),
                       dict(lambda_ap=100.0, K=5, Q=-2.0)):
            with pytest.raises(ParameterError):
                NetworkParams.make(window=Rect.square(4.0), **kwargs)


class TestSamplePPP:
    def test_moments_over_seeds(self):
        counts = [len(sample_ppp(100.0, KM2, seed)) for seed in range(1500)]
        counts = np.array(counts, dtype=float)
        assert abs(counts.mean() - 100.0) < 1.0
        assert abs(counts.var(ddof=1) - 100.0) < 12.0

    def test_mean_count_20km_window(self):
        # 100 APs/km² over 20 km x 20 km averages 40,000 points
        win = Rect.square(20.0)
        counts = [len(sample_ppp(100.0, win, seed)) for seed in range(25)]
        assert abs(np.mean(counts) - 40000.0) < 160.0

    def test_uniformity(self):
        pts = sample_ppp(2000.0, KM2, 7)
        assert np.all(KM2.contains(pts))
        assert abs(pts[:, 0].mean() - 0.5) < 0.02
        assert abs(pts[:, 1].mean() - 0.5) < 0.02

    def test_deterministic_given_seed(self):
        a = sample_ppp(50.0, KM2, 123)
        b = sample_ppp(50.0, KM2, 123)
        assert np.array_equal(a, b)

    def test_nonpositive_density_rejected(self):
        with pytest.raises(ParameterError):
            sample_ppp(0.0, KM2, 1)
        with pytest.raises(ParameterError):
            sample_ppp(-5.0, KM2, 1)


class TestAssignClusters:
    def test_containment(self):
        ids = assign_clusters([(0.1, 0.1)], (0.0, 0.0), 0.4472)
        assert tuple(ids[0]) == (0, 0)

    def test_boundary_tie_goes_to_larger_index(self):
        L = 0.25
        ids = assign_clusters([(L, 0.1), (2 * L, L)], (0.0, 0.0), L)
        assert tuple(ids[0]) == (1, 0)
        assert tuple(ids[1]) == (2, 1)

    def test_mean_population_matches_q(self):
        # lambda = 100, L = sqrt(0.2): mean APs per cell = 20
        L = math.sqrt(0.2)
        win = Rect.square(20 * L)
        sizes = []
        for seed in range(10):
            pts = sample_ppp(100.0, win, seed)
            ids = assign_clusters(pts, (0.0, 0.0), L)
            _, counts = np.unique(ids, axis=0, return_counts=True)
            # only full interior cells; all 400 cells are full here
            sizes.append(counts.sum() / 400.0)
        assert np.mean(sizes) == pytest.approx(20.0, rel=0.02)

    def test_recompute_idempotent_partition(self):
        dep = sample_deployment(
            NetworkParams.make(100.0, 5, Q=20.0, window=Rect.square(4.0)), 3)
        again = assign_clusters(dep.ap_positions, dep.grid_origin, dep.L)
        assert np.array_equal(dep.cluster_ids, again)
        assert sum(dep.cluster_sizes.values()) == dep.n_aps


class TestKClosest:
    def test_single_ap(self):
        dep = make_deployment([(0.0, 0.0)], (0.0, 0.0), 1.0)
        assert list(k_closest((1.0, 1.0), dep, 1)) == [0]

    def test_insufficient_points(self):
        dep = make_deployment([(0.0, 0.0), (1.0, 0.0)], (0.0, 0.0), 1.0)
        with pytest.raises(InsufficientPointsError):
            k_closest((0.5, 0.5), dep, 3)

    def test_distances_nondecreasing(self):
        dep = make_deployment(sample_ppp(200.0, KM2, 5), (0.0, 0.0), 0.2)
        ids = k_closest((0.5, 0.5), dep, 10)
        d = np.hypot(*(dep.ap_positions[ids] - (0.5, 0.5)).T)
        assert np.all(np.diff(d) >= 0)

    def test_tie_broken_by_index_and_permutation_invariant(self):
        pts = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (3.0, 0.0)]
        dep = make_deployment(pts, (0.0, 0.0), 1.0)
        assert list(k_closest((0.0, 0.0), dep, 2)) == [0, 1]
        # permuted list, stable IDs means the rule picks the same points
        perm = [pts[i] for i in (3, 2, 1, 0, 4)]
        dep2 = make_deployment(perm, (0.0, 0.0), 1.0)
        picked = {tuple(dep2.ap_positions[i]) for i in k_closest((0.0, 0.0), dep2, 4)}
        assert picked == set(pts[:4])
        assert list(k_closest((0.0, 0.0), dep2, 2)) == [0, 1]

    def test_mean_nearest_distance(self):
        # E[nearest distance] = 1/(2 sqrt(lambda)) = 50 m at 100 APs/km²
        lam = 100.0
        win = Rect.square(12.0)
        rng = np.random.default_rng(11)
        dists = []
        for seed in range(4):
            dep = make_deployment(sample_ppp(lam, win, seed), (0.0, 0.0), 1.0)
            ues = rng.uniform(2.0, 10.0, size=(4000, 2))
            d, _ = dep.kdtree.query(ues, k=1)
            dists.append(d)
        mean = np.concatenate(dists).mean()
        assert mean == pytest.approx(0.05, rel=0.02)


def _params(lam=100.0, K=5, Q=20.0, side=6.0, guard=1.0):
    return NetworkParams.make(lam, K, Q=Q, window=Rect.square(side),
                              guard=guard)


class TestServingSet:
    def test_methods_validated(self):
        dep = make_deployment([(0.0, 0.0)], (0.0, 0.0), 1.0)
        with pytest.raises(ParameterError):
            serving_set("bogus", (0.0, 0.0), dep, _params())

    def test_pue_exactly_k_sorted(self):
        params = _params(K=5)
        dep = sample_deployment(params, 2)
        ss = serving_set("pue", (3.0, 3.0), dep, params)
        assert len(ss.ap_ids) == 5
        d = np.hypot(*(dep.ap_positions[list(ss.ap_ids)] - (3.0, 3.0)).T)
        assert np.all(np.diff(d) >= 0)
        assert ss.cluster_ids == ()

    def test_comp_cluster_contains_point(self):
        params = _params()
        dep = sample_deployment(params, 4)
        ss = serving_set("comp_jt", (3.1, 2.7), dep, params)
        (cell,) = ss.cluster_ids
        L = params.L
        assert cell == (int(3.1 // L), int(2.7 // L))
        members = set(np.nonzero([tuple(c) == cell for c in dep.cluster_ids])[0])
        assert set(ss.ap_ids) == members

    def test_hybrid_two_cluster_example(self):
        # K=5 closest APs spanning exactly 2 cells: serve both whole cells
        L = 1.0
        aps = [(0.8, 0.5), (0.7, 0.4), (0.75, 0.6),   # cell (0,0)
               (1.2, 0.5), (1.3, 0.45),               # cell (1,0)
               (0.1, 0.1),                            # cell (0,0), far
               (2.7, 0.5), (2.8, 0.6)]                # cell (2,0), irrelevant
        dep = make_deployment(aps, (0.0, 0.0), L)
        params = NetworkParams.make(8.0, 5, L=L, window=Rect.square(3.0))
        ss = serving_set("hybrid", (0.95, 0.5), dep, params)
        assert set(ss.cluster_ids) == {(0, 0), (1, 0)}
        assert set(ss.ap_ids) == {0, 1, 2, 3, 4, 5}

    def test_comp_mean_size_is_q(self):
        params = _params(Q=20.0)
        rng = np.random.default_rng(9)
        sizes = []
        for seed in range(6):
            dep = sample_deployment(params, seed)
            for _ in range(150):
                p = rng.uniform(1.5, 4.5, size=2)
                sizes.append(len(serving_set("comp_jt", p, dep, params).ap_ids))
        assert np.mean(sizes) == pytest.approx(20.0, rel=0.05)

    def test_pue_and_comp_mean_sizes_match_at_n(self):
        # serving-set size: pue with K=N always N; comp with Q=N averages N
        n = 20
        params_pue = _params(K=n, Q=float(n))
        dep = sample_deployment(params_pue, 21)
        rng = np.random.default_rng(3)
        pue_sizes = [len(serving_set("pue", rng.uniform(2, 4, 2), dep,
                                     params_pue).ap_ids) for _ in range(100)]
        assert set(pue_sizes) == {n}
        params_comp = _params(Q=float(n))
        sizes = []
        for seed in range(8):
            dep = sample_deployment(params_comp, seed)
            sizes.extend(len(serving_set("comp_jt", rng.uniform(1.5, 4.5, 2),
                                         dep, params_comp).ap_ids)
                         for _ in range(120))
        assert np.mean(sizes) == pytest.approx(n, rel=0.05)

    def test_scale_invariance(self):
        params = _params()
        dep = sample_deployment(params, 8)
        point = (2.3, 3.1)
        for s in (0.5, 3.0):
            params_s = NetworkParams.make(
                params.lambda_ap / s ** 2, params.K, L=params.L * s,
                window=Rect(params.window.x0 * s, params.window.y0 * s,
                            params.window.x1 * s, params.window.y1 * s),
                guard=params.guard * s)
            dep_s = make_deployment(dep.ap_positions * s,
                                    (dep.grid_origin[0] * s,
                                     dep.grid_origin[1] * s), dep.L * s)
            for method in ("comp_jt", "pue", "hybrid"):
                a = serving_set(method, point, dep, params)
                b = serving_set(method, (point[0] * s, point[1] * s),
                                dep_s, params_s)
                assert a.ap_ids == b.ap_ids
                assert a.cluster_ids == b.cluster_ids


def _mc_crossing_prob(L, r, n, seed):
    """Segment-dropping oracle: drop n random segments, count crossings."""
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0.0, L, size=n)
    y0 = rng.uniform(0.0, L, size=n)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    x1 = x0 + r * np.cos(theta)
    y1 = y0 + r * np.sin(theta)
    crossed = (np.floor(x0 / L) != np.floor(x1 / L)) | \
              (np.floor(y0 / L) != np.floor(y1 / L))
    return crossed.mean()


class TestBuffonSquareGrid:
    def test_zero_length(self):
        assert buffon_square_grid_crossing_prob(0.5, 0.0) == 0.0

    def test_at_pitch_equals_3_over_pi(self):
        assert buffon_square_grid_crossing_prob(1.0, 1.0) == pytest.approx(
            3.0 / math.pi, abs=1e-12)
        assert _mc_crossing_prob(1.0, 1.0, 1_000_000, 42) == pytest.approx(
            3.0 / math.pi, abs=0.002)

    def test_beyond_diagonal_is_one(self):
        for r in (math.sqrt(2.0), 1.5, 7.0):
            assert buffon_square_grid_crossing_prob(1.0, r) == 1.0

    def test_matches_mc_oracle_between_pitch_and_diagonal(self):
        for r, seed in ((1.1, 1), (1.25, 2), (1.4, 3)):
            p = buffon_square_grid_crossing_prob(1.0, r)
            assert p == pytest.approx(_mc_crossing_prob(1.0, r, 400_000, seed),
                                      abs=0.003)

    def test_quadrature_matches_closed_form_below_pitch(self):
        for r in np.linspace(0.01, 1.0, 25):
            closed = (4.0 * r - r * r) / math.pi
            assert abs(_crossing_prob_by_quadrature(1.0, float(r)) - closed) < 1e-6

    def test_monotone_in_r_and_bounded(self):
        rs = np.linspace(0.0, 1.6, 33)
        ps = [buffon_square_grid_crossing_prob(0.9, float(r)) for r in rs]
        assert all(0.0 <= p <= 1.0 for p in ps)
        assert all(b >= a - 1e-12 for a, b in zip(ps, ps[1:]))

    def test_invalid_args(self):
        with pytest.raises(ParameterError):
            buffon_square_grid_crossing_prob(0.0, 0.5)
        with pytest.raises(ParameterError):
            buffon_square_grid_crossing_prob(1.0, -0.1)
