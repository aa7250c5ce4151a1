"""Mobility-aware spectral efficiency: static SE discounted by the time
lost to handover delays, plus percentile statistics and static-SE sources.

The static SE itself is pluggable. Two sources are provided:
  * CSV ingestion of externally computed per-UE static SE samples
    (header ``ue_id,method,K,Q,se_static``);
  * a PROXY model: three-slope log-distance SINR with conjugate summing of
    serving-AP powers. The proxy is a deliberately simplified stand-in for
    the full physical-layer model and is labelled as such in all outputs;
    only qualitative orderings should be read from it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .analytics import RateResult
from .errors import ParameterError
from .geometry import Deployment, NetworkParams, sample_ppp, serving_set
from .simulation import default_guard  # noqa: F401  (re-exported for callers)

PROXY_LABEL = "proxy (simplified log-distance SINR; not the full physical-layer model)"


@dataclass(frozen=True)
class DelayParams:
    """Control-plane delay d1 and intra-cluster delay d2, in seconds."""

    d1: float
    d2: float

    def __post_init__(self):
        if self.d1 < 0 or self.d2 < 0:
            raise ParameterError("delays must be >= 0")


@dataclass(frozen=True)
class SESample:
    """One per-UE static SE draw (bit/s/Hz)."""

    ue_id: str
    method: str
    k: int
    q: float
    se_static: float

    def __post_init__(self):
        if self.se_static < 0:
            raise ParameterError("se_static must be >= 0")


def mobility_aware_se(se_static: float, method: str, rates: RateResult,
                      delays: DelayParams) -> float:
    """Discounted SE per the handover-delay model.

    pue: se * (1 - h_ap * d1); comp_jt/hybrid: se * (1 - h_c*d1 - h_ap*d2).
    A non-positive availability factor means the link is blocked: returns 0.
    """
    if se_static < 0:
        raise ParameterError("se_static must be >= 0")
    if method == "pue":
        factor = 1.0 - rates.h_ap * delays.d1
    elif method in ("comp_jt", "hybrid"):
        factor = 1.0 - rates.h_c * delays.d1 - rates.h_ap * delays.d2
    else:
        raise ParameterError(f"unknown method {method!r}")
    if factor <= 0.0:
        return 0.0
    return se_static * factor


@dataclass(frozen=True)
class PathLossParams:
    """Three-slope log-distance gain curve for the PROXY SE model.

    Slopes apply below breakpoint 1, between the breakpoints and beyond
    breakpoint 2; the curve is continuous and distances are floored at 1 m.
    """

    slopes: tuple = (2.0, 3.0, 3.5)
    breakpoints_km: tuple = (0.010, 0.050)
    noise_power: float = 1.0
    d_floor_km: float = 0.001

    def __post_init__(self):
        if len(self.slopes) != 3 or len(self.breakpoints_km) != 2:
            raise ParameterError("need 3 slopes and 2 breakpoints")
        b1, b2 = self.breakpoints_km
        if not (0 < b1 < b2):
            raise ParameterError("breakpoints must satisfy 0 < b1 < b2")
        if self.noise_power < 0:
            raise ParameterError("noise_power must be >= 0")

    def gain(self, d_km):
        """Piecewise power-law gain, vectorized over distance (km).

        g(d) = d^-s1 up to b1, then c2 d^-s2 to b2, then c3 d^-s3, with c2
        and c3 fixed by continuity at the breakpoints.
        """
        d = np.maximum(np.asarray(d_km, dtype=float), self.d_floor_km)
        s1, s2, s3 = self.slopes
        b1, b2 = self.breakpoints_km
        c2 = b1 ** (s2 - s1)
        c3 = c2 * b2 ** (s3 - s2)
        out = np.where(d <= b1, d ** -s1,
                       np.where(d <= b2, c2 * d ** -s2, c3 * d ** -s3))
        return out if out.ndim else float(out)


def proxy_static_se(deployment: Deployment, ue_position, serving,
                    pathloss: PathLossParams | None = None) -> float:
    """PROXY static SE (bit/s/Hz) = log2(1 + S / (I + noise)).

    S sums the gains of the serving APs, I the gains of every other AP in
    the deployment. An empty serving set yields 0.
    """
    if pathloss is None:
        pathloss = PathLossParams()
    ids = np.asarray(serving.ap_ids, dtype=int)
    if ids.size == 0:
        return 0.0
    p = np.asarray(ue_position, dtype=float)
    d = np.hypot(deployment.ap_positions[:, 0] - p[0],
                 deployment.ap_positions[:, 1] - p[1])
    g = pathloss.gain(d)
    signal = float(g[ids].sum())
    interference = float(g.sum()) - signal
    sinr = signal / (interference + pathloss.noise_power)
    return math.log2(1.0 + sinr)


def proxy_se_samples(params: NetworkParams, method: str, n_deployments: int,
                     rng_seed, pathloss: PathLossParams | None = None) -> list:
    """Draw per-UE PROXY static SE samples over fresh deployments.

    UEs are a PPP of density params.lambda_ue on the inner window; the
    serving set of each UE follows ``method``.
    """
    from .geometry import sample_deployment
    if n_deployments < 1:
        raise ParameterError("n_deployments must be >= 1")
    if pathloss is None:
        pathloss = PathLossParams()
    root = np.random.SeedSequence(rng_seed) if not isinstance(
        rng_seed, np.random.SeedSequence) else rng_seed
    samples = []
    for dep_i, child in enumerate(root.spawn(n_deployments)):
        rng = np.random.default_rng(child)
        deployment = sample_deployment(params, rng)
        ues = sample_ppp(params.lambda_ue, params.inner_window, rng)
        for ue_i, pos in enumerate(ues):
            sset = serving_set(method, pos, deployment, params)
            se = proxy_static_se(deployment, pos, sset, pathloss)
            samples.append(SESample(ue_id=f"d{dep_i}u{ue_i}", method=method,
                                    k=params.K, q=params.Q, se_static=se))
    return samples


SE_CSV_HEADER = ["ue_id", "method", "K", "Q", "se_static"]


def read_se_samples(path) -> list:
    """Read static SE samples from the published CSV schema."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or rows[0] != SE_CSV_HEADER:
        raise ParameterError(
            f"SE CSV must start with header {','.join(SE_CSV_HEADER)}")
    out = []
    for r in rows[1:]:
        if len(r) != 5:
            raise ParameterError(f"malformed SE CSV row: {r}")
        out.append(SESample(ue_id=r[0], method=r[1], k=int(r[2]),
                            q=float(r[3]), se_static=float(r[4])))
    return out


def percentile_stats(samples, p_levels) -> list:
    """Linear-interpolated percentiles; '95%-likely' maps to level 5."""
    arr = np.asarray(list(samples), dtype=float)
    if arr.size == 0:
        raise ParameterError("samples must be non-empty")
    levels = [float(p) for p in p_levels]
    for p in levels:
        if not (0.0 <= p <= 100.0):
            raise ParameterError(f"percentile level {p} outside [0, 100]")
    return [float(np.percentile(arr, p, method="linear")) for p in levels]
