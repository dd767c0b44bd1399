"""Limiting gap densities and filling densities of the lattice parking process.

For each gap size r in [k, 2k] the density D(k, r) = 2 (r+1) t_inf follows
from the series limit of one trajectory; the densities sum to 1 over r. The
filling density

    D(k) = sum_r (k+1)/(r+1) * D(k, r) = 2 (k+1) * [1/(2k+2) + sum_{n>=2} v_n]

admits a second, O(k)-per-step route: since the k-step recursion is linear
with r-independent coefficients, the summed sequence v_n = sum_r u_n runs
through the same recursion with summed warm-up values. Both routes are kept
and must agree; the aggregate one makes sweeps to k ~ 2^24 cheap.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ResourceLimitError
from .recursion import (
    EPS_FLOOR,
    GapParams,
    _sum_t_series,
    default_step_budget,
    initial_u,
    t_limit,
    t_limits_batch,
)

#: Full tables cost Theta(k^2 p); anything bigger must be asked for explicitly.
DEFAULT_TABLE_LIMIT = 2**14

WORKERS_ENV = "LATTICEPARK_WORKERS"


@dataclass(frozen=True)
class DensityTable:
    """Per-r density table for one k.

    ``d[j]`` is D(k, k+j); ``cumulative`` its running sum; ``scaled`` is
    k * D(k, r); ``filling`` the aggregate filling density D(k); ``eps`` the
    table-level tolerance the run was asked for.
    """

    k: int
    d: np.ndarray
    cumulative: np.ndarray
    scaled: np.ndarray
    filling: float
    eps: float

    @property
    def r_values(self) -> np.ndarray:
        return np.arange(self.k, 2 * self.k + 1)


@dataclass(frozen=True)
class SweepPoint:
    """One k of a parameter sweep: scaled endpoint densities, filling density,
    and the gap to the continuum constant m."""

    k: int
    kDkk: float
    kDk2k: float
    filling: float
    gap_to_m: float


@dataclass(frozen=True)
class ProfilePoint:
    """One abscissa of a distribution profile at finite k."""

    t: float
    d: float
    F: float
    Fprime: float


def density(
    k: int,
    r: int,
    eps: float = 1e-12,
    *,
    step_budget: int | None = None,
    return_certificate: bool = False,
):
    """Limiting density D(k, r) = 2 (r+1) t_inf, certified to ``eps``."""
    params = GapParams(k, r)
    sub_eps = eps / (2.0 * (r + 1))
    if sub_eps < EPS_FLOOR:
        raise ValueError(
            f"eps={eps} splits below the certificate floor; need eps >= "
            f"{2.0 * (r + 1) * EPS_FLOOR:.3e} for r={r}"
        )
    t, report = t_limit(params, sub_eps, step_budget=step_budget)
    d = 2.0 * (r + 1) * t
    return (d, report) if return_certificate else d


def density_table(
    k: int,
    eps: float = 1e-10,
    *,
    max_table_k: int = DEFAULT_TABLE_LIMIT,
    step_budget: int | None = None,
    return_certificate: bool = False,
):
    """All densities D(k, r), r = k..2k, with cumulative and scaled views.

    The table-level ``eps`` is split per r as eps / (2 (r+1)) so each density
    carries error at most ``eps`` and the normalization check inherits a
    clean bound. Work is vectorized across r (cost Theta(k^2 p)).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > max_table_k:
        raise ResourceLimitError(
            f"full table at k={k} exceeds the limit {max_table_k}; "
            f"raise max_table_k explicitly if you mean it"
        )
    rs = np.arange(k, 2 * k + 1)
    eps_per_r = eps / (2.0 * (rs + 1.0))
    t_inf, report = t_limits_batch(k, eps_per_r, step_budget=step_budget)
    d = 2.0 * (rs + 1.0) * t_inf
    cumulative = np.cumsum(d)
    scaled = k * d
    filling = math.fsum((k + 1.0) / (r + 1.0) * dv for r, dv in zip(rs, d))
    table = DensityTable(
        k=k, d=d, cumulative=cumulative, scaled=scaled, filling=filling, eps=eps
    )
    return (table, report) if return_certificate else table


def aggregate_initial_values(k: int) -> np.ndarray:
    """Summed warm-up values v_n = sum_r u_n for n = 2..k+1.

    The per-r pieces telescope: one r sits at its single-gap boundary and
    n-1 of them share the generic increment, leaving
    v_n = 1/(n+2k+1) - 1/(n+2k). Unit-tested against the explicit sum.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = np.arange(2, k + 2, dtype=float)
    return 1.0 / (n + 2 * k + 1) - 1.0 / (n + 2 * k)


def aggregate_initial_values_reference(k: int) -> np.ndarray:
    """Explicit per-r sums of initial_u; the slow cross-check for the above."""
    return np.array(
        [
            math.fsum(initial_u(n, k, r) for r in range(k, 2 * k + 1))
            for n in range(2, k + 2)
        ]
    )


def filling_density_aggregate(
    k: int,
    eps: float = 1e-10,
    *,
    step_budget: int | None = None,
    return_certificate: bool = False,
):
    """Filling density D(k) via the summed trajectory, O(k p) time.

    The truncation constant for the superposed series is taken conservatively
    as (k+1) times the measured max |v_n| over the constant's window.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    sub_eps = eps / (2.0 * (k + 1))
    if sub_eps < EPS_FLOOR:
        raise ValueError(
            f"eps={eps} splits below the certificate floor; need eps >= "
            f"{2.0 * (k + 1) * EPS_FLOOR:.3e} for k={k}"
        )
    v0 = aggregate_initial_values(k)
    t0 = 1.0 / (2 * k + 2)
    budget = default_step_budget(k) if step_budget is None else step_budget
    t, report = _sum_t_series(
        k,
        [float(v) for v in v0],
        t0,
        sub_eps,
        budget,
        const_scale=float(k + 1),
        what=f" (aggregate, k={k})",
    )
    filling = 2.0 * (k + 1) * t
    return (filling, report) if return_certificate else filling


def _certifiable_eps(eps: float, r: int) -> float:
    """Smallest admissible density-level eps at this r, given the t-level
    certificate floor; sweeps at huge k would otherwise be un-requestable."""
    return max(eps, 2.0 * (r + 1) * EPS_FLOOR * (1.0 + 1e-9))


def _sweep_point(args: tuple[int, float]) -> tuple[int, SweepPoint | None, str, dict]:
    """Worker body for one k of a sweep; never raises, reports instead."""
    k, eps = args
    try:
        dkk, rep_k = density(
            k, k, _certifiable_eps(eps, k), return_certificate=True
        )
        dk2k, rep_2k = density(
            k, 2 * k, _certifiable_eps(eps, 2 * k), return_certificate=True
        )
        filling, rep_agg = filling_density_aggregate(
            k, _certifiable_eps(eps, k), return_certificate=True
        )
    except ConvergenceError as exc:
        return k, None, str(exc), {}
    cert = {
        "k": k,
        "n_stop": max(rep_k.n_stop, rep_2k.n_stop, rep_agg.n_stop),
        "p": max(rep_k.p, rep_2k.p, rep_agg.p),
        "bound": max(rep_k.bound, rep_2k.bound, rep_agg.bound),
    }
    point = SweepPoint(
        k=k, kDkk=k * dkk, kDk2k=k * dk2k, filling=filling, gap_to_m=math.nan
    )
    return k, point, "", cert


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit argument, else the env override, else 1."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV, "")
    if env.strip():
        return max(1, int(env))
    return 1


def sweep(
    k_list: list[int],
    eps: float = 1e-10,
    *,
    m: float | None = None,
    workers: int | None = None,
    errors_out: dict[int, str] | None = None,
    certificates_out: list[dict] | None = None,
) -> list[SweepPoint]:
    """Endpoint densities and filling density for each k in ``k_list``.

    Only the r = k and r = 2k trajectories and the aggregate filling run
    (O(k p) per k), so sweeps stay cheap at large k. Per-point convergence
    failures are recorded in ``errors_out`` and the sweep continues. Results
    are merged in input order, independent of worker scheduling.

    The requested ``eps`` is floored per point at the tightest certifiable
    tolerance (the series certificate cannot chase below 16 machine epsilons);
    the bound actually certified lands in ``certificates_out``.
    """
    if not k_list:
        raise ValueError("k_list must be nonempty")
    for k in k_list:
        if k < 1:
            raise ValueError(f"every k must be >= 1, got {k}")
    if m is None:
        from .continuum import QuadratureConfig, renyi_constant

        m = renyi_constant(QuadratureConfig(abs_tol=1e-10))
    nworkers = resolve_workers(workers)
    tasks = [(int(k), float(eps)) for k in k_list]
    if nworkers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            raw = list(pool.map(_sweep_point, tasks))
    else:
        raw = [_sweep_point(t) for t in tasks]
    points: list[SweepPoint] = []
    for k, point, err, cert in raw:
        if point is None:
            if errors_out is not None:
                errors_out[k] = err
            continue
        if certificates_out is not None:
            certificates_out.append(cert)
        points.append(
            SweepPoint(
                k=point.k,
                kDkk=point.kDkk,
                kDk2k=point.kDk2k,
                filling=point.filling,
                gap_to_m=point.filling - m,
            )
        )
    return points


def profile(
    k: int,
    t_grid: list[float],
    eps: float = 1e-10,
    *,
    max_table_k: int = DEFAULT_TABLE_LIMIT,
) -> list[ProfilePoint]:
    """Finite-k samples of the gap-size distribution profile.

    F(t) sums the densities up to gap size floor((1+t) k) and the density
    sample is k * D(k, floor((1+t) k)), both straight from one table run.
    """
    if not t_grid:
        raise ValueError("t_grid must be nonempty")
    for t in t_grid:
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"profile abscissas live in [0, 1], got {t}")
    table = density_table(k, eps, max_table_k=max_table_k)
    out = []
    for t in t_grid:
        r = min(2 * k, int(math.floor((1.0 + t) * k)))
        j = r - k
        out.append(
            ProfilePoint(
                t=float(t),
                d=float(table.d[j]),
                F=float(table.cumulative[j]),
                Fprime=float(k * table.d[j]),
            )
        )
    return out
