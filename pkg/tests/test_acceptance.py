"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; a one-line PASS/FAIL report
per criterion is printed in the terminal summary.
"""

from __future__ import annotations

import math
import os
import subprocess
import sys
import time

import mpmath as mp
import numpy as np
import pytest

import latticepark as lp
from latticepark.rational import gap_expectation_sequence_exact
from latticepark.recursion import advance, initial_window

E2 = math.exp(-2.0)
M_PRINTED = 0.7475979203  # ten digits, as printed
KD2K_LIMIT_PRINTED = 0.6304735


@pytest.fixture(scope="module")
def renyi_m():
    return lp.renyi_constant(lp.QuadratureConfig(abs_tol=1e-10))


@pytest.fixture(scope="module")
def sweep_points(renyi_m):
    ks = [2**j for j in range(3, 17)]
    errors: dict[int, str] = {}
    t0 = time.perf_counter()
    points = lp.sweep(ks, 1e-10, m=renyi_m, errors_out=errors)
    elapsed = time.perf_counter() - t0
    assert not errors, errors
    assert [p.k for p in points] == ks
    return points, elapsed


def test_criterion_01_exact_k1_goldens(acceptance):
    t0 = time.perf_counter()
    d11 = lp.density(1, 1, 1e-13)
    d12 = lp.density(1, 2, 1e-13)
    d1 = lp.filling_density_aggregate(1, 1e-13)
    elapsed = time.perf_counter() - t0
    ok = (
        abs(d11 - (1.0 - 3.0 * E2)) <= 1e-12
        and abs(d12 - 3.0 * E2) <= 1e-12
        and abs(d1 - (1.0 - E2)) <= 1e-12
        and elapsed < 1.0
    )
    acceptance(
        1,
        "k=1 goldens: D(1,1)=1-3e^-2, D(1,2)=3e^-2, D(1)=1-e^-2 within 1e-12, <1s",
        ok,
        f"(d11 err {d11 - (1 - 3 * E2):.2e}, elapsed {elapsed:.3f}s)",
    )


def test_criterion_02_closed_form_trajectory(acceptance):
    w = initial_window(lp.GapParams(1, 1))
    us = {2: w.window[0]}
    while w.n < 40:
        w, u = advance(w)
        us[w.n] = u
    worst = 0.0
    for n in range(2, 41):
        reference = lp.closed_form_u_k1(n)
        worst = max(worst, abs(us[n] - reference) / abs(reference))
    acceptance(
        2,
        "recursion u_n (k=1) matches 3(n+1)(-2)^(n-1)/(n+3)! to 1e-14 rel, n<=40",
        worst <= 1e-14,
        f"(worst rel {worst:.2e})",
    )


def test_criterion_03_normalization(acceptance):
    t0 = time.perf_counter()
    ks = list(range(1, 65)) + [256, 1024, 4096]
    worst_k, worst = 0, 0.0
    for k in ks:
        table = lp.density_table(k, 1e-10)
        err = abs(float(table.cumulative[-1]) - 1.0)
        if err > worst:
            worst_k, worst = k, err
    elapsed = time.perf_counter() - t0
    acceptance(
        3,
        "normalization sum_r D(k,r)=1 within 1e-10 for k in {1..64,256,1024,4096}, <5min",
        worst <= 1e-10 and elapsed < 300.0,
        f"(worst {worst:.2e} at k={worst_k}, elapsed {elapsed:.1f}s)",
    )


def test_criterion_04_renyi_constant(acceptance):
    t0 = time.perf_counter()
    m, err = lp.renyi_constant_with_error(lp.QuadratureConfig(abs_tol=1e-9))
    elapsed = time.perf_counter() - t0
    # nine significant digits against the printed ten-digit rounding
    ok = abs(m - M_PRINTED) <= 1e-9 and err <= 1e-9 and elapsed < 10.0
    acceptance(
        4,
        "renyi_constant reproduces 0.7475979203 to >=9 significant digits, <10s",
        ok,
        f"(m={m!r}, |m - printed|={abs(m - M_PRINTED):.2e}, {elapsed:.2f}s)",
    )


def test_criterion_05_discrete_continuum_convergence(acceptance, sweep_points):
    points, elapsed = sweep_points
    gaps = [p.gap_to_m for p in points]
    ok = (
        all(g > 0 for g in gaps)
        and all(b < a for a, b in zip(gaps, gaps[1:]))
        and abs(gaps[-1]) < 1e-3
        and elapsed < 600.0
    )
    acceptance(
        5,
        "D(k)-m positive, strictly decreasing over k=2^3..2^16; |D(2^16)-m|<1e-3, <10min",
        ok,
        f"(last gap {gaps[-1]:.3e}, sweep {elapsed:.1f}s)",
    )


def test_criterion_06_endpoint_density_limit(acceptance, sweep_points):
    points, _ = sweep_points
    vals = [p.kDk2k for p in points]
    ok = (
        all(b > a for a, b in zip(vals, vals[1:]))
        and max(vals) < 0.6305
        and all(v < KD2K_LIMIT_PRINTED for v in vals)
    )
    acceptance(
        6,
        "k D(k,2k) strictly increasing over 2^3..2^16, below 0.6305 and 0.6304735",
        ok,
        f"(max {max(vals):.9f})",
    )


def test_criterion_07_log_growth_increments(acceptance, sweep_points):
    points, _ = sweep_points
    vals = [p.kDkk for p in points if p.k >= 2**6]
    increments = np.diff(vals)
    spread = float((increments.max() - increments.min()) / increments.mean())
    acceptance(
        7,
        "k D(k,k) octave increments vary by <15% relative across k=2^6..2^16",
        spread < 0.15,
        f"(spread {spread:.3%})",
    )


def test_criterion_08_oracle_equivalence(acceptance):
    t0 = time.perf_counter()
    ok = True
    detail = ""
    for k in (1, 2, 3):
        for n in range(1, 13):
            brute = lp.brute_force_expectation(n, k).counts
            exact = tuple(
                gap_expectation_sequence_exact(k, r, n)[n - 1]
                for r in range(k, 2 * k + 1)
            )
            if brute != exact:
                ok = False
                detail = f"(mismatch at n={n}, k={k})"
                break
    elapsed = time.perf_counter() - t0
    acceptance(
        8,
        "brute force == prefix recursion exactly (rationals) for n<=12, k<=3, <2min",
        ok and elapsed < 120.0,
        detail or f"(elapsed {elapsed:.1f}s)",
    )


def test_criterion_09_monte_carlo_agreement(acceptance):
    t0 = time.perf_counter()
    est = lp.estimate_gap_expectation(20, 2, 10**6, 42)
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for j, r in enumerate(est.r_values):
        exact = lp.exact_gap_expectation(20, 2, r)
        worst = max(worst, abs((est.counts[j] - exact) / est.stderr[j]))
    acceptance(
        9,
        "Monte Carlo n=20, k=2, 10^6 trials, seed 42: per-r |z| <= 4, <1min",
        worst <= 4.0 and elapsed < 60.0,
        f"(max |z| {worst:.2f}, {elapsed:.1f}s)",
    )


def _t_reference(k: int, r: int, n_to: int) -> mp.mpf:
    """60-digit recursion run, summed far past every sampled index."""
    with mp.workdps(60):
        u = {n: _initial_u_mp(n, k, r) for n in range(2, k + 2)}
        t = (mp.mpf(1) if r == k else mp.mpf(0)) / (2 * k + 2)
        for n in range(2, k + 2):
            t += u[n]
        for n in range(k + 2, n_to + 1):
            wsum = mp.fsum(u[n - i] for i in range(1, k + 1))
            u[n] = mp.mpf(-2 * (n + k)) / (n * (n + 2 * k + 1)) * wsum
            t += u[n]
        return t


def _initial_u_mp(n: int, k: int, r: int) -> mp.mpf:
    if n <= r - k:
        return mp.mpf(0)
    if n == r - k + 1 and r >= k + 1:
        return mp.mpf(1) / ((r - k + 1) * (r + k + 2))
    return mp.mpf(1) / (n * (n + 2 * k + 1)) - mp.mpf(1) / ((n - 1) * (n + 2 * k))


def test_criterion_10_truncation_certificate(acceptance):
    ln2 = math.log(2.0)
    ok = True
    detail = ""
    for k in (1, 2, 5, 8):
        for r in (k, 2 * k):
            t_ref = float(_t_reference(k, r, 44 * k + 2))
            _, _, t_arr = lp.finite_sequences(lp.GapParams(k, r), 20 * k + 2)
            w = initial_window(lp.GapParams(k, r))
            while w.n < 2 * k:
                w, _ = advance(w)
            big_m = w.trunc_const
            for p_n in (1, 3, 6, 10, 14, 16):
                n = p_n * k + 2  # block p_n starts here
                t_n = float(t_arr[n - 1])
                bound = big_m * k * math.exp(2.0 + p_n * ln2 - math.lgamma(p_n + 1))
                if abs(t_ref - t_n) > bound:
                    ok = False
                    detail = f"(violated at k={k}, r={r}, n={n})"
    acceptance(
        10,
        "|t_inf - t_n| <= M k e^2 2^p/p! at sampled n for k in {1,2,5,8}",
        ok,
        detail,
    )


def test_criterion_11_coverage_solver(acceptance, renyi_m):
    grid = lp.solve_coverage(20.0, 1.0 / 256)
    dev = lp.asymptote_check(grid, renyi_m)
    finer = lp.solve_coverage(20.0, 1.0 / 512)
    dev_finer = lp.asymptote_check(finer, renyi_m)
    brackets_ok = True
    for x in (2.0, 5.0, 10.0, 15.0):
        lo, hi = lp.dr_bracket(grid, x)
        brackets_ok = brackets_ok and (lo <= renyi_m <= hi)
    ok = dev < 1e-4 and dev_finer <= dev / 3.0 and brackets_ok
    acceptance(
        11,
        "coverage: sup dev from mx+m-1 on [10,20] <1e-4 at h=1/256, >=3x shrink at "
        "h/2; brackets contain m at x in {2,5,10,15}",
        ok,
        f"(dev {dev:.2e}, shrink x{dev / dev_finer:.2f})",
    )


def test_criterion_12_reproducibility(acceptance, tmp_path):
    def run(args, out, workers):
        env = dict(os.environ)
        env["LATTICEPARK_WORKERS"] = str(workers)
        res = subprocess.run(
            [sys.executable, "-m", "latticepark", *args, "--out", out],
            capture_output=True,
            text=True,
            cwd=tmp_path,
            env=env,
        )
        assert res.returncode == 0, res.stderr
        return (
            (tmp_path / out).read_bytes(),
            (tmp_path / (out + ".manifest.json")).read_bytes(),
        )

    ok = True
    sweep_args = ["sweep", "--k-set", "1,2,4,8"]
    a = run(sweep_args, "s1.csv", 1)
    b = run(sweep_args, "s2.csv", 2)
    ok = ok and a == b
    sim_args = ["simulate", "--n", "12", "--k", "2", "--trials", "3000", "--seed", "7"]
    c = run(sim_args, "m1.csv", 1)
    d = run(sim_args, "m2.csv", 2)
    ok = ok and c == d
    dens_args = ["density", "--k", "6", "--all"]
    e = run(dens_args, "d1.csv", 1)
    f = run(dens_args, "d2.csv", 2)
    ok = ok and e == f
    acceptance(
        12,
        "identical CLI invocations yield byte-identical CSV + manifest, any workers",
        ok,
    )
