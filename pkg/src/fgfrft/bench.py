"""Experiment protocols: accuracy sweeps, online timing, order learning.

Error and loss columns are deterministic functions of the seeds; only the
wall-clock fields vary between runs.
"""

from __future__ import annotations

import statistics
import time
import warnings
from dataclasses import dataclass, fields
from typing import List, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import CapacityError, MeasurementWarning, ParameterError
from .graph import GftMatrix, haar_matrix, random_unitary
from .learn import CascadeConfig, learn_orders
from .metrics import matrix_errors
from .transform import (
    DEFAULT_MEMORY_BUDGET,
    ExactOnline,
    UnitaryEigen,
    build_power_cache,
    cache_nbytes,
    eigendecompose_unitary,
    exact_gfrft,
    fgfrft_matrix,
)

PAPER_ALPHAS = (0.15, 0.35, 0.55, 0.75, 0.95)
PAPER_SWEEP_N = (2000, 3000, 4000)
PAPER_SWEEP_L = (10, 20, 30)


@dataclass(frozen=True)
class SweepRecord:
    n: int
    l: int
    alpha: float
    seed: int
    mse: float
    mae: float
    nmse: float
    build_time_fast: float
    build_time_exact: float


@dataclass(frozen=True)
class TimingRecord:
    n: int
    l: int
    median_fast_seconds: float
    median_exact_seconds: float
    speedup: float
    repeats: int
    warmups: int
    warning: str = ""


@dataclass(frozen=True)
class LearningRow:
    k: int
    backend: str
    seed: int
    final_loss: float
    alpha_sum: float
    abs_delta: float
    wall_time: float
    speedup: float


def record_fields(cls) -> List[str]:
    return [f.name for f in fields(cls)]


def _nonempty(**lists):
    for name, value in lists.items():
        if len(value) == 0:
            raise ParameterError(f"{name} must not be empty")


def _timed(fn, *args):
    t = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t


def accuracy_sweep(n_list, alpha_list, l_list, seeds=(0,),
                   memory_budget: int = DEFAULT_MEMORY_BUDGET) -> List[SweepRecord]:
    """Truncated-series vs eigendecomposition errors on Haar unitaries.

    One eigendecomposition and one power cache (depth ``max(l_list)``) per
    ``(N, seed)``; smaller truncation orders reuse leading cache entries.
    """
    _nonempty(n_list=n_list, alpha_list=alpha_list, l_list=l_list, seeds=seeds)
    l_max = max(int(l) for l in l_list)
    for n in n_list:
        if cache_nbytes(n, l_max) > memory_budget:
            raise CapacityError(f"sweep configuration N={n}, L={l_max} exceeds the memory budget")
    out = []
    for n in n_list:
        for seed in seeds:
            f = random_unitary(n, seed)
            eig = eigendecompose_unitary(f)
            cache = build_power_cache(f, l_max, memory_budget)
            for alpha in alpha_list:
                exact, t_exact = _timed(exact_gfrft, eig, alpha)
                for l in l_list:
                    approx, t_fast = _timed(fgfrft_matrix, cache, alpha, l)
                    rep = matrix_errors(approx.q, exact.q)
                    out.append(SweepRecord(int(n), int(l), float(alpha), int(seed),
                                           rep.mse, rep.mae, rep.nmse, t_fast, t_exact))
            del cache
    return out


def _median_time(fn, arg_seq, warmups):
    times = []
    for i, a in enumerate(arg_seq):
        t = time.perf_counter()
        fn(a)
        dt = time.perf_counter() - t
        if i >= warmups:
            times.append(dt)
    return statistics.median(times)


def timing_benchmark(n_list, l: int = 10, repeats: int = 5, warmups: int = 1, seed: int = 0,
                     memory_budget: int = DEFAULT_MEMORY_BUDGET) -> List[TimingRecord]:
    """Median online construction time of both routes, single-threaded.

    Offline artifacts are prepared first: a unitary with a prescribed
    spectrum (Haar eigenvectors, uniform phases) supplies the factors for
    the eigendecomposition route; the power cache serves the series route.
    Timed work is the per-order construction only.
    """
    _nonempty(n_list=n_list)
    notes = []
    if repeats < 3:
        notes.append(f"repeats={repeats} < 3: median is not robust")
    if warmups < 1:
        notes.append(f"warmups={warmups} < 1: first-touch costs are included")
    for note in notes:
        warnings.warn(note, MeasurementWarning, stacklevel=2)
    repeats = max(1, int(repeats))
    warmups = max(0, int(warmups))
    resolution = time.get_clock_info("perf_counter").resolution
    out = []
    for n in n_list:
        rng = np.random.default_rng(seed)
        theta = rng.uniform(-np.pi, np.pi, n)
        # prescribed spectrum: the factors are exact, no O(N^3) solve needed
        v = haar_matrix(n, rng)
        f = GftMatrix((v * np.exp(1j * theta)) @ v.conj().T, "synthetic", (v, theta))
        cache = build_power_cache(f, l, memory_budget)
        exact = ExactOnline(UnitaryEigen(v, theta))
        del f, v
        alphas = 0.15 + 0.8 * rng.random(warmups + repeats)
        with threadpool_limits(limits=1):
            t_fast = _median_time(lambda a: fgfrft_matrix(cache, a), alphas, warmups)
            t_exact = _median_time(exact.build, alphas, warmups)
        rec_notes = list(notes)
        if resolution > 0.01 * min(t_fast, t_exact):
            msg = f"clock resolution {resolution:.1e}s exceeds 1% of the measured interval"
            warnings.warn(msg, MeasurementWarning, stacklevel=2)
            rec_notes.append(msg)
        out.append(TimingRecord(int(n), int(l), t_fast, t_exact, t_exact / t_fast,
                                repeats, warmups, "; ".join(rec_notes)))
        del cache, exact
    return out


def order_learning_experiment(k_list=(1, 2, 3), target: float = 1.5, epochs: int = 200,
                              lr: float = 0.01, n: int = 128, l: int = 10, seeds=(0,),
                              init: float = 0.1, backends=("fast", "exact"),
                              memory_budget: int = DEFAULT_MEMORY_BUDGET):
    """Train cascades for each depth and backend.

    Returns ``(rows, results)``: one ``LearningRow`` per (seed, K, backend)
    and the matching full ``OrderResult`` objects keyed the same way.
    """
    _nonempty(k_list=k_list, seeds=seeds, backends=backends)
    rows, results = [], {}
    for seed in seeds:
        f = random_unitary(n, seed)
        eig = eigendecompose_unitary(f)
        cache = build_power_cache(f, l, memory_budget) if "fast" in backends else None
        for k in k_list:
            cfg = CascadeConfig(k=k, init=init, target=target, l=l, epochs=epochs, lr=lr, seed=seed)
            per = {}
            for b in backends:
                per[b] = learn_orders(f, cfg, b, cache=cache, eigen=eig)
                results[(seed, k, b)] = per[b]
            t_ref = per["exact"].wall_time if "exact" in per else None
            for b in backends:
                res = per[b]
                fin = res.final
                speed = t_ref / res.wall_time if t_ref else 1.0
                rows.append(LearningRow(k, b, seed, fin.loss, fin.alpha_sum,
                                        abs(fin.alpha_sum - target), res.wall_time, speed))
    return rows, results


def first(records: Sequence, **match) -> Optional[object]:
    for r in records:
        if all(getattr(r, k) == v for k, v in match.items()):
            return r
    return None
