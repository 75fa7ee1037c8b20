"""Shared-memory asynchronous execution.

Workers run in forked processes (or threads, see ``backend``) over one shared
float64 array.  Each update

1. notes the global counter (``start``),
2. draws a block from its own stream,
3. copies the shared vector with no coordination (an inconsistent read),
4. computes the prox-gradient step for its block from that copy and the
   block's current value,
5. takes a ticket from the counter (the only atomic operation) and writes its
   block scalar by scalar.

Staleness of an update is ``ticket - start``: the number of commits between
the start of its read and its own commit.  The update order is the ticket
order.  Aligned float64 stores are single machine writes, so a reader only
ever sees values that some worker wrote.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import os
import queue
import threading
import time
import traceback
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EngineAbort, ParameterError, StepsizeRuleError, StructuralError
from .problem import CompositeProblem, _residual
from .sampling import AliasTable, UniformStream, make_streams
from .simulator import SolverConfig
from .stepsize import compute_delta
from .trace import Trace, TraceRecord

__all__ = [
    "THREADS_ENV",
    "SharedIterate",
    "StalenessStats",
    "AsyncResult",
    "StalenessReport",
    "run_async",
    "run_async_ridge",
    "measure_staleness",
    "torn_read_stress",
    "resolve_workers",
]

log = logging.getLogger(__name__)

THREADS_ENV = "ABCFB_THREADS"


def resolve_workers(workers: int) -> int:
    """``workers`` capped by the ``ABCFB_THREADS`` environment variable."""
    if int(workers) < 1:
        raise ParameterError(f"need at least one worker, got {workers}")
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            cap_n = int(cap)
        except ValueError:
            raise ParameterError(f"{THREADS_ENV}={cap!r} is not an integer") from None
        if cap_n < 1:
            raise ParameterError(f"{THREADS_ENV} must be >= 1, got {cap_n}")
        return min(int(workers), cap_n)
    return int(workers)


def _context(backend: str):
    if backend == "process":
        if "fork" not in mp.get_all_start_methods():
            return None
        return mp.get_context("fork")
    if backend == "thread":
        return None
    raise ParameterError(f"unknown backend {backend!r}; use 'process' or 'thread'")


class SharedIterate:
    """``N`` shared float64 cells and a monotone commit counter.

    With a multiprocessing context the cells live in shared memory and the
    counter behind a process lock; without one (threads) plain arrays and a
    thread lock are used.
    """

    def __init__(self, x0: np.ndarray, limit: int, ctx=None):
        x0 = np.asarray(x0, dtype=float)
        self.limit = int(limit)
        if ctx is not None:
            self._raw = ctx.RawArray("d", x0.size)
            self._count = ctx.RawValue("q", 0)
            self._lock = ctx.Lock()
            self.x = np.frombuffer(self._raw, dtype=np.float64)
        else:
            self._raw = None
            self._count = _Cell()
            self._lock = threading.Lock()
            self.x = np.empty(x0.size)
        self.x[:] = x0

    @property
    def counter(self) -> int:
        return int(self._count.value)

    def read(self) -> np.ndarray:
        return self.x.copy()

    def ticket(self) -> Optional[int]:
        """Reserve the next update index, or ``None`` once the budget is spent."""
        with self._lock:
            t = self._count.value
            if t >= self.limit:
                return None
            self._count.value = t + 1
        return int(t)


class _Cell:
    __slots__ = ("value",)

    def __init__(self):
        self.value = 0


@dataclass
class StalenessStats:
    histogram: np.ndarray
    per_worker: np.ndarray

    @property
    def total(self) -> int:
        return int(self.histogram.sum())

    @property
    def max_observed(self) -> int:
        nz = np.flatnonzero(self.histogram)
        return int(nz[-1]) if nz.size else 0

    @classmethod
    def empty(cls, workers: int = 0) -> "StalenessStats":
        return cls(np.zeros(1, dtype=np.int64), np.zeros(workers, dtype=np.int64))


@dataclass
class StalenessReport:
    max: int
    mean: float
    quantiles: dict
    total_updates: int
    assumed_tau: int
    assumption_held: bool


def measure_staleness(stats: StalenessStats, assumed_tau: int) -> StalenessReport:
    """Summary of observed staleness against the assumed delay bound."""
    hist = np.asarray(stats.histogram, dtype=np.int64)
    total = int(hist.sum())
    if total == 0:
        return StalenessReport(0, 0.0, {}, 0, int(assumed_tau), True)
    values = np.arange(hist.size)
    mean = float(values @ hist) / total
    cdf = np.cumsum(hist) / total
    quantiles = {q: int(np.searchsorted(cdf, q)) for q in (0.5, 0.9, 0.99)}
    mx = stats.max_observed
    return StalenessReport(mx, mean, quantiles, total, int(assumed_tau), mx <= assumed_tau)


@dataclass
class AsyncResult:
    x: np.ndarray
    stats: StalenessStats
    trace: Trace
    workers: int
    backend: str
    elapsed: float
    delta: float
    tau_warning: Optional[str] = None
    extra: dict = field(default_factory=dict)


def _lasso_like_worker(problem, shared, gamma, table, seed, wid, hist_cap):
    """Update loop of one worker; returns (updates, staleness histogram)."""
    (sel,) = make_streams(seed, 1, key=(wid,))
    stream = UniformStream(sel)
    layout = problem.layout
    x = shared.x
    counts = np.zeros(hist_cap, dtype=np.int64)
    done = 0
    while True:
        start = shared.counter
        if start >= shared.limit:
            break
        i = table.draw(stream.next())
        x_hat = shared.read()
        sl = layout.slice(i)
        g = gamma[i]
        grad = problem.partial_gradient(x_hat, i)
        x_i = x[sl].copy()
        new = problem.prox(i, x_i - g * grad, g)
        t = shared.ticket()
        if t is None:
            break
        x[sl] = new
        stale = t - start
        if stale >= counts.size:
            counts = np.concatenate([counts, np.zeros(stale + 1 - counts.size, dtype=np.int64)])
        counts[stale] += 1
        done += 1
    return done, counts


def _ridge_worker(problem, shared, gamma, table, seed, wid, hist_cap, w_shared, w_lock):
    """Dual ridge kernel: lock-free reads, locked commit of ``u_i`` and ``w``."""
    (sel,) = make_streams(seed, 1, key=(wid,))
    stream = UniformStream(sel)
    inst = problem.instance
    X, y, reg = inst.X, inst.y, inst.reg
    u = shared.x
    counts = np.zeros(hist_cap, dtype=np.int64)
    done = 0
    while True:
        start = shared.counter
        if start >= shared.limit:
            break
        i = table.draw(stream.next())
        w_read = w_shared.x.copy()
        u_read = u[i]
        new = u_read - gamma[i] * (float(X[i] @ w_read) + reg * u_read - y[i])
        t = shared.ticket()
        if t is None:
            break
        # the delta must pair with the value it replaces, so the dual write
        # shares the primal lock; reads elsewhere stay uncoordinated
        with w_lock:
            old = u[i]
            u[i] = new
            w_shared.x[:] += (new - old) * X[i]
        stale = t - start
        if stale >= counts.size:
            counts = np.concatenate([counts, np.zeros(stale + 1 - counts.size, dtype=np.int64)])
        counts[stale] += 1
        done += 1
    return done, counts


def _entry(kernel, args, wid, out):
    try:
        out.put(("ok", wid, kernel(*args)))
    except BaseException:  # report everything, including KeyboardInterrupt
        out.put(("error", wid, traceback.format_exc()))


def _monitor(problem, shared, gamma, trace, stride, stop, poll):
    """Sample F and the residual every ``stride`` commits until ``stop``."""
    last = -1
    while not stop.is_set():
        k = shared.counter
        if k > last and (last < 0 or k >= last + stride):
            x = shared.read()
            trace.append(TraceRecord(k=k, F=problem.F(x), residual=_residual(problem, x, gamma)))
            last = k
        time.sleep(poll)


def _launch(kernel, make_args, workers, ctx, timeout, after_start=None):
    """Start the workers, call ``after_start``, gather one result per worker.

    Any worker error aborts the whole run and terminates the others.
    """
    if ctx is not None:
        out = ctx.Queue()
        procs = [ctx.Process(target=_entry, args=(kernel, make_args(w), w, out), daemon=True)
                 for w in range(workers)]
    else:
        out = queue.Queue()
        procs = [threading.Thread(target=_entry, args=(kernel, make_args(w), w, out), daemon=True)
                 for w in range(workers)]
    for p in procs:
        p.start()
    # forking must happen before any extra thread exists in the parent
    if after_start is not None:
        after_start()
    results = {}
    deadline = None if timeout is None else time.monotonic() + timeout
    try:
        while len(results) < workers:
            wait = 0.5 if deadline is None else max(0.01, min(0.5, deadline - time.monotonic()))
            try:
                status, wid, payload = out.get(timeout=wait)
            except queue.Empty:
                if deadline is not None and time.monotonic() >= deadline:
                    raise EngineAbort(f"workers did not finish within {timeout} s") from None
                if ctx is not None:
                    dead = [w for w, p in enumerate(procs)
                            if w not in results and not p.is_alive() and p.exitcode != 0]
                    if dead:
                        raise EngineAbort(f"workers {dead} exited abnormally") from None
                continue
            if status == "error":
                raise EngineAbort(f"worker {wid} failed:\n{payload}")
            results[wid] = payload
    except BaseException:
        if ctx is not None:
            for p in procs:
                if p.is_alive():
                    p.terminate()
        raise
    finally:
        for p in procs:
            p.join(timeout=5)
    return [results[w] for w in range(workers)]


def _collect(results, workers):
    per_worker = np.array([r[0] for r in results], dtype=np.int64)
    size = max((r[1].size for r in results), default=1)
    hist = np.zeros(size, dtype=np.int64)
    for _, h in results:
        hist[: h.size] += h
    return StalenessStats(hist, per_worker)


def _prepare(problem, config, workers, assumed_tau, allow_unsafe):
    if config.probabilities.m != problem.m:
        raise StructuralError("config and problem disagree on the number of blocks")
    if int(assumed_tau) < 0:
        raise ParameterError(f"assumed tau must be >= 0, got {assumed_tau}")
    workers = resolve_workers(workers)
    delta = compute_delta(config.stepsizes, problem.lipschitz, config.probabilities,
                          assumed_tau)
    if delta >= 2.0 and not allow_unsafe:
        raise StepsizeRuleError(
            f"stepsize rule violated: delta = {delta!r} >= 2 for assumed tau = {assumed_tau}")
    return workers, delta


def _tau_warning(stats, assumed_tau):
    if stats.max_observed > assumed_tau:
        msg = (f"observed staleness {stats.max_observed} exceeds the assumed tau = {assumed_tau}; "
               "the stepsize guarantee does not cover this run")
        log.warning(msg)
        return msg
    return None


def _run(problem, config, workers, assumed_tau, x0, kernel, extra_args, shared_extra, backend,
         trace_stride, allow_unsafe, timeout, poll):
    workers, delta = _prepare(problem, config, workers, assumed_tau, allow_unsafe)
    ctx = _context(backend)
    if backend == "process" and ctx is None:
        log.warning("fork start method unavailable; falling back to threads")
        backend = "thread"
    x0 = np.zeros(problem.dim) if x0 is None else problem.layout.check_vector(x0)
    shared = SharedIterate(x0, config.max_iters, ctx)
    gamma = np.asarray(config.stepsizes.gamma, dtype=float)
    table = AliasTable(config.probabilities.p)
    hist_cap = max(int(assumed_tau), workers) + 2
    extras = shared_extra(ctx) if shared_extra is not None else ()
    trace = Trace(meta={"problem": problem.name, "mode": "async", "workers": workers,
                        "backend": backend, "seed": config.seed})
    stride = max(1, int(trace_stride or config.trace_every))
    stop = threading.Event()
    monitor = threading.Thread(target=_monitor,
                               args=(problem, shared, gamma, trace, stride, stop, poll),
                               daemon=True)

    def make_args(w):
        return (problem, shared, gamma, table, config.seed, w, hist_cap) + tuple(extras)

    t0 = time.perf_counter()
    try:
        results = _launch(kernel, make_args, workers, ctx, timeout, after_start=monitor.start)
    finally:
        stop.set()
        if monitor.is_alive():
            monitor.join()
    elapsed = time.perf_counter() - t0
    x = shared.read()
    final_k = shared.counter
    if not trace.records or trace.records[-1].k < final_k:
        trace.append(TraceRecord(k=final_k, F=problem.F(x), residual=_residual(problem, x, gamma)))
    stats = _collect(results, workers)
    return AsyncResult(x=x, stats=stats, trace=trace, workers=workers, backend=backend,
                       elapsed=elapsed, delta=delta,
                       tau_warning=_tau_warning(stats, int(assumed_tau))), extras


def run_async(problem: CompositeProblem, config: SolverConfig, workers: int, assumed_tau: int,
              x0=None, *, backend: str = "process", trace_stride: Optional[int] = None,
              allow_unsafe: bool = False, timeout: Optional[float] = None,
              poll: float = 0.002) -> AsyncResult:
    """Run ``workers`` uncoordinated workers until ``config.max_iters`` commits.

    The stepsizes in ``config`` should be derived for ``assumed_tau``.  Going
    over it is reported in ``tau_warning`` but never enforced.  A monitor
    thread samples the shared vector every ``trace_stride`` commits (default
    ``config.trace_every``), and that sampling is itself an inconsistent read.
    Worker ``w`` draws blocks from a stream keyed by ``(config.seed, w)``.

    Raises
    ------
    StepsizeRuleError
        If ``delta >= 2`` for ``assumed_tau`` and ``allow_unsafe`` is false.
    EngineAbort
        If any worker fails or ``timeout`` seconds pass.
    """
    result, _ = _run(problem, config, workers, assumed_tau, x0, _lasso_like_worker, (), None,
                     backend, trace_stride, allow_unsafe, timeout, poll)
    return result


def run_async_ridge(problem: CompositeProblem, config: SolverConfig, workers: int,
                    assumed_tau: int, u0=None, *, backend: str = "process",
                    trace_stride: Optional[int] = None, allow_unsafe: bool = False,
                    timeout: Optional[float] = None, poll: float = 0.002) -> AsyncResult:
    """Asynchronous dual coordinate ascent for ridge regression.

    Workers read the primal accumulator ``w`` and the dual cells with no lock.
    The commit of ``u_i`` together with the rank-one correction ``w += (u_i' - u_i) x_i`` is
    applied under a lock, so ``w = X^T u`` holds exactly (up to rounding) once
    all workers have stopped.  ``result.extra`` holds the final ``w`` and the
    KKT gap ``||w - X^T u||_inf``.
    """
    inst = problem.instance
    if inst is None or not hasattr(inst, "X"):
        raise StructuralError("run_async_ridge needs a problem built by make_ridge_dual")
    w0 = np.zeros(inst.X.shape[1])
    if u0 is not None:
        w0 = inst.X.T @ np.asarray(u0, dtype=float)

    def shared_extra(ctx):
        lock = ctx.Lock() if ctx is not None else threading.Lock()
        return (SharedIterate(w0, 0, ctx), lock)

    result, extras = _run(problem, config, workers, assumed_tau, u0, _ridge_worker, (),
                          shared_extra, backend, trace_stride, allow_unsafe, timeout, poll)
    w = extras[0].read()
    result.extra["w"] = w
    result.extra["kkt_gap"] = float(np.max(np.abs(w - inst.X.T @ result.x), initial=0.0))
    return result


def _torn_writer(shared, n_rounds, wid):
    x = shared.x
    for r in range(n_rounds):
        x[:] = float(wid * n_rounds + r)
    return n_rounds, np.zeros(1, dtype=np.int64)


def torn_read_stress(dim: int = 4096, writers: int = 2, rounds: int = 2000, reads: int = 2000,
                     backend: str = "process") -> dict:
    """Show that reads are inconsistent across cells but never torn within one.

    Writers fill the whole array with a value that is unique to the writer and
    round.  The reader checks that every float it sees is one of those values
    (no torn scalar), and counts the snapshots that mix values from different
    writes (an inconsistent read, which is expected and allowed).
    """
    ctx = _context(backend)
    shared = SharedIterate(np.full(dim, -1.0), 0, ctx)
    valid = set(float(v) for v in range(writers * rounds)) | {-1.0}
    stats = {"snapshots": 0, "mixed": 0, "torn": 0}

    def reader():
        for _ in range(reads):
            snap = shared.read()
            uniq = np.unique(snap)
            stats["snapshots"] += 1
            if uniq.size > 1:
                stats["mixed"] += 1
            stats["torn"] += sum(1 for v in uniq if float(v) not in valid)

    def make_args(w):
        return (shared, rounds, w)

    _launch(_torn_writer, make_args, writers, ctx, timeout=120, after_start=reader)
    return stats
