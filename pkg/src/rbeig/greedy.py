"""Greedy reduced-basis construction for the K smallest eigenvalues."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .eigensolve import DEFAULT_TOL, solve_detailed_past
from .estimator import R_CAP, EstimatorError, distances, offline_build, residual_dual_norm
from .parameter import theta as _theta
from .pod import collect_snapshots, pod_compress
from .rbspace import ReducedBasis

log = logging.getLogger(__name__)

VARIANTS = ("single", "multi")
INITS = ("pod", "reference")


class GreedyError(RuntimeError):
    pass


@dataclass
class GreedyConfig:
    K: int
    n_max: int = 150
    eps_tol: float = 1e-6
    eps_lambda: float = 1e-3
    eps_proj: float = 1e-6
    n_init: int = None
    variant: str = "single"
    extended: bool = True
    init: str = "pod"
    r_cap: int = R_CAP
    solver_tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.eps_tol <= 0:
            raise ValueError("eps_tol must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        floor = math.ceil(1.5 * (self.K + 1))
        if self.n_init is None:
            self.n_init = max(floor, 5 * self.K)
        if self.init == "pod" and self.n_init < floor:
            raise ValueError(f"n_init must be at least ceil(1.5 (K + r)) = {floor}")


@dataclass
class GreedyTrace:
    K: int
    steps: list = field(default_factory=list)
    counts: np.ndarray = None
    n_detailed_solves: int = 0
    stop_reason: str = ""
    eta_max_path: list = field(default_factory=list)

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.K, dtype=int)

    def record(self, step, N, chosen, eta_max):
        self.steps.append(
            {"step": step, "N": N, "chosen": list(chosen), "eta_max": float(eta_max), "counts": self.counts.tolist()}
        )
        self.eta_max_path.append(float(eta_max))

    def write_csv(self, path, points=None):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "N", "chosen_mu", "chosen_index", "eta_max"] + [f"count_{i + 1}" for i in range(self.K)])
            for s in self.steps:
                chosen = s["chosen"] or [(None, None)]
                for m, i in chosen:
                    mu = "" if m is None else (m if points is None else " ".join(f"{x:.17g}" for x in points[m]))
                    idx = "" if i is None else i + 1
                    w.writerow([s["step"], s["N"], mu, idx, f"{s['eta_max']:.17g}"] + s["counts"])


@dataclass
class GreedyResult:
    basis: ReducedBasis
    data: object
    trace: GreedyTrace
    n_init_solves: int = 0


def initialize(op, domain, config: GreedyConfig, pod_points=None):
    """Initial space: POD of extended snapshots up to index K + 1, or ``u_1..u_{K+1}`` at the reference."""
    K = config.K
    if config.init == "pod":
        if pod_points is None or len(pod_points) == 0:
            raise GreedyError("POD initialization needs a training set")
        snaps = collect_snapshots(op, pod_points, K + 1, config.eps_lambda, True, config.solver_tol)
        try:
            res = pod_compress(op, snaps, config.n_init)
        except Exception as exc:
            raise GreedyError(f"POD initialization failed: {exc}") from exc
        for info in res.basis.provenance:
            info["step"] = 0
        return res.basis, snaps.n_solves
    sol = solve_detailed_past(op, _theta(domain.reference), K, config.eps_lambda, config.solver_tol)
    take = K + 1
    lam = sol.values
    while take < len(lam) and abs(lam[take] - lam[K]) / lam[K] <= config.eps_lambda:
        take += 1
    basis = ReducedBasis(op)
    for j in range(take):
        basis.extend(sol.vectors[:, j], config.eps_proj, {"source": "reference", "index": j, "step": 0})
    return basis, 1


def extended_select(detailed, i, eps_lambda, eps_proj, basis, extended=True, info=None):
    """Add eigenvectors of the cluster of ``i`` that the basis does not yet resolve.

    Returns the eigen indices that were appended.
    """
    lam = detailed.values
    if extended:
        members = [j for j in range(len(lam)) if abs(lam[j] - lam[i]) / lam[i] <= eps_lambda]
    else:
        members = [i]
    added = []
    for j in members:
        meta = dict(info or {})
        meta["index"] = j
        if basis.extend(detailed.vectors[:, j], eps_proj, meta):
            added.append(j)
    return added


class DetailedCache:
    """Detailed eigenpairs per training index, re-solved only when the cluster of ``i`` is not covered."""

    def __init__(self, op, thetas, eps_lambda, tol=DEFAULT_TOL):
        self.op, self.thetas, self.eps, self.tol = op, thetas, eps_lambda, tol
        self._sols = {}
        self.n_solves = 0

    def get(self, m, i):
        sol = self._sols.get(m)
        if sol is None or len(sol.values) <= i + 1 or sol.values[-1] <= sol.values[i] * (1 + self.eps):
            sol = solve_detailed_past(self.op, self.thetas[m], i, self.eps, self.tol)
            self._sols[m] = sol
            self.n_solves += 1
        return sol


class _Sweeper:
    """Estimator sweep over a fixed training set against the current basis."""

    def __init__(self, basis, data, thetas, config):
        self.basis, self.data, self.thetas, self.cfg = basis, data, thetas, config

    def __call__(self):
        basis, cfg = self.basis, self.cfg
        K, N = cfg.K, basis.N
        if N < K + 1:
            raise GreedyError(f"basis of size {N} cannot resolve K + 1 = {K + 1} eigenvalues")
        count = min(N, K + cfg.r_cap)
        B = np.ascontiguousarray(basis.blocks).reshape(basis.op.Q, N * N)
        g_ref = self.data.theta_ref
        out = np.empty((len(self.thetas), K))
        for m, th in enumerate(self.thetas):
            A = (th @ B).reshape(N, N)
            lam, U = sla.eigh(A, subset_by_index=[0, count - 1], check_finite=False)
            _, d, _ = distances(lam, cfg.eps_lambda, K, cfg.r_cap)
            norms = residual_dual_norm(self.data, th, U[:, :K], lam[:K])
            g = np.min(th / g_ref)
            out[m] = norms**2 / (g * d * lam[:K])
        return out


def _ranked(E):
    """Flat indices sorted by descending value; ties go to the lowest (mu, i)."""
    vals = np.nan_to_num(E.ravel(), nan=-np.inf)
    return np.lexsort((np.arange(vals.size), -vals)), vals


def run_greedy(op, domain, train_points, config: GreedyConfig, basis=None, pod_points=None, callback=None):
    """Run the single- or multi-choice greedy loop from an initial basis.

    Stops when the largest estimator over the training set drops below
    ``eps_tol`` or the basis reaches ``n_max``.
    """
    n_init_solves = 0
    if basis is None:
        basis, n_init_solves = initialize(op, domain, config, pod_points)
    data = offline_build(op, basis, domain.reference, follow=True)
    train_points = np.asarray(train_points, dtype=float)
    thetas = np.array([_theta(mu) for mu in train_points])
    sweep = _Sweeper(basis, data, thetas, config)
    trace = GreedyTrace(config.K)
    trace.n_detailed_solves = n_init_solves
    cache = DetailedCache(op, thetas, config.eps_lambda, config.solver_tol)
    selected = set()
    K = config.K

    def add(m, i, step):
        sol = cache.get(m, i)
        trace.n_detailed_solves = n_init_solves + cache.n_solves
        info = {"mu_index": int(m), "target": int(i), "step": step}
        added = extended_select(sol, i, config.eps_lambda, config.eps_proj, basis, config.extended, info)
        trace.counts[i] += len(added)
        return added

    step = 0
    while True:
        try:
            E = sweep()
        except EstimatorError as exc:
            raise GreedyError(f"estimator failed at N = {basis.N}: {exc}") from exc
        emax = float(np.nanmax(E))
        if emax < config.eps_tol:
            trace.record(step, basis.N, [], emax)
            trace.stop_reason = "tolerance"
            break
        if basis.N >= config.n_max:
            trace.record(step, basis.N, [], emax)
            trace.stop_reason = "n_max"
            break
        step += 1
        chosen = []
        if config.variant == "single":
            order, vals = _ranked(E)
            for f in order:
                if vals[f] < config.eps_tol:
                    break
                m, i = divmod(int(f), K)
                if (m, i) in selected:
                    continue
                selected.add((m, i))
                if add(m, i, step):
                    chosen.append((m, i))
                    break
        else:
            for i in range(K):
                col = np.nan_to_num(E[:, i], nan=-np.inf)
                for m in np.lexsort((np.arange(len(col)), -col)):
                    if col[m] <= config.eps_tol:
                        break
                    m = int(m)
                    if (m, i) in selected:
                        continue
                    selected.add((m, i))
                    if add(m, i, step):
                        chosen.append((m, i))
                        break
                if basis.N >= config.n_max:
                    break
        trace.record(step, basis.N, chosen, emax)
        log.info("greedy step %d: N=%d eta_max=%.3e chosen=%s", step, basis.N, emax, chosen)
        if callback is not None:
            callback(step, basis, E)
        if not chosen:
            trace.stop_reason = "stalled"
            break
    return GreedyResult(basis, data, trace, n_init_solves)


def run_single_choice(op, domain, train_points, config, basis=None, pod_points=None):
    return run_greedy(op, domain, train_points, _with(config, variant="single"), basis, pod_points)


def run_multi_choice(op, domain, train_points, config, basis=None, pod_points=None):
    return run_greedy(op, domain, train_points, _with(config, variant="multi"), basis, pod_points)


def _with(config, **kw):
    d = asdict(config)
    d.update(kw)
    return GreedyConfig(**d)
