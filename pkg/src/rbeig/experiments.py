"""Experiment driver behind the CLI: train, evaluate, timing and convergence studies."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import config as C
from . import container as store
from .eigensolve import cluster_spectrum, solve_detailed, solve_detailed_past
from .estimator import R_CAP, OfflineEstimatorData, estimate, offline_build
from .estimator import eta as estimator_eta
from .fem import AffineOperator, assemble
from .greedy import run_greedy
from .mesh import build_mesh
from .parameter import RNG_ALGORITHM, sample, theta
from .pod import collect_snapshots, pod_compress
from .rbspace import ReducedModel

log = logging.getLogger(__name__)

# detailed eigenvalues closer than this are one multiple eigenvalue
EXACT_CLUSTER_TOL = 1e-8


@dataclass
class Problem:
    config: dict
    mesh: object
    op: AffineOperator
    domain: object
    train: object
    test: object
    pod_train: object


def sample_sets(cfg, dom):
    sd = C.seeds(cfg)
    s = cfg["samples"]
    train = sample(dom, s["train"], sd["train"], "train")
    test = sample(dom, s["test"], sd["test"], "test")
    n_pod = s["pod_train"] or 2**dom.P
    pod_train = sample(dom, n_pod, sd["pod_train"], "pod-train", corners=s["pod_corners"])
    return train, test, pod_train


def setup(cfg) -> Problem:
    geom = C.geometry(cfg)
    mesh = build_mesh(geom)
    op = assemble(mesh)
    dom = C.domain(cfg, geom.n_subdomains)
    return Problem(cfg, mesh, op, dom, *sample_sets(cfg, dom))


class DetailedOracle:
    """Cached detailed eigenpairs on a fixed parameter list."""

    def __init__(self, op, points, K, eps_lambda, tol=1e-10):
        self.op, self.points, self.K, self.eps, self.tol = op, np.asarray(points), K, eps_lambda, tol
        self._cache = {}

    def __call__(self, m):
        sol = self._cache.get(m)
        if sol is None:
            sol = solve_detailed_past(self.op, theta(self.points[m]), self.K - 1, self.eps, self.tol)
            self._cache[m] = sol
        return sol

    def values(self):
        return np.array([self(m).values[: self.K] for m in range(len(self.points))])


@dataclass
class Evaluation:
    rel_err: np.ndarray  # (n_test, K)
    eta: np.ndarray
    ef_err: np.ndarray  # relative energy error of eigenfunctions, nan if not computed
    lam_red: np.ndarray

    @property
    def mean_rel_err(self):
        return self.rel_err.mean(axis=0)

    @property
    def std_rel_err(self):
        return self.rel_err.std(axis=0)

    def effectivities(self):
        """``gamma_i`` = test mean of ``eta_i / rel_err_i`` (points without positive error skipped)."""
        ok = self.rel_err > 0
        ratio = np.where(ok, self.eta / np.where(ok, self.rel_err, 1.0), np.nan)
        return np.nanmean(ratio, axis=0)

    def effectivity_ratio(self):
        g = self.effectivities()
        return float(np.max(g) / np.min(g))


def evaluate(model, data, points, K, eps_lambda, oracle=None, eigenfunctions=False):
    """Reduced solves plus estimators on ``points``; errors need a :class:`DetailedOracle`."""
    n = len(points)
    rel = np.full((n, K), np.nan)
    etas = np.empty((n, K))
    ef = np.full((n, K), np.nan)
    lam_red = np.empty((n, K))
    for m, mu in enumerate(points):
        red, rep = estimate(model, data, mu, K, eps_lambda)
        etas[m] = rep.eta
        lam_red[m] = red.values[:K]
        if oracle is None:
            continue
        sol = oracle(m)
        lam = sol.values[:K]
        rel[m] = (red.values[:K] - lam) / lam
        if eigenfunctions:
            groups = cluster_spectrum(sol.values, EXACT_CLUSTER_TOL)
            A = oracle.op.stiffness(theta(mu))
            M = oracle.op.mass
            for i in range(K):
                g = groups.group_of(i)
                if g.last >= len(sol.values) - 1:
                    continue
                u = model.Z @ red.coeffs[:, i]
                U = sol.vectors[:, list(g.indices)]
                w = u - U @ (U.T @ (M @ u))
                ef[m, i] = np.sqrt(max(w @ (A @ w), 0.0) / lam[i])
    return Evaluation(rel, etas, ef, lam_red)


def convergence_curve(model, data, points, K, eps_lambda, oracle, Ns):
    rows = []
    for N in Ns:
        if N > model.N or N < K + 1:
            continue
        ev = evaluate(model.truncated(N), data.truncated(N), points, K, eps_lambda, oracle)
        for i in range(K):
            rows.append((N, i + 1, ev.mean_rel_err[i], ev.std_rel_err[i]))
    return rows


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])


# --- commands -------------------------------------------------------------------


def _build_offline(problem, cfg, timings):
    K = cfg["K"]
    if cfg["method"] == "greedy":
        t = time.perf_counter()
        res = run_greedy(
            problem.op, problem.domain, problem.train.points, C.greedy_config(cfg), pod_points=problem.pod_train.points
        )
        timings["greedy_s"] = time.perf_counter() - t
        return res.basis, res.data, {"trace": res.trace, "n_detailed_solves": res.trace.n_detailed_solves,
                                     "stop_reason": res.trace.stop_reason}
    t = time.perf_counter()
    snaps = collect_snapshots(
        problem.op, problem.train.points, K, cfg["greedy"]["eps_lambda"], cfg["pod"]["extended"], cfg["solver_tol"]
    )
    timings["snapshots_s"] = time.perf_counter() - t
    t = time.perf_counter()
    basis = pod_compress(problem.op, snaps, cfg["pod"]["N"]).basis
    timings["pod_s"] = time.perf_counter() - t
    t = time.perf_counter()
    data = offline_build(problem.op, basis, problem.domain.reference)
    timings["estimator_offline_s"] = time.perf_counter() - t
    return basis, data, {"n_detailed_solves": snaps.n_solves, "stop_reason": "pod"}


def cmd_train(cfg, out_dir, with_oracle=False):
    """Offline phase: mesh, assembly, basis construction, estimator data; persisted to ``out_dir``."""
    timings = {}
    t = time.perf_counter()
    problem = setup(cfg)
    timings["setup_s"] = time.perf_counter() - t
    basis, data, info = _build_offline(problem, cfg, timings)
    arrays = {
        "basis": basis.Z,
        "reduced_blocks": basis.blocks,
        "gram": data.gram,
        "mu_ref": problem.domain.reference,
        "theta_ref": data.theta_ref,
    }
    if with_oracle:
        arrays.update(store.oracle_arrays(problem.op))
    dims = {"n_dofs": problem.op.n_dofs, "N": basis.N, "Q": problem.op.Q, "K": cfg["K"], "P": problem.domain.P}
    container = store.build(cfg, dims, arrays, {"rng": RNG_ALGORITHM, "with_oracle": bool(with_oracle)})
    out = Path(out_dir)
    store.save(container, out)
    if "trace" in info:
        info["trace"].write_csv(out / "trace.csv", problem.train.points)
    summary = {
        "config_hash": container.manifest["config_hash"],
        "container_hash": container.manifest["container_hash"],
        "N": basis.N,
        "n_dofs": problem.op.n_dofs,
        "n_detailed_solves": info["n_detailed_solves"],
        "stop_reason": info["stop_reason"],
        "timings": timings,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return container, summary


def online_model(container):
    a = container.arrays
    model = ReducedModel(a["reduced_blocks"], a["basis"])
    data = OfflineEstimatorData.from_gram(a["gram"], a["mu_ref"])
    return model, data


def oracle_operator(container):
    blocks, mass = container.oracle_matrices()
    return AffineOperator(blocks, [None] * len(blocks), mass, None)


def _test_points(cfg, P):
    dom = C.domain(cfg, P // 2)
    return sample_sets(cfg, dom)[1].points


def cmd_evaluate(container, out_dir, with_oracle=False):
    """Test-set report; oracle columns (errors, effectivities) need ``with_oracle``."""
    cfg = container.config
    K = cfg["K"]
    eps = cfg["greedy"]["eps_lambda"]
    model, data = online_model(container)
    points = _test_points(cfg, container.manifest["dims"]["P"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = container.manifest["config_hash"]
    if not with_oracle:
        ev = evaluate(model, data, points, K, eps)
        rows = [(h, m, i + 1, float(ev.lam_red[m, i]), float(ev.eta[m, i])) for m in range(len(points)) for i in range(K)]
        write_csv(out / "online.csv", ["config_hash", "mu_index", "output_index", "lambda_red", "eta"], rows)
        return {"config_hash": h, "n_test": len(points)}
    op = oracle_operator(container)
    oracle = DetailedOracle(op, points, K, eps, cfg["solver_tol"])
    ev = evaluate(model, data, points, K, eps, oracle, eigenfunctions=True)
    gam = ev.effectivities()
    rows = [
        (h, i + 1, float(ev.mean_rel_err[i]), float(ev.std_rel_err[i]), float(np.nanmean(ev.ef_err[:, i])),
         float(gam[i]), float(ev.eta[:, i].mean()))
        for i in range(K)
    ]
    write_csv(
        out / "evaluate.csv",
        ["config_hash", "output_index", "mean_rel_err", "std_rel_err", "mean_ef_err", "gamma", "mean_eta"],
        rows,
    )
    summary = {"config_hash": h, "R": ev.effectivity_ratio(), "gamma": gam.tolist(), "n_test": len(points)}
    (out / "evaluate_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def _median_time(fn, reps):
    ts = []
    for r in range(reps):
        t = time.perf_counter()
        fn(r)
        ts.append(time.perf_counter() - t)
    return float(np.median(ts))


def cmd_timing(container, out_dir, repetitions=None, Ns=None):
    """Median online timings per basis size versus the detailed solve."""
    cfg = container.config
    K = cfg["K"]
    eps = cfg["greedy"]["eps_lambda"]
    reps = repetitions or cfg["timing"]["repetitions"]
    Ns = Ns or cfg["timing"]["Ns"]
    model, data = online_model(container)
    points = _test_points(cfg, container.manifest["dims"]["P"])
    if container.has_oracle:
        op = oracle_operator(container)
    else:
        # the detailed reference row needs the detailed matrices; rebuild them from the config
        op = setup(cfg).op
    pts = [points[r % len(points)] for r in range(reps)]
    t_det = _median_time(lambda r: solve_detailed(op, theta(pts[r]), K, cfg["solver_tol"]), reps)
    rows = []
    for N in Ns:
        if N > model.N:
            continue
        sub, dsub = model.truncated(N), data.truncated(N)
        count = min(N, K + R_CAP)
        sols = {}

        def reduced(r):
            sols[r] = estimate(sub, dsub, pts[r], K, eps)[0]

        def solve_only(r):
            sub.solve_at(pts[r], count)

        t_red = _median_time(reduced, reps)
        t_solve = _median_time(solve_only, reps)
        t_eta = _median_time(lambda r: estimator_eta(dsub, pts[r], sols[r], K, eps), reps)
        t_rec = _median_time(lambda r: sub.Z @ sols[r].coeffs[:, :K], reps)
        rows.append((N, t_det, t_solve, t_red, t_eta, t_rec, t_det / (t_red + t_rec)))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "timing.csv",
        ["N", "detailed_s", "reduced_solve_s", "reduced_with_eta_s", "eta_s", "reconstruction_s", "speedup"],
        rows,
    )
    return rows


STUDY_VARIANTS = ("pod-extended", "pod-plain", "greedy-multi", "greedy-single", "greedy-single-noinit")


def build_variant(problem, cfg, variant, snapshots=None):
    """Basis and estimator data for one study variant."""
    K = cfg["K"]
    eps = cfg["greedy"]["eps_lambda"]
    n_top = max(cfg["study"]["N_grid"])
    if variant.startswith("pod"):
        snaps = snapshots if snapshots is not None else collect_snapshots(
            problem.op, problem.train.points, K, eps, True, cfg["solver_tol"]
        )
        if variant == "pod-plain":
            keep = [k for k, p in enumerate(snaps.provenance) if p["index"] < K]
            vectors = snaps.vectors[:, keep]
        else:
            vectors = snaps.vectors
        basis = pod_compress(problem.op, vectors, n_top, clip=True).basis
        return basis, offline_build(problem.op, basis, problem.domain.reference), None
    gcfg = C.greedy_config(cfg)
    gcfg.n_max = n_top
    gcfg.variant = "multi" if variant == "greedy-multi" else "single"
    if variant == "greedy-single-noinit":
        gcfg.init = "reference"
    res = run_greedy(problem.op, problem.domain, problem.train.points, gcfg, pod_points=problem.pod_train.points)
    return res.basis, res.data, res.trace


def cmd_convergence_study(cfg, out_dir, variants=None):
    """Per-variant CSV of mean relative test errors along the N grid."""
    problem = setup(cfg)
    K = cfg["K"]
    eps = cfg["greedy"]["eps_lambda"]
    variants = variants or cfg["study"]["variants"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    oracle = DetailedOracle(problem.op, problem.test.points, K, eps, cfg["solver_tol"])
    snaps = None
    if any(v.startswith("pod") for v in variants):
        snaps = collect_snapshots(problem.op, problem.train.points, K, eps, True, cfg["solver_tol"])
    h = C.config_hash(cfg)
    results = {}
    for v in variants:
        t = time.perf_counter()
        basis, data, trace = build_variant(problem, cfg, v, snaps)
        rows = convergence_curve(basis, data, problem.test.points, K, eps, oracle, cfg["study"]["N_grid"])
        write_csv(out / f"study_{v}.csv", ["config_hash", "N", "output_index", "mean_rel_err", "std_dev"],
                  [(h, *r) for r in rows])
        if trace is not None:
            trace.write_csv(out / f"trace_{v}.csv", problem.train.points)
        results[v] = rows
        log.info("variant %s: N=%d in %.1fs", v, basis.N, time.perf_counter() - t)
    return results


def locate_multiple_eigenvalue(op, path, bounds, index, n_scan=31, xatol=1e-12):
    """Minimize the relative gap ``(lam_{index+1} - lam_index) / lam_{index+1}`` along ``mu = path(t)``.

    Returns ``(t, mu, gap)``; a gap at roundoff level signals a genuine
    double eigenvalue (e.g. on a mirror-symmetric parameter line).
    """

    def gap(t):
        v = solve_detailed(op, theta(path(t)), index + 3).values
        return (v[index + 1] - v[index]) / v[index + 1]

    ts = np.linspace(bounds[0], bounds[1], n_scan)
    gs = [gap(t) for t in ts]
    k = int(np.argmin(gs))
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, n_scan - 1)]
    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    return float(res.x), path(res.x), float(res.fun)


def beam_symmetric_path(base=(17.02479115, 0.14945912, 44.49874569, 0.21400237)):
    """Mirror-symmetric beam parameters (outer subdomains equal), middle E as the path variable."""
    Eo, no, _, nm = base

    def path(E_mid):
        return np.array([Eo, no, E_mid, nm, Eo, no])

    return path
