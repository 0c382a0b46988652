"""Batch experiments over (m, trial) grids with seeded, reproducible records."""
from __future__ import annotations

import configparser
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import config as tolerances
from .hull import contains_origin, convex_hull, hull_vertex_graph, polar_vertex_graph
from .lower_bound_cert import certificate_svg, certify_lower_bound
from .polytope_graph import bfs_distance, diameter, diameter_relation_check
from .prob_bounds import density_thresholds, shadow_tail_params
from .sampler import derive_seed, sample_poisson_sphere
from .shadow import (
    PlaneSpan,
    projection_polygon_vertices,
    shadow_record,
    shadow_svg,
    stitched_diameter_path,
)
from .sphere_geom import SphericalCap, greedy_separated_net, is_dense_for, max_occupancy_bound, solve_epsilon

__all__ = [
    "KINDS",
    "ExperimentConfig",
    "RunResult",
    "FitResult",
    "InsufficientDataError",
    "load_config",
    "run",
    "run_trial",
    "fit_exponent",
    "write_records",
    "read_records",
]

log = logging.getLogger(__name__)

SCHEMA = "spherepoly-records v1"
KINDS = ("hull-validate", "shadow-scaling", "diameter-relation", "density", "lb-certify", "stitch", "tails")

# columns per kind, after the common prefix
_COMMON = ["kind", "n", "m", "trial", "seed", "M"]
_COLUMNS = {
    "hull-validate": ["V", "E", "F", "max_violation", "qhull_match", "problems"],
    "shadow-scaling": ["shadow_size", "projection_size", "mismatch"],
    "diameter-relation": ["diam_P", "diam_Q", "relation_holds", "walk_D", "walk_L", "walk_ok"],
    "density": ["eps", "dense", "max_occ_t1", "threshold_t1", "max_occ_t2", "threshold_t2",
                "max_vertex_norm", "norm_bound"],
    "lb-certify": ["eps", "certified_lb", "distance", "k", "k0_minus", "k0_plus", "antipodal_distance",
                   "argmin_violation"],
    "stitch": ["eps", "net_size", "diam_P", "max_stitched", "max_local", "objectives"],
    "tails": ["shadow_size", "t_p", "U"],
}
_TAIL = ["violations", "wall_time"]
# primary metrics fitted against m in the summary
_METRICS = {
    "hull-validate": ["F"],
    "shadow-scaling": ["shadow_size"],
    "diameter-relation": ["diam_P", "diam_Q"],
    "density": ["max_occ_t1"],
    "lb-certify": ["certified_lb", "antipodal_distance", "distance"],
    "stitch": ["max_stitched", "diam_P"],
    "tails": ["shadow_size"],
}


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: int = 3
    m_list: tuple[float, ...] = (100.0,)
    trials: int = 1
    p: float = 1e-3
    seed: int = 0
    c1: float = 1.0
    c2: float = 1.0
    cU: float = 1.0
    c6: float = 1.0
    objectives: int = 50
    geom_tol: float = tolerances.GEOM_TOL
    out: Path = Path("out")
    svg: bool = False
    jobs: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.m_list:
            raise ValueError("m-list must be nonempty")
        if list(self.m_list) != sorted(self.m_list) or len(set(self.m_list)) != len(self.m_list):
            raise ValueError("m-list must be strictly ascending")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        return self


def _parse_m_list(text: str) -> tuple[float, ...]:
    vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    return tuple(vals)


def load_config(path, **overrides) -> ExperimentConfig:
    """Read an INI file with [experiment] and optional [constants] sections."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(path)
    ex = cp["experiment"]
    kw = {
        "kind": ex.get("kind", "hull-validate"),
        "n": ex.getint("n", 3),
        "m_list": _parse_m_list(ex.get("m", "100")),
        "trials": ex.getint("trials", 1),
        "p": ex.getfloat("p", 1e-3),
        "seed": ex.getint("seed", 0),
        "out": Path(ex.get("out", "out")),
        "svg": ex.getboolean("svg", False),
        "jobs": ex.getint("jobs", 1),
    }
    if cp.has_section("constants"):
        c = cp["constants"]
        for key in ("c1", "c2", "cU", "c6", "geom_tol"):
            if key in c:
                kw[key] = c.getfloat(key)
        if "objectives" in c:
            kw["objectives"] = c.getint("objectives")
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kw).validate()


# -- trials -------------------------------------------------------------------

def _sample(cfg: ExperimentConfig, m: float, seed: int, row: dict):
    cloud = sample_poisson_sphere(cfg.n, m, seed)
    row["M"] = len(cloud)
    return cloud, convex_hull(cloud, seed=seed)


def _trial_hull(cfg, m, seed, row, svg_path):
    cloud, h = _sample(cfg, m, seed, row)
    problems = h.check(cfg.geom_tol)
    qh = convex_hull(cloud, method="qhull")
    match = h.facet_set() == qh.facet_set()
    row.update(V=len(h.vertices), E=len(h.hull_edges), F=len(h.facets), max_violation=h.max_violation(),
               qhull_match=int(match), problems=len(problems))
    return len(problems) + (not match)


def _plane(cfg, seed):
    return PlaneSpan.random(cfg.n, np.random.default_rng([seed, 1]))


def _trial_shadow(cfg, m, seed, row, svg_path):
    cloud, h = _sample(cfg, m, seed, row)
    G = polar_vertex_graph(h)
    W = _plane(cfg, seed)
    rec = shadow_record(G, cloud.points, W)
    proj = projection_polygon_vertices(G, W)
    mismatch = len(set(rec.shadow_vertex_ids) ^ proj)
    row.update(shadow_size=rec.size, projection_size=len(proj), mismatch=mismatch)
    if svg_path is not None:
        shadow_svg(G, rec, svg_path)
    return int(mismatch > 0)


def _trial_relation(cfg, m, seed, row, svg_path):
    cloud, h = _sample(cfg, m, seed, row)
    P, Q = polar_vertex_graph(h), hull_vertex_graph(h)
    rep = diameter_relation_check(P, Q, h.hull_edges)
    cert = rep.certificate
    row.update(diam_P=rep.diam_P, diam_Q=rep.diam_Q, relation_holds=int(rep.holds),
               walk_D=cert.D if cert else 0, walk_L=cert.L if cert else 0,
               walk_ok=int(cert is None or not cert.validate(h.hull_edges)))
    return len(rep.problems)


def _trial_density(cfg, m, seed, row, svg_path):
    cloud = sample_poisson_sphere(cfg.n, m, seed)
    row["M"] = len(cloud)
    eps, thr1 = density_thresholds(m, cfg.n, cfg.p, 1.0)
    _, thr2 = density_thresholds(m, cfg.n, cfg.p, 2.0)
    full = SphericalCap(np.eye(cfg.n)[0], 2.0)
    dense = is_dense_for(cloud.points, full, eps)
    occ1 = max_occupancy_bound(cloud.points, eps, cfg.n)
    occ2 = max_occupancy_bound(cloud.points, 2.0 * eps, cfg.n)
    bound = 1.0 / (1.0 - eps * eps / 2.0)
    vnorm = math.nan
    violations = 0
    if dense:
        h = convex_hull(cloud, seed=seed)
        if contains_origin(h):
            P = polar_vertex_graph(h)
            vnorm = float(np.max(np.linalg.norm(P.coords, axis=1)))
            violations = int(vnorm > bound + 1e-9)
        else:
            violations = 1
    row.update(eps=eps, dense=int(dense), max_occ_t1=occ1, threshold_t1=thr1, max_occ_t2=occ2,
               threshold_t2=thr2, max_vertex_norm=vnorm, norm_bound=bound)
    return violations


def _trial_lb(cfg, m, seed, row, svg_path):
    cloud, h = _sample(cfg, m, seed, row)
    Q = hull_vertex_graph(h)
    cert = certify_lower_bound(cloud, h, Q, c6=cfg.c6, seed=seed, strict=False)
    hi = int(np.argmax(cloud.points[:, 0]))
    lo = int(np.argmin(cloud.points[:, 0]))
    anti = bfs_distance(Q, Q.vertex_of_point(hi), Q.vertex_of_point(lo))
    row.update(eps=cert.eps, certified_lb=cert.certified_lb, distance=cert.distance, k=cert.k,
               k0_minus=cert.k0_minus, k0_plus=cert.k0_plus, antipodal_distance=anti,
               argmin_violation=cert.argmin_violation)
    if svg_path is not None and cfg.n == 3:
        certificate_svg(cert, h, svg_path)
    problems = cert.check()
    return len(problems) + int(cert.argmin_violation > 1e-9)


def _trial_stitch(cfg, m, seed, row, svg_path):
    cloud, h = _sample(cfg, m, seed, row)
    G = polar_vertex_graph(h)
    eps = solve_epsilon(m, cfg.n, cfg.p).epsilon
    e1 = np.eye(cfg.n)[0]
    net = greedy_separated_net(cfg.n, eps, seed=seed, pin=e1)
    rng = np.random.default_rng([seed, 2])
    longest, local_max, violations = 0, 0, 0
    best = None
    for _ in range(cfg.objectives):
        w = rng.standard_normal(cfg.n)
        w /= np.linalg.norm(w)
        sp = stitched_diameter_path(G, cloud.points, net, w, eps)
        nw = sp.net_point
        vals = G.coords[sp.path[: sp.local_length + 1]] @ nw
        if np.any(vals < vals[0] - 1e-9 * max(1.0, abs(vals[0]))):
            violations += 1
        local_max = max(local_max, sp.local_length)
        if sp.length >= longest:
            longest, best = sp.length, sp
    dP, _ = diameter(G)
    violations += int(dP > 2 * longest)
    row.update(eps=eps, net_size=len(net), diam_P=dP, max_stitched=longest, max_local=local_max,
               objectives=cfg.objectives)
    if svg_path is not None and best is not None:
        W = PlaneSpan.from_vectors(e1, best.net_point) if abs(best.net_point @ e1) < 1 - 1e-12 \
            else PlaneSpan(e1, np.eye(cfg.n)[1])
        shadow_svg(G, shadow_record(G, cloud.points, W), svg_path, best)
    return violations


def _trial_tails(cfg, m, seed, row, svg_path):
    cloud, h = _sample(cfg, m, seed, row)
    G = polar_vertex_graph(h)
    rec = shadow_record(G, cloud.points, _plane(cfg, seed))
    tp = shadow_tail_params(m, cfg.n, cfg.p, cfg.cU, cfg.c1, cfg.c2)
    row.update(shadow_size=rec.size, t_p=tp.t_p, U=tp.U)
    return 0


_TRIALS = {
    "hull-validate": _trial_hull,
    "shadow-scaling": _trial_shadow,
    "diameter-relation": _trial_relation,
    "density": _trial_density,
    "lb-certify": _trial_lb,
    "stitch": _trial_stitch,
    "tails": _trial_tails,
}


def run_trial(cfg: ExperimentConfig, m_index: int, trial: int) -> dict:
    """One record row; raises on failure so the caller can log and exclude it."""
    m = cfg.m_list[m_index]
    seed = derive_seed(cfg.seed, m_index, trial)
    row = {"kind": cfg.kind, "n": cfg.n, "m": m, "trial": trial, "seed": seed, "M": 0}
    svg_path = None
    if cfg.svg and trial == 0:
        svg_path = Path(cfg.out) / f"{cfg.kind}_m{m:g}_t{trial}.svg"
    t0 = time.perf_counter()
    old = tolerances.GEOM_TOL
    tolerances.GEOM_TOL = cfg.geom_tol
    try:
        row["violations"] = _TRIALS[cfg.kind](cfg, m, seed, row, svg_path)
    finally:
        tolerances.GEOM_TOL = old
    row["wall_time"] = time.perf_counter() - t0
    return row


def _safe_trial(args):
    cfg, i, t = args
    try:
        return run_trial(cfg, i, t), None
    except Exception as exc:  # per-trial failures are logged and excluded
        return None, f"m={cfg.m_list[i]:g} trial={t}: {type(exc).__name__}: {exc}"


# -- statistics ---------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    points: int


def fit_exponent(records, x: str = "m", y: str = "shadow_size", stat: str = "mean") -> FitResult:
    """Least-squares fit of log(stat of y per x) against log x."""
    groups: dict[float, list[float]] = {}
    for r in records:
        v = float(r[y])
        if not math.isnan(v):
            groups.setdefault(float(r[x]), []).append(v)
    agg = {"mean": np.mean, "median": np.median}[stat]
    xs, ys = [], []
    for xv in sorted(groups):
        yv = float(agg(groups[xv]))
        if xv > 0 and yv > 0:
            xs.append(math.log(xv))
            ys.append(math.log(yv))
    if len(xs) < 3:
        raise InsufficientDataError(f"need >= 3 distinct positive {x} values with positive {stat} {y}")
    X, Y = np.array(xs), np.array(ys)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), r2, len(xs))


# -- IO -----------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_records(rows: list[dict], kind: str, path) -> None:
    cols = _COMMON + _COLUMNS[kind] + _TAIL
    buf = io.StringIO()
    buf.write(f"# {SCHEMA} kind={kind}\n")
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r.get(c, "")) for c in cols) + "\n")
    Path(path).write_text(buf.getvalue())


def read_records(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(f"# {SCHEMA}"):
        raise ValueError("unrecognized records header")
    cols = lines[1].split(",")
    rows = []
    for ln in lines[2:]:
        vals = ln.split(",")
        row = {}
        for c, v in zip(cols, vals):
            try:
                row[c] = float(v) if any(ch in v for ch in ".enai") else int(v)
            except ValueError:
                row[c] = v
        rows.append(row)
    return rows


@dataclass
class RunResult:
    config: ExperimentConfig
    records: list[dict]
    summary: list[dict]
    fits: dict[str, FitResult] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return int(sum(r["violations"] for r in self.records))


def _summarize(cfg: ExperimentConfig, rows: list[dict]):
    summary, fits = [], {}
    for metric in _METRICS[cfg.kind]:
        for m in cfg.m_list:
            vals = np.array([float(r[metric]) for r in rows if r["m"] == m], dtype=float)
            vals = vals[~np.isnan(vals)]
            if vals.size == 0:
                continue
            summary.append({"row": "stats", "metric": metric, "m": m, "count": int(vals.size),
                            "mean": float(vals.mean()), "median": float(np.median(vals)),
                            "std": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                            "max_dev": float(np.max(np.abs(vals - vals.mean())))})
        for stat in ("mean", "median"):
            try:
                fit = fit_exponent(rows, "m", metric, stat)
            except InsufficientDataError:
                continue
            fits[f"{metric}:{stat}"] = fit
            summary.append({"row": "fit", "metric": metric, "stat": stat, "slope": fit.slope,
                            "intercept": fit.intercept, "r2": fit.r2, "count": fit.points})
    if cfg.kind == "density":
        for m in cfg.m_list:
            sub = [r for r in rows if r["m"] == m]
            if sub:
                summary.append({"row": "freq", "metric": "non_dense", "m": m,
                                "mean": float(np.mean([1 - r["dense"] for r in sub]))})
                for t in (1, 2):
                    summary.append({"row": "freq", "metric": f"occ_above_t{t}", "m": m, "mean": float(np.mean(
                        [r[f"max_occ_t{t}"] > r[f"threshold_t{t}"] for r in sub]))})
    if cfg.kind == "tails":
        for m in cfg.m_list:
            sub = [r for r in rows if r["m"] == m]
            if len(sub) > 1:
                s = np.array([r["shadow_size"] for r in sub], dtype=float)
                tp = sub[0]["t_p"]
                dev = np.abs(s - s.mean())
                summary.append({"row": "tail", "metric": "shadow_size", "m": m, "max_dev": float(dev.max()),
                                "t_p": tp, "mean": float(np.mean(dev > tp))})
    return summary, fits


_SUMMARY_COLS = ["row", "metric", "stat", "m", "count", "mean", "median", "std", "max_dev", "t_p",
                 "slope", "intercept", "r2"]


def _write_summary(summary: list[dict], cfg: ExperimentConfig, failures: int, violations: int, path) -> None:
    buf = io.StringIO()
    buf.write(f"# spherepoly-summary v1 kind={cfg.kind} failures={failures} violations={violations}\n")
    buf.write(",".join(_SUMMARY_COLS) + "\n")
    for r in summary:
        buf.write(",".join(_fmt(r[c]) if c in r else "" for c in _SUMMARY_COLS) + "\n")
    Path(path).write_text(buf.getvalue())


def run(cfg: ExperimentConfig, write: bool = True) -> RunResult:
    """Execute every (m, trial) cell, then write records.csv and summary.csv."""
    cfg.validate()
    out = Path(cfg.out)
    if write or cfg.svg:
        out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, i, t) for i in range(len(cfg.m_list)) for t in range(cfg.trials)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_safe_trial, tasks))
    else:
        results = [_safe_trial(t) for t in tasks]
    rows, failures = [], []
    for row, err in results:
        if err is not None:
            log.warning("trial failed: %s", err)
            failures.append(err)
        else:
            rows.append(row)
    rows.sort(key=lambda r: (r["m"], r["trial"]))
    summary, fits = _summarize(cfg, rows)
    res = RunResult(cfg, rows, summary, fits, failures)
    if write:
        write_records(rows, cfg.kind, out / "records.csv")
        _write_summary(summary, cfg, len(failures), res.violations, out / "summary.csv")
    return res


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None}).validate()
