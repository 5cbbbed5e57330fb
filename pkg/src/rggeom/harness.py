"""Experiment configuration, the end-to-end pipeline and report files."""

from __future__ import annotations

import json
import logging
import math
import os
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import clusternet as cn
from . import metricrecon as mr
from . import rgg
from .errors import ClusterNotFound, ConfigError
from .fileio import atomic_write, dump_json
from .linkfn import LinkFunction
from .manifold import ManifoldModel
from .params import ParamSet, validate_practical

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    model: ManifoldModel
    link: LinkFunction
    params: ParamSet
    groups: int | None = None
    seed: int = 0
    trials: int = 1
    pairs: int = 10_000
    probes: int = 100_000
    allow_geometry_violations: bool = False
    acceptance: dict = field(default_factory=dict)

    @property
    def group_count(self) -> int:
        return self.params.groups if self.groups is None else int(self.groups)

    @property
    def vertex_count(self) -> int:
        """Doubled layout: net batches plus as many fresh batches again."""
        return 2 * self.params.n * (self.params.d + 2) * self.group_count

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": self.model.to_dict(),
            "link": self.link.to_dict(),
            "params": self.params.to_dict(),
            "groups": self.groups,
            "seed": self.seed,
            "trials": self.trials,
            "pairs": self.pairs,
            "probes": self.probes,
            "allow_geometry_violations": self.allow_geometry_violations,
            "acceptance": self.acceptance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema_version {version!r}")
        try:
            model = ManifoldModel(**data["model"])
            link = LinkFunction(**data["link"])
            params = ParamSet.from_dict(data["params"])
        except (KeyError, TypeError) as err:
            raise ConfigError(f"incomplete config: {err}") from None
        known = {"schema_version", "model", "link", "params"}
        extra = {k: v for k, v in data.items() if k not in known}
        unknown = set(extra) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(model=model, link=link, params=params, **extra)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError(f"config is not valid JSON: {err}") from None
        return cls.from_dict(data)


def trial_seed(seed: int, trial: int) -> int:
    """Seed of trial ``trial``; a keyed hash so trials never share streams."""
    return zlib.crc32(f"{seed}:{trial}".encode()) | (int(seed) << 32)


@dataclass
class Layout:
    """Vertex split for one trial: net batches, then companion and spare batches."""

    net: cn.BatchLayout
    fresh: list[np.ndarray]

    @classmethod
    def build(cls, n: int, d: int, groups: int) -> "Layout":
        net = cn.BatchLayout.contiguous(n, d, groups)
        start = net.stop
        fresh = [np.arange(start + k * n, start + (k + 1) * n, dtype=np.int64)
                 for k in range((d + 2) * groups)]
        return cls(net, fresh)


@dataclass
class TrialResult:
    seed: int
    status: str
    failed_stage: int | None = None
    failed_round: int | None = None
    net: cn.ClusterNet | None = None
    companions: list | None = None
    gamma_geo: mr.WeightedGraph | None = None
    gamma_euc: mr.WeightedGraph | None = None
    nu: mr.EmpiricalMeasure | None = None
    report: mr.ReconReport | None = None
    stats: dict = field(default_factory=dict)


def reconstruct(G, layout: Layout, ps: ParamSet, link: LinkFunction, geo_rule: float | None = None,
                trace: cn.NetTrace | None = None, eval_vertices: np.ndarray | None = None):
    """Observer-side pipeline: net, companions, both Gamma graphs and nu.

    ``G`` must not carry the evaluation capability; nothing here reads latents.
    """
    if G.evaluation:
        raise ConfigError("reconstruction must run on the observer view of the graph")
    net = cn.build_net(G, layout.net, ps, link, trace=trace)
    L = len(net)
    companions = mr.extract_companion_clusters(G, net, layout.fresh[:L], ps, link)
    V0 = layout.fresh[L]
    extra = layout.fresh[L + 1] if eval_vertices is None else eval_vertices
    vertices = np.unique(np.concatenate([V0, extra] + [c.members for c in net.clusters] + companions))
    if geo_rule is None:
        geo_rule = 2.0 * ps.delta ** (1.0 / 3.0)
    gamma_euc = mr.build_gamma(G, net, companions, link, math.inf, ps, vertices)
    gamma_geo = mr.with_rule(gamma_euc, geo_rule)
    nu = mr.empirical_measure(G, companions, V0, link)
    return net, companions, gamma_geo, gamma_euc, nu


def run_trial(cfg: ExperimentConfig, trial: int = 0, evaluate: bool = True) -> TrialResult:
    """Generate one graph, reconstruct, and (optionally) score against latents."""
    ps = cfg.params
    seed = trial_seed(cfg.seed, trial)
    layout = Layout.build(ps.n, ps.d, cfg.group_count)
    G = rgg.generate(cfg.model, cfg.link, cfg.vertex_count, seed, materialize=False)
    trace = cn.NetTrace()
    try:
        net, comps, g_geo, g_euc, nu = reconstruct(G, layout, ps, cfg.link, trace=trace)
    except ClusterNotFound as err:
        log.info("trial %d: %s", trial, err)
        return TrialResult(seed, "cluster_not_found", err.stage, err.loop_index)
    res = TrialResult(seed, "ok", net=net, companions=comps, gamma_geo=g_geo, gamma_euc=g_euc, nu=nu)
    res.stats = {
        "clusters": len(net), "halted_normally": net.halted_normally,
        "cluster_sizes": [len(c) for c in net.clusters],
        "companion_sizes": [int(len(c)) for c in comps],
    }
    if evaluate:
        Ge = G.with_evaluation()
        res.report = mr.evaluate_reconstruction(Ge, cfg.model, g_geo, g_euc, nu, ps, cfg.pairs, seed)
        res.stats.update(evaluation_stats(Ge, cfg, net, comps, trace))
    return res


def evaluation_stats(Ge, cfg: ExperimentConfig, net, comps, trace: cn.NetTrace) -> dict:
    """Latent-side statistics of one reconstruction."""
    ps = cfg.params
    X = Ge.latents
    gap = cn.verify_delta_net(cfg.model, Ge, net, cfg.probes, Ge.seed)
    sep = cn.center_separation(Ge, net)
    radii = [cn.cluster_radius(Ge, c) for c in net.clusters]
    comp_radii = [
        float(np.linalg.norm(X[c] - X[u], axis=1).max()) if len(c) else math.nan
        for c, u in zip(comps, net.centers)
    ]
    pivot_err = [
        float(np.linalg.norm(X[p] - X[c.center]))
        for p, c in zip(trace.pivots, net.clusters[1:])
    ]
    return {
        "max_gap": gap,
        "min_separation": sep,
        "net_ok": bool(gap <= ps.delta and sep >= 0.3 * ps.delta),
        "cluster_radii": radii,
        "clusters_valid": bool(all(cn.verify_cluster(Ge, c, ps.eta, ps.cluster_min_size) for c in net.clusters)),
        "companion_radii": comp_radii,
        "new_center_to_pivot": pivot_err,
    }


def run_experiment(cfg: ExperimentConfig, out_dir, kernel_report: bool = False) -> dict:
    """Run all trials, write reports into ``out_dir`` and return the summary."""
    violations = validate_practical(cfg.params, cfg.model) if cfg.params.mode == "practical" else []
    if violations and not cfg.allow_geometry_violations:
        raise ConfigError(f"practical parameters violate {violations}; "
                          "set allow_geometry_violations to run anyway")
    cfg.params.validate()
    os.makedirs(out_dir, exist_ok=True)
    started = time.perf_counter()
    counters = {"ok": 0, "cluster_not_found": 0}
    stage_failures: dict[str, int] = {}
    trials = []
    first_report = None
    for t in range(cfg.trials):
        res = run_trial(cfg, t)
        counters[res.status] += 1
        entry = {"trial": t, "seed": res.seed, "status": res.status}
        if res.status == "cluster_not_found":
            key = f"stage_{res.failed_stage}"
            stage_failures[key] = stage_failures.get(key, 0) + 1
            entry.update(stage=res.failed_stage, round=res.failed_round)
        else:
            entry.update(res.stats)
            entry["recon"] = res.report.summary
            if first_report is None:
                first_report = res
        trials.append(entry)
    summary = {
        "config": cfg.to_dict(),
        "geometry_violations": violations,
        "counters": counters,
        "stage_failures": stage_failures,
        "trials": trials,
    }
    summary["acceptance"] = check_acceptance(cfg, trials)
    if first_report is not None:
        atomic_write(os.path.join(out_dir, "net.json"), _net_json(first_report.net, cfg, first_report.seed))
        first_report.report.write(os.path.join(out_dir, "recon_pairs.csv"), os.path.join(out_dir, "recon_summary.json"))
    if kernel_report:
        from .kernel import k_gap_check, write_gap_report

        rows = k_gap_check(cfg.model, cfg.link, 200, 100_000, cfg.seed)
        write_gap_report(rows, os.path.join(out_dir, "kernel_report.csv"))
    atomic_write(os.path.join(out_dir, "summary.json"), dump_json(_jsonable(summary)))
    elapsed = time.perf_counter() - started
    # wall time lives in its own file so the other reports stay byte-identical
    atomic_write(os.path.join(out_dir, "runtime.json"), dump_json({"seconds": round(elapsed, 3)}))
    log.info("experiment finished in %.1f s", elapsed)
    return summary


def _net_json(net: cn.ClusterNet, cfg: ExperimentConfig, seed: int) -> str:
    net.provenance = {"seed": seed, "params": cfg.params.to_dict(),
                      "model": cfg.model.to_dict(), "link": cfg.link.to_dict()}
    return net.to_json()


def check_acceptance(cfg: ExperimentConfig, trials: list[dict]) -> dict:
    """Evaluate configured thresholds; keys absent from the config are skipped.

    Recognized keys: ``min_net_ok_fraction``, ``min_euclid_within_4delta``,
    ``max_geo_error_fraction`` (of the geodesic diameter).
    """
    acc = cfg.acceptance
    out = {}
    ok = [t for t in trials if t["status"] == "ok"]
    if "min_net_ok_fraction" in acc:
        frac = sum(bool(t.get("net_ok")) for t in ok) / max(1, len(trials))
        out["net_ok_fraction"] = {"value": frac, "pass": frac >= acc["min_net_ok_fraction"]}
    if "min_euclid_within_4delta" in acc:
        vals = [t["recon"]["euclidean_within_4delta"] for t in ok] or [0.0]
        worst = min(vals)
        out["euclid_within_4delta"] = {"value": worst, "pass": worst >= acc["min_euclid_within_4delta"]}
    if "max_geo_error_fraction" in acc:
        tol = acc["max_geo_error_fraction"] * cfg.model.diam_gd
        vals = [t["recon"]["geodesic"].get("max", math.inf) for t in ok] or [math.inf]
        worst = max(vals)
        out["geo_max_error"] = {"value": worst, "limit": tol, "pass": worst <= tol}
    out["passed"] = all(v["pass"] for v in out.values())
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
