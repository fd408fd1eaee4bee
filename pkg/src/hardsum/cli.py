"""Command-line front end: ``hardsum {gen,verify,run,sweep}``.

Every command reads one JSON config (``--config``) and writes CSV/JSON into
``--out``.  Exit codes: 0 success, 1 failed check, 2 bad config or parameters.

Config keys
-----------
family
    One of SC, C, AVG_SC, AVG_C, ONE_D, NC.
n, L, mu, Lavg, sigma, Delta, Bdist, eps
    Scalars consumed by the family constructor.
sampling
    ``"uniform"`` (default) or ``{"probs": [...]}``.
algorithm
    ``{"name": "point_saga", "step": ..., "gamma": ..., "epoch": ...}``.
budget, seeds
    Query budget per run and the list of seeds.
grid (sweep only)
    Mapping of key to list of values, crossed.  Keys may be any scalar above
    plus ``kappa`` (sets ``L = kappa * mu``) and ``kappa_over_n``.
"""
import argparse
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import analysis, instances, solvers, verify
from .errors import ParameterDomainError, RegimeError

log = logging.getLogger("hardsum")

_CONSTRUCTORS = {
    "SC": (instances.make_sc, ("L", "mu", "n", "Delta", "eps")),
    "AVG_SC": (instances.make_avg_sc, ("Lavg", "mu", "n", "Delta", "eps")),
    "C": (instances.make_c, ("L", "Bdist", "n", "eps")),
    "AVG_C": (instances.make_avg_c, ("Lavg", "Bdist", "n", "eps")),
    "ONE_D": (instances.make_one_d, ("L", "Bdist", "n")),
    "NC": (instances.make_nc, ("L", "sigma", "n", "Delta", "eps")),
}


class ConfigError(ValueError):
    """Malformed experiment configuration."""


@dataclass
class ExperimentConfig:
    family: str
    params: dict
    sampling: object = "uniform"
    algorithm: dict = field(default_factory=lambda: {"name": "point_saga"})
    budget: int = 10000
    seeds: list = field(default_factory=lambda: [0])
    out: Optional[str] = None
    grid: Optional[dict] = None

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        fam = d.pop("family", None)
        if fam not in _CONSTRUCTORS:
            raise ConfigError(f"family must be one of {sorted(_CONSTRUCTORS)}, got {fam!r}")
        params = {k: d.pop(k) for k in ("n", "L", "mu", "Lavg", "sigma", "Delta", "Bdist", "eps",
                                         "kappa", "kappa_over_n") if k in d}
        cfg = cls(fam, params)
        for key in ("sampling", "algorithm", "budget", "seeds", "out", "grid"):
            if key in d:
                setattr(cfg, key, d.pop(key))
        if d:
            raise ConfigError(f"unknown config keys: {sorted(d)}")
        if int(cfg.budget) != cfg.budget or cfg.budget < 1:
            raise ConfigError("budget must be a positive integer")
        if not isinstance(cfg.seeds, list) or not cfg.seeds:
            raise ConfigError("seeds must be a nonempty list")
        return cfg

    def build(self, params=None):
        """Instance for ``params`` (defaults to the config's own scalars)."""
        return build_instance(self.family, self.params if params is None else params)

    def scheme(self, n, seed):
        if self.sampling == "uniform":
            return solvers.SamplingScheme.uniform(n, seed)
        if isinstance(self.sampling, dict) and "probs" in self.sampling:
            probs = sorted(float(p) for p in self.sampling["probs"])
            if len(probs) != n:
                raise ConfigError(f"sampling.probs has {len(probs)} entries, need n={n}")
            return solvers.SamplingScheme(tuple(probs), seed)
        raise ConfigError("sampling must be 'uniform' or {'probs': [...]}")

    def algo(self):
        try:
            return solvers.AlgorithmSpec(**self.algorithm)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad algorithm spec: {exc}") from exc


def build_instance(family, params):
    p = dict(params)
    if "kappa_over_n" in p:
        p["kappa"] = p.pop("kappa_over_n") * p["n"]
    if "kappa" in p:
        p["L"] = p.pop("kappa") * p.get("mu", 1.0)
        p.setdefault("mu", 1.0)
    fn, keys = _CONSTRUCTORS[family]
    missing = [k for k in keys if k not in p]
    if missing:
        raise ConfigError(f"{family} needs parameters {missing}")
    return fn(*(p[k] for k in keys))


def _derived(inst):
    d = {"dim": inst.dim, "alpha": inst.alpha, "q": inst.q, "xi": inst.xi}
    try:
        cert = instances.certificate(inst)
        d.update(M=cert.M, N=cert.N, gap_at_M=cert.gap_at_M)
    except ParameterDomainError as exc:
        d["certificate_error"] = str(exc)
    return d


def _load(path):
    if path is None:
        raise ConfigError("--config is required")
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def _outdir(args, cfg=None):
    out = args.out or (cfg.out if cfg else None) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_jsonable)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


# -- commands ---------------------------------------------------------------

def cmd_gen(args):
    cfg = _load(args.config)
    inst = cfg.build()
    path = os.path.join(_outdir(args, cfg), "instance.json")
    d = instances.instance_to_dict(inst)
    d["derived"] = _derived(inst)
    _write_json(path, d)
    log.info("wrote %s", path)
    return 0


def cmd_verify(args):
    checks = verify.run_suite(args.suite, seed=args.seed or 0)
    report = {"suite": args.suite, "passed": all(c.passed for c in checks),
              "checks": [c.to_dict() for c in checks]}
    if args.out:
        _write_json(os.path.join(_outdir(args), f"verify_{args.suite}.json"), report)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.anchor}  {c.detail}")
    return 0 if report["passed"] else 1


def _one_run(task):
    cfg, params, seed, outdir, tag = task
    inst = cfg.build(params)
    eps = inst.eps
    # sweeps only need the hitting time, so they stop once eps is reached
    stop = eps if outdir is None else None
    trace = solvers.run(inst, cfg.algo(), cfg.scheme(inst.n, seed), cfg.budget, stop_at=stop)
    q = solvers.queries_to_eps(trace, eps) if eps is not None else None
    rec = {"seed": seed, "queries_to_eps": q, "final_value": float(trace.value[-1]),
           "metric": trace.metric}
    try:
        cert = instances.certificate(inst)
        K = 1 if inst.family == "ONE_D" else cert.M + 1
        T = analysis.stopping_times(trace, inst.n, K)[-1]
        if T is not None:
            exceeds = T > cert.N
        else:
            # censored: only informative if the trace itself got past N
            exceeds = True if len(trace.indices) >= cert.N else None
        rec.update(M=cert.M, N=cert.N, T_M_plus_1=T, T_exceeds_N=exceeds)
    except ParameterDomainError:
        pass
    if outdir is not None:
        trace.to_csv(os.path.join(outdir, f"trace{tag}_seed{seed}.csv"))
    return rec


def _map(fn, tasks, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def _median_queries(recs):
    vals = [math.inf if r["queries_to_eps"] is None else r["queries_to_eps"] for r in recs]
    med = float(np.median(vals))
    return None if math.isinf(med) else med


def cmd_run(args):
    cfg = _load(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    inst = cfg.build()
    cfg.algo()
    outdir = _outdir(args, cfg)
    recs = _map(_one_run, [(cfg, cfg.params, s, outdir, "") for s in cfg.seeds], args.jobs)
    summary = {"family": inst.family, "algorithm": cfg.algorithm, "budget": cfg.budget,
               "certificate": {k: v for k, v in _derived(inst).items() if k in ("M", "N")},
               "median_queries_to_eps": _median_queries(recs),
               "censored": sum(r["queries_to_eps"] is None for r in recs), "runs": recs}
    _write_json(os.path.join(outdir, "summary.json"), summary)
    log.info("median queries to eps: %s", summary["median_queries_to_eps"])
    return 0


def _grid_points(grid):
    if not isinstance(grid, dict) or not grid or any(not v for v in grid.values()):
        raise ConfigError("sweep needs a nonempty 'grid' mapping of key -> list of values")
    keys = sorted(grid)
    return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


def cmd_sweep(args):
    cfg = _load(args.config)
    points = _grid_points(cfg.grid)
    outdir = _outdir(args, cfg)
    tasks, meta = [], []
    for gi, pt in enumerate(points):
        params = {**cfg.params, **pt}
        inst = cfg.build(params)
        for s in cfg.seeds:
            tasks.append((cfg, params, s, None, f"_g{gi}"))
        meta.append((pt, inst))
    recs = _map(_one_run, tasks, args.jobs)
    rows, fit_records = [], []
    per = len(cfg.seeds)
    for gi, (pt, inst) in enumerate(meta):
        runs = recs[gi * per:(gi + 1) * per]
        med = _median_queries(runs)
        ell = math.log(inst.Delta / inst.eps) if inst.Delta and inst.eps else float("nan")
        predicted = (inst.n + math.sqrt(inst.n * inst.kappa)) * ell if inst.mu > 0 else float("nan")
        rows.append({**pt, "n": inst.n, "kappa": inst.kappa, "eps": inst.eps,
                     "predicted": predicted, "queries": med})
        if med is not None:
            fit_records.append((inst.n, inst.kappa, inst.eps / (inst.Delta or 1.0), med))
    with open(os.path.join(outdir, "records.csv"), "w") as fh:
        cols = ["n", "kappa", "eps", "predicted", "queries"]
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join("" if r[c] is None else repr(r[c]) for c in cols) + "\n")
    try:
        fit = analysis.fit_complexity(fit_records).__dict__
    except ValueError as exc:
        fit = {"error": str(exc)}
    _write_json(os.path.join(outdir, "fit.json"), fit)
    log.info("fit: %s", fit)
    return 0


# -- entry point ----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="hardsum", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment config (JSON)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        sp.add_argument("--seed", type=int, default=None, help="override the config seeds")

    common(sub.add_parser("gen", help="construct an instance and write it as JSON"))
    sp = sub.add_parser("verify", help="run a property suite")
    sp.add_argument("suite", nargs="?", default="all",
                    choices=sorted(verify.SUITES) + ["all"])
    common(sp)
    common(sub.add_parser("run", help="run an algorithm on one instance"))
    common(sub.add_parser("sweep", help="run a grid of instances and fit complexity"))
    return p


_COMMANDS = {"gen": cmd_gen, "verify": cmd_verify, "run": cmd_run, "sweep": cmd_sweep}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except RegimeError as exc:
        hint = f" (use family {exc.directive})" if exc.directive else ""
        print(f"error: {exc}{hint}", file=sys.stderr)
        return 2
    except (ConfigError, ParameterDomainError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
