"""Command-line front door: fit, eval, predict, simulate, bench.

Configuration is a flat ``key = value`` text file; any key can also be
given on the command line as ``--key value`` and overrides the file.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical
failure (non-finite sampler state).
"""

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from narm import kernels
from narm.backend import backend_name
from narm.data import (AttributeMatrix, DataError, SparseBinaryMatrix,
                       SplitSpec, load_attributes, load_edge_list,
                       load_hierarchy, make_split, read_manifest,
                       write_manifest)
from narm.distributions import RngStream
from narm.evaluation import (NumericalError, auc_pr, auc_roc, build_model,
                             evaluate_run, run_mcmc)
from narm.snapshots import (append_metrics, atomic_open, read_snapshot,
                            write_snapshot, write_trace)

__all__ = ["main", "RunConfig", "ConfigError"]


class ConfigError(Exception):
    pass


# name -> (type, default); None default means model-kind dependent or unset
_FIELDS = {
    "model": (str, None),
    "edges": (str, None),
    "attributes": (str, None),
    "hierarchy": (str, None),
    "manifest": (str, None),
    "pairs": (str, None),
    "n_nodes": (int, None),
    "k_max": (int, 50),
    "mu0": (float, 1.0),
    "gamma0": (float, 1.0),
    "epsilon": (float, None),
    "c0": (float, 1.0),
    "a0": (float, 1.0),
    "e0": (float, 1.0),
    "f0": (float, 1.0),
    "sweeps": (int, None),
    "burn_in": (int, None),
    "split_mode": (str, "by_links"),
    "train_fraction": (float, 0.8),
    "seeds": (str, "0,1,2,3,4"),
    "attributes_enabled": (bool, True),
    "hierarchy_enabled": (bool, False),
    "resample_hypers": (bool, False),
    "compat_crt_index": (bool, False),
    "all_negatives": (bool, False),
    "snapshot_every": (int, 0),
    "out": (str, "narm-out"),
    # simulate-only knobs
    "n_attrs": (int, 0),
    "attr_density": (float, 0.1),
}

_SWEEP_DEFAULTS = {"sym": (3000, 1500), "asym": (1500, 1000)}


def _parse_bool(text):
    if str(text).lower() in ("1", "true", "yes", "on"):
        return True
    if str(text).lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


class RunConfig:
    """Validated flat configuration for one run."""

    def __init__(self, values):
        for name, (typ, default) in _FIELDS.items():
            raw = values.get(name, default)
            if raw is not None and isinstance(raw, str):
                raw = _parse_bool(raw) if typ is bool else typ(raw)
            setattr(self, name, raw)
        unknown = set(values) - set(_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if self.model is not None:
            if self.model not in ("sym", "asym"):
                raise ConfigError("model must be 'sym' or 'asym'")
            if self.epsilon is None:
                self.epsilon = 1.0 if self.model == "sym" else 0.5
            default_sweeps, default_burn = _SWEEP_DEFAULTS[self.model]
            if self.sweeps is None:
                self.sweeps = default_sweeps
            if self.burn_in is None:
                self.burn_in = (default_burn if self.sweeps == default_sweeps
                                else self.sweeps // 2)
            if not 0 <= self.burn_in < self.sweeps:
                raise ConfigError("burn_in must satisfy 0 <= burn_in < sweeps")
        if self.k_max < 1:
            raise ConfigError("k_max must be >= 1")
        self.seed_list = [int(s) for s in str(self.seeds).split(",") if s]
        if not self.seed_list:
            raise ConfigError("seeds must list at least one integer")

    @property
    def directed(self):
        return self.model == "asym"

    def canonical(self):
        # the output directory is not part of the modeled configuration
        return "\n".join(f"{k}={getattr(self, k)}" for k in sorted(_FIELDS)
                         if k != "out")

    def config_hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def model_kwargs(self):
        kw = {"mu0": self.mu0,
              "attributes_enabled": self.attributes_enabled,
              "printed_crt_index": self.compat_crt_index}
        if self.model == "sym":
            kw.update(gamma0=self.gamma0, eps=self.epsilon, c0=self.c0,
                      a0=self.a0, e0=self.e0, f0=self.f0,
                      resample_extra_hypers=self.resample_hypers)
        else:
            kw.update(a0=self.a0, c0=self.c0, eps=self.epsilon)
        return kw


def load_config(path=None, overrides=()):
    values = {}
    if path:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, val = (part.strip() for part in line.split("=", 1))
                values[key] = val
    for key, val in overrides:
        values[key] = val
    return RunConfig(values)


def _require_model(config):
    if config.model is None:
        raise ConfigError("missing 'model' (sym or asym)")


def _load_inputs(config, need_edges=True):
    _require_model(config)
    network = None
    if need_edges:
        if not config.edges:
            raise ConfigError("missing 'edges' path")
        if config.n_nodes is None:
            raise ConfigError("missing 'n_nodes'")
        network = load_edge_list(config.edges, config.directed,
                                 config.n_nodes)
    F = None
    if config.attributes_enabled and config.attributes:
        F = load_attributes(config.attributes, config.n_nodes)
    elif config.attributes_enabled and config.attributes is None \
            and config.n_attrs == 0:
        F = None  # attribute-free run
    if config.attributes_enabled and config.attributes is None \
            and need_edges is False:
        F = None
    hierarchy = None
    if config.hierarchy_enabled:
        if not config.hierarchy:
            raise ConfigError("hierarchy_enabled needs a 'hierarchy' path")
        if F is None:
            raise ConfigError("hierarchy_enabled needs attributes")
        hierarchy = load_hierarchy(config.hierarchy, F.n_attrs)
    return network, F, hierarchy


def _out_path(config, name):
    import os

    os.makedirs(config.out, exist_ok=True)
    return os.path.join(config.out, name)


def cmd_fit(config):
    network, F, hierarchy = _load_inputs(config)
    if network.n_entries == 0:
        raise DataError(f"{config.edges}: no links to fit")
    model = build_model(config.model, config.n_nodes, config.k_max,
                        F=F, hierarchy=hierarchy, **config.model_kwargs())
    rng = RngStream(config.seed_list[0])
    pairs = np.column_stack([network.rows, network.cols])
    snap_path = _out_path(config, "snapshot.tsv")

    def snapshot_cb(sweep, mdl):
        if config.snapshot_every and (sweep + 1) % config.snapshot_every == 0:
            write_snapshot(snap_path, mdl.kind, sweep + 1, mdl.meta(),
                           mdl.blocks())

    _, trace = run_mcmc(model, pairs, config.sweeps, config.burn_in, rng,
                        callback=snapshot_cb)
    write_snapshot(snap_path, model.kind, config.sweeps, model.meta(),
                   model.blocks())
    write_trace(_out_path(config, "trace.csv"), trace)
    print(f"fit complete: {config.sweeps} sweeps, snapshot at {snap_path}")
    return 0


def cmd_eval(config):
    network, F, hierarchy = _load_inputs(config)
    metrics_path = _out_path(config, "metrics.jsonl")
    with atomic_open(metrics_path) as fh:
        pass  # truncate
    rocs, prs = [], []
    for seed in config.seed_list:
        if config.manifest:
            eval_set = read_manifest(config.manifest)
        else:
            spec = SplitSpec(config.split_mode, config.train_fraction, seed)
            eval_set = make_split(network, spec,
                                  all_negatives=config.all_negatives)
        t0 = time.perf_counter()
        result = evaluate_run(config.model, eval_set, RngStream(seed),
                              F=F, hierarchy=hierarchy, sweeps=config.sweeps,
                              burn_in=config.burn_in, K=config.k_max,
                              keep_trace=False, **config.model_kwargs())
        record = {"fold": seed, "model": config.model,
                  "attributes": bool(F is not None
                                     and config.attributes_enabled),
                  "auc_roc": result["auc_roc"], "auc_pr": result["auc_pr"],
                  "wall_time": time.perf_counter() - t0,
                  "config_hash": config.config_hash()}
        append_metrics(metrics_path, record)
        rocs.append(result["auc_roc"])
        prs.append(result["auc_pr"])
        print(f"fold {seed}: auc_roc={record['auc_roc']:.4f} "
              f"auc_pr={record['auc_pr']:.4f}")
    aggregate = {"fold": "aggregate", "model": config.model,
                 "auc_roc": float(np.mean(rocs)),
                 "auc_roc_std": float(np.std(rocs)),
                 "auc_pr": float(np.mean(prs)),
                 "auc_pr_std": float(np.std(prs)),
                 "config_hash": config.config_hash()}
    append_metrics(metrics_path, aggregate)
    print(f"aggregate: auc_roc={aggregate['auc_roc']:.4f} "
          f"auc_pr={aggregate['auc_pr']:.4f}")
    return 0


def cmd_predict(config):
    if not config.pairs:
        raise ConfigError("predict needs a 'pairs' file (lines: i j)")
    snap_path = _out_path(config, "snapshot.tsv")
    meta, blocks = read_snapshot(snap_path)
    n_nodes = int(meta["N"])
    F = None
    if config.attributes:
        F = load_attributes(config.attributes, n_nodes)
    model = build_model(meta["model"], n_nodes, int(meta["K"]), F=F,
                        mu0=float(meta["mu0"]))
    model.load_blocks(blocks)
    pairs = []
    with open(config.pairs) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                i, j = line.split()[:2]
                pairs.append((int(i), int(j)))
    probs = model.link_probability(np.array(pairs, dtype=np.int64))
    out = _out_path(config, "predictions.tsv")
    with atomic_open(out) as fh:
        for (i, j), p in zip(pairs, probs):
            fh.write(f"{i}\t{j}\t{float(p)!r}\n")
    print(f"wrote {len(pairs)} predictions to {out}")
    return 0


def _random_attributes(n_nodes, n_attrs, density, rng):
    mask = rng.generator.random((n_nodes, n_attrs)) < density
    pairs = [(i, l) for i, l in zip(*np.nonzero(mask))]
    return AttributeMatrix.from_pairs(pairs, n_nodes, n_attrs)


def cmd_simulate(config):
    _require_model(config)
    if config.n_nodes is None:
        raise ConfigError("simulate needs 'n_nodes'")
    rng = RngStream(config.seed_list[0])
    if config.attributes:
        F = load_attributes(config.attributes, config.n_nodes)
    elif config.n_attrs > 0:
        F = _random_attributes(config.n_nodes, config.n_attrs,
                               config.attr_density, rng)
    else:
        F = None
    hierarchy = None
    if config.hierarchy_enabled:
        if not config.hierarchy:
            raise ConfigError("hierarchy_enabled needs a 'hierarchy' path")
        hierarchy = load_hierarchy(config.hierarchy,
                                   F.n_attrs if F else 0)
    model = build_model(config.model, config.n_nodes, config.k_max,
                        F=F, hierarchy=hierarchy, **config.model_kwargs())
    net = model.simulate(rng)
    net.write_edge_list(_out_path(config, "edges.tsv"))
    if F is not None:
        F.write(_out_path(config, "attributes.tsv"))
    if hierarchy is not None:
        hierarchy.write(_out_path(config, "hierarchy.tsv"))
    write_snapshot(_out_path(config, "truth.tsv"), model.kind, 0,
                   model.meta(), model.blocks())
    print(f"simulated network with {net.n_entries} links "
          f"into {config.out}/")
    return 0


def _time_sweeps(model, pairs, rng, n_sweeps=5, warmup=2):
    model.set_train(pairs)
    model.init_from_prior(rng)
    for _ in range(warmup):
        model.sweep(rng)
    phases = {}
    t0 = time.perf_counter()
    for _ in range(n_sweeps):
        model.sweep(rng)
        for name, dt in model.timings.items():
            phases[name] = phases.get(name, 0.0) + dt
    total = (time.perf_counter() - t0) / n_sweeps
    return total, {k: v / n_sweeps for k, v in phases.items()}


def _er_pairs(n_nodes, n_edges, rng, directed):
    seen = set()
    gen = rng.generator
    while len(seen) < n_edges:
        i = int(gen.integers(n_nodes))
        j = int(gen.integers(n_nodes))
        if i == j:
            continue
        if not directed and i > j:
            i, j = j, i
        seen.add((i, j))
    return np.array(sorted(seen), dtype=np.int64)


def cmd_bench(config):
    _require_model(config)
    kernels.warmup()
    rng = RngStream(config.seed_list[0])
    report = {"backend": backend_name(), "edge_scaling": [],
              "attribute_scaling": []}
    n_nodes, k = 1000, 8
    print(f"backend: {report['backend']}")
    print("-- per-sweep time vs edge count (N=1000, K=8) --")
    for n_edges in (1500, 3000, 6000):
        pairs = _er_pairs(n_nodes, n_edges, rng, config.directed)
        model = build_model(config.model, n_nodes, k,
                            **config.model_kwargs())
        total, phases = _time_sweeps(model, pairs, rng)
        report["edge_scaling"].append(
            {"edges": n_edges, "per_sweep": total, "phases": phases})
        print(f"  |E|={n_edges}: {total * 1e3:.2f} ms/sweep  "
              + " ".join(f"{p}={v * 1e3:.2f}ms" for p, v in phases.items()))
    times = [rec["per_sweep"] for rec in report["edge_scaling"]]
    edges = [rec["edges"] for rec in report["edge_scaling"]]
    slope = np.polyfit(np.log(edges), np.log(times), 1)[0]
    report["edge_exponent"] = float(slope)
    print(f"  fitted edge exponent: {slope:.2f}")

    print("-- attribute phase time vs L (fixed per-attribute activity) --")
    d_prime = 20
    pairs = _er_pairs(400, 1200, rng, config.directed)
    for n_attrs in (50, 100, 200):
        attr_pairs = []
        gen = rng.generator
        for l in range(n_attrs):
            for i in gen.choice(400, size=d_prime, replace=False):
                attr_pairs.append((int(i), l))
        F = AttributeMatrix.from_pairs(attr_pairs, 400, n_attrs)
        model = build_model(config.model, 400, k, F=F,
                            **config.model_kwargs())
        total, phases = _time_sweeps(model, pairs, rng)
        report["attribute_scaling"].append(
            {"n_attrs": n_attrs, "attr_phase": phases.get("attributes", 0.0),
             "per_sweep": total})
        print(f"  L={n_attrs}: attribute phase "
              f"{phases.get('attributes', 0.0) * 1e3:.2f} ms/sweep")
    attr_times = [r["attr_phase"] for r in report["attribute_scaling"]]
    attrs = [r["n_attrs"] for r in report["attribute_scaling"]]
    slope = np.polyfit(np.log(attrs), np.log(attr_times), 1)[0]
    report["attribute_exponent"] = float(slope)
    print(f"  fitted attribute exponent: {slope:.2f}")

    out = _out_path(config, "bench.json")
    with atomic_open(out) as fh:
        json.dump(report, fh, indent=2)
    print(f"report written to {out}")
    return 0


_COMMANDS = {"fit": cmd_fit, "eval": cmd_eval, "predict": cmd_predict,
             "simulate": cmd_simulate, "bench": cmd_bench}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="narm",
        description="Poisson-gamma relational models with node attributes")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="key=value config file")
    for name, (typ, _) in _FIELDS.items():
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name,
                            metavar=name.upper())
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    overrides = [(name, getattr(args, name)) for name in _FIELDS
                 if getattr(args, name) is not None]
    try:
        config = load_config(args.config, overrides)
        return _COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
