"""Experiment driver.

Subcommands: ``run`` (decentralized engine), ``baseline`` (centralized
oracle), ``synth`` (write a synthetic dataset), ``eval`` (score a saved
factors dump against a test file).

``run`` and ``baseline`` read an INI config; every key can be overridden
on the command line as ``--section.key=value``.  The environment variable
DMC_SEED overrides the engine seed.  Exit codes: 0 success, 2 invalid
config/data, 3 numerical abort.
"""

import argparse
import configparser
import json
import os
import sys
import time

import numpy as np

from . import centralized, data, engine, evaluate, topology
from .errors import (ConfigurationError, DataError, DmcError,
                     GenerationError, NumericsError, SingularityError)
from .linalg import BACKEND, matmul

CSV_COLUMNS = ("iteration", "objective", "train_rmse", "test_rmse",
               "consensus_gap", "dual_sum_norm")

DEFAULTS = {
    "data": {
        "source": "synthetic",   # synthetic | file
        "path": "",
        "users": "200",
        "items": "240",
        "true_rank": "8",
        "observe_fraction": "0.4",
        "noise_sd": "0.0",
        "seed": "0",
    },
    "split": {
        "fraction": "0.75",
        "seed": "0",
        "per_user": "false",
    },
    "topology": {
        "agents": "8",
        "kind": "ring",          # ring | complete | erdos_renyi | file
        "p": "0.4",
        "seed": "0",
        "path": "",
    },
    "engine": {
        "rank": "8",
        "beta": "0.5",
        "iterations": "500",
        "mode": "exact",
        "schedule": "double",
        "ridge": "0.0",
        "init_scale": "",
        "seed": "0",
        "stop_tol": "",
        "workers": "1",
    },
    "eval": {
        "like_threshold": "1.0",
        "use_mean_u": "false",
    },
    "output": {
        "dir": "out",
        "save_factors": "false",
    },
}


def _parse_bool(s):
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {s!r}")


def load_config(path, overrides=()):
    """Read the INI file, apply --section.key=value overrides, and return
    the fully resolved string-valued config dict."""
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigurationError(f"config file not found: {path}")
    cfg = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    for sec in parser.sections():
        if sec not in cfg:
            raise ConfigurationError(f"unknown config section [{sec}]")
        for key, value in parser[sec].items():
            if key not in cfg[sec]:
                raise ConfigurationError(f"unknown config key {sec}.{key}")
            cfg[sec][key] = value
    for item in overrides:
        key, _, value = item.partition("=")
        if "." not in key or not _:
            raise ConfigurationError(
                f"override must look like section.key=value, got {item!r}")
        sec, opt = key.split(".", 1)
        if sec not in cfg or opt not in cfg[sec]:
            raise ConfigurationError(f"unknown config key {sec}.{opt}")
        cfg[sec][opt] = value
    if os.environ.get("DMC_SEED"):
        cfg["engine"]["seed"] = os.environ["DMC_SEED"]
    return cfg


def config_to_ini(cfg):
    lines = []
    for sec, vals in cfg.items():
        lines.append(f"[{sec}]")
        for key, value in vals.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def build_engine_config(cfg, agents_override=None):
    e = cfg["engine"]
    return engine.EngineConfig(
        rank=int(e["rank"]),
        beta=float(e["beta"]),
        iterations=int(e["iterations"]),
        u_update_mode=e["mode"],
        exchange_schedule=e["schedule"],
        ridge=float(e["ridge"]),
        init_scale=float(e["init_scale"]) if e["init_scale"] else None,
        seed=int(e["seed"]),
        stop_tol=float(e["stop_tol"]) if e["stop_tol"] else None,
        workers=int(e["workers"]),
    )


def build_dataset(cfg):
    d = cfg["data"]
    if d["source"] == "synthetic":
        ratings, _ = data.synth_low_rank(
            int(d["users"]), int(d["items"]), int(d["true_rank"]),
            float(d["observe_fraction"]), float(d["noise_sd"]),
            int(d["seed"]))
        return ratings
    if d["source"] == "file":
        if not d["path"]:
            raise ConfigurationError("data.path required for source=file")
        return data.load_ratings(d["path"])
    raise ConfigurationError(f"unknown data source {d['source']!r}")


def build_topology(cfg):
    t = cfg["topology"]
    num = int(t["agents"])
    if t["kind"] == "ring":
        return topology.ring(num)
    if t["kind"] == "complete":
        return topology.complete(num)
    if t["kind"] == "erdos_renyi":
        return topology.erdos_renyi(num, float(t["p"]), int(t["seed"]))
    if t["kind"] == "file":
        topo = topology.load_topology(t["path"])
        if topo.num_agents != num:
            raise ConfigurationError(
                f"topology file has {topo.num_agents} agents, config says {num}")
        return topo
    raise ConfigurationError(f"unknown topology kind {t['kind']!r}")


def _atomic_write(path, content):
    tmp = f"{path}.tmp.{os.getpid()}"
    mode = "wb" if isinstance(content, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(content)
    os.replace(tmp, path)


def _metrics_csv(series):
    lines = [",".join(CSV_COLUMNS)]
    for row in series:
        lines.append(",".join([
            str(row.iteration),
            repr(row.objective),
            repr(row.train_rmse),
            repr(row.test_rmse),
            repr(row.consensus_gap),
            repr(row.dual_sum_norm),
        ]))
    return "\n".join(lines) + "\n"


def _write_outputs(out_dir, series, summary, factors=None):
    os.makedirs(out_dir, exist_ok=True)
    _atomic_write(os.path.join(out_dir, "metrics.csv"), _metrics_csv(series))
    _atomic_write(os.path.join(out_dir, "summary.json"),
                  json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if factors is not None:
        fdir = os.path.join(out_dir, "factors")
        os.makedirs(fdir, exist_ok=True)
        meta, blocks = factors
        _atomic_write(os.path.join(fdir, "meta.json"),
                      json.dumps(meta, indent=2, sort_keys=True) + "\n")
        for agent_id, arrays in blocks.items():
            tmp = os.path.join(fdir, f".agent_{agent_id:03d}.npz.tmp")
            with open(tmp, "wb") as fh:
                np.savez(fh, **arrays)
            os.replace(tmp, os.path.join(fdir, f"agent_{agent_id:03d}.npz"))


def _summary(cfg, series, rmse_train, rmse_test, ranking, wall_s, mode_flags):
    last = series[-1] if series else None
    return {
        "config": cfg,
        "backend": BACKEND,
        "wall_time_s": wall_s,
        "iterations_run": len(series),
        "final_objective": last.objective if last else None,
        "train_rmse": rmse_train,
        "test_rmse": rmse_test,
        "maps": ranking.maps if ranking else None,
        "maps_counted_users": ranking.counted_users if ranking else None,
        "maps_skipped_users": ranking.skipped_users if ranking else None,
        **mode_flags,
    }


def cmd_run(cfg):
    started = time.perf_counter()
    ratings = build_dataset(cfg)
    topo = build_topology(cfg)
    if topo.num_agents > ratings.n:
        raise ConfigurationError(
            f"agents ({topo.num_agents}) exceed item count ({ratings.n})")
    econf = build_engine_config(cfg)
    if econf.rank > ratings.m:
        raise ConfigurationError(
            f"rank ({econf.rank}) exceeds user count ({ratings.m})")
    ds = data.split(ratings, float(cfg["split"]["fraction"]),
                    int(cfg["split"]["seed"]),
                    per_user=_parse_bool(cfg["split"]["per_user"]))
    shards = data.partition_columns(ds.train, topo.num_agents)
    agents = engine.init_agents(shards, topo, econf)
    agents, series = engine.run(agents, topo, econf, ds.train, ds.test)

    if _parse_bool(cfg["eval"]["use_mean_u"]):
        mean_u = sum(a.U for a in agents) / len(agents)
        preds = np.empty(len(ds.test))
        for a in agents:
            sel = ((ds.test.items >= a.shard.col_start)
                   & (ds.test.items < a.shard.col_end))
            if sel.any():
                p = matmul(mean_u, a.V)
                preds[sel] = p[ds.test.users[sel],
                               ds.test.items[sel] - a.shard.col_start]
    else:
        preds = engine.predict_entries(agents, ds.test)
    ranking = evaluate.mean_aps(preds, ds.test,
                                float(cfg["eval"]["like_threshold"]))
    wall = time.perf_counter() - started

    factors = None
    if _parse_bool(cfg["output"]["save_factors"]):
        meta = {
            "m": ratings.m, "n": ratings.n, "rank": econf.rank,
            "agents": [{"id": a.id, "col_start": a.shard.col_start,
                        "col_end": a.shard.col_end} for a in agents],
        }
        blocks = {a.id: {"U": a.U, "V": a.V} for a in agents}
        factors = (meta, blocks)
    summary = _summary(
        cfg, series, series[-1].train_rmse, series[-1].test_rmse, ranking,
        wall, {"u_update_mode": econf.u_update_mode,
               "exchange_schedule": econf.exchange_schedule})
    _write_outputs(cfg["output"]["dir"], series, summary, factors)
    print(f"run: {len(series)} iterations, test_rmse="
          f"{series[-1].test_rmse:.6g}, mAPS={ranking.maps:.4f}")
    return 0


def cmd_baseline(cfg):
    started = time.perf_counter()
    ratings = build_dataset(cfg)
    econf = build_engine_config(cfg)
    if econf.rank > ratings.m:
        raise ConfigurationError(
            f"rank ({econf.rank}) exceeds user count ({ratings.m})")
    ds = data.split(ratings, float(cfg["split"]["fraction"]),
                    int(cfg["split"]["seed"]),
                    per_user=_parse_bool(cfg["split"]["per_user"]))
    state, series = centralized.central_run(ds.train, econf, ds.test)
    p = matmul(state.U, state.V)
    preds = p[ds.test.users, ds.test.items]
    ranking = evaluate.mean_aps(preds, ds.test,
                                float(cfg["eval"]["like_threshold"]))
    wall = time.perf_counter() - started
    factors = None
    if _parse_bool(cfg["output"]["save_factors"]):
        meta = {"m": ratings.m, "n": ratings.n, "rank": econf.rank,
                "agents": [{"id": 0, "col_start": 0, "col_end": ratings.n}]}
        factors = (meta, {0: {"U": state.U, "V": state.V}})
    summary = _summary(
        cfg, series, series[-1].train_rmse, series[-1].test_rmse, ranking,
        wall, {"u_update_mode": "centralized", "exchange_schedule": "none"})
    _write_outputs(cfg["output"]["dir"], series, summary, factors)
    print(f"baseline: {len(series)} sweeps, test_rmse="
          f"{series[-1].test_rmse:.6g}, mAPS={ranking.maps:.4f}")
    return 0


def cmd_synth(args):
    ratings, truth = data.synth_low_rank(
        args.users, args.items, args.rank, args.fraction, args.noise,
        args.seed)
    data.save_ratings(args.out, ratings)
    if args.truth_out:
        m, n = truth.shape
        users, items = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
        full = data.RatingMatrix(m, n, users.ravel(), items.ravel(),
                                 truth.ravel())
        data.save_ratings(args.truth_out, full)
    print(f"synth: wrote {len(ratings)} entries to {args.out}")
    return 0


def load_factors(path):
    """Read a factors/ dump back into (meta, {agent_id: (U, V)})."""
    with open(os.path.join(path, "meta.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    blocks = {}
    for spec in meta["agents"]:
        npz = np.load(os.path.join(path, f"agent_{spec['id']:03d}.npz"))
        blocks[spec["id"]] = (npz["U"], npz["V"])
    return meta, blocks


def cmd_eval(args):
    meta, blocks = load_factors(args.factors)
    test = data.load_ratings(args.test, m=meta["m"], n=meta["n"])
    if len(test) == 0:
        raise DataError(f"empty test file {args.test}")
    preds = np.empty(len(test))
    covered = np.zeros(len(test), dtype=bool)
    for spec in meta["agents"]:
        u, v = blocks[spec["id"]]
        sel = ((test.items >= spec["col_start"])
               & (test.items < spec["col_end"]))
        if sel.any():
            p = matmul(u, v)
            preds[sel] = p[test.users[sel],
                           test.items[sel] - spec["col_start"]]
            covered[sel] = True
    if not covered.all():
        raise DataError("test items outside the factors dump column ranges")
    ranking = evaluate.mean_aps(preds, test, args.threshold)
    err = evaluate.rmse(preds, test)
    summary = {
        "maps": ranking.maps,
        "maps_counted_users": ranking.counted_users,
        "maps_skipped_users": ranking.skipped_users,
        "rmse": err,
        "factors": args.factors,
        "test": args.test,
        "like_threshold": args.threshold,
    }
    os.makedirs(args.out, exist_ok=True)
    _atomic_write(os.path.join(args.out, "summary.json"),
                  json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"eval: mAPS={ranking.maps:.4f} rmse={err:.6g} "
          f"({ranking.counted_users} users, {ranking.skipped_users} skipped)")
    return 0


_ALIASES = {"--mode": "engine.mode", "--agents": "topology.agents",
            "--seed": "engine.seed", "--workers": "engine.workers",
            "--iterations": "engine.iterations", "--out": "output.dir"}


def _collect_overrides(extras):
    overrides = []
    for item in extras:
        if not item.startswith("--") or "=" not in item:
            raise ConfigurationError(f"unrecognized argument {item!r}")
        key, _, value = item.partition("=")
        key = _ALIASES.get(key, key[2:])
        overrides.append(f"{key}={value}")
    return overrides


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dmcsim",
        description="Decentralized matrix-completion simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "baseline"):
        p = sub.add_parser(name)
        p.add_argument("config", help="INI config file")
    p = sub.add_parser("synth")
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--items", type=int, default=240)
    p.add_argument("--rank", type=int, default=8)
    p.add_argument("--fraction", type=float, default=0.4)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", default="")
    p = sub.add_parser("eval")
    p.add_argument("--factors", required=True, help="factors/ directory")
    p.add_argument("--test", required=True, help="test ratings file")
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--out", default=".")

    args, extras = parser.parse_known_args(argv)
    try:
        if args.command in ("run", "baseline"):
            cfg = load_config(args.config, _collect_overrides(extras))
            return cmd_run(cfg) if args.command == "run" else cmd_baseline(cfg)
        if extras:
            raise ConfigurationError(f"unrecognized arguments: {extras}")
        if args.command == "synth":
            return cmd_synth(args)
        return cmd_eval(args)
    except (ConfigurationError, DataError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SingularityError, NumericsError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    except DmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
