"""Command-line entry point: ``dwrom {fom,offline,online,sweep,compare}``."""

import argparse
import json
import os
import sys

import numpy as np

from ..errors import ConfigurationError, FormatError, IntegrityError, SimulationAbort
from . import pipeline
from .config import load_config

EXIT_OK = 0
EXIT_ABORT = 2
EXIT_CONFIG = 3


def build_parser():
    parser = argparse.ArgumentParser(prog="dwrom", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("fom", "run the full-order model"),
        ("offline", "collect snapshots and build POD bases and EIM spaces"),
        ("online", "run a reduced model against the full-order reference"),
        ("sweep", "reduced-model error map over an (a0, h0) grid"),
        ("compare", "error and cost versus reduced dimensions"),
    ]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int)
        p.add_argument("--tol-pod", dest="tol_pod", type=float)
        p.add_argument("--tol-eim", dest="tol_eim", type=float)
        p.add_argument("--nrb", type=int)
        p.add_argument("--neim", type=int)
    return parser


def _print(obj):
    print(json.dumps(obj, indent=2, default=pipeline._json_default))


def _offline_for(cfg):
    if cfg.artifacts:
        return pipeline.load_offline(cfg.artifacts)
    if cfg.out and os.path.exists(os.path.join(cfg.out, "offline", "manifest.json")):
        return pipeline.load_offline(os.path.join(cfg.out, "offline"))
    return pipeline.offline(cfg)


def dispatch(args):
    cli = {k: getattr(args, k) for k in ("seed", "tol_pod", "tol_eim", "nrb", "neim", "out")}
    cfg = load_config(args.config, cli=cli)
    if args.command == "fom":
        cfg.reduction = "fom"
        rep, _ = pipeline.run(cfg)
        _print(rep.to_dict())
        return EXIT_OK if rep.status == "ok" else EXIT_ABORT
    if args.command == "offline":
        res = pipeline.offline(cfg)
        _print({k: v for k, v in res.manifest.items() if k != "config"})
        return EXIT_OK
    if args.command == "online":
        if cfg.reduction == "fom":
            raise ConfigurationError("online needs a reduced model (pdrom, eimrom or phi_only)")
        off = _offline_for(cfg)
        rep, tr, fom = pipeline.online(cfg, off)
        pipeline._write_outputs(cfg, rep, tr, pipeline._online_setup(cfg), fom)
        _print(rep.to_dict())
        return EXIT_OK if rep.status == "ok" else EXIT_ABORT
    if args.command == "sweep":
        sw = cfg.sweep or {}
        if "a0" not in sw or "h0" not in sw:
            raise ConfigurationError("sweep needs a 'sweep' section with a0 and h0 lists")
        off = _offline_for(cfg)
        recs = pipeline.sweep_map(cfg, off, sw["a0"], sw["h0"], sw.get("t_end"))
        if cfg.out:
            pipeline.write_sweep_csv(os.path.join(cfg.out, "sweep.csv"), recs)
        _print(recs)
        return EXIT_OK
    if args.command == "compare":
        st = cfg.study or {}
        if "n_rb" not in st:
            raise ConfigurationError("compare needs a 'study' section with an n_rb list")
        off = _offline_for(cfg)
        rows = pipeline.compare(cfg, off, st["n_rb"], st.get("n_eim"),
                                tuple(st.get("methods", ("pdrom", "eimrom"))))
        if cfg.out:
            pipeline.write_study_csv(os.path.join(cfg.out, "study.csv"), rows)
        _print(rows)
        return EXIT_OK
    raise ConfigurationError(f"unknown command {args.command}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            return dispatch(args)
    except (ConfigurationError, FormatError, IntegrityError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationAbort as exc:
        print(f"simulation aborted ({exc.reason}): {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
