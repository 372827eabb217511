"""Command-line entry point: ``graphroot {simulate,embed,converge,grd}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .io import DataError, fmt, write_grd
from .models import ConfigError, DCBMSpec, MMBMSpec, SBMSpec, grd_from_sbm, load_model_config, sampler_for
from .pipeline import DimsRule, cmd_converge, cmd_embed, cmd_simulate, load_experiment_config

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _dims_rule(args) -> DimsRule | None:
    if args.dims:
        try:
            p1, p2 = (int(v) for v in args.dims.split(","))
        except ValueError:
            raise ConfigError(f"--dims: expected 'p1,p2', got {args.dims!r}") from None
        return DimsRule("fixed", p1, p2)
    if args.threshold is not None or args.threshold_mode:
        return DimsRule("threshold", c=args.threshold or 1.0, mode=args.threshold_mode or "dense")
    return None


def _apply_overrides(cfg, args):
    rule = _dims_rule(args)
    if rule is not None:
        cfg.dims_rule = rule
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.rho is not None:
        from .pipeline import RhoRule

        cfg.rho_rule = RhoRule("constant", args.rho)
    if args.out:
        cfg.output_dir = Path(args.out)
    return cfg


def _print_grd(spec, vertex_measures) -> None:
    if isinstance(spec, SBMSpec):
        F = grd_from_sbm(spec, vertex_measures)
        kind = "point masses"
    else:
        vm = vertex_measures if isinstance(spec, DCBMSpec) else (vertex_measures or None)
        sampler = sampler_for(spec, vm)
        F = sampler.vertices
        kind = "segment end points" if isinstance(spec, DCBMSpec) else "polytope vertices"
    p1, p2 = F.dims
    print(f"# {kind}; dims p1={p1} p2={p2}")
    print(",".join(["weight"] + [f"x{j + 1}" for j in range(p1)] + [f"y{j + 1}" for j in range(p2)]))
    for w, x, y in zip(F.weights, F.X, F.Y):
        print(",".join([fmt(w)] + [fmt(v) for v in x] + [fmt(v) for v in y]))
    if isinstance(spec, DCBMSpec):
        print(f"# theta: {spec.theta.kind} [{spec.theta.lo}, {spec.theta.hi}]")
    if isinstance(spec, MMBMSpec):
        print(f"# dirichlet a: {json.dumps(spec.a.tolist())}")
    return F


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphroot", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, help="single seed overriding the config's list")
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--dims", help="fixed embedding dims as p1,p2")
        g.add_argument("--threshold", type=float, help="threshold constant c (default 1)")
        sp.add_argument("--threshold-mode", choices=["dense", "sparse"])
        sp.add_argument("--rho", type=float, help="sparsity scale")
        sp.add_argument("--out", help="output directory")

    for verb in ("simulate", "converge"):
        sp = sub.add_parser(verb)
        sp.add_argument("--config", required=True)
        common(sp)

    sp = sub.add_parser("embed")
    sp.add_argument("edge_list")
    sp.add_argument("--labels")
    common(sp)

    sp = sub.add_parser("grd")
    sp.add_argument("--config", required=True)
    sp.add_argument("--vertex-measures", choices=["canonical", "uniform"], default="canonical")
    sp.add_argument("--out", help="write <out>/grd.csv and its JSON sidecar")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.verb in ("simulate", "converge"):
            cfg = _apply_overrides(load_experiment_config(args.config), args)
            result = cmd_simulate(cfg) if args.verb == "simulate" else cmd_converge(cfg)
            print(json.dumps(result, indent=2))
        elif args.verb == "embed":
            rule = _dims_rule(args) or DimsRule("threshold")
            info = cmd_embed(args.edge_list, rule, Path(args.out or "out"), args.rho, args.labels)
            print(json.dumps(info, indent=2))
        else:
            spec = load_model_config(args.config)
            vm = None if args.vertex_measures == "canonical" else "uniform"
            F = _print_grd(spec, vm)
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                write_grd(F, Path(args.out) / "grd.csv", canonical=vm is None)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
