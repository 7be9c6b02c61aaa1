"""Command-line entry point.

``mfbl run --config exp.toml`` dispatches on the config's experiment kind;
the per-kind subcommands override the kind for convenience.  Exit codes:
0 all assertions passed, 1 assertion failures, 2 configuration or runtime
errors.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, EXPERIMENT_KINDS, load_config, validate
from .harness import run, sweep


def _add_common(parser, config_required=True):
    parser.add_argument("--config", required=config_required,
                        help="TOML experiment config")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel workers for sweeps")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mfbl",
        description="mean-field Bose gas laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment in a config file")
    _add_common(p_run)
    p_sweep = sub.add_parser("sweep", help="run a ladder along one config axis")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True,
                         help="dotted config path, e.g. space.modes")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values for the axis")
    for kind in EXPERIMENT_KINDS:
        p_kind = sub.add_parser(kind, help=f"run a {kind} experiment")
        _add_common(p_kind, config_required=(kind != "definetti-check"))
        if kind == "definetti-check":
            p_kind.add_argument("--dim", type=int, default=None)
            p_kind.add_argument("--n", type=int, default=None,
                                help="particle number")
            p_kind.add_argument("--k", type=int, default=None,
                                help="reduction order")
            p_kind.add_argument("--state", default=None,
                                help="product | mixed | random")
            p_kind.add_argument("--samples", type=int, default=None)
    return parser


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.config is None and args.command == "definetti-check":
            config = validate({"kind": "definetti-check"})
        else:
            config = load_config(args.config)
        if args.command == "definetti-check":
            overrides = {"dim": args.dim, "n_particles": args.n, "k": args.k,
                         "state": args.state, "samples": args.samples}
            for key, value in overrides.items():
                if value is not None:
                    config["definetti"][key] = value
            config = validate(config)
        if args.command not in ("run", "sweep"):
            if config["kind"] != args.command:
                raise ConfigError(
                    f"config kind {config['kind']!r} does not match "
                    f"subcommand {args.command!r}")
        if args.command == "sweep":
            values = [_parse_value(v) for v in args.values.split(",") if v]
            manifests = sweep(config, args.axis, values,
                              out_root=args.out, threads=args.threads)
            failed = [m for m in manifests if not m.passed]
            for m in manifests:
                status = "PASS" if m.passed else "FAIL"
                print(f"[{status}] {m.kind} seed={m.seed} {m.error}".rstrip())
            return 1 if failed else 0
        manifest = run(config, out_dir=args.out, seed=args.seed)
        for check in manifest.assertions:
            status = "PASS" if check["passed"] else "FAIL"
            print(f"[{status}] {check['name']}")
        if manifest.error:
            print(f"error: {manifest.error}", file=sys.stderr)
            return 2
        return 0 if manifest.passed else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
