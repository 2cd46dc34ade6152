"""Command-line entry point: ``ttq {run,report,export-curves,gen-dots,diagnose}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, recipe_names, resolve

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

RUN_HELP = """\
options:
  --config PATH|RECIPE   config file, or the name of a bundled recipe
  --seed N               shorthand for the seed key
  --out DIR              run directory
  --threads N            BLAS threads (falls back to TTQ_THREADS)
  --KEY VALUE            override any config key; the last assignment wins

bundled recipes: {recipes}
"""


def split_run_args(tokens: list[str]) -> tuple[str | None, str | None, list[tuple[str, str]]]:
    """Pull ``--config`` and ``--threads`` out of ``tokens``; the rest are key overrides in order."""
    config = threads = None
    overrides: list[tuple[str, str]] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or tok == "--":
            raise ConfigError(f"unexpected argument {tok!r}")
        if "=" in tok:
            key, value = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"{tok} needs a value")
            key, value = tok[2:], tokens[i + 1]
            i += 2
        key = key.replace("-", "_")
        if key == "config":
            config = value
        elif key == "threads":
            threads = value
        else:
            overrides.append((key, value))
    return config, threads, overrides


def _set_threads(value: str | None) -> None:
    value = value or os.environ.get("TTQ_THREADS")
    if not value:
        return
    if not value.isdigit() or int(value) < 1:
        raise ConfigError(f"--threads must be a positive integer, got {value!r}")
    # only effective when numerical libraries have not been loaded yet
    for var in THREAD_VARS:
        os.environ[var] = value


def _run(tokens: list[str], force: list[tuple[str, str]], append_step: str | None = None) -> int:
    config, threads, overrides = split_run_args(tokens)
    _set_threads(threads)
    cfg = resolve(config, overrides + force)
    if append_step and append_step not in cfg.pipeline:
        cfg = resolve(config, overrides + force + [("pipeline", ",".join(cfg.pipeline + (append_step,)))])

    from .runner import Run

    Run(cfg).execute()
    print(f"wrote {cfg.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttq", description="TTN + VQC experiment runner")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress per epoch")
    sub = parser.add_subparsers(dest="command", required=True)
    epilog = RUN_HELP.format(recipes=", ".join(recipe_names()))
    fmt = argparse.RawDescriptionHelpFormatter
    for name, text in (
        ("run", "execute the pipeline named in a config"),
        ("diagnose", "run a config with the diagnose step added"),
        ("gen-dots", "write a synthetic charge-stability dataset (dots.ttqd)"),
    ):
        sub.add_parser(name, help=text, description=text, epilog=epilog, formatter_class=fmt)
    p = sub.add_parser("report", help="compare run directories")
    p.add_argument("run_dirs", nargs="*")
    p.add_argument("--out", help="also write the table as CSV here")
    p = sub.add_parser("export-curves", help="long-format learning curves of a run")
    p.add_argument("run_dir")
    p.add_argument("--stage", help="stage to export (default: the last one with metrics)")
    p.add_argument("--out", help="output CSV (default: stdout)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    if rest and args.command in ("report", "export-curves"):
        parser.error(f"unrecognized arguments: {' '.join(rest)}")
    # run-style commands take free-form --key value overrides
    args.args = rest
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            return _run(args.args, [])
        if args.command == "diagnose":
            return _run(args.args, [], append_step="diagnose")
        if args.command == "gen-dots":
            return _run(args.args, [("pipeline", "gen_dots")])
        from .report import export_curves, report

        if args.command == "report":
            text = report(args.run_dirs, args.out)
            sys.stdout.write(text)
            return 0
        out = export_curves(args.run_dir, args.stage)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                fh.write(out)
        else:
            sys.stdout.write(out)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
