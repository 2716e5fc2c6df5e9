"""``cavity-nls`` entry point."""
from __future__ import annotations

import argparse
import sys

from .commands import COMMANDS, Context
from .config import ConfigError, load_config
from .output import OutputDir

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE = 0, 1, 2


def build_parser():
    p = argparse.ArgumentParser(prog="cavity-nls",
                                description="Nonlinear pump-probe spectroscopy of molecular polaritons.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="TOML or JSON experiment file")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for delay scans")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config value; may be repeated")
    p.add_argument("--plot-script", action="store_true", help="also write matplotlib scripts for heatmaps")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    overrides = list(args.set)
    if args.out:
        overrides.append(f"output.dir={args.out!r}".replace("'", '"'))
    if args.plot_script:
        overrides.append("output.plot_script=true")
    try:
        cfg = load_config(args.config, overrides)
        ctx = Context(cfg, args.command, args.jobs)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = OutputDir(cfg["output"]["dir"])
    try:
        files, status = COMMANDS[args.command](ctx)
        out.write("resolved_config.json", ctx.resolved)
        for name in sorted(files):
            out.write(name, files[name])
        out.commit()
    except (ConfigError, ValueError, RuntimeError) as exc:
        out.discard()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BaseException:
        out.discard()
        raise
    if args.command == "oracle-check":
        sys.stdout.write(files["oracle_summary.txt"])
    print(f"wrote {len(files) + 1} files to {out.target}")
    return status


if __name__ == "__main__":
    sys.exit(main())
