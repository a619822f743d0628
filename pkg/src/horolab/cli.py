"""Command line entry point for the experiment suites."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .experiments import (EXIT_CONFIG, ConfigError, RunManifest, cmd_all,
                          cmd_check_identities, cmd_equidist, cmd_mixing,
                          cmd_spectrum, cmd_twisted, load_config)

_COMMANDS = {
    "check-identities": cmd_check_identities,
    "equidist": cmd_equidist,
    "mixing": cmd_mixing,
    "twisted": cmd_twisted,
    "spectrum": cmd_spectrum,
    "all": cmd_all,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="horolab",
        description="Numerical experiments on smooth time-changes of the "
                    "horocycle flow (Bolza surface).")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=0,
                        help="worker hint (vectorised kernels; recorded only)")
    parser.add_argument("--dry-run", action="store_true",
                        help="print planned stages and exit")
    parser.add_argument("--seed-override", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    if args.seed_override is not None:
        config.values["seed"] = int(args.seed_override)
        config = type(config)(values=config.values,
                              text=config.text + "\nseed = %d  # override\n"
                              % args.seed_override)
    if args.threads:
        config.values["threads"] = args.threads

    stages = ([n for n, _ in (("identities", None), ("equidist", None),
                              ("mixing", None), ("twisted", None),
                              ("spectrum", None))]
              if args.command == "all" else [args.command])
    if args.dry_run:
        print("config %s (sha256 %s...)" % (args.config, config.hash()[:12]))
        for s in stages:
            print("would run: %s -> %s/" % (s, args.out))
        return 0

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        print("output directory error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG

    manifest = RunManifest(config_hash=config.hash(), code_version=__version__)
    try:
        code = _COMMANDS[args.command](config, out_dir, manifest)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    manifest.write(out_dir / "manifest.json")
    for name, verdict in manifest.verdicts.items():
        print("%-12s %s" % (name, "pass" if verdict is True else verdict))
    return code


if __name__ == "__main__":
    sys.exit(main())
