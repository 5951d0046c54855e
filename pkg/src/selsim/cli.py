"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 instability guard tripped, 4 I/O or input data error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import runner
from .config import ConfigError, load_config
from .regularity import DEFAULT_EPS0, DEFAULT_EPS1, DEFAULT_M
from .solver import InstabilityError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INSTABILITY = 3
EXIT_IO = 4

log = logging.getLogger("selsim")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="selsim", description="Stochastic nematic flow simulator and diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a simulation and write snapshots plus energy.csv")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (defaults to output.dir from the config)")

    d = sub.add_parser("diagnose", help="energy residuals, suitability margins and bound ingredients")
    d.add_argument("--in", dest="in_dir", required=True)
    d.add_argument("--bumps", help="TOML file with [[bump]] tables (center, t0, rho, tau)")
    d.add_argument("--out", required=True)
    d.add_argument("--ref", help="companion run at twice the time step, for the refinement ratio")
    d.add_argument("--tol", type=float, default=1e-2)

    c = sub.add_parser("scan", help="epsilon-regularity scan and covering report")
    c.add_argument("--in", dest="in_dir", required=True)
    c.add_argument("--eps0", type=float, default=DEFAULT_EPS0)
    c.add_argument("--eps1", type=float, default=DEFAULT_EPS1)
    c.add_argument("--M", type=float, default=DEFAULT_M)
    c.add_argument("--r0", type=float, help="cylinder radius (default: largest up to 0.5 that fits)")
    c.add_argument("--centers", type=int, default=4, help="lattice centres per axis")
    c.add_argument("--all-times", action="store_true", help="scan every admissible snapshot time")
    c.add_argument("--out", required=True)

    n = sub.add_parser("noise-stats", help="Monte-Carlo statistics of the noise and the Stokes field")
    n.add_argument("--config", required=True)
    n.add_argument("--out", required=True)
    n.add_argument("--paths", type=int, default=200)
    n.add_argument("--samples", type=int, default=10000)
    return p


def _run(args) -> int:
    if args.command == "simulate":
        cfg = load_config(args.config)
        res = runner.simulate(cfg, args.out)
        log.info("wrote %d snapshots to %s", len(res.snapshots), res.out_dir)
        if res.mp_violations:
            log.warning("maximum principle violated at %d snapshots (max|d| = %.6f)",
                        res.mp_violations, res.max_director)
    elif args.command == "diagnose":
        bumps = runner.load_bumps(args.bumps) if args.bumps else []
        runner.diagnose(args.in_dir, bumps, args.out, args.ref, args.tol)
    elif args.command == "scan":
        for name in ("eps0", "eps1", "M"):
            if not getattr(args, name) > 0:
                raise ConfigError(f"option '--{name}' must be > 0")
        res = runner.scan(args.in_dir, args.out, args.eps0, args.eps1, args.M, args.r0, args.centers,
                          args.all_times)
        unresolved = sum(r.classification != "regular-certified" for r in res.classifications)
        log.info("%d of %d points unresolved; cover uses %d cylinders", unresolved,
                 len(res.classifications), len(res.cover.selected))
    else:
        cfg = load_config(args.config)
        runner.noise_stats(cfg, args.out, paths=args.paths, samples=args.samples)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"instability: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except (OSError, runner.RunInputError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
