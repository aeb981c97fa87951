"""Command-line front end: ``nmchannel {sweep,tomo,bell,scan}``.

Exit status: 0 success, 2 usage or configuration error, 3 numerical
non-convergence.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiment, photon
from .config import ExperimentConfig
from .errors import ChannelError, NumericalError
from .qstate import ChshSettings

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("nmchannel")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--config", metavar="PATH", default=S, help="JSON experiment configuration")
    p.add_argument("--out", metavar="PATH", default=S, help="write primary output here instead of stdout")
    p.add_argument("--seed", type=_u64, default=S, help="override noise.seed")
    p.add_argument("--grating", choices=("on", "off"), default=S, help="override grating.enabled")
    p.add_argument("-v", "--verbose", action="store_true", default=S)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="nmchannel", parents=[common],
                                     description="Programmable dephasing channel for polarization-entangled photons.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", parents=[common], help="visibility curve V(a) as CSV")
    p.add_argument("--a-min", type=float, default=0.0)
    p.add_argument("--a-max", type=float, default=0.6)
    p.add_argument("--steps", type=int, default=121)
    p.add_argument("--both", action="store_true", help="emit curves with and without the grating")

    p = sub.add_parser("tomo", parents=[common], help="simulate tomography and reconstruct the state")
    p.add_argument("--a", type=float, required=True, help="SLM slope in rad/pixel")
    p.add_argument("--counts-in", metavar="PATH", help="reconstruct from a count CSV instead of simulating")
    p.add_argument("--counts-out", metavar="PATH", help="also write the counts as CSV")

    p = sub.add_parser("bell", parents=[common], help="CHSH parameter, analytic and simulated")
    p.add_argument("--a", type=float, default=None, help="SLM slope in rad/pixel")
    p.add_argument("--eps", type=float, default=None, help="effective decoherence factor (overrides --a)")
    p.add_argument("--settings", type=float, nargs=4, metavar=("B1", "B1P", "B2", "B2P"),
                   help="polarizer angles in degrees")
    p.add_argument("--target-sigma", type=float, default=experiment.BELL_TARGET_SIGMA)
    p.add_argument("--pairs", type=float, default=None, help="pairs per analyzer setting")

    p = sub.add_parser("scan", parents=[common], help="coincidence scan and factorization chi-square")
    p.add_argument("--cells", type=int, default=5, help="odd number of slit positions per axis")
    p.add_argument("--spacing-mrad", type=float, default=2.0)
    p.add_argument("--pairs", type=float, default=None, help="expected count at the peak cell")
    p.add_argument("--report", metavar="PATH", help="write the JSON test report here (default: stderr)")
    return parser


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    out = getattr(args, "out", None)
    seed = getattr(args, "seed", None)
    grating = getattr(args, "grating", None)
    grating = None if grating is None else grating == "on"
    try:
        cfg_path = getattr(args, "config", None)
        cfg = ExperimentConfig.load(cfg_path) if cfg_path else ExperimentConfig.default()

        if args.command == "sweep":
            if args.both:
                curves = {"on": experiment.sweep(cfg, args.a_min, args.a_max, args.steps, True),
                          "off": experiment.sweep(cfg, args.a_min, args.a_max, args.steps, False)}
            else:
                curves = {"": experiment.sweep(cfg, args.a_min, args.a_max, args.steps, grating)}
            bad = [c for c in curves.values() if not c.converged.all()]
            _emit(experiment.sweep_csv(curves), out)
            if bad:
                log.error("quadrature residual above tolerance at %d points",
                          sum(int((~c.converged).sum()) for c in bad))
                return EXIT_NUMERICAL
            return EXIT_OK

        if args.command == "tomo":
            records = None
            if args.counts_in:
                noise = cfg.noise(seed)
                records = photon.counts_from_csv(Path(args.counts_in).read_text(),
                                                 noise.pairs_per_setting, noise.background_per_setting)
            report = experiment.tomo(cfg, args.a, seed, grating, records)
            if args.counts_out:
                recs = [photon.CountRecord(c["ket1"], c["ket2"], c["count"], c["expected"],
                                           report["pairs_per_setting"], index=c["setting_index"])
                        for c in report["counts"]]
                Path(args.counts_out).write_text(photon.counts_to_csv(recs))
            _emit(_dump(report), out)
            if not report["diagnostics"]["converged"]:
                log.error("maximum-likelihood reconstruction did not converge")
                return EXIT_NUMERICAL
            return EXIT_OK

        if args.command == "bell":
            settings = ChshSettings(*args.settings) if args.settings else ChshSettings()
            report = experiment.bell(cfg, args.a, settings, seed, grating, args.eps,
                                     args.target_sigma, args.pairs)
            _emit(_dump(report), out)
            return EXIT_OK

        if args.command == "scan":
            sc, report = experiment.scan(cfg, args.cells, args.spacing_mrad, seed, args.pairs)
            _emit(photon.scan_to_csv(sc), out)
            if args.report:
                Path(args.report).write_text(_dump(report))
            else:
                sys.stderr.write(_dump(report))
            return EXIT_OK
    except NumericalError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL
    except (ChannelError, OSError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"nmchannel: error: {exc}\n")
        return EXIT_USAGE
    return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
