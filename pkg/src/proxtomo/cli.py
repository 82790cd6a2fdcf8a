"""Command-line driver.

Subcommands: simulate (phantom + counts + sinogram files), reconstruct (one
algorithm on a simulated dataset), benchmark (objective-decay comparison
against a long reference run), study (repeated phantom experiment with the
paired figure-of-merit table). Each command writes delimited output plus
rendered figures into --out.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import bench, report, solvers
from .arrayio import write_array
from .config import load_config
from .errors import ConfigError, NumericalError
from .phantom import GRAY_WINDOW

log = logging.getLogger("proxtomo")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxtomo",
        description="Tomographic reconstruction benchmarks for accelerated "
                    "proximal gradient methods.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, brief in (
        ("simulate", "generate a phantom, photon counts and sinogram"),
        ("reconstruct", "reconstruct a simulated dataset with one algorithm"),
        ("benchmark", "compare objective decay across solver configurations"),
        ("study", "repeated phantom study with paired IROI comparison"),
    ):
        cmd = sub.add_parser(name, help=brief)
        cmd.add_argument("--config", help="INI config file (defaults apply "
                                          "when omitted)")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--seed", type=int, help="override the base seed")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker threads for embarrassingly parallel "
                              "stages")
        cmd.add_argument("--scale", choices=("desk", "paper"), default="desk",
                         help="problem size preset (desk fits CI; paper is "
                              "the full-size acquisition)")
        if name == "reconstruct":
            cmd.add_argument("--data", required=True,
                             help="directory written by `proxtomo simulate`")
    return parser


def _load(args):
    cfg = load_config(args.config, args.scale)
    if args.seed is not None:
        cfg = replace(cfg, counts=replace(cfg.counts, seed=args.seed),
                      study=replace(cfg.study, base_seed=args.seed))
    if args.threads and args.threads > 1:
        try:
            import numba

            numba.set_num_threads(args.threads)
        except ValueError:
            pass
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    ds = bench.simulate_dataset(cfg)
    files = bench.write_dataset(ds, args.out)
    log.info("wrote %s to %s", ", ".join(files), args.out)
    return 0


def _cmd_reconstruct(args) -> int:
    cfg = _load(args)
    ds = bench.read_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    section = cfg.solver
    if section.algorithm == "supart":
        res = bench.reconstruct_supart(ds, section)
        with open(out / "supart_trace.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "residual_sq", "tv", "l"])
            for k, rsq, tv_after, l in res.records:
                writer.writerow([k, f"{rsq:.17g}", f"{tv_after:.17g}", l])
        report.save_residual_figure(out / "trace.png", res.records,
                                    title=f"supart, eps={res.epsilon:.4g}")
        log.info("supart stopped after %d sweeps, residual^2 %.6g",
                 res.sweeps, res.residual_sq)
    else:
        if (section.algorithm == "fpgm" and math.isinf(section.K)
                and math.isinf(section.eta_bar)):
            log.warning("K=inf with unbounded overrelaxation has no "
                        "convergence guarantee; expect oscillations")
        res = bench.reconstruct_solver(ds, section)
        solvers.write_trace_csv(out / "trace.csv", res.records)
        report.save_trace_figure(out / "trace.png", res.records,
                                 title=section.algorithm)
        log.info("%s finished %d iterations, objective %.8g",
                 section.algorithm, len(res.records), res.psi_final)
    g = ds.geometry
    write_array(out / "recon.dat", res.image, kind="image", views=g.n_views,
                rays=g.n_rays, grid=g.n_side, extent=repr(g.extent),
                algorithm=section.algorithm)
    report.save_image_png(out / "recon.png", res.image)
    report.save_image_png(out / "recon_window.png", res.image,
                          window=GRAY_WINDOW)
    return 0


def _cmd_benchmark(args) -> int:
    cfg = _load(args)
    result = bench.run_benchmark(cfg, args.out)
    for leg in result.legs:
        marker = "" if leg.convergent else "  [no convergence guarantee]"
        log.info("%-24s final gap %.3e%s", leg.name, leg.gaps[-1], marker)
    return 0


def _cmd_study(args) -> int:
    cfg = _load(args)
    result = bench.run_study(cfg, args.out, threads=args.threads)
    for name, mean, p in result.summary:
        log.info("%-18s mean IROI %.4f  p=%s", name, mean,
                 "n/a" if math.isnan(p) else f"{p:.3g}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "reconstruct": _cmd_reconstruct,
    "benchmark": _cmd_benchmark,
    "study": _cmd_study,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
