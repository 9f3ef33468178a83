"""
Command-line front end

    python -m gfa synth      CONFIG -o OUT.csv [--seed S]
    python -m gfa decompose  IN.csv -o DIR [--grid ..] [--gamma G] [--tau T] [--top M]
    python -m gfa stationary IN.csv -o DIR [--max-lines K] [--threshold X]
    python -m gfa flock      IN.csv -o DIR [--grid ..] [--block NS,NT]

Exit codes: 0 success, 2 config/parse error, 3 numerical failure,
4 precondition violation.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from gfa import __version__
from gfa.analysis.field import extract_flock
from gfa.analysis.pipeline import FactorAnalyzer
from gfa.analysis.wold import (
    detect_lines,
    line_model_report,
    sample_autocov,
    spectral_density_diagnostic,
    wold_split,
)
from gfa.config import settings
from gfa.errors import GFAError, PreconditionError
from gfa.io.reports import run_report, write_json
from gfa.io.tables import read_matrix, write_matrix
from gfa.synthesis.scenario import parse_scenario, run_scenario
from gfa.types import SeparableField

logger = logging.getLogger("gfa")

EXIT_OK = 0
EXIT_PRECONDITION = 4


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _pair(text: str):
    values = _int_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected NS,NT, got '{text}'")
    return tuple(values)


def _flags(args: argparse.Namespace) -> Dict:
    return {k: v for k, v in vars(args).items() if not callable(v)}


def _banner(title: str):
    print("=" * 70)
    print(title)
    print("=" * 70)


def cmd_synth(args: argparse.Namespace) -> int:
    """Generate a scenario and write the data CSV plus a ground-truth sidecar"""
    cfg = parse_scenario(args.config)
    result = run_scenario(cfg, seed=args.seed)
    output = Path(args.output)
    write_matrix(output, result.data, header=args.header)
    truth_path = output.with_suffix(".truth.json")
    report = run_report(
        "synth", _flags(args), input_file=args.config, outputs={"data": output},
        result={"kind": result.kind, "scenario": cfg.model_dump(mode="json"), "truth": result.truth},
    )
    write_json(truth_path, report)
    print(f"Wrote {result.data.shape[0]} x {result.data.shape[1]} {result.kind} data to {output}")
    print(f"Ground truth: {truth_path}")
    return EXIT_OK


def cmd_decompose(args: argparse.Namespace) -> int:
    """Decompose a replicate ensemble"""
    _banner(f"GFA decomposition: {args.input}")
    analyzer = FactorAnalyzer(grid=args.grid, m=args.top, gamma=args.gamma, tau=args.tau)
    analyzer.load(args.input, header=args.header)
    decomposition = analyzer.fit()
    outputs = analyzer.save(args.output)
    outputs["report"] = Path(args.output) / "report.json"
    report = run_report("decompose", _flags(args), input_file=args.input, outputs=outputs,
                        result=analyzer.summary())
    write_json(outputs["report"], report)

    growth = decomposition.growth_report
    print(f"Detected q = {decomposition.q} ({growth.verdict}); gamma={growth.gamma}, tau={growth.tau}")
    for entry in growth.entries:
        print(f"  lambda_{entry.index}: mean ratio {entry.mean_ratio:.3f} -> {entry.growth_class.value}")
    if decomposition.sli_report is not None:
        print(f"Strong linear independence: {decomposition.sli_report.verdict}")
    print(f"Outputs written to {args.output}")
    return EXIT_OK


def _single_series(data: np.ndarray) -> np.ndarray:
    if data.shape[0] == 1:
        return data[0]
    if data.shape[1] == 1:
        return data[:, 0]
    raise PreconditionError(f"expected a single series (one row or one column), got {data.shape}")


def cmd_stationary(args: argparse.Namespace) -> int:
    """Detect lines in one series and split it into line part and remainder"""
    _banner(f"Stationary analysis: {args.input}")
    data = read_matrix(args.input, header=args.header)
    series = _single_series(data)
    lines = detect_lines(series, max_lines=args.max_lines, threshold=args.threshold)
    pd_part, pnd_part, model = wold_split(series, lines, threshold=args.threshold)

    out_dir = Path(args.output)
    shape = data.shape
    outputs = {
        "pd": write_matrix(out_dir / "pd.csv", pd_part.reshape(shape)),
        "pnd": write_matrix(out_dir / "pnd.csv", pnd_part.reshape(shape)),
    }
    lines_report = line_model_report(
        model,
        threshold=args.threshold if args.threshold is not None else settings.LINE_THRESHOLD,
        max_lines=args.max_lines,
        n=series.size,
        energy_pd=float(pd_part @ pd_part),
        energy_pnd=float(pnd_part @ pnd_part),
    )
    outputs["lines"] = write_json(out_dir / "lines.json", lines_report)

    result = {"nu": model.nu, "lines": lines_report}
    if np.any(pnd_part != 0) and series.size > 2:
        estimate = sample_autocov(pnd_part, L=min(series.size - 1, 4 * settings.SPECTRAL_WINDOW))
        result["pnd_density"] = spectral_density_diagnostic(estimate)
    outputs["report"] = out_dir / "report.json"
    write_json(outputs["report"], run_report("stationary", _flags(args), input_file=args.input,
                                             outputs=outputs, result=result))

    print(f"Detected {model.nu} line(s): " + ", ".join(f"{om:.6f}" for om in model.frequencies))
    print(f"Outputs written to {out_dir}")
    return EXIT_OK


def cmd_flock(args: argparse.Namespace) -> int:
    """Extract the flocking component of a separable field"""
    _banner(f"Flock extraction: {args.input}")
    field = SeparableField(read_matrix(args.input, header=args.header))
    result = extract_flock(field, grid=args.grid, m=args.top, gamma=args.gamma, tau=args.tau, block=args.block)

    out_dir = Path(args.output)
    outputs = {
        "flock": write_matrix(out_dir / "flock.csv", result.flock),
        "residual": write_matrix(out_dir / "residual.csv", result.residual),
        "loadings": write_matrix(out_dir / "loadings.csv", result.loadings),
        "factors": write_matrix(out_dir / "factors.csv", result.factors),
    }
    report = result.report.model_copy(update={"loadings_file": str(outputs["loadings"]),
                                              "factors_file": str(outputs["factors"])})
    outputs["report"] = out_dir / "report.json"
    write_json(outputs["report"], run_report("flock", _flags(args), input_file=args.input,
                                             outputs=outputs, result=report.model_dump(mode="json")))

    print(f"Verdict {report.verdict} (q = {report.q}); separability defect {report.defect}")
    print(f"Outputs written to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gfa", description="Generalized factor analysis toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic scenario")
    synth.add_argument("config", help="scenario file (key = value lines)")
    synth.add_argument("-o", "--output", required=True, help="output CSV")
    synth.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    synth.add_argument("--header", action="store_true", help="write a header row")
    synth.set_defaults(handler=cmd_synth)

    def detection_flags(p):
        p.add_argument("--grid", type=_int_list, default=None, help="truncation sizes, e.g. 100,200,400")
        p.add_argument("--gamma", type=float, default=None, help=f"growth threshold (default {settings.GAMMA})")
        p.add_argument("--tau", type=float, default=None, help=f"divergence cap (default {settings.TAU})")
        p.add_argument("--top", type=int, default=None, help=f"eigenvalues tracked (default {settings.TOP_M})")

    decompose = sub.add_parser("decompose", help="decompose a replicate ensemble")
    decompose.add_argument("input", help="N x M CSV")
    decompose.add_argument("-o", "--output", required=True, help="output directory")
    decompose.add_argument("--header", action="store_true", help="input has a header row")
    detection_flags(decompose)
    decompose.set_defaults(handler=cmd_decompose)

    stationary = sub.add_parser("stationary", help="line detection and split of one series")
    stationary.add_argument("input", help="CSV holding one row or one column")
    stationary.add_argument("-o", "--output", required=True, help="output directory")
    stationary.add_argument("--header", action="store_true", help="input has a header row")
    stationary.add_argument("--max-lines", type=int, default=None, help="maximum number of lines")
    stationary.add_argument("--threshold", type=float, default=None,
                            help=f"peak threshold x median (default {settings.LINE_THRESHOLD})")
    stationary.set_defaults(handler=cmd_stationary)

    flock = sub.add_parser("flock", help="flock extraction on a separable field")
    flock.add_argument("input", help="N x T field CSV")
    flock.add_argument("-o", "--output", required=True, help="output directory")
    flock.add_argument("--header", action="store_true", help="input has a header row")
    flock.add_argument("--block", type=_pair, default=None, help="separability sub-grid NS,NT")
    detection_flags(flock)
    flock.set_defaults(handler=cmd_flock)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except GFAError as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"ERROR: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
