"""Command-line entry point: ``mubtomo <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 certification or physicality
failure, 3 I/O error.  Options may also come from a JSON file given with
``--config``; command-line flags take precedence over the file.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .design import (PLAN_KINDS, build_plan, completeness_check, operator_basis,
                     plan_size_mubs, plan_size_qst)
from .errors import (CompletenessError, DimensionMismatchError, PhysicalityError,
                     UnsupportedDimensionError)
from .mubs import SUPPORTED_DIMENSIONS, build_mub_set, verify_unbiasedness
from .reconstruct import FitConfig, bootstrap, fit
from .render import GridSpec, render_mub_mode, save_mode_image
from .simulate import (Dataset, SourceModel, normalize_probabilities, quantum_contrast,
                       simulate_counts, target_state)

EXIT_OK, EXIT_USAGE, EXIT_CERT, EXIT_IO = 0, 1, 2, 3

DEFAULTS = {
    "plan": "complete",
    "width": math.inf,
    "pair_rate": 2.0e6,
    "efficiency_a": 0.1,
    "efficiency_b": 0.1,
    "background_a": 500.0,
    "background_b": 500.0,
    "gate_time": 10e-9,
    "integration": 1.0,
    "white_noise": 0.0,
    "seed": 0,
    "restarts": 3,
    "maxiter": 3000,
    "bootstrap": 0,
    "strict_scale": False,
    "size": 129,
    "extent": 3.0,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dim(text: str) -> int:
    d = int(text)
    if d not in SUPPORTED_DIMENSIONS:
        raise argparse.ArgumentTypeError(f"dimension must be one of {SUPPORTED_DIMENSIONS}")
    return d


def _width(text: str) -> float:
    w = float(text)
    if not w > 0:
        raise argparse.ArgumentTypeError("Schmidt width must be positive (use 'inf' for flat)")
    return w


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file of option defaults")
    p.add_argument("--seed", type=int, help="top-level random seed")


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=_width, help="Schmidt width w of the OAM spectrum")
    p.add_argument("--pair-rate", type=float, help="pair generation rate [1/s]")
    p.add_argument("--efficiency-a", type=float)
    p.add_argument("--efficiency-b", type=float)
    p.add_argument("--background-a", type=float, help="background singles rate, arm A [1/s]")
    p.add_argument("--background-b", type=float)
    p.add_argument("--gate-time", type=float, help="coincidence window [s]")
    p.add_argument("--integration", type=float, help="integration time per setting [s]")
    p.add_argument("--white-noise", type=float, help="white-noise admixture of the source state")


def _add_fit(p: argparse.ArgumentParser) -> None:
    p.add_argument("--restarts", type=int)
    p.add_argument("--maxiter", type=int)
    p.add_argument("--bootstrap", type=int, help="number of Poisson replicas (0 to skip)")
    p.add_argument("--strict-scale", action="store_const", const=True,
                   help="fit with the model trace fixed to the normalized probabilities")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mubtomo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mub", help="write a MUB set and its unbiasedness certificate")
    p.add_argument("--dim", type=_dim, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("plan", help="write a measurement plan and its completeness report")
    p.add_argument("--dim", type=_dim, required=True)
    p.add_argument("--plan", choices=PLAN_KINDS)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("simulate", help="simulate coincidence counts for a plan")
    p.add_argument("--dim", type=_dim, required=True)
    p.add_argument("--plan", choices=PLAN_KINDS)
    p.add_argument("--out", type=Path, required=True)
    _add_source(p)
    _add_common(p)

    p = sub.add_parser("reconstruct", help="fit a density matrix to a dataset")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--dim", type=_dim, help="expected dimension (checked against the dataset)")
    p.add_argument("--plan", choices=PLAN_KINDS, help="expected plan kind")
    p.add_argument("--width", type=_width,
                   help="Schmidt width of the fidelity reference (default inf: maximally entangled)")
    _add_fit(p)
    _add_common(p)

    p = sub.add_parser("compare", help="measurement-count table, with S and F for supplied datasets")
    p.add_argument("--dim", type=_dim, required=True)
    p.add_argument("--in", dest="inputs", type=Path, action="append", default=[],
                   help="dataset to reconstruct (repeatable)")
    p.add_argument("--out", type=Path, required=True)
    _add_fit(p)
    _add_common(p)

    p = sub.add_parser("render", help="write intensity/phase images of MUB modes")
    p.add_argument("--dim", type=_dim, required=True)
    p.add_argument("--m", type=int, help="basis index (default: all)")
    p.add_argument("--i", type=int, help="state index (default: all)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--size", type=int, help="pixels per side")
    p.add_argument("--extent", type=float, help="half-width in beam waists")
    p.add_argument("--gray-phase", action="store_true", help="grayscale phase instead of colour")
    _add_common(p)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults < config file < flags."""
    opts = dict(DEFAULTS)
    config = getattr(args, "config", None)
    if config is not None:
        loaded = json.loads(Path(config).read_text())
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in loaded.items()})
    opts.update({k: v for k, v in vars(args).items() if v is not None})
    if isinstance(opts.get("width"), str):
        opts["width"] = float(opts["width"])
    return opts


def _fit_config(o: dict) -> FitConfig:
    if o["restarts"] < 1:
        raise UsageError("--restarts must be at least 1")
    return FitConfig(restarts=int(o["restarts"]), maxiter=int(o["maxiter"]),
                     seed=int(o["seed"]), free_scale=not o["strict_scale"])


def cmd_mub(o: dict) -> int:
    mub_set = build_mub_set(o["dim"])
    report = verify_unbiasedness(mub_set, 1e-12)
    out = Path(o["out"])
    out.write_text(mub_set.to_json() + "\n")
    out.with_name(out.name + ".cert.json").write_text(json.dumps({
        "dim": mub_set.dim,
        "bases": len(mub_set.bases),
        "passed": report.passed,
        "worst_deviation": report.worst_deviation,
        "tol": report.tol,
    }, indent=1) + "\n")
    print(f"d={mub_set.dim}: {len(mub_set.bases)} bases, {report}")
    return EXIT_OK if report.passed else EXIT_CERT


def cmd_plan(o: dict) -> int:
    plan = build_plan(build_mub_set(o["dim"]), o["plan"])
    report = completeness_check(plan, operator_basis(plan.hilbert_dim))
    out = Path(o["out"])
    out.write_text(plan.to_text())
    out.with_name(out.name + ".completeness.json").write_text(report.to_json() + "\n")
    print(f"{plan.kind} plan d={plan.dim}: {len(plan)} projectors, "
          f"complete={report.complete}, condition number {report.condition_number:.4g}")
    return EXIT_OK if report.complete else EXIT_CERT


def cmd_simulate(o: dict) -> int:
    plan = build_plan(build_mub_set(o["dim"]), o["plan"])
    try:
        model = SourceModel(
            o["dim"], schmidt_width=float(o["width"]), pair_rate=o["pair_rate"],
            arm_efficiency_a=o["efficiency_a"], arm_efficiency_b=o["efficiency_b"],
            background_a=o["background_a"], background_b=o["background_b"],
            gate_time=o["gate_time"], integration_time=o["integration"],
            white_noise=o["white_noise"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = simulate_counts(plan, model, seed=int(o["seed"]))
    Path(o["out"]).write_text(data.to_text())
    contrasts = [quantum_contrast(r) for r in data.records if r.U > 0]
    qc = f"{np.mean(contrasts):.4g}" if contrasts else "undefined"
    print(f"{plan.kind} d={plan.dim}: {len(data)} records, mean quantum contrast {qc}")
    return EXIT_OK


def _load_dataset(path: Path) -> Dataset:
    try:
        text = Path(path).read_text()
    except OSError:
        raise
    try:
        return Dataset.from_text(text)
    except (ValueError, KeyError, IndexError) as exc:
        raise UsageError(f"cannot parse dataset {path}: {exc}") from None


def _reconstruct(data: Dataset, o: dict, reference):
    plan = build_plan(build_mub_set(data.dim), data.kind)
    data.check_alignment(plan)
    config = _fit_config(o)
    p = normalize_probabilities(data)
    result = fit(p, plan, config, reference)
    if o["bootstrap"]:
        result.sigma_s, result.sigma_f = bootstrap(data, plan, int(o["bootstrap"]), config,
                                                   reference)
    return plan, result


def cmd_reconstruct(o: dict) -> int:
    data = _load_dataset(o["input"])
    if "dim" in o and o["dim"] != data.dim:
        raise DimensionMismatchError(f"dataset has d={data.dim}, --dim says {o['dim']}")
    if "plan" in o and o.get("plan_given") and o["plan"] != data.kind:
        raise DimensionMismatchError(f"dataset plan is {data.kind}, --plan says {o['plan']}")
    reference = target_state(data.dim, float(o["width"]))
    plan, result = _reconstruct(data, o, reference)
    Path(o["out"]).write_text(result.to_json() + "\n")
    line = (f"d={data.dim} {plan.kind}: S={result.linear_entropy:.4f} "
            f"F={result.fidelity:.4f} chi2={result.chi_squared:.4g}")
    if result.sigma_f is not None:
        line += f" sigma_S={result.sigma_s:.4f} sigma_F={result.sigma_f:.4f}"
    print(line)
    return EXIT_OK


def cmd_compare(o: dict) -> int:
    d = o["dim"]
    rows = [f"d={d}", f"M_MUBs={plan_size_mubs(d)}", f"M_QST={plan_size_qst(d)}"]
    lines = ["\t".join(rows)]
    table = {"dim": d, "M_MUBs": plan_size_mubs(d), "M_QST": plan_size_qst(d), "datasets": []}
    if o["inputs"]:
        lines.append("method\tM\tS\tF\tsigma_S\tsigma_F")
        for path in o["inputs"]:
            data = _load_dataset(path)
            if data.dim != d:
                raise DimensionMismatchError(f"{path} has d={data.dim}, expected {d}")
            plan, result = _reconstruct(data, o, target_state(d))
            entry = {"path": str(path), "kind": plan.kind, "M": len(plan),
                     "S": result.linear_entropy, "F": result.fidelity,
                     "sigma_S": result.sigma_s, "sigma_F": result.sigma_f}
            table["datasets"].append(entry)
            sig = (f"{result.sigma_s:.3f}\t{result.sigma_f:.3f}"
                   if result.sigma_f is not None else "-\t-")
            lines.append(f"{plan.kind}\t{len(plan)}\t{result.linear_entropy:.3f}\t"
                         f"{result.fidelity:.3f}\t{sig}")
    Path(o["out"]).write_text(json.dumps(table, indent=1) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_render(o: dict) -> int:
    d = o["dim"]
    mub_set = build_mub_set(d)
    ms = [o["m"]] if o.get("m") is not None else range(1, d + 2)
    is_ = [o["i"]] if o.get("i") is not None else range(1, d + 1)
    for m in ms:
        if not 1 <= m <= d + 1:
            raise UsageError(f"basis index m={m} outside 1..{d + 1}")
    for i in is_:
        if not 1 <= i <= d:
            raise UsageError(f"state index i={i} outside 1..{d}")
    try:
        grid = GridSpec(size=int(o["size"]), extent=float(o["extent"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for m in ms:
        for i in is_:
            image = render_mub_mode(mub_set.vector(m, i), mub_set.oam_labels, grid)
            save_mode_image(image, out / f"d{d}_m{m}_i{i}", color=not o["gray_phase"])
            count += 1
    print(f"wrote {count} image pairs to {out}")
    return EXIT_OK


COMMANDS = {
    "mub": cmd_mub,
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "compare": cmd_compare,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        opts["plan_given"] = getattr(args, "plan", None) is not None
        if opts.get("dim") is not None and opts["dim"] not in SUPPORTED_DIMENSIONS:
            raise UsageError(f"dimension must be one of {SUPPORTED_DIMENSIONS}")
        return COMMANDS[args.command](opts)
    except (UsageError, DimensionMismatchError, UnsupportedDimensionError) as exc:
        print(f"mubtomo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CompletenessError, PhysicalityError) as exc:
        print(f"mubtomo: certification failure: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (OSError, json.JSONDecodeError) as exc:
        print(f"mubtomo: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"mubtomo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
