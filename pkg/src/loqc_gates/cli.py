"""Command-line entry point: ``loqc-gates <command> ...``.

Exit status is 0 on success, 2 for usage or input errors and 3 when a run
produced no usable result.  Every failure prints one line on stderr of the
form ``error: <category>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import io
from .contraction import dilate, evaluate, normalize
from .errors import CatalogError, InsufficientDataError, LoadError
from .fitting import PUBLISHED_FITS, fit_frontier, ratio_report, report_csv, report_text
from .optimizer import (
    OptimizedPoint,
    OptimizerConfig,
    best_point,
    default_epsilon_range,
    epsilon_schedule,
    knill_form_score,
    random_restart_search,
    trace_family,
)
from .targets import CartanCoords, GateSpec, cartan_two_qubit, gate_catalog, single_photon_spec

OUT_ENV = "LOQC_GATES_OUT"
EXIT_OK, EXIT_USAGE, EXIT_NO_RESULT = 0, 2, 3
# eps range used for custom targets when no fit is known
FALLBACK_EPS = (0.1, 10.0)


class CliError(Exception):
    def __init__(self, category: str, message: str, code: int):
        super().__init__(message)
        self.category = category
        self.code = code


def usage(message: str) -> CliError:
    return CliError("usage", message, EXIT_USAGE)


def no_result(message: str) -> CliError:
    return CliError("no-result", message, EXIT_NO_RESULT)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise usage(message)


def _floats3(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected c1,c2,c3, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number in {text!r}") from None


def _add_target(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gate", help="catalog gate: cnot, cs90, b, toffoli")
    g.add_argument("--target-file", help="matrix file with a 2^n x 2^n unitary")
    g.add_argument("--cartan", type=_floats3, metavar="C1,C2,C3", help="two-qubit gate from Cartan coordinates")
    p.add_argument("--ancillas", type=int, dest="n_ancillas", help="single-photon ancillas for custom targets")


def _add_search(p):
    p.add_argument("--epsilon", type=float, help="relaxation weight eps (default 1e-6)")
    p.add_argument("--restarts", type=int, help="random restarts")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--structure", choices=("auto", "full", "knill"))


def _add_common(p):
    p.add_argument("--config", help="RunConfig JSON; flags override its fields")
    p.add_argument("--coalescence-tol", type=float, dest="coalescence_tol")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or the working directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="loqc-gates", description="Success-fidelity optimization of post-selected linear optical gates.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("optimize", help="random-restart search at fixed eps")
    _add_target(p)
    _add_search(p)
    _add_common(p)

    p = sub.add_parser("trace", help="follow the best family while eps grows")
    _add_target(p)
    _add_search(p)
    p.add_argument("--start", help="start matrix file (otherwise found by a restart search)")
    p.add_argument("--eps-min", type=float, dest="eps_min")
    p.add_argument("--eps-max", type=float, dest="eps_max")
    p.add_argument("--eps-steps", type=int, dest="eps_steps")
    p.add_argument("--sigma", type=float, help="relative perturbation before each step")
    _add_common(p)

    p = sub.add_parser("fit", help="fit S0 + S1 sqrt(delta) + S2 delta to a trace")
    p.add_argument("trace")
    p.add_argument("--delta-max", type=float, dest="delta_max", help="fit window (default: first coalescence, else 0.1)")
    p.add_argument("--out")

    p = sub.add_parser("report", help="ratio table over several traces")
    p.add_argument("traces", nargs="+")
    p.add_argument("--out")

    p = sub.add_parser("dilate", help="unitary dilation of a contraction")
    p.add_argument("matrix")
    p.add_argument("--coalescence-tol", type=float, dest="coalescence_tol")
    p.add_argument("--out")

    p = sub.add_parser("validate", help="re-check matrix or trace files")
    p.add_argument("files", nargs="+")
    p.add_argument("--unitary", action="store_true", help="require matrices to be unitary")
    return parser


# ---------------------------------------------------------------------------
# configuration


CONFIG_FLAGS = (
    "gate", "target_file", "cartan", "n_ancillas", "epsilon", "eps_min", "eps_max", "eps_steps",
    "restarts", "seed", "sigma", "coalescence_tol", "structure",
)


def run_config(args) -> io.RunConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise LoadError(f"{args.config}: file: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise LoadError(f"{args.config}: json: {exc.msg}") from None
        if not isinstance(base, dict):
            raise LoadError(f"{args.config}: expected an object")
    flags = {k: getattr(args, k) for k in CONFIG_FLAGS if getattr(args, k, None) is not None}
    if any(k in flags for k in ("gate", "target_file", "cartan")):
        base = {k: v for k, v in base.items() if k not in ("gate", "target_file", "cartan")}
    merged = {**base, **flags}
    if isinstance(merged.get("cartan"), tuple):
        merged["cartan"] = list(merged["cartan"])
    merged["out"] = out_dir(args)
    try:
        return io.RunConfig.from_dict(merged)
    except LoadError as exc:
        raise usage(str(exc).removeprefix("config.")) from None


def out_dir(args) -> str:
    return getattr(args, "out", None) or os.environ.get(OUT_ENV) or "."


def resolve_spec(cfg: io.RunConfig) -> tuple[GateSpec, str]:
    """Gate spec and a short label used for file names."""
    if cfg.gate is not None:
        try:
            return gate_catalog(cfg.gate), cfg.gate.lower()
        except CatalogError as exc:
            raise usage(exc.args[0]) from None
    if cfg.cartan is not None:
        target = cartan_two_qubit(CartanCoords(*cfg.cartan))
        return single_photon_spec(target, cfg.n_ancillas), "cartan"
    target = io.load_target(cfg.target_file)
    return single_photon_spec(target, cfg.n_ancillas), Path(cfg.target_file).stem


def optimizer_config(cfg: io.RunConfig) -> OptimizerConfig:
    return OptimizerConfig(
        epsilon=cfg.epsilon,
        max_iterations=cfg.max_iterations,
        gradient_tolerance=cfg.gradient_tolerance,
        rng_seed=cfg.seed,
        perturbation_sigma=cfg.sigma,
        continuation_start=cfg.continuation_start,
        continuation_factor=cfg.continuation_factor,
        coalescence_tol=cfg.coalescence_tol,
    )


def schedule_for(cfg: io.RunConfig) -> list[float]:
    """Explicit eps bounds win; catalog gates otherwise sweep delta from 1e-4 to 0.3."""
    lo, hi = FALLBACK_EPS
    if cfg.gate is not None and cfg.gate.lower() in PUBLISHED_FITS:
        _, s1, s2 = PUBLISHED_FITS[cfg.gate.lower()]
        lo, hi = default_epsilon_range(s1, s2)
    lo = cfg.eps_min if cfg.eps_min is not None else lo
    hi = cfg.eps_max if cfg.eps_max is not None else max(hi, lo)
    try:
        return epsilon_schedule(lo, hi, cfg.eps_steps)
    except ValueError as exc:
        raise usage(f"schedule: {exc}") from None


def _prepare_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _family_summary(families, spec: GateSpec) -> list[dict]:
    rows = []
    for f in families:
        rep = f.representative
        rows.append(
            {
                "signature": list(f.signature),
                "success": rep.success,
                "delta": rep.delta,
                "knill_form": f.knill,
                "knill_form_score": knill_form_score(rep.u, spec),
                "implied_vacuum_modes": rep.metrics.implied_vacuum_modes,
                "nsv": list(rep.metrics.nsv),
                "members": sorted(p.seed for p in f.members),
                "representative_seed": rep.seed,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# commands


def cmd_optimize(args) -> int:
    cfg = run_config(args)
    spec, label = resolve_spec(cfg)
    families = random_restart_search(
        spec, cfg.epsilon, cfg.restarts, cfg.seed, optimizer_config(cfg), cfg.structure
    )
    converged = [p for f in families for p in f.members if p.converged]
    if not converged:
        raise no_result(f"none of {cfg.restarts} restarts converged")
    out = _prepare_out(cfg.out)
    best = max(converged, key=lambda p: (p.objective, -(p.seed or 0)))
    io.save_matrix(out / f"{label}_best.mat", best.u)
    summary = {"config": _header_config(cfg), "gate": io.spec_to_dict(spec), "families": _family_summary(families, spec)}
    io.write_json(out / f"{label}_families.json", summary)
    m = best.metrics
    print(f"best: S={m.success:.8g} F={m.fidelity:.12g} vacuum_modes={m.implied_vacuum_modes} seed={best.seed}")
    print(f"families: {len(families)}  written: {out / f'{label}_best.mat'}")
    return EXIT_OK


def _header_config(cfg: io.RunConfig) -> dict:
    # the output location does not affect results, keep it out of the files
    return replace(cfg, out=".").to_dict()


def _start_point(args, cfg: io.RunConfig, spec: GateSpec) -> OptimizedPoint:
    opt = optimizer_config(cfg)
    if args.start:
        u = io.load_matrix(args.start)
        if u.shape[0] != spec.n_modes:
            raise LoadError(f"{args.start}: dimensions: {u.shape[0]} modes, gate needs {spec.n_modes}")
        u = normalize(u)
        return OptimizedPoint(u, evaluate(u, spec, cfg.coalescence_tol), cfg.epsilon, float("nan"), True, 0, 0.0)
    families = random_restart_search(spec, cfg.epsilon, cfg.restarts, cfg.seed, opt, cfg.structure)
    best = best_point(families)
    if best is None:
        raise no_result(f"no converged perfect-fidelity start among {cfg.restarts} restarts")
    return best


def cmd_trace(args) -> int:
    cfg = run_config(args)
    spec, label = resolve_spec(cfg)
    schedule = schedule_for(cfg)
    start = _start_point(args, cfg, spec)
    out = _prepare_out(cfg.out)
    if not args.start:
        io.save_matrix(out / f"{label}_start.mat", start.u)
    path = out / f"{label}_trace.jsonl"
    writer = io.TraceWriter(path, spec, replace(cfg, out="."), label)
    clock = [time.perf_counter()]

    def on_point(point):
        now = time.perf_counter()
        writer.append(io.record_from_point(point, knill_form_score(point.u, spec), now - clock[0]))
        clock[0] = now

    trace = trace_family(start, spec, schedule, optimizer_config(cfg), label, on_point=on_point)
    writer.finish(trace.coalescence_events, trace.aborted)
    events = ", ".join(f"{d:.4g}" for d, _ in trace.coalescence_events) or "none"
    print(f"points: {len(trace.points)}/{len(schedule)}  coalescence at delta: {events}  written: {path}")
    if trace.aborted:
        raise no_result(f"trace stopped after {len(trace.points)} of {len(schedule)} points (non-converged step)")
    return EXIT_OK


def _fit_trace(trace: io.Trace, delta_max: float | None):
    if delta_max is None:
        first = trace.coalescence_events[0][0] if trace.coalescence_events else None
        delta_max = first if first is not None else 0.1
    try:
        return fit_frontier(trace.frontier(), delta_max)
    except InsufficientDataError as exc:
        raise no_result(str(exc)) from None


def _gate_key(trace: io.Trace) -> str:
    return trace.label or trace.spec.target.label.lower()


def cmd_fit(args) -> int:
    trace = io.load_trace(args.trace)
    fit = _fit_trace(trace, args.delta_max)
    rows = ratio_report({_gate_key(trace): fit})
    out = _prepare_out(out_dir(args))
    stem = Path(args.trace).name.removesuffix(".jsonl")
    io.write_json(out / f"{stem}_fit.json", fit.as_dict())
    (out / f"{stem}_fit.csv").write_text(report_csv(rows))
    text = report_text(rows) + f"window delta <= {fit.delta_max:.4g}, {fit.n_points} points, rms residual {fit.rms_residual:.3g}\n"
    (out / f"{stem}_fit.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_report(args) -> int:
    fits = {}
    for path in args.traces:
        trace = io.load_trace(path)
        fits[_gate_key(trace)] = _fit_trace(trace, None)
    rows = ratio_report(fits)
    out = _prepare_out(out_dir(args))
    (out / "report.csv").write_text(report_csv(rows))
    (out / "report.txt").write_text(report_text(rows))
    print(report_text(rows), end="")
    return EXIT_OK


def cmd_dilate(args) -> int:
    from .contraction import COALESCENCE_TOL
    from .errors import ContractionViolation

    tol = args.coalescence_tol if args.coalescence_tol is not None else COALESCENCE_TOL
    u = io.load_matrix(args.matrix)
    try:
        w = dilate(u, tol)
    except ContractionViolation as exc:
        raise LoadError(f"{args.matrix}: spectral_norm: {exc}") from None
    out = _prepare_out(out_dir(args))
    path = out / f"{Path(args.matrix).stem}_unitary.mat"
    io.save_matrix(path, w)
    print(f"{u.shape[0]} -> {w.shape[0]} modes, written: {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    for name in args.files:
        if name.endswith(".jsonl"):
            t = io.load_trace(name)
            state = "complete" if t.complete else "partial"
            print(f"ok {name} trace {len(t.records)} points {state}")
        else:
            u = io.load_matrix(name, unitary=args.unitary)
            print(f"ok {name} matrix {u.shape[0]}x{u.shape[1]}")
    return EXIT_OK


COMMANDS = {
    "optimize": cmd_optimize,
    "trace": cmd_trace,
    "fit": cmd_fit,
    "report": cmd_report,
    "dilate": cmd_dilate,
    "validate": cmd_validate,
}


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc.category}: {_one_line(exc)}", file=sys.stderr)
        return exc.code
    except LoadError as exc:
        print(f"error: load: {_one_line(exc)}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, CatalogError) as exc:
        print(f"error: usage: {_one_line(exc)}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
