"""Command-line front end.

Subcommands: detect, eliminate, mitigate, experiment {mermin,ghz,vqe}, and
povm-tools.  All outputs are machine readable (JSON / CSV) and written
atomically; identical configuration plus seed produces byte-identical
files.  The seed falls back to the MNL_SEED environment variable.

Exit codes: 0 success, 2 configuration error, 3 numerical or validation
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .detect import (
    DegenerateFitError,
    DetectionConfig,
    fit_fourier_series,
    sweep_witness_estimates,
)
from .eliminate import EliminationConfig, TwirlMethod, run_elimination
from .experiments import (
    OptimizerConfig,
    Pipeline,
    ghz_parity_oracle,
    h2_hamiltonian,
    run_ghz_parity,
    run_mermin,
    run_vqe,
)
from .mitigate import (
    CalibrationMatrix,
    DegenerateCalibrationError,
    NonConvergenceError,
    SingularCalibrationError,
    calibrate,
    mitigate_ibu,
    mitigate_inverse,
    mitigate_least_squares,
)
from .noisemodel import (
    DEFAULT_RY_ANGLE,
    InconsistentInputsError,
    ProbVector,
    SeededRng,
    confusion_measurement,
    ideal_measurement,
    ry_measurement,
)
from .povm import (
    MalformedPtmError,
    Povm,
    average_noise_measure,
    is_classical,
    linf_coherence,
    max_offdiagonal,
    measurement_fidelity,
)
from .qcore import (
    DensityState,
    basis_state,
    ghz_state,
    maximally_mixed,
    mermin_state,
    plus_theta_state,
)

NUMERICAL_ERRORS = (
    MalformedPtmError,
    InconsistentInputsError,
    NonConvergenceError,
    SingularCalibrationError,
    DegenerateCalibrationError,
    DegenerateFitError,
    np.linalg.LinAlgError,
    ValueError,
)


class ConfigError(Exception):
    pass


def parse_device(spec: str | None) -> Povm:
    """Device grammar: ideal:N | ry:N[:angle] | povm-file:PATH | confusion-file:PATH."""
    if spec is None:
        raise ConfigError("--device is required")
    kind, _, rest = spec.partition(":")
    try:
        if kind == "ideal":
            return ideal_measurement(int(rest))
        if kind == "ry":
            parts = rest.split(":")
            n = int(parts[0])
            angle = float(parts[1]) if len(parts) > 1 else DEFAULT_RY_ANGLE
            return ry_measurement(n, angle)
        if kind == "povm-file":
            with open(rest, encoding="utf-8") as fh:
                return Povm.from_json(fh.read())
        if kind == "confusion-file":
            with open(rest, encoding="utf-8") as fh:
                cal = CalibrationMatrix.from_json(fh.read())
            return confusion_measurement(cal.matrix)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad device {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown device kind {kind!r}")


def parse_state(spec: str, n: int) -> DensityState:
    """State grammar: zero | basis:BITS | plus | plustheta:THETA | mixed | ghz | mermin."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "zero":
            return basis_state(0, n)
        if kind == "basis":
            if len(rest) != n:
                raise ValueError(f"bitstring length {len(rest)} != n={n}")
            return basis_state(rest, n)
        if kind == "plus":
            return plus_theta_state(0.0, n)
        if kind == "plustheta":
            return plus_theta_state(float(rest), n)
        if kind == "mixed":
            return maximally_mixed(n)
        if kind == "ghz":
            return ghz_state(n)
        if kind == "mermin":
            if n != 4:
                raise ValueError("mermin state is 4-qubit")
            return mermin_state()
    except ValueError as exc:
        raise ConfigError(f"bad state {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown state kind {kind!r}")


def resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("MNL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"MNL_SEED={env!r} is not an integer") from exc
    return 0


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".mnlab-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_csv(path: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write(path, buf.getvalue())


def emit(args, payload) -> None:
    text = dump_json(payload)
    if getattr(args, "out_json", None):
        atomic_write(args.out_json, text)
    else:
        sys.stdout.write(text)


def _pipeline_from_args(args) -> Pipeline:
    method = None if args.method == "raw" else TwirlMethod(args.method)
    return Pipeline(
        method=method,
        mitigator=args.mitigator,
        analytic=args.mode == "analytic",
        shots=args.shots,
        twirl_mode=args.twirl_mode,
        twirl_count=args.twirls,
    )


def cmd_detect(args) -> int:
    povm = parse_device(args.device)
    cfg = DetectionConfig(
        k=args.k,
        shots=args.shots,
        seed=resolve_seed(args.seed),
        harmonics=args.harmonics,
        analytic=args.analytic,
    )
    harmonics = cfg.resolved_harmonics(povm.n)
    thetas, estimates = sweep_witness_estimates(povm, cfg, threads=args.threads)
    fits = [
        fit_fourier_series(thetas, estimates[:, i], harmonics, outcome)
        for i, outcome in enumerate(povm.outcomes())
    ]
    if args.out_csv:
        rows = [
            (f"{thetas[k]:.17g}", outcome, f"{estimates[k, i]:.17g}")
            for k in range(cfg.k)
            for i, outcome in enumerate(povm.outcomes())
        ]
        write_csv(args.out_csv, ["theta", "outcome", "estimate"], rows)
    emit(
        args,
        {
            "command": "detect",
            "device": args.device,
            "k": cfg.k,
            "shots": cfg.shots,
            "seed": cfg.seed,
            "analytic": cfg.analytic,
            "harmonics": harmonics,
            "fits": [
                {
                    "outcome": f.outcome,
                    "a": [float(v) for v in f.a],
                    "b": [float(v) for v in f.b],
                    "residual": f.residual,
                }
                for f in fits
            ],
        },
    )
    return 0


def cmd_eliminate(args) -> int:
    povm = parse_device(args.device)
    state = parse_state(args.state, povm.n)
    seed = resolve_seed(args.seed)
    cfg = EliminationConfig(
        method=TwirlMethod(args.method),
        k=args.twirls,
        shots=args.shots,
        seed=seed,
        mode=args.mode,
    )
    probs = run_elimination(povm, state, cfg, SeededRng(seed, "eliminate"))
    emit(
        args,
        {
            "command": "eliminate",
            "device": args.device,
            "state": args.state,
            "method": args.method,
            "mode": args.mode,
            "twirls": args.twirls,
            "shots": args.shots,
            "seed": seed,
            "n": probs.n,
            "p": [float(v) for v in probs.p],
        },
    )
    return 0


def cmd_mitigate(args) -> int:
    if (args.calibration is None) == (args.device is None):
        raise ConfigError("provide exactly one of --calibration or --device")
    if args.calibration:
        with open(args.calibration, encoding="utf-8") as fh:
            cal = CalibrationMatrix.from_json(fh.read())
    else:
        cal = calibrate(parse_device(args.device))
    with open(args.probs, encoding="utf-8") as fh:
        probs = ProbVector.from_json(fh.read())
    if probs.n != cal.n:
        raise ConfigError("probability vector and calibration sizes differ")
    payload = {
        "command": "mitigate",
        "mitigator": args.mitigator,
        "n": cal.n,
        "condition_number": cal.condition_number,
    }
    if args.mitigator == "none":
        corrected = np.asarray(probs.p)
    elif args.mitigator == "inverse":
        corrected = mitigate_inverse(cal, probs)
        payload["has_negative"] = bool((corrected < 0).any())
    elif args.mitigator == "lsq":
        corrected = mitigate_least_squares(cal, probs).p
    else:
        corrected = mitigate_ibu(cal, probs).p
    payload["p"] = [float(v) for v in corrected]
    emit(args, payload)
    return 0


def cmd_experiment_mermin(args) -> int:
    povm = parse_device(args.device)
    pipeline = _pipeline_from_args(args)
    seed = resolve_seed(args.seed)
    result = run_mermin(povm, pipeline, repeats=args.repeats, seed=seed)
    method = args.method
    if args.out_csv:
        write_csv(
            args.out_csv,
            ["method", "mitigator", "mean", "stderr"],
            [(method, args.mitigator, f"{result.mean:.17g}", f"{result.stderr:.17g}")],
        )
    emit(
        args,
        {
            "command": "experiment.mermin",
            "device": args.device,
            "method": method,
            "mitigator": args.mitigator,
            "mode": args.mode,
            "shots": args.shots,
            "repeats": args.repeats,
            "seed": seed,
            "mean": result.mean,
            "stderr": result.stderr,
        },
    )
    return 0


def cmd_experiment_ghz(args) -> int:
    povm = parse_device(args.device)
    pipeline = _pipeline_from_args(args)
    seed = resolve_seed(args.seed)
    phis = np.linspace(0.0, 2 * np.pi, args.phi_points, endpoint=False)
    result = run_ghz_parity(povm, phis, pipeline, repeats=args.repeats, seed=seed)
    if args.out_csv:
        rows = [
            (f"{phi:.17g}", args.method, f"{m:.17g}", f"{e:.17g}")
            for phi, m, e in zip(result.phis, result.means, result.stderrs)
        ]
        write_csv(args.out_csv, ["phi", "method", "value", "stderr"], rows)
    emit(
        args,
        {
            "command": "experiment.ghz",
            "device": args.device,
            "method": args.method,
            "mitigator": args.mitigator,
            "mode": args.mode,
            "shots": args.shots,
            "repeats": args.repeats,
            "seed": seed,
            "phis": [float(p) for p in result.phis],
            "values": [float(v) for v in result.means],
            "stderrs": [float(v) for v in result.stderrs],
            "theoretical": [float(v) for v in ghz_parity_oracle(result.phis)],
        },
    )
    return 0


def cmd_experiment_vqe(args) -> int:
    povm = parse_device(args.device)
    pipeline = _pipeline_from_args(args)
    seed = resolve_seed(args.seed)
    ham = h2_hamiltonian()
    optimizer = OptimizerConfig(sweeps=args.sweeps)
    runs = [
        run_vqe(povm, ham, pipeline, optimizer, seed=seed, restart=r)
        for r in range(args.restarts)
    ]
    if args.out_csv:
        rows = [
            (str(r), str(it), f"{energy:.17g}")
            for r, run in enumerate(runs)
            for it, energy in run.trace
        ]
        write_csv(args.out_csv, ["run", "iteration", "energy"], rows)
    finals = [run.final_energy for run in runs]
    emit(
        args,
        {
            "command": "experiment.vqe",
            "device": args.device,
            "method": args.method,
            "mitigator": args.mitigator,
            "mode": args.mode,
            "shots": args.shots,
            "restarts": args.restarts,
            "sweeps": args.sweeps,
            "seed": seed,
            "final_energies": finals,
            "mean_final_energy": float(np.mean(finals)),
            "best_final_energy": float(np.min(finals)),
        },
    )
    return 0


def cmd_povm_tools(args) -> int:
    povm = parse_device(args.device)
    if args.tool == "export":
        text = povm.to_json() + "\n"
        if args.out_json:
            atomic_write(args.out_json, text)
        else:
            sys.stdout.write(text)
        return 0
    emit(
        args,
        {
            "command": "povm-tools.describe",
            "device": args.device,
            "n": povm.n,
            "classical_at_1e-8": is_classical(povm),
            "max_offdiagonal": max_offdiagonal(povm),
            "measurement_fidelity": measurement_fidelity(povm),
            "average_noise_measure_theta0": average_noise_measure(povm, 0.0),
            "linf_coherence": linf_coherence(povm),
        },
    )
    return 0


def _add_common(parser, shots_default=8192):
    parser.add_argument("--device", default=None,
                        help="ideal:N | ry:N[:angle] | povm-file:PATH | confusion-file:PATH")
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed (falls back to MNL_SEED, then 0)")
    parser.add_argument("--shots", type=int, default=shots_default)
    parser.add_argument("--config", default=None,
                        help="JSON file of option defaults; flags override")
    parser.add_argument("--out-json", default=None,
                        help="write the JSON report here instead of stdout")


def _add_pipeline(parser):
    parser.add_argument("--method", choices=["raw", "iz", "xy", "pauli"],
                        default="raw", help="quantum-noise elimination method")
    parser.add_argument("--mitigator", choices=["none", "inverse", "lsq", "ibu"],
                        default="none")
    parser.add_argument("--mode", choices=["analytic", "shots"], default="shots",
                        help="analytic = exact probabilities, no sampling")
    parser.add_argument("--twirl-mode", choices=["channel", "sampled", "exhaustive"],
                        default="channel",
                        help="channel = exact effective device; sampled/exhaustive "
                             "run the shot-level twirl")
    parser.add_argument("--twirls", type=int, default=32,
                        help="sampled Paulis per estimate in sampled twirl mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mnlab",
        description="Measurement-noise laboratory: detect, eliminate, and "
                    "mitigate noise of simulated quantum measurement devices.",
        epilog="Exit codes: 0 success, 2 configuration error, 3 numerical or "
               "validation error. Seeds fall back to MNL_SEED, then 0. "
               'File schemas: POVM {"n", "elements": [[[re, im], ...], ...]}; '
               'calibration {"n", "A": [row-major]}; probabilities '
               '{"n", "p": [...]}. Outputs are written atomically and are '
               "byte-identical for identical configuration and seed.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="fit the phase-swept coherence witness")
    _add_common(p)
    p.add_argument("--k", type=int, default=100, help="number of sampled phases")
    p.add_argument("--harmonics", type=int, default=None)
    p.add_argument("--analytic", action="store_true",
                   help="exact probabilities instead of shot sampling")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-csv", default=None,
                   help="CSV of raw estimates: theta,outcome,estimate")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eliminate", help="run twirling and report probabilities")
    _add_common(p)
    p.add_argument("--state", default="zero",
                   help="zero | basis:BITS | plus | plustheta:T | mixed | ghz | mermin")
    p.add_argument("--method", choices=["iz", "xy", "pauli"], required=True)
    p.add_argument("--mode", choices=["sampled", "exhaustive", "analytic"],
                   default="sampled")
    p.add_argument("--twirls", type=int, default=32)
    p.set_defaults(func=cmd_eliminate)

    p = sub.add_parser("mitigate", help="correct a measured distribution")
    p.add_argument("--probs", required=True, help='JSON {"n":..., "p": [...]}')
    p.add_argument("--calibration", default=None,
                   help='JSON {"n":..., "A": [...]} calibration matrix')
    p.add_argument("--device", default=None,
                   help="calibrate this device analytically instead")
    p.add_argument("--mitigator", choices=["none", "inverse", "lsq", "ibu"],
                   default="lsq")
    p.add_argument("--config", default=None)
    p.add_argument("--out-json", default=None)
    p.set_defaults(func=cmd_mitigate)

    exp = sub.add_parser("experiment", help="reproduce an end-to-end experiment")
    exps = exp.add_subparsers(dest="experiment", required=True)

    p = exps.add_parser("mermin", help="16-term Mermin combination")
    _add_common(p)
    _add_pipeline(p)
    p.add_argument("--repeats", type=int, default=1000)
    p.add_argument("--out-csv", default=None,
                   help="CSV columns: method,mitigator,mean,stderr")
    p.set_defaults(func=cmd_experiment_mermin)

    p = exps.add_parser("ghz", help="GHZ parity oscillation")
    _add_common(p)
    _add_pipeline(p)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--phi-points", type=int, default=20,
                   help="evenly spaced phases over [0, 2pi)")
    p.add_argument("--out-csv", default=None,
                   help="CSV columns: phi,method,value,stderr")
    p.set_defaults(func=cmd_experiment_ghz)

    p = exps.add_parser("vqe", help="hydrogen-molecule VQE with cyclic "
                                    "analytic minimization")
    _add_common(p)
    _add_pipeline(p)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--sweeps", type=int, default=100)
    p.add_argument("--out-csv", default=None,
                   help="CSV columns: run,iteration,energy")
    p.set_defaults(func=cmd_experiment_vqe)

    p = sub.add_parser("povm-tools", help="inspect or export a device POVM")
    p.add_argument("tool", choices=["describe", "export"])
    p.add_argument("--device", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out-json", default=None)
    p.set_defaults(func=cmd_povm_tools)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Seed subparser defaults from --config JSON; explicit flags still win."""
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError("config file must hold a JSON object")
    # locate the target subparser by walking the command words
    target = parser
    words = [a for a in argv if not a.startswith("-")]
    while words:
        actions = [
            a for a in target._actions if isinstance(a, argparse._SubParsersAction)
        ]
        if not actions or words[0] not in actions[0].choices:
            break
        target = actions[0].choices[words.pop(0)]
    known = {
        a.dest for a in target._actions if a.dest != argparse.SUPPRESS
    }
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    target.set_defaults(**payload)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"mnlab: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"mnlab: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"mnlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
