"""Command-line entry point: ``wstate {generate,tomo,mermin,split,analyze,calibrate}``.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import mermin as mm
from . import qis
from . import statevec as sv
from ._parallel import map_ordered
from .circuit import Circuit, final_state, message_prep_circuit, perfect_w_circuit, sample_circuit
from .data import fixture_path, purify
from .noise import CALIBRATED, NoiseModel, calibrate
from .rng import derive
from .tomo import TomographyDataset, analyze_dataset, tomography_pipeline

log = logging.getLogger("wstate")

HIST_WIDTH = 50
DEFAULT_SHOTS = {"calibrate": 4096}


class UsageError(Exception):
    pass


def _parse_noise(text: str | None) -> NoiseModel | None:
    if text is None:
        return None
    if text == "calibrated":
        return CALIBRATED
    if text == "none":
        return None
    try:
        raw = Path(text).read_text() if os.path.exists(text) else text
        return NoiseModel.from_dict(json.loads(raw))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad --noise value: {exc}") from exc


def _load_circuit(path: str | None) -> Circuit:
    if path is None:
        return perfect_w_circuit()
    try:
        return Circuit.from_json(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read circuit: {exc}") from exc


def _mean_sd(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def histogram(probs: dict[str, tuple[float, float]], width: int = HIST_WIDTH) -> str:
    """Bars scaled so probability 1 spans ``width`` columns; ``|--|`` marks +-1 SD."""
    lines = []
    for key, (mean, sd) in probs.items():
        bar = ["#"] * int(round(mean * width)) + [" "] * (width - int(round(mean * width)))
        lo, hi = int(round((mean - sd) * width)), int(round((mean + sd) * width))
        if sd > 0:
            for col in range(max(lo, 0), min(hi, width - 1) + 1):
                if bar[col] == " ":
                    bar[col] = "-"
            for col in (lo, hi):
                if 0 <= col < width:
                    bar[col] = "|"
        lines.append(f"{key} {''.join(bar)} {mean:.4f} +- {sd:.4f}")
    return "\n".join(lines) + "\n"


# -- commands ---------------------------------------------------------------

def cmd_generate(args) -> str:
    circ = perfect_w_circuit()
    noise = _parse_noise(args.noise)

    def one(r):
        return sample_circuit(circ, args.shots, derive(args.seed, "rep", r), noise)

    runs = map_ordered(one, range(args.reps))
    keys = [sv.bitstring(i, 3) for i in range(8)]
    stats = {k: _mean_sd([c.get(k, 0) / args.shots for c in runs]) for k in keys}
    if args.format == "text":
        return histogram(stats)
    if args.format == "csv":
        return _csv([["bitstring", "mean", "sd"]] + [[k, m, s] for k, (m, s) in stats.items()])
    return _dump_json(
        {
            "command": "generate",
            "shots": args.shots,
            "reps": args.reps,
            "seed": args.seed,
            "noise": None if noise is None else noise.to_dict(),
            "probabilities": {k: {"mean": m, "sd": s} for k, (m, s) in stats.items()},
            "counts": runs,
        }
    )


def cmd_tomo(args) -> str:
    target = _load_circuit(args.circuit)
    noise = _parse_noise(args.noise)
    if args.exact:
        results = [tomography_pipeline(target, None)]
    else:
        results = map_ordered(
            lambda r: tomography_pipeline(target, args.shots, derive(args.seed, "rep", r), noise),
            range(args.reps),
        )
    if args.dataset_out:
        Path(args.dataset_out).write_text(results[0].dataset.to_json(indent=2, sort_keys=True) + "\n")
    f_mean, f_sd = _mean_sd([r.fidelity for r in results])
    rho = results[0].rho
    if args.format == "csv":
        dim = rho.shape[0]
        header = ["row"] + [f"re{j}" for j in range(dim)] + [f"im{j}" for j in range(dim)]
        return _csv([header] + [[i] + list(rho[i].real) + list(rho[i].imag) for i in range(dim)])
    if args.format == "text":
        lines = [f"fidelity {f_mean:.4f} +- {f_sd:.4f} over {len(results)} run(s)", "Re(rho):"]
        lines += ["  " + " ".join(f"{x:+.3f}" for x in row) for row in rho.real]
        lines += ["Im(rho):"] + ["  " + " ".join(f"{x:+.3f}" for x in row) for row in rho.imag]
        return "\n".join(lines) + "\n"
    return _dump_json(
        {
            "command": "tomo",
            "exact": bool(args.exact),
            "shots_per_setting": None if args.exact else args.shots,
            "reps": len(results),
            "seed": args.seed,
            "noise": None if noise is None else noise.to_dict(),
            "rho": sv.density_to_json(rho),
            "fidelity": f_mean,
            "fidelity_sd": f_sd,
            "fidelities": [r.fidelity for r in results],
        }
    )


def _mermin_output(res: mm.MerminResult, args, extra: dict) -> str:
    if args.format == "text":
        sd = "" if math.isnan(res.sd) else f" +- {res.sd:.4f}"
        lines = [f"|M| = {res.M:.4f}{sd} (classical bound {mm.CLASSICAL_BOUND:g}, violated: {res.violates})"]
        lines += [f"  E({k}) = {v:+.4f}" for k, v in res.expectations.items()]
        return "\n".join(lines) + "\n"
    if args.format == "csv":
        return _csv([["term", "expectation"]] + [[k, v] for k, v in res.expectations.items()] + [["M", res.M], ["sd", res.sd]])
    out = res.to_dict()
    if math.isnan(out["sd"]):
        out["sd"] = None
    out.update(extra)
    out["violates_classical_bound"] = res.violates
    return _dump_json(out)


def _analyze_mermin_file(path: str) -> tuple[mm.MerminResult, dict]:
    d = json.loads(Path(path).read_text())
    if d.get("kind") == "mermin_table" or isinstance(d.get("settings"), dict):
        return mm.mermin_from_table(d), {"source": d.get("source")}
    return mm.mermin_from_dataset(TomographyDataset.from_dict(d)), {}


def cmd_mermin(args) -> str:
    if args.analyze:
        res, extra = _analyze_mermin_file(_resolve_data(args.analyze))
        extra["command"] = "mermin"
        return _mermin_output(res, args, extra)
    circ = _load_circuit(args.circuit)
    noise = _parse_noise(args.noise)
    res = mm.mermin_experiment(circ, args.shots, args.seed, noise, args.reps)
    extra = {
        "command": "mermin",
        "shots": args.shots,
        "reps": args.reps,
        "seed": args.seed,
        "runs": res.runs,
        "noise": None if noise is None else noise.to_dict(),
    }
    return _mermin_output(res, args, extra)


def cmd_split(args) -> str:
    noise = _parse_noise(args.noise)
    force = None
    if args.force_outcome is not None:
        try:
            force = qis.BellOutcome.parse(args.force_outcome)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    prep = message_prep_circuit()
    noisy = noise is not None and not noise.is_zero
    traj = args.shots if noisy else None

    def one(r):
        return qis.run_protocol(prep, derive(args.seed, "rep", r), noise, force, traj)

    runs = map_ordered(one, range(args.reps))
    f_mean, f_sd = _mean_sd([r.fidelity for r in runs])
    if args.format == "text":
        lines = [f"run {i}: outcome {r.outcome} fidelity {r.fidelity:.6f} P(Charlie=0) {r.charlie_bit_prob_zero:.6f}" for i, r in enumerate(runs)]
        lines.append(f"mean fidelity {f_mean:.6f} +- {f_sd:.6f}")
        return "\n".join(lines) + "\n"
    if args.format == "csv":
        rows = [["run", "outcome", "fidelity", "charlie_p0"]]
        rows += [[i, "" if r.outcome is None else str(r.outcome), r.fidelity, r.charlie_bit_prob_zero] for i, r in enumerate(runs)]
        return _csv(rows)
    return _dump_json(
        {
            "command": "split",
            "reps": args.reps,
            "seed": args.seed,
            "force_outcome": args.force_outcome,
            "noise": None if noise is None else noise.to_dict(),
            "message": sv.density_to_json(qis.MessageState.from_circuit(prep).density_matrix()),
            "runs": [r.to_dict() for r in runs],
            "aggregate": {"mean_fidelity": f_mean, "sd": f_sd},
        }
    )


def _resolve_data(name: str) -> str:
    """Accept a path or the name of a shipped fixture file (``table1.json``)."""
    if os.path.exists(name):
        return name
    shipped = fixture_path(Path(name).name)
    if shipped.is_file():
        return str(shipped)
    raise UsageError(f"no such file: {name}")


def cmd_analyze(args) -> str:
    path = _resolve_data(args.file)
    d = json.loads(Path(path).read_text())
    kind = d.get("kind")
    if kind == "mermin_table":
        res, extra = _analyze_mermin_file(path)
        extra["command"] = "analyze"
        return _mermin_output(res, args, extra)
    if kind == "density_pair":
        rho_t, rho_e = sv.density_from_json(d["rho_t"]), sv.density_from_json(d["rho_e"])
        f = sv.fidelity(purify(rho_t), rho_e)
        f_raw = sv.fidelity(rho_t, rho_e)
        overlap = float(np.trace(rho_t @ rho_e).real)
        out = {
            "command": "analyze",
            "fidelity": f,
            "fidelity_unpurified": f_raw,
            "overlap": overlap,
            "reported": d.get("reported"),
        }
        if args.format == "text":
            return f"fidelity {f:.4f} (Tr(rho_t rho_e) = {overlap:.4f}; unpurified theory matrix {f_raw:.4f})\n"
        return _dump_json(out)
    if "n" in d and isinstance(d.get("settings"), list):
        data = TomographyDataset.from_dict(d)
        if not data.is_complete():
            res = mm.mermin_from_dataset(data)
            return _mermin_output(res, args, {"command": "analyze"})
        ref = final_state(perfect_w_circuit()) if data.n == 3 else None
        result = analyze_dataset(data, ref)
        out = {
            "command": "analyze",
            "rho": sv.density_to_json(result.rho),
            "fidelity_vs_perfect_w": None if math.isnan(result.fidelity) else result.fidelity,
            "raw_was_unphysical": result.was_unphysical,
        }
        return _dump_json(out)
    raise UsageError(f"unrecognized file layout in {args.file}")


def cmd_calibrate(args) -> str:
    model, f = calibrate(args.target, shots=args.shots, seed=args.seed)
    return _dump_json({"command": "calibrate", "target": args.target, "noise": model.to_dict(), "fidelity": f})


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--shots", type=int, help="shots per circuit (default 8192; calibrate 4096)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--reps", type=int, default=5, help="independent repetitions")
    common.add_argument("--noise", help="noise JSON, a path to one, 'calibrated' or 'none'")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")

    parser = argparse.ArgumentParser(prog="wstate", description="Perfect W-state experiments on a simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="sample the perfect-W circuit")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("tomo", parents=[common], help="full state tomography")
    p.add_argument("--exact", action="store_true", help="use exact probabilities (infinite shots)")
    p.add_argument("--circuit", help="circuit JSON to characterize (default: perfect W)")
    p.add_argument("--dataset-out", help="also write the first run's counts dataset")
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("mermin", parents=[common], help="Mermin inequality test")
    p.add_argument("--circuit", help="3-qubit circuit JSON (default: perfect W)")
    p.add_argument("--analyze", help="re-analyze a probability table or counts file instead of simulating")
    p.set_defaults(func=cmd_mermin)

    p = sub.add_parser("split", parents=[common], help="quantum information splitting")
    p.add_argument("--force-outcome", help="post-select Alice's Bell outcome, e.g. 01")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("analyze", parents=[common], help="re-analyze a data file")
    p.add_argument("file", help="path, or a shipped fixture file name (table1.json, bob_density.json)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", parents=[common], help="fit a noise model to a tomography fidelity")
    p.add_argument("--target", type=float, default=0.75)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.shots is None:
        args.shots = DEFAULT_SHOTS.get(args.command, 8192)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.shots < 1:
        parser.error("--shots must be >= 1")
    if args.reps < 1:
        parser.error("--reps must be >= 1")
    try:
        text = args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except Exception as exc:  # noqa: BLE001
        log.debug("command failed", exc_info=True)
        print(f"wstate: error: {exc}", file=sys.stderr)
        return 1
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
