"""Command line entry point binding solvers, sweeps, and simulations.

Exit codes: 0 on success, 1 on a domain error (structured message on
stderr), 2 on usage errors. Every run emits a JSON manifest line to stderr
with the command line, channel hash, seed, tolerances, version, and wall
time; results go to stdout (or --out) so reruns are byte-comparable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import __version__
from .causal import INNER_EPS, causal_capacity, inner_maximize
from .channel import TAU_COMM, load_channel
from .coding import rows_to_csv, simulate_rate_error_curve
from .errors import GpcqError
from .method_of_types import (
    is_exact_type,
    nearest_type,
    nearest_type_exhaustive,
    coverage_probability,
    type_class_size,
    typical_mass,
)
from .noncausal import ALT_EPS, noncausal_lower_bound
from .quantum import TAU_EIG, TAU_HERM, TAU_SUPP, TAU_TR, shannon_entropy
from .schur_weyl import (
    TAU_PROJ,
    central_projector,
    frame_dimension_bounds,
    frame_distribution,
    gl_multiplicity,
    irrep_dimension,
    young_frames,
)

TOLERANCES = {
    "hermitian": TAU_HERM,
    "trace": TAU_TR,
    "eigenvalue": TAU_EIG,
    "support": TAU_SUPP,
    "projector": TAU_PROJ,
    "commutator": TAU_COMM,
    "inner_eps": INNER_EPS,
    "alt_eps": ALT_EPS,
}

STOCHASTIC_COMMANDS = ("noncausal", "simulate")


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise GpcqError(f"expected comma-separated numbers, got {text!r}") from exc


def _parse_ints(text: str) -> list[int]:
    vals = _parse_floats(text)
    out = [int(round(v)) for v in vals]
    if any(abs(o - v) > 1e-12 for o, v in zip(out, vals)):
        raise GpcqError(f"expected comma-separated integers, got {text!r}")
    return out


def _parse_matrix(text: str) -> np.ndarray:
    rows = [
        _parse_floats(row) for row in text.split(";") if row.strip() != ""
    ]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise GpcqError(f"expected 'a,b;c,d' matrix rows of equal length, got {text!r}")
    return np.asarray(rows, dtype=float)


def _sha256(path: str) -> str | None:
    try:
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()
    except OSError:
        return None


def _emit_manifest(argv, channel_path, seed, started) -> None:
    manifest = {
        "cmdline": ["gpcq", *argv],
        "channel_sha256": _sha256(channel_path) if channel_path else None,
        "seed": seed,
        "tolerances": TOLERANCES,
        "version": __version__,
        "wall_time_s": round(time.monotonic() - started, 6),
    }
    print(json.dumps(manifest, sort_keys=True), file=sys.stderr)


def _print_json(payload) -> None:
    print(json.dumps(payload, sort_keys=True))


def _print_table(pairs) -> None:
    width = max(len(k) for k, _ in pairs)
    for key, val in pairs:
        print(f"{key.ljust(width)}  {val}")


def _write_text(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(x: float) -> str:
    return f"{x + 0.0:.12g}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpcq",
        description=(
            "Capacities of state-parametrized classical-quantum channels and "
            "desk-scale simulations of their random-coding schemes."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="parse and validate a channel file")
    p_val.add_argument("channel")
    p_val.add_argument("--json", action="store_true")

    p_c = sub.add_parser("causal", help="capacity with causal state knowledge")
    p_c.add_argument("channel")
    p_c.add_argument("--aux-size", type=int, default=None)
    p_c.add_argument("--eps", type=float, default=INNER_EPS)
    p_c.add_argument("--threads", type=int, default=1)
    p_c.add_argument("--json", action="store_true")

    p_nc = sub.add_parser("noncausal", help="non-causal trade-off lower bound")
    p_nc.add_argument("channel")
    p_nc.add_argument("--n", type=int, default=1)
    p_nc.add_argument("--aux-size", type=int, default=None)
    p_nc.add_argument("--restarts", type=int, default=32)
    p_nc.add_argument("--seed", type=int, default=None)
    p_nc.add_argument("--threads", type=int, default=1)
    p_nc.add_argument("--json", action="store_true")

    p_h = sub.add_parser("holevo", help="Holevo capacity of the state-averaged channel")
    p_h.add_argument("channel")
    p_h.add_argument("--eps", type=float, default=INNER_EPS)
    p_h.add_argument("--json", action="store_true")

    p_t = sub.add_parser("types", help="type-class sweeps as CSV")
    p_t.add_argument("--op", required=True, choices=["class-size", "nearest", "typical-mass", "coverage"])
    p_t.add_argument("--p", help="comma-separated pmf, e.g. 0.5,0.5")
    p_t.add_argument("--joint", help="joint pmf rows 'a,b;c,d' (states x aux) for coverage")
    p_t.add_argument("--n", required=True, help="comma-separated block lengths")
    p_t.add_argument("--delta", type=float, default=0.2)
    p_t.add_argument("--k", type=int, default=2, help="codewords per bin (coverage)")
    p_t.add_argument("--trials", type=int, default=200)
    p_t.add_argument("--seed", type=int, default=None)
    p_t.add_argument("--out", default=None)
    p_t.add_argument("--json", action="store_true")

    p_s = sub.add_parser("schur", help="Young frame tables and projector checks")
    p_s.add_argument("mode", choices=["frames", "dims", "check"])
    p_s.add_argument("--d", type=int, required=True)
    p_s.add_argument("--n", type=int, required=True)
    p_s.add_argument("--out", default=None)
    p_s.add_argument("--json", action="store_true")

    p_sim = sub.add_parser("simulate", help="rate-error sweep for a coding scheme")
    p_sim.add_argument("channel")
    p_sim.add_argument("--scheme", required=True, choices=["causal-sequential", "noncausal-sqrt"])
    p_sim.add_argument("--rates", required=True, help="comma-separated rates in bits")
    p_sim.add_argument("--n", required=True, help="comma-separated block lengths")
    p_sim.add_argument("--trials", type=int, default=50)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--k", type=int, default=2, help="codewords per bin (noncausal)")
    p_sim.add_argument("--delta", type=float, default=0.2)
    p_sim.add_argument("--restarts", type=int, default=8)
    p_sim.add_argument("--threads", type=int, default=1)
    p_sim.add_argument("--out", default=None)
    p_sim.add_argument("--json", action="store_true")

    return parser


def _require_seed(parser: argparse.ArgumentParser, args) -> None:
    if args.command in STOCHASTIC_COMMANDS and args.seed is None:
        parser.error(f"--seed is required for '{args.command}' (stochastic command)")
    if args.command == "types" and args.op == "coverage" and args.seed is None:
        parser.error("--seed is required for 'types --op coverage' (stochastic command)")


def _cmd_validate(args) -> None:
    ch = load_channel(args.channel)
    info = {
        "ok": True,
        "dim": ch.dim,
        "num_states": ch.num_states,
        "num_inputs": ch.num_inputs,
        "states": list(ch.state_alphabet),
        "inputs": list(ch.input_alphabet),
        "warnings": list(ch.warnings),
    }
    if args.json:
        _print_json(info)
    else:
        _print_table(
            [
                ("ok", "true"),
                ("dim", str(ch.dim)),
                ("states", " ".join(ch.state_alphabet)),
                ("inputs", " ".join(ch.input_alphabet)),
            ]
        )
        for text in ch.warnings:
            print(f"warning: {text}", file=sys.stderr)


def _cmd_causal(args) -> None:
    ch = load_channel(args.channel)
    sol = causal_capacity(ch, aux_size=args.aux_size, eps=args.eps, threads=args.threads)
    payload = {
        "value": sol.value,
        "gap": sol.gap,
        "aux_size": sol.aux_size,
        "q": [float(x) for x in sol.q],
        "strategy": [list(col) for col in sol.strategy.columns],
        "strategies_searched": sol.strategies_searched,
    }
    if args.json:
        _print_json(payload)
    else:
        _print_table(
            [
                ("value", _fmt(sol.value)),
                ("gap", _fmt(sol.gap)),
                ("aux_size", str(sol.aux_size)),
                ("q", " ".join(_fmt(x) for x in sol.q)),
                ("strategy", "; ".join(",".join(map(str, col)) for col in sol.strategy.columns)),
                ("strategies_searched", str(sol.strategies_searched)),
            ]
        )


def _cmd_noncausal(args) -> None:
    ch = load_channel(args.channel)
    wit = noncausal_lower_bound(
        ch,
        n=args.n,
        aux_size=args.aux_size,
        restarts=args.restarts,
        seed=args.seed,
        threads=args.threads,
    )
    payload = {
        "value": wit.value,
        "holevo": wit.holevo,
        "leak": wit.leak,
        "n": wit.n,
        "aux_size": wit.aux_size,
        "q_given_s": [[float(x) for x in row] for row in wit.q_given_s],
        "strategy": [[int(x) for x in row] for row in wit.strategy],
        "restart_index": wit.restart_index,
        "restarts": wit.restarts,
    }
    if args.json:
        _print_json(payload)
    else:
        _print_table(
            [
                ("value", _fmt(wit.value)),
                ("holevo", _fmt(wit.holevo)),
                ("leak", _fmt(wit.leak)),
                ("n", str(wit.n)),
                ("aux_size", str(wit.aux_size)),
                ("restart_index", str(wit.restart_index)),
            ]
        )


def _cmd_holevo(args) -> None:
    ch = load_channel(args.channel)
    states = np.einsum("s,sxij->xij", ch.p.probs, ch.tensor())
    sol = inner_maximize(states, eps=args.eps)
    payload = {
        "value": sol.value,
        "gap": sol.gap,
        "q": [float(x) for x in sol.q],
        "iterations": sol.iterations,
    }
    if args.json:
        _print_json(payload)
    else:
        _print_table(
            [
                ("value", _fmt(sol.value)),
                ("gap", _fmt(sol.gap)),
                ("q", " ".join(_fmt(x) for x in sol.q)),
            ]
        )


def _best_type(p: np.ndarray, n: int) -> np.ndarray:
    support = int(np.sum(p > 0))
    if is_exact_type(p, n) or n >= support * support:
        return nearest_type(p, n)
    return nearest_type_exhaustive(p, n)


def _types_rows(args) -> list[dict]:
    ns = _parse_ints(args.n)
    rows: list[dict] = []
    if args.op == "coverage":
        if args.joint is None:
            raise GpcqError("types --op coverage requires --joint")
        joint = _parse_matrix(args.joint)
        joint = joint / joint.sum()
        for n in ns:
            res = coverage_probability(
                joint, n, args.k, args.delta, trials=args.trials, seed=args.seed
            )
            if not res.hypotheses_hold:
                print(f"note: n={n}: {res.hypothesis_note}", file=sys.stderr)
            rows.append(
                {"n": n, "value": res.estimate, "lower_bound": res.ci_low, "upper_bound": res.ci_high}
            )
        return rows
    if args.p is None:
        raise GpcqError(f"types --op {args.op} requires --p")
    p = np.asarray(_parse_floats(args.p), dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise GpcqError("--p must be a probability vector summing to 1")
    for n in ns:
        if args.op == "class-size":
            counts = _best_type(p, n)
            res = type_class_size(counts)
            rows.append(
                {
                    "n": n,
                    "value": res.size,
                    "lower_bound": res.lower,
                    "upper_bound": res.upper,
                }
            )
        elif args.op == "nearest":
            counts = _best_type(p, n)
            dist = float(np.abs(counts / n - p).sum())
            support = int(np.sum(p > 0))
            rows.append(
                {"n": n, "value": dist, "lower_bound": 0.0, "upper_bound": 2.0 * support / n}
            )
        else:
            mass = typical_mass(p, args.delta, n)
            guaranteed = max(0.0, 1.0 - 2.0 ** (-n * args.delta / 2.0))
            rows.append({"n": n, "value": mass, "lower_bound": guaranteed, "upper_bound": 1.0})
    return rows


def _cmd_types(args) -> None:
    rows = _types_rows(args)
    if args.json:
        _print_json({"op": args.op, "rows": rows})
        return
    lines = ["n,value,lower_bound,upper_bound"]
    for row in rows:
        value = row["value"]
        value_text = str(value) if isinstance(value, int) else _fmt(value)
        lines.append(
            f"{row['n']},{value_text},{_fmt(row['lower_bound'])},{_fmt(row['upper_bound'])}"
        )
    _write_text("\n".join(lines) + "\n", args.out)


def _schur_rows(args) -> list[dict]:
    rows = []
    for frame in young_frames(args.d, args.n):
        dim = irrep_dimension(frame)
        if args.mode == "dims":
            dim = dim * gl_multiplicity(frame, args.d)
        bounds = frame_dimension_bounds(frame, args.d)
        rows.append(
            {
                "frame": "+".join(map(str, frame)),
                "dim": dim,
                "entropy": shannon_entropy(frame_distribution(frame, args.d)) + 0.0,
                "lower": bounds.lower,
                "upper": bounds.upper,
            }
        )
    return rows


def _cmd_schur(args) -> None:
    if args.mode == "check":
        dim = args.d**args.n
        total = np.zeros((dim, dim), dtype=complex)
        worst_idem = 0.0
        worst_cross = 0.0
        projectors = []
        for frame in young_frames(args.d, args.n):
            proj = central_projector(frame, args.d, args.n)
            projectors.append(proj)
            worst_idem = max(worst_idem, float(np.max(np.abs(proj @ proj - proj))))
            total += proj
        for i in range(len(projectors)):
            for j in range(i + 1, len(projectors)):
                worst_cross = max(
                    worst_cross, float(np.max(np.abs(projectors[i] @ projectors[j])))
                )
        closure = float(np.max(np.abs(total - np.eye(dim))))
        ok = max(closure, worst_idem, worst_cross) <= TAU_PROJ
        payload = {
            "ok": bool(ok),
            "frames": len(projectors),
            "dim": dim,
            "closure_defect": closure,
            "idempotency_defect": worst_idem,
            "orthogonality_defect": worst_cross,
        }
        if args.json:
            _print_json(payload)
        else:
            _print_table([(k, _fmt(v) if isinstance(v, float) else str(v)) for k, v in payload.items()])
        if not ok:
            raise GpcqError(f"projector defects exceed {TAU_PROJ}")
        return
    rows = _schur_rows(args)
    if args.json:
        _print_json({"mode": args.mode, "rows": rows})
        return
    lines = ["frame,dim,entropy,lower,upper"]
    for row in rows:
        lines.append(
            f"{row['frame']},{row['dim']},{_fmt(row['entropy'])},"
            f"{_fmt(row['lower'])},{_fmt(row['upper'])}"
        )
    _write_text("\n".join(lines) + "\n", args.out)


def _cmd_simulate(args) -> None:
    ch = load_channel(args.channel)
    rows = simulate_rate_error_curve(
        ch,
        args.scheme,
        rates=_parse_floats(args.rates),
        n_list=_parse_ints(args.n),
        trials=args.trials,
        seed=args.seed,
        K=args.k,
        delta=args.delta,
        restarts=args.restarts,
        threads=args.threads,
    )
    if args.json:
        _print_json({"rows": [row.__dict__ for row in rows]})
        return
    _write_text(rows_to_csv(rows), args.out)


HANDLERS = {
    "validate": _cmd_validate,
    "causal": _cmd_causal,
    "noncausal": _cmd_noncausal,
    "holevo": _cmd_holevo,
    "types": _cmd_types,
    "schur": _cmd_schur,
    "simulate": _cmd_simulate,
}


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _require_seed(parser, args)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0
    started = time.monotonic()
    channel_path = getattr(args, "channel", None)
    seed = getattr(args, "seed", None)
    try:
        HANDLERS[args.command](args)
    except GpcqError as exc:
        message = {"error": exc.code, "message": str(exc), "details": repr(exc.details)}
        print(json.dumps(message, sort_keys=True), file=sys.stderr)
        _emit_manifest(argv, channel_path if channel_path else None, seed, started)
        return 1
    except OSError as exc:
        message = {"error": "io", "message": str(exc)}
        print(json.dumps(message, sort_keys=True), file=sys.stderr)
        _emit_manifest(argv, channel_path if channel_path else None, seed, started)
        return 1
    _emit_manifest(argv, channel_path, seed, started)
    return 0


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
