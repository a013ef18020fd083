"""Command-line entry point: ``antisymrnn <subcommand> ...``.

Exit codes: 0 success, 1 invalid input (one line on stderr), 2 numerical
failure (divergence or eigensolver non-convergence).
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import analysis, cells, data, ode, optim, spectral
from .core import ConvergenceError, DivergenceError, format_float, read_matrix_csv

GRADCHECK_TOL = 1e-6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_eig(args) -> int:
    spectrum = spectral.eigenvalues(read_matrix_csv(args.matrix))
    lines = ["re,im,modulus"]
    for v in spectrum:
        lines.append(f"{format_float(v.real)},{format_float(v.imag)},{format_float(abs(v))}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    spec = ode.named_system(args.system, gamma=args.gamma, seed=args.seed, gaussian_input=args.input == "gaussian")
    trajectories = ode.phase_portrait(spec, ode.Grid.parse(args.grid), args.epsilon, args.steps)
    lines = ["traj_id,t,h0,h1"]
    for k, traj in enumerate(trajectories):
        for t, (a, b) in enumerate(traj.points):
            lines.append(f"{k},{t},{format_float(a)},{format_float(b)}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_params(args) -> int:
    print(cells.param_count(args.cell, args.n, args.m, args.classes))
    return 0


def cmd_gradcheck(args) -> int:
    kinds = [k.value for k in cells.CellKind] if args.cell == "all" else [cells.CellKind(args.cell).value]
    worst = 0.0
    print("cell,max_rel_err")
    for kind in kinds:
        err = analysis.gradcheck_case(kind, args.n, args.m, args.t, args.seed, args.delta, args.epsilon, args.gamma)
        worst = max(worst, err)
        print(f"{kind},{format_float(err)}")
    return 0 if worst < GRADCHECK_TOL else 2


def cmd_train(args) -> int:
    with open(args.config) as fh:
        values = optim.parse_config_text(fh.read())
    for key in optim.RunConfig.keys():
        override = getattr(args, key)
        if override is not None:
            values[key] = override
    config = optim.RunConfig.from_mapping(values)
    train_set, test_set = data.load_dataset(config.dataset, data.parse_dataset_args(config.dataset_args))
    try:
        net, history = optim.train(config, train_set, test_set)
    except DivergenceError as exc:
        if exc.history is not None:
            _emit(exc.history.to_csv(), config.history_out or None)
        raise
    _emit(history.to_csv(), config.history_out or None)
    if args.checkpoint_out:
        optim.save_checkpoint(net, args.checkpoint_out)
    return 0


def cmd_spectrum(args) -> int:
    cfg = analysis.SweepConfig(
        kinds=_str_list(args.cell_list), gamma_list=_float_list(args.gamma_list), t_list=_int_list(args.t_list),
        n=args.n, m=args.m, epsilon=args.epsilon, sigma_w=args.sigma_w, samples=args.samples, seed=args.seed,
        checkpoint=args.checkpoint,
    )
    rows = analysis.spectrum_sweep(cfg, threads=args.threads)
    _emit("\n".join([analysis.SWEEP_HEADER] + [r.csv() for r in rows]) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="antisymrnn", description="Antisymmetric recurrent networks: spectra, simulation, training.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    kinds = [k.value for k in cells.CellKind]

    def add(name, help_text, func):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--threads", type=int, default=1, help="worker threads (output does not depend on it)")
        p.set_defaults(func=func)
        return p

    p = add("eig", "eigenvalues of a square matrix given as CSV", cmd_eig)
    p.add_argument("--matrix", required=True, help="input CSV, one row per line")
    p.add_argument("--out", help="output CSV (default stdout)")

    p = add("simulate", "forward-Euler phase portrait of a 2-D system", cmd_simulate)
    p.add_argument("--system", required=True, choices=ode.SYSTEMS)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--grid", required=True, help="MIN:MAX:K initial conditions per axis")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--input", choices=["gaussian"], help="drive the system with standard Gaussian input")
    p.add_argument("--out", required=True)

    p = add("params", "trainable parameter count of a classifier", cmd_params)
    p.add_argument("--cell", required=True, choices=kinds)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--classes", type=int, required=True)

    p = add("gradcheck", "compare BPTT against central differences", cmd_gradcheck)
    p.add_argument("--cell", required=True, choices=kinds + ["all"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.01, help="used by cells with diffusion only")

    p = add("train", "train a classifier from a key=value config", cmd_train)
    p.add_argument("--config", required=True)
    for key in optim.RunConfig.keys():
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, help=f"override config key {key}")
    p.add_argument("--checkpoint-out", help="write the trained net (npz)")

    p = add("spectrum", "end-to-end Jacobian eigenvalue statistics", cmd_spectrum)
    p.add_argument("--cell-list", required=True, help="comma-separated cell kinds")
    p.add_argument("--gamma-list", required=True, help="comma-separated diffusion values")
    p.add_argument("--t-list", required=True, help="comma-separated sequence lengths")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--sigma-w", type=float, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint", help="analyze a trained net instead of fresh initializations")
    p.add_argument("--m", type=int, default=96, help="input width of the noise sequence")
    return parser


def _join_grid(argv: list[str]) -> list[str]:
    # "--grid -2:2:5" would otherwise read the negative bound as a flag
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--grid":
            out.append("--grid=" + next(it, ""))
        else:
            out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(message)s")
    try:
        argv = _join_grid(list(sys.argv[1:] if argv is None else argv))
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        return args.func(args)
    except (DivergenceError, ConvergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}".splitlines()[0], file=sys.stderr)
        return 2
    except (UsageError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}".splitlines()[0], file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
