"""darwinlab command line: PIP scans, random-instance certification, backflow
series, redundancy sweeps and recovery checks, all as CSV.

Exit codes: 0 success, 1 usage or runtime error, 2 a certified violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .channels import (afw_scenario, amplitude_damping, apply, dephasing, depolarizing, holevo_monotonicity_check,
                       petz_recovery, random_channel, recovery_bound_check, unitary_channel)
from .darwinism import QUANTITIES, SamplingConfig, pip_scan, plateau_detect
from .errors import DarwinLabError, DegenerateInputError
from .infotheory import OptimizerConfig, conditional_mutual_information, mutual_information
from .nonmarkov import (ANCILLA_MODES, ModelConfig, blp_series, cmi_backflow_series,
                        redundancy_vs_nonmarkovianity_sweep, run_model)
from .states import (QState, RandomSpec, fragment_ids, ghz_state, ginibre_dm, haar_unitary,
                     overlap_branching_state, product_state, random_ensemble, rng_for)
from .tensor import HilbertSpace, SubsystemLabel

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2
CERT_TOL = 1e-9
CHECKS = ("ssa", "dpi", "holevo-mono", "afw", "recovery")
PIP_MODELS = ("ghz", "product", "branching", "collision", "spinstar")
RECOVERY_CHANNELS = ("random", "depolarizing", "dephasing", "amplitude-damping", "unitary")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------- #
# Output
# --------------------------------------------------------------------------- #


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        return format(float(x) + 0.0, ".12g")
    return str(x)


@dataclass
class Table:
    header: Sequence[str]
    rows: list
    summary: list

    def render(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([fmt(v) for v in r])
        for key, val in self.summary:
            buf.write(f"#{key}={fmt(val)}\n")
        return buf.getvalue()


def _threads(args) -> int:
    n = args.threads
    if n is None:
        n = int(os.environ.get("DARWINLAB_THREADS", "1") or 1)
    return os.cpu_count() or 1 if n == 0 else max(1, n)


def _map(fn: Callable, items, threads: int) -> list:
    # results come back in input order, so thread count never changes the output
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------- #
# pip
# --------------------------------------------------------------------------- #


def build_state(model: str, n_env: int, overlap: float = 0.5, g: float = 0.0, steps: Optional[int] = None,
                se_coupling: float = math.pi) -> QState:
    if model == "ghz":
        return ghz_state(n_env)
    if model == "product":
        plus = QState.from_ket(HilbertSpace.qubits("S"), np.array([1, 1]) / math.sqrt(2))
        zero = [QState.from_ket(HilbertSpace.qubits(f), np.array([1, 0])) for f in fragment_ids(n_env)]
        return product_state([plus] + zero)
    if model == "branching":
        return overlap_branching_state(n_env, overlap)
    kind = "collision" if model == "collision" else "spin_star"
    steps = n_env if steps is None else steps
    return run_model(ModelConfig(kind, n_env, se_coupling, g, steps)).final


def cmd_pip(args) -> tuple[Table, int]:
    state = build_state(args.model, args.n_env, args.overlap, args.g, args.steps, args.se_coupling)
    sampling = SamplingConfig(args.exhaustive_cap, args.n_subsets, args.seed)
    opt = OptimizerConfig(starts=args.starts, seed=args.seed)
    curve = pip_scan(state, fragment_ids(args.n_env), args.quantity, sampling, opt=opt)
    rows = [(p.ell, p.mean_I, p.std_I, p.n_subsets_sampled, curve.h_s) for p in curve.points]
    summary = []
    try:
        rep = plateau_detect(curve, args.delta)
        summary = [("f_delta", rep.f_delta_size), ("r_delta", rep.redundancy), ("plateau_found", rep.plateau_found)]
    except DegenerateInputError:
        summary = [("f_delta", None), ("r_delta", 0.0), ("plateau_found", False)]
    header = ("ell", "mean_i_bits", "std_i_bits", "n_subsets", "h_s_bits")
    return Table(header, rows, summary), EXIT_OK


# --------------------------------------------------------------------------- #
# certify
# --------------------------------------------------------------------------- #


def _qubits(*ids) -> HilbertSpace:
    return HilbertSpace.qubits(*ids)


def _random_mixed(space: HilbertSpace, rng) -> QState:
    rank = int(rng.integers(1, space.total_dim + 1))
    return QState(space, rho=ginibre_dm(space.total_dim, rank, rng))


def _random_channel(d_in: int, d_out: int, rng):
    # an isometry into d_out * n_kraus needs at least d_in dimensions
    least = -(-d_in // d_out)
    return random_channel(d_in, d_out, int(rng.integers(least, least + 4)), rng)


def sample_ssa(seed: int, i: int) -> list[tuple]:
    rng = rng_for(seed, "certify/ssa", i)
    dims = [int(d) for d in rng.integers(2, 4, size=3)]
    space = HilbertSpace(tuple(SubsystemLabel(x, d) for x, d in zip("ABC", dims)))
    st = _random_mixed(space, rng)
    lhs = conditional_mutual_information(st, ["A"], ["B"], ["C"])
    return [("ssa", i, lhs, 0.0)]


def sample_dpi(seed: int, i: int) -> list[tuple]:
    rng = rng_for(seed, "certify/dpi", i)
    d_b = int(rng.integers(2, 4))
    space = HilbertSpace((SubsystemLabel("A", 2), SubsystemLabel("B", d_b)))
    st = _random_mixed(space, rng)
    ch = _random_channel(d_b, int(rng.integers(2, 4)), rng)
    out = apply(ch, st, ["B"])
    return [("dpi", i, mutual_information(st, ["A"], ["B"]), mutual_information(out, ["A"], ["B"]))]


def sample_holevo(seed: int, i: int) -> list[tuple]:
    rng = rng_for(seed, "certify/holevo-mono", i)
    d = int(rng.integers(2, 4))
    space = HilbertSpace((SubsystemLabel("X", d),))
    e = random_ensemble(RandomSpec("random_pointer_ensemble", seed=int(rng.integers(2**63)),
                                   size=int(rng.integers(2, 5))), space)
    ch = _random_channel(d, int(rng.integers(2, 4)), rng)
    r = holevo_monotonicity_check(e, ch)
    return [("holevo-mono", i, r.chi_in, r.chi_out)]


def sample_afw(seed: int, i: int, max_draws: int = 64) -> list[tuple]:
    """Random S F1 F2 state, random F1F2 unitary, eps uniform in [0, 0.3].

    Instances whose kick cannot reach the requested eps are redrawn from the
    next substream so every sample tests the requested deviation.
    """
    space = _qubits("S", "F1", "F2")
    for attempt in range(max_draws):
        rng = rng_for(seed, f"certify/afw/{attempt}", i)
        eps = float(rng.uniform(0, 0.3))
        st = _random_mixed(space, rng)
        u = haar_unitary(4, rng)
        try:
            r = afw_scenario(st, u, eps)
        except DegenerateInputError:
            continue
        return [("afw-mi", i, r.mi_gain, r.mi_bound), ("afw-cmi", i, r.cmi, r.cmi_bound)]
    raise DarwinLabError(f"afw sample {i}: no attainable instance in {max_draws} draws")


def _signed_rows(rows, upper: bool) -> list[tuple]:
    # upper: lhs <= rhs is the certified direction; otherwise lhs >= rhs
    out = []
    for check, i, lhs, rhs in rows:
        margin = (rhs - lhs) if upper else (lhs - rhs)
        out.append((check, i, lhs, rhs, margin, margin >= -CERT_TOL))
    return out


def _recovery_instance(rng, channel: str, param: float):
    e = random_ensemble(RandomSpec("random_pointer_ensemble", seed=int(rng.integers(2**63)),
                                   size=int(rng.integers(2, 4))), _qubits("X"))
    if channel == "random":
        ch = _random_channel(2, 2, rng)
    elif channel == "depolarizing":
        ch = depolarizing(2, param)
    elif channel == "dephasing":
        ch = dephasing(2, param)
    elif channel == "amplitude-damping":
        ch = amplitude_damping(param)
    else:
        ch = unitary_channel(haar_unitary(2, rng))
    return e, ch


def sample_recovery(seed: int, i: int, channel: str = "random", param: float = 0.3) -> list[tuple]:
    rng = rng_for(seed, f"certify/recovery/{channel}", i)
    e, ch = _recovery_instance(rng, channel, param)
    r = recovery_bound_check(e, ch, petz_recovery(ch, e.average()))
    return [("recovery", i, r.lhs_bits, r.rhs_bits)]


SAMPLERS = {
    "ssa": (sample_ssa, False),
    "dpi": (sample_dpi, False),
    "holevo-mono": (sample_holevo, False),
    "afw": (sample_afw, True),
    "recovery": (sample_recovery, False),
}


def certify_rows(check: str, samples: int, seed: int, threads: int = 1) -> list[tuple]:
    fn, upper = SAMPLERS[check]
    raw = _map(lambda i: fn(seed, i), range(samples), threads)
    return _signed_rows([r for rows in raw for r in rows], upper)


def cmd_certify(args) -> tuple[Table, int]:
    checks = CHECKS if args.check == "all" else (args.check,)
    rows = []
    for c in checks:
        rows += certify_rows(c, args.samples, args.seed, _threads(args))
    failed = sum(1 for r in rows if not r[5])
    summary = [("rows", len(rows)), ("violations", failed),
               ("min_margin", min((r[4] for r in rows), default=None))]
    header = ("check_id", "sample", "lhs", "rhs", "margin", "passed")
    return Table(header, rows, summary), EXIT_VIOLATION if failed else EXIT_OK


def cmd_recovery(args) -> tuple[Table, int]:
    def one(i):
        rng = rng_for(args.seed, f"recovery/{args.channel}", i)
        e, ch = _recovery_instance(rng, args.channel, args.param)
        return recovery_bound_check(e, ch, petz_recovery(ch, e.average()))
    reps = _map(one, range(args.samples), _threads(args))
    rows = [(i, r.chi_in_bits, r.chi_out_bits, r.rhs_bits, r.margin, r.satisfied) for i, r in enumerate(reps)]
    failed = sum(1 for r in reps if not r.satisfied)
    header = ("sample", "chi_in_bits", "chi_out_bits", "rhs_bits", "margin", "passed")
    return Table(header, rows, [("violations", failed)]), EXIT_VIOLATION if failed else EXIT_OK


# --------------------------------------------------------------------------- #
# backflow and sweep
# --------------------------------------------------------------------------- #


def _model_config(args) -> ModelConfig:
    kind = {"collision": "collision", "spinstar": "spin_star"}[args.model]
    steps = args.n_env if args.steps is None else args.steps
    return ModelConfig(kind, args.n_env, args.se_coupling, args.g, steps, seed=args.seed)


def cmd_backflow(args) -> tuple[Table, int]:
    cfg = _model_config(args)
    b = blp_series(cfg)
    rows, cmi_total = [], None
    if args.ancilla != "none":
        e_sub = args.e_sub.split(",") if args.e_sub else None
        c = cmi_backflow_series(cfg, args.ancilla, e_sub)
        cmi_total = c.cmi_backflow_total
        rows = list(zip(b.times, b.trace_distance, c.cmi))
    else:
        rows = [(t, d, None) for t, d in zip(b.times, b.trace_distance)]
    summary = [("blp_total", b.blp_total), ("cmi_backflow_total", cmi_total)]
    return Table(("t", "trace_distance", "cmi_bits"), rows, summary), EXIT_OK


def cmd_sweep(args) -> tuple[Table, int]:
    g_values = [float(x) for x in args.g_list.split(",") if x.strip()]
    checks = [c for c in args.checks.split(",") if c and c != "none"]
    bad = set(checks) - {"bound22", "bound29"}
    if bad:
        raise UsageError(f"unknown checks {sorted(bad)}")
    cfg = _model_config(args)
    opt = OptimizerConfig(starts=args.starts, seed=args.seed)
    threads = _threads(args)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            table = redundancy_vs_nonmarkovianity_sweep(cfg, g_values, args.delta, checks, opt, ex)
    else:
        table = redundancy_vs_nonmarkovianity_sweep(cfg, g_values, args.delta, checks, opt)
    rows = [(r.g, r.r_delta, r.blp_total, r.cmi_backflow_total, r.bound22_ok, r.bound29_ok) for r in table]
    violated = any(v is False for r in table for v in (r.bound22_ok, r.bound29_ok))
    header = ("g", "r_delta", "blp_total", "cmi_backflow_total", "bound22_ok", "bound29_ok")
    return Table(header, rows, []), EXIT_VIOLATION if violated else EXIT_OK


# --------------------------------------------------------------------------- #
# Parsing
# --------------------------------------------------------------------------- #


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed {text} is not a 64-bit unsigned integer")
    return v


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.add_argument("--config", default=None, help="key=value file; flags override its values")
    p.add_argument("--threads", type=int, default=None, help="0 = auto; falls back to DARWINLAB_THREADS")
    return p


def _model_flags(p: argparse.ArgumentParser, models: Sequence[str], default: str):
    p.add_argument("--model", choices=models, default=default)
    p.add_argument("--n-env", type=int, default=6)
    p.add_argument("--g", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=None, help="defaults to n-env")
    p.add_argument("--se-coupling", type=float, default=math.pi)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="darwinlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pip", parents=[common], help="partial-information scan and plateau detection")
    _model_flags(p, PIP_MODELS, "ghz")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--quantity", choices=QUANTITIES, default="symmetric_I")
    p.add_argument("--overlap", type=float, default=0.5, help="branch overlap for --model branching")
    p.add_argument("--n-subsets", type=int, default=200)
    p.add_argument("--exhaustive-cap", type=int, default=10_000)
    p.add_argument("--starts", type=int, default=32)
    p.set_defaults(func=cmd_pip)

    p = sub.add_parser("certify", parents=[common], help="random-instance inequality certification")
    p.add_argument("--check", choices=CHECKS + ("all",), default="all")
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("backflow", parents=[common], help="trace-distance and CMI backflow series")
    _model_flags(p, ("collision", "spinstar"), "collision")
    p.add_argument("--ancilla", choices=ANCILLA_MODES, default="maxent")
    p.add_argument("--e-sub", default=None, help="comma-separated fragment ids (default: all)")
    p.set_defaults(func=cmd_backflow)

    p = sub.add_parser("sweep", parents=[common], help="redundancy against intra-environment coupling")
    _model_flags(p, ("collision", "spinstar"), "collision")
    p.add_argument("--g-list", default="0,0.3,0.8")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--checks", default="none", help="comma list of bound22, bound29, or none")
    p.add_argument("--starts", type=int, default=32)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("recovery", parents=[common], help="Petz recovery bound on random ensembles")
    p.add_argument("--channel", choices=RECOVERY_CHANNELS, default="random")
    p.add_argument("--param", type=float, default=0.3)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_recovery)
    return parser


def read_config(path: str) -> list[tuple[str, str]]:
    items = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            items.append((key.replace("_", "-").lstrip("-"), val))
    return items


def _config_tokens(parser: argparse.ArgumentParser, command: str, items) -> list[str]:
    subparser = parser._subparsers._group_actions[0].choices[command]
    tokens = []
    for key, val in items:
        action = subparser._option_string_actions.get("--" + key)
        if action is None or key == "config":
            raise UsageError(f"config key {key!r} is not a {command} option")
        tokens += ["--" + key, val]
    return tokens


def parse(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        items = read_config(args.config)
        # config values go first so explicit flags win (last occurrence)
        argv = list(argv)
        pos = argv.index(args.command)
        args = parser.parse_args(argv[:pos + 1] + _config_tokens(parser, args.command, items) + argv[pos + 1:])
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
        table, code = args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    except (DarwinLabError, ValueError, OSError) as exc:
        print(f"darwinlab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = table.render()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
