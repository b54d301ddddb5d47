"""Command-line entry point: ``qsemis {solve,bench-er,resources,crossover,oracle}``.

Exit codes: 0 success, 2 configuration error, 3 infeasible size, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .estimator import (
    METHODS,
    crossover_size,
    favourable_threshold,
    fit_fermi_dirac,
    method_cost,
    qse_favourable,
)
from .graph import (
    RNG_ALGORITHM,
    GraphError,
    InfeasibleSizeError,
    brute_force_mis,
    generate_er,
    load_fixture,
    read_graph,
)
from .hamiltonian import cost_diagonal
from .linalg import NumericalError
from .pipeline import (
    RunConfig,
    bench_rows,
    mean_fidelities,
    read_bench_csv,
    result_document,
    run_pipeline,
    write_bench_csv,
)
from .qaoa import optimize_layerwise

EXIT_CONFIG, EXIT_SIZE, EXIT_NUMERIC = 2, 3, 4

log = logging.getLogger("qsemis")


class ConfigError(ValueError):
    pass


def int_list(text: str) -> list[int]:
    """'1,2,4,8' or '2-10' (inclusive) or a mix of both."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty integer list {text!r}")
    return out


def read_config_file(path: str, parser: argparse.ArgumentParser) -> dict:
    """Flat ``key = value`` document; keys mirror the long flags."""
    types = {a.dest: a.type for a in parser._actions if a.dest != "help"}
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        dest = key.replace("-", "_")
        if dest not in types:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        conv = types[dest] or str
        try:
            values[dest] = conv(value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    return values


def _add_run_options(p: argparse.ArgumentParser, bench: bool = False):
    p.add_argument("--config", type=str, default=None, help="flat key = value file; flags override it")
    if not bench:
        src = p.add_argument_group("graph source")
        src.add_argument("--graph", type=str, default="", help="edge-list file")
        src.add_argument("--fixture", type=str, default="", help="named fixture: g3 or k33p")
        src.add_argument("--er", type=str, default="", help="N,RHO,SEED")
    p.add_argument("--layers", type=int, default=20)
    p.add_argument("--starts", type=int, default=8, help="multi-starts per layer")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-evals", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-list", type=int_list, default=[1, 2, 4, 8])
    p.add_argument("--epsilon-cut", type=float, default=1e-3)
    p.add_argument("--kernel-mode", type=str, choices=("exact", "sampled"), default="exact")
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--max-qubits", type=int, default=24)
    p.add_argument("--out", type=str, default="-")
    if bench:
        p.add_argument("--sizes", type=int_list, default=list(range(2, 11)))
        p.add_argument("--graphs", type=int, default=14)
        p.add_argument("--rho", type=float, default=0.5)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--format", type=str, choices=("csv",), default="csv")
    else:
        p.add_argument("--top", type=int, default=16, help="bitstrings kept in probability tables")
        p.add_argument("--format", type=str, choices=("json",), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsemis", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qsemis {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="oracle, QAOA and QSE on one graph (JSON)")
    _add_run_options(p)

    p = sub.add_parser("bench-er", help="Erdos-Renyi sweep (CSV)")
    _add_run_options(p, bench=True)

    p = sub.add_parser("resources", help="gate counts per kernel-evaluation method")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--l-prime", type=int, default=20)
    p.add_argument("--epsilon", type=float, default=1e-10)
    p.add_argument("--p", type=int, default=2, help="RTE stencil order")
    p.add_argument("--h2", type=float, default=None, help="<H_C^2> estimate for LCU")
    p.add_argument("--qaoa-energy", type=float, default=None, help="QAOA <H_C>; LCU then uses its square")
    p.add_argument("--graph", type=str, default="", help="run QAOA on this graph to obtain <H_C>^2")
    p.add_argument("--fixture", type=str, default="")
    p.add_argument("--er", type=str, default="")
    p.add_argument("--format", type=str, choices=("csv", "text"), default="text")
    p.add_argument("--out", type=str, default="-")

    p = sub.add_parser("crossover", help="fit fidelity curves from a bench CSV and extrapolate N*")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--bench", type=str, required=True, help="CSV written by bench-er")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--f-scale", type=float, default=None,
                   help="circuit-cost multiplier of a kernel element; enables the per-N favourability check")
    p.add_argument("--max-n", type=int, default=10_000)
    p.add_argument("--format", type=str, choices=("json", "text"), default="json")
    p.add_argument("--out", type=str, default="-")

    p = sub.add_parser("oracle", help="exhaustive MIS of one graph (JSON)")
    p.add_argument("--graph", type=str, default="")
    p.add_argument("--fixture", type=str, default="")
    p.add_argument("--er", type=str, default="")
    p.add_argument("--max-n", type=int, default=24)
    p.add_argument("--out", type=str, default="-")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub = parser._subparsers._group_actions[0].choices[args.command]
        file_values = read_config_file(args.config, sub)
        tokens = list(argv) if argv is not None else sys.argv[1:]
        explicit = _explicit_dests(sub, tokens[tokens.index(args.command) + 1:])
        for key, value in file_values.items():
            if key not in explicit:
                setattr(args, key, value)
    return args


def _explicit_dests(sub: argparse.ArgumentParser, tokens: list[str]) -> set[str]:
    flags = {}
    for a in sub._actions:
        for opt in a.option_strings:
            flags[opt] = a.dest
    return {flags[t.split("=", 1)[0]] for t in tokens if t.split("=", 1)[0] in flags}


def resolve_graph(args) -> tuple:
    chosen = [x for x in (args.graph, args.fixture, args.er) if x]
    if len(chosen) != 1:
        raise ConfigError("give exactly one of --graph, --fixture, --er")
    if args.graph:
        return read_graph(args.graph), f"file:{args.graph}"
    if args.fixture:
        return load_fixture(args.fixture), f"fixture:{args.fixture}"
    try:
        n, rho, seed = args.er.split(",")
        return generate_er(int(n), float(rho), int(seed)), f"er:{args.er}"
    except ValueError as exc:
        if isinstance(exc, GraphError):
            raise
        raise ConfigError(f"--er expects N,RHO,SEED, got {args.er!r}") from None


def run_config_from(args, **extra) -> RunConfig:
    names = set(RunConfig.field_names())
    values = {k: v for k, v in vars(args).items() if k in names}
    values.update(extra)
    cfg = RunConfig(**values)
    if cfg.kernel_mode == "sampled" and cfg.shots < 2:
        raise ConfigError("--kernel-mode sampled needs --shots >= 2")
    if any(k < 1 for k in cfg.k_list):
        raise ConfigError("every K must be >= 1")
    return cfg


def emit(text: str, out: str):
    if out in ("-", ""):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_solve(args) -> int:
    g, source = resolve_graph(args)
    cfg = run_config_from(args, graph=args.graph or (f"fixture:{args.fixture}" if args.fixture else ""))
    res = run_pipeline(g, cfg)
    doc = result_document(res, cfg, source)
    emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def cmd_bench(args) -> int:
    cfg = run_config_from(args)
    if max(cfg.sizes) > cfg.max_qubits:
        raise InfeasibleSizeError(f"size {max(cfg.sizes)} exceeds the statevector bound {cfg.max_qubits}")
    emit(write_bench_csv(bench_rows(cfg), cfg), args.out)
    return 0


def resources_table(n: int, rho: float, l_prime: int, epsilon: float, p: int, h2: float | None):
    """One row per method; the LCU row is NaN when no <H_C^2> estimate is available."""
    rows = []
    for m in METHODS:
        if m == "LCU" and h2 is None:
            rows.append({"method": m, "cnot": math.nan, "t": math.nan, "toffoli": math.nan, "ancillas": math.nan})
            continue
        rc = method_cost(m, n, rho, l_prime, epsilon, p, h2)
        rows.append({"method": m, "cnot": rc.cnot, "t": rc.t_gates, "toffoli": rc.toffoli,
                     "ancillas": rc.ancillas})
    return h2, rows


def lcu_h2(args) -> float | None:
    """<H_C^2> lower bound <H_C>^2, from an explicit value or a default QAOA run."""
    if args.h2 is not None:
        return args.h2
    if args.qaoa_energy is not None:
        return args.qaoa_energy ** 2
    if args.graph or args.fixture or args.er:
        g, _ = resolve_graph(args)
        cfg = RunConfig()
        return optimize_layerwise(cost_diagonal(g, max_qubits=cfg.max_qubits), config=cfg.optimizer()).energy ** 2
    return None


def cmd_resources(args) -> int:
    try:
        h2, rows = resources_table(args.n, args.rho, args.l_prime, args.epsilon, args.p, lcu_h2(args))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    echo = f"# N={args.n} rho={args.rho} l_prime={args.l_prime} epsilon={args.epsilon} p={args.p} h2={h2}"
    cols = ("method", "cnot", "t", "toffoli", "ancillas")
    lines = [echo]
    if h2 is None:
        lines.append("# LCU row needs --h2, --qaoa-energy or a graph source")
    if args.format == "csv":
        lines.append(",".join(cols))
        lines += [",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols) for r in rows]
    else:
        lines.append(f"{'method':<8}{'cnot':>16}{'t':>16}{'toffoli':>12}{'ancillas':>12}")
        lines += [f"{r['method']:<8}{r['cnot']:>16.6g}{r['t']:>16.6g}{r['toffoli']:>12.6g}{r['ancillas']:>12.6g}"
                  for r in rows]
    emit("\n".join(lines) + "\n", args.out)
    return 0


def crossover_report(rows: list[dict], K: int, rho: float, f_scale: float | None, max_n: int) -> dict:
    qaoa_pts = mean_fidelities(rows, "qaoa", 0)
    qse_pts = mean_fidelities(rows, "qse", K)
    if len(qaoa_pts) < 3 or len(qse_pts) < 3:
        raise ConfigError(f"need >= 3 sizes with QAOA and QSE(K={K}) rows, got {len(qaoa_pts)}/{len(qse_pts)}")
    fq, fs = fit_fermi_dirac(qaoa_pts), fit_fermi_dirac(qse_pts)
    n_star = crossover_size(fq, fs, K, rho, max_n)
    l_primes = sorted(r["l_prime"] for r in rows if r["method"] == "qaoa")
    l_prime = max(1, int(round(l_primes[len(l_primes) // 2])))
    per_n = [
        {"n": n, "qaoa": a, "qse": b,
         "favourable": None if f_scale is None else qse_favourable(b, a, K, l_prime, f_scale)}
        for (n, a), (_, b) in zip(qaoa_pts, qse_pts)
    ]
    return {
        "K": K, "rho": rho, "f_scale": f_scale,
        "fit_qaoa": {"alpha": fq.alpha, "beta": fq.beta, "residual": fq.residual, "low_confidence": fq.low_confidence},
        "fit_qse": {"alpha": fs.alpha, "beta": fs.beta, "residual": fs.residual, "low_confidence": fs.low_confidence},
        "n_star": n_star,
        "crossover": "found" if n_star is not None else f"no crossover up to N={max_n}",
        "threshold": {"l_prime_median": l_prime, "value": None if f_scale is None else favourable_threshold(K, l_prime, f_scale)},
        "measured": per_n,
    }


def cmd_crossover(args) -> int:
    try:
        text = Path(args.bench).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {args.bench}: {exc}") from None
    rep = crossover_report(read_bench_csv(text), args.k, args.rho, args.f_scale, args.max_n)
    if args.format == "json":
        emit(json.dumps(rep, indent=2) + "\n", args.out)
    else:
        lines = [
            f"QAOA fit: alpha={rep['fit_qaoa']['alpha']:.6g} beta={rep['fit_qaoa']['beta']:.6g} rms={rep['fit_qaoa']['residual']:.3g}",
            f"QSE(K={args.k}) fit: alpha={rep['fit_qse']['alpha']:.6g} beta={rep['fit_qse']['beta']:.6g} rms={rep['fit_qse']['residual']:.3g}",
            f"N* = {rep['n_star']}" if rep["n_star"] is not None else rep["crossover"],
        ]
        emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_oracle(args) -> int:
    g, source = resolve_graph(args)
    o = brute_force_mis(g, max_n=args.max_n)
    doc = {"source": source, "n": g.n, "edges": g.num_edges, "digest": g.digest(), "rng_algorithm": RNG_ALGORITHM,
           "size": o.size, "count": o.count, "solutions": o.solutions}
    emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


COMMANDS = {"solve": cmd_solve, "bench-er": cmd_bench, "resources": cmd_resources,
            "crossover": cmd_crossover, "oracle": cmd_oracle}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InfeasibleSizeError as exc:
        print(f"infeasible size: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (ConfigError, GraphError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
