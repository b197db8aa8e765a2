import argparse
import logging
import sys
import time
from typing import List, Optional, Sequence

from . import __version__
from .clique_chain import b_matrix_spectral_radius, build_chain
from .ergodic_estimator import (
    DEFAULT_ITERATIONS,
    DEFAULT_TRAJECTORIES,
    CostFunction,
    ErgodicReport,
    density_vector,
    ergodic_mean,
    speedup,
    subadditive_ratio,
)
from .errors import HeapMeasureError, InvalidMeasureError, ModelError, SimulationError
from .formats import AST_FIRST_HIT, ERGODIC_HEADER
from .heap_sampler import DEFAULT_PULL_CAP
from .io import parse_model, write_csv
from .mobius_measure import mobius_polynomial, uniform_root
from .protocol_example import (
    ProtocolParams,
    cross_check,
    first_hit_a_expectations,
    protocol_spec,
    round_density_gamma,
    round_expectations,
)
from .stopping_times import parse_ast
from .trace_core import clique_label, normalize
from .utils import _default_jobs, _format_float

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MODEL = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with EXIT_USAGE rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _UsageError(Exception):
    """A flag combination argparse cannot express was rejected."""


def print_progress(label, done, total):
    progress_message = f"⚙️  Simulating {label}: {done}/{total}"
    print(progress_message, end="\r", flush=True, file=sys.stderr)
    return progress_message


def _progress_for(label):
    last = {"message": ""}

    def callback(done, total):
        last["message"] = print_progress(label, done, total)
        if done == total:
            print(" " * (len(last["message"]) + 5), end="\r", file=sys.stderr)
            print(f"✅ Finished {total} trajectories of {label}.", file=sys.stderr)

    return callback


def setup_logging(verbosity: int):
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def cmd_validate(args) -> int:
    ip, spec = parse_model(args.model, strict=False)
    rows = [(label, _format_float(f), _format_float(h), "yes" if ok else "no") for label, f, h, ok in spec.report()]
    write_csv(("clique", "f", "h", "ok"), rows)
    if not spec.valid:
        for v in spec.violations:
            print(f"⚠️ {v}", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


def cmd_cliques(args) -> int:
    ip, _ = parse_model(args.model, strict=False)
    maximal = ip.maximal_cliques
    rows = [
        (str(i), clique_label(c), str(len(c)), "yes" if c in maximal else "no")
        for i, c in enumerate(ip.cliques)
    ]
    write_csv(("index", "clique", "size", "maximal"), rows)
    return EXIT_OK


def cmd_mobius(args) -> int:
    ip, _ = parse_model(args.model, strict=False)
    mu = mobius_polynomial(ip)
    rows = [(f"X^{k}", _format_float(float(c))) for k, c in enumerate(mu.coef)]
    rows.append(("root", _format_float(uniform_root(ip))))
    write_csv(("term", "value"), rows)
    return EXIT_OK


def cmd_chain(args) -> int:
    _, spec = parse_model(args.model)
    chain = build_chain(spec)
    labels = chain.labels()
    rows = []
    for name, vector in (("initial", chain.initial), ("g", chain.g), ("pi", chain.pi)):
        rows.extend((name, "", label, _format_float(float(v))) for label, v in zip(labels, vector))
    for i, src in enumerate(labels):
        rows.extend(("P", src, dst, _format_float(float(chain.P[i, j]))) for j, dst in enumerate(labels))
    rows.append(("spectral_radius_B", "", "", _format_float(b_matrix_spectral_radius(spec))))
    write_csv(("quantity", "row", "column", "value"), rows)
    return EXIT_OK


def cmd_densities(args) -> int:
    _, spec = parse_model(args.model)
    densities = density_vector(build_chain(spec))
    write_csv(("piece", "density"), [(a, _format_float(d)) for a, d in densities.items()])
    return EXIT_OK


def cmd_speedup(args) -> int:
    ip, spec = parse_model(args.model)
    chain = build_chain(spec)
    rho = speedup(chain)
    rows: List[Sequence[str]] = [("speedup", "", _format_float(rho), "0", _format_float(rho), "", "", "")]
    if args.simulate:
        if args.seed is None:
            raise _UsageError("--simulate requires --seed")
        ast = parse_ast(ip, args.ast or f"{AST_FIRST_HIT}:{ip.pieces[0]}")
        report = subadditive_ratio(
            ast, chain, args.iterations, args.trajectories, args.seed,
            jobs=args.jobs, pull_cap=args.pull_cap, progress=_progress_for(str(ast)),
        )
        rows.extend(report.rows())
    write_csv(ERGODIC_HEADER, rows)
    return EXIT_OK


def cmd_simulate(args) -> int:
    ip, spec = parse_model(args.model)
    ast = parse_ast(ip, args.ast)
    phi = CostFunction.parse(ip, args.cost) if args.cost else CostFunction.ones(ip)
    chain = build_chain(spec)
    start = time.perf_counter()
    report = ergodic_mean(
        ast, chain, phi, args.iterations, args.trajectories, args.seed,
        jobs=args.jobs, pull_cap=args.pull_cap, progress=_progress_for(str(ast)),
    )
    logging.getLogger(__name__).info("simulation took %.2f s", time.perf_counter() - start)
    if report.incomplete:
        print(f"⚠️ {report.incomplete} trajectories had no finite cut and were skipped.", file=sys.stderr)
    write_csv(ErgodicReport.header(), report.rows())
    return EXIT_OK


def cmd_normalize(args) -> int:
    ip, _ = parse_model(args.model, strict=False)
    heap = normalize(ip, ip.parse_word(args.word))
    rows = [(f"layer_{i}", clique_label(layer)) for i, layer in enumerate(heap.layers, start=1)]
    rows += [("length", str(heap.length)), ("height", str(heap.height))]
    write_csv(("quantity", "value"), rows)
    return EXIT_OK


def cmd_protocol(args) -> int:
    params = ProtocolParams(args.lam, args.lam_prime)
    spec = protocol_spec(params)
    rows = [(f"p_{a}", "", "", _format_float(spec.p[a])) for a in spec.ip.pieces]
    names = ("gamma_a", "gamma_b", "gamma_c", "E|V'|_b", "E|V'|_c", "E|V'|", "E N_a", "E N_b", "E N")
    exact = round_density_gamma(params) + first_hit_a_expectations(params) + round_expectations(params)
    if args.rounds is None:
        rows += [(name, "", "", _format_float(value)) for name, value in zip(names, exact)]
    else:
        if args.seed is None:
            raise _UsageError("--rounds requires --seed")
        check = cross_check(params, args.rounds, args.seed, args.trajectories, jobs=args.jobs, pull_cap=args.pull_cap)
        rows += [
            (name, _format_float(est), _format_float(se), _format_float(value))
            for name, est, se, value in check.rows()
        ]
    write_csv(("quantity", "estimate", "stderr", "exact"), rows)
    return EXIT_OK


def _add_simulation_flags(p: argparse.ArgumentParser, seed_required: bool):
    p.add_argument("--iterations", type=int, default=DEFAULT_ITERATIONS,
                   help=f"AST iterations per trajectory (default: {DEFAULT_ITERATIONS}).")
    p.add_argument("--trajectories", type=int, default=DEFAULT_TRAJECTORIES,
                   help=f"Independent trajectories (default: {DEFAULT_TRAJECTORIES}).")
    p.add_argument("--seed", type=int, required=seed_required, default=None,
                   help="Master seed; required for every randomized run.")
    p.add_argument("-j", "--jobs", type=int, default=_default_jobs(),
                   help="Number of worker threads (default: number of CPUs).")
    p.add_argument("--pull-cap", type=int, default=DEFAULT_PULL_CAP,
                   help=f"Maximum cliques pulled per decision (default: {DEFAULT_PULL_CAP}).")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="heapmeasure",
        description="Bernoulli measures on heap monoids: exact quantities and seeded simulations.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="Log more (-v info, -vv debug).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="Check the Bernoulli conditions of a model.")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("cliques", help="List cliques in canonical order.")
    p.add_argument("model")
    p.set_defaults(func=cmd_cliques)

    p = sub.add_parser("mobius", help="Möbius polynomial coefficients and its smallest root.")
    p.add_argument("model")
    p.set_defaults(func=cmd_mobius)

    p = sub.add_parser("chain", help="Initial law, g, P, stationary measure and the spectral check of B.")
    p.add_argument("model")
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("densities", help="Exact asymptotic density of each piece.")
    p.add_argument("model")
    p.set_defaults(func=cmd_densities)

    p = sub.add_parser("speedup", help="Exact speedup, optionally with a simulated height ratio.")
    p.add_argument("model")
    p.add_argument("--simulate", action="store_true",
                   help="Also estimate height/length, whose limit is 1/speedup.")
    p.add_argument("--ast", default=None,
                   help="first-hit:<piece> or max-clique (default: first-hit of the first piece).")
    _add_simulation_flags(p, seed_required=False)
    p.set_defaults(func=cmd_speedup)

    p = sub.add_parser("simulate", help="Ergodic mean of an additive cost along an iterated AST.")
    p.add_argument("model")
    p.add_argument("--ast", required=True, help="first-hit:<piece>, max-clique or prefix:<word>.")
    p.add_argument("--cost", default=None, help="Cost per piece, e.g. a=1,c=0.5 (default: 1 everywhere).")
    _add_simulation_flags(p, seed_required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("protocol", help="Closed forms of the two-device protocol and Monte-Carlo cross-checks.")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--lambda-prime", dest="lam_prime", type=float, required=True)
    p.add_argument("--rounds", type=int, default=None,
                   help="Rounds per trajectory; enables the Monte-Carlo cross-checks.")
    _add_simulation_flags(p, seed_required=False)
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("normalize", help="Cartier-Foata layers, length and height of a word.")
    p.add_argument("model")
    p.add_argument("word")
    p.set_defaults(func=cmd_normalize)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    try:
        return args.func(args)
    except (_UsageError, ValueError) as e:
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, InvalidMeasureError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_MODEL
    except (SimulationError, HeapMeasureError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_RUNTIME
