"""Command-line interface.

Exit codes: 0 success, 1 verification failure or soundness violation,
2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
import warnings
from pathlib import Path
from typing import List, Optional

import numpy as np

from egamma_dp import accountant as acc
from egamma_dp import divergences as div
from egamma_dp import kernels as ker
from egamma_dp import propagator as prop
from egamma_dp.config import config_to_mapping, expand_dotted, load_config, read_mapping
from egamma_dp.errors import ConfigError, InputError
from egamma_dp.reporting import (PROPAGATE_HEADER, RunManifest, format_delta, format_float,
                                 manifest_path, write_curve_csv, write_rows)
from egamma_dp.verification import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``"start:stop:num"`` (inclusive linspace) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            grid = np.linspace(float(start), float(stop), int(num))
        else:
            grid = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise UsageError(f"bad epsilon grid {text!r}: {exc}") from exc
    if grid.size == 0 or np.any(np.diff(grid) <= 0) or np.any(grid < 0):
        raise UsageError(f"epsilon grid {text!r} must be non-empty, nonnegative and increasing")
    return grid


def _vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


def _gamma(args) -> div.Gamma:
    if args.gamma is not None and args.epsilon is not None:
        raise UsageError("give either --gamma or --epsilon, not both")
    if args.gamma is not None:
        return div.Gamma(args.gamma)
    if args.epsilon is not None:
        return div.Gamma.from_epsilon(args.epsilon)
    raise UsageError("one of --gamma or --epsilon is required")


def _add_gamma(p):
    p.add_argument("--gamma", type=float, help="hockey-stick parameter (>= 1)")
    p.add_argument("--epsilon", type=float, help="alternatively, epsilon with gamma = e^epsilon")


# ----------------------------------------------------------------------------
# eval
# ----------------------------------------------------------------------------


def _eval_value(args) -> float:
    what = args.quantity
    if what == "q":
        return div.q_function(args.t)
    if what == "theta":
        return div.theta_gamma(_gamma(args), args.r)
    if what == "egamma-gaussian":
        if args.shift is not None:
            if args.m1 is not None or args.m2 is not None:
                raise UsageError("--shift cannot be combined with --m1/--m2")
            m1, m2 = np.zeros(1), np.array([args.shift])
        elif args.m1 is not None and args.m2 is not None:
            m1, m2 = _vector(args.m1), _vector(args.m2)
        else:
            raise UsageError("egamma-gaussian needs --shift or both --m1 and --m2")
        return div.egamma_gaussian(m1, m2, args.sigma, _gamma(args))
    if what == "egamma-laplace":
        return div.egamma_laplace(args.m1, args.m2, args.v, _gamma(args))
    if what == "egamma-quadrature":
        make = div.ScalarDensity.gaussian if args.family == "gaussian" else div.ScalarDensity.laplace
        return div.egamma_quadrature(make(args.m1, args.scale), make(args.m2, args.scale),
                                     _gamma(args))
    if what == "lipschitz-m":
        return ker.lipschitz_M(args.eta, ker.LossRegularity(1.0, args.beta, args.rho))
    if what == "contraction-gaussian":
        return ker.contraction_gaussian_projected(_gamma(args), args.M, ker.Ball(args.diameter),
                                                  args.eta, args.sigma)
    if what == "contraction-laplace":
        return ker.contraction_laplace_projected(args.epsilon, args.M, args.a, args.b,
                                                 args.eta, args.v)
    if what == "contraction-discrete":
        return ker.contraction_discrete(ker.DiscreteKernel.from_csv(args.kernel), _gamma(args))
    cfg = load_config(args.config)
    if what == "delta":
        return acc.dp_point(args.epsilon, cfg, args.i, args.method).delta
    if what == "epsilon":
        return acc.epsilon_for_delta(args.delta, cfg, args.i, args.method)
    raise UsageError(f"unknown quantity {what!r}")


def cmd_eval(args) -> int:
    print(format_float(_eval_value(args)))
    return EXIT_OK


def _build_eval_parser(sub):
    p = sub.add_parser("eval", help="evaluate a single divergence, bound or guarantee")
    q = p.add_subparsers(dest="quantity", metavar="QUANTITY", required=True)

    s = q.add_parser("q", help="Gaussian tail Q(t)")
    s.add_argument("--t", type=float, required=True)

    s = q.add_parser("theta", help="theta_gamma(r)")
    _add_gamma(s)
    s.add_argument("--r", type=float, required=True)

    s = q.add_parser("egamma-gaussian", help="E_gamma between two Gaussians")
    s.add_argument("--shift", type=float, help="distance between scalar means")
    s.add_argument("--m1", help="first mean, comma separated")
    s.add_argument("--m2", help="second mean, comma separated")
    s.add_argument("--sigma", type=float, required=True)
    _add_gamma(s)

    s = q.add_parser("egamma-laplace", help="E_gamma between two Laplace laws")
    s.add_argument("--m1", type=float, required=True)
    s.add_argument("--m2", type=float, required=True)
    s.add_argument("--v", type=float, required=True, help="Laplace scale")
    _add_gamma(s)

    s = q.add_parser("egamma-quadrature", help="E_gamma by numerical integration")
    s.add_argument("--family", choices=("gaussian", "laplace"), required=True)
    s.add_argument("--m1", type=float, required=True)
    s.add_argument("--m2", type=float, required=True)
    s.add_argument("--scale", type=float, required=True)
    _add_gamma(s)

    s = q.add_parser("lipschitz-m", help="Lipschitz constant M of the gradient step")
    s.add_argument("--eta", type=float, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--rho", type=float, default=0.0)

    s = q.add_parser("contraction-gaussian", help="projected Gaussian kernel bound")
    _add_gamma(s)
    s.add_argument("--M", type=float, default=1.0)
    s.add_argument("--diameter", type=float, required=True)
    s.add_argument("--eta", type=float, required=True)
    s.add_argument("--sigma", type=float, required=True)

    s = q.add_parser("contraction-laplace", help="projected Laplace kernel bound")
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--M", type=float, default=1.0)
    s.add_argument("--a", type=float, required=True)
    s.add_argument("--b", type=float, required=True)
    s.add_argument("--eta", type=float, required=True)
    s.add_argument("--v", type=float, required=True)

    s = q.add_parser("contraction-discrete", help="exact coefficient of a CSV kernel")
    s.add_argument("--kernel", type=Path, required=True)
    _add_gamma(s)

    for name, helptext in (("delta", "delta at a given epsilon"),
                           ("epsilon", "smallest epsilon for a target delta")):
        s = q.add_parser(name, help=helptext)
        s.add_argument("config", type=Path)
        s.add_argument("--i", type=int, required=True, help="record index (1-based)")
        s.add_argument("--method", choices=[m.value for m in acc.Method])
        if name == "delta":
            s.add_argument("--epsilon", type=float, required=True)
        else:
            s.add_argument("--delta", type=float, required=True)
    p.set_defaults(func=cmd_eval)


# ----------------------------------------------------------------------------
# curve
# ----------------------------------------------------------------------------


def _indexed_path(out: Path, i: int, many: bool) -> Path:
    if "{i}" in out.name:
        return out.with_name(out.name.replace("{i}", str(i)))
    if not many:
        return out
    return out.with_name(f"{out.stem}_i{i}{out.suffix}")


def _manifest(args, argv, command: str, config: Optional[dict], outputs, seed=None):
    config_arg = None
    if getattr(args, "config", None) is not None and str(args.config) in argv:
        config_arg = argv.index(str(args.config))
    return RunManifest(command=command, argv=list(argv), config=config, seed=seed,
                       outputs=[str(o) for o in outputs], config_arg=config_arg)


def cmd_curve(args, argv) -> int:
    cfg = load_config(args.config)
    method = acc.Method(args.method) if args.method else acc.default_method(cfg)
    indices = args.i or []
    if method is acc.Method.THM5:
        if indices:
            print("notice: the random-stop bound does not depend on the record index; "
                  "--i only labels the rows", file=sys.stderr)
        else:
            indices = [cfg.n]
    elif not indices:
        raise UsageError("--i is required for this method")
    grid = parse_grid(args.eps_grid) if args.eps_grid else acc.DEFAULT_EPS_GRID
    many = len(indices) > 1
    for i in indices:
        rows = acc.curve(cfg, i, grid, method)
        out = _indexed_path(args.out, i, many)
        write_curve_csv(rows, out)
        outputs = [out]
        if args.svg:
            from egamma_dp.plotting import plot_curve
            outputs.append(plot_curve(rows, out.with_suffix(".svg")))
        man = _manifest(args, argv, "curve", config_to_mapping(cfg), outputs)
        man.write(manifest_path(out))
        print(f"wrote {', '.join(str(o) for o in outputs)}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------------


def cmd_verify(args, argv) -> int:
    checks = run_suite(args.suite, args.seed)
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(c.line())
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed (suite={args.suite}, "
          f"seed={args.seed})")
    return EXIT_FAIL if failed else EXIT_OK


# ----------------------------------------------------------------------------
# propagate
# ----------------------------------------------------------------------------


def _loss_for(cfg: acc.PnsgdConfig, raw: dict) -> prop.LossModel:
    if not isinstance(cfg.geom, ker.Interval):
        raise ConfigError(["propagation needs domain.kind = interval"])
    sec = raw.get("loss", {}) or {}
    kind = str(sec.get("kind", "quadratic")).lower()
    if kind != "quadratic":
        raise ConfigError([f"loss.kind must be 'quadratic' (got {kind!r})"])
    c = float(sec.get("c", cfg.reg.beta))
    dd = sec.get("data_domain")
    data_domain = (float(dd[0]), float(dd[1])) if dd else (cfg.geom.a, cfg.geom.b)
    exact = prop.quadratic_loss(c, cfg.geom, data_domain)
    declared = prop.LossModel(exact.gradient, cfg.reg, cfg.geom, data_domain, exact.name)
    problems = declared.problems()
    if problems:
        raise ConfigError([f"declared reg does not hold for {exact.name}: {p}" for p in problems])
    return declared


def cmd_propagate(args, argv) -> int:
    raw = expand_dotted(read_mapping(args.config))
    cfg = load_config(args.config)
    loss = _loss_for(cfg, raw)
    data = prop.read_dataset(args.data)
    data_prime = prop.read_dataset(args.data_prime)
    if data.size != data_prime.size:
        raise InputError(f"datasets differ in length ({data.size} vs {data_prime.size})")
    if data.size != cfg.n:
        raise InputError(f"datasets have {data.size} records but the config says n={cfg.n}")
    identical = np.array_equal(data, data_prime)
    i = cfg.n if identical else prop.differing_index(data, data_prime)
    grid = parse_grid(args.eps_grid) if args.eps_grid else np.linspace(0.0, 4.0, 50)
    G = args.grid_size
    emp = prop.empirical_delta(grid, cfg, loss, data, data_prime, G)
    theo = np.array([acc.delta_gaussian_pnsgd(float(e), cfg, i) if cfg.family == "gaussian"
                     else acc.delta_laplace_pnsgd(float(e), cfg, i) for e in grid])
    slack = theo - emp
    allowance = 5.0 / G
    write_rows(args.out, PROPAGATE_HEADER, (
        (format_float(e), format_delta(a), format_delta(b), format_float(s))
        for e, a, b, s in zip(grid, emp, theo, slack)))
    outputs = [args.out]
    if args.density_out:
        args.density_out.mkdir(parents=True, exist_ok=True)
        start = prop.GridDensity.uniform(cfg.geom.a, cfg.geom.b, G)
        for tag, d in (("mu_n", data), ("nu_n", data_prime)):
            path = args.density_out / f"{tag}.csv"
            prop.propagate(start, d, cfg, loss)[-1].to_csv(path)
            outputs.append(path)
    man = _manifest(args, argv, "propagate", {**config_to_mapping(cfg), "loss": raw.get("loss")},
                    outputs)
    man.write(manifest_path(args.out))
    violations = [(e, a, b) for e, a, b, s in zip(grid, emp, theo, slack) if s < -allowance]
    for e, a, b in violations:
        print(f"VIOLATION  epsilon={e:.6g}  empirical={a:.6g}  theoretical={b:.6g}  "
              f"allowance={allowance:.3g}")
    print(f"record i={i}, G={G}: {len(grid)} rows, min slack {slack.min():.3e}, "
          f"{len(violations)} violations; wrote {args.out}")
    return EXIT_FAIL if violations else EXIT_OK


# ----------------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------------


def cmd_simulate(args, argv) -> int:
    raw = expand_dotted(read_mapping(args.config))
    cfg = load_config(args.config)
    loss = _loss_for(cfg, raw)
    data = prop.read_dataset(args.data)
    samples = prop.simulate_pnsgd(cfg, data, loss, args.seed, args.trials)
    G = args.grid_size
    hist = prop.GridDensity.from_samples(samples, cfg.geom.a, cfg.geom.b, G)
    chain = prop.propagate(prop.GridDensity.uniform(cfg.geom.a, cfg.geom.b, G), data, cfg, loss)
    tv = 0.5 * float(np.abs(hist.weights - chain[-1].weights).sum())
    hist.to_csv(args.out)
    man = _manifest(args, argv, "simulate", {**config_to_mapping(cfg), "loss": raw.get("loss")},
                    [args.out], seed=args.seed)
    man.write(manifest_path(args.out))
    print(f"TV(histogram, propagated) = {format_float(tv)} "
          f"(reference 3*sqrt(G/trials) = {format_float(3 * np.sqrt(G / args.trials))})")
    return EXIT_OK


# ----------------------------------------------------------------------------
# replay
# ----------------------------------------------------------------------------


def cmd_replay(args, argv) -> int:
    man = RunManifest.read(args.manifest)
    replay_argv = list(man.argv)
    if man.config_arg is not None and man.config is not None:
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            json.dump(man.config, fh)
        replay_argv[man.config_arg] = fh.name
    return main(replay_argv, record_argv=man.argv)


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egamma-dp",
        description="Differential privacy of noisy iterative algorithms via E_gamma contraction.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    _build_eval_parser(sub)

    p = sub.add_parser("curve", help="delta-vs-epsilon CSV for a configuration")
    p.add_argument("config", type=Path)
    p.add_argument("--i", type=int, action="append", help="record index; repeat for several")
    p.add_argument("--method", choices=("thm3", "thm4", "thm5", "prop1"))
    p.add_argument("--eps-grid", help='"start:stop:num" or comma list (default 0:5:200)')
    p.add_argument("--out", type=Path, required=True,
                   help="CSV path; '{i}' is replaced by the index")
    p.add_argument("--svg", action="store_true", help="also render a log-scale SVG chart")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("verify", help="run an oracle property suite")
    p.add_argument("--suite", required=True, choices=[*SUITES, "all"])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("propagate", help="empirical vs theoretical delta on a 1-d grid")
    p.add_argument("config", type=Path)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--data-prime", type=Path, required=True)
    p.add_argument("--eps-grid", help='"start:stop:num" or comma list (default 0:4:50)')
    p.add_argument("--grid-size", type=int, default=128)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--density-out", type=Path, help="directory for mu_n.csv / nu_n.csv")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("simulate", help="Monte Carlo PNSGD histogram vs propagation")
    p.add_argument("config", type=Path)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--trials", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-size", type=int, default=128)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest", type=Path)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[List[str]] = None, record_argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        warnings.showwarning = _show_warning
        return _dispatch(parser, args, argv if record_argv is None else record_argv)


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def _dispatch(parser, args, argv) -> int:
    try:
        if args.func is cmd_eval:
            return cmd_eval(args)
        return args.func(args, argv)
    except UsageError as exc:
        parser.error(str(exc))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
