"""Command-line front end.

Every run writes its artifact atomically plus a JSON config echo next to it
(``<output>.config.json``); ``rqmc --replay <echo>`` re-executes the run.
Without ``-o`` the artifact goes to stdout and the echo to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import estimate as est
from . import integrands, verify
from .lattice import LatticeRule, cranley_patterson, korobov, lattice_points, rotation
from .netgen import (
    DIRECTION_FILE_ENV,
    DigitalPointSet,
    DirectionFileError,
    PrecisionError,
    default_precision,
    faure_matrices,
    generate_points,
    identity_matrices,
    sobol_matrices,
)
from .scramble import KINDS, ScrambleSpec, scramble_points

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_UNKNOWN_INTEGRAND = 3
EXIT_UNKNOWN_SAMPLER = 4
EXIT_DIRECTION_FILE = 5
EXIT_SIZE_LIMIT = 6

POINT_SAMPLERS = ("sobol", "faure", "vdc", "lattice-cp", "plain-mc")
STUDY_SAMPLERS = ("scrambled-net", "lattice-cp", "plain-mc")
_DIGIT_CHARS = "0123456789abcdefghijklmnopqrstuvwxyz"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- io helpers


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text: str, echo: dict) -> None:
    echo_text = json.dumps(echo, indent=2, sort_keys=True) + "\n"
    if args.output:
        write_atomic(args.output, text)
        write_atomic(args.output + ".config.json", echo_text)
    else:
        sys.stdout.write(text)
        sys.stderr.write(echo_text)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def format_points_text(x: np.ndarray, header: dict) -> str:
    lines = ["# " + " ".join(f"{k}={v}" for k, v in header.items())]
    lines += [" ".join(_fmt(v) for v in row) for row in x]
    return "\n".join(lines) + "\n"


def format_points_digits(P: DigitalPointSet, header: dict) -> str:
    if P.base > len(_DIGIT_CHARS):
        raise UsageError(f"digit dumps support bases up to {len(_DIGIT_CHARS)}")
    header = dict(header, format="points-digits", b=P.base, E=P.precision)
    lines = ["# " + " ".join(f"{k}={v}" for k, v in header.items())]
    table = np.array(list(_DIGIT_CHARS))
    for row in P.digits:
        lines.append(" ".join("".join(table[coord]) for coord in row))
    return "\n".join(lines) + "\n"


def _parse_header(line: str) -> dict:
    out = {}
    for tok in line.lstrip("#").split():
        if "=" in tok:
            k, v = tok.split("=", 1)
            out[k] = v
    return out


def read_points(path: str, base: int | None = None):
    """Read a point dump; returns ``(points, header)``.

    ``points`` is a :class:`DigitalPointSet` for digit dumps, else a float array.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = {}
    body = []
    for ln in lines:
        if ln.startswith("#"):
            header.update(_parse_header(ln))
        elif ln.strip():
            body.append(ln.split())
    if header.get("format") == "points-digits":
        b = int(header["b"])
        digits = np.array([[[int(ch, 36) for ch in coord] for coord in row] for row in body], dtype=np.uint8)
        if digits.size and digits.max() >= b:
            raise UsageError(f"{path}: digit out of range for base {b}")
        return DigitalPointSet(digits.reshape(len(body), -1, int(header["E"])), b), header
    x = np.array([[float(v) for v in row] for row in body], dtype=np.float64)
    if x.ndim != 2:
        raise UsageError(f"{path}: ragged or empty point dump")
    return x, header


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        for conv in (int, float):
            try:
                out[k] = conv(v)
                break
            except ValueError:
                pass
        else:
            out[k] = v
    return out


def _scramble_kind(value: str) -> str | None:
    if value == "none":
        return None
    if value not in KINDS:
        raise UsageError(f"unknown scramble kind {value!r}")
    return value


# ---------------------------------------------------------------- commands


def _point_count(args, b: int) -> int:
    if (args.n is None) == (args.m is None):
        raise UsageError("give exactly one of -n or -m")
    return args.n if args.n is not None else b**args.m


def cmd_points(args) -> tuple[str, dict]:
    sampler = args.sampler
    if sampler not in POINT_SAMPLERS:
        raise est.UnknownSamplerError(f"unknown sampler {sampler!r}; expected one of {POINT_SAMPLERS}")
    b = 2 if sampler in ("sobol", "lattice-cp", "plain-mc") else args.b
    n = _point_count(args, b)
    header = {"kind": sampler, "b": b, "d": args.d, "seed": args.seed, "replicate": args.replicate}
    if sampler in ("lattice-cp", "plain-mc"):
        if args.format == "points-digits":
            raise UsageError(f"{sampler} points have no digit representation")
        if sampler == "plain-mc":
            x = est.MCSampler(args.d).sample(n, args.seed, args.replicate)
        else:
            rule = LatticeRule(n, tuple(args.z)) if args.z else korobov(n, args.korobov_a, args.d)
            x = cranley_patterson(lattice_points(rule), rotation(args.seed, args.replicate, rule.dimension))
        header["E"] = "none"
        return format_points_text(x, header), header
    if sampler == "sobol":
        G = sobol_matrices(args.direction_file, args.d)
    elif sampler == "faure":
        G = faure_matrices(b, args.d)
    else:
        G = identity_matrices(b, args.d)
    P = generate_points(G, args.start, n)
    kind = _scramble_kind(args.scramble)
    if kind is not None:
        P = scramble_points(P, ScrambleSpec(kind, b, G.precision, args.seed, args.replicate))
    header.update(kind=sampler if kind is None else f"{sampler}+{kind}", E=P.precision, t=G.declared_t)
    if args.format == "points-digits":
        return format_points_digits(P, header), header
    return format_points_text(P.points, header), header


def _load_for_verify(args):
    P, header = read_points(args.input)
    b = args.b or (int(header["b"]) if "b" in header else None)
    if b is None:
        raise UsageError("base unknown: pass -b or use a dump with a header")
    if isinstance(P, np.ndarray):
        P = DigitalPointSet.from_points(P, b, default_precision(b))
    elif P.base != b:
        raise UsageError(f"dump is base {P.base}, -b says {b}")
    return P, b


def _infer_m(args, n: int, b: int) -> int:
    if args.m is not None:
        return args.m
    m = round(math.log(n, b)) if n > 0 else -1
    if m < 0 or b**m != n:
        raise UsageError(f"{n} points is not a power of {b}; pass -m with a matching slice")
    return m


def cmd_check_net(args) -> tuple[str, dict]:
    P, b = _load_for_verify(args)
    m = _infer_m(args, P.n, b)
    report = verify.check_net(P, args.t, m, base=b)
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", {}


def cmd_tvalue(args) -> tuple[str, dict]:
    P, b = _load_for_verify(args)
    m = _infer_m(args, P.n, b)
    t = verify.exact_t(P, m, base=b)
    return json.dumps({"m": m, "b": b, "n": P.n, "t": t}, indent=2, sort_keys=True) + "\n", {}


def cmd_discrepancy(args) -> tuple[str, dict]:
    x, _ = read_points(args.input)
    if isinstance(x, DigitalPointSet):
        x = x.points
    if args.mode == "exact":
        res = verify.star_discrepancy_exact(x)
    else:
        res = verify.star_discrepancy_lower_bound(x, args.trials, seed=args.seed)
    out = {
        "mode": res.mode,
        "value": res.value,
        "side": res.side,
        "witness": [float(v) for v in np.asarray(res.witness).ravel()],
        "n": int(x.shape[0]),
        "d": int(x.shape[1]),
    }
    return json.dumps(out, indent=2, sort_keys=True) + "\n", {}


def _config_from_args(args) -> est.ExperimentConfig:
    if args.integrand is None:
        raise UsageError("--integrand is required")
    if args.sampler not in STUDY_SAMPLERS:
        raise est.UnknownSamplerError(f"unknown sampler {args.sampler!r}; expected one of {STUDY_SAMPLERS}")
    try:
        return est.ExperimentConfig(
            sampler=args.sampler,
            family=args.family,
            scramble=_scramble_kind(args.scramble),
            b=args.b,
            d=args.d,
            integrand=args.integrand,
            params=_parse_params(args.param),
            R=args.R,
            m_min=args.m_min,
            m_max=args.m_max,
            replicates=args.replicates,
            seed=args.seed,
            p=args.p,
            epsilon=args.epsilon,
            korobov_a=args.korobov_a,
            direction_file=args.direction_file,
            workers=args.workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_estimate(args) -> tuple[str, dict]:
    if args.n is None or args.n < 1:
        raise UsageError("-n >= 1 is required")
    cfg = _config_from_args(args)
    f = cfg.build_integrand()
    sampler = cfg.build_sampler()
    ests = est.replicate_estimates(f, sampler, [args.n], cfg.seed, cfg.replicates, cfg.workers)[:, 0]
    out = {
        "n": args.n,
        "replicates": cfg.replicates,
        "mean": float(ests.mean()),
        "var": float(ests.var(ddof=1)),
        "stderr": float(ests.std(ddof=1) / math.sqrt(len(ests))),
        "mu": f.mean,
    }
    if args.format == "csv":
        text = "replicate,estimate\n" + "".join(f"{i},{_fmt(v)}\n" for i, v in enumerate(ests))
    else:
        text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    return text, json.loads(cfg.to_json())


def cmd_converge(args) -> tuple[str, dict]:
    cfg = _config_from_args(args)
    report = est.convergence_study(cfg)
    if args.format == "json":
        rows = [{c: getattr(r, c) for c in est.CSV_COLUMNS} for r in report.rows]
        return json.dumps({"rows": rows}, indent=2, sort_keys=True) + "\n", json.loads(cfg.to_json())
    return report.to_csv(), json.loads(cfg.to_json())


def cmd_slln(args) -> tuple[str, dict]:
    cfg = _config_from_args(args)
    res = est.slln_study(cfg)
    if args.format == "json":
        out = {
            "n": res.sample_sizes.tolist(),
            "errors": res.errors.tolist(),
            **{k: v.tolist() for k, v in res.quantiles.items()},
        }
        return json.dumps(out, indent=2, sort_keys=True) + "\n", json.loads(cfg.to_json())
    lines = ["n,median_abs_error,q90_abs_error,max_abs_error"]
    for c, n in enumerate(res.sample_sizes):
        lines.append(",".join([str(int(n))] + [_fmt(res.quantiles[k][c]) for k in ("median", "q90", "max")]))
    return "\n".join(lines) + "\n", json.loads(cfg.to_json())


def cmd_figure1(args) -> tuple[str, dict]:
    """Plain MC, Sobol' and scrambled Sobol' points in the unit square, one CSV."""
    n = 2**args.m
    G = sobol_matrices(args.direction_file, 2)
    P = generate_points(G, 0, n)
    panels = {
        "mc": est.MCSampler(2).sample(n, args.seed, 0),
        "sobol": P.points,
        "scrambled-sobol": scramble_points(P, ScrambleSpec("nested_uniform", 2, G.precision, args.seed)).points,
    }
    lines = ["panel,i,x1,x2"]
    for name, x in panels.items():
        lines += [f"{name},{i},{_fmt(a)},{_fmt(b)}" for i, (a, b) in enumerate(x)]
    return "\n".join(lines) + "\n", {}


# ---------------------------------------------------------------- parser


def _add_study_flags(p, default_sampler="scrambled-net"):
    p.add_argument("--sampler", default=default_sampler, help=f"one of {', '.join(STUDY_SAMPLERS)}")
    p.add_argument("--family", default="sobol", choices=["sobol", "faure", "vdc"])
    p.add_argument("--scramble", default="nested_uniform", help="nested_uniform, linear, digital_shift or none")
    p.add_argument("-b", type=int, default=2)
    p.add_argument("-d", type=int, default=1)
    p.add_argument("--integrand")
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("-R", type=int, default=1)
    p.add_argument("--m-min", type=int, default=0)
    p.add_argument("--m-max", type=int, default=10)
    p.add_argument("--replicates", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-p", type=float, default=1.5)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--korobov-a", type=int, default=1_000_003)
    p.add_argument("--direction-file")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rqmc", description="Randomized quasi-Monte Carlo toolkit.")
    parser.add_argument("--replay", metavar="ECHO", help="re-run the command recorded in a config echo")
    sub = parser.add_subparsers(dest="command")

    def common(p, formats, default):
        p.add_argument("-o", "--output")
        p.add_argument("--format", choices=formats, default=default)

    p = sub.add_parser("points", help="generate (optionally scrambled) points")
    p.add_argument("--sampler", default="sobol", help=f"one of {', '.join(POINT_SAMPLERS)}")
    p.add_argument("-b", type=int, default=2)
    p.add_argument("-d", type=int, default=2)
    p.add_argument("-n", type=int)
    p.add_argument("-m", type=int)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--scramble", default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--korobov-a", type=int, default=1_000_003)
    p.add_argument("--z", type=int, nargs="+")
    p.add_argument("--direction-file")
    common(p, ["points-text", "points-digits"], "points-text")
    p.set_defaults(func=cmd_points)

    for name, func in (("check-net", cmd_check_net), ("tvalue", cmd_tvalue)):
        p = sub.add_parser(name, help="verify the net property" if name == "check-net" else "exact t-value")
        p.add_argument("input")
        p.add_argument("-b", type=int)
        p.add_argument("-m", type=int)
        if name == "check-net":
            p.add_argument("-t", type=int, required=True)
        common(p, ["json"], "json")
        p.set_defaults(func=func)

    p = sub.add_parser("discrepancy", help="star discrepancy of a point dump")
    p.add_argument("input")
    p.add_argument("--mode", choices=["exact", "lower"], default="exact")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    common(p, ["json"], "json")
    p.set_defaults(func=cmd_discrepancy)

    p = sub.add_parser("estimate", help="replicated estimate at one sample size")
    _add_study_flags(p)
    p.add_argument("-n", type=int)
    common(p, ["json", "csv"], "json")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("converge", help="convergence study over the sample schedule")
    _add_study_flags(p)
    common(p, ["csv", "json"], "csv")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("slln", help="error trajectories along the sample schedule")
    _add_study_flags(p)
    common(p, ["csv", "json"], "csv")
    p.set_defaults(func=cmd_slln)

    p = sub.add_parser("figure1", help="MC, Sobol' and scrambled Sobol' points in 2D")
    p.add_argument("-m", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--direction-file")
    common(p, ["csv"], "csv")
    p.set_defaults(func=cmd_figure1)
    return parser


def _replay_argv(argv: list[str]) -> list[str]:
    if "--replay" not in argv:
        return argv
    i = argv.index("--replay")
    if i + 1 >= len(argv):
        raise UsageError("--replay needs a path")
    with open(argv[i + 1], encoding="utf-8") as fh:
        echo = json.load(fh)
    return echo["argv"] + argv[:i] + argv[i + 2 :]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _replay_argv(argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_OK if exc.code == 0 else EXIT_USAGE
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        if getattr(args, "direction_file", None) is None and hasattr(args, "direction_file"):
            args.direction_file = os.environ.get(DIRECTION_FILE_ENV)
        text, extra = args.func(args)
        # the echo records the argv without the output path, so a replay may redirect it
        echo = {"argv": _strip_output(argv), "command": args.command, "config": extra}
        _emit(args, text, echo)
        return EXIT_OK
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except integrands.UnknownIntegrandError as exc:
        return _fail(EXIT_UNKNOWN_INTEGRAND, exc.args[0])
    except est.UnknownSamplerError as exc:
        return _fail(EXIT_UNKNOWN_SAMPLER, exc)
    except DirectionFileError as exc:
        return _fail(EXIT_DIRECTION_FILE, exc)
    except (verify.DiscrepancyLimitError, PrecisionError) as exc:
        return _fail(EXIT_SIZE_LIMIT, exc)
    except (ValueError, OSError) as exc:
        return _fail(EXIT_ERROR, exc)


def _strip_output(argv: list[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a in ("-o", "--output"):
            skip = True
            continue
        if a.startswith("--output="):
            continue
        out.append(a)
    return out


def _fail(code: int, exc) -> int:
    sys.stderr.write(f"rqmc: error: {exc}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
