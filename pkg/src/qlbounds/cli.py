"""Command-line front end.

Exit codes: 0 success, 1 disagreement between routes (or a failed output
check), 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import counterfactual, rationality, welfare
from .estimation import (
    CrossSection,
    KernelConfig,
    SynthSpec,
    bandwidth_rule,
    build_pseudo_dataset,
    robinson_beta,
    synth_cross_section,
)
from .model import Dataset, DatasetError, OracleCapError, validate
from .sequences import DEFAULT_CAP

log = logging.getLogger("qlbounds")

EXIT_OK, EXIT_DISAGREE, EXIT_INPUT = 0, 1, 2
AGREE_TOL = 1e-6
ORACLE_TOL = 1e-6


class InputError(Exception):
    """Unusable input; the message names the offending line where possible."""


def fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(float(v) + 0.0, ".17g")


# ---------------------------------------------------------------------------
# parsing


def _read_rows(path: str) -> tuple[list[str], list[tuple[int, list[str]]]]:
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    rows = [(i, r) for i, r in enumerate(csv.reader(io.StringIO(text)), start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: line 1: empty file, expected a header row")
    return [c.strip() for c in rows[0][1]], rows[1:]


def _floats(line: int, cells: list[str], width: int) -> list[float]:
    if len(cells) != width:
        raise InputError(f"line {line}: expected {width} fields, found {len(cells)}")
    try:
        return [float(c) for c in cells]
    except ValueError as exc:
        raise InputError(f"line {line}: {exc}") from exc


def read_dataset(path: str) -> Dataset:
    header, rows = _read_rows(path)
    width = len(header)
    K = (width - 1) // 2
    expected = ["t"] + [f"p_{k}" for k in range(1, K + 1)] + [f"x_{k}" for k in range(1, K + 1)]
    if K < 1 or header != expected:
        raise InputError(f"line 1: header must be t,p_1..p_K,x_1..x_K, got {','.join(header)}")
    if not rows:
        raise InputError("line 2: dataset has no observations")
    values = np.array([_floats(i, r, width) for i, r in rows])
    data = Dataset(values[:, 1 : K + 1], values[:, K + 1 :])
    problems = validate(data)
    if problems:
        first = problems[0]
        line = rows[first.row][0] if first.row is not None else 1
        raise InputError(f"line {line}: " + "; ".join(map(str, problems)))
    return data


def dataset_csv(data: Dataset) -> str:
    K = data.K
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t"] + [f"p_{k}" for k in range(1, K + 1)] + [f"x_{k}" for k in range(1, K + 1)])
    for t in range(data.T):
        w.writerow([t + 1] + [fmt(v) for v in data.prices[t]] + [fmt(v) for v in data.quantities[t]])
    return out.getvalue()


def read_cross_section(path: str) -> CrossSection:
    header, rows = _read_rows(path)
    d = len(header) - 3
    expected = ["X", "P", "Y"] + [f"W_{j}" for j in range(1, d + 1)]
    if d < 1 or header != expected:
        raise InputError(f"line 1: header must be X,P,Y,W_1..W_d, got {','.join(header)}")
    for i, r in rows:
        vals = _floats(i, r, len(header))
        if vals[1] <= 0:
            raise InputError(f"line {i}: price must be strictly positive")
    if len(rows) < 2:
        raise InputError("a cross-section needs at least 2 records")
    values = np.array([[float(c) for c in r] for _, r in rows])
    return CrossSection(values[:, 0], values[:, 1], values[:, 2], values[:, 3:])


def cross_section_csv(cs: CrossSection) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    d = cs.W.shape[1]
    w.writerow(["X", "P", "Y"] + [f"W_{j}" for j in range(1, d + 1)])
    for i in range(cs.n):
        w.writerow([fmt(cs.X[i]), fmt(cs.P[i]), fmt(cs.Y[i])] + [fmt(v) for v in cs.W[i]])
    return out.getvalue()


@dataclass(frozen=True)
class EpsMode:
    kind: str  # "adaptive", "fixed" or "sweep"
    values: tuple[float, ...] = ()

    def resolve(self, data: Dataset) -> list[float]:
        if self.kind == "adaptive":
            return [rationality.epsilon_star_lp(data)]
        return list(self.values)


def parse_eps(text: str) -> EpsMode:
    try:
        if text == "adaptive":
            return EpsMode("adaptive")
        if text.startswith("fixed="):
            v = float(text[6:])
            if not v >= 0:
                raise ValueError
            return EpsMode("fixed", (v,))
        if text.startswith("sweep="):
            vals = tuple(float(v) for v in text[6:].split(","))
            if not vals or any(not v >= 0 for v in vals):
                raise ValueError
            return EpsMode("sweep", vals)
    except ValueError:
        pass
    raise argparse.ArgumentTypeError("expected adaptive, fixed=V or sweep=a,b,c with values >= 0")


def parse_grid(text: str) -> list[float]:
    """``MIN:MAX:STEPS`` (STEPS evenly spaced points) or a comma list."""
    try:
        if ":" in text:
            lo, hi, steps = text.split(":")
            n = int(steps)
            if n < 1:
                raise ValueError
            return [float(lo)] if n == 1 else np.linspace(float(lo), float(hi), n).tolist()
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("grid must be MIN:MAX:STEPS with STEPS >= 1 or a comma list") from None


def parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


def parse_query(text: str) -> tuple[np.ndarray, np.ndarray]:
    """``A:B`` where each side is a comma-separated vector."""
    try:
        a, b = text.split(":")
        return parse_vector(a), parse_vector(b)
    except ValueError:
        raise argparse.ArgumentTypeError("query must look like 1,2:3,4") from None


# ---------------------------------------------------------------------------
# commands


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_eps(args) -> int:
    data = read_dataset(args.input)
    lp_value = rationality.epsilon_star_lp(data)
    karp, cert = rationality.epsilon_star_cycles(data)
    report = {
        "eps_star": lp_value,
        "eps_star_cycles": karp,
        "cycle": [t + 1 for t in cert.sequence] if cert else None,
        "cycle_mean": cert.mean_weight if cert else None,
    }
    _emit(json.dumps(report) + "\n", args.output)
    if abs(lp_value - karp) > AGREE_TOL:
        log.error("program and cycle routes disagree: %r vs %r", lp_value, karp)
        return EXIT_DISAGREE
    return EXIT_OK


def _nonincreasing(values: list[float]) -> bool:
    return all(b <= a + 1e-7 for a, b in zip(values, values[1:]))


def cmd_bounds_quantity(args) -> int:
    data = read_dataset(args.input)
    k = args.good - 1
    if not 0 <= k < data.K:
        raise InputError(f"--good must be between 1 and {data.K}")
    if data.K > 1 and args.base_price is None:
        base = data.prices.mean(axis=0)
    else:
        base = parse_vector(args.base_price) if args.base_price else np.ones(data.K)
    if base.size != data.K:
        raise InputError(f"--base-price needs {data.K} entries")
    grid = args.grid
    if any(g <= 0 for g in grid):
        raise InputError("grid prices must be positive")
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["price", "eps", "lower", "upper", "status"])
    status = EXIT_OK
    for eps in args.eps.resolve(data):
        uppers, lowers = [], []
        for g in grid:
            p = base.copy()
            p[k] = g
            b = counterfactual.quantity_bounds(data, p, k, eps)
            if b.feasible:
                w.writerow([fmt(g), fmt(eps), fmt(b.lower), fmt(b.upper), b.status])
                uppers.append(b.upper)
                lowers.append(b.lower)
            else:
                w.writerow([fmt(g), fmt(eps), "", "", b.status])
        if data.K == 1 and list(grid) == sorted(grid) and uppers:
            if not (_nonincreasing(uppers) and _nonincreasing(lowers)):
                log.error("bounds are not nonincreasing in price at eps=%s", eps)
                status = EXIT_DISAGREE
    _emit(out.getvalue(), args.output)
    return status


def cmd_bounds_welfare(args) -> int:
    data = read_dataset(args.input)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["p1", "p0", "eps", "lower", "upper", "status", "h", "sandwich", "upper_region", "lower_region"])
    status = EXIT_OK
    for p1, p0 in args.query:
        if p1.size != data.K or p0.size != data.K:
            raise InputError(f"welfare queries need {data.K}-vectors")
        for eps in args.eps.resolve(data):
            b = welfare.indirect_diff_bounds(data, p1, p0, eps)
            row = [";".join(map(fmt, p1)), ";".join(map(fmt, p0)), fmt(eps)]
            if not b.feasible:
                w.writerow(row + ["", "", b.status, "", "", "", ""])
                continue
            h_val, sandwich = "", ""
            start = next((t for t in range(data.T) if np.array_equal(data.prices[t], p1)), None)
            if start is not None and data.T <= args.oracle_cap:
                h = welfare.h_function(data, eps, start, p0, cap=args.oracle_cap).value
                ok = h - eps - ORACLE_TOL <= b.upper <= h + eps + ORACLE_TOL
                h_val, sandwich = fmt(h), "ok" if ok else "violated"
                if not ok:
                    status = EXIT_DISAGREE
            regions = [f.split(": ", 1)[1] for f in b.flags]
            w.writerow(row + [fmt(b.lower), fmt(b.upper), b.status, h_val, sandwich] + regions)
    _emit(out.getvalue(), args.output)
    return status


def cmd_bounds_utility(args) -> int:
    data = read_dataset(args.input)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["x1", "x0", "eps", "lower", "upper", "status", "sequence_upper", "sequence_lower"])
    status = EXIT_OK
    for x1, x0 in args.query:
        if x1.size != data.K or x0.size != data.K:
            raise InputError(f"utility queries need {data.K}-vectors")
        for eps in args.eps.resolve(data):
            b = welfare.utility_diff_bounds(data, x1, x0, eps)
            row = [";".join(map(fmt, x1)), ";".join(map(fmt, x0)), fmt(eps)]
            if not b.feasible:
                w.writerow(row + ["", "", b.status, "", ""])
                continue
            seq_hi = seq_lo = ""
            if data.T <= args.oracle_cap and not np.allclose(x1, x0, atol=1e-9, rtol=0):
                at0 = [t for t in range(data.T) if np.allclose(data.quantities[t], x0, atol=1e-9, rtol=0)]
                at1 = [t for t in range(data.T) if np.allclose(data.quantities[t], x1, atol=1e-9, rtol=0)]
                if len(at0) == 1 and not at1:
                    v = welfare.utility_diff_upper_sequences(data, eps, x1, at0[0], args.oracle_cap).value
                    seq_hi = fmt(v)
                    if abs(v - b.upper) > ORACLE_TOL:
                        status = EXIT_DISAGREE
                if len(at1) == 1 and not at0:
                    v = welfare.utility_diff_lower_sequences(data, eps, at1[0], x0, args.oracle_cap).value
                    seq_lo = fmt(v)
                    if abs(v - b.lower) > ORACLE_TOL:
                        status = EXIT_DISAGREE
            w.writerow(row + [fmt(b.lower), fmt(b.upper), b.status, seq_hi, seq_lo])
    _emit(out.getvalue(), args.output)
    return status


def cmd_preprocess(args) -> int:
    cs = read_cross_section(args.input)
    h_y = args.bandwidth_y if args.bandwidth_y is not None else 0.75 * float(np.std(cs.Y))
    h_p = args.bandwidth_p if args.bandwidth_p is not None else bandwidth_rule(cs, h_y)
    cfg = KernelConfig(h_p=h_p, h_y=h_y)
    income = args.income if args.income is not None else float(np.mean(cs.Y))
    beta = robinson_beta(cs, cfg)
    pseudo = build_pseudo_dataset(cs, income, cfg, beta)
    log.info("beta=%s retained=%d clamped=%d", beta, pseudo.kept.size, pseudo.n_clamped)
    _emit(dataset_csv(pseudo.dataset), args.output)
    return EXIT_OK


def cmd_synth(args) -> int:
    levels = None
    if args.price_levels:
        levels = tuple(np.linspace(args.price_min, args.price_max, args.price_levels).tolist())
    spec = SynthSpec(
        pieces=((args.intercept, args.slope, args.income_slope),),
        sigma_u=args.sigma,
        price_range=(args.price_min, args.price_max),
        price_levels=levels,
    )
    _emit(cross_section_csv(synth_cross_section(args.seed, args.n, spec)), args.output)
    return EXIT_OK


def cmd_check(args) -> int:
    data = read_dataset(args.input)
    cap = args.oracle_cap
    report: dict = {"T": data.T, "K": data.K, "disagreements": []}
    lp_value = rationality.epsilon_star_lp(data)
    karp, cert = rationality.epsilon_star_cycles(data)
    brute = rationality.epsilon_star_bruteforce(data, cap=max(cap, 1)) if data.T <= cap else None
    report["eps_star"] = {"lp": lp_value, "cycles": karp, "bruteforce": brute}
    report["cycle"] = [t + 1 for t in cert.sequence] if cert else None
    values = [v for v in (lp_value, karp, brute) if v is not None]
    if max(values) - min(values) > AGREE_TOL:
        report["disagreements"].append("eps_star")

    if data.T <= cap:
        eps = lp_value
        probes = [data.prices.mean(axis=0), data.prices.max(axis=0) * 1.05, data.prices.min(axis=0) * 0.95]
        checked = 0
        for p in probes:
            system = counterfactual.halfspace_system(data, eps, p, cap=cap)
            for k in range(data.K):
                a = counterfactual.quantity_bounds(data, p, k, eps)
                b = system.extrema(k)
                for x, y in ((a.lower, b.lower), (a.upper, b.upper)):
                    if not (x == y or abs(x - y) <= ORACLE_TOL):
                        report["disagreements"].append(f"quantity bounds at {p.tolist()} good {k + 1}")
                checked += 1
        x1 = data.quantities.mean(axis=0) + 0.5
        for s in range(data.T):
            if np.allclose(data.quantities[s], x1):
                continue
            a = welfare.utility_diff_bounds(data, x1, data.quantities[s], eps).upper
            b = welfare.utility_diff_upper_sequences(data, eps, x1, s, cap).value
            if abs(a - b) > ORACLE_TOL:
                report["disagreements"].append(f"utility upper bound from observation {s + 1}")
            checked += 1
        p0 = data.prices.mean(axis=0)
        for s in range(data.T):
            v = welfare.indirect_diff_bounds(data, data.prices[s], p0, eps).upper
            h = welfare.h_function(data, eps, s, p0, cap).value
            if not h - eps - ORACLE_TOL <= v <= h + eps + ORACLE_TOL:
                report["disagreements"].append(f"welfare sandwich at observation {s + 1}")
            checked += 1
        report["sequence_checks"] = checked
    else:
        report["sequence_checks"] = 0
        report["skipped"] = f"enumeration oracles skipped: T={data.T} exceeds cap {cap}"
    report["agree"] = not report["disagreements"]
    _emit(json.dumps(report) + "\n", args.output)
    return EXIT_OK if report["agree"] else EXIT_DISAGREE


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlbounds", description="Bounds on demand and welfare from finite price-quantity data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True)
        p.add_argument("--output")
        return p

    def eps_flag(p):
        p.add_argument("--eps", type=parse_eps, default=EpsMode("adaptive"), help="adaptive | fixed=V | sweep=a,b,c")

    p = common(sub.add_parser("eps", help="minimal approximation error"))
    p.set_defaults(func=cmd_eps)

    p = common(sub.add_parser("bounds-quantity", help="demand bounds over a price grid"))
    eps_flag(p)
    p.add_argument("--grid", type=parse_grid, required=True, help="MIN:MAX:STEPS or a comma list")
    p.add_argument("--good", type=int, default=1)
    p.add_argument("--base-price", help="prices of the other goods (comma list), K > 1 only")
    p.set_defaults(func=cmd_bounds_quantity)

    for name, func, what in (
        ("bounds-welfare", cmd_bounds_welfare, "P1:P0 price pairs"),
        ("bounds-utility", cmd_bounds_utility, "X1:X0 bundle pairs"),
    ):
        p = common(sub.add_parser(name))
        eps_flag(p)
        p.add_argument("--query", type=parse_query, action="append", required=True, help=what)
        p.add_argument("--oracle-cap", type=int, default=DEFAULT_CAP)
        p.set_defaults(func=func)

    p = common(sub.add_parser("preprocess", help="pseudo-dataset from a cross-section"))
    p.add_argument("--bandwidth-y", type=float)
    p.add_argument("--bandwidth-p", type=float)
    p.add_argument("--income", type=float)
    p.set_defaults(func=cmd_preprocess)

    p = common(sub.add_parser("synth", help="synthetic cross-section"), needs_input=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--intercept", type=float, default=6.0)
    p.add_argument("--slope", type=float, default=2.0)
    p.add_argument("--income-slope", type=float, default=0.0)
    p.add_argument("--price-min", type=float, default=1.0)
    p.add_argument("--price-max", type=float, default=2.0)
    p.add_argument("--price-levels", type=int, default=0, help="draw prices from this many evenly spaced levels")
    p.set_defaults(func=cmd_synth)

    p = common(sub.add_parser("check", help="cross-check every route on a dataset"))
    p.add_argument("--oracle-cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, DatasetError, OracleCapError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
