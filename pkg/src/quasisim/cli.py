"""Command-line interface.

Exit codes: 0 success, 1 usage or parse error, 2 resource/budget or
dimension error, 3 verification failure.

The enumeration budget is taken from ``--budget``, then the
``QUASISIM_BUDGET`` environment variable, then the built-in default.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction

from . import analysis, verify
from .circuit import CircuitError, PauliError, load_circuit, parse_pauli
from .exact import DimensionError, parity_probability, pauli_expectation, run_exact
from .quasiprob import (
    DEFAULT_BUDGET,
    BudgetExceeded,
    ProductState,
    default_workers,
    enumerate_sequences,
    observable_label,
    overhead_ratio,
    sample,
)

BUDGET_ENV = "QUASISIM_BUDGET"

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def num(x: float) -> float:
    """Round to 12 significant digits for serialization."""
    return float(f"{x:.12g}")


def parse_observable(text: str, n: int):
    if "=" in text:
        letters, par = text.split("=", 1)
        par = par.strip()
        if par not in ("+1", "1", "-1"):
            raise UsageError(f"parity in {text!r} must be +1 or -1")
        parity = -1 if par == "-1" else 1
    else:
        letters, parity = text, 1
    try:
        return parse_pauli(letters, n), parity
    except PauliError as exc:
        raise UsageError(str(exc)) from None


def _budget(args) -> int:
    if args.budget is not None:
        return args.budget
    env = os.environ.get(BUDGET_ENV)
    if env:
        try:
            return int(float(env))
        except ValueError:
            raise UsageError(f"{BUDGET_ENV}={env!r} is not a number") from None
    return DEFAULT_BUDGET


def _load(args):
    if not args.circuit:
        raise UsageError("--circuit is required")
    try:
        c = load_circuit(args.circuit)
    except OSError as exc:
        raise UsageError(f"cannot read circuit: {exc}") from None
    except CircuitError as exc:
        raise UsageError(f"{args.circuit}: {exc}") from None
    if args.input:
        if len(args.input) != c.n_qubits:
            raise DimensionError(f"--input has {len(args.input)} qubits, circuit has {c.n_qubits}")
        try:
            state = ProductState.from_label(args.input)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        state = ProductState.zeros(c.n_qubits)
    obs = [parse_observable(o, c.n_qubits) for o in args.obs]
    if not obs:
        raise UsageError("at least one --obs is required")
    return c, state, obs


def _table(headers, rows) -> str:
    cells = [list(map(str, headers))] + [[str(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _csv(headers, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.12g}"


# -- commands ---------------------------------------------------------------


def cmd_exact(args) -> str:
    c, state, obs = _load(args)
    psi = run_exact(c, state.to_statevector())
    records = []
    for p, parity in obs:
        records.append(
            {
                "observable": observable_label((p, parity)),
                "expectation": num(pauli_expectation(psi, p)),
                "p_plus": num(parity_probability(psi, p, 1)),
                "p_minus": num(parity_probability(psi, p, -1)),
                "probability": num(parity_probability(psi, p, parity)),
            }
        )
    if args.format == "json":
        return json.dumps({"n_qubits": c.n_qubits, "n_cnots": c.n_cnots, "observables": records}, indent=2)
    headers = ["observable", "expectation", "p(+1)", "p(-1)", "probability"]
    rows = [[r["observable"], _fmt(r["expectation"]), _fmt(r["p_plus"]), _fmt(r["p_minus"]), _fmt(r["probability"])] for r in records]
    return _csv(headers, rows) if args.format == "csv" else _table(headers, rows)


def enumeration_json(res) -> dict:
    labels = [observable_label(o) for o in res.observables]
    return {
        "n_qubits": res.n_qubits,
        "n_cnots": res.n_cnots,
        "sequences": [
            {
                "label": r.label,
                "sign": r.sign,
                "conditionals": {lab: num(v) for lab, v in zip(labels, r.conditionals)},
            }
            for r in res.rows
        ],
        "totals": {lab: num(v) for lab, v in zip(labels, res.totals)},
        "amplification": int(res.amplification),
    }


def _enumeration_text(res, fmt: str) -> str:
    labels = [observable_label(o) for o in res.observables]
    headers = ["sequence", "p(i)"] + labels
    rows = [[r.label, f"{r.sign:+d}"] + [_fmt(v) for v in r.conditionals] for r in res.rows]
    total_row = ["total", ""] + [_fmt(v) for v in res.totals]
    if fmt == "csv":
        return _csv(headers, rows + [total_row])
    return (
        _table(headers, rows + [total_row])
        + f"\n\nN = {res.n_cnots} CNOTs, {len(res.rows)} sequences, amplification 3^N = {int(res.amplification)}"
    )


def cmd_enumerate(args) -> str:
    c, state, obs = _load(args)
    res = enumerate_sequences(c, state, obs, budget=_budget(args), workers=args.workers)
    if args.format == "json":
        return json.dumps(enumeration_json(res), indent=2)
    return _enumeration_text(res, args.format)


def cmd_sample(args) -> str:
    if args.shots is None or args.shots < 1:
        raise UsageError("--shots must be >= 1")
    c, state, obs = _load(args)
    ests = sample(c, state, obs, args.shots, seed=args.seed, workers=args.workers)
    n_cnots = c.n_cnots
    records = [
        {
            "observable": e.observable,
            "p_pos": num(e.p_pos),
            "p_neg": num(e.p_neg),
            "amplification": int(e.amplification),
            "estimate": num(e.estimate),
            "std_error": num(e.std_error),
            "shots": e.shots,
            "seed": e.seed,
        }
        for e in ests
    ]
    if args.format == "json":
        doc = {
            "n_qubits": c.n_qubits,
            "n_cnots": n_cnots,
            "overhead": int(overhead_ratio(n_cnots)),
            "estimates": records,
        }
        return json.dumps(doc, indent=2)
    headers = ["observable", "p_pos", "p_neg", "amplification", "estimate", "std_error", "shots", "seed"]
    rows = [[r[h] if not isinstance(r[h], float) else _fmt(r[h]) for h in headers] for r in records]
    if args.format == "csv":
        return _csv(headers, rows)
    return _table(headers, rows) + (
        f"\n\noverhead: sum|p(i)|/sum p(i) = 3^{n_cnots} = {int(overhead_ratio(n_cnots))}"
    )


def _ninths(p: float, amp: int) -> str:
    """3/9 style when p * amp is whole, reduced fraction otherwise."""
    k = Fraction(p * amp).limit_denominator(1000)
    if k.denominator == 1:
        return f"{k}/{amp}"
    return str(Fraction(p).limit_denominator(10**6))


def cmd_ghz_table(args) -> str:
    rep = analysis.ghz_table()
    classical = [
        {
            "observable": f.observable,
            "p_pos": num(f.p_pos),
            "p_neg": num(f.p_neg),
            "p_pos_fraction": _ninths(f.p_pos, f.amplification),
            "p_neg_fraction": _ninths(f.p_neg, f.amplification),
            "amplification": f.amplification,
            "reconstruction": num(f.reconstruction),
        }
        for f in rep.classical
    ]
    if args.format == "json":
        doc = enumeration_json(rep.enumeration)
        doc["classical"] = classical
        return json.dumps(doc, indent=2)
    table = _enumeration_text(rep.enumeration, args.format)
    headers = ["observable", "p_pos", "p_neg", "amplification", "reconstruction"]
    rows = [
        [f["observable"], f["p_pos_fraction"], f["p_neg_fraction"], f["amplification"], _fmt(f["reconstruction"])]
        for f in classical
    ]
    if args.format == "csv":
        return table + "\n" + _csv(headers, rows)
    return table + "\n\nclassical frequencies (uniform 1/9 per sequence):\n" + _table(headers, rows)


def cmd_verify(args):
    tol = args.tol if args.tol is not None else verify.DEFAULT_TOL
    checks = verify.run_checks(tol)
    ok = all(ch.passed for ch in checks)
    if args.format == "json":
        text = json.dumps(
            {
                "passed": ok,
                "checks": [
                    {"name": ch.name, "passed": ch.passed, "residual": num(ch.residual), "detail": ch.detail}
                    for ch in checks
                ],
            },
            indent=2,
        )
    else:
        headers = ["check", "status", "residual", "detail"]
        rows = [[ch.name, "PASS" if ch.passed else "FAIL", f"{ch.residual:.3e}", ch.detail] for ch in checks]
        text = _csv(headers, rows) if args.format == "csv" else _table(headers, rows)
    return text, (EXIT_OK if ok else EXIT_VERIFY)


COMMANDS = {
    "exact": cmd_exact,
    "enumerate": cmd_enumerate,
    "sample": cmd_sample,
    "ghz-table": cmd_ghz_table,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--circuit", metavar="PATH")
    common.add_argument("--obs", action="append", default=[], metavar="STR=±1",
                        help="Pauli parity observable, e.g. XXX=+1 (repeatable)")
    common.add_argument("--input", metavar="LABEL",
                        help="product input state, one of 0 1 + - r l per qubit (default all 0)")
    common.add_argument("--shots", type=int)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("pretty", "json", "csv"), default="pretty")
    common.add_argument("--budget", type=lambda s: int(float(s)), metavar="B")
    common.add_argument("--workers", type=int, default=default_workers(), metavar="W")
    common.add_argument("--tol", type=float, help="verification tolerance override")
    common.add_argument("--output", "-o", metavar="PATH", help="write the report here instead of stdout")

    parser = _Parser(prog="quasisim", description="Signed local-operation simulation of CNOT circuits.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "exact": "dense state-vector parity probabilities",
        "enumerate": "exact signed enumeration over all 3^N sequences",
        "sample": "signed Monte Carlo estimate",
        "ghz-table": "nine-sequence GHZ table and classical frequencies",
        "verify": "run the decomposition invariant checks",
    }
    for name, h in helps.items():
        sub.add_parser(name, parents=[common], help=h)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        result = COMMANDS[args.command](args)
        code = EXIT_OK
        if isinstance(result, tuple):
            result, code = result
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"error: {exc}; raise it with --budget {exc.required}", file=sys.stderr)
        return EXIT_RESOURCE
    except (DimensionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(result.rstrip("\n") + "\n")
    else:
        print(result)
    return code


if __name__ == "__main__":
    sys.exit(main())
