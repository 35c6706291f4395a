"""Command-line front end.

Every subcommand writes one JSON document or one CSV table to ``--out``
(standard output by default).  Exit status: 0 on success, 1 when a
verification fails or an operation raises, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from cointoss import decay, normality
from cointoss.errors import CointossError
from cointoss.transform import DEFAULT_GUARD_BITS, mu_hat, mu_hat_sq, parse_rational
from cointoss.weights import classify_ratio, parse_weight_spec, singularity_diagnostic

SUBCOMMANDS = ("eval", "decay-scan", "blocks", "rajchman", "lower-bound", "normality",
               "weyl", "del", "cassels", "constants")

CHI2_REQUIRED = 0.95
WEYL_REQUIRED = 0.90
DEL_SUBLINEAR = 0.95


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class Command:
    subcommand: str
    options: dict[str, Any] = field(default_factory=dict)


def _weight(text):
    try:
        return parse_weight_spec(text)
    except CointossError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _rational(text):
    try:
        return parse_rational(text)
    except CointossError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _integer(text):
    t = _rational(text)
    if t.denominator != 1:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text}")
    return int(t)


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text):
    value = int(text)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cointoss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        return p

    def guard(p):
        p.add_argument("--guard-bits", type=_positive, default=DEFAULT_GUARD_BITS)

    p = add("eval", "evaluate the transform at a rational t")
    p.add_argument("--phi", type=_weight, required=True)
    p.add_argument("--t", type=_rational, required=True)
    p.add_argument("--base", type=int, default=2)
    guard(p)

    p = add("decay-scan", "scan |mu_hat| and its envelopes over octaves (CSV)")
    p.add_argument("--phi", type=_weight, required=True)
    p.add_argument("--m-min", type=int, default=4)
    p.add_argument("--m-max", type=int, default=20)
    p.add_argument("--samples", type=_positive, default=16)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--threads", type=_positive, default=None)
    guard(p)

    p = add("blocks", "block decomposition of an integer t with envelope checks")
    p.add_argument("--phi", type=_weight, required=True)
    p.add_argument("--t", type=_integer, required=True)
    p.add_argument("--K", type=float, default=None)
    guard(p)

    p = add("rajchman", "base-a transform floor at t = a^k")
    p.add_argument("--phi", type=_weight, required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--k-max", type=_positive, default=12)
    guard(p)

    p = add("lower-bound", "lower bound at t = 2^m for m in [m-min, m-max]")
    p.add_argument("--phi", type=_weight, required=True)
    p.add_argument("--m-min", type=int, default=0)
    p.add_argument("--m-max", type=int, default=40)
    guard(p)

    p = add("normality", "Monte Carlo normality battery over consecutive seeds")
    p.add_argument("--phi", type=_weight, required=True)
    p.add_argument("--digits", type=_positive, default=1 << 15)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--samples", type=_positive, default=100, help="number of seeds")
    p.add_argument("--block-len", type=_positive, default=3)
    p.add_argument("--b", type=int, default=3, help="conversion base")
    p.add_argument("--N", type=_positive, default=1 << 10, help="Weyl sum length")
    p.add_argument("--h", type=int, default=1)
    p.add_argument("--threads", type=_positive, default=None)

    p = add("weyl", "Weyl sum of one sampled point")
    p.add_argument("--phi", type=_weight, required=True)
    p.add_argument("--digits", type=_positive, default=1 << 15)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--h", type=int, default=1)
    p.add_argument("--N", type=_positive, default=1 << 10)

    p = add("del", "partial sums of |mu_hat(h b^n)|")
    p.add_argument("--phi", type=_weight, required=True)
    p.add_argument("--h", type=int, default=1)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--N", type=_positive, default=1 << 12)
    guard(p)

    p = add("cassels", "residue-string bijection for h b^n mod 2^(l+r)")
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--r", type=_positive, required=True)

    p = add("constants", "envelope constants of a weight")
    p.add_argument("--phi", type=_weight, required=True)
    p.add_argument("--K", type=float, default=None)
    return parser


def parse_args(argv: list[str]) -> Command:
    """Validate ``argv``; raises :class:`UsageError` on anything malformed."""
    ns = build_parser().parse_args(argv)
    opts = vars(ns)
    return Command(opts.pop("subcommand"), opts)


# -- output --------------------------------------------------------------------

def _num(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def to_json(obj) -> str:
    """JSON with every binary64 printed to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    return json.dumps(str(obj))


# -- subcommands ---------------------------------------------------------------

def _eval(o):
    tv = mu_hat(o["phi"], o["t"], o["guard_bits"], o["base"])
    return {"t": str(o["t"]), "re": tv.value.real, "im": tv.value.imag, "modulus": tv.modulus,
            "trunc_bound": tv.truncation_bound, "terms_used": tv.terms_used}, True


def _decay_scan(o):
    table = decay.decay_scan(o["phi"], o["m_min"], o["m_max"], o["samples"], o["seed"],
                             o["guard_bits"], o["threads"])
    return table.to_csv(), True


def _blocks(o):
    spec = o["phi"]
    consts = decay.derive_constants(spec, K=o["K"])
    decomp = decay.block_decompose(o["t"], consts.K_phi)
    good = decay.verify_lemma22(decomp)
    sq = mu_hat_sq(spec, o["t"], o["guard_bits"])
    envelope = decay.lemma31_bound(spec, decomp, consts)
    envelope_check = decay.Report(sq.value <= envelope + sq.truncation_bound, sq.value, envelope,
                                  envelope - sq.value, {"error": sq.truncation_bound})
    out = {"decomposition": decomp.to_dict(), "good_indices": good.to_dict(),
           "envelope": envelope_check.to_dict()}
    return out, good.passed and envelope_check.passed


def _rajchman(o):
    report = decay.rajchman_check(o["phi"], o["a"], o["k_max"], o["guard_bits"])
    return report.to_dict(), report.passed


def _lower_bound(o):
    rows = [decay.lower_bound_check(o["phi"], m, o["guard_bits"]).to_dict()
            for m in range(o["m_min"], o["m_max"] + 1)]
    ok = all(r["pass"] for r in rows)
    return {"pass": ok, "rows": rows}, ok


def _battery(job):
    spec, seed, opts = job
    return normality.normality_tests(
        spec, seed, L=opts["digits"], block_lens=tuple(range(1, opts["block_len"] + 1)),
        bases=(opts["b"],), weyl_bases=(2, opts["b"]) if opts["b"] != 2 else (2,),
        weyl_N=opts["N"], h=opts["h"])


def _normality(o):
    spec = o["phi"]
    opts = {k: o[k] for k in ("digits", "block_len", "b", "N", "h")}
    jobs = [(spec, o["seed"] + i, opts) for i in range(o["samples"])]
    results = decay._map(_battery, jobs, o["threads"])
    names = [t["name"] for t in results[0].tests]
    summary = []
    for name in names:
        passes = sum(next(t for t in r.tests if t["name"] == name)["pass"] for r in results)
        required = WEYL_REQUIRED if name.startswith("weyl") else CHI2_REQUIRED
        summary.append({"name": name, "passes": passes, "total": len(results),
                        "required_fraction": required, "pass": passes >= required * len(results)})
    ok = all(s["pass"] for s in summary)
    return {"pass": ok, "summary": summary,
            "per_seed": [{"seed": r.seed, "tests": r.tests} for r in results]}, ok


def _weyl(o):
    point = normality.sample_point(o["phi"], o["digits"], o["seed"])
    ws = normality.weyl_sum(point, o["b"], o["h"], o["N"])
    threshold = normality.WEYL_CONSTANT / math.sqrt(ws.n_used)
    ok = ws.valid and abs(ws.value) <= threshold
    return {"name": f"weyl_b{o['b']}_h{o['h']}", "re": ws.value.real, "im": ws.value.imag,
            "statistic": abs(ws.value), "threshold": threshold, "valid": ws.valid,
            "n_used": ws.n_used, "pass": ok}, ok


def _del(o):
    diag = normality.del_partial_sums(o["phi"], o["h"], o["b"], o["N"], o["guard_bits"])
    ok = diag.fitted_exponent < DEL_SUBLINEAR
    return {"fitted_exponent": diag.fitted_exponent, "threshold": DEL_SUBLINEAR,
            "final_sum": float(diag.sums[-1]), "sums": diag.sums.tolist(), "pass": ok}, ok


def _cassels(o):
    report = normality.cassels_check(o["h"], o["b"], o["r"])
    return report.to_dict(), report.passed


def _constants(o):
    spec = o["phi"]
    tag = classify_ratio(spec)
    consts = decay.derive_constants(spec, tag, K=o["K"])
    verdict, partial = singularity_diagnostic(spec, 1000)
    return {**consts.to_dict(), "singularity": verdict.value, "phi_sq_partial_sum_1000": partial}, True


_HANDLERS = {
    "eval": _eval, "decay-scan": _decay_scan, "blocks": _blocks, "rajchman": _rajchman,
    "lower-bound": _lower_bound, "normality": _normality, "weyl": _weyl, "del": _del,
    "cassels": _cassels, "constants": _constants,
}


def execute(cmd: Command, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        payload, ok = _HANDLERS[cmd.subcommand](cmd.options)
        status = 0 if ok else 1
    except CointossError as exc:
        payload, status = {"error": type(exc).__name__, "message": str(exc)}, 1
    text = payload if isinstance(payload, str) else to_json(payload) + "\n"
    out = cmd.options.get("out")
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return status


def main(argv: list[str] | None = None) -> int:
    try:
        cmd = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    return execute(cmd)


if __name__ == "__main__":
    sys.exit(main())
