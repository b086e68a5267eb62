"""Command-line front end.

Every subcommand reads an optional JSON input, evaluates over a parameter
sweep and writes ``summary.json``, ``<subcommand>.csv`` and ``meta.json`` to
``--out``. Nothing is written unless the whole run succeeds.

Exit codes: 0 success, 1 acceptance failure (``verify``), 2 invalid input,
3 size cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import acceptance, bounds, broadcast, oracle, probcore, sampler
from .bounds import CoveringSet, RatePair
from .errors import SizeCapExceeded, ValidationError

LN2 = math.log(2)

DEFAULT_SWEEPS = {
    "m": [4], "l": [4], "gamma": [1.0], "delta": [1.0], "eps": [0.1], "p": [0.5],
    "n": [1], "k": [10**4], "r1": [0.5], "r2": [0.5], "a": [1.0],
    "alpha": [0.5, 1.5, 2.0, 3.0],
}
INT_KEYS = {"m", "l", "n", "k"}

BOUND_NAMES = ("unilateral", "resolvability", "secondmoment", "limited_independence",
               "talagrand", "typical_optimized", "sim_achievability", "sim_converse",
               "weighted_mean", "weighted_tail", "worstcase_gap", "multivariate")
SPECTRUM_ONLY = {"typical_optimized", "sim_achievability", "sim_converse",
                 "weighted_mean", "weighted_tail", "worstcase_gap"}


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return "" if x is None else str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
        return float(f"{x:.12g}")
    return x


def parse_sweep(text: str) -> tuple[str, list]:
    """``key=a:b:step`` (inclusive range) or ``key=v1,v2,...``."""
    if "=" not in text:
        raise ValidationError(f"sweep {text!r} must look like key=a:b:step or key=v1,v2")
    key, spec = text.split("=", 1)
    key = key.strip()
    try:
        if ":" in spec:
            a, b, step = (float(x) for x in spec.split(":"))
            if step <= 0 or b < a:
                raise ValidationError(f"sweep {text!r}: need step > 0 and a <= b")
            count = int(math.floor((b - a) / step + 1e-9)) + 1
            vals = [a + i * step for i in range(count)]
        else:
            vals = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"sweep {text!r}: values must be numbers") from None
    if not vals:
        raise ValidationError(f"sweep {text!r} is empty")
    if key in INT_KEYS:
        if any(v != round(v) for v in vals):
            raise ValidationError(f"sweep {key} takes integers")
        vals = [int(round(v)) for v in vals]
    return key, vals


def _sweeps(args) -> dict:
    out = {k: list(v) for k, v in DEFAULT_SWEEPS.items()}
    for item in args.sweep or []:
        key, vals = parse_sweep(item)
        if key not in out:
            raise ValidationError(f"unknown sweep key {key!r}; known: {sorted(out)}")
        out[key] = vals
    return out


def _grid(sw: dict, keys) -> list[dict]:
    return [dict(zip(keys, combo)) for combo in itertools.product(*(sw[k] for k in keys))]


def _load_input(path) -> dict:
    if path is None:
        raise ValidationError("--input is required for this subcommand")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"input file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"input {path} is not valid JSON: {exc}") from None


def _joint(obj: dict) -> probcore.JointPmf:
    src = obj.get("joint", obj)
    if not isinstance(src, dict) or "matrix" not in src:
        raise ValidationError("input needs a joint distribution with a 'matrix' entry")
    return probcore.joint_from_json(src)


def _covering(obj: dict, j: probcore.JointPmf, choice: str) -> CoveringSet:
    if "covering" in obj:
        return CoveringSet.from_mask(obj["covering"], j)
    if choice == "full":
        return CoveringSet.full(j)
    kind, _, rest = choice.partition(":")
    try:
        if kind == "threshold":
            return CoveringSet.density_threshold(j, float(rest))
        if kind == "window":
            a, b = (float(x) for x in rest.split(":"))
            return oracle.density_window_set(j, a, b)
    except ValueError:
        pass
    raise ValidationError(f"--covering {choice!r}: use full, threshold:T or window:A:B")


def _info_units(x: float, bits: bool) -> float:
    return x / LN2 if bits else x


# subcommands: each returns (summary dict, csv header, csv rows, extra files)

def cmd_info(args, sw):
    j = _joint(_load_input(args.input))
    b = args.bits
    rows = []
    for alpha in sw["alpha"]:
        rows.append([alpha, _info_units(probcore.renyi_divergence(j, alpha), b)])
    summary = {"mutual_information": _info_units(probcore.mutual_information(j), b),
               "varentropy": _info_units(probcore.varentropy(j), b),
               "density": [[_info_units(x, b) for x in row] for row in j.density.tolist()],
               "units": "bits" if b else "nats"}
    return summary, ["alpha", "renyi_divergence"], rows, {}


def _eval_bound(name, j, spec, f, mv, prm):
    m, l, gamma = prm["m"], prm["l"], prm["gamma"]
    x = spec if name in SPECTRUM_ONLY else j
    if name == "unilateral":
        return bounds.unilateral_bound(j, f, m, gamma)
    if name == "resolvability":
        return bounds.resolvability_bound(j, f, m, l, prm["delta"], gamma)
    if name == "secondmoment":
        return bounds.secondmoment_bound(j, f, m, l, prm["eps"])
    if name == "limited_independence":
        return bounds.limited_independence_bound(j, f, m, l, gamma)
    if name == "talagrand":
        return bounds.talagrand_bound(j, f, m, l, gamma)
    if name == "multivariate":
        return bounds.multivariate_bound(mv, [m, l], gamma, f.mask[None])
    if name == "typical_optimized":
        return bounds.typical_bound_optimized(x, prm["p"], m, l)
    if name == "sim_achievability":
        return bounds.sim_achievability_bound(x, m, l, prm["p"])
    if name == "sim_converse":
        return bounds.sim_converse_bound(x, m, l)
    if name in ("weighted_mean", "weighted_tail"):
        mean_bound, tail_bound = bounds.weighted_sampler_bound(x, m, l)
        return mean_bound if name == "weighted_mean" else tail_bound
    if name == "worstcase_gap":
        return bounds.worstcase_gap_bound(x, m, l, prm["p"])
    raise ValidationError(f"unknown bound {name!r}")


def cmd_bound(args, sw):
    obj = _load_input(args.input)
    j = _joint(obj)
    names = args.name or ["talagrand"]
    for name in names:
        if name not in BOUND_NAMES:
            raise ValidationError(f"unknown bound {name!r}; known: {', '.join(BOUND_NAMES)}")
    f = _covering(obj, j, args.covering)
    mv = probcore.MultivarPmf.from_joint(j)
    keys = ["n", "m", "l", "gamma", "delta", "eps", "p"]
    header = keys + ["bound_name", "bound_value", "log_value"]
    rows, reports = [], []
    for prm in _grid(sw, keys):
        spec = j.spectrum.power(prm["n"])
        for name in names:
            if prm["n"] != 1 and name not in SPECTRUM_ONLY:
                raise ValidationError(f"bound {name} needs a covering set; n must be 1")
            rep = _eval_bound(name, j, spec, f, mv, prm)
            rows.append([prm[k] for k in keys] + [name, rep.value, rep.log_value])
            reports.append({"params": prm, **rep.to_json()})
    return {"covering": f.provenance, "reports": reports}, header, rows, {}


def cmd_oracle(args, sw):
    obj = _load_input(args.input)
    j = _joint(obj)
    f = _covering(obj, j, args.covering)
    mv = probcore.MultivarPmf.from_joint(j)
    header = ["m", "l", "gamma", "exact", "mc_mean", "mc_stderr", "bound_name", "bound_value"]
    rows, points = [], []
    for prm in _grid(sw, ["m", "l", "gamma"]):
        m, l, gamma = prm["m"], prm["l"], prm["gamma"]
        exact = oracle.exact_failure(j, f, m, l)
        mc = oracle.mc_failure(j, f, oracle.CodebookSpec(m, l, args.seed, args.samples),
                               workers=args.workers)
        reps = [bounds.talagrand_bound(j, f, m, l, gamma),
                bounds.limited_independence_bound(j, f, m, l, gamma),
                bounds.multivariate_bound(mv, [m, l], gamma, f.mask[None])]
        for rep in reps:
            rows.append([m, l, gamma, exact, mc.mean, mc.stderr, rep.name, rep.value])
        points.append({**prm, "exact": exact, "mc": mc.to_json(),
                       "bounds": [r.to_json() for r in reps]})
    return {"covering": f.provenance, "points": points}, header, rows, {}


def cmd_duality(args, sw):
    j = _joint(_load_input(args.input))
    header = ["m", "l", "k", "sup_side", "inf_side", "slack", "le_holds", "within_slack"]
    rows, reports = [], []
    for prm in _grid(sw, ["m", "l", "k"]):
        d = sampler.duality_check(j, prm["m"], prm["l"], prm["k"])
        rows.append([prm["m"], prm["l"], prm["k"], d.sup_side, d.inf_side, d.slack,
                     d.le_holds, d.within_slack])
        reports.append({**prm, **d.to_json()})
    return {"checks": reports}, header, rows, {}


def cmd_sampler(args, sw):
    j = _joint(_load_input(args.input))
    header = ["m", "l", "k", "sup_side", "inf_side", "slack", "weighted_tv", "weighted_bound"]
    rows, entries, files = [], [], {}
    for prm in _grid(sw, ["m", "l", "k"]):
        m, l, k = prm["m"], prm["l"], prm["k"]
        sup, _ = oracle.worstcase_gap_exact(j, m, l)
        res = sampler.optimal_pair_sampler(j, m, l, k)
        inf = sampler.exact_tv_of_rule(j, res.rule, m, l)
        slack = 4.0 * (j.matrix.size + res.rule.slots.shape[0]) / k
        wtv = sampler.exact_tv_of_rule(j, sampler.weighted_sampler_rule(j, m, l), m, l)
        mean_bound, _ = bounds.weighted_sampler_bound(j, m, l)
        rule_name = f"rule_m{m}_l{l}_k{k}.json"
        files[rule_name] = json.dumps(_jsonable(res.rule.to_json()), indent=1, sort_keys=True)
        rows.append([m, l, k, sup, inf, slack, wtv, mean_bound.value])
        entries.append({**prm, "sup_side": sup, "inf_side": inf, "slack": slack,
                        "rule_path": rule_name, "weighted_tv": wtv,
                        "weighted_bound": mean_bound.value})
    return {"results": entries}, header, rows, files


def _broadcast_input(obj):
    j = _joint(obj)
    try:
        cy = probcore.CondPmf.from_matrix(obj["channel_y"])
        cz = probcore.CondPmf.from_matrix(obj["channel_z"])
        x_map = np.asarray(obj["x_map"], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"broadcast input needs {exc.args[0]!r}") from None
    return j, (cy, cz), x_map


def cmd_exponent(args, sw):
    obj = _load_input(args.input)
    kind = args.kind
    b = args.bits
    header = ["kind", "r1", "r2", "a", "value", "parameter"]
    rows, entries = [], []
    if kind == "broadcast":
        j, channels, x_map = _broadcast_input(obj)
    else:
        j = _joint(obj)
    rate_grid = _grid(sw, ["r1", "r2"])
    if kind == "second-order":
        for a in sw["a"]:
            val = bounds.second_order_error(j, a)
            rows.append([kind, None, None, a, val, None])
            entries.append({"a": a, "value": val})
        return {"kind": kind, "results": entries}, header, rows, {}
    for prm in rate_grid:
        rates = RatePair(prm["r1"], prm["r2"])
        par = None
        if kind == "dee":
            val = bounds.dee_exponent(j, rates)
        elif kind == "sim":
            rep = bounds.sim_exponent_report(j, rates)
            val, par = rep.value, rep.params["alpha"]
        elif kind == "weighted":
            det = bounds.weighted_exponent_details(j, rates)
            val, par = det.value, det.rho
        elif kind == "broadcast":
            rep = broadcast.broadcast_exponent_report(j, channels, x_map, rates)
            val, par = rep.value, rep.params["theta"]
        else:
            raise ValidationError(f"unknown exponent kind {kind!r}")
        shown = _info_units(val, b)
        rows.append([kind, _info_units(prm["r1"], b), _info_units(prm["r2"], b), None,
                     shown, par])
        entries.append({**prm, "value": shown, "parameter": par})
    return {"kind": kind, "units": "bits" if b else "nats", "results": entries}, header, rows, {}


def cmd_verify(args, sw):
    results = acceptance.run_all(echo=lambda s: print(s, file=sys.stderr))
    header = ["criterion", "name", "passed", "detail"]
    rows = [[r.number, r.name, r.passed, r.detail] for r in results]
    summary = {"all_passed": all(r.passed for r in results),
               "criteria": [{"number": r.number, "name": r.name, "passed": r.passed,
                             "detail": r.detail} for r in results]}
    return summary, header, rows, {}


COMMANDS = {"info": cmd_info, "bound": cmd_bound, "oracle": cmd_oracle,
            "duality": cmd_duality, "sampler": cmd_sampler, "exponent": cmd_exponent,
            "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="JSON input (joint distribution, optional covering)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--bits", action="store_true",
                        help="report information quantities in bits (inputs stay in nats)")
    common.add_argument("--sweep", action="append", metavar="KEY=A:B:STEP",
                        help="sweep a parameter (inclusive range or comma list); repeatable")
    common.add_argument("--samples", type=int, default=10_000, help="Monte Carlo samples")
    common.add_argument("--covering", default="full",
                        help="covering set: full, threshold:T or window:A:B")

    parser = argparse.ArgumentParser(prog="mutualcover", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("info", parents=[common], help="mutual information, varentropy, densities")
    p = sub.add_parser("bound", parents=[common], help="evaluate named bounds over sweeps")
    p.add_argument("--name", action="append", help=f"one of {', '.join(BOUND_NAMES)}")
    sub.add_parser("oracle", parents=[common], help="exact and Monte Carlo failure vs bounds")
    sub.add_parser("duality", parents=[common], help="worst-case gap vs optimal selection TV")
    sub.add_parser("sampler", parents=[common], help="optimal and weighted selection rules")
    p = sub.add_parser("exponent", parents=[common], help="asymptotic exponents")
    p.add_argument("--kind", default="dee",
                   choices=["dee", "sim", "weighted", "broadcast", "second-order"])
    sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    return parser


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _config_hash(args, input_bytes: bytes) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "workers")}
    h = hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode())
    h.update(input_bytes)
    return h.hexdigest()


def _write_all(out_dir: Path, files: dict[str, str]) -> None:
    """Stage every file first, then move them into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.workers < 1 or args.samples < 1:
            raise ValidationError("--workers and --samples must be positive")
        sw = _sweeps(args)
        summary, header, rows, extra = COMMANDS[args.command](args, sw)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SizeCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    input_bytes = Path(args.input).read_bytes() if args.input else b""
    meta = {"command": args.command, "config_hash": _config_hash(args, input_bytes),
            "seed": args.seed, "version": __version__, "workers": args.workers}
    files = {"summary.json": json.dumps(_jsonable(summary), indent=1, sort_keys=True) + "\n",
             f"{args.command}.csv": _csv_text(header, rows),
             "meta.json": json.dumps(meta, indent=1, sort_keys=True) + "\n", **extra}
    _write_all(Path(args.out), files)
    if args.command == "verify" and not summary["all_passed"]:
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
