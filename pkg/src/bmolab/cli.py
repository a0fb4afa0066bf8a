"""Command-line interface.

Exit codes: 0 success, 1 invariant violation, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .dyadic import RectCollection
from .harness import (
    BadConfig,
    ExperimentConfig,
    emit_report,
    run_experiment,
)
from .journe import JourneConfig, few_small_ratio, journe_full
from .norms import bmo_estimate, bmo_minus1
from .paraproduct import Deltas, bounds_report
from .wavelet import WaveletCoeffs, build_family


def _load_config(args) -> ExperimentConfig:
    cfg = (
        ExperimentConfig.from_file(args.config)
        if getattr(args, "config", None)
        else ExperimentConfig()
    )
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out = args.out
    return cfg


def _emit(args, report: dict):
    fmt = getattr(args, "format", "json")
    text = emit_report(report, fmt, getattr(args, "out", None))
    if not getattr(args, "out", None):
        sys.stdout.write(text + ("\n" if not text.endswith("\n") else ""))


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    report, code = run_experiment(cfg, "verify")
    _emit(args, report)
    return code


def cmd_journe(args) -> int:
    text = Path(args.input).read_text()
    coll = RectCollection.from_text(text)
    cfg = JourneConfig(Fraction(args.delta), Fraction(args.epsilon))
    V, rep = journe_full(coll, cfg)
    per_rect = []
    ok = True
    for r in sorted(coll):
        t = rep.traces[r]
        ok = ok and t.contained
        per_rect.append(
            {"emb": float(t.emb), "iota": t.iota, "contained": t.contained}
        )
    subsets = [[r] for r in coll] + [list(coll)]
    report = {
        "schema": "v1",
        "V_measure": float(V.measure),
        "shadow_measure": float(coll.shadow.measure),
        "ratio": float(V.measure / coll.shadow.measure),
        "per_rect": per_rect,
        "few_small_ratio": few_small_ratio(coll, V, cfg.epsilon, subsets),
    }
    _emit(args, report)
    return 0 if ok else 1


def cmd_norms(args) -> int:
    obj = json.loads(Path(args.coeffs).read_text())
    meta = obj if isinstance(obj, dict) else {"n": args.n, "N": args.N, "coeffs": obj}
    c = WaveletCoeffs.from_json_obj(meta["coeffs"], int(meta["n"]), int(meta["N"]))
    if args.mode == "bmo":
        est = bmo_estimate(c, args.strategy)
    elif args.mode == "rect":
        est = bmo_estimate(c, "single-rect")
    elif args.mode == "bmo-1":
        est = bmo_minus1(c, args.strategy)
    else:
        raise BadConfig(f"unknown mode {args.mode}")
    witness = None
    if est.witness is not None:
        ws = est.witness_set()
        witness = ws.to_json_obj()
    _emit(args, {"schema": "v1", "value": est.value, "witness": witness, "strategy": est.strategy})
    return 0


def cmd_hankel(args) -> int:
    import numpy as np

    from .hankel import commutator_matrix, duality_pair, hankel_matrix, inner_outer_factor, operator_norm
    from .wavelet import GridFunction, synthesize

    obj = json.loads(Path(args.symbol).read_text())
    n, N = int(obj["n"]), int(obj["N"])
    if "coeffs" in obj:
        fam = build_family(N, n)
        c = WaveletCoeffs.from_json_obj(obj["coeffs"], n, N)
        b = synthesize(c, fam)
    else:
        freq = np.zeros((N,) * n, dtype=np.complex128)
        for row in obj["freq"]:
            xi = tuple(int(x) % N for x in row["xi"])
            freq[xi] = complex(row["re"], row["im"])
        b = GridFunction.from_freq(n, N, freq)
    out: dict = {"schema": "v1", "op": args.op}
    if args.op == "norm":
        H = hankel_matrix(b, truncation=N // 8)
        out["hankel_norm"] = operator_norm(H)
    elif args.op == "commutator-check":
        a = commutator_matrix(b, "nested", truncation=2)
        bb = commutator_matrix(b, "projection-sum", truncation=2)
        delta = float(abs(a.matrix - bb.matrix).max())
        out["method_agreement_delta"] = delta
        out["ok"] = delta <= 1e-12 * max(1.0, float(abs(a.matrix).max()))
    elif args.op == "duality":
        from .hankel import project_plus

        f = project_plus(b)
        out["pairing"] = repr(duality_pair(b, f, f))
    elif args.op == "factorize":
        if n != 1:
            raise BadConfig("factorize expects a one-dimensional symbol")
        inner, outer = inner_outer_factor(b)
        resid = float(abs(inner.values * outer.values - b.values).max())
        out["residual"] = resid
        out["inner_modulus_error"] = float(abs(abs(inner.values) - 1).max())
    else:
        raise BadConfig(f"unknown op {args.op}")
    _emit(args, out)
    if args.op == "commutator-check" and not out["ok"]:
        return 1
    return 0


def cmd_paraproduct(args) -> int:
    obj = json.loads(Path(args.coeffs).read_text())
    n, N = int(obj["n"]), int(obj["N"])
    c = WaveletCoeffs.from_json_obj(obj["coeffs"], n, N)
    deltas = Deltas()
    if args.deltas:
        kv = {}
        for line in Path(args.deltas).read_text().splitlines():
            line = line.strip()
            if line and "=" in line:
                k, v = line.split("=", 1)
                kv[k.strip()] = Fraction(v.strip())
        deltas = Deltas(**kv)
    fam = build_family(N, n)
    rep = bounds_report(c, deltas, JourneConfig(Fraction(args.delta)), fam)
    violations = [r["name"] for r in rep["rows"] if r["ok"] is False]
    summary = {
        "schema": "v1",
        "violations": violations,
        "flags": rep["flags"],
        "rows": rep["rows"],
        "classes": rep["classes"],
    }
    if args.out:
        # CSV table plus JSON summary next to it
        csv_path = Path(args.out)
        emit_report({"trials": rep["classes"]}, "csv", str(csv_path))
        json_path = csv_path.with_suffix(".json")
        json_path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=str))
        sys.stdout.write(f"wrote {csv_path} and {json_path}\n")
    else:
        _emit(args, summary)
    return 1 if violations else 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    if args.trials is not None:
        cfg.trials = args.trials
    kind = "freeze" if args.freeze else args.kind
    report, code = run_experiment(cfg, kind)
    _emit(args, report)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bmolab",
        description="covering-lemma and paraproduct laboratory",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the full invariant suite")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("journe", help="covering-lemma report for a collection")
    p.add_argument("--input", required=True, help="rectangle collection file")
    p.add_argument("--delta", default="1/3")
    p.add_argument("--epsilon", default="1/2")
    p.add_argument("--coords", type=int, default=None, help="dimension check")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_journe)

    p = sub.add_parser("norms", help="estimate Carleson-ratio norms")
    p.add_argument("--coeffs", required=True)
    p.add_argument("--mode", choices=("bmo", "bmo-1", "rect"), default="bmo")
    p.add_argument(
        "--strategy",
        choices=("single-rect", "greedy-downset", "exhaustive"),
        default="exhaustive",
    )
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_norms)

    p = sub.add_parser("hankel", help="operator computations for a symbol")
    p.add_argument("--symbol", required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--N", type=int, default=64)
    p.add_argument(
        "--op",
        choices=("norm", "commutator-check", "duality", "factorize"),
        default="norm",
    )
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_hankel)

    p = sub.add_parser("paraproduct", help="decomposition bounds report")
    p.add_argument("--coeffs", required=True)
    p.add_argument("--deltas", help="key=value file of split constants")
    p.add_argument("--delta", default="1/3", help="enlargement delta")
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_paraproduct)

    p = sub.add_parser("experiment", help="seeded experiment sweeps")
    p.add_argument(
        "--kind",
        choices=("equivalence", "journe", "paraproduct", "verify"),
        default="verify",
    )
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--freeze", action="store_true", help="recompute frozen constants")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_experiment)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BadConfig as exc:
        sys.stderr.write(f"bad config: {exc}\n")
        return 2
    except (ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
