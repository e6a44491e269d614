"""Command-line client for the quantization engine.

Subcommands mirror the service endpoints (quantize, verify, bounds, sweep)
plus ``serve`` to run the HTTP service. By default everything executes
in-process; ``--server URL`` delegates the work to a running service and the
CLI only moves files. Exit status is 0 only on full success - a failing
overflow certificate exits nonzero even though the report is still written.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .bounds import (
    AccumulatorBudget,
    InfeasibleBudgetError,
    l1_budget,
    min_accumulator_bits,
    outer_accumulator_bits,
    strict_limits,
)
from .numeric import Alphabet
from .optq import FactorizationError
from .oracle import verify
from .pipeline import LayerJob, QuantConfig, SweepRow, quantize_layer, sweep, write_sweep_csv
from .tensor_io import TensorFormatError, read_tensor, write_tensor

_DOMAIN_ERRORS = (InfeasibleBudgetError, FactorizationError, ValueError)


def _post(server: str, path: str, payload: dict) -> dict:
    """POST a JSON payload to a running service; raises RuntimeError with the
    service's diagnostic on non-2xx responses."""
    import httpx

    resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=600.0)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise RuntimeError(f"service error ({resp.status_code}): {detail}")
    return resp.json()


def _dump_json(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_quantize(args) -> int:
    weights = read_tensor(args.weights)
    calib = read_tensor(args.calib)
    with open(args.config) as fh:
        config_dict = json.load(fh)

    if args.server:
        result = _post(
            args.server,
            "/quantize",
            {"weights": weights.tolist(), "calib": calib.tolist(), "config": config_dict},
        )
        codes = np.asarray(result["codes"], dtype=np.int64)
        report_dict = result["report"]
        cert_ok = (report_dict["certificate"] or {"pass": True})["pass"]
    else:
        config = QuantConfig.from_dict(config_dict)
        codes, report = quantize_layer(LayerJob(weights, calib, config))
        report_dict = report.to_dict()
        cert_ok = report.certificate.passed if report.certificate else True

    write_tensor(args.out, codes.astype(np.int32))
    _dump_json(report_dict, args.report)
    if not cert_ok:
        print("certificate FAILED: quantized codes do not fit the accumulator budget",
              file=sys.stderr)
        return 1
    return 0


def _cmd_verify(args) -> int:
    codes = read_tensor(args.codes)
    perm = None
    if args.perm:
        with open(args.perm) as fh:
            perm = json.load(fh)

    if codes.ndim == 1:
        codes = codes[:, None]
    if args.server:
        result = _post(
            args.server,
            "/verify",
            {
                "codes": codes.tolist(),
                "acc_bits": args.acc_bits,
                "act_bits": args.act_bits,
                "signed_acts": args.signed_acts,
                "tile": args.tile,
                "perm": perm,
            },
        )
        cert_dict = result["certificate"]
    else:
        # slack 0: the register-range check has no rounding slack, and this
        # keeps any P >= 2 verifiable
        budget = AccumulatorBudget.make(
            args.acc_bits,
            Alphabet(bits=args.act_bits, signed=args.signed_acts),
            slack=0.0,
            tile=args.tile,
        )
        cert_dict = verify(codes, budget, perm=perm).to_dict()

    _dump_json(cert_dict, args.out)
    if not cert_dict["pass"]:
        failing = [u for u in cert_dict["per_unit"] if not u["pass"]]
        print(f"verification FAILED: {len(failing)} unit(s) exceed the budget",
              file=sys.stderr)
        return 1
    print(f"verification passed ({len(cert_dict['per_unit'])} units)", file=sys.stderr)
    return 0


def _cmd_bounds(args) -> int:
    if args.server:
        result = _post(
            args.server,
            "/bounds",
            {"k": args.k, "m": args.m, "n": args.n,
             "signed_acts": args.signed, "tile": args.tile},
        )
    else:
        p_star = min_accumulator_bits(args.k, args.m, args.n, args.signed)
        a, b = strict_limits(p_star, args.n, 0.5)
        result = {
            "min_accumulator_bits": p_star,
            "l1_budget": l1_budget(p_star, args.n),
            "limit_neg": a,
            "limit_pos": b,
            "inner_min_bits": None,
            "outer_bits": None,
        }
        if args.tile is not None:
            inner = min_accumulator_bits(args.tile, args.m, args.n, args.signed)
            result["inner_min_bits"] = inner
            result["outer_bits"] = outer_accumulator_bits(inner, args.k, args.tile)
    _dump_json(result, None)
    return 0


def _cmd_sweep(args) -> int:
    weights = read_tensor(args.weights)
    calib = read_tensor(args.calib)
    with open(args.grid) as fh:
        grid = json.load(fh)
    for key in ("weight_bits", "act_bits", "acc_bits"):
        if not grid.get(key):
            raise ValueError(f"sweep grid needs a non-empty {key!r} list")
    base_dict = {k: v for k, v in grid.items()
                 if k not in ("weight_bits", "act_bits", "acc_bits")}
    base_dict.setdefault("variant", "axe")
    base = QuantConfig.from_dict(
        {"weight_bits": grid["weight_bits"][0], "act_bits": grid["act_bits"][0],
         "acc_bits": grid["acc_bits"][0], **base_dict}
    )

    if args.server:
        result = _post(
            args.server,
            "/sweep",
            {
                "weights": weights.tolist(),
                "calib": calib.tolist(),
                "weight_bits": grid["weight_bits"],
                "act_bits": grid["act_bits"],
                "acc_bits": grid["acc_bits"],
                "config": base.to_dict(),
            },
        )
        rows = [
            SweepRow(
                p_bits=r["p_bits"],
                weight_bits=r["weight_bits"],
                act_bits=r["act_bits"],
                recon_error=math.nan if r["recon_error"] is None else r["recon_error"],
                sparsity=math.nan if r["sparsity"] is None else r["sparsity"],
                ok=r["pass"],
                error=r.get("error", ""),
                pareto=r["pareto"],
            )
            for r in result["rows"]
        ]
    else:
        rows = sweep(weights, calib, grid["weight_bits"], grid["act_bits"],
                     grid["acc_bits"], base)

    write_sweep_csv(rows, args.out_csv, pareto_path=args.pareto_csv)
    ran = [r for r in rows if not r.error]
    print(f"swept {len(rows)} configurations ({len(rows) - len(ran)} failed cells, "
          f"{sum(r.pareto for r in rows)} on the Pareto front)", file=sys.stderr)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="axq",
        description="accumulator-aware post-training quantization with verified "
                    "overflow avoidance",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantize", help="quantize one layer and emit codes + report")
    q.add_argument("--weights", required=True, help="AXT file, K x C weight matrix")
    q.add_argument("--calib", required=True, help="AXT file, K x D calibration activations")
    q.add_argument("--config", required=True, help="JSON quantization config")
    q.add_argument("--out", required=True, help="output AXT file for integer codes")
    q.add_argument("--report", required=True, help="output JSON report path")
    q.add_argument("--server", help="delegate to a running service at this URL")
    q.set_defaults(func=_cmd_quantize)

    v = sub.add_parser("verify", help="check codes against an accumulator budget")
    v.add_argument("--codes", required=True, help="AXT file of integer codes (K x C)")
    v.add_argument("--acc-bits", type=int, required=True, help="accumulator width P")
    v.add_argument("--act-bits", type=int, required=True, help="activation width N")
    v.add_argument("--signed-acts", action="store_true", help="signed activation codes")
    v.add_argument("--tile", type=int, help="tile size for multi-stage accumulation")
    v.add_argument("--perm", help="JSON file with the processing order the tiles follow")
    v.add_argument("--out", help="write the certificate JSON here instead of stdout")
    v.add_argument("--server", help="delegate to a running service at this URL")
    v.set_defaults(func=_cmd_verify)

    b = sub.add_parser("bounds", help="closed-form accumulator bit-width bounds")
    b.add_argument("--k", type=int, required=True, help="dot product depth")
    b.add_argument("--m", type=int, required=True, help="weight bits")
    b.add_argument("--n", type=int, required=True, help="activation bits")
    b.add_argument("--signed", action="store_true", help="signed activations")
    b.add_argument("--tile", type=int, help="tile size (adds inner/outer widths)")
    b.add_argument("--server", help="delegate to a running service at this URL")
    b.set_defaults(func=_cmd_bounds)

    s = sub.add_parser("sweep", help="run an (M, N, P) grid and emit a CSV table")
    s.add_argument("--weights", required=True, help="AXT file, K x C weight matrix")
    s.add_argument("--calib", required=True, help="AXT file, K x D calibration activations")
    s.add_argument("--grid", required=True,
                   help="JSON with weight_bits/act_bits/acc_bits lists plus config overrides")
    s.add_argument("--out-csv", required=True, help="output CSV path")
    s.add_argument("--pareto-csv", help="also write the Pareto-front subset here")
    s.add_argument("--server", help="delegate to a running service at this URL")
    s.set_defaults(func=_cmd_sweep)

    r = sub.add_parser("serve", help="run the HTTP service")
    r.add_argument("--host", default="127.0.0.1")
    r.add_argument("--port", type=int, default=8000)
    r.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TensorFormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (*_DOMAIN_ERRORS, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
