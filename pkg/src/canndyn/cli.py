"""Command-line front end.

A thin client of the analysis service: every verb builds a request,
dispatches it (in-process by default, to a remote server with --server),
and writes the response out as JSON/CSV files.  Exit codes: 0 success,
2 model validation failure, 3 solver non-convergence, 4 usage error.
All errors are also printed as single-line JSON on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .errors import (CanndynError, CFLError, ConfigError, ConvergenceError,
                     GammaBoundError, LambdaDomainError, ModelAssumptionError,
                     NoEquilibriumError, PoleError, SelectorError,
                     SeparabilityError, SimulationError)

_MODEL_ERRORS = (ConfigError, SeparabilityError, ModelAssumptionError, SelectorError)
_SOLVER_ERRORS = (NoEquilibriumError, ConvergenceError, GammaBoundError,
                  LambdaDomainError, PoleError, CFLError, SimulationError)

EXIT_OK = 0
EXIT_MODEL = 2
EXIT_SOLVER = 3
EXIT_USAGE = 4


class UsageError(Exception):
    pass


class NonFiniteOutputError(Exception):
    """A report contains NaN/inf; refuse to write it silently."""


class RemoteError(Exception):
    def __init__(self, exit_code: int, payload: dict):
        self.exit_code = exit_code
        self.payload = payload
        super().__init__(payload.get("message", "remote error"))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x) -> str:
    """Shortest round-trip decimal form; deterministic across runs."""
    value = float(x)
    if not math.isfinite(value):
        raise NonFiniteOutputError(f"non-finite value {value!r} in a report")
    return repr(value)


def _fail(code: int, kind: str, message: str, **extra) -> int:
    payload = {"error": kind, "message": message}
    payload.update(extra)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _write_json(outdir: str, name: str, payload: dict) -> str:
    path = os.path.join(outdir, name)
    try:
        text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)
    except ValueError as exc:
        raise NonFiniteOutputError(f"non-finite value in {name}: {exc}")
    with open(path, "w") as fh:
        fh.write(text)
        fh.write("\n")
    print(f"wrote {path}")
    return path


def _write_csv(outdir: str, name: str, header: list, rows) -> str:
    path = os.path.join(outdir, name)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else v if isinstance(v, str) else _fmt(v)
                              for v in row) + "\n")
    print(f"wrote {path}")
    return path


# --- dispatch ----------------------------------------------------------------


def _dispatch(args, endpoint: str, payload: dict) -> dict:
    if args.server:
        return _dispatch_http(args.server, endpoint, payload)
    return _dispatch_inprocess(endpoint, payload)


def _http_client(base_url: str):
    import httpx

    return httpx.Client(base_url=base_url, timeout=None)


def _dispatch_http(server: str, endpoint: str, payload: dict) -> dict:
    with _http_client(server) as client:
        resp = client.post(endpoint, json=payload)
        try:
            data = resp.json()
        except ValueError:
            raise RemoteError(1, {"code": "bad_response",
                                  "message": f"non-JSON response (HTTP {resp.status_code})"})
        if resp.status_code == 200:
            return data
        err = data.get("error")
        if err is None:  # request-validation errors arrive as {"detail": ...}
            err = {"code": "model_invalid", "message": json.dumps(data.get("detail", data))}
        exit_code = {"model_invalid": EXIT_MODEL, "solver_failed": EXIT_SOLVER,
                     "bad_request": EXIT_USAGE}.get(err.get("code"), 1)
        raise RemoteError(exit_code, err)


def _dispatch_inprocess(endpoint: str, payload: dict) -> dict:
    import pydantic

    from .service import app as _  # noqa: F401  (ensures handlers are registered)
    from .service import schemas as sc
    from .service.app import (run_simulation, spectrum, stability, steady,
                              sweep, validate)

    table = {
        "/validate": (sc.ValidateRequest, validate),
        "/steady": (sc.SteadyRequest, steady),
        "/stability": (sc.StabilityRequest, stability),
        "/spectrum": (sc.SpectrumRequest, spectrum),
        "/simulate": (sc.SimulateRequest, run_simulation),
        "/sweep": (sc.SweepRequest, sweep),
    }
    req_model, handler = table[endpoint]
    try:
        request = req_model(**payload)
    except pydantic.ValidationError as exc:
        raise RemoteError(EXIT_MODEL, {"code": "model_invalid", "message": str(exc)})
    response = handler(request)
    return json.loads(response.model_dump_json(by_alias=True))


# --- shared option parsing ----------------------------------------------------


def _load_model_document(path: str) -> dict:
    if not os.path.exists(path):
        raise UsageError(f"model file not found: {path}")
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON in {path}: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("$", "model document must be a JSON object")
    return doc


def _grid_payload(args) -> dict:
    spacing = args.spacing
    if spacing == "uniform":
        mode, ratio = "uniform", None
    elif spacing.startswith("graded:"):
        mode = "graded"
        try:
            ratio = float(spacing.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad spacing {spacing!r}; expected graded:R")
    else:
        raise UsageError(f"bad spacing {spacing!r}; expected uniform or graded:R")
    out = {"n_cells": args.grid_cells, "spacing_mode": mode, "ratio": ratio}
    if args.s_max is not None:
        out["s_max"] = args.s_max
    return out


def _steady_payload(args) -> dict:
    return {"n0_bracket": list(args.n0_bracket), "fp_tol": args.fp_tol,
            "damping": args.damping, "max_iter": args.max_iter}


def _state_payload(args) -> dict:
    spec = args.state
    if spec == "trivial":
        return {"kind": "trivial"}
    if spec == "solve":
        return {"kind": "solve", "steady": _steady_payload(args)}
    if spec.startswith("file:"):
        path = spec[5:]
        if not os.path.exists(path):
            raise UsageError(f"state file not found: {path}")
        with open(path) as fh:
            doc = json.load(fh)
        try:
            return {"kind": "values", "n0": doc["n0"], "n": doc["n"],
                    "E": doc["E"], "M": doc["M"]}
        except KeyError as exc:
            raise UsageError(f"state file {path} missing key {exc}")
    raise UsageError(f"bad --state {spec!r}; expected trivial, solve, or file:PATH")


def _grid_nodes(model_doc: dict, grid_payload: dict) -> np.ndarray:
    from .grid import build_grid

    s_max = grid_payload.get("s_max") or model_doc.get("s_max")
    grid = build_grid(float(s_max), grid_payload["n_cells"],
                      grid_payload["spacing_mode"], grid_payload.get("ratio"))
    return grid.nodes


def _initial_payload(args, model_doc: dict, grid_payload: dict) -> dict:
    spec = args.initial
    if spec == "steady":
        return {"kind": "steady"}
    if spec.startswith("bump:"):
        try:
            center, width, amp = (float(v) for v in spec[5:].split(","))
        except ValueError:
            raise UsageError(f"bad --initial {spec!r}; expected bump:CENTER,WIDTH,AMP")
        return {"kind": "bump", "center": center, "width": width, "amplitude": amp}
    if spec.startswith("file:"):
        path = spec[5:]
        if not os.path.exists(path):
            raise UsageError(f"initial-condition file not found: {path}")
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        if data.ndim != 2 or data.shape[1] < 2:
            raise UsageError(f"initial-condition file {path} needs columns s,n")
        nodes = _grid_nodes(model_doc, grid_payload)
        values = np.interp(nodes, data[:, 0], data[:, 1])
        return {"kind": "values", "values": values.tolist()}
    raise UsageError(f"bad --initial {spec!r}; expected steady, bump:..., or file:PATH")


def _parse_vary(spec: str) -> dict:
    try:
        path, rng = spec.split("=", 1)
        lo, hi, n = rng.split(":")
        return {"path": path, "lo": float(lo), "hi": float(hi), "n": int(n)}
    except ValueError:
        raise UsageError(f"bad --vary {spec!r}; expected PATH=LO:HI:N")


# --- verb implementations ------------------------------------------------------


def _rolling_window_rates(times, norms) -> list:
    """Trailing-window growth rates matching the final-third fit width."""
    n = len(times)
    width = max(2, n // 3)
    rates = []
    for j in range(n):
        i0 = max(0, j - width + 1)
        pts = [(t, math.log(y)) for t, y in zip(times[i0:j + 1], norms[i0:j + 1]) if y > 0]
        if len(pts) < 2:
            rates.append(0.0)
        else:
            ts = np.array([p[0] for p in pts])
            ys = np.array([p[1] for p in pts])
            rates.append(float(np.polyfit(ts, ys, 1)[0]))
    return rates


def _cmd_validate(args) -> int:
    model_doc = _load_model_document(args.model)
    payload = {"model": model_doc, "e_range": list(args.e_range),
               "n_samples": args.n_samples, "tail_tol": args.tail_tol}
    data = _dispatch(args, "/validate", payload)
    _write_json(args.outdir, "validation.json", data)
    if not data["ok"]:
        return _fail(EXIT_MODEL, "model_invalid",
                     f"validation failed with {len(data['violations'])} violation(s)")
    return EXIT_OK


def _cmd_steady(args) -> int:
    model_doc = _load_model_document(args.model)
    payload = {"model": model_doc, "grid": _grid_payload(args),
               "steady": _steady_payload(args)}
    data = _dispatch(args, "/steady", payload)
    _write_json(args.outdir, "steady.json", data)
    _write_csv(args.outdir, "steady.csv", ["s", "n", "E", "M"],
               zip(data["s"], data["n"], data["E"], data["M"]))
    return EXIT_OK


def _cmd_stability(args) -> int:
    model_doc = _load_model_document(args.model)
    payload = {"model": model_doc, "grid": _grid_payload(args),
               "state": _state_payload(args)}
    data = _dispatch(args, "/stability", payload)
    _write_json(args.outdir, "stability.json", data)
    _write_csv(args.outdir, "margin.csv", ["s", "margin"],
               zip(data["s"], data["margin_profile"]))
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    model_doc = _load_model_document(args.model)
    payload = {"model": model_doc, "grid": _grid_payload(args),
               "state": _state_payload(args), "n_scan": args.scan,
               "root_tol": args.root_tol}
    if args.lambda_range is not None:
        payload["lambda_range"] = list(args.lambda_range)
    data = _dispatch(args, "/spectrum", payload)
    _write_json(args.outdir, "spectrum.json", data)
    header = ["lambda", "K", "L"] + [f"a{i}" for i in range(1, 10)]
    rows = [[s["lambda"], s["K"], s["L"]] + [s[f"a{i}"] for i in range(1, 10)]
            for s in data["samples"]]
    _write_csv(args.outdir, "spectrum.csv", header, rows)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    model_doc = _load_model_document(args.model)
    grid_payload = _grid_payload(args)
    payload = {
        "model": model_doc,
        "grid": grid_payload,
        "state": _state_payload(args),
        "mode": args.mode,
        "t_end": args.t_end,
        "record_every": args.record_every,
        "initial": _initial_payload(args, model_doc, grid_payload),
        "snapshot_times": args.snapshot_times or [],
    }
    if args.dt is not None:
        payload["dt"] = args.dt
    else:
        payload["cfl"] = args.cfl
    if args.aeg_tol is not None:
        payload["aeg_tol"] = args.aeg_tol
    data = _dispatch(args, "/simulate", payload)
    _write_json(args.outdir, "sim.json", data)
    rates = _rolling_window_rates(data["times"], data["norms"])
    _write_csv(args.outdir, "sim.csv",
               ["t", "norm", "boundary", "growth_window_rate", "profile_distance",
                "mass_residual", "min_value"],
               zip(data["times"], data["norms"], data["boundary_values"], rates,
                   data["profile_distance"], data["mass_residuals"], data["min_values"]))
    for snap in data["snapshots"]:
        _write_csv(args.outdir, f"snapshot_t{snap['t']:g}.csv", ["s", "n"],
                   zip(data["s"], snap["n"]))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    model_doc = _load_model_document(args.model)
    payload = {
        "model": model_doc,
        "grid": _grid_payload(args),
        "state": _state_payload(args),
        "vary": _parse_vary(args.vary),
        "n_scan": args.scan,
        "root_tol": args.root_tol,
        "sim_t_end": args.sim_t_end,
        "sim_record_every": args.record_every,
    }
    if args.vary2 is not None:
        payload["vary2"] = _parse_vary(args.vary2)
    if args.lambda_range is not None:
        payload["lambda_range"] = list(args.lambda_range)
    data = _dispatch(args, "/sweep", payload)
    _write_json(args.outdir, "sweep.json", data)
    paths = data["param_paths"]
    header = paths + ["R0", "margin", "K0", "rightmost_root", "sim_growth_rate"]
    rows = []
    for row in data["rows"]:
        rows.append([row["params"][p] for p in paths]
                    + [row[k] for k in ("R0", "margin", "K0", "rightmost_root",
                                        "sim_growth_rate")])
    _write_csv(args.outdir, "sweep.csv", header, rows)
    failures = [row for row in data["rows"] if row.get("error")]
    for row in failures:
        print(json.dumps({"error": "sweep_point_failed", "index": row["index"],
                          "params": row["params"], "message": row["error"]},
                         sort_keys=True), file=sys.stderr)
    return EXIT_SOLVER if failures else EXIT_OK


# --- argument parser ------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("-m", "--model", required=True, help="model configuration JSON")
    sub.add_argument("-o", "--outdir", default=".", help="output directory")
    sub.add_argument("--grid-cells", type=int, default=400)
    sub.add_argument("--s-max", type=float, default=None,
                     help="override the model truncation length")
    sub.add_argument("--spacing", default="uniform", help="uniform or graded:R")
    sub.add_argument("--server", default=None,
                     help="base URL of a running service; default runs in-process")


def _add_state(sub):
    sub.add_argument("--state", default="trivial",
                     help="trivial, solve, or file:PATH (a saved steady.json)")
    _add_steady_opts(sub)


def _add_steady_opts(sub):
    sub.add_argument("--n0-bracket", type=float, nargs=2, default=(0.0, 10.0),
                     metavar=("LO", "HI"))
    sub.add_argument("--fp-tol", type=float, default=1e-8)
    sub.add_argument("--damping", type=float, default=0.5)
    sub.add_argument("--max-iter", type=int, default=500)


def build_parser() -> _Parser:
    parser = _Parser(prog="canndyn", description=__doc__)
    verbs = parser.add_subparsers(dest="verb", required=True)

    sub = verbs.add_parser("validate", help="check sign/bound assumptions and tails")
    _add_common(sub)
    sub.add_argument("--e-range", type=float, nargs=2, default=(0.0, 1.0),
                     metavar=("LO", "HI"))
    sub.add_argument("--n-samples", type=int, default=64)
    sub.add_argument("--tail-tol", type=float, default=1.0)
    sub.set_defaults(func=_cmd_validate)

    sub = verbs.add_parser("steady", help="solve for a positive equilibrium")
    _add_common(sub)
    _add_steady_opts(sub)
    sub.set_defaults(func=_cmd_steady)

    sub = verbs.add_parser("stability", help="dissipativity margin and positivity checks")
    _add_common(sub)
    _add_state(sub)
    sub.set_defaults(func=_cmd_stability)

    sub = verbs.add_parser("spectrum", help="characteristic determinant scan")
    _add_common(sub)
    _add_state(sub)
    sub.add_argument("--lambda-range", type=float, nargs=2, default=None,
                     metavar=("LO", "HI"))
    sub.add_argument("--scan", type=int, default=200)
    sub.add_argument("--root-tol", type=float, default=1e-9)
    sub.set_defaults(func=_cmd_spectrum)

    sub = verbs.add_parser("simulate", help="time-domain run with diagnostics")
    _add_common(sub)
    _add_state(sub)
    sub.add_argument("--mode", choices=("nonlinear", "linearized"), default="nonlinear")
    sub.add_argument("--t-end", type=float, required=True)
    sub.add_argument("--cfl", type=float, default=0.9)
    sub.add_argument("--dt", type=float, default=None)
    sub.add_argument("--record-every", type=int, default=10)
    sub.add_argument("--initial", default="bump:2.0,0.5,1.0",
                     help="steady, bump:CENTER,WIDTH,AMP, or file:PATH (CSV s,n)")
    sub.add_argument("--snapshot-times", type=float, nargs="*", default=None)
    sub.add_argument("--aeg-tol", type=float, default=None,
                     help="run the asynchronous-growth diagnostic at this tolerance")
    sub.set_defaults(func=_cmd_simulate)

    sub = verbs.add_parser("sweep", help="parameter sweep over the full pipeline")
    _add_common(sub)
    _add_state(sub)
    sub.add_argument("--vary", required=True, metavar="PATH=LO:HI:N")
    sub.add_argument("--vary2", default=None, metavar="PATH=LO:HI:N")
    sub.add_argument("--lambda-range", type=float, nargs=2, default=None)
    sub.add_argument("--scan", type=int, default=80)
    sub.add_argument("--root-tol", type=float, default=1e-9)
    sub.add_argument("--sim-t-end", type=float, default=40.0)
    sub.add_argument("--record-every", type=int, default=10)
    sub.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        os.makedirs(args.outdir, exist_ok=True)
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except RemoteError as exc:
        return _fail(exc.exit_code, exc.payload.get("code", "error"),
                     exc.payload.get("message", str(exc)))
    except _MODEL_ERRORS as exc:
        extra = {"path": exc.path} if isinstance(exc, ConfigError) else {}
        return _fail(EXIT_MODEL, "model_invalid", str(exc), **extra)
    except _SOLVER_ERRORS as exc:
        return _fail(EXIT_SOLVER, "solver_failed", str(exc),
                     exception=type(exc).__name__)
    except NonFiniteOutputError as exc:
        return _fail(1, "non_finite_output", str(exc))
    except ValueError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except CanndynError as exc:
        return _fail(1, "error", str(exc))


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
