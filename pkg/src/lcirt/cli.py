"""Command-line interface.

Subcommands::

    lcirt fit       --data D --spec S --out DIR
    lcirt select    --data D --config C --out DIR [--stop-after STEP]
    lcirt simulate  --config C --out DIR
    lcirt loglik    --data D --spec S --params P   |   --from-values LOGLIK NPAR N

Exit codes: 0 ok, 2 usage or missing file, 3 parse error, 4 numerical
failure, 5 non-convergence (output is still written).  The seed comes from
``--seed``, else the ``LCIRT_SEED`` environment variable, else 0.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from lcirt import __version__, _kernels
from lcirt.data import ResponseDataset, load_csv, write_csv
from lcirt.errors import (
    DataError,
    FailedOptimizationError,
    InvalidOrderingError,
    NumericUnderflowError,
    PackingError,
    SelectionError,
    SingularJacobianError,
    SpecError,
    UsageError,
)
from lcirt.estimate import Controls, compute_bic, fit_em, fit_multistart, deterministic_start, log_likelihood
from lcirt.model import ModelSpec, Parameters, count_free_parameters, validate
from lcirt.select import STEPS, PipelineConfig, run_selection_pipeline
from lcirt.sim import SimConfig, sample_rows

log = logging.getLogger("lcirt")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_NUMERIC = 4
EXIT_NOT_CONVERGED = 5


class CliFailure(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _digest(path) -> str | None:
    if path is None:
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dump(obj) -> str:
    # repr-based floats are the shortest strings that round-trip exactly
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def _read_json(path, what):
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise CliFailure(f"{what} file not found: {path}", EXIT_USAGE) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliFailure(f"cannot parse {what} file {path}: {exc}", EXIT_PARSE) from None


def _load_data(path, args) -> ResponseDataset:
    p = Path(path)
    if not p.exists():
        raise CliFailure(f"data file not found: {path}", EXIT_USAGE)
    if p.suffix.lower() == ".json":
        try:
            return ResponseDataset.from_dict(_read_json(p, "data"))
        except (KeyError, TypeError) as exc:
            raise CliFailure(f"malformed data file {path}: {exc}", EXIT_PARSE) from None
    return load_csv(p, has_header=args.header, drop_incomplete=args.drop_incomplete)


def _load_spec(path) -> ModelSpec:
    d = _read_json(path, "spec")
    try:
        return ModelSpec.from_dict(d.get("spec", d))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliFailure(f"invalid spec file {path}: {exc}", EXIT_PARSE) from None


def _load_params(path) -> Parameters:
    d = _read_json(path, "params")
    try:
        return Parameters.from_dict(d.get("params", d))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliFailure(f"invalid params file {path}: {exc}", EXIT_PARSE) from None


def _seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get("LCIRT_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise CliFailure(f"LCIRT_SEED is not an integer: {env!r}", EXIT_USAGE) from None
    return 0


def _controls(args, base: dict | None = None) -> Controls:
    d = dict(base or {})
    d["seed"] = _seed(args)
    for flag, key in (("starts", "n_random"), ("tol", "tol"), ("max_iter", "max_iter"),
                      ("threads", "threads")):
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    d.setdefault("threads", os.cpu_count() or 1)
    try:
        return Controls.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise CliFailure(f"invalid estimation controls: {exc}", EXIT_PARSE) from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command, args, seed, started, outputs, inputs):
    manifest = {
        "command": command,
        "version": __version__,
        "backend": _kernels.backend(),
        "seed": seed,
        "inputs": {k: {"path": str(v), "sha256": _digest(v)} for k, v in inputs.items() if v},
        "outputs": {name: _digest(out / name) for name in outputs},
        "started": started,
        "finished": _now(),
    }
    (out / "manifest.json").write_text(_dump(manifest))


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit(args) -> int:
    started = _now()
    spec = _load_spec(args.spec)
    data = _load_data(args.data, args)
    base = _read_json(args.config, "config").get("controls") if args.config else None
    controls = _controls(args, base)
    if args.init:
        init = _load_params(args.init)
        bad = validate(spec, init)
        if bad:
            raise CliFailure("invalid starting values: " + "; ".join(map(str, bad)), EXIT_PARSE)
        fit = fit_em(spec, data, init, controls)
    elif controls.n_random == 0:
        fit = fit_em(spec, data, deterministic_start(spec, data), controls)
    else:
        fit = fit_multistart(spec, data, controls)
    out = _out_dir(args)
    (out / "fit.json").write_text(_dump(fit.to_dict(trace=args.trace)))
    _write_manifest(out, "fit", args, controls.seed, started, ["fit.json"],
                    {"data": args.data, "spec": args.spec, "config": args.config, "init": args.init})
    print(f"{fit.label}: loglik = {fit.loglik:.3f}, #par = {fit.n_par}, BIC = {fit.bic:.3f}, "
          f"iterations = {fit.iterations}, converged = {fit.converged}")
    if not fit.converged:
        log.error("EM did not converge within %d iterations", controls.max_iter)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_select(args) -> int:
    started = _now()
    raw = _read_json(args.config, "config") if args.config else {}
    try:
        config = PipelineConfig.from_dict(raw)
    except (SpecError, ValueError) as exc:
        raise CliFailure(f"invalid pipeline config: {exc}", EXIT_PARSE) from None
    config.controls = _controls(args, config.controls.to_dict())
    data = _load_data(args.data, args)
    out = _out_dir(args)
    try:
        report = run_selection_pipeline(data, config, stop_after=args.stop_after)
        code = EXIT_OK
    except SelectionError as exc:
        if exc.report is None:
            raise
        log.error("%s", exc)
        report = exc.report
        cause = exc.__cause__
        code = EXIT_NUMERIC if isinstance(cause, ArithmeticError) else EXIT_PARSE
    (out / "report.json").write_text(_dump(report.to_dict()))
    (out / "report.txt").write_text(report.format_table())
    _write_manifest(out, "select", args, config.controls.seed, started,
                    ["report.json", "report.txt"], {"data": args.data, "config": args.config})
    sys.stdout.write(report.format_table())
    if code == EXIT_OK and report.final is not None and not report.final.converged:
        code = EXIT_NOT_CONVERGED
    return code


def cmd_simulate(args) -> int:
    started = _now()
    d = _read_json(args.config, "config")
    if args.seed is not None or os.environ.get("LCIRT_SEED"):
        d = {**d, "seed": _seed(args)}
    try:
        cfg = SimConfig.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliFailure(f"invalid simulation config: {exc}", EXIT_PARSE) from None
    out = _out_dir(args)
    rows = sample_rows(cfg)
    write_csv(out / "data.csv", rows)
    (out / "truth.json").write_text(_dump(cfg.to_dict()))
    _write_manifest(out, "simulate", args, cfg.seed, started, ["data.csv", "truth.json"],
                    {"config": args.config})
    print(f"wrote {len(rows)} responses on {cfg.spec.r} items to {out / 'data.csv'}")
    return EXIT_OK


def cmd_loglik(args) -> int:
    if args.from_values is not None:
        ll, npar, n = args.from_values
        try:
            ll, npar, n = float(ll), int(npar), int(n)
        except ValueError:
            raise CliFailure("--from-values expects LOGLIK NPAR N", EXIT_USAGE) from None
    else:
        if not (args.data and args.spec and args.params):
            raise CliFailure("loglik needs --data, --spec and --params (or --from-values)",
                             EXIT_USAGE)
        spec = _load_spec(args.spec)
        params = _load_params(args.params)
        bad = validate(spec, params)
        if bad:
            raise CliFailure("invalid parameters: " + "; ".join(map(str, bad)), EXIT_PARSE)
        data = _load_data(args.data, args)
        ll = log_likelihood(spec, params, data)
        npar, n = count_free_parameters(spec), data.n
    bic = compute_bic(ll, npar, n)
    result = {"loglik": ll, "n_par": npar, "n": n, "bic": bic}
    if args.out:
        out = _out_dir(args)
        (out / "loglik.json").write_text(_dump(result))
    print(f"loglik = {ll:.3f}\n#par = {npar}\nBIC = {bic:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcirt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lcirt {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_flags(p, required=True):
        p.add_argument("--data", required=required, help="response CSV or dataset JSON")
        p.add_argument("--header", action="store_true", help="CSV has a header row")
        p.add_argument("--drop-incomplete", action="store_true",
                       help="drop rows with missing responses instead of failing")

    def control_flags(p):
        p.add_argument("--seed", type=int, help="random seed (default: $LCIRT_SEED or 0)")
        p.add_argument("--starts", type=int, help="number of random starts")
        p.add_argument("--tol", type=float, help="relative log-likelihood tolerance")
        p.add_argument("--max-iter", type=int, help="maximum EM iterations")
        p.add_argument("--threads", type=int, help="parallel starts (default: CPU count)")

    p = sub.add_parser("fit", help="fit one model")
    data_flags(p)
    p.add_argument("--spec", required=True, help="model spec JSON")
    p.add_argument("--config", help="JSON with a 'controls' object")
    p.add_argument("--init", help="start from these parameters (JSON) instead of multistart")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--trace", action="store_true", help="store the log-likelihood trace")
    control_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", help="run the model-selection pipeline")
    data_flags(p)
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--stop-after", choices=STEPS, help="stop after this step")
    control_flags(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", help="draw a synthetic dataset")
    p.add_argument("--config", required=True, help="simulation config JSON (spec, params, n, seed)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("loglik", help="evaluate log-likelihood and BIC")
    data_flags(p, required=False)
    p.add_argument("--spec", help="model spec JSON")
    p.add_argument("--params", help="parameter JSON")
    p.add_argument("--from-values", nargs=3, metavar=("LOGLIK", "NPAR", "N"),
                   help="skip evaluation and compute BIC from given values")
    p.add_argument("--out", help="also write loglik.json here")
    p.set_defaults(func=cmd_loglik)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliFailure as exc:
        print(f"lcirt: error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"lcirt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"lcirt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SpecError, PackingError) as exc:
        print(f"lcirt: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (NumericUnderflowError, FailedOptimizationError, SingularJacobianError,
            InvalidOrderingError, ArithmeticError, FloatingPointError) as exc:
        print(f"lcirt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SelectionError as exc:
        print(f"lcirt: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc.__cause__, ArithmeticError) else EXIT_PARSE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
