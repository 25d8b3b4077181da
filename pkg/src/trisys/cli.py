"""Command-line interface.

Commands
--------
tables    reproduce the reference numerical tables (CSV/JSON)
bounds    compute bounds for user-supplied observables (JSON in)
diagnose  run the testable-restriction checks on observables
validate  run the oracle suite (containment, kernel cross-checks)

Exit codes: 0 ok, 2 invalid input, 3 diagnostics flagged violations,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile

import numpy as np

from .grids import Regime, SchemaError, StepCdf, ValueGrid, law_from_json
from .bands import band_matrices
from .bounds import ConfigurationError, dte_bounds, joint_bounds, marginal_bounds
from .copulas import MarginalPair
from .diagnostics import test_dte_crossing, test_mtr_dominance, test_nsm
from .dgp import DgpSpec, QuadratureError, build_observed_law, build_truth, default_delta_grid
from .oracle import check_containment, discrete_copula_sharpness_probe, exhaustive_chain_check
from .tables import CalibrationError, TableConfig, TableEngine, calibration_gate

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_DIAGNOSTIC = 3
EXIT_NUMERICAL = 4


def _atomic_write(path: str, write_fn) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header, rows) -> None:
    def go(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    _atomic_write(path, go)


def _write_json(path: str, payload) -> None:
    _atomic_write(path, lambda fh: json.dump(payload, fh, indent=1, sort_keys=True))


def _records_csv(path: str, records) -> None:
    cols: list[str] = []
    for r in records:
        for k in r:
            if k not in cols:
                cols.append(k)

    def go(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([_fmt_full(r.get(c, "")) for c in cols])
    _atomic_write(path, go)


def _fmt_full(v) -> str:
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def _parse_regimes(text: str) -> list[Regime]:
    out = []
    for part in text.split(","):
        name = part.strip().upper().replace("+", "_")
        if not name:
            continue
        try:
            out.append(Regime(name))
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"unknown regime {part!r}; choose from {[r.value for r in Regime]}")
    return out or list(Regime)


def _config_overrides(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    allowed = {"rho", "dof", "z_half_width", "quadrature_nodes"}
    return {k: doc[k] for k in allowed if k in doc}


def cmd_tables(args) -> int:
    try:
        overrides = _config_overrides(args.config)
        config = TableConfig(
            rho=float(overrides.get("rho", args.rho)),
            dof=int(overrides.get("dof", args.dof)),
            quadrature_nodes=int(overrides.get("quadrature_nodes", 256)),
            dense_joint=args.dense_joint,
        )
        engine = TableEngine(config)
        tables = engine.all_tables()
    except CalibrationError as exc:
        print(f"calibration gate failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except QuadratureError as exc:
        print(f"quadrature failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"invalid table configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    os.makedirs(args.out, exist_ok=True)
    for t in tables:
        _write_csv(os.path.join(args.out, f"{t.name}.csv"), t.header, t.rows)
        if args.format == "json":
            _write_json(os.path.join(args.out, f"{t.name}_full.json"), list(t.records))
        else:
            _records_csv(os.path.join(args.out, f"{t.name}_full.csv"), list(t.records))
    print(f"wrote {len(tables)} tables to {args.out}")
    return EXIT_OK


def _load_law(path: str):
    try:
        return law_from_json(path)
    except SchemaError as exc:
        for v in exc.violations:
            print(f"invalid observables: {v}", file=sys.stderr)
        return None
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read observables: {exc}", file=sys.stderr)
        return None


def cmd_bounds(args) -> int:
    law = _load_law(args.input)
    if law is None:
        return EXIT_INVALID_INPUT
    regimes = args.regimes
    records = []
    try:
        bands = band_matrices(law)
        for regime in regimes:
            for target in ("F0", "F1"):
                mb = marginal_bounds(law, regime, target, bands=bands)
                for k, y in enumerate(law.y_grid.points):
                    records.append({"target": target, "regime": regime.value,
                                    "coord0": float(y), "coord1": "",
                                    "lower": float(mb.lower[k]), "upper": float(mb.upper[k])})
            if args.dte:
                dgrid = default_delta_grid()
                db = dte_bounds(law, regime, dgrid, bands=bands)
                for k, d in enumerate(dgrid.points):
                    records.append({"target": "DTE", "regime": regime.value,
                                    "coord0": float(d), "coord1": "",
                                    "lower": float(db.lower[k]), "upper": float(db.upper[k])})
            if args.pairs:
                pairs = _parse_pairs(args.pairs)
                jb = joint_bounds(law, regime, pairs, bands=bands)
                for k, (a, b) in enumerate(jb.pairs):
                    records.append({"target": "JOINT", "regime": regime.value,
                                    "coord0": a, "coord1": b,
                                    "lower": float(jb.lower[k]), "upper": float(jb.upper[k])})
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    if args.format == "json":
        _write_json(args.out, records)
    else:
        _records_csv(args.out, records)
    if args.dump_bands:
        _dump_bands(args.dump_bands, law, bands)
    print(f"wrote {len(records)} bound records to {args.out}")
    return EXIT_OK


def _dump_bands(path: str, law, bands) -> None:
    """Debugging dump: every counterfactual band at every (z, y)."""
    names = ("l01_wst", "u01_wst", "l10_wst", "u10_wst",
             "l10_sm", "u01_sm", "l01_mtr", "u10_mtr")
    rows = []
    for name in names:
        mat = getattr(bands, name)
        for i, z in enumerate(law.z_labels):
            for k, y in enumerate(law.y_grid.points):
                rows.append({"band": name.upper(), "z": z, "y": float(y),
                             "value": float(mat[i, k])})
    _records_csv(path, rows)


def _parse_pairs(text: str) -> list[tuple[float, float]]:
    pairs = []
    for part in text.split(","):
        a, _, b = part.partition(":")
        pairs.append((float(a), float(b)))
    return pairs


def cmd_diagnose(args) -> int:
    law = _load_law(args.input)
    if law is None:
        return EXIT_INVALID_INPUT
    reports = [test_nsm(law, tol=args.tol)]
    bands = band_matrices(law)
    f0 = marginal_bounds(law, Regime.WORST, "F0", bands=bands)
    f1 = marginal_bounds(law, Regime.WORST, "F1", bands=bands)
    reports.append(test_mtr_dominance(f0, f1, tol=args.tol))
    dgrid = default_delta_grid()
    reports.append(test_dte_crossing(dte_bounds(law, Regime.NSM_MTR, dgrid, bands=bands),
                                     tol=args.tol))
    payload = [r.to_dict() for r in reports]
    _write_json(args.out, payload)
    flagged = [r for r in reports if not r.passed]
    for r in reports:
        status = "ok" if r.passed else f"violations (max {r.max_violation:.4f})"
        print(f"{r.test}: {status}")
    return EXIT_DIAGNOSTIC if flagged else EXIT_OK


def cmd_validate(args) -> int:
    verdicts = []
    try:
        overrides = _config_overrides(args.config)
        calibration_gate(int(overrides.get("dof", args.dof)))
        spec = DgpSpec(rho=float(overrides.get("rho", args.rho)),
                       z_half_width=float(overrides.get("z_half_width", args.zbar)),
                       dof=int(overrides.get("dof", args.dof)),
                       delta_grid=ValueGrid.regular(-1.0, 14.0, 0.25),
                       z_grid_size=args.z_grid_size)
        law = build_observed_law(spec)
        pairs = [(0.0, 1.0), (1.0, 3.0), (-1.0, 5.0)]
        truth = build_truth(spec, pairs=pairs)
        bands = band_matrices(law)
        for regime in Regime:
            for target in ("F0", "F1"):
                verdicts.append(check_containment(
                    marginal_bounds(law, regime, target, bands=bands), truth, tol=args.tol))
            verdicts.append(check_containment(
                joint_bounds(law, regime, pairs, bands=bands), truth, tol=args.tol))
            verdicts.append(check_containment(
                dte_bounds(law, regime, spec.delta_grid, bands=bands), truth, tol=args.tol))
        rng = np.random.default_rng(args.seed)
        small = ValueGrid(np.sort(rng.uniform(-2, 2, 9)))
        for _ in range(5):
            f0v = np.sort(rng.uniform(0, 1, 9))
            f1v = np.sort(rng.uniform(0, 1, 9))
            f0v[-1] = f1v[-1] = 1.0
            pair = MarginalPair(StepCdf(small, f0v), StepCdf(small, f1v))
            verdicts.append(exhaustive_chain_check(pair, float(rng.uniform(0, 3))))
            verdicts.append(discrete_copula_sharpness_probe(
                pair, float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))))
    except (QuadratureError, CalibrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _write_json(args.out, [v.to_dict() for v in verdicts])
    bad = [v for v in verdicts if not v.passed]
    print(f"{len(verdicts) - len(bad)}/{len(verdicts)} oracle checks passed")
    for v in bad:
        print(f"FAILED {v.check} at {v.coordinates} (margin {v.worst_margin:.4f})",
              file=sys.stderr)
    return EXIT_NUMERICAL if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trisys", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tables", help="reproduce the reference numerical tables")
    t.add_argument("--config", default=None, help="JSON overrides (rho, dof, ...)")
    t.add_argument("--rho", type=float, default=-0.75)
    t.add_argument("--dof", type=int, default=2)
    t.add_argument("--out", default="tables")
    t.add_argument("--format", choices=("csv", "json"), default="csv")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--dense-joint", action="store_true")
    t.set_defaults(fn=cmd_tables)

    b = sub.add_parser("bounds", help="bounds for user-supplied observables")
    b.add_argument("input", help="observables JSON")
    b.add_argument("--regimes", type=_parse_regimes, default=list(Regime))
    b.add_argument("--out", default="bounds.csv")
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--dte", action="store_true", help="also emit treatment-effect bounds")
    b.add_argument("--pairs", default="", help="joint query pairs, e.g. '1:3,-1:5'")
    b.add_argument("--dump-bands", default="", help="also dump the counterfactual bands (CSV)")
    b.set_defaults(fn=cmd_bounds)

    d = sub.add_parser("diagnose", help="testable-restriction checks")
    d.add_argument("input", help="observables JSON")
    d.add_argument("--out", default="diagnostics.json")
    d.add_argument("--tol", type=float, default=0.01)
    d.set_defaults(fn=cmd_diagnose)

    v = sub.add_parser("validate", help="oracle suite")
    v.add_argument("--config", default=None, help="JSON overrides (rho, dof, z_half_width)")
    v.add_argument("--rho", type=float, default=-0.75)
    v.add_argument("--zbar", type=float, default=1.0)
    v.add_argument("--dof", type=int, default=2)
    v.add_argument("--z-grid-size", type=int, default=41)
    v.add_argument("--tol", type=float, default=0.015)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default="verdicts.json")
    v.set_defaults(fn=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
