"""Command-line batch runner for sweeps, lemma checks, and reports.

Subcommands:

* ``sweep``          rate sweep from a TOML config, with fits and verdicts
* ``counterexample`` smooth-spline reproduction of sin on the 4-arc mesh
* ``lemmas``         trace / moment-match / energy-split / identity battery
* ``duality``        operator-norm duality constants
* ``report``         re-fit and re-judge an existing sweep CSV

Every run writes its outputs plus a manifest (config hash, seeds, version,
timestamps) into the output directory; sweeps with the same config hash
and seeds produce byte-identical CSV.  Exit codes: 0 all verdicts pass,
1 failed verdicts, 2 malformed configuration.
"""

import argparse
import datetime
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict

try:
    import tomllib
except ModuleNotFoundError:            # Python 3.10
    import tomli as tomllib

import numpy as np

from . import __version__
from .estimates import (
    decomposition_check,
    duality_check,
    energy_split_report,
    moment_match_poly,
    trace_constant_report,
)
from .funcspace import SobolevParams, TrigPoly
from .mesh import build_counterexample_mesh, uniform_mesh
from .oscillator import random_oscillating
from .polyspace import SplineSpace
from .projector import project, residual_error
from .rates import (
    SpanError,
    SweepConfig,
    SweepTable,
    fit_rate,
    judge,
    run_sweep,
    select_points,
)


class ConfigError(ValueError):
    """Malformed or contradictory configuration."""


_SWEEP_KEYS = {
    "degrees", "smoothness", "ell", "eval_orders", "k_values", "hk_targets",
    "xi_lo", "xi_hi", "seeds", "bracket_n", "input_kind", "leak_power",
    "leak_eps", "lemma_checks",
}
_FIT_KEYS = {"slope_tol", "ratio_tol", "spectral_slope_tol", "k_min"}

FIT_DEFAULTS = {"slope_tol": 0.25, "ratio_tol": 10.0,
                "spectral_slope_tol": 0.3, "k_min": 40.0}


def parse_config(path):
    """Load and validate a sweep configuration from a TOML file.

    The [sweep] section fills a SweepConfig (defaults: xi_lo=0.5,
    xi_hi=1.0, seeds=5, bracket_n=2048); the optional [fit] section
    overrides verdict tolerances.  Unknown keys in either section are
    rejected.
    """
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc
    unknown_sections = set(raw) - {"sweep", "fit"}
    if unknown_sections:
        raise ConfigError(
            f"unknown config sections: {sorted(unknown_sections)}")
    sweep = dict(raw.get("sweep", {}))
    unknown = set(sweep) - _SWEEP_KEYS
    if unknown:
        raise ConfigError(f"unknown [sweep] keys: {sorted(unknown)}")
    fit = dict(FIT_DEFAULTS)
    extra = set(raw.get("fit", {})) - _FIT_KEYS
    if extra:
        raise ConfigError(f"unknown [fit] keys: {sorted(extra)}")
    fit.update(raw.get("fit", {}))
    if "degrees" not in sweep:
        raise ConfigError("the [sweep] section needs a 'degrees' list")
    sweep.setdefault("bracket_n", 2048)
    if sweep.get("lemma_checks"):
        bad = [t for t in sweep.get("hk_targets", SweepConfig(
            degrees=(0,)).hk_targets) if t >= 1.0]
        if bad:
            raise ConfigError(
                f"hk targets {bad} violate the energy-split hypothesis "
                "hk < 1 required by the lemma checks")
    try:
        config = SweepConfig(**sweep)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [sweep] section: {exc}") from exc
    return config, fit


def serialize_config(config, fit=None):
    """TOML text that parse_config maps back to the same configuration."""
    lines = ["[sweep]"]
    for key, value in sorted(config.to_dict().items()):
        lines.append(f"{key} = {_toml_value(value)}")
    if fit:
        lines.append("")
        lines.append("[fit]")
        for key, value in sorted(fit.items()):
            lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)!r}")


def _expected_rho(p, ell, eval_order):
    if eval_order >= 0:
        return float(p + 1 - eval_order)
    s = -eval_order
    return float(p + 1 - ell + min(s + ell, p + 1 - ell))


def _fit_slices(table, fit_params):
    """Fit and judge every (p, eval) slice of a table; returns summaries."""
    slices = sorted({(r.p, r.ell, r.eval) for r in table.rows})
    out = []
    for p, ell, ev in slices:
        k_min = fit_params["k_min"] if p >= 1 else None
        rho = _expected_rho(p, ell, ev)
        tol = fit_params["slope_tol"] if ev >= 0 \
            else fit_params["spectral_slope_tol"]
        entry = {"p": p, "ell": ell, "eval": ev, "rho": rho}
        try:
            fit = fit_rate(select_points(table, p, ev, k_min=k_min), rho)
        except SpanError as exc:
            entry.update(error=str(exc), passed=False)
            out.append(entry)
            continue
        verdict = judge(fit, rho, tol, fit_params["ratio_tol"])
        entry.update(slope=fit.slope, c_min=fit.c_min, c_max=fit.c_max,
                     constant_ratio=verdict.constant_ratio,
                     passed=verdict.passed, reasons=list(verdict.reasons))
        out.append(entry)
    return out


def _manifest(config_text, seeds, outputs):
    digest = hashlib.sha256(config_text.encode()).hexdigest()
    now = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return {"config_sha256": digest, "seeds": list(seeds),
            "version": __version__, "timestamp": now,
            "outputs": sorted(outputs)}


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------------
# subcommands


def _cmd_sweep(args):
    config, fit_params = parse_config(args.config)
    if args.seeds is not None:
        config = SweepConfig(**{**config.to_dict(), "seeds": args.seeds})
    table = run_sweep(config, threads=args.threads)
    fits = _fit_slices(table, fit_params)
    outputs = []
    if args.format == "json":
        outputs.append(_write(args.out, "table.json", table.to_json()))
    else:
        outputs.append(_write(args.out, "table.csv", table.to_csv()))
    outputs.append(_write(args.out, "fits.json",
                          json.dumps(fits, indent=2, sort_keys=True)))
    resolved = serialize_config(config, fit_params)
    outputs.append(_write(args.out, "config.resolved.toml", resolved))
    manifest = _manifest(resolved, range(config.seeds), outputs)
    _write(args.out, "manifest.json",
           json.dumps(manifest, indent=2, sort_keys=True))
    for entry in fits:
        status = "pass" if entry["passed"] else "FAIL"
        slope = entry.get("slope")
        detail = f"slope={slope:.3f}" if slope is not None \
            else entry.get("error", "")
        print(f"sweep p={entry['p']} eval={entry['eval']} "
              f"rho={entry['rho']:g} {detail}: {status}")
    if table.failures:
        print(f"{len(table.failures)} failed rows (see table)")
    return 0 if all(e["passed"] for e in fits) else 1


def _cmd_counterexample(args):
    mesh = build_counterexample_mesh().mesh_at(1.0)
    space = SplineSpace(mesh, 2, 2)
    sin = TrigPoly.from_dict({1: -0.5j, -1: 0.5j})
    cos = TrigPoly.from_dict({1: 0.5, -1: 0.5})
    records = {}
    ok = True
    for name, u in (("sin", sin), ("cos", cos)):
        member = space.membership_residual(space.elementwise_fit(u))
        records[f"{name}_membership"] = member
        print(f"{name}: membership residual {member:.3e}")
        for ell in (0, 1, 2):
            res = residual_error(u, space, SobolevParams(1.0, ell),
                                 eval_params=SobolevParams(1.0, 0))
            records[f"{name}_residual_l{ell}"] = res
            print(f"{name}: ||u - Pu||_L2 at ell={ell}: {res:.3e}")
            if name == "sin":
                ok = ok and res <= 1e-8
            else:
                ok = ok and res >= 0.01
        if name == "sin":
            ok = ok and member <= 1e-8
        else:
            ok = ok and member >= 0.01
    if args.out:
        _write(args.out, "counterexample.json",
               json.dumps(records, indent=2, sort_keys=True))
    print("counterexample:", "pass" if ok else "FAIL")
    return 0 if ok else 1


def _cmd_lemmas(args):
    records = []
    ok = True

    def record(lemma, params, seed, values, passed):
        nonlocal ok
        records.append({"lemma": lemma, "params": params, "seed": seed,
                        "values": values, "passed": bool(passed)})
        ok = ok and passed
        print(f"{lemma} {params}: {'pass' if passed else 'FAIL'}")

    const = lambda t, order=0: np.ones_like(t) if order == 0 \
        else np.zeros_like(t)
    rep = trace_constant_report(const, 0.5, 1.0)
    record("trace", {"u": "const", "h": 0.5, "eps": 1.0}, None,
           {"C": rep.fitted_c}, abs(rep.fitted_c - math.sqrt(2)) < 1e-12)
    k, h = 40.0, math.pi / 16
    wave = lambda t, order=0: np.sin(k * t) if order == 0 \
        else k * np.cos(k * t)
    cs = [trace_constant_report(wave, h, eps).fitted_c
          for eps in np.arange(0.1, 0.95, 0.1)]
    record("trace", {"u": "sin(40x)", "h": h}, None,
           {"C_range": [min(cs), max(cs)]}, max(cs) <= 3.0)

    q = moment_match_poly(lambda t, j: np.sin(t) if j == 0 else np.cos(t),
                          0, math.pi)
    record("moment_match", {"u": "sin", "m": 0, "L": math.pi}, None,
           {"coef": list(q.coef)}, abs(q.coef[0] - 2 / math.pi) < 1e-12)

    k = 80.0
    consts = []
    for hk in (0.5, 0.25, 0.125):
        n = max(2, round(2 * math.pi * k / hk))
        space = SplineSpace(uniform_mesh(n), 1, 0)
        u, _ = random_oscillating(k, seed=0)
        rep = energy_split_report(u, space, SobolevParams(k, 0), 0, 0.1)
        consts.append(rep.fitted_c)
    spread = max(consts) / min(consts)
    record("energy_split", {"p": 1, "k": k, "eps": 0.1}, 0,
           {"C": consts, "spread": spread}, spread <= 3.0)

    k = 40.0
    n = max(2, round(2 * math.pi * k / 0.25))
    space = SplineSpace(uniform_mesh(n), 1, 0)
    u, _ = random_oscillating(k, seed=1)
    pr = project(u, space, SobolevParams(k, 0))
    idrep = decomposition_check(u, space.mesh, 1, spline=pr.spline)
    record("identities", {"p": 1, "k": k, "hk": 0.25}, 1,
           {"rel_defect": idrep.rel_defect}, idrep.rel_defect <= 1e-10)

    if args.out:
        _write(args.out, "lemmas.json",
               json.dumps(records, indent=2, sort_keys=True))
    return 0 if ok else 1


def _cmd_duality(args):
    k = 40.0
    ok = True
    records = []
    for hk in (0.5, 0.25):
        n = max(2, round(2 * math.pi * k / hk))
        mesh = uniform_mesh(n)
        for ell, s, p, m in ((0, 0, 1, 0), (1, 1, 2, 1), (1, 2, 2, 1)):
            space = SplineSpace(mesh, p, m)
            rep = duality_check(space, k, ell, s)
            good = rep.fitted_c <= 4.0 and rep.verified
            if (ell, s) == (0, 0):
                good = good and abs(rep.fitted_c - 1.0) <= 1e-10
            ok = ok and good
            records.append({"ell": ell, "s": s, "hk": hk, "k": k,
                            **asdict(rep)})
            print(f"duality ell={ell} s={s} hk={hk}: C={rep.fitted_c:.6f} "
                  f"{'pass' if good else 'FAIL'}")
    if args.out:
        _write(args.out, "duality.json",
               json.dumps(records, indent=2, sort_keys=True))
    return 0 if ok else 1


def _cmd_report(args):
    with open(args.table) as fh:
        table = SweepTable.from_csv(fh.read())
    fit_params = dict(FIT_DEFAULTS)
    if args.config:
        _, fit_params = parse_config(args.config)
    fits = _fit_slices(table, fit_params)
    if args.out:
        _write(args.out, "fits.json",
               json.dumps(fits, indent=2, sort_keys=True))
    for entry in fits:
        status = "pass" if entry["passed"] else "FAIL"
        print(f"report p={entry['p']} eval={entry['eval']} "
              f"rho={entry['rho']:g}: {status}")
    return 0 if all(e["passed"] for e in fits) else 1


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="oscbound",
        description="approximation-rate measurements for oscillating "
                    "functions")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a rate sweep from a config")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", default="out")
    sweep.add_argument("--seeds", type=int, default=None)
    sweep.add_argument("--threads", type=int, default=None)
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    sweep.set_defaults(func=_cmd_sweep)

    cx = sub.add_parser("counterexample",
                        help="reproduce the smooth-spline sine membership")
    cx.add_argument("--out", default=None)
    cx.set_defaults(func=_cmd_counterexample)

    lem = sub.add_parser("lemmas", help="run the estimate battery")
    lem.add_argument("--out", default=None)
    lem.set_defaults(func=_cmd_lemmas)

    dua = sub.add_parser("duality", help="operator-norm duality constants")
    dua.add_argument("--out", default=None)
    dua.set_defaults(func=_cmd_duality)

    rep = sub.add_parser("report", help="re-fit an existing sweep CSV")
    rep.add_argument("table")
    rep.add_argument("--config", default=None)
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=_cmd_report)
    return parser


def run_command(argv):
    """Run one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_command(sys.argv[1:]))
