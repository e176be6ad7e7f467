"""Command-line front end: ``qhofilter {check,moments,synth}``.

Exit codes: 0 success, 2 unreadable or malformed input, 3 a model
invariant is violated, 4 the observer or horizon is inadmissible,
5 no synthesis seed converged.
"""

import argparse
import json
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import load
from .coupled import admissibility, assemble, gramians
from .cqf.conditions import stationarity
from .cqf.cost import evaluate_cost
from .cqf.optimize import multistart
from .errors import (ConfigError, InitNotAdmissible, NotAdmissible, QhoFilterError,
                     ReportFormatError, TauTooLarge)
from .matcore import stability_margin
from .moments import (InitialSecondMoments, MomentTensor, check_tau,
                      discounted_moment_tensor, discounted_second_moments,
                      discounted_second_moments_freq, infinite_horizon_moment_tensor)
from .qho import QhoModel, diagonalize_modes
from .report import (SCHEMA_VERSION, SynthesisReport, cost_dict, stationarity_dict,
                     trace_csv, trace_summary, write_atomic)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INVARIANT = 3
EXIT_INADMISSIBLE = 4
EXIT_NO_CONVERGENCE = 5

METHODS = ("ale", "freq", "modes")


class _Out:
    def __init__(self, args):
        self.json = args.json
        self.quiet = args.quiet

    def line(self, text):
        if not self.quiet and not self.json:
            print(text)

    def emit(self, data):
        if self.json:
            print(json.dumps(data, sort_keys=True))


def _fmt(x):
    return "inf" if x == float("inf") else "%.17g" % x


def _fail(out, code, exc):
    diag = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if getattr(exc, "field", None):
        diag["field"] = exc.field
    if getattr(exc, "bound", None) is not None:
        diag["bound"] = exc.bound
    if out.json:
        print(json.dumps(diag, sort_keys=True))
    else:
        print(f"error: {exc}", file=sys.stderr)
        if "bound" in diag:
            print(f"bound: {_fmt(diag['bound'])}", file=sys.stderr)
    return code


# check ------------------------------------------------------------------

def cmd_check(args, out):
    cfg = load(args.config)
    data = {"config": args.config, "valid": True, "has_observer": cfg.has_observer,
            "tau": cfg.cost.tau}
    if cfg.has_observer:
        system = assemble(cfg.plant, cfg.observer, cfg.cost)
        adm = admissibility(system)
        data.update(admissible=adm.ok, margin=adm.margin, bound=adm.bound)
    else:
        # Nothing to test yet; the synthesis start family is admissible for every tau.
        plant_bound = stability_margin(2.0 * cfg.plant.theta1.matrix @ cfg.plant.k_energy)
        data.update(admissible=True, margin=float("inf"), bound=float("inf"),
                    plant_tau_bound=plant_bound.tau_bound)
    out.line(f"config: {args.config}")
    out.line("observer: " + ("given" if cfg.has_observer else "to be synthesized"))
    out.line(f"tau: {_fmt(cfg.cost.tau)}")
    out.line(f"bound: {_fmt(data['bound'])}")
    out.line(f"margin: {_fmt(data['margin'])}")
    if not data["admissible"]:
        out.emit(dict(data, exit_code=EXIT_INADMISSIBLE))
        out.line("observer is not tau-admissible")
        return EXIT_INADMISSIBLE
    out.line("ok")
    out.emit(dict(data, exit_code=EXIT_OK))
    return EXIT_OK


# moments ----------------------------------------------------------------

def _target(cfg, which):
    if which == "plant":
        return cfg.plant.theta1, cfg.plant.k_energy, cfg.plant.sigma1
    if not cfg.has_observer:
        raise ConfigError("--target composite needs observer.coupling and observer.m_energy")
    system = assemble(cfg.plant, cfg.observer, cfg.cost)
    return system.theta, system.energy, system.sigma


def _moment_results(cfg, args):
    theta, energy, sigma = _target(cfg, args.target)
    model = QhoModel(theta, energy)
    a = 2.0 * theta.matrix @ energy
    initial = InitialSecondMoments(sigma, theta, cfg.policy.psd_tol)
    degree, horizon = args.degree, args.horizon
    methods = METHODS if args.method == "all" else (args.method,)
    if horizon == "inf":
        margin = stability_margin(a)
        if margin.abscissa > cfg.policy.eig_tol * max(1.0, np.linalg.norm(a, 2)):
            raise TauTooLarge(
                f"infinite-horizon averages need a non-growing flow, but the spectral "
                f"abscissa is {margin.abscissa:.6g} > 0", bound=margin.tau_bound)
        methods = tuple(m for m in methods if m == "modes")
        if not methods:
            raise ConfigError("--horizon inf is only available with --method modes")
        tau = None
    else:
        tau = cfg.cost.tau if horizon == "tau" else float(horizon)
        check_tau(a, tau)
        if degree != 2:
            methods = tuple(m for m in methods if m == "modes")
            if not methods:
                raise ConfigError(f"degree {degree} is only available with --method modes")

    results = {}
    for method in methods:
        if method == "ale":
            p = discounted_second_moments(a, sigma, tau, cfg.policy)
            results[method] = p + 1j * theta.matrix
        elif method == "freq":
            p = discounted_second_moments_freq(a, initial.gamma, tau, cfg.quad)
            results[method] = p + 1j * theta.matrix
        else:
            modes = diagonalize_modes(model, cfg.policy)
            m0 = MomentTensor.gaussian(initial, degree)
            if tau is None:
                results[method] = infinite_horizon_moment_tensor(modes, m0, cfg.policy)
            else:
                results[method] = discounted_moment_tensor(modes, m0, tau, cfg.policy)
    return results


def _max_discrepancy(results):
    names = list(results)
    worst = 0.0
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            worst = max(worst, float(np.max(np.abs(results[a] - results[b]))))
    return worst


def cmd_moments(args, out):
    cfg = load(args.config)
    results = _moment_results(cfg, args)
    tol = 1e-6 if args.tol is None else args.tol
    disc = _max_discrepancy(results) if len(results) > 1 else None
    agree = disc is None or disc <= tol
    if out.json:
        out.emit({
            "degree": args.degree,
            "horizon": args.horizon,
            "target": args.target,
            "moments": {m: {"real": v.real.tolist(), "imag": v.imag.tolist()}
                        for m, v in results.items()},
            "max_discrepancy": disc,
            "tol": tol,
            "agree": agree,
        })
    elif not out.quiet:
        idx = ",".join(f"j{s + 1}" for s in range(args.degree))
        print(f"method,{idx},re,im")
        for m, v in results.items():
            for j in np.ndindex(v.shape):
                print(",".join([m, *map(str, j), "%.17g" % v[j].real, "%.17g" % v[j].imag]))
        if disc is not None:
            print(f"# max_discrepancy {disc:.3e} (tol {tol:g})", file=sys.stderr)
    if not agree:
        if not out.json:
            print(f"error: methods disagree by {disc:.3e} > {tol:g}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# synth ------------------------------------------------------------------

def _admissibility_dict(system):
    adm = admissibility(system)
    return {"ok": adm.ok, "margin": adm.margin, "bound": adm.bound}


def _runs_list(ms):
    return [{"seed": r.seed, "status": r.status, "cost": r.cost.total,
             "initial_cost": r.initial_cost, "iterations": r.iterations}
            for r in ms.results]


def _report(cfg, mode, status, system, pair, rtol, runs, multiple, trace, seed, wall):
    return SynthesisReport(
        schema_version=SCHEMA_VERSION,
        library_version=__version__,
        mode=mode,
        status=status,
        input=cfg.echo,
        input_hash=cfg.input_hash,
        best_seed=seed,
        L=system.L.tolist(),
        M=system.M.tolist(),
        cost=cost_dict(evaluate_cost(system, pair)),
        stationarity=stationarity_dict(stationarity(system, pair), rtol),
        admissibility=_admissibility_dict(system),
        runs=runs,
        multiple_stationary_values=multiple,
        trace_summary=trace_summary(trace) if trace else {},
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        wall_clock_s=wall,
    ).sealed()


def _seeds(cfg, args):
    if args.seeds is None:
        return list(cfg.seeds)
    return list(range(args.seeds))


def cmd_synth(args, out):
    cfg = load(args.config)
    rtol = 1e-6 if args.tol is None else args.tol
    start_time = time.perf_counter()

    if args.verify_only:
        if not cfg.has_observer:
            raise ConfigError("--verify-only needs observer.coupling and observer.m_energy")
        system = assemble(cfg.plant, cfg.observer, cfg.cost)
        pair = gramians(system)
        stat = stationarity(system, pair)
        status = "stationary" if stat.is_stationary(rtol) else "not_stationary"
        report = _report(cfg, "verify", status, system, pair, rtol, [], False, None, None,
                         time.perf_counter() - start_time)
        code = EXIT_OK
        trace = None
    else:
        seeds = _seeds(cfg, args)
        if not seeds:
            raise ConfigError("--seeds must be at least 1")
        start = cfg.observer if cfg.has_observer else None
        if start is not None:
            adm = admissibility(assemble(cfg.plant, start, cfg.cost))
            if not adm.ok:
                raise InitNotAdmissible(
                    f"given observer is not {cfg.cost.tau:g}-admissible", bound=adm.bound)
        ms = multistart(cfg.plant, cfg.cost, cfg.observer, seeds, cfg.options, start=start)
        best = ms.best
        if best is None:
            raise QhoFilterError("no synthesis run produced a result")
        trace = best.trace
        status = "converged" if ms.converged else best.status
        system = best.system
        report = _report(cfg, "synth", status, system, gramians(system), rtol,
                         _runs_list(ms), ms.multiple_stationary_values, trace, best.seed,
                         time.perf_counter() - start_time)
        code = EXIT_OK if ms.converged else EXIT_NO_CONVERGENCE

    if args.report:
        write_atomic(args.report, report.to_json())
    if args.trace and trace is not None:
        write_atomic(args.trace, trace_csv(trace))

    stat = report.stationarity
    if out.json:
        if args.report:
            out.emit({"status": report.status, "report": args.report, "exit_code": code,
                      "cost": report.cost["total"], "report_hash": report.report_hash})
        else:
            print(report.to_json(), end="")
    else:
        out.line(f"status: {report.status}")
        out.line(f"cost: {_fmt(report.cost['total'])}")
        out.line(f"res_L: {stat['res_L']:.3e}")
        out.line(f"res_M: {stat['res_M']:.3e}")
        out.line(f"nondegenerate: {str(stat['nondegenerate']).lower()}")
        if report.multiple_stationary_values:
            out.line("note: seeds reached different stationary values")
        if code == EXIT_NO_CONVERGENCE:
            print("error: no seed converged; best-effort report written", file=sys.stderr)
    return code


# entry point ------------------------------------------------------------

def _common(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", metavar="PATH", default=default(None),
                        help="model configuration (TOML)")
    parser.add_argument("--json", action="store_true", default=default(False),
                        help="machine-readable output and diagnostics")
    parser.add_argument("--quiet", action="store_true", default=default(False))
    parser.add_argument("--tol", type=float, metavar="X", default=default(None),
                        help="acceptance tolerance for cross-checks (default 1e-6)")


def build_parser():
    parser = argparse.ArgumentParser(prog="qhofilter", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a config and test admissibility")
    _common(p, suppress=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("moments", help="discounted or infinite-horizon moments")
    _common(p, suppress=True)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--horizon", default="tau",
                   help="'tau' (from the config), 'inf', or a positive number")
    p.add_argument("--method", choices=METHODS + ("all",), default="ale")
    p.add_argument("--target", choices=("plant", "composite"), default="plant")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("synth", help="optimize the observer and report stationarity")
    _common(p, suppress=True)
    p.add_argument("--seeds", type=int, metavar="K",
                   help="use seeds 0..K-1 instead of the config's list")
    p.add_argument("--trace", metavar="CSV", help="write the best run's iterations")
    p.add_argument("--report", metavar="JSON", help="write the synthesis report")
    p.add_argument("--verify-only", action="store_true",
                   help="evaluate the given observer without optimizing")
    p.set_defaults(func=cmd_synth)
    return parser


def _validate_args(parser, args):
    if args.config is None:
        parser.error("--config is required")
    if args.command == "moments":
        if args.degree < 1:
            parser.error("--degree must be positive")
        if args.horizon not in ("tau", "inf"):
            try:
                value = float(args.horizon)
            except ValueError:
                parser.error(f"--horizon must be 'tau', 'inf' or a number, got {args.horizon!r}")
            if not value > 0:
                parser.error("--horizon must be positive")
    if args.tol is not None and not args.tol > 0:
        parser.error("--tol must be positive")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate_args(parser, args)
    out = _Out(args)
    try:
        return args.func(args, out)
    except (ConfigError, ReportFormatError) as exc:
        return _fail(out, EXIT_PARSE, exc)
    except (NotAdmissible, TauTooLarge) as exc:
        return _fail(out, EXIT_INADMISSIBLE, exc)
    except (QhoFilterError, ValueError) as exc:
        return _fail(out, EXIT_INVARIANT, exc)


if __name__ == "__main__":
    sys.exit(main())
