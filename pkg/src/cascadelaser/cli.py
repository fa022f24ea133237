"""Command-line entry point: ``cascadelaser <command> ...``.

Exit codes: 0 success, 1 validation failure (or empty sweep), 2 invalid input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments, fock, moments, observables, validation
from .errors import CascadeLaserError, EmptySweepError, InvalidParameterError, TruncationError, ValidityError
from .params import check_stability, load_params

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _emit(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _report_csv(reports) -> str:
    rows = [r.to_row() for r in reports]
    result = experiments.SweepResult(observables.REPORT_COLUMNS, tuple(rows))
    return result.to_csv()


def cmd_steady(args) -> int:
    p = load_params(args.config)
    stability = check_stability(p)
    for note in stability.notes:
        print(f"note: {note}", file=sys.stderr)
    reports = [observables.observables_from_moments(p, z=args.z)]
    try:
        reports.insert(0, observables.observables_closed_form(p, args.z))
        cmp = moments.compare_steady_states(p)
        if cmp.suspect:
            print(f"note: closed form suspect, mismatched {cmp.mismatched}", file=sys.stderr)
    except (ValidityError, CascadeLaserError) as exc:
        print(f"note: closed form unavailable ({exc})", file=sys.stderr)
    if reports[-1].duan.z == -1.0:
        print(f"note: {reports[-1].duan.notes}", file=sys.stderr)
    _emit(_report_csv(reports), args.out)
    return EXIT_OK


def cmd_evolve(args) -> int:
    p = load_params(args.config)
    traj = moments.evolve(moments.MomentState.vacuum(), p, args.t, args.tol)
    if traj.stability is not None and not traj.stability.stable:
        print("note: parameters are unstable; moments grow without bound", file=sys.stderr)
    print(f"note: {traj.steps} steps, {traj.rejected_steps} rejected, nfev={traj.nfev}", file=sys.stderr)
    _emit(traj.to_csv(), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = experiments.load_sweep_spec(args.spec)
    result = experiments.run_sweep(spec, max_workers=args.workers)
    _emit(result.to_csv(), args.out)
    return EXIT_OK


def cmd_figure(args) -> int:
    job = experiments.figure_job(args.figure)
    fig = experiments.run_figure(job, args.out, plot=args.plot)
    if args.out is None:
        sys.stdout.write(fig.to_csv())
    return EXIT_OK


def cmd_oracle(args) -> int:
    p = load_params(args.config)
    trunc = fock.TruncationSpec(args.nmax)
    ss = fock.oracle_steady_state(p, trunc)
    print(f"note: solver={ss.solver}, residual={ss.residual:.3g}, "
          f"tail population={ss.rho.tail_population():.3g}", file=sys.stderr)
    if ss.rho.tail_population() > fock.TAIL_THRESHOLD:
        print("note: increase n_max", file=sys.stderr)
    report = observables.observables_from_moments(p, ss.moments, args.z, source="fock_oracle")
    _emit(_report_csv([report]), args.out)
    if args.distribution:
        ss.rho.distribution_csv(args.distribution)
    return EXIT_OK


def cmd_validate(args) -> int:
    report = validation.validate("full" if args.full else "fast")
    print(report.format())
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cascadelaser", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("steady", help="steady-state observables (closed form and moment solve)")
    s.add_argument("--config", required=True)
    s.add_argument("--z", type=float, default=-1.0, help="Duan parameter (default -1)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_steady)

    s = sub.add_parser("evolve", help="integrate the moment equations from vacuum")
    s.add_argument("--config", required=True)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--out")
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("sweep", help="parameter sweep from a JSON spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("figure", help="data series of one figure")
    s.add_argument("figure", choices=experiments.FIGURES)
    s.add_argument("--out", help="output directory (default: CSV to stdout)")
    s.add_argument("--plot", action="store_true", help="also write a PNG (needs --out)")
    s.set_defaults(func=cmd_figure)

    s = sub.add_parser("oracle", help="truncated Fock-space steady state")
    s.add_argument("--config", required=True)
    s.add_argument("--nmax", type=int, required=True)
    s.add_argument("--z", type=float, default=-1.0)
    s.add_argument("--out")
    s.add_argument("--distribution", help="write the photon-number distribution CSV here")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("validate", help="run the cross-validation suite")
    s.add_argument("--full", action="store_true", help="include the Fock-oracle checks")
    s.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InvalidParameterError, TruncationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EmptySweepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except CascadeLaserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
