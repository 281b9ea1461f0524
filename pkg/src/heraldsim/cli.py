"""Command-line front end: ``heraldsim {simulate,analytic,fit,sweep} --config cfg.json``.

All outputs are comma-separated tables preceded by ``#`` header lines that
carry the tool version, the config hash and the seed. Errors print one
``error: <kind>: <message>`` line on stderr.
"""

import argparse
import math
import sys

from . import __version__
from .config import ConfigError, config_hash, parse_config, sweep_points, with_overrides
from .estimators import UndefinedEstimate, alpha_estimate, g2_estimate, herald_fraction
from .fitting import AlphaCurveFitter, DataSeries, G2DelayFitter, G2PasFitter, SeriesKind
from .model import cumulative_excitation_probability, detection_probabilities, g2_cross
from .oracle import exact_click_distribution, feedback_alpha, herald_probability
from .protocol import describe, storage_delay
from .sampler import RunConfig, run_batch

EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".10g")
    return str(v)


def _table(columns, rows):
    lines = [",".join(columns)]
    lines += [",".join(_fmt(r.get(c)) for c in columns) for r in rows]
    return "\n".join(lines) + "\n"


def _header(spec, command):
    return "".join(f"# {line}\n" for line in (
        f"heraldsim {__version__}",
        f"command={command}",
        f"config_hash={config_hash(spec)}",
        f"seed={spec.run.seed}",
        f"protocol={describe(spec.protocol)}",
        "errors are one standard deviation",
    ))


def _safe(fn):
    try:
        return float(fn())
    except (ZeroDivisionError, ValueError, UndefinedEstimate):
        return math.nan


def analytic_row(params, protocol):
    """Model (first order) and exact-oracle reference values for one configuration."""
    delay0 = storage_delay(protocol, 0)
    p_exact = herald_probability(params)

    def g2_exact():
        d = exact_click_distribution(params, delay0)
        s = 1.0 - d.probs[(False, False, False)] - d.probs[(True, False, False)]
        return (d.marginal(1) - d.probs[(True, False, False)]) / (d.marginal(1) * s)

    return {
        "p_as_model": _safe(lambda: detection_probabilities(params, delay0).p_as),
        "p_as_exact": p_exact,
        "train_herald_exact": cumulative_excitation_probability(p_exact, protocol.n_pulses),
        "g2_model": _safe(lambda: g2_cross(params, delay0)),
        "g2_exact": _safe(g2_exact),
        "alpha_exact": _safe(lambda: feedback_alpha(params, protocol)),
    }


ANALYTIC_COLUMNS = ["p_as_model", "p_as_exact", "train_herald_exact", "g2_model", "g2_exact", "alpha_exact"]
ESTIMATE_COLUMNS = ["n_trials", "n_herald", "herald_fraction", "herald_fraction_err",
                    "g2", "g2_err", "alpha", "alpha_err", "n_d23_given_herald"]


def estimate_row(acc):
    row = {"n_trials": acc.n_trials, "n_herald": acc.n_herald, "n_d23_given_herald": acc.n_d23_given_herald}
    try:
        h = herald_fraction(acc)
        row["herald_fraction"], row["herald_fraction_err"] = h.value, h.std_error
    except UndefinedEstimate:
        pass
    if acc.open_loop:
        try:
            row["g2"], row["g2_err"] = g2_estimate(acc)
        except UndefinedEstimate:
            pass
    try:
        row["alpha"], row["alpha_err"] = alpha_estimate(acc)
    except UndefinedEstimate:
        pass
    return row


def cmd_simulate(spec):
    acc = run_batch(spec.run)
    out = _header(spec, "simulate")
    out += "# counters\nname,value\n" + acc.snapshot()
    row = {**estimate_row(acc), **analytic_row(spec.params, spec.protocol)}
    out += "# estimates\nquantity,value\n"
    out += "".join(f"{k},{_fmt(row.get(k))}\n" for k in ESTIMATE_COLUMNS + ANALYTIC_COLUMNS)
    return out


def _grid(spec):
    if spec.sweep is None:
        return [(None, None, spec.params, spec.protocol)], None, None
    return list(sweep_points(spec.params, spec.protocol, spec.sweep)), spec.sweep.variable, spec.sweep.series_variable


def _lead(var, sv):
    return ([sv] if sv else []) + ([var] if var else [])


def _lead_values(row, var, sv, series_value, value):
    if sv:
        row[sv] = series_value
    if var:
        row[var] = value
    return row


def cmd_analytic(spec):
    points, var, sv = _grid(spec)
    rows = [_lead_values(analytic_row(p, pr), var, sv, s, v) for s, v, p, pr in points]
    return _header(spec, "analytic") + _table(_lead(var, sv) + ANALYTIC_COLUMNS, rows)


def cmd_sweep(spec):
    points, var, sv = _grid(spec)
    rows = []
    for k, (s, v, p, pr) in enumerate(points):
        # each grid point gets its own stream family: seed + point index
        run = RunConfig(p, pr, spec.run.n_trials, (spec.run.seed + k) % (1 << 64), spec.run.shards)
        acc = run_batch(run)
        rows.append(_lead_values({**estimate_row(acc), **analytic_row(p, pr)}, var, sv, s, v))
    return _header(spec, "sweep") + _table(_lead(var, sv) + ESTIMATE_COLUMNS + ANALYTIC_COLUMNS, rows)


class FitFailed(RuntimeError):
    pass


def make_fitter(spec, kind):
    f = spec.fit
    common = dict(init=f.init or None, bounds=f.bounds or None)
    if kind is SeriesKind.G2_VS_PAS:
        return G2PasFitter(fixed=f.fixed or None, **common)
    if kind is SeriesKind.G2_VS_DELAY:
        gamma0 = f.gamma0 if f.gamma0 is not None else spec.params.gamma0
        return G2DelayFitter(gamma0=gamma0, fixed=f.fixed or None, **common)
    return AlphaCurveFitter(params=spec.params, protocol=spec.protocol, kind=kind.value,
                            model=f.model, free=f.free, **common)


def cmd_fit(spec):
    if spec.fit is None:
        raise ConfigError("fit: the fit subcommand needs a 'fit' section")
    try:
        with open(spec.fit.data) as fh:
            series = DataSeries.from_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"fit.data: cannot read {spec.fit.data!r} ({exc.strerror})") from None
    except ValueError as exc:
        raise ConfigError(f"fit.data: {exc}") from None
    if series.kind.value != spec.fit.kind:
        raise ConfigError(f"fit.kind: config says {spec.fit.kind} but the data file holds {series.kind.value}")
    result = make_fitter(spec, series.kind).fit_series(series).result_
    out = _header(spec, "fit") + f"# kind={series.kind.value} points={len(series)}\n" + result.table()
    if not result.converged or result.degenerate:
        raise FitFailed(out, "degenerate" if result.degenerate else "did not converge")
    return out


COMMANDS = {"simulate": cmd_simulate, "analytic": cmd_analytic, "fit": cmd_fit, "sweep": cmd_sweep}


def build_parser():
    ap = argparse.ArgumentParser(prog="heraldsim", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--out", help="output path (default: config 'output', else stdout)")
    ap.add_argument("--shards", type=int, help="override run.shards")
    ap.add_argument("--trials", type=int, help="override run.n_trials")
    ap.add_argument("--seed", type=int, help="override run.seed")
    return ap


def _write(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            spec = parse_config(fh.read())
        spec = with_overrides(spec, trials=args.trials, seed=args.seed, shards=args.shards, output=args.out)
        text = COMMANDS[args.command](spec)
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FitFailed as exc:
        _write(exc.args[0], spec.output_path)
        print(f"error: fit: {exc.args[1]}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    _write(text, spec.output_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
