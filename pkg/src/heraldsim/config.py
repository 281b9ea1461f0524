"""Experiment configuration: strict JSON parsing, validation and canonical rendering.

Every time field needs an explicit ``ns`` or ``us`` suffix. Unknown keys are
errors. A minimal config is ``{"run": {"seed": 1}}``.
"""

from dataclasses import dataclass, field, fields
import hashlib
import json

from .model import PhysicalParams
from .protocol import Mode, ProtocolConfig
from .sampler import RunConfig
from .units import format_time, parse_time


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


PARAM_KEYS = ("chi", "eta_as", "eta_s", "gamma0", "tau_c", "bg_as", "bg_s", "efficiency_factors")
PARAM_TIMES = ("tau_c",)
PROTOCOL_KEYS = ("mode", "n_pulses", "dt_w", "delta_T", "delta_t", "write_duration", "read_duration", "feedback")
PROTOCOL_TIMES = ("dt_w", "delta_T", "delta_t", "write_duration", "read_duration")
RUN_KEYS = ("n_trials", "seed", "shards")
FIT_KEYS = ("kind", "data", "model", "free", "fixed", "init", "bounds", "gamma0")
TOP_KEYS = ("params", "protocol", "run", "sweep", "fit", "output")
SWEEP_KEYS = ("variable", "values", "series")
DERIVED_VARIABLES = ("p_as",)
DEFAULT_TRIALS = 100_000


@dataclass(frozen=True)
class Sweep:
    variable: str
    values: tuple
    series_variable: str | None = None
    series_values: tuple = ()


@dataclass(frozen=True)
class FitSpec:
    kind: str
    data: str
    model: str = "physical"
    free: tuple = ("bg_as", "bg_s")
    fixed: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    gamma0: float | None = None


@dataclass(frozen=True)
class ExperimentSpec:
    params: PhysicalParams
    protocol: ProtocolConfig
    run: RunConfig
    sweep: Sweep | None = None
    fit: FitSpec | None = None
    output_path: str | None = None


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _time(value, where):
    try:
        return parse_time(value)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _num(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _build(cls, kwargs, where):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def variable_kind(name):
    """'param', 'protocol', or 'derived' for a sweepable variable name."""
    if name in DERIVED_VARIABLES:
        return "derived"
    if name in PARAM_KEYS and name != "efficiency_factors":
        return "param"
    if name in PROTOCOL_KEYS and name not in ("mode", "feedback"):
        return "protocol"
    raise ConfigError(f"sweep.variable: {name!r} is not a numeric parameter or protocol field")


def _sweep_value(name, value, where):
    if name in PARAM_TIMES or name in PROTOCOL_TIMES:
        return _time(value, where)
    if name in ("n_pulses",):
        return _int(value, where)
    return _num(value, where)


def parse_params(d):
    _check_keys(d, PARAM_KEYS, "params")
    kw = {}
    for k, v in d.items():
        where = f"params.{k}"
        if k in PARAM_TIMES:
            kw[k] = float(_time(v, where))
        elif k == "efficiency_factors":
            if not isinstance(v, dict):
                raise ConfigError(f"{where}: expected an object")
            kw[k] = {kk: _num(vv, f"{where}.{kk}") for kk, vv in v.items()}
        else:
            kw[k] = _num(v, where)
    try:
        return PhysicalParams(**kw)
    except ValueError as exc:
        name = str(exc).split()[0]
        raise ConfigError(f"params.{name}: {exc}") from None


def parse_protocol(d):
    _check_keys(d, PROTOCOL_KEYS, "protocol")
    kw = {}
    for k, v in d.items():
        where = f"protocol.{k}"
        if k in PROTOCOL_TIMES:
            kw[k] = _time(v, where)
        elif k == "mode":
            try:
                kw[k] = Mode(v)
            except ValueError:
                raise ConfigError(f"{where}: expected one of {[m.value for m in Mode]}") from None
        elif k == "feedback":
            if not isinstance(v, bool):
                raise ConfigError(f"{where}: expected true or false")
            kw[k] = v
        else:
            kw[k] = _int(v, where)
    return _build(ProtocolConfig, kw, "protocol")


def parse_dict(tree):
    _check_keys(tree, TOP_KEYS, "config")
    params = parse_params(tree.get("params", {}))
    protocol = parse_protocol(tree.get("protocol", {}))
    run = tree.get("run", {})
    _check_keys(run, RUN_KEYS, "run")
    if "seed" not in run:
        raise ConfigError("run.seed: a seed is required")
    run_cfg = _build(RunConfig, dict(
        params=params, protocol=protocol,
        n_trials=_int(run.get("n_trials", DEFAULT_TRIALS), "run.n_trials"),
        seed=_int(run["seed"], "run.seed"),
        shards=_int(run.get("shards", 1), "run.shards"),
    ), "run")

    sweep = None
    if "sweep" in tree:
        s = tree["sweep"]
        _check_keys(s, SWEEP_KEYS, "sweep")
        if "variable" not in s or "values" not in s:
            raise ConfigError("sweep: needs 'variable' and 'values'")
        variable_kind(s["variable"])
        values = tuple(_sweep_value(s["variable"], v, f"sweep.values[{i}]") for i, v in enumerate(s["values"]))
        if not values:
            raise ConfigError("sweep.values: empty")
        sv, svals = None, ()
        if "series" in s:
            ser = s["series"]
            _check_keys(ser, ("variable", "values"), "sweep.series")
            sv = ser.get("variable")
            try:
                variable_kind(sv)
            except ConfigError:
                raise ConfigError(f"sweep.series.variable: {sv!r} is not a numeric field") from None
            svals = tuple(_sweep_value(sv, v, f"sweep.series.values[{i}]") for i, v in enumerate(ser.get("values", ())))
        sweep = Sweep(s["variable"], values, sv, svals)
        list(sweep_points(params, protocol, sweep))  # every grid point must be a valid config

    fit = None
    if "fit" in tree:
        f = tree["fit"]
        _check_keys(f, FIT_KEYS, "fit")
        for req in ("kind", "data"):
            if req not in f:
                raise ConfigError(f"fit.{req}: required")
        from .fitting.series import SeriesKind
        try:
            SeriesKind(f["kind"])
        except ValueError:
            raise ConfigError(f"fit.kind: expected one of {[k.value for k in SeriesKind]}") from None
        fit = FitSpec(
            kind=f["kind"], data=str(f["data"]), model=f.get("model", "physical"),
            free=tuple(f.get("free", ("bg_as", "bg_s"))),
            fixed={k: _num(v, f"fit.fixed.{k}") for k, v in f.get("fixed", {}).items()},
            init={k: _num(v, f"fit.init.{k}") for k, v in f.get("init", {}).items()},
            bounds={k: tuple(_num(x, f"fit.bounds.{k}") for x in v) for k, v in f.get("bounds", {}).items()},
            gamma0=None if f.get("gamma0") is None else _num(f["gamma0"], "fit.gamma0"),
        )

    out = tree.get("output")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output: expected a path string")
    return ExperimentSpec(params, protocol, run_cfg, sweep, fit, out)


def parse_config(text):
    """Parse and fully validate a JSON config string into an ExperimentSpec."""
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return parse_dict(tree)


def _render_value(name, value):
    if name in PARAM_TIMES:
        ns = float(value)
        return format_time(int(ns)) if ns.is_integer() else f"{ns}ns"
    if name in PROTOCOL_TIMES:
        return format_time(value)
    return value


def to_dict(spec, include_shards=True):
    p = spec.params
    params = {k: _render_value(k, getattr(p, k)) for k in PARAM_KEYS if k != "efficiency_factors"}
    if p.efficiency_factors:
        params["efficiency_factors"] = dict(p.efficiency_factors)
    proto = spec.protocol.to_dict()
    protocol = {k: _render_value(k, proto[k]) for k in PROTOCOL_KEYS}
    run = {"n_trials": spec.run.n_trials, "seed": spec.run.seed}
    if include_shards:
        run["shards"] = spec.run.shards
    tree = {"params": params, "protocol": protocol, "run": run}
    if spec.sweep is not None:
        s = spec.sweep
        tree["sweep"] = {"variable": s.variable, "values": [_render_value(s.variable, v) for v in s.values]}
        if s.series_variable is not None:
            tree["sweep"]["series"] = {"variable": s.series_variable,
                                       "values": [_render_value(s.series_variable, v) for v in s.series_values]}
    if spec.fit is not None:
        f = spec.fit
        tree["fit"] = {"kind": f.kind, "data": f.data, "model": f.model, "free": list(f.free),
                       "fixed": dict(f.fixed), "init": dict(f.init),
                       "bounds": {k: list(v) for k, v in f.bounds.items()}}
        if f.gamma0 is not None:
            tree["fit"]["gamma0"] = f.gamma0
    if spec.output_path is not None:
        tree["output"] = spec.output_path
    return tree


def render(spec, include_shards=True):
    """Canonical JSON for ``spec``; ``parse_config(render(spec)) == spec``."""
    return json.dumps(to_dict(spec, include_shards), indent=2, sort_keys=True) + "\n"


def config_hash(spec):
    """Hash of the resolved config without execution-only settings (shards, output path)."""
    tree = to_dict(spec, include_shards=False)
    tree.pop("output", None)
    return hashlib.sha256(json.dumps(tree, sort_keys=True).encode()).hexdigest()[:16]


def apply_variable(params, protocol, name, value):
    """Return (params, protocol) with ``name`` set to ``value``."""
    kind = variable_kind(name)
    try:
        if kind == "param":
            return params.replace(**{name: value}), protocol
        if kind == "protocol":
            return params, protocol.replace(**{name: value})
    except ValueError as exc:
        raise ConfigError(f"sweep value {name}={value}: {exc}") from None
    from .fitting.curves import chi_from_herald_probability

    chi = float(chi_from_herald_probability(value, params.eta_as, params.bg_as))
    try:
        return params.replace(chi=chi), protocol
    except ValueError as exc:
        raise ConfigError(f"sweep value p_as={value}: {exc}") from None


def sweep_points(params, protocol, sweep):
    """Yield ``(series_value, value, params, protocol)`` over the sweep grid."""
    outer = sweep.series_values if sweep.series_variable else (None,)
    for sv in outer:
        p0, pr0 = (params, protocol) if sv is None else apply_variable(params, protocol, sweep.series_variable, sv)
        for v in sweep.values:
            p, pr = apply_variable(p0, pr0, sweep.variable, v)
            yield sv, v, p, pr


def with_overrides(spec, trials=None, seed=None, shards=None, output=None):
    run = spec.run
    kw = {f.name: getattr(run, f.name) for f in fields(run)}
    if trials is not None:
        kw["n_trials"] = trials
    if seed is not None:
        kw["seed"] = seed
    if shards is not None:
        kw["shards"] = shards
    run = _build(RunConfig, kw, "run")
    return ExperimentSpec(spec.params, spec.protocol, run, spec.sweep, spec.fit,
                          output if output is not None else spec.output_path)
