"""Run configuration: validation, unit conversion and JSON round-trip."""

import json
from dataclasses import asdict, dataclass, field, fields

from .reservoir import HBAR_OMEGA0_UEV, OMEGA0_GHZ, kelvin_to_theta

FORMAT_VERSION = 1

OUTPUTS = ("green", "coefficients", "observables", "populations")
COMPARISONS = ("bm", "second_order", "oracle")
INITIAL_KINDS = ("vacuum", "coherent", "thermal")

#: Coupling grids for the weak (eta <= 0.3) and strong (eta >= 0.4) panels.
#: The intermediate values are implementation defaults.
WEAK_ETAS = (0.02, 0.1, 0.2, 0.3)
STRONG_ETAS = (0.4, 0.6, 0.8, 1.0)
SPECTRAL_CLASSES = (0.5, 1.0, 3.0)


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` maps field names to messages."""

    def __init__(self, errors):
        self.errors = dict(errors)
        super().__init__("; ".join(f"{k}: {v}" for k, v in self.errors.items()))


@dataclass(frozen=True)
class InitialState:
    kind: str = "vacuum"
    alpha0: tuple = (0.0, 0.0)
    n0: float = 0.0

    @property
    def alpha(self):
        return complex(*self.alpha0)

    @property
    def mean(self):
        if self.kind == "coherent":
            return abs(self.alpha) ** 2
        if self.kind == "thermal":
            return self.n0
        return 0.0


@dataclass(frozen=True)
class RunConfig:
    s: tuple = (1.0,)
    eta: tuple = (0.1,)
    omega_c: float = 1.0
    theta: float = None
    temperature_k: float = None
    t_end: float = 50.0
    n_steps: int = 10000
    initial: InitialState = field(default_factory=InitialState)
    outputs: tuple = ("green", "coefficients", "observables")
    compare: tuple = ("bm",)
    omega0_ghz: float = OMEGA0_GHZ
    hbar_omega0_uev: float = HBAR_OMEGA0_UEV
    output_points: int = 1001
    oracle_modes: int = 2000
    label: str = "run"

    def __post_init__(self):
        validate(self)

    @property
    def resolved_theta(self):
        if self.theta is not None:
            return float(self.theta)
        if self.temperature_k is not None:
            return kelvin_to_theta(self.temperature_k, self.hbar_omega0_uev)
        return 0.0

    @property
    def dt(self):
        return self.t_end / self.n_steps

    def points(self):
        return [(s, eta) for s in self.s for eta in self.eta]

    def to_dict(self):
        d = asdict(self)
        d["s"] = list(self.s)
        d["eta"] = list(self.eta)
        d["outputs"] = list(self.outputs)
        d["compare"] = list(self.compare)
        d["initial"]["alpha0"] = list(self.initial.alpha0)
        return d

    def replace(self, **changes):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return RunConfig(**d)


def validate(cfg):
    errors = {}
    if not cfg.s:
        errors["s"] = "at least one Ohmicity exponent is required"
    elif any(not (x > 0) for x in cfg.s):
        errors["s"] = "every s must be > 0"
    if not cfg.eta:
        errors["eta"] = "at least one coupling is required"
    elif any(not (x >= 0) for x in cfg.eta):
        errors["eta"] = "every eta must be >= 0"
    if not cfg.omega_c > 0:
        errors["omega_c"] = "must be > 0"
    if cfg.theta is not None and cfg.temperature_k is not None:
        errors["theta"] = "give either theta or temperature_k, not both"
    elif cfg.theta is not None and not cfg.theta >= 0:
        errors["theta"] = "must be >= 0"
    elif cfg.temperature_k is not None and not cfg.temperature_k >= 0:
        errors["temperature_k"] = "must be >= 0"
    if not cfg.t_end > 0:
        errors["t_end"] = "must be > 0"
    if not (isinstance(cfg.n_steps, int) and cfg.n_steps >= 2):
        errors["n_steps"] = "must be an integer >= 2"
    init = cfg.initial
    if not isinstance(init, InitialState):
        errors["initial"] = "must be an InitialState"
    elif init.kind not in INITIAL_KINDS:
        errors["initial.kind"] = f"must be one of {', '.join(INITIAL_KINDS)}"
    elif not init.n0 >= 0:
        errors["initial.n0"] = "must be >= 0"
    elif len(init.alpha0) != 2:
        errors["initial.alpha0"] = "must be a (re, im) pair"
    bad = [o for o in cfg.outputs if o not in OUTPUTS]
    if bad or not cfg.outputs:
        errors["outputs"] = f"choose a non-empty subset of {', '.join(OUTPUTS)}"
    bad = [c for c in cfg.compare if c not in COMPARISONS]
    if bad:
        errors["compare"] = f"unknown comparison(s) {bad}; valid: {', '.join(COMPARISONS)}"
    if not cfg.omega0_ghz > 0:
        errors["omega0_ghz"] = "must be > 0"
    if not cfg.hbar_omega0_uev > 0:
        errors["hbar_omega0_uev"] = "must be > 0"
    if not (isinstance(cfg.output_points, int) and cfg.output_points >= 2):
        errors["output_points"] = "must be an integer >= 2"
    if not (isinstance(cfg.oracle_modes, int) and cfg.oracle_modes >= 10):
        errors["oracle_modes"] = "must be an integer >= 10"
    if errors:
        raise ConfigError(errors)


def from_dict(d):
    d = dict(d)
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(d) - known - {"format_version"})
    if unknown:
        raise ConfigError({k: "unknown field" for k in unknown})
    d.pop("format_version", None)
    for key in ("s", "eta", "outputs", "compare"):
        if key in d:
            val = d[key]
            d[key] = tuple(val) if isinstance(val, (list, tuple)) else (val,)
    for key in ("s", "eta"):
        if key in d:
            try:
                d[key] = tuple(float(x) for x in d[key])
            except (TypeError, ValueError):
                raise ConfigError({key: "must be numbers"}) from None
    if "initial" in d and not isinstance(d["initial"], InitialState):
        init = dict(d["initial"])
        if "alpha0" in init:
            a = init["alpha0"]
            init["alpha0"] = (float(a), 0.0) if isinstance(a, (int, float)) else tuple(float(x) for x in a)
        try:
            d["initial"] = InitialState(**init)
        except TypeError as exc:
            raise ConfigError({"initial": str(exc)}) from None
    if "n_steps" in d:
        d["n_steps"] = int(d["n_steps"])
    return RunConfig(**d)


def serialize(cfg):
    d = {"format_version": FORMAT_VERSION}
    d.update(cfg.to_dict())
    return json.dumps(d, indent=2, sort_keys=True)


def parse(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError({"config": f"not valid JSON: {exc}"}) from None
    if not isinstance(d, dict):
        raise ConfigError({"config": "top level must be an object"})
    version = d.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigError({"format_version": f"unsupported version {version}"})
    return from_dict(d)


def load(path):
    with open(path) as fh:
        return parse(fh.read())
