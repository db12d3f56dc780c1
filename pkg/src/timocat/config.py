"""INI run configuration: parsing, defaults and re-emission.

Layout::

    [physics]      rho1 rho2 rho3 b k gamma delta kappa mu tau0 L  (+ exploratory)
    [sigma]        kind = linear | default, amplitude
    [boundary]     variant = dirichlet_all | neumann_displacement
    [numerics]     m, dt, t_end, sample_every, integrator, margin
    [initial]      preset + preset keyword arguments
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace

from .dynamics import INTEGRATORS, Layout, ModalState, SimConfig, max_stable_dt
from .errors import ConfigTypeError, MissingKey, ValidationError
from .initial import PRESETS, make_initial
from .model import PARAM_KEYS, BoundarySet, ConstitutiveLaw, PhysicalParams, make_default_sigma, validate_params

NUMERIC_DEFAULTS = {"m": 32, "dt": None, "t_end": 10.0, "sample_every": 10, "integrator": "rk4", "margin": 0.5}

PRESET_KEYS = {
    "single_mode": {"field": str, "index": int, "amplitude": float},
    "gaussian_bump": {"center": float, "width": float, "amplitude": float},
    "random_seeded": {"seed": int, "decay_exponent": float, "amplitude": float},
}
PRESET_DEFAULTS = {
    "single_mode": {"field": "psi", "index": 1, "amplitude": 1.0},
    "gaussian_bump": {"width": 0.1, "amplitude": 1.0},
    "random_seeded": {"seed": 0, "decay_exponent": 2.0, "amplitude": 1.0},
}
SIGMA_KINDS = ("linear", "default")


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams
    sigma_kind: str
    amplitude: float
    bc: BoundarySet
    m: int
    dt: float | None
    t_end: float
    sample_every: int
    integrator: str
    margin: float
    initial: dict = field(default_factory=dict)

    @property
    def law(self) -> ConstitutiveLaw:
        return make_default_sigma(self.params.k, self.amplitude if self.sigma_kind == "default" else 0.0)

    @property
    def layout(self) -> Layout:
        return Layout(self.bc, self.m, self.params.L)

    @property
    def time_step(self) -> float:
        """Explicit ``dt`` or the CFL limit."""
        if self.dt is not None:
            return self.dt
        return max_stable_dt(self.params, self.law, self.m)

    def sim_config(self) -> SimConfig:
        return SimConfig(self.params, self.law, self.bc, self.m, self.time_step, self.t_end,
                         self.sample_every, self.integrator)

    def initial_state(self) -> ModalState:
        kwargs = dict(self.initial)
        preset = kwargs.pop("preset")
        return make_initial(self.layout, preset, **kwargs)

    def with_param(self, name: str, value: float) -> "RunConfig":
        if name not in PARAM_KEYS:
            raise ValidationError(f"unknown physics parameter {name!r}")
        return replace(self, params=self.params.replace(**{name: value}))


def _convert(name, raw, kind):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigTypeError(name, raw)
    try:
        value = kind(raw.strip())
    except ValueError:
        raise ConfigTypeError(name, raw) from None
    if kind is float and not math.isfinite(value):
        raise ConfigTypeError(name, raw)
    return value


def _section(cp, name, required=True):
    if cp.has_section(name):
        return cp[name]
    if required:
        raise MissingKey(name)
    return {}


def _check_known(section_name, section, allowed):
    extra = sorted(set(section) - set(allowed))
    if extra:
        raise ValidationError(f"unknown keys in [{section_name}]: {', '.join(extra)}")


def parse_text(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed configuration: {exc}") from exc

    physics = _section(cp, "physics")
    _check_known("physics", physics, PARAM_KEYS + ("exploratory",))
    raw = {}
    for key in PARAM_KEYS:
        if key not in physics:
            raise MissingKey(key)
        raw[key] = _convert(key, physics[key], float)
    exploratory = _convert("exploratory", physics.get("exploratory", "false"), bool)
    params = validate_params(raw, exploratory=exploratory)

    sigma = _section(cp, "sigma", required=False)
    _check_known("sigma", sigma, ("kind", "amplitude"))
    kind = sigma.get("kind", "linear").strip().lower()
    if kind not in SIGMA_KINDS:
        raise ValidationError(f"sigma kind must be one of {SIGMA_KINDS} (got {kind!r})")
    amplitude = _convert("amplitude", sigma.get("amplitude", "1.0" if kind == "default" else "0.0"), float)
    if amplitude < 0:
        raise ValidationError("sigma amplitude must be >= 0")

    boundary = _section(cp, "boundary", required=False)
    _check_known("boundary", boundary, ("variant",))
    bc = BoundarySet.parse(boundary.get("variant", BoundarySet.DIRICHLET_ALL.value))

    numerics = _section(cp, "numerics", required=False)
    _check_known("numerics", numerics, tuple(NUMERIC_DEFAULTS))
    num = dict(NUMERIC_DEFAULTS)
    for key, kind_ in (("m", int), ("dt", float), ("t_end", float), ("sample_every", int), ("margin", float)):
        if key in numerics:
            num[key] = _convert(key, numerics[key], kind_)
    if "integrator" in numerics:
        num["integrator"] = numerics["integrator"].strip().lower()
    if num["integrator"] not in INTEGRATORS:
        raise ValidationError(f"integrator must be one of {INTEGRATORS}")
    if not 0 < num["margin"] < 1:
        raise ValidationError("margin must lie in (0, 1)")
    if num["dt"] is not None and not num["dt"] > 0:
        raise ValidationError("dt must be > 0")
    if num["m"] < 1:
        raise ValidationError("m must be >= 1")
    if not num["t_end"] > 0:
        raise ValidationError("t_end must be > 0")
    if num["sample_every"] < 1:
        raise ValidationError("sample_every must be >= 1")

    init = _section(cp, "initial", required=False)
    preset = init.get("preset", "single_mode").strip()
    if preset not in PRESETS:
        raise ValidationError(f"unknown initial preset {preset!r}; expected one of {PRESETS}")
    _check_known("initial", init, ("preset",) + tuple(PRESET_KEYS[preset]))
    initial = {"preset": preset}
    initial.update(PRESET_DEFAULTS[preset])
    for key, kind_ in PRESET_KEYS[preset].items():
        if key in init:
            initial[key] = _convert(key, init[key], kind_)
    if preset == "gaussian_bump":
        initial.setdefault("center", params.L / 2)
        if not 0 <= initial["center"] <= params.L:
            raise ValidationError(f"gaussian center must lie in [0, {params.L}]")
        if not 0 < initial["width"] <= params.L:
            raise ValidationError(f"gaussian width must lie in (0, {params.L}]")

    cfg = RunConfig(params=params, sigma_kind=kind, amplitude=amplitude, bc=bc, **num, initial=initial)
    # build once so bad preset arguments fail at parse time
    cfg.initial_state()
    return cfg


def parse_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read())


def emit_config(cfg: RunConfig) -> str:
    """INI text that parses back to ``cfg``."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["physics"] = {key: repr(getattr(cfg.params, key)) for key in PARAM_KEYS}
    cp["physics"]["exploratory"] = "true" if cfg.params.exploratory else "false"
    cp["sigma"] = {"kind": cfg.sigma_kind, "amplitude": repr(cfg.amplitude)}
    cp["boundary"] = {"variant": cfg.bc.value}
    numerics = {"m": str(cfg.m), "t_end": repr(cfg.t_end), "sample_every": str(cfg.sample_every),
                "integrator": cfg.integrator, "margin": repr(cfg.margin)}
    if cfg.dt is not None:
        numerics["dt"] = repr(cfg.dt)
    cp["numerics"] = numerics
    cp["initial"] = {key: (repr(v) if isinstance(v, float) else str(v)) for key, v in cfg.initial.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
