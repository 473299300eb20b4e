"""
Experiment configuration: a line-oriented ``key = value`` file with
``[section]`` headers, read and written with :mod:`configparser`.

Example::

    [model]
    kind = cubic
    a = 1.0
    b = 1.0
    A = 0.3
    omega = 5.0
    x0 = 0.0

    [grid]
    t0 = 0.0
    t1 = 5.0
    steps = 1000

Custom models give one polynomial per component and, optionally, a
harmonic forcing per component::

    [model]
    kind = custom
    dimension = 2
    drift_1 = -1.0*x1 + 0.5*x2 - 0.2*x1^3
    drift_2 = -2.0*x2 + 0.3*x1^2 + 0.1
    forcing_1 = 0.3*sin(5.0*t) + 0.1*cos(2.0*t)

Floats are written with ``repr`` so that ``parse(emit(c)) == c``.
"""
import configparser
from dataclasses import dataclass, fields, replace
import io
import os
import re

from .errors import StrongLDError
from .integrate import TimeGrid
from .master import CubicParams, DoubleWellParams
from .polyfield import Harmonic, PolyDiffusionMatrix, PolyVectorField, TimeCoefficient
from .presets import get_preset

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "emit_config",
           "config_from_preset", "parse_polynomial", "parse_forcing"]

MODELS = ("cubic", "double_well", "custom")
WIENER_SOURCES = ("", "generate", "load")


class ConfigError(StrongLDError, ValueError):
    pass


# -- term syntax ---------------------------------------------------------

_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_SIGN = re.compile(r"\s*([+-]\s*)*")
_COEF = re.compile(rf"\s*({_NUM})\s*")
_VAR = re.compile(r"\s*\*?\s*x(\d+)(?:\s*\^\s*(\d+))?\s*")
_VAR_LEAD = re.compile(r"\s*x(\d+)(?:\s*\^\s*(\d+))?\s*")
_HARM = re.compile(rf"\s*\*?\s*(sin|cos)\s*\(\s*({_NUM})\s*\*?\s*t\s*\)\s*")


def _signs(text, pos):
    m = _SIGN.match(text, pos)
    sign = -1.0 if m.group(0).count("-") % 2 else 1.0
    return sign, m.end()


def parse_polynomial(text, dimension):
    """Parse ``"c*x1^2*x2 - 0.5*x2 + 1"`` into ``[(coef, exponents), ...]``.

    Repeated monomials are summed; terms appear in order of first occurrence.
    """
    pos, out = 0, {}
    text = text.strip()
    if not text:
        return []
    while pos < len(text):
        sign, pos = _signs(text, pos)
        m = _COEF.match(text, pos)
        coef = 1.0
        has_coef = bool(m)
        if m:
            coef = float(m.group(1))
            pos = m.end()
        exps = [0] * dimension
        n_var = 0
        while True:
            v = (_VAR if has_coef or n_var else _VAR_LEAD).match(text, pos)
            if not v:
                break
            i = int(v.group(1))
            if not 1 <= i <= dimension:
                raise ConfigError(f"variable x{i} outside dimension {dimension} in {text!r}")
            exps[i - 1] += int(v.group(2) or 1)
            n_var += 1
            pos = v.end()
        if not has_coef and n_var == 0:
            raise ConfigError(f"cannot parse polynomial term at {text[pos:]!r}")
        key = tuple(exps)
        out[key] = out.get(key, 0.0) + sign * coef
        if pos < len(text) and text[pos] not in "+-":
            raise ConfigError(f"unexpected {text[pos:]!r} in polynomial {text!r}")
    return [(c, e) for e, c in out.items()]


def parse_forcing(text):
    """Parse ``"0.3*sin(5*t) - 0.1*cos(2*t)"`` into ``[(amplitude, kind, frequency), ...]``."""
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        sign, pos = _signs(text, pos)
        m = _COEF.match(text, pos)
        amp = 1.0
        if m:
            amp = float(m.group(1))
            pos = m.end()
        h = _HARM.match(text, pos)
        if not h:
            raise ConfigError(f"cannot parse forcing term at {text[pos:]!r}")
        out.append((sign * amp, h.group(1), float(h.group(2))))
        pos = h.end()
    return out


def _fmt_float(x):
    return repr(float(x))


def _emit_terms(terms, render):
    parts = []
    for coef, rest in terms:
        body = render(abs(coef), rest)
        if not parts:
            parts.append(("-" if coef < 0 else "") + body)
        else:
            parts.append(("- " if coef < 0 else "+ ") + body)
    return " ".join(parts)


def _render_monomial(mag, exps):
    factors = [f"x{i + 1}" + (f"^{p}" if p > 1 else "") for i, p in enumerate(exps) if p]
    return "*".join([_fmt_float(mag)] + factors)


def emit_polynomial(terms):
    return _emit_terms(terms, _render_monomial)


def emit_forcing(terms):
    return _emit_terms([(a, (k, f)) for a, k, f in terms],
                       lambda mag, kf: f"{_fmt_float(mag)}*{kf[0]}({_fmt_float(kf[1])}*t)")


# -- config --------------------------------------------------------------

def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _fmt_floats(values):
    return ", ".join(_fmt_float(v) for v in values)


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


# attribute -> (section, key, parse, emit)
_SCHEMA = {
    "model": ("model", "kind", str, str),
    "a": ("model", "a", float, _fmt_float),
    "b": ("model", "b", float, _fmt_float),
    "c": ("model", "c", float, _fmt_float),
    "A": ("model", "A", float, _fmt_float),
    "omega": ("model", "omega", float, _fmt_float),
    "B": ("model", "B", float, _fmt_float),
    "theta": ("model", "theta", float, _fmt_float),
    "x0": ("model", "x0", _floats, _fmt_floats),
    "dimension": ("model", "dimension", int, str),
    "t0": ("grid", "t0", float, _fmt_float),
    "t1": ("grid", "t1", float, _fmt_float),
    "steps": ("grid", "steps", int, str),
    "D": ("noise", "D", float, _fmt_float),
    "wiener": ("noise", "wiener", str, str),
    "wiener_seed": ("noise", "wiener_seed", int, str),
    "wiener_file": ("noise", "wiener_file", str, str),
    "epsilons": ("mc", "epsilons", _floats, _fmt_floats),
    "n_paths": ("mc", "n_paths", int, str),
    "master_seed": ("mc", "master_seed", int, str),
    "workers": ("mc", "workers", int, str),
    "probe_times": ("mc", "probe_times", _floats, _fmt_floats),
    "lambda_offset": ("mc", "lambda_offset", float, _fmt_float),
    "conditional_check": ("mc", "conditional_check", _bool, lambda v: "true" if v else "false"),
    "action_x": ("action", "x", _floats, _fmt_floats),
    "action_y": ("action", "y", _floats, _fmt_floats),
    "action_times": ("action", "times", _floats, _fmt_floats),
    "knots": ("action", "knots", int, str),
    "output_dir": ("output", "directory", str, str),
    "tag": ("output", "tag", str, str),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to re-run an experiment bit for bit."""

    model: str = "cubic"
    a: float = 1.0
    b: float = 1.0
    c: float = 0.0
    A: float = 0.0
    omega: float = 0.0
    B: float = 0.0
    theta: float = 0.0
    x0: tuple = (0.0,)
    dimension: int = 1
    drift: tuple = ()  # custom: per component, tuple of (coef, exponents)
    forcing: tuple = ()  # custom: per component, tuple of (amplitude, kind, frequency)
    t0: float = 0.0
    t1: float = 5.0
    steps: int = 1000
    D: float = 0.0
    wiener: str = ""
    wiener_seed: int = 0
    wiener_file: str = ""
    epsilons: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    n_paths: int = 1000
    master_seed: int = 0
    workers: int = 1
    probe_times: tuple = ()
    lambda_offset: float = 0.0
    conditional_check: bool = False
    action_x: tuple = ()
    action_y: tuple = ()
    action_times: tuple = (5.0, 10.0, 20.0, 40.0)
    knots: int = 200
    output_dir: str = "out"
    tag: str = ""

    def validate(self, check_files=True):
        """Raise :class:`ConfigError` on an inconsistent configuration; return self."""
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        d = self.state_dimension
        if len(self.x0) != d:
            raise ConfigError(f"x0 has {len(self.x0)} entries, model dimension is {d}")
        if self.model == "custom":
            if len(self.drift) != d:
                raise ConfigError(f"custom model needs drift_1..drift_{d}")
            if self.forcing and len(self.forcing) != d:
                raise ConfigError(f"forcing needs one entry per component ({d}), empty for unforced ones")
        elif not (self.a > 0 and self.b > 0):
            raise ConfigError("a and b must be positive")
        if not (self.t1 > self.t0) or self.steps < 1:
            raise ConfigError("grid needs t1 > t0 and steps >= 1")
        if self.D < 0:
            raise ConfigError("D must be non-negative")
        if self.wiener not in WIENER_SOURCES:
            raise ConfigError(f"wiener must be 'generate' or 'load', got {self.wiener!r}")
        if self.D > 0 and not self.wiener:
            raise ConfigError("D > 0 needs a wiener source (generate or load)")
        if self.wiener == "load":
            if not self.wiener_file:
                raise ConfigError("wiener = load needs wiener_file")
            if check_files and not os.path.exists(self.wiener_file):
                raise ConfigError(f"wiener_file not found: {self.wiener_file}")
        if any(e < 0 for e in self.epsilons):
            raise ConfigError("epsilons must be non-negative")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError("epsilons must be strictly decreasing")
        if self.n_paths < 2:
            raise ConfigError("n_paths must be at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.knots < 8:
            raise ConfigError("knots must be at least 8")
        if any(t < self.t0 or t > self.t1 for t in self.probe_times):
            raise ConfigError("probe_times must lie inside the grid")
        return self

    @property
    def state_dimension(self):
        return self.dimension if self.model == "custom" else 1

    def grid(self):
        return TimeGrid(self.t0, self.t1, self.steps)

    def cubic_params(self):
        return CubicParams(self.a, self.b, self.A, self.omega, self.B, self.theta, self.x0[0])

    def dwell_params(self):
        return DoubleWellParams(self.a, self.b, self.c, self.A, self.omega, self.B, self.theta, self.x0[0])

    def field(self):
        if self.model == "cubic":
            return self.cubic_params().field()
        if self.model == "double_well":
            return self.dwell_params().field()
        d = self.dimension
        comps = []
        for i, terms in enumerate(self.drift):
            comp = {}
            for coef, exps in terms:
                comp[tuple(exps)] = comp.get(tuple(exps), 0.0) + coef
            if self.forcing:
                zero = (0,) * d
                harm = tuple(Harmonic(a, f, k) for a, k, f in self.forcing[i])
                comp[zero] = TimeCoefficient(comp.get(zero, 0.0), harm)
            comps.append(comp)
        return PolyVectorField(d, comps)

    def diffusion(self):
        """Constant diagonal ``sqrt(D) I`` used for the recorded noise."""
        return PolyDiffusionMatrix.constant_diagonal(self.D, self.state_dimension)


def emit_config(cfg):
    """Render a config as INI text; every field is written."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section in ("model", "grid", "noise", "mc", "action", "output"):
        parser.add_section(section)
    for f in fields(cfg):
        if f.name in ("drift", "forcing"):
            continue
        section, key, _, emit = _SCHEMA[f.name]
        parser.set(section, key, emit(getattr(cfg, f.name)))
    for i, terms in enumerate(cfg.drift):
        parser.set("model", f"drift_{i + 1}", emit_polynomial(terms) or "0.0")
    for i, terms in enumerate(cfg.forcing):
        if terms:
            parser.set("model", f"forcing_{i + 1}", emit_forcing(terms))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def parse_config(text, check_files=True):
    """Parse INI text; unknown sections or keys are errors. ``;`` starts an inline comment."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    by_key = {(s, k): (attr, p) for attr, (s, k, p, _) in _SCHEMA.items()}
    known_sections = {s for s, *_ in _SCHEMA.values()}
    values, drift, forcing = {}, {}, {}
    for section in parser.sections():
        if section not in known_sections:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            m = re.fullmatch(r"(drift|forcing)_(\d+)", key)
            if section == "model" and m:
                (drift if m.group(1) == "drift" else forcing)[int(m.group(2))] = raw
                continue
            if (section, key) not in by_key:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            attr, parse = by_key[(section, key)]
            try:
                values[attr] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key} in [{section}]: {raw!r}") from exc
    if drift or forcing:
        d = values.get("dimension", 1)
        if drift and sorted(drift) != list(range(1, len(drift) + 1)):
            raise ConfigError("drift_i keys must be numbered 1..n")
        if any(not 1 <= i <= d for i in forcing):
            raise ConfigError(f"forcing_i keys must lie in 1..{d}")
        values["drift"] = tuple(tuple((c, tuple(e)) for c, e in parse_polynomial(drift[i], d))
                                for i in sorted(drift))
        # components without a forcing_i line are unforced
        values["forcing"] = tuple(tuple(parse_forcing(forcing[i])) if i in forcing else ()
                                  for i in range(1, d + 1)) if forcing else ()
    return ExperimentConfig(**values).validate(check_files)


def load_config(path, check_files=True):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, check_files)


def config_from_preset(tag, **overrides):
    """Config reproducing a catalog entry on the default [0, 5] x 1000 grid."""
    p = get_preset(tag)
    params = dict(p.params)
    x0 = (params.pop("x0"),)
    base = dict(model=p.model, x0=x0, D=p.D, tag=p.tag, **params)
    if p.wiener_seed is not None:
        base.update(wiener="generate", wiener_seed=p.wiener_seed)
    cfg = ExperimentConfig(**base)
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()
