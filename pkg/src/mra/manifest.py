"""Experiment manifests: flat-section TOML documents, validated up front.

Example::

    kind = "decay"

    [basis]
    N = 8

    [model]
    mode = "stochastic"
    rate = 0.5

    [a]
    preset = "saturating"
    m = 1.0
    M = 2.0

    [f]
    preset = "linear"
    slope = 0.1

    [sigma]
    preset = "affine"
    c = 0.2

    [time]
    T = 2.0
    dt = 0.01

    [ensemble]
    paths = 500
    seed = 7

    [family]
    shape = "point"
    state = [1.0, 0.5]
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .ensemble import FamilySpec, RadiusProfile
from .model import DETERMINISTIC_KEYS, STOCHASTIC_KEYS, ModelParams
from .presets import ForcingSpec, Noise, NonlocalCoefficient, Reaction
from .spectral import Basis, ConfigurationError, build_basis

KINDS = ("check", "simulate", "ensemble", "absorb", "decay", "entry-time", "steady", "oracle-compare")


@dataclass(frozen=True)
class FieldError:
    key: str
    message: str

    def __str__(self):
        return f"{self.key}: {self.message}"


class ManifestError(ConfigurationError):
    def __init__(self, errors: list[FieldError]):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


# validators return an error message or None
def _positive(v):
    return None if v > 0 else "must be > 0"


def _nonneg(v):
    return None if v >= 0 else "must be >= 0"


def _at_least(n):
    return lambda v: None if v >= n else f"must be >= {n}"


def _one_of(*opts):
    return lambda v: None if v in opts else f"must be one of {', '.join(map(repr, opts))}"


def _u64(v):
    return None if 0 <= v < 2**64 else "must be an unsigned 64-bit integer"


@dataclass(frozen=True)
class Field:
    type: str  # "float" | "int" | "str" | "bool" | "floats"
    default: Any = None
    required: bool = False
    check: Callable | None = None


F, I, S, B, A = "float", "int", "str", "bool", "floats"

SCHEMA: dict[str, dict[str, Field]] = {
    "": {"kind": Field(S, check=_one_of(*KINDS))},
    "basis": {
        "L": Field(F, math.pi, check=_positive),
        "N": Field(I, 8, check=_at_least(1)),
        "Q": Field(I, None),
    },
    "model": {
        "mode": Field(S, required=True, check=_one_of("deterministic", "deterministic-random", "stochastic")),
        "rate": Field(F, 1.0, check=_positive),
    },
    "a": {
        "preset": Field(S, "constant", check=_one_of("constant", "saturating", "decaying")),
        "c": Field(F, 1.0, check=_positive),
        "m": Field(F, None, check=_positive),
        "M": Field(F, None, check=_positive),
        "k": Field(F, 1.0, check=_positive),
    },
    "f": {
        "preset": Field(S, "zero", check=_one_of("zero", "linear", "cubic", "tanh")),
        "slope": Field(F, 0.0),
        "eta": Field(F, 0.0),
        "kappa": Field(F, 1.0, check=_positive),
        "gain": Field(F, 0.0),
    },
    "constants": {k: Field(F, None) for k in DETERMINISTIC_KEYS + STOCHASTIC_KEYS},
    "sigma": {
        "preset": Field(S, "zero", check=_one_of("zero", "affine", "sine")),
        "c": Field(F, 0.0),
        "s0": Field(F, 0.0),
    },
    "forcing": {
        "kind": Field(S, "zero", check=_one_of("zero", "constant", "exponential", "polynomial")),
        "modes": Field(A, None),
        "nu": Field(F, 0.0),
        "coeffs": Field(A, None),
    },
    "time": {
        "tau": Field(F, 0.0),
        "T": Field(F, 1.0),
        "dt": Field(F, 1e-2, check=_positive),
        "record_every": Field(I, 1, check=_at_least(1)),
    },
    "ensemble": {
        "paths": Field(I, 1000, check=_at_least(2)),
        "seed": Field(I, 0, check=_u64),
    },
    "family": {
        "shape": Field(S, "point", check=_one_of("point", "gaussian_modes", "ball_uniform")),
        "state": Field(A, None),
        "std": Field(A, None),
        "profile": Field(S, "constant", check=_one_of("constant", "affine_abs", "exponential")),
        "c0": Field(F, 1.0, check=_nonneg),
        "c1": Field(F, 0.0),
    },
    "experiment": {
        "epsilon": Field(F, None),
        "t": Field(F, 0.0),
        "s_cap": Field(F, None, check=_positive),
        "residuals": Field(B, False),
        "radius_times": Field(A, None),
    },
    "output": {
        "dir": Field(S, "mra-out"),
        "plot": Field(B, True),
    },
}


def _coerce(key: str, spec: Field, value, errors: list[FieldError]):
    t = spec.type
    bad = lambda what: errors.append(FieldError(key, f"expected {what}, got {value!r}"))  # noqa: E731
    if t == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return bad("a number")
        value = float(value)
        if not math.isfinite(value):
            return bad("a finite number")
    elif t == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            return bad("an integer")
    elif t == "str":
        if not isinstance(value, str):
            return bad("a string")
    elif t == "bool":
        if not isinstance(value, bool):
            return bad("a boolean")
    elif t == "floats":
        if not isinstance(value, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
            return bad("an array of numbers")
        value = [float(x) for x in value]
    if spec.check is not None:
        msg = spec.check(value)
        if msg:
            errors.append(FieldError(key, f"{msg} (got {value!r})"))
            return None
    return value


@dataclass(frozen=True)
class Manifest:
    """A validated manifest; ``sections`` holds only explicitly given values."""

    kind: str
    sections: dict = field(default_factory=dict)

    def get(self, section: str, key: str):
        sec = self.sections.get(section, {})
        if key in sec:
            return sec[key]
        return SCHEMA[section][key].default

    def has(self, section: str) -> bool:
        return section in self.sections

    # -- builders -------------------------------------------------------
    def basis(self) -> Basis:
        N = self.get("basis", "N")
        Q = self.get("basis", "Q")
        return build_basis(self.get("basis", "L"), N, 4 * N if Q is None else Q)

    def params(self) -> ModelParams:
        g = self.get
        kind = g("a", "preset")
        if kind == "constant":
            a = NonlocalCoefficient.constant(g("a", "c"))
        else:
            a = NonlocalCoefficient(kind, g("a", "m"), g("a", "M"), g("a", "k"))
        fk = g("f", "preset")
        f = {
            "zero": lambda: Reaction.zero(),
            "linear": lambda: Reaction.linear(g("f", "slope")),
            "cubic": lambda: Reaction.cubic(g("f", "eta"), g("f", "kappa")),
            "tanh": lambda: Reaction.tanh(g("f", "gain")),
        }[fk]()
        sk = g("sigma", "preset")
        sigma = {
            "zero": lambda: Noise.zero(),
            "affine": lambda: Noise.affine(g("sigma", "c"), g("sigma", "s0")),
            "sine": lambda: Noise.sine(g("sigma", "c")),
        }[sk]()
        hk = g("forcing", "kind")
        modes = g("forcing", "modes") or []
        forcing = {
            "zero": lambda: ForcingSpec.zero(),
            "constant": lambda: ForcingSpec.constant(modes),
            "exponential": lambda: ForcingSpec.exponential(g("forcing", "nu"), modes),
            "polynomial": lambda: ForcingSpec.polynomial(g("forcing", "coeffs"), modes),
        }[hk]()
        claimed = dict(self.sections.get("constants", {}))
        return ModelParams(g("model", "mode"), a, f, sigma, forcing, g("model", "rate"), claimed)

    def family(self) -> FamilySpec:
        g = self.get
        shape = g("family", "shape")
        if shape == "point":
            return FamilySpec.point(g("family", "state"))
        if shape == "gaussian_modes":
            return FamilySpec.gaussian(g("family", "std"))
        return FamilySpec.ball(RadiusProfile(g("family", "profile"), g("family", "c0"), g("family", "c1")))

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        for sec, vals in self.sections.items():
            out[sec] = dict(vals)
        return out


def _cross_checks(kind: str, sections: dict, errors: list[FieldError]):
    def val(sec, key):
        return sections.get(sec, {}).get(key, SCHEMA[sec][key].default)

    N = val("basis", "N")
    Q = val("basis", "Q")
    if isinstance(N, int) and Q is not None and isinstance(Q, int) and Q < 2 * N:
        errors.append(FieldError("basis.Q", f"must be >= 2N = {2 * N} (got {Q})"))
    mode = val("model", "mode")
    if "model" not in sections or "mode" not in sections["model"]:
        errors.append(FieldError("model.mode", "missing required key"))
    a = val("a", "preset")
    if a in ("saturating", "decaying"):
        for k in ("m", "M"):
            if val("a", k) is None:
                errors.append(FieldError(f"a.{k}", f"missing required key for preset {a!r}"))
        m, M = val("a", "m"), val("a", "M")
        if m is not None and M is not None and m > M:
            errors.append(FieldError("a.M", f"must be >= a.m (got m={m}, M={M})"))
    if mode in ("deterministic", "deterministic-random"):
        if val("sigma", "preset") != "zero":
            errors.append(FieldError("sigma.preset", "must be 'zero' in deterministic mode"))
        bad = [k for k in sections.get("constants", {}) if k not in DETERMINISTIC_KEYS]
    else:
        bad = [k for k in sections.get("constants", {}) if k not in STOCHASTIC_KEYS]
    for k in bad:
        errors.append(FieldError(f"constants.{k}", f"does not apply in {mode} mode"))
    if val("forcing", "kind") != "zero" and not val("forcing", "modes"):
        errors.append(FieldError("forcing.modes", "missing required key for non-zero forcing"))
    if val("forcing", "kind") == "polynomial" and not val("forcing", "coeffs"):
        errors.append(FieldError("forcing.coeffs", "missing required key for polynomial forcing"))
    if kind != "check":
        tau, T = val("time", "tau"), val("time", "T")
        if isinstance(tau, float) and isinstance(T, float) and not T > tau and kind not in ("steady", "entry-time"):
            errors.append(FieldError("time.T", f"must be > time.tau (got tau={tau}, T={T})"))
    needs_family = kind in ("ensemble", "absorb", "decay", "entry-time", "simulate", "oracle-compare")
    if needs_family:
        shape = val("family", "shape")
        if shape == "point" and not val("family", "state"):
            errors.append(FieldError("family.state", "missing required key for a point family"))
        if shape == "gaussian_modes" and not val("family", "std"):
            errors.append(FieldError("family.std", "missing required key for a gaussian family"))
        for key in ("state", "std"):
            arr = val("family", key)
            if arr and isinstance(N, int) and len(arr) > N:
                errors.append(FieldError(f"family.{key}", f"has {len(arr)} entries, more than N = {N}"))
    modes = val("forcing", "modes")
    if modes and isinstance(N, int) and len(modes) > N:
        errors.append(FieldError("forcing.modes", f"has {len(modes)} entries, more than N = {N}"))
    eps = val("experiment", "epsilon")
    if eps is not None and not 0 < eps < 1:
        errors.append(FieldError("experiment.epsilon", f"must lie in (0, 1) (got {eps})"))


def parse_manifest(text: str, kind: str | None = None) -> Manifest:
    """Parse and fully validate a manifest; raises ``ManifestError`` listing every bad field."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ManifestError([FieldError("<document>", f"not valid TOML: {exc}")]) from None
    errors: list[FieldError] = []
    sections: dict[str, dict] = {}
    top_kind = None
    for key, value in raw.items():
        if isinstance(value, dict):
            if key not in SCHEMA or key == "":
                errors.append(FieldError(key, "unknown section"))
                continue
            out = {}
            for k, v in value.items():
                full = f"{key}.{k}"
                if k not in SCHEMA[key]:
                    errors.append(FieldError(full, "unknown key"))
                    continue
                if isinstance(v, dict):
                    errors.append(FieldError(full, "nested tables are not allowed"))
                    continue
                c = _coerce(full, SCHEMA[key][k], v, errors)
                if c is not None:
                    out[k] = c
            sections[key] = out
        elif key == "kind":
            top_kind = _coerce("kind", SCHEMA[""]["kind"], value, errors)
        else:
            errors.append(FieldError(key, "unknown key"))
    if kind is not None:
        if kind not in KINDS:
            errors.append(FieldError("kind", f"unknown experiment {kind!r}"))
        elif top_kind is not None and top_kind != kind:
            errors.append(FieldError("kind", f"manifest is a {top_kind!r} experiment, command was {kind!r}"))
        top_kind = kind
    if top_kind is None:
        errors.append(FieldError("kind", "missing required key"))
    _cross_checks(top_kind or "check", sections, errors)
    if errors:
        raise ManifestError(errors)
    return Manifest(top_kind, sections)


def serialize_manifest(manifest: Manifest) -> str:
    return tomli_w.dumps(manifest.to_dict())


def load_manifest(path, kind: str | None = None) -> Manifest:
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh.read(), kind)
