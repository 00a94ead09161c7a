"""Run configuration: flat ``key = value`` files with command-line overrides."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import DegenerateStripError, ValidationError

__all__ = ["RunConfig", "parse_config_text", "load_config_file", "build_config", "parse_float_list"]


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a pipeline run.

    ``delta_list`` holds fractions of mu_E (each in (0, 1/2)); ``eps_list`` holds
    the weight regularizations.  ``fit_window`` of ``None`` means [0.4 L, 0.85 L].
    """

    dimension: int = 1
    half_length: float = 20.0
    points: int = 1024
    order: int = 2
    mu: float = 1.0
    sigma: float = 1.0
    potentials_file: str | None = None
    potentials_off: bool = False
    strip_margin: float = 0.05
    imag_cap: float = 3.5
    newton_tol: float = 1e-10
    eig_tol: float = 1e-8
    chain_tol: float = 1e-6
    rate_tol: float = 0.02
    delta_list: tuple = (0.05, 0.1, 0.2)
    eps_list: tuple = (1.0, 0.3, 0.1, 0.03, 0.0)
    fit_window: tuple | None = None
    full_space_check: bool = False
    dense_cap: int = 4096
    out: str = "out"
    seed: int = 0
    canonical: bool = False

    def validate(self) -> "RunConfig":
        def bad(msg):
            raise ValidationError(msg)

        if self.dimension not in (1, 2):
            bad(f"dimension must be 1 or 2, got {self.dimension}")
        if self.dimension == 2 and not (self.potentials_off or self.potentials_file):
            bad("the soliton solver is one-dimensional; use potentials_off for d = 2")
        if not (math.isfinite(self.half_length) and self.half_length > 0):
            bad(f"domain half-length must be positive, got {self.half_length}")
        if self.points < 8:
            bad(f"points must be >= 8, got {self.points}")
        if self.order not in (2, 4):
            bad(f"order must be 2 or 4, got {self.order}")
        if not (math.isfinite(self.mu) and self.mu > 0):
            bad(f"mu must be positive, got {self.mu}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            bad(f"sigma must be positive, got {self.sigma}")
        if self.potentials_file is not None and not Path(self.potentials_file).is_file():
            bad(f"potentials file not found: {self.potentials_file}")
        if not (math.isfinite(self.strip_margin) and self.strip_margin > 0):
            bad(f"strip margin must be positive, got {self.strip_margin}")
        if self.strip_margin >= self.mu:
            raise DegenerateStripError(
                f"degenerate strip: margin {self.strip_margin} >= mu {self.mu} leaves no gap to search"
            )
        if not (math.isfinite(self.imag_cap) and self.imag_cap >= 0):
            bad(f"imaginary cap must be non-negative, got {self.imag_cap}")
        for name in ("newton_tol", "eig_tol", "chain_tol"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                bad(f"{name} must be positive, got {v}")
        if not (math.isfinite(self.rate_tol) and self.rate_tol >= 0):
            bad(f"rate_tol must be non-negative, got {self.rate_tol}")
        if not self.delta_list:
            bad("delta list is empty")
        for d in self.delta_list:
            if not 0 < d < 0.5:
                bad(f"delta fractions must lie in (0, 1/2), got {d}")
        if not self.eps_list:
            bad("eps list is empty")
        for e in self.eps_list:
            if not (math.isfinite(e) and e >= 0):
                bad(f"eps values must be non-negative, got {e}")
        if self.fit_window is not None:
            if len(self.fit_window) != 2:
                bad("fit window needs two radii")
            r1, r2 = self.fit_window
            if not 0 < r1 < r2:
                bad(f"fit window must satisfy 0 < r1 < r2, got {self.fit_window}")
            if r2 > 0.9 * self.half_length:
                bad(f"fit window end {r2} reaches the boundary zone beyond 0.9 L = {0.9 * self.half_length}")
        if self.dense_cap < 8:
            bad("dense cap must be >= 8")
        if self.seed < 0:
            bad("seed must be non-negative")
        return self

    def echo(self) -> dict:
        return dataclasses.asdict(self)


def parse_float_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"bad number list {text!r}") from exc


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}

_ALIASES = {"domain_half_length": "half_length", "l": "half_length", "n": "points", "d": "dimension"}


def _field_types():
    return {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, raw):
    kind = _field_types()[name]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if name in ("delta_list", "eps_list"):
            return parse_float_list(text)
        if name == "fit_window":
            return None if text.lower() in ("", "none", "default") else parse_float_list(text)
        if kind == "bool":
            if text.lower() not in _BOOL:
                raise ValidationError(f"{name}: expected a boolean, got {raw!r}")
            return _BOOL[text.lower()]
        if kind == "int":
            value = float(text)
            if value != int(value):
                raise ValidationError(f"{name}: expected an integer, got {raw!r}")
            return int(value)
        if kind == "float":
            return float(text)
        if name == "potentials_file":
            return None if text.lower() in ("", "none") else text
        return text
    except ValueError as exc:
        raise ValidationError(f"{name}: cannot parse {raw!r}") from exc


def _key(name: str) -> str:
    k = name.strip().lower().replace("-", "_")
    return _ALIASES.get(k, k)


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys accept dashes or underscores."""
    known = _field_types()
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        key = _key(key)
        if key not in known:
            raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {path}")
    return parse_config_text(p.read_text())


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge file values and overrides (overrides win) into a validated config."""
    merged = {}
    for src in (file_values or {}, overrides or {}):
        for k, v in src.items():
            if v is None:
                continue
            key = _key(k)
            if key not in _field_types():
                raise ValidationError(f"unknown config key {k!r}")
            merged[key] = _coerce(key, v)
    return RunConfig(**merged).validate()
