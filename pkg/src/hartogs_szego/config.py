"""Run configuration: flat ``key = value`` files merged with command-line flags."""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .precision import PrecCtx
from .weights import WeightParams

__all__ = ["OutputFormat", "RunConfig", "parse_config_text", "load_config_file", "parse_int_list",
           "parse_exponent_list"]


class OutputFormat(str, enum.Enum):
    JSON = "json"
    CSV = "csv"
    MARKDOWN = "markdown"


def parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from exc


def parse_exponent_list(text: str) -> tuple[Fraction, ...]:
    try:
        return tuple(Fraction(x.strip()) for x in str(text).split(",") if x.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"expected exponents like 4,4/3,2.5, got {text!r}") from exc


def _number(text, name):
    try:
        value = Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{name}: not a number: {text!r}") from exc
    return int(value) if value.denominator == 1 else value


# key -> (parser, formatter); the keys match the long flag names
def _fmt_list(xs):
    return ",".join(str(x) for x in xs)


_KEYS = {
    "A": (lambda v: _number(v, "A"), str),
    "B": (lambda v: _number(v, "B"), str),
    "alpha": (lambda v: _number(v, "alpha"), str),
    "j": (int, str),
    "p": (parse_exponent_list, _fmt_list),
    "n": (parse_int_list, _fmt_list),
    "precision_bits": (int, str),
    "tol": (float, repr),
    "cache_dir": (str, str),
    "format": (lambda v: OutputFormat(v).value, str),
    "out": (str, str),
    "weight": (str, str),
    "order": (int, str),
    "grid_size": (int, str),
}


@dataclass(frozen=True)
class RunConfig:
    A: object = 0
    B: object = 1
    alpha: object = 1
    j: int = 0
    p: tuple = (Fraction(4, 3), Fraction(2), Fraction(4))
    n: tuple = (16, 64, 256, 1024, 4096)
    precision_bits: int = 256
    tol: float = 1e-30
    cache_dir: str | None = None
    format: str = "json"
    out: str | None = None
    weight: str = "flat"
    order: int = 8
    grid_size: int = 10_000

    def __post_init__(self):
        if self.weight not in ("flat", "poly2", "poly0"):
            raise ConfigError(f"unknown weight {self.weight!r} (use flat, poly2 or poly0)")
        try:
            OutputFormat(self.format)
        except ValueError as exc:
            raise ConfigError(f"unknown format {self.format!r}") from exc
        self.params  # validates A, B, alpha
        self.ctx

    @property
    def params(self) -> WeightParams:
        return WeightParams(self.A, self.B, self.alpha)

    @property
    def ctx(self) -> PrecCtx:
        return PrecCtx(self.precision_bits, self.tol)

    @property
    def output_format(self) -> OutputFormat:
        return OutputFormat(self.format)

    def to_text(self) -> str:
        """Flat ``key = value`` serialization (unset optional keys are omitted)."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            lines.append(f"{f.name} = {_KEYS[f.name][1](value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, mapping: dict, base: "RunConfig | None" = None) -> "RunConfig":
        """Parse string values; keys may use dashes or underscores."""
        updates = {}
        for raw_key, raw in mapping.items():
            key = raw_key.strip().replace("-", "_")
            if key not in _KEYS:
                raise ConfigError(f"unknown config key {raw_key!r}")
            try:
                updates[key] = _KEYS[key][0](raw)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"{raw_key}: {exc}") from exc
        return replace(base or cls(), **updates)


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def load_config_file(path) -> dict:
    try:
        return parse_config_text(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
