"""Run configuration: a small `[section]` / `key = value` format with provenance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError

COMMANDS = ("profile", "simulate", "converge", "sweep")


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(x) for x in text.replace(",", " ").split())


def _pos(x):
    return x > 0


# key: (section, parser, default, validator, description)
SCHEMA = {
    "command": ("run", str, None, lambda v: v in COMMANDS, f"one of {', '.join(COMMANDS)}"),
    "n": ("exponents", int, 3, lambda v: v >= 3, "integer >= 3"),
    "m": ("exponents", float, 0.2, _pos, "positive real"),
    "gamma": ("exponents", float, 2.75, _pos, "positive real"),
    "A": ("profile", float, 1.0, _pos, "positive real"),
    "eta": ("profile", float, 1.0, _pos, "positive real"),
    "points_per_decade": ("profile", int, 256, lambda v: 16 <= v <= 4096, "integer in [16, 4096]"),
    "plateau_tol": ("profile", float, 1e-3, lambda v: 0 < v < 1, "real in (0, 1)"),
    "r_max_cap": ("profile", float, 1e60, lambda v: v > 1, "real > 1"),
    "profile_rtol": ("profile", float, 1e-12, lambda v: 0 < v < 1e-3, "real in (0, 1e-3)"),
    "R": ("pde", float, 100.0, lambda v: v > 1, "real > 1"),
    "pde_ppd": ("pde", int, 256, lambda v: 8 <= v <= 4096, "integer in [8, 4096]"),
    "pde_rtol": ("pde", float, 1e-7, lambda v: 0 < v < 1e-2, "real in (0, 1e-2)"),
    "snapshots": ("pde", int, 11, lambda v: 2 <= v <= 10_000, "integer in [2, 10000]"),
    "tau_end": ("pde", float, 1.0, _pos, "positive real"),
    "oracle": ("oracle", str, "barenblatt", lambda v: v in ("barenblatt", "static"),
               "barenblatt or static"),
    "k": ("oracle", float, 1.0, lambda v: v >= 0, "nonnegative real"),
    "T": ("oracle", float, 2.0, _pos, "positive real"),
    "t0": ("oracle", float, 0.5, lambda v: v >= 0, "nonnegative real"),
    "t1": ("oracle", float, 1.5, _pos, "positive real"),
    "refine": ("oracle", _ints, (128, 256, 512),
               lambda v: len(v) >= 2 and all(8 <= x <= 4096 for x in v) and list(v) == sorted(set(v)),
               "increasing list of at least two integers"),
    "bump": ("converge", float, 0.2, lambda v: -1 < v < 1, "real in (-1, 1)"),
    "bump_lo": ("converge", float, 1.0, _pos, "positive real"),
    "bump_hi": ("converge", float, 2.0, _pos, "positive real"),
    "bump_shape": ("converge", str, "sine2", lambda v: v in ("sine2", "random"), "sine2 or random"),
    "seed": ("converge", int, 0, lambda v: v >= 0, "nonnegative integer"),
    "ratio_max": ("converge", float, 0.1, lambda v: 0 < v < 1, "real in (0, 1)"),
    "gammas": ("sweep", _floats, (2.6, 2.75, 2.9), lambda v: len(v) >= 1, "list of reals"),
    "out": ("output", str, "fde_out", lambda v: bool(v), "directory path"),
}


@dataclass
class RunConfig:
    """Resolved configuration; ``provenance[key]`` is "default", "cli" or
    "<file>:<line>"."""

    values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def command(self) -> str:
        return self.values["command"]

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def manifest_lines(self) -> list[str]:
        out = []
        for k in sorted(self.values):
            if k == "out":  # location only; excluded so reruns elsewhere stay byte-identical
                continue
            v = self.values[k]
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"config.{k} = {v}  # {self.provenance.get(k, 'default')}")
        return out


def _parse_value(key, raw, where):
    if key not in SCHEMA:
        raise ConfigError(f"{where}: unknown key {key!r}")
    _, parser, _, check, desc = SCHEMA[key]
    try:
        val = parser(raw.strip())
    except (ValueError, TypeError):
        raise ConfigError(f"{where}: cannot parse {key} = {raw.strip()!r} (expected {desc})") from None
    if isinstance(val, float) and not math.isfinite(val):
        raise ConfigError(f"{where}: {key} must be finite")
    if not check(val):
        raise ConfigError(f"{where}: {key} = {raw.strip()!r} out of range (expected {desc})")
    return val


def parse_config(text: str, source: str = "<config>", overrides: dict | None = None,
                 require_command: bool = True) -> RunConfig:
    """Parse config text, apply ``overrides`` (key -> raw string) and defaults.

    Raises
    ------
    ConfigError
        With the line number on syntax errors, unknown keys, section
        mismatches, out-of-range values and duplicate keys (naming both lines).
    """
    cfg = RunConfig()
    seen = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        where = f"{source}:{lineno}"
        if stripped.startswith("["):
            if not stripped.endswith("]") or len(stripped) < 3:
                raise ConfigError(f"{where}: malformed section header {stripped!r}")
            section = stripped[1:-1].strip()
            if section not in {s for s, *_ in SCHEMA.values()}:
                raise ConfigError(f"{where}: unknown section [{section}]")
            continue
        key, eq, raw = stripped.partition("=")
        key = key.strip()
        if not eq or not key:
            raise ConfigError(f"{where}: expected 'key = value', got {stripped!r}")
        if key in SCHEMA and section is not None and SCHEMA[key][0] != section:
            raise ConfigError(f"{where}: key {key!r} belongs in [{SCHEMA[key][0]}], not [{section}]")
        if key in seen:
            raise ConfigError(f"{where}: duplicate key {key!r} (first set at line {seen[key]})")
        seen[key] = lineno
        cfg.values[key] = _parse_value(key, raw, where)
        cfg.provenance[key] = where
    for key, raw in (overrides or {}).items():
        cfg.values[key] = _parse_value(key, str(raw), "command line")
        cfg.provenance[key] = "cli"
    for key, (_, _, default, _, _) in SCHEMA.items():
        if key not in cfg.values and default is not None:
            cfg.values[key] = default
            cfg.provenance[key] = "default"
    if require_command and "command" not in cfg.values:
        raise ConfigError(f"{source}: no command given (set 'command' under [run])")
    _cross_check(cfg)
    return cfg


def _cross_check(cfg: RunConfig):
    v = cfg.values
    if v["bump_lo"] >= v["bump_hi"]:
        raise ConfigError("bump_lo must be smaller than bump_hi")
    if v["t0"] >= v["t1"]:
        raise ConfigError("t0 must be smaller than t1")
    if v.get("oracle") == "barenblatt" and v["t1"] > 0.9 * v["T"] * (1 + 1e-12):
        raise ConfigError("barenblatt runs must stop by 0.9 * T")
    decades = math.log10(v["R"])
    if any(abs(decades * p - round(decades * p)) > 1e-9 for p in (v["pde_ppd"],) + tuple(v["refine"])):
        raise ConfigError("log10(R) times every points-per-decade value must be an integer")
