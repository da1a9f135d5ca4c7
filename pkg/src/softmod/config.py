"""key=value run configuration shared by the CLI subcommands.

Resolution order for every setting: command line flag, then config
file, then the built-in default. Unknown keys in a config file are
rejected rather than ignored so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import os
from pathlib import Path

from .simulator import SimConfig


def parse_grid(text: str) -> tuple[int, int]:
    """Grid extents like '6x6'."""
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"grid must look like '6x6', got {text!r}")
    w, h = (int(p) for p in parts)
    if w < 1 or h < 1:
        raise ValueError("grid extents must be >= 1")
    return (w, h)


def parse_span(text: str) -> tuple[int, int]:
    """Inclusive integer range like '3-8'."""
    parts = text.split("-")
    if len(parts) != 2:
        raise ValueError(f"range must look like '3-8', got {text!r}")
    lo, hi = (int(p) for p in parts)
    if lo < 1 or hi < lo:
        raise ValueError(f"bad range {text!r}")
    return (lo, hi)


_SIM_FIELDS = {f.name: f.type for f in dataclasses.fields(SimConfig)}

# Every key a config file may set, with its parser.
CASTS = {
    "dt": float,
    "n_steps": int,
    "gravity": float,
    "contact_stiffness": float,
    "contact_damping": float,
    "friction": float,
    "friction_vel_eps": float,
    "contraction_max": float,
    "clearance": float,
    "checkpoint_every": int,
    "seed": int,
    "budget": int,
    "n_records": int,
    "n_pairs": int,
    "workers": int,
    "count": int,
    "k": int,
    "stride": int,
    "distance": float,
    "long_horizon_scale": int,
    "grid": parse_grid,
    "blocks": parse_span,
}


def parse_config_file(path) -> dict[str, str]:
    """Read `key = value` lines; '#' starts a comment, blanks skipped."""
    values: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CASTS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


class Settings:
    """Merged view over CLI flags and a parsed config file."""

    def __init__(self, file_values: dict[str, str], cli_values: dict):
        self._file = file_values
        self._cli = cli_values

    @classmethod
    def load(cls, config_path, cli_values: dict) -> "Settings":
        file_values = parse_config_file(config_path) if config_path else {}
        return cls(file_values, cli_values)

    def get(self, name: str, default):
        cli = self._cli.get(name)
        if cli is not None:
            return cli
        if name in self._file:
            return CASTS[name](self._file[name])
        return default

    def sim_config(self) -> SimConfig:
        kwargs = {}
        for name in _SIM_FIELDS:
            value = self.get(name, None)
            if value is not None:
                kwargs[name] = value
        return SimConfig(**kwargs)

    def workers(self) -> int:
        env = os.environ.get("SOFTMOD_WORKERS")
        env_default = int(env) if env else 1
        n = self.get("workers", env_default)
        if n < 1:
            raise ValueError("workers must be >= 1")
        return n
