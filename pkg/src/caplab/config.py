"""Run configuration, hashing, and atomic artifact I/O.

Configs are flat key-value INI files with one section per subcommand;
command-line flags override file values. The sha256 hash of the canonical
serialization is embedded in every output so a run can be tied back to the
exact configuration that produced it.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field, asdict

from .errors import OutputError, ValidationError

ARTIFACT_VERSION = "1"
OUTPUT_DIR_ENV = "CAPLAB_OUTPUT_DIR"

_KNOWN_KEYS = {
    "d", "n", "n_grid", "replicas", "seed", "backend", "workers",
    "oracle_radius", "oracle_tol", "output_dir", "gates_file",
    "trials", "time_sample", "levels", "order", "escape_radius",
    "set_file", "table_file", "x",
}

_BACKENDS = {"auto", "exact", "variational", "escape", "representation"}


@dataclass
class RunConfig:
    command: str
    d: int | None = None
    n: int | None = None
    n_grid: list = field(default_factory=list)
    replicas: int = 0
    seed: int = 0
    backend: str = "auto"
    workers: int = 1
    oracle_radius: int | None = None
    oracle_tol: float | None = None
    output_dir: str = "."
    gates_file: str | None = None
    extras: dict = field(default_factory=dict)

    def serialize(self) -> str:
        body = asdict(self)
        # execution details that cannot change any computed number are
        # excluded, so the hash names the run, not the machine
        body.pop("workers", None)
        body.pop("output_dir", None)
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()[:16]


def _parse_grid(raw) -> list:
    if isinstance(raw, (list, tuple)):
        return [int(v) for v in raw]
    return [int(tok) for tok in str(raw).replace(",", " ").split()]


def parse_and_validate(command: str, file_values: dict | None = None,
                       overrides: dict | None = None,
                       needs_dimension: bool = True) -> RunConfig:
    """Merge file values and CLI overrides into a validated RunConfig.

    All violations are collected and reported together, not just the first.
    """
    merged: dict = {}
    for src in (file_values or {}), (overrides or {}):
        merged.update({k: v for k, v in src.items() if v is not None})

    violations = []
    unknown = set(merged) - _KNOWN_KEYS
    if unknown:
        violations.append(f"unknown keys: {', '.join(sorted(unknown))}")

    cfg = RunConfig(command=command)
    cfg.output_dir = str(merged.get(
        "output_dir", os.environ.get(OUTPUT_DIR_ENV, ".")))

    def take_int(key, default=None, minimum=None):
        raw = merged.get(key, default)
        if raw is None:
            return None
        try:
            val = int(raw)
        except (TypeError, ValueError):
            violations.append(f"{key}: not an integer ({raw!r})")
            return None
        if minimum is not None and val < minimum:
            violations.append(f"{key}: must be >= {minimum}, got {val}")
        return val

    cfg.d = take_int("d")
    if needs_dimension:
        if cfg.d is None:
            violations.append("d: dimension is required")
        elif cfg.d < 3:
            violations.append(f"d: capacity work needs d >= 3, got {cfg.d}")
    cfg.n = take_int("n", minimum=0)
    if "n_grid" in merged:
        try:
            cfg.n_grid = _parse_grid(merged["n_grid"])
        except ValueError:
            violations.append(f"n_grid: not a list of integers "
                              f"({merged['n_grid']!r})")
        if any(v <= 0 for v in cfg.n_grid):
            violations.append("n_grid: entries must be positive")
    cfg.replicas = take_int("replicas", 0, minimum=0) or 0
    cfg.seed = take_int("seed", 0) or 0
    cfg.workers = take_int("workers", 1, minimum=1) or 1
    cfg.oracle_radius = take_int("oracle_radius", minimum=2)
    if "oracle_tol" in merged:
        try:
            cfg.oracle_tol = float(merged["oracle_tol"])
        except (TypeError, ValueError):
            violations.append(f"oracle_tol: not a number "
                              f"({merged['oracle_tol']!r})")
    cfg.backend = str(merged.get("backend", "auto"))
    if cfg.backend not in _BACKENDS:
        violations.append(f"backend: unknown backend {cfg.backend!r} "
                          f"(choices: {', '.join(sorted(_BACKENDS))})")
    if merged.get("gates_file") is not None:
        cfg.gates_file = str(merged["gates_file"])

    levels = take_int("levels", minimum=1)
    if levels is not None:
        ref = cfg.n if cfg.n is not None else (max(cfg.n_grid) if cfg.n_grid else None)
        if ref is not None and 2 ** levels > ref:
            violations.append(f"levels: 2^{levels} pieces exceed n={ref}")

    for key in ("trials", "time_sample", "order", "escape_radius",
                "set_file", "table_file", "x", "levels"):
        if key in merged:
            cfg.extras[key] = merged[key]

    if violations:
        raise ValidationError(violations)
    return cfg


def read_config_file(path: str) -> dict:
    """Section-per-subcommand INI file -> {section: {key: raw string}}."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ValidationError(f"config file not found: {path}")
    return {sec: dict(parser.items(sec)) for sec in parser.sections()}


def atomic_write(path: str, data: str | bytes) -> None:
    """Write via temp file + rename so no output is ever half-written."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    mode = "wb" if isinstance(data, bytes) else "w"
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, mode) as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def partial_marker_path(outdir: str, stem: str) -> str:
    return os.path.join(outdir, f"{stem}.partial")


def mark_partial(outdir: str, stem: str, note: str = "") -> None:
    atomic_write(partial_marker_path(outdir, stem), note or "interrupted\n")


def clear_partial(outdir: str, stem: str) -> None:
    path = partial_marker_path(outdir, stem)
    if os.path.exists(path):
        os.unlink(path)
