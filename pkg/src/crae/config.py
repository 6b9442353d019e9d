"""``key = value`` run configuration files."""

from __future__ import annotations

import dataclasses
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CorpusError
from .metrics import EvalConfig
from .trainer import TrainConfig

INPUT_PATHS = ("corpus", "ratings", "vocab")
OUTPUT_PATHS = ("checkpoint", "log", "report", "train_split", "test_split")


@dataclass
class RunConfig:
    train: TrainConfig
    eval: EvalConfig
    split_seed: int = 0
    min_count: int = 1
    content_fraction: float = 1.0
    repeats: int = 1
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    paths: dict[str, Path] = field(default_factory=dict)

    @property
    def P(self) -> int:
        return self.eval.P

    def path(self, key: str) -> Path:
        if key not in self.paths:
            raise CorpusError(f"config is missing required path '{key}'")
        return self.paths[key]


def _convert(raw: str, typ, key: str):
    try:
        if typ is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typing.get_origin(typ) is list:
            return [int(x) for x in raw.replace(",", " ").split()]
        return raw
    except ValueError:
        raise CorpusError(f"config key '{key}': cannot parse {raw!r}") from None


def _field_types(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


_RUN_SCALARS = {"split_seed": int, "min_count": int, "content_fraction": float, "repeats": int, "workers": int}


def parse_config(text: str, base: Path | None = None) -> RunConfig:
    """Parse config text; relative paths resolve against ``base``."""
    train_types = _field_types(TrainConfig)
    eval_types = _field_types(EvalConfig)
    train_kw, eval_kw, run_kw, paths = {}, {}, {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise CorpusError(f"config line {lineno}: expected key = value")
        if key in train_types:
            train_kw[key] = _convert(value, train_types[key], key)
        elif key in eval_types:
            eval_kw[key] = _convert(value, eval_types[key], key)
        elif key in _RUN_SCALARS:
            run_kw[key] = _convert(value, _RUN_SCALARS[key], key)
        elif key in INPUT_PATHS or key in OUTPUT_PATHS:
            p = Path(value)
            paths[key] = p if p.is_absolute() or base is None else base / p
        else:
            raise CorpusError(f"config line {lineno}: unknown key '{key}'")
    try:
        cfg = RunConfig(TrainConfig(**train_kw), EvalConfig(**eval_kw), paths=paths, **run_kw)
    except (TypeError, ValueError) as exc:
        raise CorpusError(f"invalid configuration: {exc}") from None
    if not 0 < cfg.content_fraction <= 1:
        raise CorpusError("content_fraction must lie in (0, 1]")
    if cfg.repeats < 1 or cfg.workers < 1:
        raise CorpusError("repeats and workers must be >= 1")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"config file not found: {path}")
    cfg = parse_config(path.read_text(encoding="utf-8"), path.parent)
    validate_paths(cfg)
    return cfg


def validate_paths(cfg: RunConfig) -> None:
    for key in INPUT_PATHS:
        if key in cfg.paths and not cfg.paths[key].is_file():
            raise CorpusError(f"{key} file not found: {cfg.paths[key]}")
    for key in OUTPUT_PATHS:
        if key in cfg.paths and not cfg.paths[key].parent.is_dir():
            raise CorpusError(f"output directory for {key} does not exist: {cfg.paths[key].parent}")


def format_config(values: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items())
