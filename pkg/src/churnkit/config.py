"""Run configuration: a flat ``section.key = value`` text file.

Example::

    data.path = churn.csv
    split.seed = 7
    gbt.learning_rate = 0.15
    gbt.max_depth = 4
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .data import DEFAULT_DROP, SplitSpec
from .errors import ConfigError, DataError
from .gbt import GbtParams
from .linear import LogisticConfig
from .tree import ForestConfig, TreeConfig

MODEL_NAMES = ("logistic", "tree", "forest", "gbt")
DISPLAY_NAMES = {
    "logistic": "Logistic Regression",
    "tree": "Decision Tree",
    "forest": "Random Forest",
    "gbt": "XG Boost Classifier",
}


@dataclass(frozen=True)
class RunConfig:
    data_path: str = "churn.csv"
    drop_list: tuple = DEFAULT_DROP
    key_column: str = "Phone"
    allow_missing: bool = False
    split: SplitSpec = SplitSpec()
    logistic: LogisticConfig = LogisticConfig()
    tree: TreeConfig = TreeConfig()
    forest: ForestConfig = ForestConfig()
    gbt: GbtParams = GbtParams()
    background_size: int = 256
    background_seed: int = 0
    out_dir: str = "churnkit-out"
    # runtime knobs: excluded from the config hash, never change results
    threads: int = 1
    verbosity: int = 1

    @property
    def seed(self):
        return self.split.seed

    def hashed(self):
        doc = {
            "data_path": Path(self.data_path).name,
            "drop_list": list(self.drop_list),
            "key_column": self.key_column,
            "allow_missing": self.allow_missing,
            "split": asdict(self.split),
            "logistic": asdict(self.logistic),
            "tree": asdict(self.tree),
            "forest": asdict(self.forest),
            "gbt": self.gbt.numeric(),
            "background_size": self.background_size,
            "background_seed": self.background_seed,
        }
        return doc

    def config_hash(self):
        blob = json.dumps(self.hashed(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def meta(self):
        return {"config_hash": self.config_hash(), "seed": self.seed}


def _coerce(text, like):
    text = text.strip()
    if isinstance(like, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    if like is None:
        if text.lower() in ("", "none"):
            return None
        return int(text)
    return text


def parse_config_text(text):
    """``{key: value}`` from ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_SECTIONS = {
    "split": "split",
    "logistic": "logistic",
    "tree": "tree",
    "forest": "forest",
    "gbt": "gbt",
}

_TOP = {
    "data.path": "data_path",
    "data.drop_list": "drop_list",
    "data.key_column": "key_column",
    "data.allow_missing": "allow_missing",
    "explain.background_size": "background_size",
    "explain.background_seed": "background_seed",
    "output.dir": "out_dir",
    "run.threads": "threads",
    "run.verbosity": "verbosity",
}


def build_config(entries: dict, seed=None, base: RunConfig = RunConfig()) -> RunConfig:
    """Apply ``section.key`` entries (strings) to ``base``.

    ``seed`` is a master seed: it fills split, forest, gbt and background
    seeds unless the entries set them explicitly.
    """
    top = {}
    sections = {name: {} for name in _SECTIONS}
    for key, value in entries.items():
        if key in _TOP:
            attr = _TOP[key]
            if attr == "drop_list":
                top[attr] = tuple(s.strip() for s in value.split(",") if s.strip())
            else:
                top[attr] = _coerce(value, getattr(base, attr))
            continue
        section, _, name = key.partition(".")
        if section not in sections or not name:
            raise ConfigError(f"unknown config key {key!r}")
        obj = getattr(base, _SECTIONS[section])
        known = {f.name for f in fields(obj)}
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            sections[section][name] = _coerce(value, getattr(obj, name))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    if seed is not None:
        for section in ("split", "forest", "gbt"):
            sections[section].setdefault("seed", seed)
        top.setdefault("background_seed", seed)
    try:
        updates = {
            attr: replace(getattr(base, attr), **vals) for attr, vals in sections.items() if vals
        }
    except DataError as exc:
        raise ConfigError(str(exc)) from exc
    return replace(base, **top, **updates)


def load_config(path=None, seed=None, **overrides) -> RunConfig:
    entries = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        entries = parse_config_text(p.read_text())
    cfg = build_config(entries, seed=seed)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides) if overrides else cfg


__all__ = ["RunConfig", "MODEL_NAMES", "DISPLAY_NAMES", "load_config", "build_config", "parse_config_text"]
