"""Run configuration: ``key = value`` files with optional ``[section]`` headers.

Every key belongs to exactly one group (model, train, data, run), so a
section header is only a visual aid; a key under the wrong header is still
accepted.  Unknown keys are errors.  Example::

    [model]
    hidden_width = 80
    alpha = 0.5

    [train]
    epochs = 50
    lr = 0.001

    [data]
    train_data = data/train      # directory of CSV files or one CSV
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig
from .training import TrainSettings


@dataclass
class DataSettings:
    train_data: str = ""
    val_data: str = ""
    test_data: str = ""
    skeleton_config: str = ""
    actions_manifest: str = ""
    fps: float = 25.0
    center: bool = False
    train_stride: int = 1
    test_stride: int = 1
    synth_train_windows: int = 200
    synth_val_windows: int = 0
    synth_test_windows: int = 100
    synth_seed: int = 0


@dataclass
class RunSettings:
    out_dir: str = "runs/default"
    threads: int = 1
    log_level: str = "info"


GROUPS = {"model": ModelConfig, "train": TrainSettings, "data": DataSettings, "run": RunSettings}


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainSettings = field(default_factory=TrainSettings)
    data: DataSettings = field(default_factory=DataSettings)
    run: RunSettings = field(default_factory=RunSettings)

    def as_dict(self) -> dict:
        return {g: dataclasses.asdict(getattr(self, g)) for g in GROUPS}

    def dump(self) -> str:
        """Fully resolved configuration in the file format."""
        lines = []
        for group, values in self.as_dict().items():
            lines.append(f"[{group}]")
            lines += [f"{k} = {_format(v)}" for k, v in values.items()]
            lines.append("")
        return "\n".join(lines)


def key_index() -> dict[str, tuple[str, dataclasses.Field]]:
    index = {}
    for group, cls in GROUPS.items():
        for f in dataclasses.fields(cls):
            if f.name in index:
                raise AssertionError(f"duplicate config key {f.name}")
            index[f.name] = (group, f)
    return index


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _field_type(f: dataclasses.Field, default) -> type:
    t = f.type if isinstance(f.type, type) else {"int": int, "float": float, "bool": bool,
                                                   "str": str}.get(str(f.type))
    return t or type(default)


def coerce(key: str, text: str):
    index = key_index()
    if key not in index:
        raise ConfigError(f"unknown config key {key!r}")
    group, f = index[key]
    default = getattr(GROUPS[group](), key)
    t = _field_type(f, default)
    text = text.strip()
    try:
        if t is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if t is int:
            return int(text)
        if t is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {t.__name__}") from None


def parse_pairs(text: str, source: str = "<config>") -> dict[str, str]:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in GROUPS:
                raise ConfigError(f"{source}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    return pairs


def build(pairs: dict, base: RunConfig | None = None) -> RunConfig:
    """Apply string ``pairs`` over ``base`` (or defaults), validating every key."""
    values = (base or RunConfig()).as_dict()
    index = key_index()
    for key, text in pairs.items():
        if key not in index:
            raise ConfigError(f"unknown config key {key!r}")
        group, _ = index[key]
        values[group][key] = coerce(key, text) if isinstance(text, str) else text
    try:
        return RunConfig(**{g: GROUPS[g](**values[g]) for g in GROUPS})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    pairs = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        pairs.update(parse_pairs(p.read_text(), str(p)))
    pairs.update(overrides or {})
    return build(pairs)
