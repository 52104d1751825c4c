"""Pipeline configuration: one TOML file, dotted-path overrides, validation.

The resolved config is a plain tree of dataclasses mirroring each module's
own config type, so stages never re-interpret raw TOML.  Validation happens
once here; a bad path or bound is a config error before any stage runs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .dedup import DedupConfig, DedupError, LshConfig
from .embed import EmbedConfig, EmbedError
from .georef import GeorefConfig, GeorefError
from .wirefilter import FilterConfig, FilterError


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PathsConfig:
    """Input artifact locations plus the output directory.

    Optional inputs ("" = absent): ap_table falls back to the bundled one,
    bylines/gold_* enable their features only when set.
    """

    articles: str = ""
    gazetteer: str = ""
    kb: str = ""
    qrank: str = ""
    dictionary: str = ""
    weather_scores: str = ""
    nonwire_scores: str = ""
    ap_table: str = ""
    bylines: str = ""
    gold_clusters: str = ""
    gold_verdicts: str = ""
    labeled_pairs: str = ""
    annotated_links: str = ""
    out_dir: str = "out"

    _REQUIRED = ("articles", "gazetteer", "kb", "qrank", "dictionary")

    def validate(self) -> None:
        for name in self._REQUIRED:
            value = getattr(self, name)
            if not value:
                raise ConfigError(f"paths.{name} is required")
            if not Path(value).exists():
                raise ConfigError(f"paths.{name}: no such file {value!r}")
        for name in ("weather_scores", "nonwire_scores", "ap_table", "bylines",
                     "gold_clusters", "gold_verdicts", "labeled_pairs",
                     "annotated_links"):
            value = getattr(self, name)
            if value and not Path(value).exists():
                raise ConfigError(f"paths.{name}: no such file {value!r}")


@dataclass(frozen=True)
class LinkConfig:
    """Entity-linking stage parameters."""

    coref_theta: float = 0.15
    tau_nomatch: float = 0.05
    k: int = 10
    band_width: float = 0.01
    mention_window: int = 256
    birth_cutoff: int = 1970

    def validate(self) -> None:
        if not 0.0 <= self.coref_theta <= 2.0:
            raise ConfigError(f"link.coref_theta outside [0, 2]: {self.coref_theta}")
        if not -1.0 <= self.tau_nomatch <= 1.0:
            raise ConfigError(f"link.tau_nomatch outside [-1, 1]: {self.tau_nomatch}")
        if self.k < 1:
            raise ConfigError(f"link.k must be positive, got {self.k}")
        if self.band_width < 0.0:
            raise ConfigError(f"link.band_width must be non-negative: {self.band_width}")
        if self.mention_window < 3:
            raise ConfigError(f"link.mention_window too small: {self.mention_window}")


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    dedup: DedupConfig = field(default_factory=DedupConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    georef: GeorefConfig = field(default_factory=GeorefConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    method: str = "all"
    provider: str = "baseline"
    workers: int = 0  # 0 = available parallelism

    def validate(self) -> None:
        self.paths.validate()
        self.link.validate()
        if self.method not in ("all", "lsh"):
            raise ConfigError(f"method must be 'all' or 'lsh', got {self.method!r}")
        if not (self.provider == "baseline" or self.provider.startswith("file:")):
            raise ConfigError(f"provider must be 'baseline' or 'file:<path>': {self.provider!r}")
        if self.workers < 0:
            raise ConfigError(f"workers must be non-negative, got {self.workers}")

    def to_json_dict(self) -> dict:
        return asdict(self)

    def content_hash(self) -> str:
        blob = json.dumps(self.to_json_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


_SECTION_TYPES = {
    "paths": PathsConfig,
    "embed": EmbedConfig,
    "dedup": DedupConfig,
    "filter": FilterConfig,
    "georef": GeorefConfig,
    "link": LinkConfig,
}


def _build_section(cls, data: Mapping[str, Any], section: str):
    known = {f.name: f for f in fields(cls) if f.init}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {section}.{key}")
        if key == "lsh" and isinstance(value, Mapping):
            value = _build_section(LshConfig, value, f"{section}.lsh")
        if key == "char_ngram_range" and isinstance(value, Sequence):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (DedupError, EmbedError, FilterError, GeorefError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad [{section}] section: {exc}") from exc


def config_from_dict(data: Mapping[str, Any]) -> PipelineConfig:
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, Mapping):
                raise ConfigError(f"[{key}] must be a table")
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        elif key in ("method", "provider", "workers"):
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        config = PipelineConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _parse_override_value(raw: str) -> Any:
    """Interpret an override as a TOML literal, falling back to a string."""
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    """Apply ``--set dotted.key=value`` pairs onto the raw config tree."""
    out = json.loads(json.dumps(data))  # deep copy of plain data
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        keys = dotted.strip().split(".")
        if not all(keys):
            raise ConfigError(f"override {item!r} has an empty path segment")
        node = out
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} descends through a scalar")
        node[keys[-1]] = _parse_override_value(raw.strip())
    return out


def load_config(path: str | Path, overrides: Sequence[str] = ()) -> PipelineConfig:
    """Read TOML, apply overrides, build and validate the config tree.

    Relative paths in [paths] are resolved against the config file's parent
    directory so a corpus directory is relocatable.
    """
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}") from exc
    data = apply_overrides(data, overrides)

    base = path.parent
    paths_section = data.get("paths", {})
    if isinstance(paths_section, Mapping):
        resolved = {}
        for key, value in paths_section.items():
            if isinstance(value, str) and value and key != "out_dir":
                resolved[key] = str((base / value).resolve()) if not Path(value).is_absolute() else value
            elif key == "out_dir" and isinstance(value, str) and value and not Path(value).is_absolute():
                resolved[key] = str((base / value).resolve())
            else:
                resolved[key] = value
        data = dict(data)
        data["paths"] = resolved

    config = config_from_dict(data)
    config.validate()
    return config


def write_config(config_data: Mapping[str, Any], path: str | Path) -> Path:
    """Serialize a raw config tree as TOML (flat scalar/table subset)."""
    lines: list[str] = []

    def _literal(value: Any) -> str:
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, (int, float)):
            return repr(value)
        if isinstance(value, str):
            return json.dumps(value)
        if isinstance(value, (list, tuple)):
            return "[" + ", ".join(_literal(v) for v in value) + "]"
        raise ConfigError(f"cannot serialize {type(value).__name__} to TOML")

    def _emit(table: Mapping[str, Any], prefix: str) -> None:
        scalars = {k: v for k, v in table.items() if not isinstance(v, Mapping)}
        tables = {k: v for k, v in table.items() if isinstance(v, Mapping)}
        if prefix and scalars:
            lines.append(f"[{prefix}]")
        for key, value in scalars.items():
            lines.append(f"{key} = {_literal(value)}")
        if scalars:
            lines.append("")
        for key, value in tables.items():
            _emit(value, f"{prefix}.{key}" if prefix else key)

    _emit(config_data, "")
    path = Path(path)
    path.write_text("\n".join(lines).rstrip() + "\n", encoding="utf-8")
    return path
