"""INI-style application config.

Example::

    [paths]
    template_dir = ./templates
    runlog_path = runs.jsonl
    alias_file = aliases.csv

    [oracle]
    major_threshold_pct = 10

    [rules]
    max_sentences = 4
    require_grounded_regions = false

    [backend:gpt4o]
    kind = cloud
    endpoint = https://api.openai.com
    model = gpt-4o
    credential_env = OPENAI_API_KEY

    [backend:llama]
    kind = local
    endpoint = http://localhost:11434
    model = llama3.1:8b

The credential itself is never read from the file, only the name of the
environment variable holding it. A ``mock`` backend is always present.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .faults import FAULT_CLASSES, FaultProfile
from .gateway import BackendConfig
from .oracle import OracleConfig
from .validator import RuleConfig


class ConfigError(ValueError):
    pass


@dataclass
class AppConfig:
    template_dir: Path | None = None
    backends: dict[str, BackendConfig] = field(default_factory=dict)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    rules: RuleConfig = field(default_factory=RuleConfig)
    runlog_path: Path = Path("runlog.jsonl")
    alias_file: Path | None = None

    def __post_init__(self):
        self.backends.setdefault("mock", BackendConfig())


def _coerce(cls, section: configparser.SectionProxy, skip: tuple[str, ...] = ()) -> dict:
    kwargs = {}
    types = {f.name: f.type for f in fields(cls)}
    for key in section:
        if key in skip:
            continue
        if key not in types:
            raise ConfigError(f"[{section.name}] unknown key {key!r}")
        kind = str(types[key])
        try:
            if "bool" in kind:
                kwargs[key] = section.getboolean(key)
            elif kind.startswith("int"):
                kwargs[key] = section.getint(key)
            elif kind.startswith("float"):
                kwargs[key] = section.getfloat(key)
            else:
                kwargs[key] = section[key]
        except ValueError as exc:
            raise ConfigError(f"[{section.name}] {key}: {exc}") from None
    return kwargs


def load_config(path: str | Path | None = None) -> AppConfig:
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file {path} not found")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read(path, encoding="utf-8")
    base = path.parent
    cfg = AppConfig()

    if parser.has_section("paths"):
        paths = parser["paths"]
        if "template_dir" in paths:
            cfg.template_dir = base / paths["template_dir"]
            if not cfg.template_dir.is_dir():
                raise ConfigError(f"template_dir {cfg.template_dir} does not exist")
        if "runlog_path" in paths:
            cfg.runlog_path = base / paths["runlog_path"]
        if "alias_file" in paths:
            cfg.alias_file = base / paths["alias_file"]
            if not cfg.alias_file.is_file():
                raise ConfigError(f"alias_file {cfg.alias_file} does not exist")
    try:
        if parser.has_section("oracle"):
            cfg.oracle = OracleConfig(**_coerce(OracleConfig, parser["oracle"]))
        if parser.has_section("rules"):
            cfg.rules = RuleConfig(**_coerce(RuleConfig, parser["rules"]))
        for name in parser.sections():
            if not name.startswith("backend:"):
                continue
            section = parser[name]
            if "api_key" in section or "credential" in section:
                raise ConfigError(f"[{name}] credentials must come from the environment (set credential_env)")
            faults = {k: section.getfloat(k) for k in FAULT_CLASSES if k in section}
            kwargs = _coerce(BackendConfig, section, skip=(*FAULT_CLASSES, "fault_seed"))
            if faults:
                kwargs["fault_profile"] = FaultProfile(**faults, seed=section.getint("fault_seed", 0))
            cfg.backends[name.split(":", 1)[1]] = BackendConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    cfg.backends.setdefault("mock", BackendConfig())
    return cfg
