"""Pipeline configuration stored as a sectioned key-value (INI) file."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields

DEFAULT_ZERO_COLUMNS = (
    "oss_rho", "oss_kappa", "log_social_outdegree", "log_buggy_commits", "daf",
    "top_committer_or_owner", "log_commits", "committer_only", "log_total_posts",
    "github_age_days", "github_age_days_sq",
)
DEFAULT_COUNT_COLUMNS = (
    "oss_rho", "oss_kappa", "iss_kappa", "log_social_outdegree", "log_buggy_commits", "daf",
    "top_committer_or_owner", "log_commits", "log_responsiveness", "committer_only",
    "log_total_posts", "log_observed_mentions", "github_age_days",
)
# controls stay in the model whatever their VIF
DEFAULT_PROTECTED = ("committer_only", "log_total_posts", "log_observed_mentions",
                     "github_age_days", "github_age_days_sq")

# field name -> (section, kind)
_LAYOUT = {
    "store_dir": ("pipeline", "str"),
    "out_dir": ("pipeline", "str"),
    "projects": ("pipeline", "list"),
    "response_months": ("features", "int"),
    "min_participation_months": ("features", "int"),
    "min_observation_months": ("features", "int"),
    "participation": ("features", "str"),
    "daf_depth": ("features", "int"),
    "track_renames": ("szz", "bool"),
    "ignore_whitespace": ("szz", "bool"),
    "zero_columns": ("model", "list"),
    "count_columns": ("model", "list"),
    "protected_columns": ("model", "list"),
    "vif_threshold": ("model", "float"),
    "min_rows": ("xeval", "int"),
}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    store_dir: str = "store"
    out_dir: str = "out"
    projects: tuple[str, ...] = ()  # empty: every project in the store
    response_months: int = 6
    min_participation_months: int = 3
    min_observation_months: int = 3
    participation: str = "any"
    daf_depth: int = 1
    track_renames: bool = True
    ignore_whitespace: bool = True
    zero_columns: tuple[str, ...] = DEFAULT_ZERO_COLUMNS
    count_columns: tuple[str, ...] = DEFAULT_COUNT_COLUMNS
    protected_columns: tuple[str, ...] = DEFAULT_PROTECTED
    vif_threshold: float = 4.0
    min_rows: int = 30

    def __post_init__(self):
        for name in ("projects", "zero_columns", "count_columns", "protected_columns"):
            setattr(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        if self.response_months not in (3, 6, 12):
            raise ConfigError("response_months must be 3, 6 or 12")
        if self.participation not in ("any", "commits"):
            raise ConfigError("participation must be 'any' or 'commits'")
        if self.daf_depth < 1:
            raise ConfigError("daf_depth must be >= 1")
        if self.min_rows < 1 or self.min_participation_months < 0 or self.min_observation_months < 0:
            raise ConfigError("thresholds must be nonnegative (min_rows >= 1)")

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for f in fields(self):
            if f.name not in _LAYOUT:
                continue
            section, kind = _LAYOUT[f.name]
            if not parser.has_section(section):
                parser.add_section(section)
            value = getattr(self, f.name)
            if kind == "list":
                text = ", ".join(value)
            elif kind == "bool":
                text = "true" if value else "false"
            elif kind == "float":
                text = repr(float(value))
            else:
                text = str(value)
            parser.set(section, f.name, text)
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "PipelineConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from exc
        known = {(s, k) for k, (s, _) in _LAYOUT.items()}
        for section in parser.sections():
            for key in parser[section]:
                if (section, key) not in known:
                    raise ConfigError(f"unknown config key [{section}] {key}")
        kwargs = {}
        for name, (section, kind) in _LAYOUT.items():
            if not parser.has_option(section, name):
                continue
            try:
                if kind == "list":
                    raw = parser.get(section, name)
                    kwargs[name] = tuple(x.strip() for x in raw.split(",") if x.strip())
                elif kind == "bool":
                    kwargs[name] = parser.getboolean(section, name)
                elif kind == "int":
                    kwargs[name] = parser.getint(section, name)
                elif kind == "float":
                    kwargs[name] = parser.getfloat(section, name)
                else:
                    kwargs[name] = parser.get(section, name)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {name}: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_ini(fh.read())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_ini())

    def replace(self, **changes) -> "PipelineConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self) if f.name in _LAYOUT}
        values.update({k: v for k, v in changes.items() if v is not None})
        return PipelineConfig(**values)
