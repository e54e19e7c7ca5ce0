import os
from dataclasses import dataclass, fields
from typing import Mapping, Optional

RETENTION_MODES = ("all", "sliding", "final")
EXPORT_FORMATS = ("values", "components", "heatmap")


@dataclass(frozen=True)
class Config:
    # Value stack
    retention: str

    # Caps
    optima_cap: int
    enumeration_cap: int
    pair_budget: int

    # Verification sampling
    seed: int

    # Paths
    output_dir: str

    # Logging
    log_level: str


def load_config() -> Config:
    """Load config from env vars. Raises ValueError for malformed values."""
    retention = os.getenv("VFLAT_RETENTION", "all").lower()
    if retention not in RETENTION_MODES:
        raise ValueError(
            f"VFLAT_RETENTION must be one of {', '.join(RETENTION_MODES)}, got {retention!r}"
        )
    return Config(
        retention=retention,
        optima_cap=_positive_int("VFLAT_OPTIMA_CAP", "10000"),
        enumeration_cap=_positive_int("VFLAT_ENUMERATION_CAP", "10000000"),
        pair_budget=_positive_int("VFLAT_PAIR_BUDGET", "1000000"),
        seed=_int("VFLAT_SEED", "0"),
        output_dir=os.getenv("VFLAT_OUTPUT_DIR", "out"),
        log_level=os.getenv("VFLAT_LOG_LEVEL", "INFO").upper(),
    )


def _int(var_name: str, default: str) -> int:
    raw = os.getenv(var_name, default)
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"Environment variable {var_name} must be an integer, got {raw!r}")


def _positive_int(var_name: str, default: str) -> int:
    val = _int(var_name, default)
    if val <= 0:
        raise ValueError(f"Environment variable {var_name} must be positive, got {val}")
    return val


@dataclass(frozen=True)
class RunConfig:
    command: str
    instance_path: str
    b_override: Optional[tuple] = None
    retention: str = "all"
    optima_cap: int = 10_000
    enumeration_cap: int = 10_000_000
    pair_budget: int = 1_000_000
    seed: int = 0
    output_dir: str = "out"
    export_formats: tuple = EXPORT_FORMATS

    def __post_init__(self):
        if self.retention not in RETENTION_MODES:
            raise ValueError(f"Unknown retention mode: {self.retention}")
        for name in ("optima_cap", "enumeration_cap", "pair_budget"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        unknown = set(self.export_formats) - set(EXPORT_FORMATS)
        if unknown:
            raise ValueError(f"Unknown export formats: {', '.join(sorted(unknown))}")

    @classmethod
    def from_mapping(cls, mapping: Mapping, defaults: Optional[Config] = None) -> "RunConfig":
        """Build a RunConfig from a flat mapping, rejecting unknown keys.

        Keys set to None fall back to `defaults` (the env-derived Config) when
        one is given, otherwise to the dataclass defaults.
        """
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"Unknown config keys: {', '.join(sorted(unknown))}")

        values = {k: v for k, v in mapping.items() if v is not None}
        if defaults is not None:
            for name in ("retention", "optima_cap", "enumeration_cap",
                         "pair_budget", "seed", "output_dir"):
                values.setdefault(name, getattr(defaults, name))
        if "b_override" in values:
            values["b_override"] = tuple(values["b_override"])
        if "export_formats" in values:
            values["export_formats"] = tuple(values["export_formats"])
        return cls(**values)
