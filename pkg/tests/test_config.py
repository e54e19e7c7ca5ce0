import pytest

from vflat.config import Config, RunConfig, load_config

ENV_VARS = (
    "VFLAT_RETENTION",
    "VFLAT_OPTIMA_CAP",
    "VFLAT_ENUMERATION_CAP",
    "VFLAT_PAIR_BUDGET",
    "VFLAT_SEED",
    "VFLAT_OUTPUT_DIR",
    "VFLAT_LOG_LEVEL",
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ENV_VARS:
        monkeypatch.delenv(name, raising=False)


def test_defaults():
    config = load_config()
    assert config == Config(
        retention="all",
        optima_cap=10_000,
        enumeration_cap=10_000_000,
        pair_budget=1_000_000,
        seed=0,
        output_dir="out",
        log_level="INFO",
    )


def test_env_overrides(monkeypatch):
    monkeypatch.setenv("VFLAT_RETENTION", "FINAL")
    monkeypatch.setenv("VFLAT_SEED", "42")
    monkeypatch.setenv("VFLAT_LOG_LEVEL", "debug")
    config = load_config()
    assert config.retention == "final"
    assert config.seed == 42
    assert config.log_level == "DEBUG"


def test_malformed_integer_names_the_variable(monkeypatch):
    monkeypatch.setenv("VFLAT_OPTIMA_CAP", "many")
    with pytest.raises(ValueError, match="VFLAT_OPTIMA_CAP"):
        load_config()


def test_nonpositive_cap_rejected(monkeypatch):
    monkeypatch.setenv("VFLAT_PAIR_BUDGET", "0")
    with pytest.raises(ValueError, match="VFLAT_PAIR_BUDGET"):
        load_config()


def test_unknown_retention_rejected(monkeypatch):
    monkeypatch.setenv("VFLAT_RETENTION", "some")
    with pytest.raises(ValueError, match="VFLAT_RETENTION"):
        load_config()


def test_run_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="Unknown config keys: colour"):
        RunConfig.from_mapping({"command": "build", "instance_path": "x.json", "colour": "red"})


def test_run_config_rejects_nonpositive_caps():
    with pytest.raises(ValueError, match="optima_cap"):
        RunConfig.from_mapping({"command": "build", "instance_path": "x.json", "optima_cap": 0})


def test_seed_flag_wins_over_environment(monkeypatch):
    monkeypatch.setenv("VFLAT_SEED", "7")
    defaults = load_config()
    base = {"command": "verify", "instance_path": "x.json"}
    assert RunConfig.from_mapping({**base, "seed": None}, defaults=defaults).seed == 7
    assert RunConfig.from_mapping({**base, "seed": 3}, defaults=defaults).seed == 3
    assert RunConfig.from_mapping(base).seed == 0


def test_sequences_become_tuples():
    run = RunConfig.from_mapping({
        "command": "export",
        "instance_path": "x.json",
        "b_override": [3, 3],
        "export_formats": ["values"],
    })
    assert run.b_override == (3, 3)
    assert run.export_formats == ("values",)


def test_unknown_export_format_rejected():
    with pytest.raises(ValueError, match="Unknown export formats"):
        RunConfig(command="export", instance_path="x.json", export_formats=("png",))
