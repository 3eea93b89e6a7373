import json

import pytest

from ttmag import config
from ttmag.dynamics import Kind
from ttmag.errors import ConfigError


def test_defaults_describe_reference_machine():
    cfg = config.machine_config(config.load())
    assert cfg.spec_k.omega == 2.5 and cfg.spec_k.temperature == 5.0
    assert cfg.spec_u.omega == 0.5 and cfg.spec_u.temperature == 1.0
    assert cfg.inter.kind is Kind.MIX
    assert (cfg.tau_U, cfg.tau_T) == (10.0, None)


def test_text_file_with_comments_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(
        "# reference machine, swap coupling\n"
        "machine.kind = swap   # instantaneous\n"
        "machine.omega_k = 3\n\n"
        "machine.tau_T = auto\n"
        "mc.seed = 0x10\n"
        "estimate.analytic = yes\n"
    )
    conf = config.load(p, ["machine.omega_k=2.0"])
    assert conf["machine"]["kind"] == "swap"
    assert conf["machine"]["omega_k"] == 2.0
    assert conf["machine"]["tau_T"] is None
    assert conf["mc"]["seed"] == 16
    assert conf["estimate"]["analytic"] is True


def test_json_file_nested_and_dotted(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps({"machine": {"omega_un": 0.7}, "mc.trials": 500}))
    conf = config.load(p)
    assert conf["machine"]["omega_un"] == 0.7
    assert conf["mc"]["trials"] == 500


@pytest.mark.parametrize(
    "text",
    ["machine.omega = 1\n", "omega_k = 1\n", "machine.omega_k 1\n", "machine.omega_k = abc\n",
     "machine.kind = toaster\n", "mc.trials = 1.5\n", "machine.omega_k = inf\n", "estimate.analytic = maybe\n"],
)
def test_bad_text_is_config_error(tmp_path, text):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ConfigError):
        config.load(p)


def test_missing_file_and_bad_json(tmp_path):
    with pytest.raises(ConfigError):
        config.load(tmp_path / "missing.cfg")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        config.load(p)


def test_bad_override():
    with pytest.raises(ConfigError):
        config.load(None, ["machine.omega_k"])


def test_physics_violations_become_config_errors():
    with pytest.raises(ConfigError):
        config.machine_config(config.load(None, ["machine.omega_k=-1"]))
    with pytest.raises(ConfigError):
        config.machine_config(config.load(None, ["machine.t_c=6"]))


def test_monte_carlo_needs_seed():
    with pytest.raises(ConfigError):
        config.monte_carlo_config(config.load())
    mc = config.monte_carlo_config(config.load(None, ["mc.seed=3", "mc.trials=200"]))
    assert (mc.seed, mc.trials) == (3, 200)


def test_round_trip_through_mapping():
    conf = config.load(None, ["machine.kind=swap", "mc.seed=5"])
    assert config.from_mapping(json.loads(json.dumps(conf))) == conf
