import pytest

from check import ConfigError
from configmanager import DEFAULTS, build_parser, parse_config, read_config_text


def test_defaults_cover_every_key():
    config = parse_config(env={})
    assert config.to_dict() == DEFAULTS
    assert config["frames"] == 8
    assert config["mask_steps"] == "0:40:5"
    assert config["ranks.cfa"] == 8


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.conf"
    path.write_text("# nothing here\n\n")
    assert parse_config(str(path), env={}).to_dict() == DEFAULTS


def test_flag_overrides_file(tmp_path):
    path = tmp_path / "miva.conf"
    path.write_text("iters = 100\nalpha_shared = 0.5  # stronger\n")
    config = parse_config(str(path), {"iters": "7"}, env={})
    assert config["iters"] == 7
    assert config["alpha_shared"] == 0.5


def test_malformed_numeric_names_key(tmp_path):
    path = tmp_path / "miva.conf"
    path.write_text("frames = eight\n")
    with pytest.raises(ConfigError) as info:
        parse_config(str(path), env={})
    assert info.value.key == "frames"


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config(overrides={"ranks.lora": 3}, env={})
    assert info.value.key == "ranks.lora"


def test_out_of_range_names_key():
    with pytest.raises(ConfigError) as info:
        parse_config(overrides={"alpha_shared": 1.5}, env={})
    assert info.value.key == "alpha_shared"


def test_seed_precedence(tmp_path):
    path = tmp_path / "miva.conf"
    path.write_text("seed = 1\n")
    assert parse_config(str(path), env={"MIVA_SEED": "5"})["seed"] == 5
    assert parse_config(str(path), {"seed": 9}, env={"MIVA_SEED": "5"})["seed"] == 9


def test_template_variables():
    values = read_config_text("seed = {{ s }}\nmask_steps = \"{{ steps }}\"\n", {"s": "3", "steps": "0:10:2"})
    assert values == {"seed": 3, "mask_steps": "0:10:2"}


def test_template_error_is_config_error():
    with pytest.raises(ConfigError):
        read_config_text("seed = {{ missing }}\n", {})


def test_booleans_parse():
    assert read_config_text("adain = off\nlog.verbose = yes\n") == {"adain": False, "log.verbose": True}


def test_embedded_config_sits_below_file(tmp_path):
    path = tmp_path / "miva.conf"
    path.write_text("iters = 3\n")
    config = parse_config(str(path), embedded={"iters": 50, "lr": 0.5}, env={})
    assert config["iters"] == 3
    assert config["lr"] == 0.5


def test_config_is_immutable():
    config = parse_config(env={})
    with pytest.raises(TypeError):
        config["frames"] = 4
    assert config["frames"] == 8
    with pytest.raises(ConfigError):
        config["nope"]
    assert "frames = 8" in config.lines()


def test_parser_requires_image_for_animate(capsys):
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["animate", "--base", "b.miva", "--out", "o.mivv"])
    assert info.value.code == 2
    assert "--image" in capsys.readouterr().err


def test_parser_rejects_unknown_command():
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["dance"])
    assert info.value.code == 2
