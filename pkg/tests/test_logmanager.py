import pytest

from check import HaltError
from configmanager import parse_config
from logmanager import LogManager, parse_rules

QUIET = {"log.verbose": False, "log.halt": False, "log.file": "", "log.suppress": "", "log.suppress_halt": ""}


def test_msg_joins_chain_behind_counter(capsys):
    log = LogManager()
    log.count = 7
    assert log.msg("ERROR", "Masks", "parse", "bad", 3)
    assert capsys.readouterr().out == "[7] ERROR: Masks: parse: bad: 3\n"


def test_info_only_when_verbose(capsys):
    log = LogManager()
    assert not log.info("Trainer", "loss")
    log.verbose = True
    assert log.info("Trainer", "loss")
    assert capsys.readouterr().out == "[0] INFO: Trainer: loss\n"


def test_halt_on_warning():
    log = LogManager()
    log.halt = True
    with pytest.raises(HaltError, match="Preprocess"):
        log.msg("WARNING", "Preprocess", "adain_final", "zero-variance channels")
    # Info-level chains never halt.
    assert log.msg("INFO", "Miva", "done")


def test_suppress_halt_rule_matches_prefix(capsys):
    log = LogManager()
    log.halt = True
    log.suppress_halt = [["WARNING", "SynthData"]]
    assert log.msg("WARNING", "SynthData", "pattern_dataset", "few clips")
    assert "few clips" in capsys.readouterr().out


def test_suppress_rule_with_empty_field(capsys):
    log = LogManager()
    log.suppress = [["WARNING", "", "attention_mask_entry"]]
    assert not log.msg("WARNING", "Masks", "attention_mask_entry", "clamped")
    assert log.msg("WARNING", "Masks", "other", "clamped")
    assert "other" in capsys.readouterr().out


def test_configure_writes_log_file(tmp_path):
    log = LogManager()
    path = tmp_path / "miva.log"
    assert log.configure(dict(QUIET, **{"log.verbose": True, "log.file": str(path)}))
    log.msg("ERROR", "Adapter", "load_base", "missing")
    log._terminate()
    text = path.read_text()
    assert "Starting up..." in text
    assert "[0] ERROR: Adapter: load_base: missing" in text
    assert "Shutting down..." in text


def test_configure_reports_unwritable_file(tmp_path, capsys):
    log = LogManager()
    assert not log.configure(dict(QUIET, **{"log.file": str(tmp_path / "no" / "x.log")}))
    assert "cannot open log file" in capsys.readouterr().out


def test_parse_rules():
    assert parse_rules("") == []
    assert parse_rules("WARNING:SynthData, WARNING::attention_mask_entry,") == [
        ["WARNING", "SynthData"],
        ["WARNING", "", "attention_mask_entry"],
    ]


def test_configure_reads_suppress_rules_from_config(capsys):
    rules = {"log.suppress": "WARNING::attention_mask_entry", "log.suppress_halt": "WARNING:SynthData"}
    config = parse_config(overrides=dict(rules, **{"log.halt": True}), env={})
    log = LogManager()
    assert log.configure(config)
    assert not log.msg("WARNING", "Masks", "attention_mask_entry", "clamped")
    assert log.msg("WARNING", "SynthData", "pattern_dataset", "few clips")
    with pytest.raises(HaltError):
        log.msg("WARNING", "Preprocess", "adain_final", "zero-variance channels")
    out = capsys.readouterr().out
    assert "clamped" not in out
    assert "few clips" in out
