import types

import pytest
import ubjson

from databasemanager import DatabaseManager
from logmanager import LOG


@pytest.fixture
def miva():
    return types.SimpleNamespace(log=LOG)


def test_ledger_off(miva):
    ledger = DatabaseManager(miva, "")
    assert ledger.record("animate", [], {}, [], 0.1, 0) is None
    assert ledger.flush()


def test_put_get_remove(miva, tmp_path, capsys):
    ledger = DatabaseManager(miva, str(tmp_path / "miva.ledger"))
    ledger["note"] = {"a": 1}
    assert "note" in ledger
    assert ledger["note"] == {"a": 1}
    assert ledger.put("bad", object()) is False
    assert ledger.get("missing") is None
    del ledger["note"]
    assert ledger.keys() == []
    assert ledger.remove("note") is False
    assert "no such key" in capsys.readouterr().out


def test_records_persist(miva, tmp_path):
    path = str(tmp_path / "miva.ledger")
    ledger = DatabaseManager(miva, path)
    first = ledger.record("make-data", ["make-data", "--out", "d"], {"seed": 0}, ["d"], 1.5, 0)
    second = ledger.record("eval", ["eval"], {"seed": 0}, [], 0.25, 1, {"metrics": {"x": 1.0}})
    assert (first, second) == ("run-0000", "run-0001")

    with open(path, "rb") as f:
        stored = ubjson.loadb(f.read())
    assert stored["run-0000"]["outputs"] == ["d"]
    assert stored["run-0001"]["status"] == 1
    assert stored["run-0001"]["metrics"] == {"x": 1.0}

    reopened = DatabaseManager(miva, path)
    assert reopened.keys() == ["run-0000", "run-0001"]
    assert reopened.record("animate", [], {}, [], 0.0, 0) == "run-0002"


def test_unreadable_ledger(miva, tmp_path, capsys):
    path = tmp_path / "miva.ledger"
    path.write_bytes(b"\xff\xff\xff")
    ledger = DatabaseManager(miva, str(path))
    assert ledger.filename == ""
    assert "cannot open ledger" in capsys.readouterr().out
