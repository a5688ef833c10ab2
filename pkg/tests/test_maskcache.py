import pytest

from check import ProtocolError
from maskcache import MaskCache


def test_upload_then_download():
    cache = MaskCache()
    assert cache.upload("video", "biases", 0)
    assert "video" in cache and len(cache) == 1
    assert cache.download("video", 3) == "biases"
    assert cache.timestamps == {"video": 0}


def test_download_before_upload():
    with pytest.raises(ProtocolError, match="video"):
        MaskCache().download("video", 2)


def test_reupload_moves_timestamp():
    cache = MaskCache()
    cache.upload("video", 1, 0)
    cache.upload("video", 2, 5)
    assert cache.download("video", 6) == 2
    assert cache.timestamps["video"] == 5


def test_bad_arguments_are_logged(capsys):
    cache = MaskCache()
    assert not cache.upload("", 1, 0)
    assert not cache.upload("video", 1, -1)
    assert "bad argument" in capsys.readouterr().out
    assert len(cache) == 0


def test_record_and_flush():
    cache = MaskCache()
    cache.upload("masks", [], 0)
    cache.record(0)
    cache.record(5)
    assert cache.computations == [0, 5]
    cache.flush()
    assert len(cache) == 0 and cache.computations == [] and cache.timestamps == {}
