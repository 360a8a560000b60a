import math

import pytest

from curlspec.utils import canonical_json, content_hash, fmt17, parse_length, resolve_threads, sha1


@pytest.mark.parametrize("token,expect", [
    ("pi", math.pi),
    ("PI", math.pi),
    ("2pi", 2 * math.pi),
    ("2*pi", 2 * math.pi),
    ("pi/2", math.pi / 2),
    ("0.5 * pi", 0.5 * math.pi),
    ("1.5", 1.5),
    (3, 3.0),
])
def test_parse_length(token, expect):
    assert parse_length(token) == expect


def test_parse_length_rejects_garbage():
    with pytest.raises(ValueError):
        parse_length("tau")


def test_fmt17():
    assert fmt17(0.1) == "0.10000000000000001"
    assert float(fmt17(math.pi)) == math.pi


def test_content_hash_ignores_key_order():
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
    assert content_hash({"b": 1, "a": 2}) == content_hash({"a": 2, "b": 1})
    assert content_hash({"a": 1}) != content_hash({"a": 2})
    assert len(sha1("x")) == 40


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("CURLSPEC_THREADS", raising=False)
    assert resolve_threads() == 1
    assert resolve_threads(3) == 3
    monkeypatch.setenv("CURLSPEC_THREADS", "4")
    assert resolve_threads() == 4
    assert resolve_threads(2) == 2
    monkeypatch.setenv("CURLSPEC_THREADS", "lots")
    assert resolve_threads() == 1
