import pytest

from adasgate.adas_canonical import (canonical_hash, canonicalize, is_hex_digest, parse_canonical, pretty,
                                     sha256_hex)
from adasgate.adas_errors import MalformedDocument, UnencodableValue


def test_sorted_keys_no_whitespace():
    assert canonicalize({'b': 1, 'a': [True, None, 'x']}) == b'{"a":[true,null,"x"],"b":1}'


def test_key_order_does_not_matter():
    assert canonicalize({'z': 1, 'y': {'q': 2, 'p': 3}}) == canonicalize({'y': {'p': 3, 'q': 2}, 'z': 1})


def test_unicode_is_raw_utf8():
    assert canonicalize({'name': 'Zürich'}) == '{"name":"Zürich"}'.encode('utf-8')


def test_minimal_escaping():
    assert canonicalize('a"b\\c\n') == b'"a\\"b\\\\c\\n"'


def test_integers_shortest_form():
    assert canonicalize([0, -1, 10000, 2 ** 63]) == b'[0,-1,10000,9223372036854775808]'


@pytest.mark.parametrize('value', [1.5, {'x': 0.0}, [1, 2.0], {1: 'a'}, {'s': {1, 2}}, b'raw'])
def test_unencodable(value):
    with pytest.raises(UnencodableValue):
        canonicalize(value)


def test_parse_round_trip():
    doc = {'list': [1, 'two', None, False], 'nested': {'k': 'v'}}
    assert parse_canonical(canonicalize(doc)) == doc


@pytest.mark.parametrize('data', [b'{"a":1.5}', b'[NaN]', b'{"a":1,"a":2}', b'{"a":', b'\xff\xfe'])
def test_parse_rejects(data):
    with pytest.raises(MalformedDocument):
        parse_canonical(data)


def test_sha256_oracles():
    assert sha256_hex(b'abc') == 'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad'
    assert sha256_hex(b'') == 'e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855'
    assert canonical_hash('abc') == sha256_hex(b'"abc"')


def test_hex_digest_shape():
    assert is_hex_digest('ab' * 32)
    assert not is_hex_digest('AB' * 32)
    assert not is_hex_digest('ab' * 31)
    assert not is_hex_digest(None)


def test_pretty_is_not_canonical():
    assert pretty({'a': 1}) == '{\n  "a": 1\n}'
