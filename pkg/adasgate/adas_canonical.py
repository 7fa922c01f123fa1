"""Canonical byte encoding and hashing.

Canonical JSON restricted to a float-free subset: UTF-8, keys sorted by
codepoint, no insignificant whitespace, shortest integer form, minimal
string escaping. Every hash in the engine is SHA-256 over these bytes.
"""

import hashlib
import json
import re

from .adas_constants import HASH_HEX_LENGTH
from .adas_errors import MalformedDocument, UnencodableValue

re_hex_digest = re.compile('[0-9a-f]{%d}' % HASH_HEX_LENGTH)


def _check_encodable(value, path='$'):
    if value is None or isinstance(value, (bool, str)):
        return
    if isinstance(value, int):
        return
    if isinstance(value, float):
        raise UnencodableValue('float at %s' % path)
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise UnencodableValue('non-string key %r at %s' % (key, path))
            _check_encodable(item, path + '.' + key)
        return
    if isinstance(value, (list, tuple)):
        for n, item in enumerate(value):
            _check_encodable(item, '%s[%d]' % (path, n))
        return
    raise UnencodableValue('%s at %s' % (type(value).__name__, path))


def canonicalize(value):
    """Returns the canonical bytes of a document.

    Args:
        `value`: dict, list, str, int, bool or None, nested arbitrarily.
            Floats and non-string keys raise :class:`UnencodableValue`.
    """
    _check_encodable(value)
    text = json.dumps(value, sort_keys=True, separators=(',', ':'), ensure_ascii=False, allow_nan=False)
    try:
        return text.encode('utf-8')
    except UnicodeEncodeError as ex:
        raise UnencodableValue('string is not valid unicode: %s' % ex)


def _reject_float(txt):
    raise MalformedDocument('float literal %s not allowed' % txt)


def _reject_constant(txt):
    raise MalformedDocument('constant %s not allowed' % txt)


def _unique_keys(pairs):
    d = {}
    for key, value in pairs:
        if key in d:
            raise MalformedDocument('duplicate key %r' % key)
        d[key] = value
    return d


def parse_canonical(data):
    """Parses canonical (or merely well-formed, float-free) JSON bytes."""
    try:
        text = data.decode('utf-8') if isinstance(data, (bytes, bytearray)) else data
        return json.loads(text, parse_float=_reject_float, parse_constant=_reject_constant,
                          object_pairs_hook=_unique_keys)
    except MalformedDocument:
        raise
    except (UnicodeDecodeError, ValueError) as ex:
        raise MalformedDocument(str(ex))


def pretty(value):
    """Human-friendly rendering of a document, for --format pretty"""
    _check_encodable(value)
    return json.dumps(value, sort_keys=True, indent=2, ensure_ascii=False)


def sha256_hex(data):
    return hashlib.sha256(data).hexdigest()


def canonical_hash(value):
    return sha256_hex(canonicalize(value))


def is_hex_digest(txt):
    return isinstance(txt, str) and re_hex_digest.fullmatch(txt) is not None
