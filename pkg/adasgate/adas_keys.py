"""Ed25519 issuer keys stored as raw hex (64 chars private seed, 64 chars public)."""

import os

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519

from .adas_canonical import sha256_hex
from .adas_errors import InvalidKey

re_hex_chars = frozenset('0123456789abcdef')


def _raw_public(public_key):
    return public_key.public_bytes(encoding=serialization.Encoding.Raw, format=serialization.PublicFormat.Raw)


def _from_hex(txt, what):
    txt = txt.strip() if isinstance(txt, str) else txt
    if not isinstance(txt, str) or len(txt) != 64 or not set(txt) <= re_hex_chars:
        raise InvalidKey('%s key must be 64 lowercase hex characters' % what)
    return bytes.fromhex(txt)


def key_id_for(public_key):
    """Short, stable identifier of a public key"""
    return sha256_hex(_raw_public(public_key))[:16]


def load_public_key(public_hex):
    if isinstance(public_hex, ed25519.Ed25519PublicKey):
        return public_hex
    try:
        return ed25519.Ed25519PublicKey.from_public_bytes(_from_hex(public_hex, 'public'))
    except ValueError as ex:
        raise InvalidKey(str(ex))


def verify_signature(public_key, data, signature_hex):
    """True iff `signature_hex` (128 lowercase hex) is a valid signature of `data`"""
    if (not isinstance(signature_hex, str) or len(signature_hex) != 128
            or not set(signature_hex) <= re_hex_chars):
        return False
    try:
        load_public_key(public_key).verify(bytes.fromhex(signature_hex), data)
    except (InvalidSignature, InvalidKey):
        return False
    return True


class IssuerKey(object):
    """Signing half of the engine's single issuer keypair"""

    def __init__(self, private_key):
        if not isinstance(private_key, ed25519.Ed25519PrivateKey):
            raise InvalidKey('issuer key must be an Ed25519 private key')
        self.private_key = private_key

        #: The matching public key
        self.public_key = private_key.public_key()

        #: Identifier recorded in every signed document
        self.key_id = key_id_for(self.public_key)

    @classmethod
    def generate(cls):
        return cls(ed25519.Ed25519PrivateKey.generate())

    @classmethod
    def from_hex(cls, private_hex):
        try:
            return cls(ed25519.Ed25519PrivateKey.from_private_bytes(_from_hex(private_hex, 'private')))
        except ValueError as ex:
            raise InvalidKey(str(ex))

    @classmethod
    def load(cls, path):
        with open(path, 'r') as f:
            return cls.from_hex(f.read())

    def private_hex(self):
        return self.private_key.private_bytes(encoding=serialization.Encoding.Raw,
                                              format=serialization.PrivateFormat.Raw,
                                              encryption_algorithm=serialization.NoEncryption()).hex()

    def public_hex(self):
        return _raw_public(self.public_key).hex()

    def sign(self, data):
        """Returns the hex signature of `data`"""
        return self.private_key.sign(data).hex()

    def save(self, private_path, public_path):
        fd = os.open(private_path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o600)
        with os.fdopen(fd, 'w') as f:
            f.write(self.private_hex())
        with open(public_path, 'w') as f:
            f.write(self.public_hex())

    def __repr__(self):
        return '<IssuerKey key_id=%s>' % self.key_id


def load_public_key_file(path):
    with open(path, 'r') as f:
        return load_public_key(f.read())


def as_issuer_key(signing_key):
    """Accepts an IssuerKey, a raw Ed25519 private key or its hex form"""
    if isinstance(signing_key, IssuerKey):
        return signing_key
    if isinstance(signing_key, ed25519.Ed25519PrivateKey):
        return IssuerKey(signing_key)
    if isinstance(signing_key, str):
        return IssuerKey.from_hex(signing_key)
    raise InvalidKey('unsupported signing key %r' % type(signing_key).__name__)
