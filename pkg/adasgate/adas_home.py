"""The engine home: configuration, on-disk layout and the writer lock."""

import calendar
import fcntl
import os
import time
from tempfile import NamedTemporaryFile

import structlog

from .adas_canonical import is_hex_digest, sha256_hex
from .adas_certificate import parse_certificate, parse_revocation
from .adas_constants import (DEFAULT_VALIDITY_DAYS, ENV_CLOCK, ENV_FORMAT, ENV_HOME, ENV_LOG_LEVEL,
                             ENV_VALIDITY_DAYS, HOME_DIRS, LOCK_FILE, OUTPUT_FORMATS, PRIVATE_KEY_FILE,
                             PUBLIC_KEY_FILE, SHARD_WIDTH)
from .adas_errors import AdasError, MalformedDocument, NotFound, StorageFailure
from .adas_evidence import BundleStore, ObjectStore
from .adas_keys import IssuerKey, load_public_key_file
from .adas_log import LogView, TransparencyLog
from .adas_model import DeploymentStore
from .adas_policy import PolicyRegistry, parse_policy, policy_fingerprint, serialize_policy

logger = structlog.get_logger(component='adas.home')

ISO_FORMAT = '%Y-%m-%dT%H:%M:%SZ'


class ConfigError(AdasError):
    pass


def parse_clock(txt):
    """UTC seconds from an epoch integer or an ISO-8601 ``...Z`` timestamp"""
    txt = txt.strip()
    if txt.lstrip('-').isdigit():
        return int(txt)
    try:
        return calendar.timegm(time.strptime(txt, ISO_FORMAT))
    except ValueError:
        raise ConfigError('clock must be epoch seconds or %s, got %r' % ('YYYY-MM-DDTHH:MM:SSZ', txt))


def format_clock(seconds):
    return time.strftime(ISO_FORMAT, time.gmtime(seconds))


class AdasConfig:
    """Runtime configuration of one engine invocation"""

    def __init__(self, home='.', clock=None, output_format='canonical', log_level='WARNING',
                 validity_days=DEFAULT_VALIDITY_DAYS):

        #: The engine home directory
        self.home = home

        #: Fixed UTC seconds to use instead of the system clock
        self.clock = clock

        #: canonical or pretty
        self.output_format = output_format
        if output_format not in OUTPUT_FORMATS:
            raise ConfigError('format must be one of %s' % ', '.join(OUTPUT_FORMATS))

        self.log_level = log_level.upper()

        #: Lifetime of newly issued certificates
        self.validity_days = validity_days
        if validity_days <= 0:
            raise ConfigError('validity days must be positive')

    @classmethod
    def from_environment(cls, environ=None):
        environ = os.environ if environ is None else environ
        clock = environ.get(ENV_CLOCK)
        days = environ.get(ENV_VALIDITY_DAYS)
        if days is not None and not days.strip().isdigit():
            raise ConfigError('%s must be a positive integer' % ENV_VALIDITY_DAYS)
        return cls(home=environ.get(ENV_HOME, '.'),
                   clock=parse_clock(clock) if clock else None,
                   output_format=environ.get(ENV_FORMAT, 'canonical'),
                   log_level=environ.get(ENV_LOG_LEVEL, 'WARNING'),
                   validity_days=int(days) if days is not None else DEFAULT_VALIDITY_DAYS)

    def now(self):
        return self.clock if self.clock is not None else int(time.time())

    def __repr__(self):
        return "<AdasConfig home={0} clock={1} format={2} log_level={3} validity_days={4}>".format(
            self.home,
            self.clock,
            self.output_format,
            self.log_level,
            self.validity_days
        )


class HomeLock:
    """Exclusive writer lock on an engine home"""

    def __init__(self, root):
        self.path = os.path.join(root, LOCK_FILE)
        self.fd = None

    def __enter__(self):
        self.fd = os.open(self.path, os.O_RDWR | os.O_CREAT, 0o644)
        fcntl.flock(self.fd, fcntl.LOCK_EX)
        return self

    def __exit__(self, type, value, traceback):
        fcntl.flock(self.fd, fcntl.LOCK_UN)
        os.close(self.fd)
        self.fd = None


def write_atomic(directory, name, data):
    path = os.path.join(directory, name)
    try:
        with NamedTemporaryFile(dir=directory, delete=False) as tmp:
            tmp.write(data)
            tmp.flush()
            os.fsync(tmp.fileno())
        os.replace(tmp.name, path)
    except OSError as ex:
        raise StorageFailure('could not write %s: %s' % (path, ex))
    return path


class EngineHome:
    """Directory layout of one engine instance.

    Files under objects/, packages/ and certs/ are named by the SHA-256 of
    their content; policies/ holds ``<fingerprint>.json``.
    """

    def __init__(self, root):
        self.root = os.path.abspath(root)

    def path(self, *parts):
        return os.path.join(self.root, *parts)

    def is_initialized(self):
        return all(os.path.isdir(self.path(d)) for d in HOME_DIRS)

    def require_initialized(self):
        if not self.is_initialized():
            raise StorageFailure('%s is not an initialized engine home (run init)' % self.root)

    def init(self):
        """Creates the layout and, if absent, the issuer keypair; returns the issuer key id"""
        for d in HOME_DIRS:
            os.makedirs(self.path(d), exist_ok=True)
        if not os.path.isfile(self.path('keys', PRIVATE_KEY_FILE)):
            return self.keygen().key_id
        return self.signing_key().key_id

    def keygen(self):
        key = IssuerKey.generate()
        key.save(self.path('keys', PRIVATE_KEY_FILE), self.path('keys', PUBLIC_KEY_FILE))
        logger.info('issuer_key_created', key_id=key.key_id)
        return key

    def lock(self):
        return HomeLock(self.root)

    def signing_key(self):
        return IssuerKey.load(self.path('keys', PRIVATE_KEY_FILE))

    def public_key(self):
        return load_public_key_file(self.path('keys', PUBLIC_KEY_FILE))

    def objects(self):
        return ObjectStore(self.path('objects'))

    def bundles(self):
        return BundleStore(self.path('bundles'))

    def deployments(self):
        return DeploymentStore(self.path('deployments'))

    def registry(self):
        return PolicyRegistry.load_directory(self.path('policies'))

    def add_policy(self, data):
        policy = parse_policy(data)
        fingerprint = policy_fingerprint(policy)
        write_atomic(self.path('policies'), fingerprint + '.json', serialize_policy(policy))
        logger.info('policy_added', policy_id=policy.policy_id, version=policy.version, fingerprint=fingerprint)
        return policy

    def log_view(self):
        return LogView.open(self.path('log'))

    def transparency_log(self):
        return TransparencyLog(self.path('log'), self.signing_key())

    def put_document(self, subdir, data):
        """Stores canonical bytes under their own hash; returns the hash"""
        name = sha256_hex(data)
        if not os.path.isfile(self.path(subdir, name)):
            write_atomic(self.path(subdir), name, data)
        return name

    def get_document(self, subdir, name):
        path = self.path(subdir, name)
        if not is_hex_digest(name) or not os.path.isfile(path):
            raise NotFound(name)
        with open(path, 'rb') as f:
            data = f.read()
        if sha256_hex(data) != name:
            raise MalformedDocument('%s/%s does not hash to its name' % (subdir, name))
        return data

    def save_package(self, pkg):
        return self.put_document('packages', pkg.canonical_bytes())

    def save_certificate(self, cert):
        return self.put_document('certs', cert.canonical_bytes())

    def save_revocation(self, record):
        return self.put_document('certs', record.canonical_bytes())

    def _signed_documents(self, parse):
        for name in sorted(os.listdir(self.path('certs'))):
            if not is_hex_digest(name):
                continue
            with open(self.path('certs', name), 'rb') as f:
                try:
                    yield parse(f.read())
                except AdasError:
                    continue

    def find_certificate(self, certificate_id):
        for cert in self._signed_documents(parse_certificate):
            if cert.certificate_id == certificate_id:
                return cert
        raise NotFound(certificate_id)

    def certificates(self):
        return list(self._signed_documents(parse_certificate))

    def revocations(self):
        return list(self._signed_documents(parse_revocation))

    def verify_files(self):
        """[(path, actual_hash), ...] for every content-addressed file that no longer matches its name"""
        bad = [(os.path.join('objects', h[:SHARD_WIDTH], h[SHARD_WIDTH:]), actual)
               for h, actual in self.objects().verify_store()]
        for subdir in ('packages', 'certs'):
            for name in sorted(os.listdir(self.path(subdir))):
                if not is_hex_digest(name):
                    continue
                with open(self.path(subdir, name), 'rb') as f:
                    actual = sha256_hex(f.read())
                if actual != name:
                    bad.append((os.path.join(subdir, name), actual))
        return bad
