"""Content-addressed artefact storage and append-only evidence bundles.

Objects live under ``objects/<hh>/<remaining 62 hex>``; every read re-hashes
the stored bytes so any after-the-fact edit surfaces as an
:class:`IntegrityViolation`. Bundle manifests live under
``bundles/<bundle_id>`` and hash to the bundle fingerprint.
"""

import enum
import os
from dataclasses import dataclass
from tempfile import NamedTemporaryFile

import structlog

from .adas_canonical import canonicalize, is_hex_digest, parse_canonical, sha256_hex
from .adas_constants import SECONDS_PER_DAY, SHARD_WIDTH
from .adas_errors import (DuplicateEntry, EmptyArtefact, IntegrityViolation, MalformedDocument, NotFound,
                          StorageFailure, UnknownArtefact, UnknownArtefactKind)

logger = structlog.get_logger(component='adas.evidence')

OWNER_SUFFIX = '.owner'


class ArtefactKind(str, enum.Enum):
    MODEL_CARD = 'ModelCard'
    SYSTEM_CARD = 'SystemCard'
    DATA_LINEAGE = 'DataLineage'
    RED_TEAM_REPORT = 'RedTeamReport'
    SECURITY_ATTESTATION = 'SecurityAttestation'
    MONITORING_PLAN = 'MonitoringPlan'
    LEGAL_DECLARATION = 'LegalDeclaration'
    TEST_REPORT = 'TestReport'
    LOG_ATTESTATION = 'LogAttestation'
    INCIDENT_REPORT = 'IncidentReport'

    @classmethod
    def parse(cls, txt):
        try:
            return cls(txt)
        except ValueError:
            raise UnknownArtefactKind('unknown artefact kind %r' % (txt,))


@dataclass(frozen=True)
class ArtefactRef:
    content_hash: str
    kind: ArtefactKind
    #: UTC seconds since epoch
    timestamp: int
    size_bytes: int
    label: str = ''

    def to_document(self):
        return {'content_hash': self.content_hash, 'kind': self.kind.value, 'timestamp': self.timestamp,
                'size_bytes': self.size_bytes, 'label': self.label}

    @classmethod
    def from_document(cls, doc):
        if not isinstance(doc, dict) or set(doc) != {'content_hash', 'kind', 'timestamp', 'size_bytes', 'label'}:
            raise MalformedDocument('artefact ref: expected content_hash, kind, timestamp, size_bytes, label')
        if not is_hex_digest(doc['content_hash']):
            raise MalformedDocument('artefact ref: content_hash must be 64 lowercase hex')
        for key in ('timestamp', 'size_bytes'):
            if isinstance(doc[key], bool) or not isinstance(doc[key], int) or doc[key] < 0:
                raise MalformedDocument('artefact ref: %s must be a non-negative integer' % key)
        if not isinstance(doc['label'], str) or not isinstance(doc['kind'], str):
            raise MalformedDocument('artefact ref: kind and label must be strings')
        return cls(doc['content_hash'], ArtefactKind.parse(doc['kind']), doc['timestamp'], doc['size_bytes'],
                   doc['label'])


class ObjectStore(object):
    """Flat, sharded directory of objects addressed by their SHA-256"""

    def __init__(self, root):
        #: Directory holding the shard directories
        self.root = root
        os.makedirs(root, exist_ok=True)

    def path_for(self, content_hash):
        return os.path.join(self.root, content_hash[:SHARD_WIDTH], content_hash[SHARD_WIDTH:])

    def contains(self, content_hash):
        return is_hex_digest(content_hash) and os.path.isfile(self.path_for(content_hash))

    def put(self, data):
        if not data:
            raise EmptyArtefact('refusing to store an empty artefact')
        content_hash = sha256_hex(data)
        path = self.path_for(content_hash)
        if os.path.isfile(path):
            return content_hash
        try:
            shard = os.path.dirname(path)
            os.makedirs(shard, exist_ok=True)
            with NamedTemporaryFile(dir=shard, delete=False) as tmp:
                tmp.write(data)
                tmp.flush()
                os.fsync(tmp.fileno())
            # same content under the same name, so racing writers are harmless
            os.replace(tmp.name, path)
        except OSError as ex:
            raise StorageFailure('could not store %s: %s' % (content_hash, ex))
        logger.debug('object_stored', content_hash=content_hash, size_bytes=len(data))
        return content_hash

    def get(self, content_hash):
        if not self.contains(content_hash):
            raise NotFound(content_hash)
        with open(self.path_for(content_hash), 'rb') as f:
            data = f.read()
        actual = sha256_hex(data)
        if actual != content_hash:
            logger.error('integrity_violation', content_hash=content_hash, actual_hash=actual)
            raise IntegrityViolation(content_hash, actual)
        return data

    def object_hashes(self):
        for shard in sorted(os.listdir(self.root)):
            shard_dir = os.path.join(self.root, shard)
            if len(shard) != SHARD_WIDTH or not os.path.isdir(shard_dir):
                continue
            for rest in sorted(os.listdir(shard_dir)):
                if is_hex_digest(shard + rest):
                    yield shard + rest

    def object_count(self):
        return sum(1 for _ in self.object_hashes())

    def verify_store(self):
        """Returns [(content_hash, actual_hash), ...] for every tampered object"""
        bad = []
        for content_hash in self.object_hashes():
            with open(self.path_for(content_hash), 'rb') as f:
                actual = sha256_hex(f.read())
            if actual != content_hash:
                bad.append((content_hash, actual))
        return bad


def put_artefact(store, data, kind, timestamp, label=''):
    """Stores artefact bytes and returns their reference.

    Args:
        `store`: ObjectStore
        `data`: bytes, non-empty
        `kind`: ArtefactKind or its name; unknown kinds are rejected
        `timestamp`: int, UTC seconds
        `label`: short human label
    """
    kind = kind if isinstance(kind, ArtefactKind) else ArtefactKind.parse(kind)
    content_hash = store.put(data)
    return ArtefactRef(content_hash, kind, int(timestamp), len(data), label)


def get_artefact(store, content_hash):
    return store.get(content_hash)


@dataclass(frozen=True)
class EvidenceBundle:
    bundle_id: str
    deployment_id: str
    #: ArtefactRefs in insertion order
    entries: tuple = ()

    def hashes(self):
        return [e.content_hash for e in self.entries]

    def of_kind(self, kind):
        return [e for e in self.entries if e.kind == kind]

    def manifest(self):
        return [e.to_document() for e in self.entries]


def append_to_bundle(bundle, ref, store):
    """Returns a new bundle state with `ref` appended; prior entries are untouched"""
    if not store.contains(ref.content_hash):
        raise UnknownArtefact(ref.content_hash)
    if ref.content_hash in bundle.hashes():
        raise DuplicateEntry(ref.content_hash)
    return EvidenceBundle(bundle.bundle_id, bundle.deployment_id, bundle.entries + (ref,))


def manifest_bytes(bundle):
    return canonicalize(bundle.manifest())


def bundle_fingerprint(bundle):
    return sha256_hex(manifest_bytes(bundle))


def parse_manifest(data):
    doc = parse_canonical(data)
    if not isinstance(doc, list):
        raise MalformedDocument('bundle manifest: expected a list of artefact refs')
    return tuple(ArtefactRef.from_document(e) for e in doc)


class BundleStore(object):
    """Bundle manifests on disk. Writes must extend the stored manifest."""

    def __init__(self, root):
        self.root = root
        os.makedirs(root, exist_ok=True)

    def _check_id(self, bundle_id):
        if (not bundle_id or '/' in bundle_id or bundle_id.startswith('.')
                or bundle_id.endswith(OWNER_SUFFIX)):
            raise StorageFailure('invalid bundle id %r' % (bundle_id,))

    def manifest_path(self, bundle_id):
        self._check_id(bundle_id)
        return os.path.join(self.root, bundle_id)

    def exists(self, bundle_id):
        return os.path.isfile(self.manifest_path(bundle_id))

    def create(self, bundle_id, deployment_id):
        if self.exists(bundle_id):
            raise StorageFailure('bundle %s already exists' % bundle_id)
        bundle = EvidenceBundle(bundle_id, deployment_id)
        with open(self.manifest_path(bundle_id) + OWNER_SUFFIX, 'wb') as f:
            f.write(canonicalize({'bundle_id': bundle_id, 'deployment_id': deployment_id}))
        self.save(bundle)
        logger.info('bundle_created', bundle_id=bundle_id, deployment_id=deployment_id)
        return bundle

    def load(self, bundle_id):
        path = self.manifest_path(bundle_id)
        if not os.path.isfile(path):
            raise NotFound(bundle_id)
        with open(path + OWNER_SUFFIX, 'rb') as f:
            owner = parse_canonical(f.read())
        with open(path, 'rb') as f:
            entries = parse_manifest(f.read())
        return EvidenceBundle(bundle_id, owner['deployment_id'], entries)

    def save(self, bundle):
        path = self.manifest_path(bundle.bundle_id)
        if os.path.isfile(path):
            with open(path, 'rb') as f:
                stored = parse_manifest(f.read())
            if bundle.entries[:len(stored)] != stored:
                raise StorageFailure('bundle %s: manifests are append-only' % bundle.bundle_id)
        try:
            with NamedTemporaryFile(dir=self.root, delete=False) as tmp:
                tmp.write(manifest_bytes(bundle))
            os.replace(tmp.name, path)
        except OSError as ex:
            raise StorageFailure('could not write bundle %s: %s' % (bundle.bundle_id, ex))
        logger.debug('bundle_saved', bundle_id=bundle.bundle_id, entries=len(bundle.entries),
                     fingerprint=bundle_fingerprint(bundle))


@dataclass(frozen=True)
class RequirementStatus:
    requirement: object
    found_count: int
    fresh_count: int
    satisfied: bool

    def to_document(self):
        return {'requirement': self.requirement.to_document(), 'found_count': self.found_count,
                'fresh_count': self.fresh_count, 'satisfied': self.satisfied}


@dataclass(frozen=True)
class SufficiencyReport:
    satisfied: bool
    per_requirement: tuple
    action_on_failure: str

    def missing_kinds(self):
        return [s.requirement.kind for s in self.per_requirement if not s.satisfied]

    def to_document(self):
        return {'satisfied': self.satisfied, 'per_requirement': [s.to_document() for s in self.per_requirement],
                'action_on_failure': self.action_on_failure}


def is_fresh(ref, max_age_days, now):
    return max_age_days is None or now - ref.timestamp <= max_age_days * SECONDS_PER_DAY


def check_sufficiency(bundle, policy, now, store=None):
    """The Evidence Sufficiency Check.

    When `store` is given every entry is read back first, so tampered
    evidence raises :class:`IntegrityViolation` before anything is counted.
    """
    if store is not None:
        for ref in bundle.entries:
            store.get(ref.content_hash)

    statuses = []
    for req in policy.evidence_requirements:
        found = bundle.of_kind(req.kind)
        fresh = [r for r in found if is_fresh(r, req.max_age_days, now)]
        statuses.append(RequirementStatus(req, len(found), len(fresh), len(fresh) >= req.min_count))
    report = SufficiencyReport(all(s.satisfied for s in statuses), tuple(statuses),
                               policy.missing_evidence_action.value)
    if not report.satisfied:
        logger.info('evidence_insufficient', bundle_id=bundle.bundle_id,
                    missing=[k.value for k in report.missing_kinds()])
    return report
