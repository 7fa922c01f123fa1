"""Audit packages, signed certificates and revocation records.

An audit package is the complete record behind one decision; its hash is
what a certificate signs over. Certificates and revocation records are
signed over the canonical encoding of every field except ``signature``
and persist as canonical files named by their own SHA-256.
"""

import enum
import time
from dataclasses import dataclass, replace

import structlog

from .adas_canonical import canonical_hash, canonicalize, is_hex_digest, parse_canonical, sha256_hex
from .adas_constants import SECONDS_PER_DAY
from .adas_decision import Condition, Decision, Outcome
from .adas_errors import (AdasError, CertificationError, DeniedDeployment, HashMismatch, InvalidKey,
                          MalformedDocument)
from .adas_evidence import ArtefactRef, EvidenceBundle, bundle_fingerprint
from .adas_keys import IssuerKey, as_issuer_key, key_id_for, load_public_key, verify_signature
from .adas_log import CertificateStatus, leaf_hash, verify_inclusion, verify_tree_head
from .adas_model import DeploymentDescriptor, ScoreVector
from .adas_policy import policy_fingerprint, policy_from_document, serialize_policy
from .adas_scoring import MetricReport, extract_metric_reports

logger = structlog.get_logger(component='adas.certificate')

COMPONENTS = ('policy', 'deployment', 'manifest', 'decision')


def generate_keypair():
    """A fresh issuer keypair; see :class:`IssuerKey` for persistence"""
    return IssuerKey.generate()


def _expect(cond, where, message):
    if not cond:
        raise MalformedDocument('%s: %s' % (where, message))


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


# audit packages

@dataclass(frozen=True)
class AuditPackage:
    package_id: str
    policy: object
    policy_fingerprint: str
    policy_version: str
    deployment: DeploymentDescriptor
    bundle_id: str
    bundle_manifest: tuple
    bundle_fingerprint: str
    #: None when the decision was reached before scoring
    score_vector: ScoreVector
    decision: Decision
    #: MetricReports behind the score vector, in bundle order
    test_results: tuple
    #: sorted ((component, hash), ...) over COMPONENTS
    component_hashes: tuple

    @property
    def hashes(self):
        return dict(self.component_hashes)

    def to_document(self):
        return {
            'package_id': self.package_id,
            'policy': self.policy.to_document(),
            'policy_fingerprint': self.policy_fingerprint,
            'policy_version': self.policy_version,
            'deployment': self.deployment.to_document(),
            'bundle_id': self.bundle_id,
            'bundle_manifest': [e.to_document() for e in self.bundle_manifest],
            'bundle_fingerprint': self.bundle_fingerprint,
            'score_vector': self.score_vector.to_document() if self.score_vector is not None else None,
            'decision': self.decision.to_document(),
            'test_results': [r.to_document() for r in self.test_results],
            'component_hashes': self.hashes,
        }

    def canonical_bytes(self):
        return canonicalize(self.to_document())

    @classmethod
    def from_document(cls, doc):
        fields = ('package_id', 'policy', 'policy_fingerprint', 'policy_version', 'deployment', 'bundle_id',
                  'bundle_manifest', 'bundle_fingerprint', 'score_vector', 'decision', 'test_results',
                  'component_hashes')
        _expect(isinstance(doc, dict) and set(doc) == set(fields), 'audit package', 'expected ' + ', '.join(fields))
        hashes = doc['component_hashes']
        _expect(isinstance(hashes, dict) and set(hashes) == set(COMPONENTS)
                and all(is_hex_digest(h) for h in hashes.values()),
                'audit package', 'component_hashes must map %s to hex digests' % ', '.join(COMPONENTS))
        _expect(isinstance(doc['bundle_manifest'], list) and isinstance(doc['test_results'], list),
                'audit package', 'bundle_manifest and test_results must be lists')
        try:
            policy = policy_from_document(doc['policy'])
            deployment = DeploymentDescriptor.from_document(doc['deployment'])
        except AdasError as ex:
            raise MalformedDocument('audit package: %s' % ex)
        sv = doc['score_vector']
        return cls(
            package_id=doc['package_id'],
            policy=policy,
            policy_fingerprint=doc['policy_fingerprint'],
            policy_version=doc['policy_version'],
            deployment=deployment,
            bundle_id=doc['bundle_id'],
            bundle_manifest=tuple(ArtefactRef.from_document(e) for e in doc['bundle_manifest']),
            bundle_fingerprint=doc['bundle_fingerprint'],
            score_vector=ScoreVector.from_document(sv) if sv is not None else None,
            decision=Decision.from_document(doc['decision']),
            test_results=tuple(MetricReport.from_document(r) for r in doc['test_results']),
            component_hashes=tuple(sorted(hashes.items())),
        )


def parse_audit_package(data):
    return AuditPackage.from_document(parse_canonical(data))


def _component_hashes(policy, deployment, manifest, decision):
    return {
        'policy': sha256_hex(serialize_policy(policy)),
        'deployment': canonical_hash(deployment.to_document()),
        'manifest': canonical_hash([e.to_document() for e in manifest]),
        'decision': canonical_hash(decision.to_document()),
    }


def _package_id(hashes):
    return 'pkg-' + canonical_hash(hashes)[:32]


def assemble_audit_package(policy, deployment, bundle, decision, store=None, expected_bundle_fingerprint=None):
    """Builds the hashed record behind one decision.

    Args:
        `policy`: the Policy the decision was reached under
        `deployment`: DeploymentDescriptor
        `bundle`: EvidenceBundle at the state the decision saw
        `decision`: Decision produced from exactly these inputs
        `store`: ObjectStore; when given, the metric reports behind a scored
            decision are embedded as test results
        `expected_bundle_fingerprint`: fingerprint the caller assessed, checked
            against the manifest
    """
    fingerprint = bundle_fingerprint(bundle)
    if expected_bundle_fingerprint is not None and expected_bundle_fingerprint != fingerprint:
        raise HashMismatch('bundle %s: manifest hashes to %s, expected %s' % (
            bundle.bundle_id, fingerprint, expected_bundle_fingerprint))
    policy_hash = policy_fingerprint(policy)
    if decision.policy_fingerprint != policy_hash:
        raise HashMismatch('decision was reached under policy %s, not %s' % (decision.policy_fingerprint,
                                                                              policy_hash))

    reports = ()
    if store is not None and decision.score_vector is not None:
        reports = tuple(extract_metric_reports(bundle, store))
    hashes = _component_hashes(policy, deployment, bundle.entries, decision)
    pkg = AuditPackage(
        package_id=_package_id(hashes),
        policy=policy,
        policy_fingerprint=policy_hash,
        policy_version=policy.version,
        deployment=deployment,
        bundle_id=bundle.bundle_id,
        bundle_manifest=bundle.entries,
        bundle_fingerprint=fingerprint,
        score_vector=decision.score_vector,
        decision=decision,
        test_results=reports,
        component_hashes=tuple(sorted(hashes.items())),
    )
    logger.debug('audit_package_assembled', package_id=pkg.package_id, outcome=decision.outcome.value)
    return pkg


def audit_package_hash(pkg):
    return sha256_hex(pkg.canonical_bytes())


def verify_audit_package(pkg):
    """Recomputes every hash the package claims; returns the names of those that disagree"""
    mismatches = []
    actual = _component_hashes(pkg.policy, pkg.deployment, pkg.bundle_manifest, pkg.decision)
    claimed = pkg.hashes
    mismatches.extend(name for name in COMPONENTS if claimed.get(name) != actual[name])
    manifest_hash = bundle_fingerprint(EvidenceBundle(pkg.bundle_id, pkg.deployment.deployment_id,
                                                      pkg.bundle_manifest))
    if pkg.bundle_fingerprint != manifest_hash:
        mismatches.append('bundle_fingerprint')
    if pkg.policy_fingerprint != actual['policy'] or pkg.decision.policy_fingerprint != actual['policy']:
        mismatches.append('policy_fingerprint')
    if pkg.policy_version != pkg.policy.version:
        mismatches.append('policy_version')
    if pkg.score_vector != pkg.decision.score_vector:
        mismatches.append('score_vector')
    if pkg.package_id != _package_id(claimed):
        mismatches.append('package_id')
    return mismatches


# signed documents

def _parse_signed(data, fields, where):
    doc = parse_canonical(data)
    _expect(isinstance(doc, dict) and set(doc) == set(fields), where, 'expected fields ' + ', '.join(fields))
    _expect(canonicalize(doc) == bytes(data), where, 'not in canonical encoding')
    sig = doc['signature']
    _expect(isinstance(sig, str) and len(sig) == 128 and all(c in '0123456789abcdef' for c in sig), where,
            'signature must be 128 lowercase hex characters')
    key_id = doc['issuer_key_id']
    _expect(isinstance(key_id, str) and len(key_id) == 16 and all(c in '0123456789abcdef' for c in key_id),
            where, 'issuer_key_id must be 16 lowercase hex characters')
    return doc


CERTIFICATE_FIELDS = ('certificate_id', 'deployment_id', 'scope_statement', 'policy_id', 'policy_version',
                      'outcome', 'conditions', 'audit_package_hash', 'issued_at', 'expires_at', 'issuer_key_id',
                      'signature')


@dataclass(frozen=True)
class Certificate:
    certificate_id: str
    deployment_id: str
    scope_statement: str
    policy_id: str
    policy_version: str
    outcome: Outcome
    conditions: tuple
    audit_package_hash: str
    issued_at: int
    expires_at: int
    issuer_key_id: str
    signature: str = ''

    def body_document(self):
        return {
            'certificate_id': self.certificate_id,
            'deployment_id': self.deployment_id,
            'scope_statement': self.scope_statement,
            'policy_id': self.policy_id,
            'policy_version': self.policy_version,
            'outcome': self.outcome.value,
            'conditions': [c.to_document() for c in self.conditions],
            'audit_package_hash': self.audit_package_hash,
            'issued_at': self.issued_at,
            'expires_at': self.expires_at,
            'issuer_key_id': self.issuer_key_id,
        }

    def signed_bytes(self):
        return canonicalize(self.body_document())

    def to_document(self):
        doc = self.body_document()
        doc['signature'] = self.signature
        return doc

    def canonical_bytes(self):
        return canonicalize(self.to_document())

    @property
    def file_name(self):
        return sha256_hex(self.canonical_bytes())


def parse_certificate(data):
    """Strictly parses a certificate file; anything off-shape is :class:`MalformedDocument`"""
    doc = _parse_signed(data, CERTIFICATE_FIELDS, 'certificate')
    for key in ('certificate_id', 'deployment_id', 'scope_statement', 'policy_id', 'policy_version'):
        _expect(isinstance(doc[key], str), 'certificate', key + ' must be a string')
    _expect(_is_int(doc['issued_at']) and _is_int(doc['expires_at']) and doc['issued_at'] < doc['expires_at'],
            'certificate', 'expected integer issued_at < expires_at')
    _expect(is_hex_digest(doc['audit_package_hash']), 'certificate', 'audit_package_hash must be a hex digest')
    _expect(doc['outcome'] in (Outcome.APPROVED.value, Outcome.APPROVED_WITH_CONDITIONS.value), 'certificate',
            'outcome must be APPROVED or APPROVED_WITH_CONDITIONS')
    _expect(isinstance(doc['conditions'], list), 'certificate', 'conditions must be a list')
    return Certificate(
        certificate_id=doc['certificate_id'],
        deployment_id=doc['deployment_id'],
        scope_statement=doc['scope_statement'],
        policy_id=doc['policy_id'],
        policy_version=doc['policy_version'],
        outcome=Outcome(doc['outcome']),
        conditions=tuple(Condition.from_document(c) for c in doc['conditions']),
        audit_package_hash=doc['audit_package_hash'],
        issued_at=doc['issued_at'],
        expires_at=doc['expires_at'],
        issuer_key_id=doc['issuer_key_id'],
        signature=doc['signature'],
    )


def issue_certificate(pkg, signing_key, validity_days, clock):
    """Signs a license to operate for an approved audit package.

    Args:
        `pkg`: AuditPackage whose decision is APPROVED or APPROVED_WITH_CONDITIONS
        `signing_key`: IssuerKey (or raw Ed25519 key / hex seed)
        `validity_days`: int, positive
        `clock`: int, UTC seconds used as issued_at
    """
    if pkg.decision.outcome == Outcome.DENIED:
        raise DeniedDeployment('deployment %s was denied; no certificate' % pkg.deployment.deployment_id)
    if not _is_int(validity_days) or validity_days <= 0:
        raise CertificationError('validity_days must be a positive integer, got %r' % (validity_days,))
    key = as_issuer_key(signing_key)
    package_hash = audit_package_hash(pkg)
    certificate_id = 'cert-' + canonical_hash({'audit_package_hash': package_hash, 'issued_at': clock,
                                               'issuer_key_id': key.key_id})[:32]
    cert = Certificate(
        certificate_id=certificate_id,
        deployment_id=pkg.deployment.deployment_id,
        scope_statement=pkg.deployment.scope_statement,
        policy_id=pkg.policy.policy_id,
        policy_version=pkg.policy_version,
        outcome=pkg.decision.outcome,
        conditions=pkg.decision.conditions,
        audit_package_hash=package_hash,
        issued_at=clock,
        expires_at=clock + validity_days * SECONDS_PER_DAY,
        issuer_key_id=key.key_id,
    )
    signed = replace(cert, signature=key.sign(cert.signed_bytes()))
    logger.info('certificate_issued', certificate_id=certificate_id, deployment_id=cert.deployment_id,
                outcome=cert.outcome.value, expires_at=cert.expires_at)
    return signed


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ''

    def to_document(self):
        return {'name': self.name, 'passed': self.passed, 'detail': self.detail}


@dataclass(frozen=True)
class VerificationReport:
    valid: bool
    checks: tuple

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        return None

    def to_document(self):
        return {'valid': self.valid, 'checks': [c.to_document() for c in self.checks]}


def _signature_check(cert, issuer_public_key):
    try:
        public_key = load_public_key(issuer_public_key)
    except InvalidKey as ex:
        return Check('signature', False, str(ex))
    if key_id_for(public_key) != cert.issuer_key_id:
        return Check('signature', False, 'issuer_key_id %s does not match the supplied key' % cert.issuer_key_id)
    if not verify_signature(public_key, cert.signed_bytes(), cert.signature):
        return Check('signature', False, 'signature does not verify')
    return Check('signature', True)


def _log_checks(cert, issuer_public_key, log_view, clock):
    sth = log_view.sth
    if sth is None:
        inclusion = Check('log_inclusion', False, 'log has no signed tree head')
    elif not verify_tree_head(sth, issuer_public_key):
        inclusion = Check('log_inclusion', False, 'tree head signature does not verify')
    else:
        index = log_view.find_issuance(cert.certificate_id, cert.canonical_bytes())
        if index is None:
            inclusion = Check('log_inclusion', False, 'no issuance entry for %s' % cert.certificate_id)
        else:
            proof = log_view.prove_inclusion(index, sth.tree_size)
            if verify_inclusion(proof, leaf_hash(cert.canonical_bytes()).hex(), sth):
                inclusion = Check('log_inclusion', True, 'leaf %d of %d' % (index, sth.tree_size))
            else:
                inclusion = Check('log_inclusion', False, 'inclusion proof does not verify')
    status = log_view.certificate_status(cert.certificate_id, clock)
    return [inclusion, Check('status', status == CertificateStatus.ACTIVE, status.value)]


def verify_certificate(cert, issuer_public_key, pkg=None, log_view=None, clock=None):
    """Checks a certificate from public material; never raises on a failed check.

    Args:
        `cert`: Certificate
        `issuer_public_key`: Ed25519 public key or its hex form
        `pkg`: AuditPackage to bind against, optional
        `log_view`: LogView to check inclusion and status against, optional
        `clock`: int, UTC seconds; defaults to the system clock
    """
    clock = int(time.time()) if clock is None else clock
    checks = [_signature_check(cert, issuer_public_key)]

    if cert.issued_at < cert.expires_at and clock < cert.expires_at:
        checks.append(Check('expiry', True, 'expires at %d' % cert.expires_at))
    else:
        checks.append(Check('expiry', False, 'expired at %d' % cert.expires_at))

    if pkg is not None:
        actual = audit_package_hash(pkg)
        checks.append(Check('audit_package_hash', actual == cert.audit_package_hash,
                            '' if actual == cert.audit_package_hash else 'package hashes to %s' % actual))
        mismatches = verify_audit_package(pkg)
        checks.append(Check('audit_package_integrity', not mismatches, ', '.join(mismatches)))

    if log_view is not None:
        checks.extend(_log_checks(cert, issuer_public_key, log_view, clock))

    report = VerificationReport(all(c.passed for c in checks), tuple(checks))
    logger.debug('certificate_verified', certificate_id=cert.certificate_id, valid=report.valid,
                 failed=[c.name for c in checks if not c.passed])
    return report


# revocation

class RevocationAction(str, enum.Enum):
    REVOKE = 'REVOKE'
    SUSPEND = 'SUSPEND'
    REINSTATE = 'REINSTATE'


class RevocationReason(str, enum.Enum):
    MATERIAL_INCIDENT = 'MaterialIncident'
    EVIDENCE_INVALID = 'EvidenceInvalid'
    SCOPE_CHANGE = 'ScopeChange'
    POLICY_UPDATE = 'PolicyUpdate'


def _closed(cls, value, where):
    if isinstance(value, cls):
        return value
    try:
        return cls(value)
    except ValueError:
        raise MalformedDocument('%s: unknown value %r, expected one of %s' % (
            where, value, ', '.join(m.value for m in cls)))


REVOCATION_FIELDS = ('certificate_id', 'action', 'reason', 'timestamp', 'issuer_key_id', 'signature')


@dataclass(frozen=True)
class RevocationRecord:
    certificate_id: str
    action: RevocationAction
    reason: RevocationReason
    timestamp: int
    issuer_key_id: str
    signature: str = ''

    def body_document(self):
        return {'certificate_id': self.certificate_id, 'action': self.action.value, 'reason': self.reason.value,
                'timestamp': self.timestamp, 'issuer_key_id': self.issuer_key_id}

    def signed_bytes(self):
        return canonicalize(self.body_document())

    def to_document(self):
        doc = self.body_document()
        doc['signature'] = self.signature
        return doc

    def canonical_bytes(self):
        return canonicalize(self.to_document())

    @property
    def file_name(self):
        return sha256_hex(self.canonical_bytes())


def revoke_certificate(certificate_id, action, reason, signing_key, clock):
    """Signs a REVOKE, SUSPEND or REINSTATE record; it takes effect once logged"""
    key = as_issuer_key(signing_key)
    record = RevocationRecord(certificate_id, _closed(RevocationAction, action, 'action'),
                              _closed(RevocationReason, reason, 'reason'), clock, key.key_id)
    signed = replace(record, signature=key.sign(record.signed_bytes()))
    logger.info('revocation_signed', certificate_id=certificate_id, action=signed.action.value,
                reason=signed.reason.value)
    return signed


def parse_revocation(data):
    doc = _parse_signed(data, REVOCATION_FIELDS, 'revocation')
    _expect(isinstance(doc['certificate_id'], str) and _is_int(doc['timestamp']), 'revocation',
            'certificate_id must be a string and timestamp an integer')
    return RevocationRecord(doc['certificate_id'], _closed(RevocationAction, doc['action'], 'revocation.action'),
                            _closed(RevocationReason, doc['reason'], 'revocation.reason'), doc['timestamp'],
                            doc['issuer_key_id'], doc['signature'])


def verify_revocation(record, issuer_public_key):
    try:
        public_key = load_public_key(issuer_public_key)
    except InvalidKey:
        return False
    return key_id_for(public_key) == record.issuer_key_id and verify_signature(
        public_key, record.signed_bytes(), record.signature)
