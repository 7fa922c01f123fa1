from dataclasses import replace

import pytest

from adasgate.adas_certificate import RevocationAction, RevocationReason, revoke_certificate
from adasgate.adas_constants import SECONDS_PER_DAY
from adasgate.adas_evidence import append_to_bundle, put_artefact
from adasgate.adas_log import EntryType, LogEntry, TransparencyLog
from adasgate.adas_policy import ThresholdVector
from adasgate.adas_surveillance import surveil_certificate

from conftest import CLOCK

DAY = SECONDS_PER_DAY


@pytest.fixture
def issued(certify, eu_bundle):
    _, cert = certify(eu_bundle)
    return cert


def test_clean_certificate(issued, deployment, eu_bundle, eu_policy, store):
    assert surveil_certificate(issued, deployment, eu_bundle, eu_policy, store, CLOCK + DAY) is None


def test_incident_revokes(issued, deployment, eu_bundle, eu_policy, store):
    ref = put_artefact(store, b'patient harmed by ranking', 'IncidentReport', CLOCK + 3 * DAY)
    bundle = append_to_bundle(eu_bundle, ref, store)
    rec = surveil_certificate(issued, deployment, bundle, eu_policy, store, CLOCK + 4 * DAY)
    assert (rec.action, rec.reason) == (RevocationAction.REVOKE, RevocationReason.MATERIAL_INCIDENT)
    assert ref.content_hash in rec.detail


def test_old_incident_is_not_news(issued, deployment, eu_bundle, eu_policy, store):
    ref = put_artefact(store, b'incident before approval', 'IncidentReport', CLOCK - DAY)
    bundle = append_to_bundle(eu_bundle, ref, store)
    assert surveil_certificate(issued, deployment, bundle, eu_policy, store, CLOCK + DAY) is None


def test_stale_evidence_suspends(issued, deployment, eu_bundle, eu_policy, store):
    rec = surveil_certificate(issued, deployment, eu_bundle, eu_policy, store, CLOCK + 200 * DAY)
    assert (rec.action, rec.reason) == (RevocationAction.SUSPEND, RevocationReason.EVIDENCE_INVALID)
    assert 'evidence:RedTeamReport' in rec.detail


def test_policy_update_suspends(issued, deployment, eu_bundle, eu_policy, store):
    stricter = replace(eu_policy, version='1.2', thresholds=ThresholdVector.uniform(9500))
    rec = surveil_certificate(issued, deployment, eu_bundle, stricter, store, CLOCK + DAY)
    assert (rec.action, rec.reason) == (RevocationAction.SUSPEND, RevocationReason.POLICY_UPDATE)


def test_violated_condition_suspends(certify, build_bundle, strong_scores, deployment, eu_policy, store):
    bundle = build_bundle(scores=dict(strong_scores, Risk=(7600, 7550, 7700)))
    _, cert = certify(bundle)
    assert surveil_certificate(cert, deployment, bundle, eu_policy, store, CLOCK + 89 * DAY) is None
    rec = surveil_certificate(cert, deployment, bundle, eu_policy, store, CLOCK + 91 * DAY)
    assert (rec.action, rec.reason) == (RevocationAction.SUSPEND, RevocationReason.SCOPE_CHANGE)
    assert rec.detail.startswith('eu-hc-reassessment violated')


@pytest.fixture
def log(tmp_path, issued, issuer):
    log = TransparencyLog(str(tmp_path / 'log'), issuer)
    log.append(LogEntry(EntryType.ISSUANCE, issued.canonical_bytes()), CLOCK)
    return log


def record(log, issued, issuer, action, reason, when):
    r = revoke_certificate(issued.certificate_id, action, reason, issuer, when)
    log.append(LogEntry(EntryType.REVOCATION_EVENT, r.canonical_bytes()), when)


def test_suspended_and_clean_is_reinstated(log, issued, issuer, deployment, eu_bundle, eu_policy, store):
    record(log, issued, issuer, 'SUSPEND', 'ScopeChange', CLOCK + DAY)
    rec = surveil_certificate(issued, deployment, eu_bundle, eu_policy, store, CLOCK + 2 * DAY, log)
    assert (rec.action, rec.reason) == (RevocationAction.REINSTATE, RevocationReason.SCOPE_CHANGE)


def test_suspended_is_not_suspended_again(log, issued, issuer, deployment, eu_bundle, eu_policy, store):
    record(log, issued, issuer, 'SUSPEND', 'EvidenceInvalid', CLOCK + DAY)
    assert surveil_certificate(issued, deployment, eu_bundle, eu_policy, store, CLOCK + 200 * DAY, log) is None


def test_revoked_is_left_alone(log, issued, issuer, deployment, eu_bundle, eu_policy, store):
    record(log, issued, issuer, 'REVOKE', 'MaterialIncident', CLOCK + DAY)
    assert surveil_certificate(issued, deployment, eu_bundle, eu_policy, store, CLOCK + 200 * DAY, log) is None


def test_active_in_log_behaves_as_without(log, issued, deployment, eu_bundle, eu_policy, store):
    rec = surveil_certificate(issued, deployment, eu_bundle, eu_policy, store, CLOCK + 200 * DAY, log)
    assert rec.action == RevocationAction.SUSPEND
