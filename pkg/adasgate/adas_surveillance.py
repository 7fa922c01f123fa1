"""Post-issuance surveillance of a certificate against current evidence.

An authorisation is only as good as the evidence still behind it. Given an
issued certificate, the deployment's current bundle and the policy that
resolves today, :func:`surveil_certificate` recommends the revocation
action the issuer should sign and log, or nothing.
"""

from dataclasses import dataclass

import structlog

from .adas_certificate import RevocationAction, RevocationReason
from .adas_decision import Outcome, authorize, check_condition
from .adas_evidence import ArtefactKind
from .adas_log import CertificateStatus, EntryType

logger = structlog.get_logger(component='adas.surveillance')


@dataclass(frozen=True)
class Recommendation:
    action: RevocationAction
    reason: RevocationReason
    detail: str

    def to_document(self):
        return {'action': self.action.value, 'reason': self.reason.value, 'detail': self.detail}


def _findings(cert, deployment, bundle, policy, store, now):
    incidents = [r for r in bundle.of_kind(ArtefactKind.INCIDENT_REPORT) if r.timestamp >= cert.issued_at]
    if incidents:
        return Recommendation(RevocationAction.REVOKE, RevocationReason.MATERIAL_INCIDENT,
                              'incident report %s' % incidents[0].content_hash)

    decision = authorize(deployment, bundle, policy, store, now)
    if decision.outcome == Outcome.DENIED:
        reason = RevocationReason.EVIDENCE_INVALID
        if policy.version != cert.policy_version:
            reason = RevocationReason.POLICY_UPDATE
        return Recommendation(RevocationAction.SUSPEND, reason, 'reassessment denied: ' + ', '.join(decision.reasons))

    for condition in cert.conditions:
        status = check_condition(condition, bundle, store, now, deployment)
        if not status.satisfied:
            return Recommendation(RevocationAction.SUSPEND, RevocationReason.SCOPE_CHANGE,
                                  '%s violated: %s' % (condition.condition_id, status.detail))
    return None


def _last_suspension_reason(log_view, certificate_id):
    reason = RevocationReason.EVIDENCE_INVALID
    for _, entry_type, doc in log_view.events_for(certificate_id):
        if entry_type == EntryType.REVOCATION_EVENT and doc.get('action') == RevocationAction.SUSPEND.value:
            reason = RevocationReason(doc['reason'])
    return reason


def surveil_certificate(cert, deployment, bundle, policy, store, now, log_view=None):
    """Recommends REVOKE, SUSPEND or REINSTATE for an issued certificate, or None.

    Args:
        `cert`: Certificate under surveillance
        `deployment`: DeploymentDescriptor the certificate was issued for
        `bundle`: EvidenceBundle in its current state
        `policy`: Policy resolved for the deployment today
        `store`: ObjectStore holding the bundle's artefacts
        `now`: int, UTC seconds
        `log_view`: LogView; when given the current status decides whether a
            finding is news (an already suspended certificate is not
            suspended twice, a clean one is reinstated)
    """
    status = CertificateStatus.ACTIVE
    if log_view is not None:
        status = log_view.certificate_status(cert.certificate_id, now)
        if status not in (CertificateStatus.ACTIVE, CertificateStatus.SUSPENDED):
            logger.info('surveillance_skipped', certificate_id=cert.certificate_id, status=status.value)
            return None

    finding = _findings(cert, deployment, bundle, policy, store, now)
    if status == CertificateStatus.SUSPENDED:
        if finding is None:
            finding = Recommendation(RevocationAction.REINSTATE,
                                     _last_suspension_reason(log_view, cert.certificate_id),
                                     'current evidence supports the certificate again')
        elif finding.action == RevocationAction.SUSPEND:
            finding = None
    logger.info('surveillance_completed', certificate_id=cert.certificate_id, status=status.value,
                action=finding.action.value if finding else None)
    return finding
