"""Authorize(S, J, U): the sufficiency gate, the score gate and the outcome.

Pipeline order is fixed: evidence sufficiency first (no scoring happens on
insufficient evidence), then scoring, the oversight floor, the policy's
decision rule, and finally conditions for marginal dimensions. Failures
along the way become DENIED decisions with machine-readable reasons.
"""

import enum
from dataclasses import dataclass

import structlog

from .adas_constants import ESCALATION_MARKER, SCALE_MAX, SECONDS_PER_DAY, VETO_MODES
from .adas_errors import EvidenceError, IntegrityViolation, MalformedDocument, MalformedTestReport, \
    NotFound, PolicyMismatch, UnscorableDimension
from .adas_evidence import ArtefactKind, check_sufficiency
from .adas_model import DIMENSIONS, Dimension, ScoreVector
from .adas_policy import ConditionKind, Lexicographic, MinGate, MissingEvidenceAction, Weighted, \
    policy_fingerprint
from .adas_scoring import assemble_score_vector

logger = structlog.get_logger(component='adas.decision')


class Outcome(str, enum.Enum):
    APPROVED = 'APPROVED'
    APPROVED_WITH_CONDITIONS = 'APPROVED_WITH_CONDITIONS'
    DENIED = 'DENIED'


@dataclass(frozen=True)
class GateFailure:
    #: None marks the weighted aggregate rather than a single dimension
    dimension: Dimension
    required: int
    observed: int
    ci_gated: bool = False
    stage: int = None

    def reason(self):
        name = self.dimension.value if self.dimension else 'aggregate'
        txt = 'gate:%s:%d<%d' % (name, self.observed, self.required)
        if self.ci_gated:
            txt += ':ci_lo'
        if self.stage is not None:
            txt += ':stage=%d' % self.stage
        return txt


@dataclass(frozen=True)
class GateResult:
    passed: bool
    failing: tuple = ()


def _gate(scores, thresholds, ci_gating, dimensions, stage=None):
    failing = []
    for d in dimensions:
        s = scores[d]
        t = thresholds[d]
        if s.value < t:
            failing.append(GateFailure(d, t, s.value, False, stage))
        elif ci_gating and s.ci_lo < t:
            failing.append(GateFailure(d, t, s.ci_lo, True, stage))
    return failing


def evaluate_min_gate(scores, thresholds, ci_gating):
    """Passes iff every dimension meets its threshold (and its CI lower bound does, under CI gating)"""
    failing = _gate(scores, thresholds, ci_gating, DIMENSIONS)
    return GateResult(not failing, tuple(failing))


def evaluate_lexicographic(scores, stages, base_thresholds, ci_gating=False):
    """Evaluates stages in order; the first failing stage decides.

    Dimensions in no stage form an implicit last stage, min-gated against
    `base_thresholds` with `ci_gating`.
    """
    staged = set()
    for n, stage in enumerate(stages):
        stage_thresholds = dict(stage.thresholds)
        failing = _gate(scores, stage_thresholds, stage.ci_gating, stage.dimensions, n)
        if failing:
            return GateResult(False, tuple(failing))
        staged.update(stage.dimensions)
    remaining = [d for d in DIMENSIONS if d not in staged]
    failing = _gate(scores, base_thresholds, ci_gating, remaining)
    return GateResult(not failing, tuple(failing))


def _weighted_aggregate(values, weights):
    total = sum(w * v for v, w in zip(values, weights))
    return (2 * total + SCALE_MAX) // (2 * SCALE_MAX)


def evaluate_weighted(scores, weights, cutoff, floors, ci_gating):
    """Passes iff the weighted aggregate reaches `cutoff` and no dimension is under its floor.

    Under CI gating both the aggregate and the floors are taken over the
    interval lower bounds.
    """
    ws = [weights[d] for d in DIMENSIONS]
    failing = []
    aggregate = _weighted_aggregate([scores[d].value for d in DIMENSIONS], ws)
    if aggregate < cutoff:
        failing.append(GateFailure(None, cutoff, aggregate, False))
    elif ci_gating:
        lower = _weighted_aggregate([scores[d].ci_lo for d in DIMENSIONS], ws)
        if lower < cutoff:
            failing.append(GateFailure(None, cutoff, lower, True))
    failing.extend(_gate(scores, floors, ci_gating, DIMENSIONS))
    return GateResult(not failing, tuple(failing))


def evaluate_rule(scores, policy):
    rule = policy.rule
    if isinstance(rule, MinGate):
        return evaluate_min_gate(scores, policy.thresholds, rule.ci_gating)
    if isinstance(rule, Lexicographic):
        return evaluate_lexicographic(scores, rule.stages, policy.thresholds, rule.ci_gating)
    if isinstance(rule, Weighted):
        return evaluate_weighted(scores, rule.weights, rule.cutoff, rule.floors, rule.ci_gating)
    raise TypeError('unknown decision rule %r' % (rule,))


@dataclass(frozen=True)
class Condition:
    condition_id: str
    kind: ConditionKind
    #: sorted ((name, value), ...) pairs
    parameters: tuple
    trigger: Dimension
    #: UTC seconds the condition was attached at
    issued_at: int

    @property
    def params(self):
        return dict(self.parameters)

    def to_document(self):
        return {'condition_id': self.condition_id, 'kind': self.kind.value, 'parameters': self.params,
                'trigger': self.trigger.value, 'issued_at': self.issued_at}

    @classmethod
    def from_document(cls, doc):
        try:
            return cls(doc['condition_id'], ConditionKind(doc['kind']), tuple(sorted(doc['parameters'].items())),
                       Dimension(doc['trigger']), doc['issued_at'])
        except (KeyError, TypeError, ValueError, AttributeError) as ex:
            raise MalformedDocument('condition: %s' % ex)


def derive_conditions(scores, policy, issued_at=0):
    """Attaches the condition templates of every marginal dimension.

    A dimension is marginal when threshold <= value < threshold + band.
    """
    conditions = []
    for d in DIMENSIONS:
        t = policy.thresholds[d]
        band = policy.conditional_band[d]
        if band and t <= scores[d].value < t + band:
            for template in policy.templates_for(d):
                conditions.append(Condition(template.condition_id, template.kind, template.parameters, d, issued_at))
    return conditions


@dataclass(frozen=True)
class Decision:
    outcome: Outcome
    conditions: tuple
    reasons: tuple
    policy_fingerprint: str
    #: None when the pipeline stopped before scoring
    score_vector: ScoreVector
    evaluated_at: int

    @property
    def escalated(self):
        return ESCALATION_MARKER in self.reasons

    @property
    def approved(self):
        return self.outcome != Outcome.DENIED

    def to_document(self):
        return {
            'outcome': self.outcome.value,
            'conditions': [c.to_document() for c in self.conditions],
            'reasons': list(self.reasons),
            'policy_fingerprint': self.policy_fingerprint,
            'score_vector': self.score_vector.to_document() if self.score_vector else None,
            'evaluated_at': self.evaluated_at,
        }

    @classmethod
    def from_document(cls, doc):
        if not isinstance(doc, dict):
            raise MalformedDocument('decision: expected map')
        try:
            sv = doc['score_vector']
            return cls(Outcome(doc['outcome']), tuple(Condition.from_document(c) for c in doc['conditions']),
                       tuple(doc['reasons']), doc['policy_fingerprint'],
                       ScoreVector.from_document(sv) if sv is not None else None, doc['evaluated_at'])
        except (KeyError, TypeError, ValueError) as ex:
            raise MalformedDocument('decision: %s' % ex)


def _denied(reasons, fingerprint, now, scores=None):
    return Decision(Outcome.DENIED, (), tuple(reasons), fingerprint, scores, now)


def authorize(deployment, bundle, policy, store, now):
    """Authorises one deployment against one resolved policy.

    Args:
        `deployment`: DeploymentDescriptor, already validated
        `bundle`: EvidenceBundle substantiating the deployment
        `policy`: Policy resolved for the deployment's (jurisdiction, domain)
        `store`: ObjectStore holding the bundle's artefacts
        `now`: int, UTC seconds; the only clock the pipeline sees
    """
    if (policy.jurisdiction, policy.domain) != (deployment.jurisdiction, deployment.use_context.domain):
        raise PolicyMismatch('policy is for (%s, %s), deployment is in (%s, %s)' % (
            policy.jurisdiction, policy.domain, deployment.jurisdiction, deployment.use_context.domain))
    fingerprint = policy_fingerprint(policy)
    log = logger.bind(deployment_id=deployment.deployment_id, policy_id=policy.policy_id,
                      policy_version=policy.version)

    try:
        sufficiency = check_sufficiency(bundle, policy, now, store)
    except IntegrityViolation as ex:
        log.warning('assessment_denied', stage='sufficiency', integrity=ex.content_hash)
        return _denied(['integrity:' + ex.content_hash], fingerprint, now)
    except NotFound as ex:
        return _denied(['evidence:missing-object:' + ex.content_hash], fingerprint, now)
    if not sufficiency.satisfied:
        reasons = ['evidence:' + k.value for k in sufficiency.missing_kinds()]
        if policy.missing_evidence_action == MissingEvidenceAction.ESCALATE:
            reasons.append(ESCALATION_MARKER)
        log.info('assessment_denied', stage='sufficiency', reasons=reasons)
        return _denied(reasons, fingerprint, now)

    try:
        scores = assemble_score_vector(bundle, store)
    except UnscorableDimension as ex:
        return _denied(['scoring:unscorable:' + d for d in ex.dimensions], fingerprint, now)
    except MalformedTestReport as ex:
        return _denied(['scoring:malformed:' + ex.content_hash], fingerprint, now)
    except IntegrityViolation as ex:
        return _denied(['integrity:' + ex.content_hash], fingerprint, now)

    reasons = []
    floor = policy.oversight_floor
    mode = deployment.human_oversight.mode
    if floor is not None and mode.rank < floor.rank:
        reasons.append('oversight:%s<%s' % (mode.value, floor.value))

    gate = evaluate_rule(scores, policy)
    reasons.extend(f.reason() for f in gate.failing)
    if reasons:
        log.info('assessment_denied', stage='gate', reasons=reasons)
        return _denied(reasons, fingerprint, now, scores)

    conditions = derive_conditions(scores, policy, now)
    outcome = Outcome.APPROVED_WITH_CONDITIONS if conditions else Outcome.APPROVED
    log.info('assessment_decided', outcome=outcome.value, conditions=[c.condition_id for c in conditions])
    return Decision(outcome, tuple(conditions), (), fingerprint, scores, now)


def authorize_across(deployment, bundle, policies, store, now):
    """Evaluates one deployment and one evidence bundle under several policies.

    Returns [(policy, decision), ...]; each policy sees the deployment placed
    in its own (jurisdiction, domain).
    """
    return [(p, authorize(deployment.in_context(p.jurisdiction, p.domain), bundle, p, store, now))
            for p in policies]


@dataclass(frozen=True)
class ConditionStatus:
    satisfied: bool
    detail: str = ''

    def to_document(self):
        return {'satisfied': self.satisfied, 'detail': self.detail}


def check_condition(condition, bundle, store, now, deployment=None):
    """Checks one machine-verifiable condition against current evidence"""
    params = condition.params
    if condition.kind == ConditionKind.ENHANCED_LOGGING:
        logs = bundle.of_kind(ArtefactKind.LOG_ATTESTATION)
        if not logs:
            return ConditionStatus(False, 'no LogAttestation in bundle')
        newest = max(logs, key=lambda r: r.timestamp)
        try:
            store.get(newest.content_hash)
        except EvidenceError as ex:
            return ConditionStatus(False, str(ex))
        age = now - newest.timestamp
        if age > params['interval_days'] * SECONDS_PER_DAY:
            return ConditionStatus(False, 'newest LogAttestation is %d days old, limit %d' % (
                age // SECONDS_PER_DAY, params['interval_days']))
        return ConditionStatus(True)

    if condition.kind == ConditionKind.MANDATORY_HUMAN_VETO:
        if deployment is None:
            return ConditionStatus(False, 'no deployment record to check oversight mode')
        mode = deployment.human_oversight.mode.value
        if mode not in VETO_MODES:
            return ConditionStatus(False, 'oversight mode %s is not veto or co-sign' % mode)
        return ConditionStatus(True)

    if condition.kind == ConditionKind.REASSESSMENT:
        deadline = condition.issued_at + params['deadline_days'] * SECONDS_PER_DAY
        if now >= deadline:
            return ConditionStatus(False, 'reassessment was due at %d' % deadline)
        return ConditionStatus(True)

    return ConditionStatus(False, 'unknown condition kind %s' % condition.kind)
