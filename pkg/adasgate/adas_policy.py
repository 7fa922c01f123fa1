"""Machine-readable jurisdiction/domain policies.

A policy carries the threshold vector, the decision rule, the evidence
requirements and the condition templates for one (jurisdiction, domain)
at one version. Policy documents are canonical JSON; unknown fields are
rejected because a policy is a legal instrument.
"""

import enum
import os
import re
from dataclasses import dataclass

import structlog

from .adas_canonical import canonicalize, parse_canonical, sha256_hex
from .adas_constants import SCALE_MAX
from .adas_errors import (AmbiguousVersion, InvariantError, MalformedDocument, PolicyNotFound,
                          PolicySyntaxError, SchemaError)
from .adas_evidence import ArtefactKind
from .adas_model import DIMENSIONS, Dimension, OversightMode

logger = structlog.get_logger(component='adas.policy')

re_version = re.compile('[0-9]+(\\.[0-9]+)*')

TOP_LEVEL_FIELDS = ('policy_id', 'version', 'jurisdiction', 'domain', 'thresholds', 'rule',
                    'evidence_requirements', 'missing_evidence_action', 'condition_templates',
                    'conditional_band', 'oversight_floor')

OPTIONAL_FIELDS = ('condition_templates', 'conditional_band', 'oversight_floor')


class MissingEvidenceAction(str, enum.Enum):
    DENY = 'DENY'
    ESCALATE = 'ESCALATE'


class ConditionKind(str, enum.Enum):
    ENHANCED_LOGGING = 'EnhancedLogging'
    MANDATORY_HUMAN_VETO = 'MandatoryHumanVeto'
    REASSESSMENT = 'Reassessment'


#: Numeric parameters each condition kind requires
CONDITION_PARAMETERS = {
    ConditionKind.ENHANCED_LOGGING: ('interval_days',),
    ConditionKind.MANDATORY_HUMAN_VETO: (),
    ConditionKind.REASSESSMENT: ('deadline_days',),
}


def parse_version(txt):
    """Parses a dotted-integer version ("1.10") into a comparable tuple"""
    if not isinstance(txt, str) or not re_version.fullmatch(txt):
        raise InvariantError('version %r is not dotted integers' % (txt,))
    return tuple(int(x) for x in txt.split('.'))


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _field(doc, key, kind, where):
    if key not in doc:
        raise SchemaError(where + key, 'required')
    value = doc[key]
    if kind is int:
        if not _is_int(value):
            raise SchemaError(where + key, 'expected integer')
    elif not isinstance(value, kind):
        raise SchemaError(where + key, 'expected ' + kind.__name__)
    return value


def _closed_keys(doc, allowed, where):
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise SchemaError(where + unknown[0], 'unknown field')


def _enum(cls, value, where):
    try:
        return cls(value)
    except ValueError:
        raise SchemaError(where, 'unknown value %r' % (value,))


class ThresholdVector(object):
    """One fixed-point value per Dimension. Also used for bands, weights and floors."""

    __slots__ = ('values',)

    def __init__(self, values):
        object.__setattr__(self, 'values', tuple(values))

    def __setattr__(self, name, value):
        raise AttributeError('ThresholdVector is immutable')

    def __getitem__(self, dimension):
        return self.values[DIMENSIONS.index(Dimension(dimension))]

    def __eq__(self, other):
        return isinstance(other, ThresholdVector) and self.values == other.values

    def __hash__(self):
        return hash(self.values)

    def items(self):
        return zip(DIMENSIONS, self.values)

    def total(self):
        return sum(self.values)

    @classmethod
    def uniform(cls, value):
        return cls([value] * len(DIMENSIONS))

    @classmethod
    def from_document(cls, doc, where, default=None):
        """Reads a dimension map; absent dimensions take `default` when one is given"""
        if not isinstance(doc, dict):
            raise SchemaError(where, 'expected map of dimension to integer')
        _closed_keys(doc, [d.value for d in DIMENSIONS], where + '.')
        values = []
        for d in DIMENSIONS:
            if d.value not in doc:
                if default is None:
                    raise SchemaError(where + '.' + d.value, 'required')
                values.append(default)
                continue
            v = doc[d.value]
            if not _is_int(v):
                raise SchemaError(where + '.' + d.value, 'expected integer')
            if not 0 <= v <= SCALE_MAX:
                raise InvariantError('%s.%s: %d outside 0..%d' % (where, d.value, v, SCALE_MAX))
            values.append(v)
        return cls(values)

    def to_document(self):
        return {d.value: v for d, v in self.items()}

    def __repr__(self):
        return '<ThresholdVector %s>' % ' '.join('%s=%d' % (d.value[0], v) for d, v in self.items())


@dataclass(frozen=True)
class MinGate:
    ci_gating: bool

    def to_document(self):
        return {'type': 'min_gate', 'ci_gating': self.ci_gating}


@dataclass(frozen=True)
class LexicographicStage:
    #: ((Dimension, threshold), ...) in declaration order
    thresholds: tuple
    ci_gating: bool

    @property
    def dimensions(self):
        return tuple(d for d, _ in self.thresholds)

    def to_document(self):
        return {'thresholds': {d.value: t for d, t in self.thresholds}, 'ci_gating': self.ci_gating}


@dataclass(frozen=True)
class Lexicographic:
    stages: tuple
    #: CI gating of the implicit final stage over the remaining dimensions
    ci_gating: bool

    def remaining_dimensions(self):
        staged = {d for s in self.stages for d in s.dimensions}
        return tuple(d for d in DIMENSIONS if d not in staged)

    def to_document(self):
        return {'type': 'lexicographic', 'ci_gating': self.ci_gating,
                'stages': [s.to_document() for s in self.stages]}


@dataclass(frozen=True)
class Weighted:
    weights: ThresholdVector
    cutoff: int
    floors: ThresholdVector
    ci_gating: bool

    def to_document(self):
        return {'type': 'weighted', 'weights': self.weights.to_document(), 'cutoff': self.cutoff,
                'floors': self.floors.to_document(), 'ci_gating': self.ci_gating}


def _parse_rule(doc):
    where = 'rule.'
    if not isinstance(doc, dict):
        raise SchemaError('rule', 'expected map')
    kind = _field(doc, 'type', str, where)
    if kind == 'min_gate':
        _closed_keys(doc, ('type', 'ci_gating'), where)
        return MinGate(_field(doc, 'ci_gating', bool, where))

    if kind == 'lexicographic':
        _closed_keys(doc, ('type', 'ci_gating', 'stages'), where)
        stages = []
        seen = set()
        for n, sdoc in enumerate(_field(doc, 'stages', list, where)):
            swhere = 'rule.stages[%d].' % n
            if not isinstance(sdoc, dict):
                raise SchemaError(swhere[:-1], 'expected map')
            _closed_keys(sdoc, ('thresholds', 'ci_gating'), swhere)
            tdoc = _field(sdoc, 'thresholds', dict, swhere)
            if not tdoc:
                raise InvariantError('%sthresholds: a stage needs at least one dimension' % swhere)
            pairs = []
            for d in DIMENSIONS:
                if d.value in tdoc:
                    if d in seen:
                        raise InvariantError('%s appears in more than one lexicographic stage' % d.value)
                    seen.add(d)
            partial = ThresholdVector.from_document(tdoc, swhere + 'thresholds', default=0)
            for d in DIMENSIONS:
                if d.value in tdoc:
                    pairs.append((d, partial[d]))
            stages.append(LexicographicStage(tuple(pairs), _field(sdoc, 'ci_gating', bool, swhere)))
        return Lexicographic(tuple(stages), _field(doc, 'ci_gating', bool, where))

    if kind == 'weighted':
        _closed_keys(doc, ('type', 'weights', 'cutoff', 'floors', 'ci_gating'), where)
        weights = ThresholdVector.from_document(_field(doc, 'weights', dict, where), 'rule.weights')
        if weights.total() != SCALE_MAX:
            raise InvariantError('rule.weights sum to %d, expected %d' % (weights.total(), SCALE_MAX))
        cutoff = _field(doc, 'cutoff', int, where)
        if not 0 <= cutoff <= SCALE_MAX:
            raise InvariantError('rule.cutoff %d outside 0..%d' % (cutoff, SCALE_MAX))
        floors = ThresholdVector.from_document(doc.get('floors', {}), 'rule.floors', default=0)
        return Weighted(weights, cutoff, floors, _field(doc, 'ci_gating', bool, where))

    raise SchemaError('rule.type', 'unknown rule %r' % (kind,))


@dataclass(frozen=True)
class EvidenceRequirement:
    kind: ArtefactKind
    min_count: int
    max_age_days: int = None

    def to_document(self):
        return {'kind': self.kind.value, 'min_count': self.min_count, 'max_age_days': self.max_age_days}


def _parse_requirement(doc, n):
    where = 'evidence_requirements[%d].' % n
    if not isinstance(doc, dict):
        raise SchemaError(where[:-1], 'expected map')
    _closed_keys(doc, ('kind', 'min_count', 'max_age_days'), where)
    kind = _enum(ArtefactKind, _field(doc, 'kind', str, where), where + 'kind')
    min_count = _field(doc, 'min_count', int, where)
    if min_count < 1:
        raise InvariantError('%smin_count must be at least 1' % where)
    max_age = doc.get('max_age_days')
    if max_age is not None:
        if not _is_int(max_age):
            raise SchemaError(where + 'max_age_days', 'expected integer or null')
        if max_age < 1:
            raise InvariantError('%smax_age_days must be at least 1' % where)
    return EvidenceRequirement(kind, min_count, max_age)


@dataclass(frozen=True)
class ConditionTemplate:
    condition_id: str
    kind: ConditionKind
    #: sorted ((name, value), ...) pairs
    parameters: tuple
    trigger: Dimension

    @property
    def params(self):
        return dict(self.parameters)

    def to_document(self):
        return {'condition_id': self.condition_id, 'kind': self.kind.value,
                'parameters': self.params, 'trigger': self.trigger.value}


def _parse_template(doc, n):
    where = 'condition_templates[%d].' % n
    if not isinstance(doc, dict):
        raise SchemaError(where[:-1], 'expected map')
    _closed_keys(doc, ('condition_id', 'kind', 'parameters', 'trigger'), where)
    kind = _enum(ConditionKind, _field(doc, 'kind', str, where), where + 'kind')
    params = _field(doc, 'parameters', dict, where)
    _closed_keys(params, CONDITION_PARAMETERS[kind], where + 'parameters.')
    for name in CONDITION_PARAMETERS[kind]:
        value = _field(params, name, int, where + 'parameters.')
        if value < 1:
            raise InvariantError('%sparameters.%s must be positive' % (where, name))
    condition_id = _field(doc, 'condition_id', str, where)
    if not condition_id:
        raise SchemaError(where + 'condition_id', 'required')
    return ConditionTemplate(condition_id, kind, tuple(sorted(params.items())),
                             _enum(Dimension, _field(doc, 'trigger', str, where), where + 'trigger'))


@dataclass(frozen=True)
class Policy:
    policy_id: str
    version: str
    jurisdiction: str
    domain: str
    thresholds: ThresholdVector
    rule: object
    evidence_requirements: tuple
    missing_evidence_action: MissingEvidenceAction
    condition_templates: tuple = ()
    conditional_band: ThresholdVector = ThresholdVector.uniform(0)
    oversight_floor: OversightMode = None

    @property
    def version_key(self):
        return parse_version(self.version)

    def templates_for(self, dimension):
        return [t for t in self.condition_templates if t.trigger == dimension]

    def to_document(self):
        return {
            'policy_id': self.policy_id,
            'version': self.version,
            'jurisdiction': self.jurisdiction,
            'domain': self.domain,
            'thresholds': self.thresholds.to_document(),
            'rule': self.rule.to_document(),
            'evidence_requirements': [r.to_document() for r in self.evidence_requirements],
            'missing_evidence_action': self.missing_evidence_action.value,
            'condition_templates': [t.to_document() for t in self.condition_templates],
            'conditional_band': self.conditional_band.to_document(),
            'oversight_floor': self.oversight_floor.value if self.oversight_floor else None,
        }


def policy_from_document(doc):
    if not isinstance(doc, dict):
        raise SchemaError('policy', 'expected map')
    _closed_keys(doc, TOP_LEVEL_FIELDS, '')
    for key in TOP_LEVEL_FIELDS:
        if key not in doc and key not in OPTIONAL_FIELDS:
            raise SchemaError(key, 'required')

    for key in ('policy_id', 'jurisdiction', 'domain'):
        if not _field(doc, key, str, ''):
            raise SchemaError(key, 'required')
    version = _field(doc, 'version', str, '')
    parse_version(version)

    thresholds = ThresholdVector.from_document(doc['thresholds'], 'thresholds')
    band = ThresholdVector.from_document(doc.get('conditional_band', {}), 'conditional_band', default=0)
    for d, t in thresholds.items():
        if t + band[d] > SCALE_MAX:
            raise InvariantError('%s: threshold %d + band %d exceeds %d' % (d.value, t, band[d], SCALE_MAX))

    requirements = tuple(_parse_requirement(r, n)
                         for n, r in enumerate(_field(doc, 'evidence_requirements', list, '')))
    templates = tuple(_parse_template(t, n)
                      for n, t in enumerate(doc.get('condition_templates', []) or []))
    ids = [t.condition_id for t in templates]
    if len(set(ids)) != len(ids):
        raise InvariantError('condition_templates: duplicate condition_id')

    floor = doc.get('oversight_floor')
    if floor is not None:
        if not isinstance(floor, str):
            raise SchemaError('oversight_floor', 'expected string or null')
        floor = _enum(OversightMode, floor, 'oversight_floor')

    return Policy(
        policy_id=doc['policy_id'],
        version=version,
        jurisdiction=doc['jurisdiction'],
        domain=doc['domain'],
        thresholds=thresholds,
        rule=_parse_rule(doc['rule']),
        evidence_requirements=requirements,
        missing_evidence_action=_enum(MissingEvidenceAction, _field(doc, 'missing_evidence_action', str, ''),
                                      'missing_evidence_action'),
        condition_templates=templates,
        conditional_band=band,
        oversight_floor=floor,
    )


def parse_policy(data):
    """Parses and validates a policy document.

    Raises :class:`PolicySyntaxError` for malformed bytes, :class:`SchemaError`
    for missing or unknown fields and :class:`InvariantError` for documents
    that are well formed but inconsistent.
    """
    try:
        doc = parse_canonical(data)
    except MalformedDocument as ex:
        raise PolicySyntaxError(str(ex))
    return policy_from_document(doc)


def serialize_policy(policy):
    return canonicalize(policy.to_document())


def policy_fingerprint(policy):
    """SHA-256 of the canonical encoding; stable across reserialization"""
    return sha256_hex(serialize_policy(policy))


class PolicyRegistry(dict):
    """Maps (jurisdiction, domain) to every loaded version of that policy.

    Reads may happen concurrently; writes follow the single-writer contract
    of the engine home.
    """

    def add(self, policy):
        versions = self.setdefault((policy.jurisdiction, policy.domain), [])
        fingerprint = policy_fingerprint(policy)
        if any(policy_fingerprint(p) == fingerprint for p in versions):
            return
        versions.append(policy)
        logger.debug('policy_registered', policy_id=policy.policy_id, jurisdiction=policy.jurisdiction,
                     domain=policy.domain, version=policy.version, fingerprint=fingerprint)

    def __setitem__(self, key, val):
        if not isinstance(val, list):
            raise TypeError('PolicyRegistry values are lists of policies; use add()')
        dict.__setitem__(self, key, val)

    def update(self, *args, **kwargs):
        raise NotImplementedError('update not supported for PolicyRegistry, use add()')

    def policies(self):
        return [p for versions in self.values() for p in versions]

    @classmethod
    def load_directory(cls, path):
        registry = cls()
        if os.path.isdir(path):
            for name in sorted(os.listdir(path)):
                if not name.endswith('.json'):
                    continue
                with open(os.path.join(path, name), 'rb') as f:
                    registry.add(parse_policy(f.read()))
        return registry


def resolve_policy(registry, jurisdiction, domain, version=None):
    """Returns the exact version when one is given, else the highest version"""
    candidates = registry.get((jurisdiction, domain), [])
    if version is not None:
        wanted = parse_version(version)
        candidates = [p for p in candidates if p.version_key == wanted]
    if not candidates:
        raise PolicyNotFound(jurisdiction, domain, version)
    top = max(p.version_key for p in candidates)
    chosen = [p for p in candidates if p.version_key == top]
    if len(chosen) > 1:
        raise AmbiguousVersion(jurisdiction, domain, chosen[0].version)
    logger.info('policy_resolved', policy_id=chosen[0].policy_id, jurisdiction=jurisdiction,
                domain=domain, version=chosen[0].version)
    return chosen[0]
