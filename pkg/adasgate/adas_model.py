"""Deployment descriptors, the five ADAS dimensions and score vectors.

A deployment is the unit of authorisation: a model in a use context under a
jurisdiction. Scores are fixed-point hundredths (0..10000) so that every
hashed record canonicalizes bit-exactly.
"""

import enum
import os
from dataclasses import dataclass, field, replace

import structlog

from .adas_canonical import canonicalize, parse_canonical
from .adas_constants import OVERSIGHT_ORDER, SCALE_MAX
from .adas_errors import MalformedDocument, MissingDimension, RangeViolation

logger = structlog.get_logger(component='adas.model')


class Dimension(str, enum.Enum):
    RISK = 'Risk'
    ALIGNMENT = 'Alignment'
    EXTERNALITY = 'Externality'
    CONTROL = 'Control'
    AUDITABILITY = 'Auditability'

    @classmethod
    def parse(cls, txt):
        try:
            return cls(txt)
        except ValueError:
            raise MalformedDocument('unknown dimension %r' % (txt,))


#: Dimensions in their declaration order
DIMENSIONS = tuple(Dimension)


class OversightMode(str, enum.Enum):
    NONE = 'none'
    REVIEW = 'review'
    VETO = 'veto'
    CO_SIGN = 'co-sign'

    @property
    def rank(self):
        return OVERSIGHT_ORDER.index(self.value)

    @classmethod
    def parse(cls, txt):
        try:
            return cls(txt)
        except ValueError:
            raise MalformedDocument('unknown oversight mode %r' % (txt,))


def _require(doc, key, kind, where):
    if not isinstance(doc, dict) or key not in doc:
        raise MalformedDocument('%s.%s: required' % (where, key))
    value = doc[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise MalformedDocument('%s.%s: expected %s' % (where, key, kind.__name__))
    return value


@dataclass(frozen=True)
class HumanOversight:
    mode: OversightMode
    description: str = ''


@dataclass(frozen=True)
class ControlMechanisms:
    override: bool
    shutdown: bool
    sandboxed: bool
    description: str = ''


@dataclass(frozen=True)
class UseContext:
    domain: str
    purpose: str = ''


@dataclass(frozen=True)
class DeploymentDescriptor:
    """The deployment tuple (model, data, actions, oversight, controls, use)
    plus the jurisdiction it is evaluated under."""

    deployment_id: str
    model_ref: str
    data_refs: tuple
    action_space: str
    action_tags: tuple
    human_oversight: HumanOversight
    control_mechanisms: ControlMechanisms
    use_context: UseContext
    jurisdiction: str
    scope_statement: str

    def in_context(self, jurisdiction, domain):
        """Returns the same deployment evaluated under another jurisdiction and domain"""
        return replace(self, jurisdiction=jurisdiction, use_context=replace(self.use_context, domain=domain))

    def to_document(self):
        return {
            'deployment_id': self.deployment_id,
            'model_ref': self.model_ref,
            'data_refs': list(self.data_refs),
            'action_space': {'description': self.action_space, 'tags': list(self.action_tags)},
            'human_oversight': {'mode': self.human_oversight.mode.value,
                                'description': self.human_oversight.description},
            'control_mechanisms': {'override': self.control_mechanisms.override,
                                   'shutdown': self.control_mechanisms.shutdown,
                                   'sandboxed': self.control_mechanisms.sandboxed,
                                   'description': self.control_mechanisms.description},
            'use_context': {'domain': self.use_context.domain, 'purpose': self.use_context.purpose},
            'jurisdiction': self.jurisdiction,
            'scope_statement': self.scope_statement,
        }

    @classmethod
    def from_document(cls, doc):
        where = 'deployment'
        action = _require(doc, 'action_space', dict, where)
        oversight = _require(doc, 'human_oversight', dict, where)
        controls = _require(doc, 'control_mechanisms', dict, where)
        use = _require(doc, 'use_context', dict, where)
        data_refs = _require(doc, 'data_refs', list, where)
        tags = action.get('tags', [])
        if not isinstance(tags, list) or not all(isinstance(x, str) for x in data_refs + tags):
            raise MalformedDocument('deployment: data_refs and action_space.tags must be strings')
        return cls(
            deployment_id=_require(doc, 'deployment_id', str, where),
            model_ref=_require(doc, 'model_ref', str, where),
            data_refs=tuple(data_refs),
            action_space=_require(action, 'description', str, where + '.action_space'),
            action_tags=tuple(tags),
            human_oversight=HumanOversight(
                OversightMode.parse(_require(oversight, 'mode', str, where + '.human_oversight')),
                oversight.get('description', '')),
            control_mechanisms=ControlMechanisms(
                _require(controls, 'override', bool, where + '.control_mechanisms'),
                _require(controls, 'shutdown', bool, where + '.control_mechanisms'),
                _require(controls, 'sandboxed', bool, where + '.control_mechanisms'),
                controls.get('description', '')),
            use_context=UseContext(_require(use, 'domain', str, where + '.use_context'), use.get('purpose', '')),
            jurisdiction=_require(doc, 'jurisdiction', str, where),
            scope_statement=_require(doc, 'scope_statement', str, where),
        )


def load_deployment(data):
    return DeploymentDescriptor.from_document(parse_canonical(data))


@dataclass(frozen=True)
class DimensionScore:
    value: int
    ci_lo: int
    ci_hi: int

    def __post_init__(self):
        if not in_range(self.value, self.ci_lo, self.ci_hi):
            raise RangeViolation('?', self.value, self.ci_lo, self.ci_hi)

    def to_document(self):
        return {'value': self.value, 'ci_lo': self.ci_lo, 'ci_hi': self.ci_hi}


def in_range(value, ci_lo, ci_hi):
    """True iff 0 <= ci_lo <= value <= ci_hi <= 10000 over plain integers"""
    for x in (value, ci_lo, ci_hi):
        if isinstance(x, bool) or not isinstance(x, int):
            return False
    return 0 <= ci_lo <= value <= ci_hi <= SCALE_MAX


@dataclass(frozen=True)
class ScoreVector:
    """One DimensionScore per Dimension, stored in declaration order"""

    scores: tuple = field(repr=False)

    def __getitem__(self, dimension):
        return self.scores[DIMENSIONS.index(Dimension(dimension))]

    def items(self):
        return zip(DIMENSIONS, self.scores)

    def to_document(self):
        return {d.value: s.to_document() for d, s in self.items()}

    @classmethod
    def from_document(cls, doc):
        if not isinstance(doc, dict):
            raise MalformedDocument('score_vector: expected map')
        extra = [k for k in doc if k not in {d.value for d in DIMENSIONS}]
        if extra:
            raise MalformedDocument('score_vector: unknown dimension(s) ' + ', '.join(sorted(extra)))
        entries = {}
        for name, s in doc.items():
            entries[Dimension(name)] = (_require(s, 'value', int, name), _require(s, 'ci_lo', int, name),
                                        _require(s, 'ci_hi', int, name))
        return make_score_vector(entries)

    def __repr__(self):
        return '<ScoreVector %s>' % ' '.join(
            '%s=%d[%d,%d]' % (d.value[0], s.value, s.ci_lo, s.ci_hi) for d, s in self.items())


def make_score_vector(entries):
    """Builds a validated ScoreVector.

    Args:
        `entries`: mapping of Dimension (or its name) to (value, ci_lo, ci_hi)
    """
    keyed = {Dimension(k): v for k, v in entries.items()}
    missing = [d.value for d in DIMENSIONS if d not in keyed]
    if missing:
        raise MissingDimension(missing)
    scores = []
    for d in DIMENSIONS:
        value, ci_lo, ci_hi = keyed[d]
        if not in_range(value, ci_lo, ci_hi):
            raise RangeViolation(d.value, value, ci_lo, ci_hi)
        scores.append(DimensionScore(value, ci_lo, ci_hi))
    return ScoreVector(tuple(scores))


@dataclass(frozen=True)
class Finding:
    field: str
    rule: str

    def __str__(self):
        return '%s: %s' % (self.field, self.rule)


def validate_deployment(d, store=None):
    """Returns the list of findings for a descriptor; empty means valid.

    When a `store` is given, an id already held by the store with different
    content is reported as not unique.
    """
    findings = []
    for name, value in (('deployment_id', d.deployment_id),
                        ('model_ref', d.model_ref),
                        ('jurisdiction', d.jurisdiction),
                        ('use_context.domain', d.use_context.domain),
                        ('scope_statement', d.scope_statement)):
        if not value.strip():
            findings.append(Finding(name, 'required'))
    if '/' in d.deployment_id or d.deployment_id.startswith('.'):
        findings.append(Finding('deployment_id', 'not a valid file name'))
    if not isinstance(d.human_oversight.mode, OversightMode):
        findings.append(Finding('human_oversight.mode', 'unknown mode'))
    if store is not None and d.deployment_id and store.conflicts(d):
        findings.append(Finding('deployment_id', 'not unique'))
    return findings


class DeploymentStore:
    """Deployment descriptors keyed by id, optionally persisted under a directory"""

    def __init__(self, root=None):
        self.root = root
        self._items = {}
        if root:
            os.makedirs(root, exist_ok=True)
            for name in sorted(os.listdir(root)):
                with open(os.path.join(root, name), 'rb') as f:
                    d = load_deployment(f.read())
                self._items[d.deployment_id] = d

    def __contains__(self, deployment_id):
        return deployment_id in self._items

    def get(self, deployment_id):
        return self._items.get(deployment_id)

    def conflicts(self, d):
        held = self._items.get(d.deployment_id)
        return held is not None and held != d

    def insert(self, d):
        """Stores a descriptor; returns findings and stores nothing if any"""
        findings = validate_deployment(d, self)
        if findings:
            logger.warning('deployment_rejected', deployment_id=d.deployment_id,
                           findings=[str(f) for f in findings])
            return findings
        if d.deployment_id not in self._items and self.root:
            with open(os.path.join(self.root, d.deployment_id + '.json'), 'wb') as f:
                f.write(canonicalize(d.to_document()))
        self._items[d.deployment_id] = d
        return findings
