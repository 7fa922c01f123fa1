"""Exception hierarchy for the authorisation engine.

Every error raised by the library derives from :class:`AdasError`, so the
command line can map the whole family to its operational exit code.
"""


class AdasError(Exception):
    """Base class of all engine errors"""


# core-model

class ModelError(AdasError):
    pass


class MissingDimension(ModelError):

    def __init__(self, dimensions):
        self.dimensions = tuple(dimensions)
        ModelError.__init__(self, 'missing dimension(s): ' + ', '.join(self.dimensions))


class RangeViolation(ModelError):

    def __init__(self, dimension, value, ci_lo, ci_hi):
        self.dimension = dimension
        ModelError.__init__(
            self, '%s: expected 0 <= ci_lo <= value <= ci_hi <= 10000, got (%r, %r, %r)'
            % (dimension, value, ci_lo, ci_hi))


# policy-engine

class PolicyError(AdasError):
    pass


class PolicySyntaxError(PolicyError):
    """The policy document is not a well-formed canonical document"""


class SchemaError(PolicyError):
    """A field is missing, unknown, or of the wrong type"""

    def __init__(self, field, message):
        self.field = field
        PolicyError.__init__(self, '%s: %s' % (field, message))


class InvariantError(PolicyError):
    """The document is well formed but breaks a policy invariant"""


class PolicyNotFound(PolicyError):

    def __init__(self, jurisdiction, domain, version=None):
        self.jurisdiction = jurisdiction
        self.domain = domain
        self.version = version
        PolicyError.__init__(self, 'no policy for (%s, %s)%s' % (
            jurisdiction, domain, ' version ' + version if version else ''))


class AmbiguousVersion(PolicyError):

    def __init__(self, jurisdiction, domain, version):
        self.jurisdiction = jurisdiction
        self.domain = domain
        self.version = version
        PolicyError.__init__(self, 'two policies claim (%s, %s) version %s' % (jurisdiction, domain, version))


# evidence-store

class EvidenceError(AdasError):
    pass


class StorageFailure(EvidenceError):
    pass


class EmptyArtefact(EvidenceError):
    pass


class NotFound(EvidenceError):

    def __init__(self, content_hash):
        self.content_hash = content_hash
        EvidenceError.__init__(self, 'no object ' + content_hash)


class IntegrityViolation(EvidenceError):
    """Stored bytes no longer hash to their address"""

    def __init__(self, content_hash, actual_hash):
        self.content_hash = content_hash
        self.actual_hash = actual_hash
        EvidenceError.__init__(self, 'object %s re-hashes to %s' % (content_hash, actual_hash))


class UnknownArtefact(EvidenceError):

    def __init__(self, content_hash):
        self.content_hash = content_hash
        EvidenceError.__init__(self, 'artefact %s was never stored' % content_hash)


class UnknownArtefactKind(EvidenceError):
    pass


class DuplicateEntry(EvidenceError):

    def __init__(self, content_hash):
        self.content_hash = content_hash
        EvidenceError.__init__(self, 'artefact %s already in bundle' % content_hash)


# scoring

class ScoringError(AdasError):
    pass


class MalformedTestReport(ScoringError):

    def __init__(self, content_hash, message):
        self.content_hash = content_hash
        ScoringError.__init__(self, 'test report %s: %s' % (content_hash, message))


class NoMetrics(ScoringError):
    pass


class UnscorableDimension(ScoringError):

    def __init__(self, dimensions):
        self.dimensions = tuple(dimensions)
        ScoringError.__init__(self, 'no metrics for: ' + ', '.join(self.dimensions))


# decision

class DecisionError(AdasError):
    pass


class PolicyMismatch(DecisionError):
    pass


# certification

class CertificationError(AdasError):
    pass


class UnencodableValue(CertificationError):
    pass


class HashMismatch(CertificationError):
    pass


class DeniedDeployment(CertificationError):
    pass


class InvalidKey(CertificationError):
    pass


class MalformedDocument(CertificationError):
    """Bytes that are not a canonical document, or a document of the wrong shape"""


# transparency-log

class LogError(AdasError):
    pass


class IndexOutOfRange(LogError):
    pass


class SizeOutOfRange(LogError):
    pass
