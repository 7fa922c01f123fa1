"""Turns declared metric reports into the five dimension scores.

The engine does not measure models. TestReport artefacts carry metric
reports that already sit on the 0..10000 scale with their own intervals;
a dimension score is the weighted mean of its reports' values and
interval endpoints, rounded half-up once at the end.
"""

from dataclasses import dataclass

import structlog

from .adas_canonical import parse_canonical
from .adas_errors import MalformedDocument, MalformedTestReport, NoMetrics, UnscorableDimension
from .adas_evidence import ArtefactKind
from .adas_model import DIMENSIONS, Dimension, DimensionScore, in_range, make_score_vector

logger = structlog.get_logger(component='adas.scoring')

METRIC_FIELDS = ('dimension', 'metric_name', 'value', 'ci_lo', 'ci_hi', 'weight')


@dataclass(frozen=True)
class MetricReport:
    dimension: Dimension
    metric_name: str
    value: int
    ci_lo: int
    ci_hi: int
    weight: int
    #: content hash of the TestReport this metric came from
    source_artefact: str

    def to_document(self):
        return {'dimension': self.dimension.value, 'metric_name': self.metric_name, 'value': self.value,
                'ci_lo': self.ci_lo, 'ci_hi': self.ci_hi, 'weight': self.weight,
                'source_artefact': self.source_artefact}

    @classmethod
    def from_document(cls, doc):
        if not isinstance(doc, dict) or set(doc) != set(METRIC_FIELDS) | {'source_artefact'}:
            raise MalformedDocument('metric report: expected %s, source_artefact' % ', '.join(METRIC_FIELDS))
        try:
            dimension = Dimension(doc['dimension'])
        except ValueError:
            raise MalformedDocument('metric report: unknown dimension %r' % (doc['dimension'],))
        if not isinstance(doc['metric_name'], str) or not isinstance(doc['source_artefact'], str):
            raise MalformedDocument('metric report: metric_name and source_artefact must be strings')
        if not in_range(doc['value'], doc['ci_lo'], doc['ci_hi']):
            raise MalformedDocument('metric report: expected 0 <= ci_lo <= value <= ci_hi <= 10000')
        weight = doc['weight']
        if isinstance(weight, bool) or not isinstance(weight, int) or weight <= 0:
            raise MalformedDocument('metric report: weight must be a positive integer')
        return cls(dimension, doc['metric_name'], doc['value'], doc['ci_lo'], doc['ci_hi'], doc['weight'],
                   doc['source_artefact'])


def parse_test_report(data, content_hash):
    try:
        doc = parse_canonical(data)
    except MalformedDocument as ex:
        raise MalformedTestReport(content_hash, str(ex))
    if not isinstance(doc, dict) or not isinstance(doc.get('metrics'), list):
        raise MalformedTestReport(content_hash, 'expected a document with a "metrics" list')

    reports = []
    for n, m in enumerate(doc['metrics']):
        if not isinstance(m, dict) or set(m) != set(METRIC_FIELDS):
            raise MalformedTestReport(content_hash, 'metrics[%d]: expected fields %s' % (n, ', '.join(METRIC_FIELDS)))
        try:
            dimension = Dimension(m['dimension'])
        except ValueError:
            raise MalformedTestReport(content_hash, 'metrics[%d]: unknown dimension %r' % (n, m['dimension']))
        if not isinstance(m['metric_name'], str):
            raise MalformedTestReport(content_hash, 'metrics[%d]: metric_name must be a string' % n)
        if not in_range(m['value'], m['ci_lo'], m['ci_hi']):
            raise MalformedTestReport(content_hash, 'metrics[%d]: expected 0 <= ci_lo <= value <= ci_hi <= 10000' % n)
        weight = m['weight']
        if isinstance(weight, bool) or not isinstance(weight, int) or weight <= 0:
            raise MalformedTestReport(content_hash, 'metrics[%d]: weight must be a positive integer' % n)
        reports.append(MetricReport(dimension, m['metric_name'], m['value'], m['ci_lo'], m['ci_hi'], weight,
                                    content_hash))
    return reports


def extract_metric_reports(bundle, store):
    """Parses every TestReport in the bundle, in bundle order"""
    reports = []
    for ref in bundle.of_kind(ArtefactKind.TEST_REPORT):
        reports.extend(parse_test_report(store.get(ref.content_hash), ref.content_hash))
    logger.debug('metrics_extracted', bundle_id=bundle.bundle_id, count=len(reports))
    return reports


def weighted_mean(pairs):
    """Half-up rounded integer mean of (value, weight) pairs with positive weights"""
    num = sum(v * w for v, w in pairs)
    den = sum(w for _, w in pairs)
    return (2 * num + den) // (2 * den)


def score_dimension(reports):
    if not reports:
        raise NoMetrics('no metric reports to score')
    if len({r.dimension for r in reports}) != 1:
        raise ValueError('reports span more than one dimension')
    return DimensionScore(
        weighted_mean([(r.value, r.weight) for r in reports]),
        weighted_mean([(r.ci_lo, r.weight) for r in reports]),
        weighted_mean([(r.ci_hi, r.weight) for r in reports]),
    )


def assemble_score_vector(bundle, store, reports=None):
    """Scores all five dimensions; a dimension without metrics fails the whole vector"""
    if reports is None:
        reports = extract_metric_reports(bundle, store)
    by_dimension = {d: [] for d in DIMENSIONS}
    for r in reports:
        by_dimension[r.dimension].append(r)
    missing = [d.value for d in DIMENSIONS if not by_dimension[d]]
    if missing:
        raise UnscorableDimension(missing)
    entries = {}
    for d in DIMENSIONS:
        s = score_dimension(by_dimension[d])
        entries[d] = (s.value, s.ci_lo, s.ci_hi)
    return make_score_vector(entries)
