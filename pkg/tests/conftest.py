import os

import pytest
import structlog

from adasgate.adas_canonical import canonicalize
from adasgate.adas_certificate import assemble_audit_package, issue_certificate
from adasgate.adas_constants import SECONDS_PER_DAY
from adasgate.adas_decision import authorize
from adasgate.adas_evidence import EvidenceBundle, ObjectStore, append_to_bundle, put_artefact
from adasgate.adas_home import EngineHome
from adasgate.adas_keys import IssuerKey
from adasgate.adas_model import DIMENSIONS, DeploymentDescriptor
from adasgate.adas_policy import PolicyRegistry, parse_policy

#: 2026-01-01T00:00:00Z
CLOCK = 1767225600

POLICY_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'policies')

EU_KINDS = ('ModelCard', 'DataLineage', 'MonitoringPlan', 'RedTeamReport')

DEPLOYMENT_DOC = {
    'deployment_id': 'triage-assist-eu',
    'model_ref': 'triage-model@4f2a',
    'data_refs': ['ehr-extract-2025'],
    'action_space': {'description': 'rank the emergency triage queue', 'tags': ['advisory']},
    'human_oversight': {'mode': 'veto', 'description': 'triage nurse confirms every ranking'},
    'control_mechanisms': {'override': True, 'shutdown': True, 'sandboxed': False,
                           'description': 'ward-level kill switch'},
    'use_context': {'domain': 'healthcare', 'purpose': 'emergency triage'},
    'jurisdiction': 'EU',
    'scope_statement': 'Advisory triage ranking in EU emergency departments',
}


def metrics_document(scores, weight=1):
    """TestReport bytes with one metric per dimension, scores {name: (value, ci_lo, ci_hi)}"""
    return canonicalize({'metrics': [
        {'dimension': name, 'metric_name': name.lower() + '-suite', 'value': v, 'ci_lo': lo, 'ci_hi': hi,
         'weight': weight}
        for name, (v, lo, hi) in sorted(scores.items())]})


@pytest.fixture(autouse=True)
def reset_logging():
    # the command line binds log output to the stderr stream of its invocation
    yield
    structlog.reset_defaults()


@pytest.fixture
def clock():
    return CLOCK


@pytest.fixture
def strong_scores():
    return {d.value: (9000, 8500, 9500) for d in DIMENSIONS}


@pytest.fixture
def policies():
    out = {}
    for name in sorted(os.listdir(POLICY_DIR)):
        with open(os.path.join(POLICY_DIR, name), 'rb') as f:
            out[name[:-len('.json')]] = parse_policy(f.read())
    return out


@pytest.fixture
def eu_policy(policies):
    return policies['eu-healthcare-1.1']


@pytest.fixture
def registry():
    return PolicyRegistry.load_directory(POLICY_DIR)


@pytest.fixture
def store(tmp_path):
    return ObjectStore(str(tmp_path / 'objects'))


@pytest.fixture
def deployment():
    return DeploymentDescriptor.from_document(DEPLOYMENT_DOC)


@pytest.fixture
def build_bundle(store, strong_scores):
    def build(kinds=EU_KINDS, scores=None, age_days=10, bundle_id='eu-bundle', deployment_id='triage-assist-eu'):
        scores = strong_scores if scores is None else scores
        bundle = EvidenceBundle(bundle_id, deployment_id)
        ts = CLOCK - age_days * SECONDS_PER_DAY
        for kind in kinds:
            ref = put_artefact(store, ('%s for %s' % (kind, deployment_id)).encode(), kind, ts, kind.lower())
            bundle = append_to_bundle(bundle, ref, store)
        if scores:
            ref = put_artefact(store, metrics_document(scores), 'TestReport', ts, 'evaluation')
            bundle = append_to_bundle(bundle, ref, store)
        return bundle
    return build


@pytest.fixture
def eu_bundle(build_bundle):
    return build_bundle()


@pytest.fixture(scope='session')
def issuer():
    return IssuerKey.generate()


@pytest.fixture
def certify(deployment, eu_policy, store, issuer):
    """Runs authorize, assembly and issuance; returns (package, certificate)"""
    def run(bundle, now=CLOCK, policy=None, validity_days=365):
        policy = policy or eu_policy
        decision = authorize(deployment, bundle, policy, store, now)
        pkg = assemble_audit_package(policy, deployment, bundle, decision, store)
        return pkg, issue_certificate(pkg, issuer, validity_days, now)
    return run


@pytest.fixture
def home(tmp_path):
    h = EngineHome(str(tmp_path / 'home'))
    os.makedirs(h.root)
    h.init()
    for name in sorted(os.listdir(POLICY_DIR)):
        with open(os.path.join(POLICY_DIR, name), 'rb') as f:
            h.add_policy(f.read())
    return h
