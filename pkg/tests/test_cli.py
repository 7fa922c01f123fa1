import os

import pytest
from click.testing import CliRunner

from adasgate.adas_canonical import canonicalize, parse_canonical
from adasgate.adas_cli import cli, main
from adasgate.adas_constants import SECONDS_PER_DAY

from conftest import CLOCK, DEPLOYMENT_DOC, EU_KINDS, POLICY_DIR, metrics_document

ARTEFACT_TIME = CLOCK - 10 * SECONDS_PER_DAY


class Engine(object):
    """Drives the command line against one home"""

    def __init__(self, tmp_path):
        self.tmp = tmp_path
        self.home = str(tmp_path / 'home')
        self.runner = CliRunner()

    def run(self, *args, clock=CLOCK):
        return self.runner.invoke(cli, ['--home', self.home, '--clock', str(clock)] + [str(a) for a in args])

    def doc(self, *args, clock=CLOCK, code=0):
        result = self.run(*args, clock=clock)
        assert result.exit_code == code, result.output
        return parse_canonical(result.stdout)

    def file(self, name, data):
        path = self.tmp / name
        path.write_bytes(data)
        return str(path)

    def bundle(self, bundle_id='eu-bundle', kinds=EU_KINDS, scores=None):
        self.doc('evidence', 'bundle-create', bundle_id, DEPLOYMENT_DOC['deployment_id'])
        for kind in kinds:
            path = self.file(kind + '.txt', ('%s for triage' % kind).encode())
            self.doc('evidence', 'bundle-append', bundle_id, path, '--kind', kind, '--timestamp', ARTEFACT_TIME)
        if scores:
            path = self.file(bundle_id + '-eval.json', metrics_document(scores))
            self.doc('evidence', 'bundle-append', bundle_id, path, '--kind', 'TestReport',
                     '--timestamp', ARTEFACT_TIME)

    def deployment_file(self, **changes):
        return self.file('deployment.json', canonicalize(dict(DEPLOYMENT_DOC, **changes)))


@pytest.fixture
def engine(tmp_path):
    e = Engine(tmp_path)
    e.doc('init')
    for name in sorted(os.listdir(POLICY_DIR)):
        e.doc('policy', 'add', os.path.join(POLICY_DIR, name))
    return e


@pytest.fixture
def approved(engine, strong_scores):
    engine.bundle(scores=strong_scores)
    return engine.doc('assess', engine.deployment_file(), 'eu-bundle')


def test_init_is_idempotent(tmp_path):
    e = Engine(tmp_path)
    first = e.doc('init')
    assert len(first['issuer_key_id']) == 16
    assert e.doc('init')['issuer_key_id'] == first['issuer_key_id']
    for d in ('objects', 'bundles', 'policies', 'packages', 'certs', 'log', 'keys', 'deployments'):
        assert os.path.isdir(os.path.join(e.home, d))


def test_keygen_needs_force(engine):
    result = engine.run('keygen')
    assert result.exit_code == 1
    assert 'force' in result.stderr
    assert len(engine.doc('keygen', '--force')['public_key']) == 64


def test_uninitialized_home(tmp_path):
    result = Engine(tmp_path).run('evidence', 'put', __file__, '--kind', 'ModelCard')
    assert result.exit_code == 1
    assert 'init' in result.stderr


def test_policy_commands(engine):
    doc = engine.doc('policy', 'fingerprint', os.path.join(POLICY_DIR, 'eu-healthcare-1.1.json'))
    assert doc['fingerprint'] == 'e51ba64b528c4a1b7b14e2469abfc5b32dc328f79b56952ce23e12693d4ad294'
    assert engine.doc('policy', 'show', '--jurisdiction', 'EU', '--domain', 'healthcare')['version'] == '1.1'
    shown = engine.doc('policy', 'show', '--jurisdiction', 'EU', '--domain', 'healthcare', '--version', '1.0')
    assert shown['thresholds']['Risk'] == 7000
    assert engine.run('policy', 'show', '--jurisdiction', 'US', '--domain', 'logistics').exit_code == 1


def test_bad_policy_file(engine):
    result = engine.run('policy', 'add', engine.file('bad.json', b'{"policy_id":"x"}'))
    assert result.exit_code == 1
    assert 'SchemaError' in result.stderr


def test_evidence_put(engine):
    doc = engine.doc('evidence', 'put', engine.file('abc.txt', b'abc'), '--kind', 'ModelCard', '--label', 'card')
    assert doc['content_hash'] == 'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad'
    assert (doc['timestamp'], doc['size_bytes'], doc['label']) == (CLOCK, 3, 'card')
    assert engine.run('evidence', 'put', engine.file('empty.txt', b''), '--kind', 'ModelCard').exit_code == 1


def test_bundle_append_by_hash(engine):
    ref = engine.doc('evidence', 'put', engine.file('card.txt', b'model card'), '--kind', 'ModelCard')
    engine.doc('evidence', 'bundle-create', 'b1', 'dep-1')
    doc = engine.doc('evidence', 'bundle-append', 'b1', ref['content_hash'], '--kind', 'ModelCard')
    assert [e['content_hash'] for e in doc['entries']] == [ref['content_hash']]
    assert engine.run('evidence', 'bundle-append', 'b1', ref['content_hash'], '--kind', 'ModelCard').exit_code == 1
    assert engine.doc('evidence', 'bundle-show', 'b1')['fingerprint'] == doc['fingerprint']


def test_evidence_verify_detects_tampering(engine):
    ref = engine.doc('evidence', 'put', engine.file('card.txt', b'model card'), '--kind', 'ModelCard')
    assert engine.doc('evidence', 'verify') == {'tampered': []}
    h = ref['content_hash']
    with open(os.path.join(engine.home, 'objects', h[:2], h[2:]), 'wb') as f:
        f.write(b'model card, edited')
    doc = engine.doc('evidence', 'verify', code=2)
    assert [t['path'] for t in doc['tampered']] == [os.path.join('objects', h[:2], h[2:])]


def test_assess_approves_and_logs(approved):
    assert approved['decision']['outcome'] == 'APPROVED'
    assert approved['leaf_index'] == 0
    cert = approved['certificate']
    assert cert['audit_package_hash'] == approved['audit_package_hash']
    assert cert['expires_at'] == CLOCK + 365 * SECONDS_PER_DAY


def test_assess_denies_missing_evidence(engine, strong_scores):
    engine.bundle(kinds=('ModelCard', 'DataLineage', 'RedTeamReport'), scores=strong_scores)
    doc = engine.doc('assess', engine.deployment_file(), 'eu-bundle', code=2)
    assert doc['decision']['reasons'] == ['evidence:MonitoringPlan']
    assert doc['decision']['score_vector'] is None
    assert doc['certificate'] is None
    assert engine.run('log', 'sth').exit_code == 1


def test_assess_under_another_jurisdiction(engine, strong_scores):
    engine.bundle(scores=strong_scores)
    doc = engine.doc('assess', engine.deployment_file(), 'eu-bundle', '--jurisdiction', 'US',
                     '--domain', 'critical-infrastructure', code=2)
    assert 'escalation:human-review' in doc['decision']['reasons']


def test_assess_conflicting_deployment(approved, engine):
    result = engine.run('assess', engine.deployment_file(model_ref='triage-model@ffff'), 'eu-bundle')
    assert result.exit_code == 1
    assert 'not unique' in result.stderr


def test_failed_assessment_registers_nothing(engine, strong_scores):
    engine.bundle(scores=strong_scores)
    result = engine.run('assess', engine.deployment_file(), 'eu-bundle', '--jurisdiction', 'XX')
    assert result.exit_code == 1
    assert os.listdir(os.path.join(engine.home, 'deployments')) == []
    doc = engine.doc('assess', engine.deployment_file(model_ref='triage-model@ffff'), 'eu-bundle')
    assert doc['decision']['outcome'] == 'APPROVED'


def test_certificate_lifecycle(approved, engine):
    cert_id = approved['certificate']['certificate_id']
    assert engine.doc('cert', 'status', cert_id)['status'] == 'ACTIVE'
    assert engine.doc('cert', 'show', cert_id) == approved['certificate']

    cert_file = engine.file('cert.json', canonicalize(approved['certificate']))
    report = engine.doc('cert', 'verify', cert_file, '--from-home')
    assert report['valid'] and report['certificate_id'] == cert_id
    assert {c['name'] for c in report['checks']} == {'signature', 'expiry', 'audit_package_hash',
                                                     'audit_package_integrity', 'log_inclusion', 'status'}

    doc = engine.doc('cert', 'revoke', cert_id, '--action', 'SUSPEND', '--reason', 'ScopeChange')
    assert (doc['status'], doc['leaf_index']) == ('SUSPENDED', 1)
    assert engine.doc('cert', 'status', cert_id, code=2)['status'] == 'SUSPENDED'
    engine.doc('cert', 'revoke', cert_id, '--action', 'REINSTATE', '--reason', 'ScopeChange')
    assert engine.doc('cert', 'status', cert_id)['status'] == 'ACTIVE'
    engine.doc('cert', 'revoke', cert_id, '--reason', 'MaterialIncident')
    assert engine.doc('cert', 'status', cert_id, code=2)['status'] == 'REVOKED'
    report = engine.doc('cert', 'verify', cert_file, '--from-home', code=2)
    assert [c['name'] for c in report['checks'] if not c['passed']] == ['status']


def test_status_unknown_and_expired(approved, engine):
    assert engine.doc('cert', 'status', 'cert-nope', code=1)['status'] == 'UNKNOWN'
    cert_id = approved['certificate']['certificate_id']
    later = CLOCK + 366 * SECONDS_PER_DAY
    assert engine.doc('cert', 'status', cert_id, clock=later, code=2)['status'] == 'EXPIRED'


def test_verify_with_public_material(approved, engine, tmp_path):
    cert_file = engine.file('cert.json', canonicalize(approved['certificate']))
    package = os.path.join(engine.home, 'packages', approved['audit_package_hash'])
    public = os.path.join(engine.home, 'keys', 'issuer.pub')
    stranger = Engine(tmp_path / 'elsewhere')
    report = stranger.doc('cert', 'verify', cert_file, '--public-key', public, '--package', package,
                          '--log', os.path.join(engine.home, 'log'))
    assert report['valid']


def test_verify_tampered_certificate(approved, engine):
    forged = dict(approved['certificate'], scope_statement='Autonomous triage everywhere')
    result = engine.run('cert', 'verify', engine.file('forged.json', canonicalize(forged)))
    assert result.exit_code == 2
    report = parse_canonical(result.stdout)
    assert [c['name'] for c in report['checks'] if not c['passed']] == ['signature']


def test_verify_malformed_certificate(engine):
    assert engine.run('cert', 'verify', engine.file('junk.json', b'{"certificate_id":1}')).exit_code == 1


def test_revoke_unknown_certificate(engine):
    assert engine.run('cert', 'revoke', 'cert-nope', '--reason', 'ScopeChange').exit_code == 1


def test_log_proofs(approved, engine):
    engine.doc('cert', 'revoke', approved['certificate']['certificate_id'], '--action', 'SUSPEND',
               '--reason', 'EvidenceInvalid')
    sth = engine.doc('log', 'sth')
    assert sth['tree_size'] == 2
    proof = engine.doc('log', 'prove-inclusion', 0, 2)
    assert (proof['leaf_index'], proof['tree_size'], len(proof['audit_path'])) == (0, 2, 1)
    assert engine.doc('log', 'prove-consistency', 1, 2)['path'] != []
    assert engine.run('log', 'prove-inclusion', 2, 2).exit_code == 1
    assert engine.run('log', 'prove-consistency', 0, 2).exit_code == 1


def test_surveil(approved, engine):
    cert_id = approved['certificate']['certificate_id']
    assert engine.doc('cert', 'surveil', cert_id)['recommendation'] is None
    later = CLOCK + 200 * SECONDS_PER_DAY
    doc = engine.doc('cert', 'surveil', cert_id, clock=later)
    assert doc['recommendation']['action'] == 'SUSPEND' and doc['record'] is None
    doc = engine.doc('cert', 'surveil', cert_id, '--apply', clock=later)
    assert doc['record']['reason'] == 'EvidenceInvalid'
    assert engine.doc('cert', 'status', cert_id, clock=later, code=2)['status'] == 'SUSPENDED'


def test_pretty_format(engine):
    result = engine.run('--format', 'pretty', 'policy', 'fingerprint',
                        os.path.join(POLICY_DIR, 'eu-healthcare-1.0.json'))
    assert result.exit_code == 0
    assert result.stdout.startswith('{\n  "fingerprint": ')


def test_bad_clock(engine):
    result = engine.runner.invoke(cli, ['--home', engine.home, '--clock', 'yesterday', 'log', 'sth'])
    assert result.exit_code == 1


def test_usage_errors_are_operational():
    with pytest.raises(SystemExit) as ex:
        main(['cert', 'revoke'])
    assert ex.value.code == 1
