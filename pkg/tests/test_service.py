import pytest
from fastapi.testclient import TestClient

from adasgate.adas_canonical import parse_canonical
from adasgate.adas_certificate import revoke_certificate
from adasgate.adas_errors import StorageFailure
from adasgate.adas_home import AdasConfig, EngineHome
from adasgate.adas_log import EntryType, InclusionProof, LogEntry, SignedTreeHead, verify_inclusion
from adasgate.adas_service import create_app, parse_bind

from conftest import CLOCK


@pytest.fixture
def published(home, certify, eu_bundle):
    pkg, cert = certify(eu_bundle)
    package_hash = home.save_package(pkg)
    with home.lock():
        log = home.transparency_log()
        log.append(LogEntry(EntryType.ISSUANCE, cert.canonical_bytes()), CLOCK)
        record = revoke_certificate(cert.certificate_id, 'SUSPEND', 'ScopeChange', home.signing_key(), CLOCK + 1)
        log.append(LogEntry(EntryType.REVOCATION_EVENT, record.canonical_bytes()), CLOCK + 1)
    return package_hash, cert


@pytest.fixture
def client(home):
    return TestClient(create_app(home, AdasConfig(home=home.root, clock=CLOCK + 2)))


def test_empty_log(client):
    response = client.get('/sth')
    assert response.status_code == 404
    assert response.json() == {'error': 'log is empty', 'status': 404}


def test_tree_head(published, client, home):
    response = client.get('/sth')
    assert response.status_code == 200
    assert response.headers['content-type'].startswith('application/json')
    sth = SignedTreeHead.from_document(parse_canonical(response.content))
    assert sth.tree_size == 2 and sth.issuer_key_id == home.signing_key().key_id


def test_certificate_status(published, client):
    _, cert = published
    doc = client.get('/certificates/%s/status' % cert.certificate_id).json()
    assert doc == {'certificate_id': cert.certificate_id, 'status': 'SUSPENDED', 'tree_size': 2}
    assert client.get('/certificates/cert-unknown/status').status_code == 404


def test_inclusion_proof(published, client):
    _, cert = published
    doc = client.get('/proofs/inclusion', params={'index': 0, 'size': 2}).json()
    sth = SignedTreeHead.from_document(client.get('/sth').json())
    assert doc['leaf_hash'] == LogEntry(EntryType.ISSUANCE, cert.canonical_bytes()).leaf_hash
    assert verify_inclusion(InclusionProof.from_document(doc), doc['leaf_hash'], sth)


@pytest.mark.parametrize('params', [{'index': 2, 'size': 2}, {'index': 0, 'size': 3}, {'index': 'x', 'size': 1},
                                    {'size': 1}])
def test_inclusion_bad_query(published, client, params):
    response = client.get('/proofs/inclusion', params=params)
    assert response.status_code == 400
    assert response.json()['status'] == 400


def test_consistency_proof(published, client):
    doc = client.get('/proofs/consistency', params={'old': 1, 'new': 2}).json()
    assert (doc['old_size'], doc['new_size'], len(doc['path'])) == (1, 2, 1)
    assert client.get('/proofs/consistency', params={'old': 0, 'new': 2}).status_code == 400


def test_audit_package(published, client):
    package_hash, cert = published
    response = client.get('/packages/' + package_hash)
    assert response.status_code == 200
    assert parse_canonical(response.content)['package_id'].startswith('pkg-')
    assert client.get('/packages/' + '0' * 64).status_code == 404
    assert client.get('/packages/not-a-hash').status_code == 400


def test_unknown_route(client):
    assert client.get('/certificates').status_code == 404


def test_uninitialized_home(tmp_path):
    with pytest.raises(StorageFailure):
        create_app(EngineHome(str(tmp_path)))


def test_parse_bind():
    assert parse_bind('0.0.0.0:9000') == ('0.0.0.0', 9000)
    assert parse_bind(None) == ('127.0.0.1', 8750)
    with pytest.raises(ValueError):
        parse_bind('localhost')
