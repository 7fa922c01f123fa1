import os

import pytest

from adasgate.adas_constants import SECONDS_PER_DAY
from adasgate.adas_errors import (DuplicateEntry, EmptyArtefact, IntegrityViolation, NotFound, StorageFailure,
                                  UnknownArtefact, UnknownArtefactKind)
from adasgate.adas_evidence import (ArtefactKind, ArtefactRef, BundleStore, EvidenceBundle, append_to_bundle,
                                    bundle_fingerprint, check_sufficiency, get_artefact, parse_manifest,
                                    manifest_bytes, put_artefact)

from conftest import CLOCK, EU_KINDS

ABC = 'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad'


def test_put_is_content_addressed(store):
    ref = put_artefact(store, b'abc', 'ModelCard', CLOCK, 'card')
    assert ref.content_hash == ABC
    assert ref.size_bytes == 3 and ref.kind == ArtefactKind.MODEL_CARD
    assert os.path.isfile(os.path.join(store.root, 'ba', ABC[2:]))
    assert get_artefact(store, ABC) == b'abc'


def test_put_is_idempotent(store):
    put_artefact(store, b'abc', 'ModelCard', CLOCK)
    put_artefact(store, b'abc', 'SystemCard', CLOCK)
    assert store.object_count() == 1


def test_empty_artefact(store):
    with pytest.raises(EmptyArtefact):
        put_artefact(store, b'', 'ModelCard', CLOCK)


def test_unknown_kind(store):
    with pytest.raises(UnknownArtefactKind):
        put_artefact(store, b'abc', 'Horoscope', CLOCK)


def test_missing_object(store):
    with pytest.raises(NotFound):
        get_artefact(store, 'ab' * 32)


def test_tampered_object(store):
    put_artefact(store, b'abc', 'ModelCard', CLOCK)
    with open(store.path_for(ABC), 'wb') as f:
        f.write(b'abd')
    with pytest.raises(IntegrityViolation) as ex:
        get_artefact(store, ABC)
    assert ex.value.content_hash == ABC
    assert store.verify_store() == [(ABC, ex.value.actual_hash)]


def test_append_creates_new_state(store):
    empty = EvidenceBundle('b1', 'dep-1')
    ref = put_artefact(store, b'model card', 'ModelCard', CLOCK)
    one = append_to_bundle(empty, ref, store)
    assert empty.entries == () and one.entries == (ref,)


def test_append_rejects_duplicates(store):
    ref = put_artefact(store, b'model card', 'ModelCard', CLOCK)
    bundle = append_to_bundle(EvidenceBundle('b1', 'dep-1'), ref, store)
    with pytest.raises(DuplicateEntry):
        append_to_bundle(bundle, ref, store)


def test_append_rejects_unstored(store):
    ref = ArtefactRef('cd' * 32, ArtefactKind.MODEL_CARD, CLOCK, 10)
    with pytest.raises(UnknownArtefact):
        append_to_bundle(EvidenceBundle('b1', 'dep-1'), ref, store)


def test_fingerprint_depends_on_order(store):
    a = put_artefact(store, b'first', 'ModelCard', CLOCK)
    b = put_artefact(store, b'second', 'DataLineage', CLOCK)
    ab = append_to_bundle(append_to_bundle(EvidenceBundle('x', 'd'), a, store), b, store)
    ba = append_to_bundle(append_to_bundle(EvidenceBundle('x', 'd'), b, store), a, store)
    assert bundle_fingerprint(ab) != bundle_fingerprint(ba)
    assert bundle_fingerprint(ab) == bundle_fingerprint(EvidenceBundle('other', 'd', ab.entries))
    assert parse_manifest(manifest_bytes(ab)) == ab.entries


def test_bundle_store_round_trip(tmp_path, store, eu_bundle):
    bundles = BundleStore(str(tmp_path / 'bundles'))
    bundles.create(eu_bundle.bundle_id, eu_bundle.deployment_id)
    bundles.save(eu_bundle)
    loaded = bundles.load(eu_bundle.bundle_id)
    assert loaded == eu_bundle
    assert bundle_fingerprint(loaded) == bundle_fingerprint(eu_bundle)


def test_bundle_store_is_append_only(tmp_path, eu_bundle):
    bundles = BundleStore(str(tmp_path / 'bundles'))
    bundles.create(eu_bundle.bundle_id, eu_bundle.deployment_id)
    bundles.save(eu_bundle)
    with pytest.raises(StorageFailure):
        bundles.save(EvidenceBundle(eu_bundle.bundle_id, eu_bundle.deployment_id, eu_bundle.entries[1:]))
    with pytest.raises(StorageFailure):
        bundles.create(eu_bundle.bundle_id, 'someone-else')


def test_bundle_store_unknown(tmp_path):
    with pytest.raises(NotFound):
        BundleStore(str(tmp_path / 'bundles')).load('nope')


def test_sufficient_bundle(eu_bundle, eu_policy, store):
    report = check_sufficiency(eu_bundle, eu_policy, CLOCK, store)
    assert report.satisfied
    assert [s.found_count for s in report.per_requirement] == [1, 1, 1, 1]


def test_stale_red_team_report(build_bundle, eu_policy):
    report = check_sufficiency(build_bundle(age_days=200), eu_policy, CLOCK)
    assert not report.satisfied
    assert report.missing_kinds() == [ArtefactKind.RED_TEAM_REPORT]
    red_team = report.per_requirement[3]
    assert (red_team.found_count, red_team.fresh_count) == (1, 0)
    assert report.action_on_failure == 'DENY'


def test_freshness_boundary_is_inclusive(build_bundle, eu_policy):
    assert check_sufficiency(build_bundle(age_days=180), eu_policy, CLOCK).satisfied
    late = check_sufficiency(build_bundle(age_days=180), eu_policy, CLOCK + 1)
    assert not late.satisfied


def test_missing_kind(build_bundle, eu_policy):
    report = check_sufficiency(build_bundle(kinds=EU_KINDS[:2]), eu_policy, CLOCK)
    assert report.missing_kinds() == [ArtefactKind.MONITORING_PLAN, ArtefactKind.RED_TEAM_REPORT]


def test_sufficiency_detects_tampering(eu_bundle, eu_policy, store):
    with open(store.path_for(eu_bundle.entries[0].content_hash), 'ab') as f:
        f.write(b'!')
    with pytest.raises(IntegrityViolation):
        check_sufficiency(eu_bundle, eu_policy, CLOCK, store)


def test_sufficiency_monotone_in_evidence(store, build_bundle, eu_policy):
    partial = build_bundle(kinds=EU_KINDS[:3])
    assert not check_sufficiency(partial, eu_policy, CLOCK).satisfied
    ref = put_artefact(store, b'late red team', 'RedTeamReport', CLOCK - 5 * SECONDS_PER_DAY)
    assert check_sufficiency(append_to_bundle(partial, ref, store), eu_policy, CLOCK).satisfied
