"""The ``adas`` command line.

Writes go through here only, each under the home's exclusive lock. Every
machine output is one document on stdout; diagnostics and logs go to
stderr. Exit codes: 0 success or approval, 1 operational error, 2 a
governance refusal (denied, revoked, failed verification).
"""

import functools
import os
import sys

import click
import structlog

from .adas_canonical import canonicalize, is_hex_digest, pretty
from .adas_certificate import (assemble_audit_package, issue_certificate, parse_audit_package,
                               parse_certificate, revoke_certificate, verify_certificate, RevocationAction,
                               RevocationReason)
from .adas_constants import DEFAULT_BIND, EXIT_DENIED, EXIT_ERROR, EXIT_OK, OUTPUT_FORMATS, PRIVATE_KEY_FILE
from .adas_decision import authorize
from .adas_errors import AdasError, NotFound, StorageFailure
from .adas_evidence import ArtefactKind, append_to_bundle, bundle_fingerprint, put_artefact
from .adas_home import AdasConfig, EngineHome, parse_clock
from .adas_keys import load_public_key, load_public_key_file
from .adas_log import CertificateStatus, EntryType, LogEntry, LogView
from .adas_logging import LEVELS, configure_logging
from .adas_model import load_deployment, validate_deployment
from .adas_policy import parse_policy, policy_fingerprint, resolve_policy
from .adas_surveillance import surveil_certificate

logger = structlog.get_logger(component='adas.cli')

ARTEFACT_KINDS = [k.value for k in ArtefactKind]


class Session(object):
    """Per-invocation state handed to every command"""

    def __init__(self, config):
        self.config = config
        self.home = EngineHome(config.home)

    def now(self):
        return self.config.now()

    def emit(self, doc):
        if self.config.output_format == 'pretty':
            click.echo(pretty(doc))
        else:
            click.echo(canonicalize(doc).decode('utf-8'))


def guarded(fn):
    """Maps engine and I/O failures to exit 1 with a one-line diagnostic"""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (AdasError, OSError, ValueError) as ex:
            logger.debug('command_failed', error=type(ex).__name__)
            click.echo('error: %s: %s' % (type(ex).__name__, ex), err=True)
            sys.exit(EXIT_ERROR)
    return wrapper


def _read(path):
    with open(path, 'rb') as f:
        return f.read()


_pass_session = click.make_pass_decorator(Session)


@click.group()
@click.option('--home', type=click.Path(file_okay=False), help='Engine home directory. Defaults to $ADAS_HOME or ".".')
@click.option('--clock', help='UTC override: epoch seconds or YYYY-MM-DDTHH:MM:SSZ.')
@click.option('--format', 'output_format', type=click.Choice(OUTPUT_FORMATS), help='Output encoding.')
@click.option('--log-level', type=click.Choice(LEVELS, case_sensitive=False), help='stderr log threshold.')
@click.pass_context
def cli(ctx, home, clock, output_format, log_level):
    """AI deployment authorisation: evidence, decisions, certificates and the transparency log."""
    try:
        config = AdasConfig.from_environment()
        if home is not None:
            config.home = home
        if clock is not None:
            config.clock = parse_clock(clock)
        if output_format is not None:
            config.output_format = output_format
        if log_level is not None:
            config.log_level = log_level.upper()
    except AdasError as ex:
        click.echo('error: %s' % ex, err=True)
        sys.exit(EXIT_ERROR)
    configure_logging(config.log_level)
    ctx.obj = Session(config)


@cli.command()
@_pass_session
@guarded
def init(session):
    """Create the home layout and the issuer keypair."""
    os.makedirs(session.home.root, exist_ok=True)
    with session.home.lock():
        key_id = session.home.init()
    session.emit({'home': session.home.root, 'issuer_key_id': key_id})


@cli.command()
@click.option('--force', is_flag=True, help='Replace an existing issuer key.')
@_pass_session
@guarded
def keygen(session, force):
    """Create a new issuer keypair under keys/."""
    session.home.require_initialized()
    with session.home.lock():
        private = session.home.path('keys', PRIVATE_KEY_FILE)
        if os.path.exists(private):
            if not force:
                raise StorageFailure('issuer key exists; pass --force to replace it')
            os.remove(private)
        key = session.home.keygen()
    session.emit({'issuer_key_id': key.key_id, 'public_key': key.public_hex()})


# policies

@cli.group()
def policy():
    """Jurisdiction/domain policies."""


@policy.command('add')
@click.argument('policy_file', type=click.Path(exists=True, dir_okay=False))
@_pass_session
@guarded
def policy_add(session, policy_file):
    session.home.require_initialized()
    with session.home.lock():
        p = session.home.add_policy(_read(policy_file))
    session.emit({'policy_id': p.policy_id, 'version': p.version, 'jurisdiction': p.jurisdiction,
                  'domain': p.domain, 'fingerprint': policy_fingerprint(p)})


@policy.command('show')
@click.option('--jurisdiction', required=True)
@click.option('--domain', required=True)
@click.option('--version', 'version', default=None, help='Exact version; defaults to the highest.')
@_pass_session
@guarded
def policy_show(session, jurisdiction, domain, version):
    session.emit(resolve_policy(session.home.registry(), jurisdiction, domain, version).to_document())


@policy.command('fingerprint')
@click.argument('policy_file', type=click.Path(exists=True, dir_okay=False))
@_pass_session
@guarded
def policy_fingerprint_cmd(session, policy_file):
    session.emit({'fingerprint': policy_fingerprint(parse_policy(_read(policy_file)))})


# evidence

@cli.group()
def evidence():
    """Content-addressed artefacts and evidence bundles."""


def _bundle_document(bundle):
    return {'bundle_id': bundle.bundle_id, 'deployment_id': bundle.deployment_id,
            'fingerprint': bundle_fingerprint(bundle), 'entries': bundle.manifest()}


@evidence.command('put')
@click.argument('artefact_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--kind', required=True, type=click.Choice(ARTEFACT_KINDS))
@click.option('--label', default='')
@click.option('--timestamp', type=int, default=None, help='Artefact time; defaults to the clock.')
@_pass_session
@guarded
def evidence_put(session, artefact_file, kind, label, timestamp):
    session.home.require_initialized()
    with session.home.lock():
        ref = put_artefact(session.home.objects(), _read(artefact_file), kind,
                           session.now() if timestamp is None else timestamp, label)
    session.emit(ref.to_document())


@evidence.command('bundle-create')
@click.argument('bundle_id')
@click.argument('deployment_id')
@_pass_session
@guarded
def evidence_bundle_create(session, bundle_id, deployment_id):
    session.home.require_initialized()
    with session.home.lock():
        bundle = session.home.bundles().create(bundle_id, deployment_id)
    session.emit(_bundle_document(bundle))


@evidence.command('bundle-append')
@click.argument('bundle_id')
@click.argument('source')
@click.option('--kind', required=True, type=click.Choice(ARTEFACT_KINDS))
@click.option('--label', default='')
@click.option('--timestamp', type=int, default=None, help='Artefact time; defaults to the clock.')
@_pass_session
@guarded
def evidence_bundle_append(session, bundle_id, source, kind, label, timestamp):
    """Append SOURCE (a file, or the hash of a stored object) to a bundle."""
    session.home.require_initialized()
    timestamp = session.now() if timestamp is None else timestamp
    with session.home.lock():
        store = session.home.objects()
        bundles = session.home.bundles()
        bundle = bundles.load(bundle_id)
        if is_hex_digest(source) and not os.path.exists(source):
            data = store.get(source)
        else:
            data = _read(source)
        ref = put_artefact(store, data, kind, timestamp, label)
        bundle = append_to_bundle(bundle, ref, store)
        bundles.save(bundle)
    session.emit(_bundle_document(bundle))


@evidence.command('bundle-show')
@click.argument('bundle_id')
@_pass_session
@guarded
def evidence_bundle_show(session, bundle_id):
    session.emit(_bundle_document(session.home.bundles().load(bundle_id)))


@evidence.command('verify')
@_pass_session
@guarded
def evidence_verify(session):
    """Re-hash every content-addressed file in the home."""
    session.home.require_initialized()
    bad = session.home.verify_files()
    session.emit({'tampered': [{'path': p, 'actual_hash': h} for p, h in bad]})
    sys.exit(EXIT_DENIED if bad else EXIT_OK)


# assessment

def run_assessment(session, deployment_file, bundle_id, jurisdiction=None, domain=None, version=None):
    """authorize, assemble, and when approved certify and log. Returns (exit code, document)."""
    home = session.home
    home.require_initialized()
    now = session.now()
    registered = load_deployment(_read(deployment_file))
    deployment = registered
    if jurisdiction or domain:
        deployment = registered.in_context(jurisdiction or registered.jurisdiction,
                                           domain or registered.use_context.domain)

    with home.lock():
        deployments = home.deployments()
        findings = validate_deployment(registered, deployments)
        if findings:
            raise StorageFailure('invalid deployment: ' + '; '.join(str(f) for f in findings))
        store = home.objects()
        bundle = home.bundles().load(bundle_id)
        if bundle.deployment_id != deployment.deployment_id:
            raise StorageFailure('bundle %s belongs to deployment %s' % (bundle_id, bundle.deployment_id))
        p = resolve_policy(home.registry(), deployment.jurisdiction, deployment.use_context.domain, version)
        # registered only once an assessment can actually run
        deployments.insert(registered)
        decision = authorize(deployment, bundle, p, store, now)
        pkg = assemble_audit_package(p, deployment, bundle, decision, store, bundle_fingerprint(bundle))
        package_hash = home.save_package(pkg)
        doc = {'decision': decision.to_document(), 'audit_package_hash': package_hash, 'certificate': None,
               'leaf_index': None}
        if not decision.approved:
            return EXIT_DENIED, doc

        cert = issue_certificate(pkg, home.signing_key(), session.config.validity_days, now)
        home.save_certificate(cert)
        leaf_index, _ = home.transparency_log().append(LogEntry(EntryType.ISSUANCE, cert.canonical_bytes()), now)
        doc['certificate'] = cert.to_document()
        doc['leaf_index'] = leaf_index
    return EXIT_OK, doc


@cli.command()
@click.argument('deployment_file', type=click.Path(exists=True, dir_okay=False))
@click.argument('bundle_id')
@click.option('--jurisdiction', default=None, help="Defaults to the deployment's own.")
@click.option('--domain', default=None, help="Defaults to the deployment's use-context domain.")
@click.option('--policy-version', default=None)
@_pass_session
@guarded
def assess(session, deployment_file, bundle_id, jurisdiction, domain, policy_version):
    """Authorise a deployment against its evidence bundle."""
    code, doc = run_assessment(session, deployment_file, bundle_id, jurisdiction, domain, policy_version)
    session.emit(doc)
    sys.exit(code)


# certificates

@cli.group()
def cert():
    """Certificates and their revocation."""


def run_verify(session, certificate_file, public_key=None, package_file=None, log_dir=None, from_home=False):
    """Verifies from public material. Returns (exit code, report document)."""
    certificate = parse_certificate(_read(certificate_file))
    if public_key is not None:
        issuer = load_public_key_file(public_key) if os.path.isfile(public_key) else load_public_key(public_key)
    else:
        issuer = session.home.public_key()

    pkg = None
    if package_file is not None:
        pkg = parse_audit_package(_read(package_file))
    elif from_home:
        try:
            pkg = parse_audit_package(session.home.get_document('packages', certificate.audit_package_hash))
        except NotFound:
            pkg = None

    view = None
    if log_dir is not None:
        view = LogView.open(log_dir)
    elif from_home:
        view = session.home.log_view()

    report = verify_certificate(certificate, issuer, pkg, view, session.now())
    doc = report.to_document()
    doc['certificate_id'] = certificate.certificate_id
    if from_home and pkg is None:
        doc['checks'].append({'name': 'audit_package_hash', 'passed': False, 'detail': 'package not in home'})
        doc['valid'] = False
    return (EXIT_OK if doc['valid'] else EXIT_DENIED), doc


@cert.command('verify')
@click.argument('certificate_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--public-key', default=None, help='Issuer public key file or hex. Defaults to the home key.')
@click.option('--package', 'package_file', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--log', 'log_dir', type=click.Path(exists=True, file_okay=False), default=None,
              help='Log snapshot directory holding entries.bin and sth.json.')
@click.option('--from-home', is_flag=True, help='Take the package and log snapshot from the home.')
@_pass_session
@guarded
def cert_verify(session, certificate_file, public_key, package_file, log_dir, from_home):
    code, doc = run_verify(session, certificate_file, public_key, package_file, log_dir, from_home)
    session.emit(doc)
    sys.exit(code)


def _append_revocation(session, certificate_id, action, reason):
    home = session.home
    home.find_certificate(certificate_id)
    record = revoke_certificate(certificate_id, action, reason, home.signing_key(), session.now())
    home.save_revocation(record)
    leaf_index, _ = home.transparency_log().append(
        LogEntry(EntryType.REVOCATION_EVENT, record.canonical_bytes()), session.now())
    return record, leaf_index


@cert.command('revoke')
@click.argument('certificate_id')
@click.option('--action', type=click.Choice([a.value for a in RevocationAction]), default='REVOKE')
@click.option('--reason', required=True, type=click.Choice([r.value for r in RevocationReason]))
@_pass_session
@guarded
def cert_revoke(session, certificate_id, action, reason):
    """Sign a REVOKE, SUSPEND or REINSTATE record and append it to the log."""
    session.home.require_initialized()
    with session.home.lock():
        record, leaf_index = _append_revocation(session, certificate_id, action, reason)
        status = session.home.log_view().certificate_status(certificate_id, session.now())
    session.emit({'record': record.to_document(), 'leaf_index': leaf_index, 'status': status.value})


@cert.command('status')
@click.argument('certificate_id')
@_pass_session
@guarded
def cert_status(session, certificate_id):
    status = session.home.log_view().certificate_status(certificate_id, session.now())
    session.emit({'certificate_id': certificate_id, 'status': status.value})
    if status == CertificateStatus.UNKNOWN:
        sys.exit(EXIT_ERROR)
    sys.exit(EXIT_OK if status == CertificateStatus.ACTIVE else EXIT_DENIED)


@cert.command('show')
@click.argument('certificate_id')
@_pass_session
@guarded
def cert_show(session, certificate_id):
    session.emit(session.home.find_certificate(certificate_id).to_document())


@cert.command('surveil')
@click.argument('certificate_id')
@click.option('--apply', 'apply_', is_flag=True, help='Sign and log the recommended record.')
@_pass_session
@guarded
def cert_surveil(session, certificate_id, apply_):
    """Re-check an issued certificate against current evidence and policy."""
    home = session.home
    home.require_initialized()
    with home.lock():
        certificate = home.find_certificate(certificate_id)
        pkg = parse_audit_package(home.get_document('packages', certificate.audit_package_hash))
        deployment = pkg.deployment
        p = resolve_policy(home.registry(), deployment.jurisdiction, deployment.use_context.domain)
        bundle = home.bundles().load(pkg.bundle_id)
        recommendation = surveil_certificate(certificate, deployment, bundle, p, home.objects(), session.now(),
                                             home.log_view())
        doc = {'certificate_id': certificate_id,
               'recommendation': recommendation.to_document() if recommendation else None, 'record': None}
        if apply_ and recommendation is not None:
            record, leaf_index = _append_revocation(session, certificate_id, recommendation.action,
                                                    recommendation.reason)
            doc['record'] = record.to_document()
            doc['leaf_index'] = leaf_index
    session.emit(doc)


# transparency log

@cli.group('log')
def log_group():
    """Signed tree heads and Merkle proofs."""


@log_group.command('sth')
@_pass_session
@guarded
def log_sth(session):
    view = session.home.log_view()
    if view.sth is None:
        raise NotFound('tree head (log is empty)')
    session.emit(view.sth.to_document())


@log_group.command('prove-inclusion')
@click.argument('leaf_index', type=int)
@click.argument('tree_size', type=int)
@_pass_session
@guarded
def log_prove_inclusion(session, leaf_index, tree_size):
    view = session.home.log_view()
    doc = view.prove_inclusion(leaf_index, tree_size).to_document()
    doc['leaf_hash'] = view.entry(leaf_index).leaf_hash
    session.emit(doc)


@log_group.command('prove-consistency')
@click.argument('old_size', type=int)
@click.argument('new_size', type=int)
@_pass_session
@guarded
def log_prove_consistency(session, old_size, new_size):
    session.emit(session.home.log_view().prove_consistency(old_size, new_size).to_document())


@cli.command()
@click.option('--bind', 'bind_address', default=DEFAULT_BIND, show_default=True)
@_pass_session
@guarded
def serve(session, bind_address):
    """Serve certificate status, tree heads, proofs and packages read-only."""
    from .adas_service import serve_status
    serve_status(session.home, bind_address, session.config)


def main(argv=None):
    """Console entry point; keeps usage errors on the operational exit code"""
    try:
        rv = cli.main(args=argv, prog_name='adas', standalone_mode=False)
    except click.exceptions.Abort:
        click.echo('aborted', err=True)
        sys.exit(EXIT_ERROR)
    except click.ClickException as ex:
        ex.show()
        sys.exit(EXIT_ERROR)
    sys.exit(rv if isinstance(rv, int) else EXIT_OK)
