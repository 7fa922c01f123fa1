"""Read-only HTTP status service over an engine home.

Every request opens a fresh snapshot of the committed log, so the service
runs beside the CLI writer without locking. No route mutates the home.
"""

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import Response
from starlette.exceptions import HTTPException as StarletteHTTPException
import structlog
import uvicorn

from .adas_canonical import canonicalize, is_hex_digest
from .adas_constants import DEFAULT_BIND
from .adas_errors import IndexOutOfRange, NotFound, SizeOutOfRange
from .adas_home import AdasConfig, EngineHome
from .adas_log import CertificateStatus

logger = structlog.get_logger(component='adas.service')

MEDIA_TYPE = 'application/json'


def canonical_response(doc, status_code=200):
    return Response(content=canonicalize(doc), status_code=status_code, media_type=MEDIA_TYPE)


def create_app(home, config=None):
    """Builds the status application.

    Args:
        `home`: EngineHome or its path
        `config`: AdasConfig supplying the clock for status queries
    """
    home = home if isinstance(home, EngineHome) else EngineHome(home)
    config = config or AdasConfig(home=home.root)
    home.require_initialized()

    app = FastAPI(title='adasgate status', openapi_url=None, docs_url=None, redoc_url=None)

    @app.exception_handler(StarletteHTTPException)
    async def http_error(request: Request, exc: StarletteHTTPException):
        return canonical_response({'error': str(exc.detail), 'status': exc.status_code}, exc.status_code)

    @app.exception_handler(RequestValidationError)
    async def bad_query(request: Request, exc: RequestValidationError):
        return canonical_response({'error': 'malformed query', 'status': 400}, 400)

    @app.get('/sth')
    def tree_head():
        view = home.log_view()
        if view.sth is None:
            raise HTTPException(status_code=404, detail='log is empty')
        return canonical_response(view.sth.to_document())

    @app.get('/certificates/{certificate_id}/status')
    def certificate_status(certificate_id: str):
        view = home.log_view()
        status = view.certificate_status(certificate_id, config.now())
        if status == CertificateStatus.UNKNOWN:
            raise HTTPException(status_code=404, detail='unknown certificate %s' % certificate_id)
        return canonical_response({'certificate_id': certificate_id, 'status': status.value,
                                   'tree_size': view.tree_size})

    @app.get('/proofs/inclusion')
    def inclusion_proof(index: int, size: int):
        view = home.log_view()
        try:
            proof = view.prove_inclusion(index, size)
        except IndexOutOfRange as ex:
            raise HTTPException(status_code=400, detail=str(ex))
        doc = proof.to_document()
        doc['leaf_hash'] = view.entry(index).leaf_hash
        return canonical_response(doc)

    @app.get('/proofs/consistency')
    def consistency_proof(old: int, new: int):
        view = home.log_view()
        try:
            proof = view.prove_consistency(old, new)
        except SizeOutOfRange as ex:
            raise HTTPException(status_code=400, detail=str(ex))
        return canonical_response(proof.to_document())

    @app.get('/packages/{package_hash}')
    def audit_package(package_hash: str):
        if not is_hex_digest(package_hash):
            raise HTTPException(status_code=400, detail='package hash must be 64 lowercase hex')
        try:
            data = home.get_document('packages', package_hash)
        except NotFound:
            raise HTTPException(status_code=404, detail='unknown package %s' % package_hash)
        return Response(content=data, media_type=MEDIA_TYPE)

    return app


def parse_bind(bind_address):
    host, _, port = (bind_address or DEFAULT_BIND).rpartition(':')
    if not host or not port.isdigit():
        raise ValueError('bind address must look like HOST:PORT, got %r' % bind_address)
    return host, int(port)


def serve_status(home, bind_address=DEFAULT_BIND, config=None):
    """Runs the status service until interrupted"""
    host, port = parse_bind(bind_address)
    app = create_app(home, config)
    logger.info('service_starting', host=host, port=port)
    uvicorn.run(app, host=host, port=port, log_level='warning')
