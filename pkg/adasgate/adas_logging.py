"""structlog setup for the command line. stdout is reserved for documents."""

import logging
import sys

import structlog

LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


def configure_logging(level='WARNING', json_output=True):
    """Routes every engine log record to stderr at `level` and above"""
    level = level.upper()
    if level not in LEVELS:
        raise ValueError('log level must be one of %s' % ', '.join(LEVELS))
    renderer = structlog.processors.JSONRenderer(sort_keys=True) if json_output else structlog.dev.ConsoleRenderer()
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt='iso', utc=True),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, level)),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
