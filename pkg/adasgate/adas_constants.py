#: Length of a lowercase hex digest
HASH_HEX_LENGTH = 64

#: Width of the shard directory taken from the front of an object digest
SHARD_WIDTH = 2

#: Upper bound of every fixed-point score, threshold and weight (100.00)
SCALE_MAX = 10000

#: Seconds in one day, used for every "days" policy parameter
SECONDS_PER_DAY = 86400

#: Default certificate validity when none is configured
DEFAULT_VALIDITY_DAYS = 365

#: Exit code of a successful command / approved assessment
EXIT_OK = 0

#: Exit code of an operational failure (bad input, missing policy, I/O)
EXIT_ERROR = 1

#: Exit code of a governance refusal (denied, revoked, failed verification)
EXIT_DENIED = 2

#: Sub-directories of an engine home
HOME_DIRS = ('objects', 'bundles', 'policies', 'packages', 'certs', 'log', 'keys', 'deployments')

#: Lock file guarding every write path of an engine home
LOCK_FILE = '.lock'

#: Issuer key file names inside keys/
PRIVATE_KEY_FILE = 'issuer.key'
PUBLIC_KEY_FILE = 'issuer.pub'

#: Transparency log file names inside log/
LOG_RECORDS_FILE = 'entries.bin'
LOG_STH_FILE = 'sth.json'

#: Domain separation prefixes of the certificate-transparency Merkle scheme
MERKLE_LEAF_PREFIX = b'\x00'
MERKLE_NODE_PREFIX = b'\x01'

#: Human oversight modes, weakest first. Policies compare by position.
OVERSIGHT_ORDER = ('none', 'review', 'veto', 'co-sign')

#: Oversight modes that satisfy a MandatoryHumanVeto condition
VETO_MODES = ('veto', 'co-sign')

#: Reason string carried by a decision that was escalated for human review
ESCALATION_MARKER = 'escalation:human-review'

#: Output formats of the command line
OUTPUT_FORMATS = ('canonical', 'pretty')

#: Environment variables read by AdasConfig.from_environment
ENV_HOME = 'ADAS_HOME'
ENV_CLOCK = 'ADAS_CLOCK'
ENV_FORMAT = 'ADAS_FORMAT'
ENV_LOG_LEVEL = 'ADAS_LOG_LEVEL'
ENV_VALIDITY_DAYS = 'ADAS_VALIDITY_DAYS'

#: Default bind address of the read-only status service
DEFAULT_BIND = '127.0.0.1:8750'
