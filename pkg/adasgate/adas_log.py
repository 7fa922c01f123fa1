"""Append-only Merkle log of issuance and revocation events.

Tree hashing follows the certificate-transparency scheme: a leaf hashes as
``SHA-256(0x00 || payload)``, an interior node as
``SHA-256(0x01 || left || right)``, and a tree of ``n`` leaves splits at the
largest power of two strictly below ``n``. Inclusion and consistency proofs
are the audit paths of that scheme and verify with the usual ``fn``/``sn``
walk.

On disk a log is two files under ``log/``: ``entries.bin``, a sequence of
records (1 byte entry type, 4 byte big-endian payload length, canonical
payload), and ``sth.json``, the canonical signed tree head. Records past
the signed tree size are uncommitted and invisible to readers.
"""

import enum
import hashlib
import os
import struct
from dataclasses import dataclass
from tempfile import NamedTemporaryFile

import structlog

from .adas_canonical import canonicalize, is_hex_digest, parse_canonical
from .adas_constants import LOG_RECORDS_FILE, LOG_STH_FILE, MERKLE_LEAF_PREFIX, MERKLE_NODE_PREFIX
from .adas_errors import IndexOutOfRange, MalformedDocument, SizeOutOfRange, StorageFailure
from .adas_keys import as_issuer_key, verify_signature

logger = structlog.get_logger(component='adas.log')

RECORD_HEADER = struct.Struct('>BI')

EMPTY_ROOT = hashlib.sha256(b'').digest()


class EntryType(str, enum.Enum):
    ISSUANCE = 'ISSUANCE'
    REVOCATION_EVENT = 'REVOCATION_EVENT'

    @property
    def code(self):
        return ENTRY_CODES[self]


ENTRY_CODES = {EntryType.ISSUANCE: 1, EntryType.REVOCATION_EVENT: 2}
ENTRY_TYPES = {v: k for k, v in ENTRY_CODES.items()}


class CertificateStatus(str, enum.Enum):
    ACTIVE = 'ACTIVE'
    SUSPENDED = 'SUSPENDED'
    REVOKED = 'REVOKED'
    EXPIRED = 'EXPIRED'
    UNKNOWN = 'UNKNOWN'


# tree hashing

def leaf_hash(data):
    return hashlib.sha256(MERKLE_LEAF_PREFIX + data).digest()


def node_hash(left, right):
    return hashlib.sha256(MERKLE_NODE_PREFIX + left + right).digest()


def split_point(n):
    """Largest power of two strictly below n (n >= 2)"""
    return 1 << ((n - 1).bit_length() - 1)


def merkle_root(leaf_hashes):
    """Batch tree hash of a list of leaf hashes"""
    n = len(leaf_hashes)
    if n == 0:
        return EMPTY_ROOT
    if n == 1:
        return leaf_hashes[0]
    k = split_point(n)
    return node_hash(merkle_root(leaf_hashes[:k]), merkle_root(leaf_hashes[k:]))


def _is_power_of_two(n):
    return n > 0 and n & (n - 1) == 0


class MerkleTree(object):
    """Leaf hashes plus an incrementally maintained root.

    Perfect subtrees never change once complete, so their hashes are cached
    for proof generation.
    """

    def __init__(self, leaf_hashes=()):
        self.leaves = []
        #: [(subtree size, subtree hash), ...], sizes strictly decreasing
        self.peaks = []
        self._perfect = {}
        for h in leaf_hashes:
            self.append(h)

    def __len__(self):
        return len(self.leaves)

    def append(self, h):
        self.leaves.append(h)
        self.peaks.append((1, h))
        while len(self.peaks) >= 2 and self.peaks[-1][0] == self.peaks[-2][0]:
            (size, left), (_, right) = self.peaks[-2], self.peaks[-1]
            self.peaks[-2:] = [(2 * size, node_hash(left, right))]

    def root(self):
        if not self.peaks:
            return EMPTY_ROOT
        acc = self.peaks[-1][1]
        for _, h in reversed(self.peaks[:-1]):
            acc = node_hash(h, acc)
        return acc

    def subtree(self, lo, hi):
        """Tree hash of leaves[lo:hi]"""
        n = hi - lo
        if n == 0:
            return EMPTY_ROOT
        if n == 1:
            return self.leaves[lo]
        cacheable = _is_power_of_two(n)
        if cacheable and (lo, hi) in self._perfect:
            return self._perfect[(lo, hi)]
        k = split_point(n)
        h = node_hash(self.subtree(lo, lo + k), self.subtree(lo + k, hi))
        if cacheable:
            self._perfect[(lo, hi)] = h
        return h

    def inclusion_path(self, index, size):
        return self._path(index, 0, size)

    def _path(self, m, lo, hi):
        n = hi - lo
        if n == 1:
            return []
        k = split_point(n)
        if m < k:
            return self._path(m, lo, lo + k) + [self.subtree(lo + k, hi)]
        return self._path(m - k, lo + k, hi) + [self.subtree(lo, lo + k)]

    def consistency_path(self, old_size, new_size):
        return self._subproof(old_size, 0, new_size, True)

    def _subproof(self, m, lo, hi, complete):
        n = hi - lo
        if m == n:
            return [] if complete else [self.subtree(lo, hi)]
        k = split_point(n)
        if m <= k:
            return self._subproof(m, lo, lo + k, complete) + [self.subtree(lo + k, hi)]
        return self._subproof(m - k, lo + k, hi, False) + [self.subtree(lo, lo + k)]


def root_from_inclusion_path(index, size, leaf, path):
    """Recomputes the root an inclusion path commits to, or None if the path cannot fit"""
    if index >= size:
        return None
    fn, sn = index, size - 1
    r = leaf
    for p in path:
        if sn == 0:
            return None
        if fn & 1 or fn == sn:
            r = node_hash(p, r)
            if not fn & 1:
                while not fn & 1 and fn != 0:
                    fn >>= 1
                    sn >>= 1
        else:
            r = node_hash(r, p)
        fn >>= 1
        sn >>= 1
    return r if sn == 0 else None


def consistency_holds(old_size, new_size, old_root, new_root, path):
    if old_size == new_size:
        return not path and old_root == new_root
    if old_size == 0 or old_size > new_size or not path:
        return False
    path = list(path)
    if _is_power_of_two(old_size):
        path.insert(0, old_root)
    fn, sn = old_size - 1, new_size - 1
    while fn & 1:
        fn >>= 1
        sn >>= 1
    fr = sr = path[0]
    for c in path[1:]:
        if sn == 0:
            return False
        if fn & 1 or fn == sn:
            fr = node_hash(c, fr)
            sr = node_hash(c, sr)
            if not fn & 1:
                while not fn & 1 and fn != 0:
                    fn >>= 1
                    sn >>= 1
        else:
            sr = node_hash(sr, c)
        fn >>= 1
        sn >>= 1
    return sn == 0 and fr == old_root and sr == new_root


# documents

@dataclass(frozen=True)
class LogEntry:
    entry_type: EntryType
    #: canonical bytes of a signed Certificate or RevocationRecord
    payload: bytes

    @property
    def leaf_hash(self):
        return leaf_hash(self.payload).hex()

    def document(self):
        return parse_canonical(self.payload)

    def record_bytes(self):
        return RECORD_HEADER.pack(self.entry_type.code, len(self.payload)) + self.payload


def _hex_list(hashes):
    return [h.hex() for h in hashes]


def _bytes_list(doc, key, where):
    items = doc.get(key)
    if not isinstance(items, list) or not all(is_hex_digest(h) for h in items):
        raise MalformedDocument('%s: %s must be a list of hex digests' % (where, key))
    return tuple(bytes.fromhex(h) for h in items)


def _size(doc, key, where):
    value = doc.get(key)
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise MalformedDocument('%s: %s must be a non-negative integer' % (where, key))
    return value


@dataclass(frozen=True)
class SignedTreeHead:
    tree_size: int
    root_hash: str
    timestamp: int
    issuer_key_id: str
    signature: str

    def signed_bytes(self):
        return tree_head_body(self.tree_size, self.root_hash, self.timestamp)

    def to_document(self):
        return {'tree_size': self.tree_size, 'root_hash': self.root_hash, 'timestamp': self.timestamp,
                'issuer_key_id': self.issuer_key_id, 'signature': self.signature}

    @classmethod
    def from_document(cls, doc):
        if not isinstance(doc, dict) or set(doc) != {'tree_size', 'root_hash', 'timestamp', 'issuer_key_id',
                                                     'signature'}:
            raise MalformedDocument('tree head: expected tree_size, root_hash, timestamp, issuer_key_id, signature')
        if not is_hex_digest(doc['root_hash']):
            raise MalformedDocument('tree head: root_hash must be a hex digest')
        if not isinstance(doc['issuer_key_id'], str) or not isinstance(doc['signature'], str):
            raise MalformedDocument('tree head: issuer_key_id and signature must be strings')
        return cls(_size(doc, 'tree_size', 'tree head'), doc['root_hash'], _size(doc, 'timestamp', 'tree head'),
                   doc['issuer_key_id'], doc['signature'])


def tree_head_body(tree_size, root_hash, timestamp):
    return canonicalize({'tree_size': tree_size, 'root_hash': root_hash, 'timestamp': timestamp})


def sign_tree_head(tree_size, root_hash, timestamp, signing_key):
    key = as_issuer_key(signing_key)
    return SignedTreeHead(tree_size, root_hash, timestamp, key.key_id,
                          key.sign(tree_head_body(tree_size, root_hash, timestamp)))


def verify_tree_head(sth, public_key):
    return verify_signature(public_key, sth.signed_bytes(), sth.signature)


@dataclass(frozen=True)
class InclusionProof:
    leaf_index: int
    tree_size: int
    audit_path: tuple

    def to_document(self):
        return {'leaf_index': self.leaf_index, 'tree_size': self.tree_size, 'audit_path': _hex_list(self.audit_path)}

    @classmethod
    def from_document(cls, doc):
        if not isinstance(doc, dict):
            raise MalformedDocument('inclusion proof: expected map')
        return cls(_size(doc, 'leaf_index', 'inclusion proof'), _size(doc, 'tree_size', 'inclusion proof'),
                   _bytes_list(doc, 'audit_path', 'inclusion proof'))


@dataclass(frozen=True)
class ConsistencyProof:
    old_size: int
    new_size: int
    path: tuple

    def to_document(self):
        return {'old_size': self.old_size, 'new_size': self.new_size, 'path': _hex_list(self.path)}

    @classmethod
    def from_document(cls, doc):
        if not isinstance(doc, dict):
            raise MalformedDocument('consistency proof: expected map')
        return cls(_size(doc, 'old_size', 'consistency proof'), _size(doc, 'new_size', 'consistency proof'),
                   _bytes_list(doc, 'path', 'consistency proof'))


# logs

def read_records(data, limit=None):
    """Parses a records file, stopping at `limit` entries or a truncated tail"""
    entries = []
    offset = 0
    while offset + RECORD_HEADER.size <= len(data) and (limit is None or len(entries) < limit):
        code, length = RECORD_HEADER.unpack_from(data, offset)
        start = offset + RECORD_HEADER.size
        if start + length > len(data):
            break
        if code not in ENTRY_TYPES:
            raise MalformedDocument('log record at byte %d: unknown entry type %d' % (offset, code))
        entries.append(LogEntry(ENTRY_TYPES[code], data[start:start + length]))
        offset = start + length
    return entries, offset


def read_committed(directory, sth):
    """Reads the records an STH commits to; returns (entries, byte length of the committed prefix).

    Raises :class:`MalformedDocument` when the records are fewer than the
    tree head claims or do not hash to its root.
    """
    path = os.path.join(directory, LOG_RECORDS_FILE)
    data = b''
    if os.path.isfile(path):
        with open(path, 'rb') as f:
            data = f.read()
    size = sth.tree_size if sth else 0
    entries, committed = read_records(data, size)
    if len(entries) < size:
        raise MalformedDocument('log holds %d records, tree head claims %d' % (len(entries), size))
    if sth is not None and merkle_root([leaf_hash(e.payload) for e in entries]).hex() != sth.root_hash:
        raise MalformedDocument('log records do not hash to the signed root')
    return entries, committed


class LogView(object):
    """Read-only snapshot of a committed log prefix"""

    def __init__(self, entries=(), sth=None):
        self.entries = list(entries)
        self.tree = MerkleTree(leaf_hash(e.payload) for e in self.entries)

        #: The signed tree head this snapshot was opened at, if any
        self.sth = sth
        self._documents = {}

    @classmethod
    def open(cls, directory):
        sth = read_tree_head(directory)
        if sth is None:
            return cls()
        entries, _ = read_committed(directory, sth)
        return cls(entries, sth)

    @property
    def tree_size(self):
        return len(self.entries)

    def root_hash(self, size=None):
        if size is None or size == self.tree_size:
            return self.tree.root().hex()
        if not 0 <= size <= self.tree_size:
            raise SizeOutOfRange('size %r outside 0..%d' % (size, self.tree_size))
        return self.tree.subtree(0, size).hex()

    def entry(self, index):
        if not 0 <= index < self.tree_size:
            raise IndexOutOfRange('leaf %r outside 0..%d' % (index, self.tree_size - 1))
        return self.entries[index]

    def document(self, index):
        if index not in self._documents:
            self._documents[index] = self.entry(index).document()
        return self._documents[index]

    def events_for(self, certificate_id):
        """[(index, entry_type, document), ...] naming `certificate_id`, in leaf order"""
        out = []
        for n, e in enumerate(self.entries):
            doc = self.document(n)
            if isinstance(doc, dict) and doc.get('certificate_id') == certificate_id:
                out.append((n, e.entry_type, doc))
        return out

    def find_issuance(self, certificate_id, payload=None):
        for n, entry_type, _ in self.events_for(certificate_id):
            if entry_type == EntryType.ISSUANCE and (payload is None or self.entries[n].payload == payload):
                return n
        return None

    def prove_inclusion(self, leaf_index, tree_size=None):
        tree_size = self.tree_size if tree_size is None else tree_size
        if not (0 <= leaf_index < tree_size <= self.tree_size):
            raise IndexOutOfRange('need 0 <= leaf_index < tree_size <= %d, got (%r, %r)' % (
                self.tree_size, leaf_index, tree_size))
        return InclusionProof(leaf_index, tree_size, tuple(self.tree.inclusion_path(leaf_index, tree_size)))

    def prove_consistency(self, old_size, new_size=None):
        new_size = self.tree_size if new_size is None else new_size
        if not (0 < old_size <= new_size <= self.tree_size):
            raise SizeOutOfRange('need 0 < old_size <= new_size <= %d, got (%r, %r)' % (
                self.tree_size, old_size, new_size))
        return ConsistencyProof(old_size, new_size, tuple(self.tree.consistency_path(old_size, new_size)))

    def certificate_status(self, certificate_id, clock):
        return replay_status([(t, d) for _, t, d in self.events_for(certificate_id)], clock)


def read_tree_head(directory):
    path = os.path.join(directory, LOG_STH_FILE)
    if not os.path.isfile(path):
        return None
    with open(path, 'rb') as f:
        return SignedTreeHead.from_document(parse_canonical(f.read()))


class TransparencyLog(LogView):
    """The single writer of a log directory.

    Callers hold the engine home lock for the lifetime of the instance.
    """

    def __init__(self, directory, signing_key):
        self.directory = directory
        self.signing_key = as_issuer_key(signing_key)
        os.makedirs(directory, exist_ok=True)
        self.records_path = os.path.join(directory, LOG_RECORDS_FILE)
        sth = read_tree_head(directory)
        # a log that no longer matches its published head must not be extended
        entries, committed = read_committed(directory, sth)
        if os.path.isfile(self.records_path):
            self._truncate(committed)
        LogView.__init__(self, entries, sth)

    def _truncate(self, length):
        # drops records written by an append that never got its tree head
        if os.path.getsize(self.records_path) > length:
            logger.warning('log_uncommitted_records_dropped', directory=self.directory)
            with open(self.records_path, 'r+b') as f:
                f.truncate(length)

    def append(self, entry, now):
        """Appends one entry and issues the new tree head; returns (leaf_index, sth)"""
        doc = entry.document()
        if canonicalize(doc) != entry.payload or not isinstance(doc, dict) or 'signature' not in doc:
            raise MalformedDocument('log payloads must be canonical signed documents')

        index = self.tree_size
        try:
            with open(self.records_path, 'ab') as f:
                f.write(entry.record_bytes())
                f.flush()
                os.fsync(f.fileno())
        except OSError as ex:
            raise StorageFailure('could not append to log: %s' % ex)

        self.entries.append(entry)
        self.tree.append(leaf_hash(entry.payload))
        sth = sign_tree_head(self.tree_size, self.root_hash(), now, self.signing_key)
        try:
            with NamedTemporaryFile(dir=self.directory, delete=False) as tmp:
                tmp.write(canonicalize(sth.to_document()))
                tmp.flush()
                os.fsync(tmp.fileno())
            os.replace(tmp.name, os.path.join(self.directory, LOG_STH_FILE))
        except OSError as ex:
            raise StorageFailure('could not publish tree head: %s' % ex)
        self.sth = sth
        logger.info('log_appended', entry_type=entry.entry_type.value, leaf_index=index, tree_size=sth.tree_size,
                    root_hash=sth.root_hash)
        return index, sth


# module level operations

def append_entry(log, entry, now):
    return log.append(entry, now)


def prove_inclusion(log, leaf_index, tree_size):
    return log.prove_inclusion(leaf_index, tree_size)


def verify_inclusion(proof, leaf_hash_hex, sth):
    """True iff `proof` places `leaf_hash_hex` under the root of `sth`"""
    if proof.tree_size != sth.tree_size or not is_hex_digest(leaf_hash_hex):
        return False
    root = root_from_inclusion_path(proof.leaf_index, proof.tree_size, bytes.fromhex(leaf_hash_hex),
                                    proof.audit_path)
    return root is not None and root.hex() == sth.root_hash


def prove_consistency(log, old_size, new_size):
    return log.prove_consistency(old_size, new_size)


def verify_consistency(proof, old_sth, new_sth):
    """True iff `proof` shows the tree of `old_sth` is a prefix of the tree of `new_sth`"""
    if proof.old_size != old_sth.tree_size or proof.new_size != new_sth.tree_size:
        return False
    return consistency_holds(proof.old_size, proof.new_size, bytes.fromhex(old_sth.root_hash),
                             bytes.fromhex(new_sth.root_hash), proof.path)


def replay_status(events, clock):
    """Folds [(entry_type, document), ...] for one certificate into its status.

    ISSUANCE activates an unseen certificate; SUSPEND acts on ACTIVE,
    REINSTATE on SUSPENDED; REVOKE acts from any state and is final.
    """
    state = CertificateStatus.UNKNOWN
    expires_at = None
    for entry_type, doc in events:
        if entry_type == EntryType.ISSUANCE:
            if state == CertificateStatus.UNKNOWN:
                state = CertificateStatus.ACTIVE
                expires_at = doc.get('expires_at')
            continue
        action = doc.get('action')
        if action == 'REVOKE':
            state = CertificateStatus.REVOKED
        elif action == 'SUSPEND' and state == CertificateStatus.ACTIVE:
            state = CertificateStatus.SUSPENDED
        elif action == 'REINSTATE' and state == CertificateStatus.SUSPENDED:
            state = CertificateStatus.ACTIVE
    if state in (CertificateStatus.ACTIVE, CertificateStatus.SUSPENDED) and expires_at is not None \
            and clock >= expires_at:
        return CertificateStatus.EXPIRED
    return state


def certificate_status(log, certificate_id, clock):
    return log.certificate_status(certificate_id, clock)
