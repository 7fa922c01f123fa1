__all__ = ['adas_model', 'adas_policy', 'adas_evidence', 'adas_scoring', 'adas_decision', 'adas_certificate',
           'adas_log', 'adas_surveillance', 'adas_home',
           'canonicalize', 'DeploymentDescriptor', 'ScoreVector', 'make_score_vector', 'validate_deployment',
           'Policy', 'PolicyRegistry', 'parse_policy', 'policy_fingerprint', 'resolve_policy',
           'ObjectStore', 'BundleStore', 'EvidenceBundle', 'put_artefact', 'append_to_bundle', 'check_sufficiency',
           'assemble_score_vector', 'authorize', 'authorize_across', 'Decision', 'Outcome',
           'assemble_audit_package', 'audit_package_hash', 'issue_certificate', 'verify_certificate',
           'revoke_certificate', 'generate_keypair', 'TransparencyLog', 'LogView', 'certificate_status',
           'surveil_certificate', 'EngineHome', 'AdasConfig']

from .adas_canonical import canonicalize

from .adas_model import DeploymentDescriptor, ScoreVector, make_score_vector, validate_deployment
from .adas_policy import Policy, PolicyRegistry, parse_policy, policy_fingerprint, resolve_policy
from .adas_evidence import ObjectStore, BundleStore, EvidenceBundle, put_artefact, append_to_bundle, check_sufficiency
from .adas_scoring import assemble_score_vector
from .adas_decision import authorize, authorize_across, Decision, Outcome

from .adas_certificate import (assemble_audit_package, audit_package_hash, issue_certificate, verify_certificate,
                               revoke_certificate, generate_keypair)
from .adas_log import TransparencyLog, LogView, certificate_status
from .adas_surveillance import surveil_certificate
from .adas_home import EngineHome, AdasConfig
