"""Goal models of credential ecosystems, compiled down to executable agents."""

from .model import (
    Actor,
    ActorKind,
    ActorLink,
    ActorLinkKind,
    ContributionLabel,
    Dependency,
    Element,
    ElementKind,
    Identifier,
    InternalLink,
    LinkKind,
    Model,
    RefinementNode,
    UnknownActorError,
    ValidationIssue,
    ValidationReport,
    dependencies_of,
    refinement_forest,
    validate,
)
from .pistar import ParseError, ParseResult, export_dot, parse_model, serialize_model
from .overlay import (
    CredentialFlow,
    Evidence,
    EvidenceKind,
    FlowKind,
    RoleAssignment,
    SsiRole,
    TrustOverride,
    TrustPolicyError,
    TrustRegistry,
    VerbLexicon,
    DEFAULT_LEXICON,
    build_trust_registry,
    derive_flows,
    infer_roles,
    lint_ssi,
    normalize_name,
)
from .credentials import (
    Credential,
    CredentialCheck,
    DidDocument,
    DidResolutionError,
    KeyPair,
    Presentation,
    SelfIssueError,
    VerificationOutcome,
    canonical_bytes,
    create_presentation,
    decode_did,
    did_from_public_key,
    generate_keypair,
    issue_credential,
    resolve_did,
    verify_credential,
    verify_presentation,
)
from .propagation import LabelState, evaluate_goals, root_goals
from .simulator import (
    AgentSpec,
    BootstrapCredential,
    CompileError,
    Message,
    SimConfig,
    Trace,
    compile_agents,
    derive_bootstrap,
    run,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
