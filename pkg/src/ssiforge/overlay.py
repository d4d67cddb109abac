"""Credential-ecosystem overlay on top of a goal model.

Actors never declare Issuer, Holder, or Verifier anywhere in the model; the
overlay reads those roles out of the rationale.  Resource dependums name
credential types, and task names carry the intent: a task whose (normalized)
name starts with an issue verb and mentions a credential type marks its actor
as that type's Issuer, provide verbs mark Holders, check verbs mark
Verifiers.  An actor that receives a credential through an issuance also
holds it, whether or not a task says so.

Dependency annotations refine the picture:

- ``ssi``: force the flow classification, value ``issue`` or ``present``
- ``ssi.alias``: comma-separated alternative spellings for the dependum
- ``ssi.subject``: ``child`` marks credentials about a non-actor subject
- ``ssi.purpose``: free-form note carried through to proof requests
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .model import (
    Actor,
    Dependency,
    Element,
    ElementKind,
    Identifier,
    Model,
    ValidationIssue,
)

_PUNCT = re.compile(r"[^a-z0-9 ]+")
_SPACES = re.compile(r"\s+")


def normalize_name(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    lowered = _PUNCT.sub("", text.lower().replace("-", " "))
    return _SPACES.sub(" ", lowered).strip()


@dataclass(frozen=True)
class VerbLexicon:
    """Task-name prefixes that signal credential handling intent."""

    issue_verbs: frozenset[str] = frozenset({"issue"})
    provide_verbs: frozenset[str] = frozenset({"provide", "present"})
    check_verbs: frozenset[str] = frozenset({"check", "verify"})

    def __post_init__(self) -> None:
        groups = (self.issue_verbs, self.provide_verbs, self.check_verbs)
        normalized = tuple(frozenset(normalize_name(v) for v in g) for g in groups)
        for g in normalized:
            if not g or "" in g:
                raise ValueError("verb sets must be non-empty")
        if len(normalized[0] | normalized[1] | normalized[2]) != sum(len(g) for g in normalized):
            raise ValueError("verb sets must be pairwise disjoint")
        object.__setattr__(self, "issue_verbs", normalized[0])
        object.__setattr__(self, "provide_verbs", normalized[1])
        object.__setattr__(self, "check_verbs", normalized[2])


DEFAULT_LEXICON = VerbLexicon()


class SsiRole(enum.Enum):
    ISSUER = "Issuer"
    HOLDER = "Holder"
    VERIFIER = "Verifier"


@dataclass(frozen=True)
class RoleAssignment:
    actor: Identifier
    credential_type: str
    role: SsiRole


class FlowKind(enum.Enum):
    ISSUANCE = "Issuance"
    PRESENTATION = "Presentation"


class EvidenceKind(enum.Enum):
    ANNOTATION = "Annotation"
    VERB = "Verb"
    UNRESOLVED = "Unresolved"


@dataclass(frozen=True)
class Evidence:
    kind: EvidenceKind
    element: Identifier | None = None


@dataclass(frozen=True)
class CredentialFlow:
    """One dependency read as a credential movement between two actors.

    ``sender`` is always the dependee and ``receiver`` the depender: an
    issuance delivers a new credential to the depender, a presentation sends
    proof of an existing one to the depender.
    """

    dependency: Identifier
    kind: FlowKind
    credential_type: str
    sender: Identifier
    receiver: Identifier
    evidence: Evidence


class TrustPolicyError(ValueError):
    code = "E_TRUST_NOT_VERIFIER"


@dataclass(frozen=True)
class TrustOverride:
    verifier: Identifier
    credential_type: str
    issuer_did: str
    action: str = "add"

    def __post_init__(self) -> None:
        if self.action not in ("add", "remove"):
            raise ValueError(f"override action must be 'add' or 'remove', got {self.action!r}")


@dataclass(frozen=True)
class TrustRegistry:
    """Per-verifier accepted issuer DIDs, keyed by (verifier, credential type)."""

    accepted: Mapping[tuple[Identifier, str], frozenset[str]]

    def is_trusted(self, verifier: Identifier, credential_type: str, issuer_did: str) -> bool:
        return issuer_did in self.accepted.get((verifier, credential_type), frozenset())


class CredentialCatalog:
    """Credential types named by resource dependums, with alias spellings."""

    def __init__(self, model: Model) -> None:
        self.canonical: dict[str, str] = {}  # normalized spelling -> display name
        for dep in model.dependencies:
            if dep.kind is not ElementKind.RESOURCE:
                continue
            norm = normalize_name(dep.name)
            if not norm:
                continue
            display = self.canonical.setdefault(norm, dep.name)
            for alias in dep.annotations.get("ssi.alias", "").split(","):
                alias_norm = normalize_name(alias)
                if alias_norm:
                    self.canonical.setdefault(alias_norm, display)
        self.patterns: dict[str, list[str]] = {}
        for norm, display in self.canonical.items():
            self.patterns.setdefault(display, []).append(norm)

    def resolve(self, dependum_name: str) -> str:
        norm = normalize_name(dependum_name)
        return self.canonical.get(norm, dependum_name)

    def mentioned_types(self, task_name: str) -> list[str]:
        norm = normalize_name(task_name)
        found = []
        for display, patterns in self.patterns.items():
            if any(p in norm for p in patterns):
                found.append(display)
        return found


def _verb_prefix(name_norm: str, verbs: frozenset[str]) -> bool:
    return any(name_norm.startswith(v) for v in verbs)


def infer_roles(model: Model, lexicon: VerbLexicon = DEFAULT_LEXICON) -> tuple[RoleAssignment, ...]:
    """Derive Issuer/Holder/Verifier assignments from task names and issuances.

    Deterministic and total: unknown verbs simply contribute nothing.  The
    result is deduplicated and sorted by (actor, credential type, role).
    """
    catalog = CredentialCatalog(model)
    found: set[tuple[Identifier, str, SsiRole]] = set()
    for actor in model.actors:
        for elem in actor.elements:
            if elem.kind is not ElementKind.TASK:
                continue
            name_norm = normalize_name(elem.name)
            for ctype in catalog.mentioned_types(elem.name):
                if _verb_prefix(name_norm, lexicon.issue_verbs):
                    found.add((actor.id, ctype, SsiRole.ISSUER))
                elif _verb_prefix(name_norm, lexicon.provide_verbs):
                    found.add((actor.id, ctype, SsiRole.HOLDER))
                elif _verb_prefix(name_norm, lexicon.check_verbs):
                    found.add((actor.id, ctype, SsiRole.VERIFIER))

    # Receiving an issuance makes the depender a holder even without a task.
    for dep in model.dependencies:
        if dep.kind is not ElementKind.RESOURCE:
            continue
        ctype = catalog.resolve(dep.name)
        forced = dep.annotations.get("ssi")
        if forced == "issue" or (dep.dependee, ctype, SsiRole.ISSUER) in found:
            found.add((dep.depender, ctype, SsiRole.HOLDER))

    assignments = [RoleAssignment(actor, ctype, role) for actor, ctype, role in found]
    assignments.sort(key=lambda a: (a.actor, a.credential_type, a.role.value))
    return tuple(assignments)


def _task_with(actor: Actor, verbs: frozenset[str], patterns: Sequence[str]) -> Element | None:
    for elem in actor.elements:
        if elem.kind is not ElementKind.TASK:
            continue
        norm = normalize_name(elem.name)
        if _verb_prefix(norm, verbs) and any(p in norm for p in patterns):
            return elem
    return None


def derive_flows(
    model: Model,
    roles: Sequence[RoleAssignment],
    lexicon: VerbLexicon = DEFAULT_LEXICON,
) -> tuple[CredentialFlow, ...]:
    """Classify each resource dependency as an issuance or a presentation.

    Precedence per dependency: an ``ssi`` annotation wins outright; else a
    dependee that issues the dependum type makes it an issuance; else a
    dependee that holds it facing a depender that verifies it makes it a
    presentation; anything left is recorded as a presentation with
    unresolved evidence, to be surfaced by :func:`lint_ssi`.
    """
    catalog = CredentialCatalog(model)
    role_set = {(a.actor, a.credential_type, a.role) for a in roles}
    flows: list[CredentialFlow] = []
    for dep in model.dependencies:
        if dep.kind is not ElementKind.RESOURCE:
            continue
        ctype = catalog.resolve(dep.name)
        patterns = catalog.patterns.get(ctype, [normalize_name(ctype)])
        forced = dep.annotations.get("ssi")
        if forced in ("issue", "present"):
            kind = FlowKind.ISSUANCE if forced == "issue" else FlowKind.PRESENTATION
            evidence = Evidence(EvidenceKind.ANNOTATION)
        elif (dep.dependee, ctype, SsiRole.ISSUER) in role_set:
            dependee = model.actor(dep.dependee)
            task = _task_with(dependee, lexicon.issue_verbs, patterns) if dependee else None
            kind = FlowKind.ISSUANCE
            evidence = Evidence(EvidenceKind.VERB, task.id if task else None)
        elif (dep.dependee, ctype, SsiRole.HOLDER) in role_set and (
            dep.depender,
            ctype,
            SsiRole.VERIFIER,
        ) in role_set:
            dependee = model.actor(dep.dependee)
            depender = model.actor(dep.depender)
            task = _task_with(dependee, lexicon.provide_verbs, patterns) if dependee else None
            if task is None and depender is not None:
                task = _task_with(depender, lexicon.check_verbs, patterns)
            kind = FlowKind.PRESENTATION
            evidence = Evidence(EvidenceKind.VERB, task.id if task else None)
        else:
            kind = FlowKind.PRESENTATION
            evidence = Evidence(EvidenceKind.UNRESOLVED)
        flows.append(CredentialFlow(dep.id, kind, ctype, dep.dependee, dep.depender, evidence))
    return tuple(flows)


def lint_ssi(
    model: Model,
    roles: Sequence[RoleAssignment],
    flows: Sequence[CredentialFlow],
    overrides: Iterable[TrustOverride] = (),
) -> tuple[ValidationIssue, ...]:
    """Surface overlay blind spots; returns warnings only, sorted (code, subject)."""
    findings: list[ValidationIssue] = []
    for flow in flows:
        if flow.evidence.kind is EvidenceKind.UNRESOLVED:
            findings.append(
                ValidationIssue(
                    "W_FLOW_AMBIGUOUS",
                    flow.dependency,
                    f"cannot tell whether {flow.credential_type!r} is issued or presented here",
                )
            )

    override_types = {o.credential_type for o in overrides if o.action == "add"}
    issuer_types = {a.credential_type for a in roles if a.role is SsiRole.ISSUER}
    presented = sorted({f.credential_type for f in flows if f.kind is FlowKind.PRESENTATION})
    for ctype in presented:
        if ctype not in issuer_types and ctype not in override_types:
            findings.append(
                ValidationIssue("W_NO_ISSUER", ctype, f"{ctype!r} is presented but nobody issues it")
            )

    flow_targets = {(f.receiver, f.credential_type) for f in flows}
    for assignment in roles:
        if assignment.role is SsiRole.VERIFIER and (assignment.actor, assignment.credential_type) not in flow_targets:
            findings.append(
                ValidationIssue(
                    "W_ORPHAN_VERIFIER",
                    assignment.actor,
                    f"verifies {assignment.credential_type!r} but no such credential flows to it",
                )
            )

    findings.sort(key=lambda i: (i.code, i.offending_id))
    return tuple(findings)


def build_trust_registry(
    roles: Sequence[RoleAssignment],
    flows: Sequence[CredentialFlow],
    did_of: Mapping[Identifier, str],
    overrides: Iterable[TrustOverride] = (),
) -> TrustRegistry:
    """Assemble per-verifier accepted-issuer sets.

    Default policy: a verifier of T accepts exactly the DIDs of the model's
    issuers of T.  Overrides then add or remove specific DIDs, which is how
    issuers outside the model enter.  An override naming a pair that is not
    a Verifier assignment raises :class:`TrustPolicyError`.
    """
    for flow in flows:
        if flow.kind is FlowKind.ISSUANCE and flow.sender not in did_of:
            raise ValueError(f"didOf is missing issuer actor {flow.sender!r}")
    issuers_by_type: dict[str, list[Identifier]] = {}
    verifier_pairs: set[tuple[Identifier, str]] = set()
    for assignment in roles:
        if assignment.role is SsiRole.ISSUER:
            if assignment.actor not in did_of:
                raise ValueError(f"didOf is missing issuer actor {assignment.actor!r}")
            issuers_by_type.setdefault(assignment.credential_type, []).append(assignment.actor)
        elif assignment.role is SsiRole.VERIFIER:
            verifier_pairs.add((assignment.actor, assignment.credential_type))

    accepted: dict[tuple[Identifier, str], set[str]] = {
        pair: {did_of[a] for a in issuers_by_type.get(pair[1], [])} for pair in sorted(verifier_pairs)
    }
    for override in overrides:
        pair = (override.verifier, override.credential_type)
        if pair not in accepted:
            raise TrustPolicyError(
                f"{override.verifier!r} holds no Verifier role for {override.credential_type!r}"
            )
        if override.action == "add":
            accepted[pair].add(override.issuer_did)
        else:
            accepted[pair].discard(override.issuer_did)
    return TrustRegistry({pair: frozenset(dids) for pair, dids in accepted.items()})
