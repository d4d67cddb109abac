"""Deterministic message-passing execution of a credential ecosystem.

Each actor becomes an agent with an Ed25519 keypair (derived from the run
seed and the actor id), a wallet, and a small set of reactive behaviors
compiled from the derived credential flows:

- the depender of an issuance asks for the credential at tick 0 and retries
  on a timer until it arrives or retries are exhausted;
- an issuer answers once every one of its own check tasks is Satisfied, and
  activates those checks (sending nonce-fresh proof requests) when a request
  arrives; an issuer with a "send copy" task also mails the credential
  digest to the named actor;
- a holder answers proof requests from its wallet, deferring the answer
  until the credential arrives if it must;
- a verifier runs the four cryptographic checks on each presentation, plus
  a digest comparison against its record store when a "check ... copy" task
  exists, then reports the verdict back to the presenter.

Task labels move as the run progresses (Denied is terminal), and the final
labels come from propagating them through the goal model.  Time is a tick
counter driven by a single delivery queue; randomness (message drops, nonce
bytes) comes from one SplitMix64 stream, so a (model, agents, config)
triple always reproduces the same trace, byte for byte.
"""

from __future__ import annotations

import hashlib
import heapq
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .credentials import (
    Credential,
    DidDocument,
    KeyPair,
    Presentation,
    create_presentation,
    did_from_public_key,
    generate_keypair,
    issue_credential,
    verify_presentation,
)
from .model import Dependency, ElementKind, Identifier, Model
from .overlay import (
    CredentialCatalog,
    CredentialFlow,
    FlowKind,
    RoleAssignment,
    SsiRole,
    TrustRegistry,
    VerbLexicon,
    DEFAULT_LEXICON,
    normalize_name,
)
from .propagation import LabelState, evaluate_goals

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Tiny deterministic PRNG; the only randomness source in a run."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def next_nonce(self) -> bytes:
        return self.next_u64().to_bytes(8, "big") + self.next_u64().to_bytes(8, "big")


def actor_key_seed(seed: int, actor_id: Identifier) -> bytes:
    return hashlib.sha256((seed & _MASK64).to_bytes(8, "big") + actor_id.encode("utf-8")).digest()


def subject_key_seed(seed: int, subject: str) -> bytes:
    # NUL separates the namespace from actor ids, which never contain it.
    return hashlib.sha256((seed & _MASK64).to_bytes(8, "big") + b"\x00subject:" + subject.encode("utf-8")).digest()


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    latency: Mapping[tuple[Identifier, Identifier], int] = field(default_factory=dict)
    default_latency: int = 1
    drop_probability: float = 0.0
    max_retries: int = 3
    retry_timeout: int = 10
    max_ticks: int = 10000

    def __post_init__(self) -> None:
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must be within [0, 1]")
        if self.default_latency < 0 or any(v < 0 for v in self.latency.values()):
            raise ValueError("latencies must be non-negative")
        if self.max_retries < 0 or self.retry_timeout <= 0 or self.max_ticks <= 0:
            raise ValueError("retry and tick bounds must be positive")

    def latency_between(self, sender: Identifier, receiver: Identifier) -> int:
        return self.latency.get((sender, receiver), self.default_latency)

    def as_trace_dict(self) -> dict:
        return {
            "defaultLatency": self.default_latency,
            "dropProbability": self.drop_probability,
            "latency": {f"{a}->{b}": v for (a, b), v in sorted(self.latency.items())},
            "maxRetries": self.max_retries,
            "maxTicks": self.max_ticks,
            "retryTimeout": self.retry_timeout,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class VerifyBehavior:
    """Run the checks of one presentation flow when the check tasks activate."""

    flow: Identifier
    credential_type: str
    presenter: Identifier
    check_task_ids: tuple[Identifier, ...]
    require_copy: bool = False
    purpose: str | None = None
    kickoff: bool = False


@dataclass(frozen=True)
class IssueBehavior:
    """Answer issuance requests for one flow once every gate task is Satisfied."""

    flow: Identifier
    credential_type: str
    recipient: Identifier
    issue_task_id: Identifier | None
    gate_task_ids: tuple[Identifier, ...]
    copy_to: Identifier | None = None
    copy_task_id: Identifier | None = None
    child_subject: bool = False


@dataclass(frozen=True)
class RequestBehavior:
    """Kick off one issuance flow at tick 0 and await the credential."""

    flow: Identifier
    credential_type: str
    issuer: Identifier
    await_task_id: Identifier | None


@dataclass(frozen=True)
class AnswerBehavior:
    """Answer proof requests for one credential type from the wallet."""

    credential_type: str


Behavior = VerifyBehavior | IssueBehavior | RequestBehavior | AnswerBehavior


@dataclass(frozen=True)
class BootstrapCredential:
    credential_type: str
    issuer: Identifier
    holder: Identifier
    child_subject: bool = False


@dataclass(frozen=True)
class AgentSpec:
    actor: Identifier
    did: str
    keys: KeyPair
    wallet: tuple[Credential, ...]
    roles: tuple[RoleAssignment, ...]
    behaviors: tuple[Behavior, ...]
    record_store: Mapping[str, tuple[str, ...]]
    trust: TrustRegistry
    prelabeled: tuple[Identifier, ...] = ()


class CompileError(ValueError):
    code = "E_COMPILE_ROLE"


def derive_bootstrap(
    model: Model,
    roles: Sequence[RoleAssignment],
    flows: Sequence[CredentialFlow],
) -> tuple[BootstrapCredential, ...]:
    """Pre-issue whatever presented credentials no in-run issuance provides."""
    issuance_targets = {(f.credential_type, f.receiver) for f in flows if f.kind is FlowKind.ISSUANCE}
    issuers_by_type: dict[str, Identifier] = {}
    for assignment in roles:
        if assignment.role is SsiRole.ISSUER:
            issuers_by_type.setdefault(assignment.credential_type, assignment.actor)
    out: list[BootstrapCredential] = []
    seen: set[tuple[str, Identifier]] = set()
    for flow in flows:
        if flow.kind is not FlowKind.PRESENTATION:
            continue
        key = (flow.credential_type, flow.sender)
        if key in issuance_targets or key in seen:
            continue
        issuer = issuers_by_type.get(flow.credential_type)
        if issuer is None or issuer == flow.sender:
            continue
        seen.add(key)
        out.append(BootstrapCredential(flow.credential_type, issuer, flow.sender))
    return tuple(out)


def _claims_for(credential_type: str, issuer: Identifier, holder: Identifier, child_subject: bool) -> dict[str, str]:
    return {
        "credentialType": credential_type,
        "holderActor": holder,
        "issuerActor": issuer,
        "subjectActor": "child" if child_subject else holder,
    }


def compile_agents(
    model: Model,
    roles: Sequence[RoleAssignment],
    flows: Sequence[CredentialFlow],
    trust: TrustRegistry,
    bootstrap: Iterable[BootstrapCredential] = (),
    seed: int = 0,
    lexicon: VerbLexicon = DEFAULT_LEXICON,
) -> tuple[AgentSpec, ...]:
    """Turn actors plus derived flows into ready-to-run agent specs.

    Raises :class:`CompileError` when a flow references an actor that lacks
    the role the flow requires (issuer for issuances, holder and verifier
    for presentations).
    """
    catalog = CredentialCatalog(model)
    role_set = {(a.actor, a.credential_type, a.role) for a in roles}
    keys = {actor.id: generate_keypair(actor_key_seed(seed, actor.id)) for actor in model.actors}
    dids = {actor.id: did_from_public_key(keys[actor.id].public_key) for actor in model.actors}
    dep_by_id = {d.id: d for d in model.dependencies}

    verify_behaviors: dict[Identifier, list[VerifyBehavior]] = {a.id: [] for a in model.actors}
    issue_behaviors: dict[Identifier, list[IssueBehavior]] = {a.id: [] for a in model.actors}
    request_behaviors: dict[Identifier, list[RequestBehavior]] = {a.id: [] for a in model.actors}
    answer_types: dict[Identifier, list[str]] = {a.id: [] for a in model.actors}

    def check_tasks_of(actor_id: Identifier) -> list[Identifier]:
        actor = model.actor(actor_id)
        out = []
        for elem in actor.elements:
            if elem.kind is not ElementKind.TASK:
                continue
            norm = normalize_name(elem.name)
            if any(norm.startswith(v) for v in lexicon.check_verbs) and catalog.mentioned_types(elem.name):
                out.append(elem.id)
        return out

    for flow in flows:
        dep = dep_by_id[flow.dependency]
        patterns = catalog.patterns.get(flow.credential_type, [normalize_name(flow.credential_type)])
        if flow.kind is FlowKind.ISSUANCE:
            if (flow.sender, flow.credential_type, SsiRole.ISSUER) not in role_set:
                raise CompileError(f"{flow.sender!r} is not an issuer of {flow.credential_type!r}")
            issuer_actor = model.actor(flow.sender)
            issue_task = _first_task(issuer_actor, lexicon.issue_verbs, patterns)
            copy_to, copy_task = _copy_target(model, issuer_actor)
            issue_behaviors[flow.sender].append(
                IssueBehavior(
                    flow=flow.dependency,
                    credential_type=flow.credential_type,
                    recipient=flow.receiver,
                    issue_task_id=issue_task,
                    gate_task_ids=tuple(check_tasks_of(flow.sender)) + _needed_resources(issuer_actor, issue_task),
                    copy_to=copy_to,
                    copy_task_id=copy_task,
                    child_subject=dep.annotations.get("ssi.subject") == "child",
                )
            )
            request_behaviors[flow.receiver].append(
                RequestBehavior(
                    flow=flow.dependency,
                    credential_type=flow.credential_type,
                    issuer=flow.sender,
                    await_task_id=dep.depender_element,
                )
            )
        else:
            if (flow.receiver, flow.credential_type, SsiRole.VERIFIER) not in role_set:
                raise CompileError(f"{flow.receiver!r} is not a verifier of {flow.credential_type!r}")
            if (flow.sender, flow.credential_type, SsiRole.HOLDER) not in role_set:
                raise CompileError(f"{flow.sender!r} is not a holder of {flow.credential_type!r}")
            verifier_actor = model.actor(flow.receiver)
            checks = tuple(
                e for e in check_tasks_of(flow.receiver)
                if any(p in normalize_name(verifier_actor.element(e).name) for p in patterns)
            )
            verify_behaviors[flow.receiver].append(
                VerifyBehavior(
                    flow=flow.dependency,
                    credential_type=flow.credential_type,
                    presenter=flow.sender,
                    check_task_ids=checks,
                    require_copy=any(
                        "copy" in normalize_name(verifier_actor.element(e).name) for e in checks
                    ),
                    purpose=dep.annotations.get("ssi.purpose"),
                )
            )
            if flow.credential_type not in answer_types[flow.sender]:
                answer_types[flow.sender].append(flow.credential_type)

    # A check task that gates no issuance of its agent has nothing to wait
    # for, so its verification starts at tick 0.
    for actor_id, behaviors in verify_behaviors.items():
        gated = {t for b in issue_behaviors[actor_id] for t in b.gate_task_ids}
        verify_behaviors[actor_id] = [
            b if (set(b.check_task_ids) & gated or not b.check_task_ids) else _with_kickoff(b)
            for b in behaviors
        ]

    wallets: dict[Identifier, list[Credential]] = {a.id: [] for a in model.actors}
    prelabeled: dict[Identifier, list[Identifier]] = {a.id: [] for a in model.actors}
    for entry in bootstrap:
        issuer_actor = model.actor(entry.issuer)
        holder_actor = model.actor(entry.holder)
        if issuer_actor is None or holder_actor is None:
            raise CompileError(f"bootstrap references unknown actor {entry.issuer!r} or {entry.holder!r}")
        subject_did = (
            did_from_public_key(generate_keypair(subject_key_seed(seed, "child")).public_key)
            if entry.child_subject
            else dids[entry.holder]
        )
        credential = issue_credential(
            keys[entry.issuer],
            dids[entry.issuer],
            subject_did,
            dids[entry.holder],
            entry.credential_type,
            _claims_for(entry.credential_type, entry.issuer, entry.holder, entry.child_subject),
            issued_at=0,
        )
        wallets[entry.holder].append(credential)
        patterns = catalog.patterns.get(entry.credential_type, [normalize_name(entry.credential_type)])
        task = _first_task(issuer_actor, lexicon.issue_verbs, patterns)
        if task is not None:
            prelabeled[entry.issuer].append(task)

    agents = []
    for actor in model.actors:
        behaviors: list[Behavior] = []
        behaviors.extend(verify_behaviors[actor.id])
        behaviors.extend(issue_behaviors[actor.id])
        behaviors.extend(request_behaviors[actor.id])
        behaviors.extend(AnswerBehavior(t) for t in answer_types[actor.id])
        agents.append(
            AgentSpec(
                actor=actor.id,
                did=dids[actor.id],
                keys=keys[actor.id],
                wallet=tuple(wallets[actor.id]),
                roles=tuple(a for a in roles if a.actor == actor.id),
                behaviors=tuple(behaviors),
                record_store={},
                trust=trust,
                prelabeled=tuple(prelabeled[actor.id]),
            )
        )
    return tuple(agents)


def _with_kickoff(behavior: VerifyBehavior) -> VerifyBehavior:
    return VerifyBehavior(
        flow=behavior.flow,
        credential_type=behavior.credential_type,
        presenter=behavior.presenter,
        check_task_ids=behavior.check_task_ids,
        require_copy=behavior.require_copy,
        purpose=behavior.purpose,
        kickoff=True,
    )


def _first_task(actor, verbs: frozenset[str], patterns: Sequence[str]) -> Identifier | None:
    if actor is None:
        return None
    for elem in actor.elements:
        if elem.kind is not ElementKind.TASK:
            continue
        norm = normalize_name(elem.name)
        if any(norm.startswith(v) for v in verbs) and any(p in norm for p in patterns):
            return elem.id
    return None


def _needed_resources(actor, issue_task: Identifier | None) -> tuple[Identifier, ...]:
    from .model import LinkKind

    if actor is None or issue_task is None:
        return ()
    return tuple(l.source for l in actor.links if l.kind is LinkKind.NEEDED_BY and l.target == issue_task)


def _copy_target(model: Model, actor) -> tuple[Identifier | None, Identifier | None]:
    if actor is None:
        return None, None
    for elem in actor.elements:
        if elem.kind is not ElementKind.TASK:
            continue
        norm = normalize_name(elem.name)
        if "send" in norm and "copy" in norm:
            for other in model.actors:
                if other.id != actor.id and normalize_name(other.name) and normalize_name(other.name) in norm:
                    return other.id, elem.id
    return None, None


@dataclass(frozen=True)
class Message:
    kind: str
    flow: Identifier | None
    credential_type: str
    from_actor: Identifier
    to_actor: Identifier
    from_did: str
    to_did: str
    send_tick: int
    nonce: bytes | None = None
    credential: Credential | None = None
    presentation: Presentation | None = None
    verdict: bool | None = None
    digest: str | None = None
    purpose: str | None = None
    copy_task: Identifier | None = None


@dataclass(frozen=True)
class Trace:
    config: Mapping[str, object]
    events: tuple[Mapping[str, object], ...]
    final_labels: Mapping[Identifier, str]
    termination: str
    final_tick: int

    def lines(self) -> list[str]:
        from .credentials import canonical_bytes

        head = canonical_bytes({"config": dict(self.config)}).decode("utf-8")
        body = [canonical_bytes(dict(e)).decode("utf-8") for e in self.events]
        tail = canonical_bytes(
            {
                "finalLabels": dict(self.final_labels),
                "finalTick": self.final_tick,
                "termination": self.termination,
            }
        ).decode("utf-8")
        return [head, *body, tail]

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"


class _VerifyState:
    def __init__(self, behavior: VerifyBehavior) -> None:
        self.behavior = behavior
        self.nonce: bytes | None = None
        self.attempt = 0
        self.started = False
        self.resolved = False


class _RequestState:
    def __init__(self, behavior: RequestBehavior) -> None:
        self.behavior = behavior
        self.attempt = 0
        self.resolved = False


class _AgentState:
    def __init__(self, spec: AgentSpec) -> None:
        self.spec = spec
        self.wallet: dict[str, Credential] = {}
        for credential in spec.wallet:
            self.wallet[credential.type] = credential
        self.record_store: dict[str, list[str]] = {k: list(v) for k, v in spec.record_store.items()}
        self.deferred: list[Message] = []
        self.verifications: dict[Identifier, _VerifyState] = {
            b.flow: _VerifyState(b) for b in spec.behaviors if isinstance(b, VerifyBehavior)
        }
        self.requests: dict[Identifier, _RequestState] = {
            b.flow: _RequestState(b) for b in spec.behaviors if isinstance(b, RequestBehavior)
        }
        self.issue_by_flow: dict[Identifier, IssueBehavior] = {
            b.flow: b for b in spec.behaviors if isinstance(b, IssueBehavior)
        }
        self.answer_types = {b.credential_type for b in spec.behaviors if isinstance(b, AnswerBehavior)}
        self.pending_issue: dict[Identifier, str] = {}
        self.issued: dict[Identifier, Credential] = {}


class _Simulation:
    def __init__(
        self,
        model: Model,
        agents: Sequence[AgentSpec],
        config: SimConfig,
        intercept: Callable[[Message, int], Message | None] | None,
    ) -> None:
        self.model = model
        self.config = config
        self.intercept = intercept
        self.prng = SplitMix64(config.seed)
        self.agents = {spec.actor: _AgentState(spec) for spec in agents}
        self.directory = {spec.did: DidDocument(spec.did, spec.keys.public_key) for spec in agents}
        self.dep_by_id: dict[Identifier, Dependency] = {d.id: d for d in model.dependencies}
        self.subject_dids: dict[str, str] = {}
        self.labels: dict[Identifier, LabelState] = {}
        self.events: list[dict] = []
        self.heap: list[tuple[int, int, tuple]] = []
        self.order = 0
        self.seq = 0
        self.tick = 0

    # -- event plumbing ---------------------------------------------------

    def _push(self, tick: int, entry: tuple) -> None:
        heapq.heappush(self.heap, (tick, self.order, entry))
        self.order += 1

    def _event(self, kind: str, **fields) -> None:
        record = {"kind": kind, "seq": self.seq, "tick": self.tick}
        record.update(fields)
        self.events.append(record)
        self.seq += 1

    def _message_summary(self, msg: Message) -> dict:
        summary: dict = {
            "credentialType": msg.credential_type,
            "flow": msg.flow,
            "from": msg.from_actor,
            "to": msg.to_actor,
            "type": msg.kind,
        }
        if msg.nonce is not None:
            summary["nonce"] = msg.nonce.hex()
        if msg.credential is not None:
            summary["credentialId"] = msg.credential.id
        if msg.presentation is not None:
            summary["credentialId"] = msg.presentation.credential.id
            summary["nonce"] = msg.presentation.nonce.hex()
        if msg.verdict is not None:
            summary["verdict"] = msg.verdict
        if msg.digest is not None:
            summary["digest"] = msg.digest
        if msg.purpose is not None:
            summary["purpose"] = msg.purpose
        return summary

    def _send(self, msg: Message) -> None:
        self._event("Send", message=self._message_summary(msg))
        latency = self.config.latency_between(msg.from_actor, msg.to_actor)
        self._push(self.tick + latency, ("deliver", msg))

    def _set_label(self, element_id: Identifier | None, label: LabelState) -> None:
        if element_id is None:
            return
        current = self.labels.get(element_id, LabelState.UNKNOWN)
        if current is label or current is LabelState.DENIED:
            return
        self.labels[element_id] = label
        self._event("GoalUpdate", element=element_id, label=label.value)

    # -- behavior activation ----------------------------------------------

    def _subject_did(self, child_subject: bool, holder_did: str) -> str:
        if not child_subject:
            return holder_did
        if "child" not in self.subject_dids:
            keys = generate_keypair(subject_key_seed(self.config.seed, "child"))
            self.subject_dids["child"] = did_from_public_key(keys.public_key)
        return self.subject_dids["child"]

    def _start_verification(self, agent: _AgentState, state: _VerifyState) -> None:
        if state.started or state.resolved:
            return
        state.started = True
        state.attempt = 0
        self._send_proof_request(agent, state)

    def _send_proof_request(self, agent: _AgentState, state: _VerifyState) -> None:
        behavior = state.behavior
        presenter = self.agents[behavior.presenter]
        state.nonce = self.prng.next_nonce()
        self._send(
            Message(
                kind="ProofRequest",
                flow=behavior.flow,
                credential_type=behavior.credential_type,
                from_actor=agent.spec.actor,
                to_actor=behavior.presenter,
                from_did=agent.spec.did,
                to_did=presenter.spec.did,
                send_tick=self.tick,
                nonce=state.nonce,
                purpose=behavior.purpose,
            )
        )
        self._push(self.tick + self.config.retry_timeout, ("timer", "verify", agent.spec.actor, behavior.flow))

    def _send_issuance_request(self, agent: _AgentState, state: _RequestState) -> None:
        behavior = state.behavior
        issuer = self.agents[behavior.issuer]
        self._send(
            Message(
                kind="IssuanceRequest",
                flow=behavior.flow,
                credential_type=behavior.credential_type,
                from_actor=agent.spec.actor,
                to_actor=behavior.issuer,
                from_did=agent.spec.did,
                to_did=issuer.spec.did,
                send_tick=self.tick,
            )
        )
        self._push(self.tick + self.config.retry_timeout, ("timer", "request", agent.spec.actor, behavior.flow))

    def _gate_labels(self, behavior: IssueBehavior) -> list[LabelState]:
        return [self.labels.get(t, LabelState.UNKNOWN) for t in behavior.gate_task_ids]

    def _try_issue(self, agent: _AgentState) -> None:
        for flow_id in list(agent.pending_issue):
            behavior = agent.issue_by_flow[flow_id]
            gates = self._gate_labels(behavior)
            if any(g is LabelState.DENIED for g in gates):
                continue
            if not all(g is LabelState.SATISFIED for g in gates):
                continue
            recipient = self.agents[behavior.recipient]
            holder_did = recipient.spec.did
            credential = issue_credential(
                agent.spec.keys,
                agent.spec.did,
                self._subject_did(behavior.child_subject, holder_did),
                holder_did,
                behavior.credential_type,
                _claims_for(behavior.credential_type, agent.spec.actor, behavior.recipient, behavior.child_subject),
                issued_at=self.tick,
            )
            agent.issued[flow_id] = credential
            del agent.pending_issue[flow_id]
            self._event(
                "Issue",
                credentialId=credential.id,
                credentialType=behavior.credential_type,
                flow=flow_id,
                holder=behavior.recipient,
                issuer=agent.spec.actor,
                subject=credential.subject,
            )
            self._set_label(behavior.issue_task_id, LabelState.SATISFIED)
            self._send(
                Message(
                    kind="CredentialIssuance",
                    flow=flow_id,
                    credential_type=behavior.credential_type,
                    from_actor=agent.spec.actor,
                    to_actor=behavior.recipient,
                    from_did=agent.spec.did,
                    to_did=holder_did,
                    send_tick=self.tick,
                    credential=credential,
                )
            )
            if behavior.copy_to is not None:
                copy_target = self.agents[behavior.copy_to]
                self._send(
                    Message(
                        kind="RecordCopy",
                        flow=flow_id,
                        credential_type=behavior.credential_type,
                        from_actor=agent.spec.actor,
                        to_actor=behavior.copy_to,
                        from_did=agent.spec.did,
                        to_did=copy_target.spec.did,
                        send_tick=self.tick,
                        digest=credential.id,
                        copy_task=behavior.copy_task_id,
                    )
                )

    def _activate_gates(self, agent: _AgentState, behavior: IssueBehavior) -> None:
        unsatisfied = {
            t for t in behavior.gate_task_ids if self.labels.get(t, LabelState.UNKNOWN) is not LabelState.SATISFIED
        }
        for state in agent.verifications.values():
            if set(state.behavior.check_task_ids) & unsatisfied:
                self._start_verification(agent, state)

    # -- message handlers -------------------------------------------------

    def _on_issuance_request(self, agent: _AgentState, msg: Message) -> None:
        behavior = agent.issue_by_flow.get(msg.flow)
        if behavior is None or behavior.recipient != msg.from_actor:
            logger.debug("%s ignoring issuance request for %r", agent.spec.actor, msg.flow)
            return
        if msg.flow in agent.issued:
            recipient = self.agents[behavior.recipient]
            self._send(
                Message(
                    kind="CredentialIssuance",
                    flow=msg.flow,
                    credential_type=behavior.credential_type,
                    from_actor=agent.spec.actor,
                    to_actor=behavior.recipient,
                    from_did=agent.spec.did,
                    to_did=recipient.spec.did,
                    send_tick=self.tick,
                    credential=agent.issued[msg.flow],
                )
            )
            return
        agent.pending_issue.setdefault(msg.flow, msg.from_actor)
        self._activate_gates(agent, behavior)
        self._try_issue(agent)

    def _on_proof_request(self, agent: _AgentState, msg: Message) -> None:
        if msg.credential_type not in agent.answer_types:
            logger.debug("%s has no answer behavior for %r", agent.spec.actor, msg.credential_type)
            return
        credential = agent.wallet.get(msg.credential_type)
        if credential is None:
            agent.deferred.append(msg)
            return
        self._answer_proof(agent, msg, credential)

    def _answer_proof(self, agent: _AgentState, msg: Message, credential: Credential) -> None:
        presentation = create_presentation(agent.spec.keys, agent.spec.did, credential, msg.nonce)
        self._send(
            Message(
                kind="ProofPresentation",
                flow=msg.flow,
                credential_type=msg.credential_type,
                from_actor=agent.spec.actor,
                to_actor=msg.from_actor,
                from_did=agent.spec.did,
                to_did=msg.from_did,
                send_tick=self.tick,
                presentation=presentation,
            )
        )

    def _on_proof_presentation(self, agent: _AgentState, msg: Message) -> None:
        state = agent.verifications.get(msg.flow)
        if state is None or state.resolved or not state.started:
            logger.debug("%s ignoring presentation for %r", agent.spec.actor, msg.flow)
            return
        behavior = state.behavior
        presentation = msg.presentation
        outcome = verify_presentation(
            presentation,
            self.directory,
            agent.spec.trust,
            verifier=agent.spec.actor,
            expected_nonce=state.nonce,
        )
        copy_ok: bool | None = None
        if behavior.require_copy:
            copy_ok = presentation.credential.id in agent.record_store.get(behavior.credential_type, [])
        overall = outcome.verdict and copy_ok is not False
        fail_reason = outcome.fail_reason or ("officeCopy" if copy_ok is False else "")
        record = {
            "credentialId": presentation.credential.id,
            "credentialType": behavior.credential_type,
            "flow": behavior.flow,
            "integrity": outcome.integrity,
            "issuerSignature": outcome.issuer_signature,
            "issuerTrusted": outcome.issuer_trusted,
            "presenter": msg.from_actor,
            "subjectBinding": outcome.subject_binding,
            "verdict": overall,
            "verifier": agent.spec.actor,
        }
        if copy_ok is not None:
            record["copyOk"] = copy_ok
        if fail_reason:
            record["failReason"] = fail_reason
        self._event("Verify", **record)
        state.resolved = True
        label = LabelState.SATISFIED if overall else LabelState.DENIED
        for task_id in behavior.check_task_ids:
            self._set_label(task_id, label)
        self._send(
            Message(
                kind="PresentationVerdict",
                flow=msg.flow,
                credential_type=behavior.credential_type,
                from_actor=agent.spec.actor,
                to_actor=msg.from_actor,
                from_did=agent.spec.did,
                to_did=msg.from_did,
                send_tick=self.tick,
                verdict=overall,
            )
        )
        self._try_issue(agent)

    def _on_presentation_verdict(self, agent: _AgentState, msg: Message) -> None:
        dep = self.dep_by_id.get(msg.flow)
        if dep is not None:
            self._set_label(dep.dependee_element, LabelState.SATISFIED if msg.verdict else LabelState.DENIED)

    def _on_credential_issuance(self, agent: _AgentState, msg: Message) -> None:
        credential = msg.credential
        agent.wallet[credential.type] = credential
        state = agent.requests.get(msg.flow)
        if state is not None and not state.resolved:
            state.resolved = True
            self._set_label(state.behavior.await_task_id, LabelState.SATISFIED)
        still_deferred: list[Message] = []
        for deferred in agent.deferred:
            if deferred.credential_type == credential.type:
                self._answer_proof(agent, deferred, credential)
            else:
                still_deferred.append(deferred)
        agent.deferred = still_deferred

    def _on_record_copy(self, agent: _AgentState, msg: Message) -> None:
        agent.record_store.setdefault(msg.credential_type, []).append(msg.digest)
        self._set_label(msg.copy_task, LabelState.SATISFIED)

    _HANDLERS = {
        "IssuanceRequest": _on_issuance_request,
        "ProofRequest": _on_proof_request,
        "ProofPresentation": _on_proof_presentation,
        "PresentationVerdict": _on_presentation_verdict,
        "CredentialIssuance": _on_credential_issuance,
        "RecordCopy": _on_record_copy,
    }

    # -- timers -----------------------------------------------------------

    def _on_timer(self, side: str, actor_id: Identifier, flow_id: Identifier) -> None:
        agent = self.agents[actor_id]
        if side == "request":
            state = agent.requests[flow_id]
            if state.resolved:
                return
            if state.attempt < self.config.max_retries:
                state.attempt += 1
                self._send_issuance_request(agent, state)
            else:
                state.resolved = True
                self._set_label(state.behavior.await_task_id, LabelState.DENIED)
        else:
            state = agent.verifications[flow_id]
            if state.resolved:
                return
            if state.attempt < self.config.max_retries:
                state.attempt += 1
                self._send_proof_request(agent, state)
            else:
                state.resolved = True
                for task_id in state.behavior.check_task_ids:
                    self._set_label(task_id, LabelState.DENIED)

    # -- main loop --------------------------------------------------------

    def run(self) -> Trace:
        for agent in self.agents.values():
            for task_id in agent.spec.prelabeled:
                self._set_label(task_id, LabelState.SATISFIED)
        for agent in self.agents.values():
            for state in agent.verifications.values():
                if state.behavior.kickoff:
                    self._start_verification(agent, state)
            for state in agent.requests.values():
                self._send_issuance_request(agent, state)

        termination = "quiescence"
        while self.heap:
            tick, _, entry = heapq.heappop(self.heap)
            if tick > self.config.max_ticks:
                termination = "timeout"
                self.tick = self.config.max_ticks
                break
            self.tick = tick
            if entry[0] == "timer":
                self._on_timer(entry[1], entry[2], entry[3])
                continue
            msg: Message = entry[1]
            dropped = self.prng.next_float() < self.config.drop_probability
            if not dropped and self.intercept is not None:
                replacement = self.intercept(msg, self.tick)
                if replacement is None:
                    dropped = True
                else:
                    msg = replacement
            if dropped:
                self._event("Drop", message=self._message_summary(msg))
                continue
            self._event("Deliver", message=self._message_summary(msg))
            handler = self._HANDLERS[msg.kind]
            handler(self, self.agents[msg.to_actor], msg)

        final = evaluate_goals(self.model, self.labels)
        return Trace(
            config=self.config.as_trace_dict(),
            events=tuple(self.events),
            final_labels={k: v.value for k, v in sorted(final.items())},
            termination=termination,
            final_tick=self.tick,
        )


def run(
    model: Model,
    agents: Sequence[AgentSpec],
    config: SimConfig,
    intercept: Callable[[Message, int], Message | None] | None = None,
) -> Trace:
    """Execute the compiled agents until quiescence or the tick bound.

    ``intercept`` is a test-harness hook: it sees every message at delivery
    time and may substitute it or return None to force a drop.
    """
    return _Simulation(model, agents, config, intercept).run()


def write_trace(trace: Trace, path) -> None:
    from pathlib import Path

    Path(path).write_text(trace.text(), encoding="utf-8")
