"""Credential lifecycle primitives: keys, DIDs, issuance, presentation, checks.

Everything here is real cryptography, not simulation bookkeeping.  A
credential is a canonically serialized claim payload, content-addressed by
SHA-256 and signed by its issuer; a presentation wraps a credential together
with a holder-signed proof of possession bound to a verifier-chosen nonce.

Verification runs four independent checks, always in this order:

1. ``integrity``: the credential id equals the hash of its payload
2. ``issuerSignature``: the issuer's signature verifies under the key the
   directory holds for the issuer DID (an unregistered issuer fails here)
3. ``subjectBinding``: the holder proof verifies under the presenter's own
   DID key, the presenter is the credential's holder, and the nonce matches
   the one the verifier handed out
4. ``issuerTrusted``: the issuer DID is in the verifier's accepted set

The first failing check names the failure reason; later checks still run so
callers always see all four flags.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Mapping, Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, PrivateFormat, PublicFormat, NoEncryption

from .overlay import TrustRegistry

DID_PREFIX = "did:sim:"
NONCE_LENGTH = 16
SEED_LENGTH = 32

CHECK_ORDER = ("integrity", "issuerSignature", "subjectBinding", "issuerTrusted")


class DidResolutionError(KeyError):
    code = "E_DID_UNRESOLVED"


class SelfIssueError(ValueError):
    code = "E_SELF_ISSUE"


_B58_ALPHABET = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"
_B58_INDEX = {c: i for i, c in enumerate(_B58_ALPHABET)}


def base58_encode(raw: bytes) -> str:
    zeros = len(raw) - len(raw.lstrip(b"\x00"))
    value = int.from_bytes(raw, "big")
    digits = []
    while value:
        value, rem = divmod(value, 58)
        digits.append(_B58_ALPHABET[rem])
    return "1" * zeros + "".join(reversed(digits))


def base58_decode(text: str) -> bytes:
    value = 0
    for char in text:
        if char not in _B58_INDEX:
            raise ValueError(f"invalid base58 character {char!r}")
        value = value * 58 + _B58_INDEX[char]
    zeros = len(text) - len(text.lstrip("1"))
    body = value.to_bytes((value.bit_length() + 7) // 8, "big") if value else b""
    return b"\x00" * zeros + body


@dataclass(frozen=True)
class KeyPair:
    private_key: bytes
    public_key: bytes


@dataclass(frozen=True)
class DidDocument:
    id: str
    verification_key: bytes


class SignatureScheme(Protocol):
    name: str

    def keypair_from_seed(self, seed: bytes) -> KeyPair: ...

    def sign(self, private_key: bytes, message: bytes) -> bytes: ...

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool: ...


class Ed25519Scheme:
    name = "Ed25519"

    def keypair_from_seed(self, seed: bytes) -> KeyPair:
        if len(seed) != SEED_LENGTH:
            raise ValueError(f"seed must be {SEED_LENGTH} bytes, got {len(seed)}")
        private = Ed25519PrivateKey.from_private_bytes(seed)
        return KeyPair(
            private_key=private.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption()),
            public_key=private.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw),
        )

    def sign(self, private_key: bytes, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(private_key).sign(message)

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
            return True
        except (InvalidSignature, ValueError):
            return False


DEFAULT_SCHEME = Ed25519Scheme()


def generate_keypair(seed: bytes, scheme: SignatureScheme = DEFAULT_SCHEME) -> KeyPair:
    return scheme.keypair_from_seed(seed)


def did_from_public_key(public_key: bytes) -> str:
    if len(public_key) != 32:
        raise ValueError("expected a 32-byte public key")
    return DID_PREFIX + base58_encode(public_key)


def decode_did(did: str) -> bytes:
    if not did.startswith(DID_PREFIX):
        raise ValueError(f"not a {DID_PREFIX!r} DID: {did!r}")
    raw = base58_decode(did[len(DID_PREFIX):])
    if len(raw) != 32:
        raise ValueError("DID does not encode a 32-byte key")
    return raw


def resolve_did(did: str, directory: Mapping[str, DidDocument]) -> DidDocument:
    doc = directory.get(did)
    if doc is None:
        raise DidResolutionError(did)
    return doc


def canonical_bytes(value) -> bytes:
    """Canonical JSON encoding: sorted keys, no whitespace, raw UTF-8."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


@dataclass(frozen=True)
class Credential:
    id: str
    type: str
    issuer: str
    subject: str
    holder: str
    claims: Mapping[str, str]
    issued_at: int
    signature: bytes

    def payload(self) -> dict:
        return credential_payload(self.type, self.issuer, self.subject, self.holder, self.claims, self.issued_at)


@dataclass(frozen=True)
class Presentation:
    credential: Credential
    presenter: str
    nonce: bytes
    holder_proof: bytes


@dataclass(frozen=True)
class CredentialCheck:
    integrity: bool
    issuer_signature: bool
    reason: str = ""


@dataclass(frozen=True)
class VerificationOutcome:
    integrity: bool
    issuer_signature: bool
    subject_binding: bool
    issuer_trusted: bool

    @property
    def verdict(self) -> bool:
        return self.integrity and self.issuer_signature and self.subject_binding and self.issuer_trusted

    @property
    def fail_reason(self) -> str:
        flags = (self.integrity, self.issuer_signature, self.subject_binding, self.issuer_trusted)
        for name, ok in zip(CHECK_ORDER, flags):
            if not ok:
                return name
        return ""


def credential_payload(
    credential_type: str,
    issuer: str,
    subject: str,
    holder: str,
    claims: Mapping[str, str],
    issued_at: int,
) -> dict:
    return {
        "claims": dict(claims),
        "holder": holder,
        "issuedAt": issued_at,
        "issuer": issuer,
        "subject": subject,
        "type": credential_type,
    }


def _check_claims(claims: Mapping[str, str]) -> None:
    for key, value in claims.items():
        if not isinstance(key, str) or not key:
            raise ValueError("claim keys must be non-empty strings")
        if not isinstance(value, str):
            raise ValueError(f"claim {key!r} must map to a string")


def issue_credential(
    issuer_keys: KeyPair,
    issuer_did: str,
    subject_did: str,
    holder_did: str,
    credential_type: str,
    claims: Mapping[str, str],
    issued_at: int,
    scheme: SignatureScheme = DEFAULT_SCHEME,
) -> Credential:
    """Create a content-addressed, issuer-signed credential.

    Issuing to oneself is rejected: possession proofs would be vacuous.
    """
    if holder_did == issuer_did:
        raise SelfIssueError(f"issuer {issuer_did} cannot hold its own credential")
    _check_claims(claims)
    payload = credential_payload(credential_type, issuer_did, subject_did, holder_did, claims, issued_at)
    raw = canonical_bytes(payload)
    return Credential(
        id=hashlib.sha256(raw).hexdigest(),
        type=credential_type,
        issuer=issuer_did,
        subject=subject_did,
        holder=holder_did,
        claims=dict(claims),
        issued_at=issued_at,
        signature=scheme.sign(issuer_keys.private_key, raw),
    )


def verify_credential(
    credential: Credential,
    directory: Mapping[str, DidDocument],
    scheme: SignatureScheme = DEFAULT_SCHEME,
) -> CredentialCheck:
    raw = canonical_bytes(credential.payload())
    integrity = hashlib.sha256(raw).hexdigest() == credential.id
    try:
        issuer_doc = resolve_did(credential.issuer, directory)
    except DidResolutionError:
        return CredentialCheck(integrity=integrity, issuer_signature=False, reason=DidResolutionError.code)
    issuer_signature = scheme.verify(issuer_doc.verification_key, raw, credential.signature)
    return CredentialCheck(integrity=integrity, issuer_signature=issuer_signature)


def proof_message(credential_id: str, nonce: bytes) -> bytes:
    return credential_id.encode("utf-8") + nonce


def create_presentation(
    holder_keys: KeyPair,
    presenter_did: str,
    credential: Credential,
    nonce: bytes,
    scheme: SignatureScheme = DEFAULT_SCHEME,
) -> Presentation:
    if len(nonce) != NONCE_LENGTH:
        raise ValueError(f"nonce must be {NONCE_LENGTH} bytes, got {len(nonce)}")
    return Presentation(
        credential=credential,
        presenter=presenter_did,
        nonce=nonce,
        holder_proof=scheme.sign(holder_keys.private_key, proof_message(credential.id, nonce)),
    )


def verify_presentation(
    presentation: Presentation,
    directory: Mapping[str, DidDocument],
    trust: TrustRegistry,
    verifier: str,
    expected_nonce: bytes,
    scheme: SignatureScheme = DEFAULT_SCHEME,
) -> VerificationOutcome:
    """Run all four checks on a presentation.

    The issuer key comes from the directory (issuers must be registered);
    the holder proof is checked against the key embedded in the presenter's
    own DID, since possession, not registration, is what it demonstrates.
    """
    credential = presentation.credential
    cred_check = verify_credential(credential, directory, scheme)

    try:
        presenter_key = decode_did(presentation.presenter)
        proof_ok = scheme.verify(
            presenter_key,
            proof_message(credential.id, presentation.nonce),
            presentation.holder_proof,
        )
    except ValueError:
        proof_ok = False
    subject_binding = (
        proof_ok
        and presentation.presenter == credential.holder
        and presentation.nonce == expected_nonce
    )

    return VerificationOutcome(
        integrity=cred_check.integrity,
        issuer_signature=cred_check.issuer_signature,
        subject_binding=subject_binding,
        issuer_trusted=trust.is_trusted(verifier, credential.type, credential.issuer),
    )
