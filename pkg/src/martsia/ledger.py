"""Deterministic in-process ledger with four application contracts.

The chain model is intentionally small: every transaction is applied
synchronously with instant finality, signatures are Ed25519 over a canonical
payload, and addresses are the first 20 bytes of the SHA-256 of the signer's
public key.  Governance (contract deployment, role grants, attribute
publications) requires a majority of the certifier set to co-sign one
transaction.  Rejected transactions change nothing; the full state folds into
one hash for replay comparisons, and the journal of account announcements and
applied transactions replays into an identical ledger.

Contracts:

* ``authority``   registration, commit/open of the generator toss, parameter
                  rlocs, and the on-chain key request/response mailbox
* ``certifier``   append-only list of attribute-assignment rlocs (multisig)
* ``message``     write-once message rlocs plus the policy -> rlocs dictionary
* ``rsa``         per-address public encryption keys for key delivery
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

from .encoding import canonical_json_bytes, parse_json_bytes
from .errors import (
    CommitMismatchError,
    IntegrityError,
    MajorityError,
    MalformedError,
    NotFoundError,
    UnauthorizedError,
)
from . import policy as policy_mod

ROLES = ("Authority", "AttributeCertifier", "DataOwner", "Reader")


def address_from_verify_key(verify_key_bytes: bytes) -> str:
    if not isinstance(verify_key_bytes, (bytes, bytearray)) or len(verify_key_bytes) != 32:
        raise MalformedError("verify key must be 32 raw bytes")
    return "0x" + hashlib.sha256(bytes(verify_key_bytes)).digest()[:20].hex()


@dataclass(frozen=True)
class Account:
    address: str
    verify_key: bytes
    roles: frozenset


@dataclass(frozen=True)
class Transaction:
    sender: str
    contract: str
    method: str
    args: dict
    nonce: int
    signatures: tuple  # ((address, signature_hex), ...)

    def signing_payload(self) -> bytes:
        return canonical_json_bytes(
            {
                "sender": self.sender,
                "contract": self.contract,
                "method": self.method,
                "args": self.args,
                "nonce": self.nonce,
            }
        )

    def to_dict(self) -> dict:
        return {
            "sender": self.sender,
            "contract": self.contract,
            "method": self.method,
            "args": self.args,
            "nonce": self.nonce,
            "signatures": [[a, s] for a, s in self.signatures],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Transaction":
        try:
            return cls(
                sender=data["sender"],
                contract=data["contract"],
                method=data["method"],
                args=dict(data["args"]),
                nonce=int(data["nonce"]),
                signatures=tuple((a, s) for a, s in data["signatures"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedError(f"invalid transaction: {exc}") from None


def sign_transaction(private_key, sender: str, contract: str, method: str,
                     args: dict, nonce: int, co_signers=()) -> Transaction:
    """Build a transaction signed by ``private_key`` plus any co-signers.

    ``private_key``/co-signers are Ed25519 private keys paired with their
    addresses: the sender signs first, co-signers follow.
    """
    tx = Transaction(sender, contract, method, dict(args), nonce, ())
    payload = tx.signing_payload()
    sigs = [(sender, private_key.sign(payload).hex())]
    for addr, key in co_signers:
        sigs.append((addr, key.sign(payload).hex()))
    return Transaction(sender, contract, method, dict(args), nonce, tuple(sigs))


# ---------------------------------------------------------------------------
# contract state


@dataclass
class AuthorityState:
    names: Dict[str, str] = field(default_factory=dict)  # authority name -> address
    commitments: Dict[str, str] = field(default_factory=dict)  # address -> digest hex
    openings: Dict[str, str] = field(default_factory=dict)  # address -> opened bytes hex
    rlocs: Dict[str, dict] = field(default_factory=dict)  # address -> {metadata, params, pubkey}
    key_requests: List[dict] = field(default_factory=list)
    key_responses: List[dict] = field(default_factory=list)

    def address_of(self, name: str) -> str:
        if name not in self.names:
            raise NotFoundError(f"no authority registered under {name!r}")
        return self.names[name]

    def name_of(self, address: str) -> Optional[str]:
        for name, addr in self.names.items():
            if addr == address:
                return name
        return None

    def snapshot(self) -> dict:
        return {
            "names": self.names,
            "commitments": self.commitments,
            "openings": self.openings,
            "rlocs": self.rlocs,
            "key_requests": self.key_requests,
            "key_responses": self.key_responses,
        }


@dataclass
class CertifierState:
    attr_rlocs: List[str] = field(default_factory=list)
    universe: List[str] = field(default_factory=list)  # certified attribute literals
    assignments: Dict[str, List[str]] = field(default_factory=dict)  # reader -> literals

    def snapshot(self) -> dict:
        return {
            "attr_rlocs": self.attr_rlocs,
            "universe": self.universe,
            "assignments": self.assignments,
        }


@dataclass
class MessageState:
    messages: Dict[str, dict] = field(default_factory=dict)  # message_id -> {rloc, sender}
    policy_index: Dict[str, List[str]] = field(default_factory=dict)

    def snapshot(self) -> dict:
        return {"messages": self.messages, "policy_index": self.policy_index}


@dataclass
class RsaKeyState:
    keys: Dict[str, str] = field(default_factory=dict)  # address -> PEM

    def snapshot(self) -> dict:
        return {"keys": self.keys}


class Ledger:
    def __init__(self):
        self.accounts: Dict[str, Account] = {}
        self.nonces: Dict[str, int] = {}
        self.log: List[Transaction] = []
        self.journal: List[tuple] = []  # ordered ("account"|"tx", payload dict)
        self.deployed = False
        self.certifiers: tuple = ()
        self.threshold = 0
        self.authority = AuthorityState()
        self.certifier = CertifierState()
        self.message = MessageState()
        self.rsa = RsaKeyState()

    # -- accounts ----------------------------------------------------------

    def register_account(self, verify_key_bytes: bytes) -> Account:
        """Announce a public key; permissionless, not a transaction."""
        address = address_from_verify_key(verify_key_bytes)
        existing = self.accounts.get(address)
        if existing is not None:
            if existing.verify_key != bytes(verify_key_bytes):
                raise IntegrityError(f"address {address} already bound to another key")
            return existing
        account = Account(address, bytes(verify_key_bytes), frozenset())
        self.accounts[address] = account
        self.journal.append(("account", {"verify_key": account.verify_key.hex()}))
        return account

    def account(self, address: str) -> Account:
        acct = self.accounts.get(address)
        if acct is None:
            raise NotFoundError(f"unknown account {address}")
        return acct

    def has_role(self, address: str, role: str) -> bool:
        acct = self.accounts.get(address)
        return acct is not None and role in acct.roles

    def _require_role(self, address: str, role: str):
        if not self.has_role(address, role):
            raise UnauthorizedError(f"{address} lacks the {role} role")

    def _grant_role(self, address: str, role: str):
        acct = self.account(address)
        self.accounts[address] = Account(acct.address, acct.verify_key, acct.roles | {role})

    def _revoke_role(self, address: str, role: str):
        acct = self.account(address)
        self.accounts[address] = Account(acct.address, acct.verify_key, acct.roles - {role})

    # -- transaction application -------------------------------------------

    def apply(self, tx: Transaction) -> int:
        """Validate and apply; returns the log index.  Rejections mutate nothing."""
        self._check_structure(tx)
        self._check_signatures(tx)
        self._check_nonce(tx)
        handler = self._route(tx)
        handler(tx)  # validates before mutating
        self.nonces[tx.sender] = tx.nonce
        self.log.append(tx)
        self.journal.append(("tx", tx.to_dict()))
        return len(self.log) - 1

    def _check_structure(self, tx: Transaction):
        if not isinstance(tx.args, dict):
            raise MalformedError("transaction args must be an object")
        try:
            canonical_json_bytes(tx.args)
        except (TypeError, ValueError):
            raise MalformedError("transaction args must be JSON-encodable") from None
        if tx.sender not in self.accounts:
            raise NotFoundError(f"sender {tx.sender} is not a registered account")
        if not tx.signatures:
            raise MalformedError("transaction carries no signatures")

    def _check_signatures(self, tx: Transaction):
        payload = tx.signing_payload()
        seen = set()
        sender_signed = False
        for address, sig_hex in tx.signatures:
            if address in seen:
                raise MalformedError(f"duplicate signature from {address}")
            seen.add(address)
            acct = self.accounts.get(address)
            if acct is None:
                raise NotFoundError(f"signature from unknown account {address}")
            try:
                Ed25519PublicKey.from_public_bytes(acct.verify_key).verify(
                    bytes.fromhex(sig_hex), payload
                )
            except (InvalidSignature, ValueError):
                raise UnauthorizedError(f"invalid signature from {address}") from None
            if address == tx.sender:
                sender_signed = True
        if not sender_signed:
            raise UnauthorizedError("transaction lacks the sender's own signature")

    def _check_nonce(self, tx: Transaction):
        last = self.nonces.get(tx.sender, -1)
        if tx.nonce <= last:
            raise MalformedError(
                f"nonce {tx.nonce} not greater than {last} for {tx.sender}"
            )

    def next_nonce(self, address: str) -> int:
        return self.nonces.get(address, -1) + 1

    def _route(self, tx: Transaction):
        if tx.contract == "governance":
            handlers = {
                "deploy": self._gov_deploy,
                "assign_role": self._gov_assign_role,
                "revoke_role": self._gov_revoke_role,
            }
        elif not self.deployed:
            raise NotFoundError("contracts are not deployed yet")
        elif tx.contract == "authority":
            handlers = {
                "register_authority": self._auth_register,
                "submit_commitment": self._auth_commit,
                "submit_opening": self._auth_open,
                "publish_rlocs": self._auth_publish,
                "request_key": self._auth_request_key,
                "respond_key": self._auth_respond_key,
            }
        elif tx.contract == "certifier":
            handlers = {
                "store_attr_rloc": self._cert_store,
                "set_attributes": self._cert_set_attributes,
            }
        elif tx.contract == "message":
            handlers = {"store_message": self._msg_store}
        elif tx.contract == "rsa":
            handlers = {"store_rsa_key": self._rsa_store}
        else:
            raise NotFoundError(f"unknown contract {tx.contract!r}")
        handler = handlers.get(tx.method)
        if handler is None:
            raise NotFoundError(f"contract {tx.contract!r} has no method {tx.method!r}")
        return handler

    def _require_majority(self, tx: Transaction, signer_set, threshold: int):
        # signatures were already cryptographically verified
        present = {addr for addr, _ in tx.signatures if addr in signer_set}
        if len(present) < threshold:
            raise MajorityError(
                f"{tx.contract}.{tx.method} needs {threshold} certifier signatures, got {len(present)}"
            )

    # -- governance ----------------------------------------------------------

    def _gov_deploy(self, tx: Transaction):
        if self.deployed:
            raise MalformedError("contracts are already deployed")
        certifiers = tx.args.get("certifiers")
        if not isinstance(certifiers, list) or not certifiers:
            raise MalformedError("deploy needs a non-empty certifier list")
        if len(set(certifiers)) != len(certifiers):
            raise MalformedError("certifier list contains duplicates")
        for addr in certifiers:
            if addr not in self.accounts:
                raise NotFoundError(f"certifier {addr} is not a registered account")
        threshold = len(certifiers) // 2 + 1
        self._require_majority(tx, set(certifiers), threshold)
        self.deployed = True
        self.certifiers = tuple(certifiers)
        self.threshold = threshold
        for addr in certifiers:
            self._grant_role(addr, "AttributeCertifier")

    def _ensure_governance_ready(self):
        if not self.deployed:
            raise NotFoundError("contracts are not deployed yet")

    def _gov_assign_role(self, tx: Transaction):
        self._ensure_governance_ready()
        address, role = tx.args.get("address"), tx.args.get("role")
        if role not in ROLES:
            raise MalformedError(f"unknown role {role!r}")
        if address not in self.accounts:
            raise NotFoundError(f"cannot grant {role} to unknown account {address}")
        self._require_majority(tx, set(self.certifiers), self.threshold)
        self._grant_role(address, role)

    def _gov_revoke_role(self, tx: Transaction):
        self._ensure_governance_ready()
        address, role = tx.args.get("address"), tx.args.get("role")
        if role not in ROLES:
            raise MalformedError(f"unknown role {role!r}")
        if address not in self.accounts:
            raise NotFoundError(f"cannot revoke {role} from unknown account {address}")
        self._require_majority(tx, set(self.certifiers), self.threshold)
        self._revoke_role(address, role)

    # -- authority contract --------------------------------------------------

    def _auth_register(self, tx: Transaction):
        self._require_role(tx.sender, "Authority")
        name = tx.args.get("name")
        if not name or not isinstance(name, str) or not name.isalnum():
            raise MalformedError("authority name must be alphanumeric")
        if name in self.authority.names:
            raise MalformedError(f"authority name {name!r} is taken")
        if self.authority.name_of(tx.sender) is not None:
            raise MalformedError(f"{tx.sender} already registered an authority name")
        self.authority.names[name] = tx.sender

    def _require_registered_authority(self, address: str) -> str:
        # role is re-checked live so a revocation cuts off later writes
        self._require_role(address, "Authority")
        name = self.authority.name_of(address)
        if name is None:
            raise UnauthorizedError(f"{address} is not a registered authority")
        return name

    def _auth_commit(self, tx: Transaction):
        self._require_registered_authority(tx.sender)
        digest = tx.args.get("digest")
        if not isinstance(digest, str) or len(digest) != 64:
            raise MalformedError("commitment must be a 32-byte digest in hex")
        bytes.fromhex(digest)
        if tx.sender in self.authority.commitments:
            raise MalformedError("commitment already posted")
        self.authority.commitments[tx.sender] = digest

    def _auth_open(self, tx: Transaction):
        self._require_registered_authority(tx.sender)
        opening = tx.args.get("opening")
        if not isinstance(opening, str):
            raise MalformedError("opening must be hex bytes")
        try:
            raw = bytes.fromhex(opening)
        except ValueError:
            raise MalformedError("opening must be hex bytes") from None
        missing = [
            addr for addr in self.authority.names.values()
            if addr not in self.authority.commitments
        ]
        if missing:
            raise MalformedError(
                f"openings start only after all {len(self.authority.names)} commitments; "
                f"{len(missing)} missing"
            )
        committed = self.authority.commitments.get(tx.sender)
        if hashlib.sha256(raw).hexdigest() != committed:
            raise CommitMismatchError(
                f"opening from {tx.sender} does not match its commitment",
                culprit=tx.sender,
            )
        if tx.sender in self.authority.openings:
            raise MalformedError("opening already posted")
        self.authority.openings[tx.sender] = opening

    def _auth_publish(self, tx: Transaction):
        self._require_registered_authority(tx.sender)
        entry = {}
        for kind in ("metadata", "params", "pubkey"):
            rloc = tx.args.get(kind)
            if not isinstance(rloc, str) or len(rloc) != 64:
                raise MalformedError(f"publish_rlocs needs a {kind} rloc")
            entry[kind] = rloc
        if tx.sender in self.authority.rlocs:
            raise MalformedError("rlocs already published")
        self.authority.rlocs[tx.sender] = entry

    def _auth_request_key(self, tx: Transaction):
        self._require_role(tx.sender, "Reader")
        name = tx.args.get("authority")
        self.authority.address_of(name)
        self.authority.key_requests.append(
            {"reader": tx.sender, "authority": name, "index": len(self.authority.key_requests)}
        )

    def _auth_respond_key(self, tx: Transaction):
        name = self._require_registered_authority(tx.sender)
        idx = tx.args.get("request_index")
        payload = tx.args.get("payload")
        if not isinstance(idx, int) or not 0 <= idx < len(self.authority.key_requests):
            raise NotFoundError(f"no key request at index {idx}")
        request = self.authority.key_requests[idx]
        if request["authority"] != name:
            raise UnauthorizedError(f"request {idx} is addressed to {request['authority']!r}")
        if not isinstance(payload, str) or not payload:
            raise MalformedError("response payload must be a non-empty string")
        if any(r["request_index"] == idx for r in self.authority.key_responses):
            raise MalformedError(f"request {idx} was already answered")
        self.authority.key_responses.append(
            {"authority": name, "reader": request["reader"], "payload": payload, "request_index": idx}
        )

    # -- certifier contract ----------------------------------------------------

    def _cert_store(self, tx: Transaction):
        self._require_majority(tx, set(self.certifiers), self.threshold)
        rloc = tx.args.get("rloc")
        if not isinstance(rloc, str) or len(rloc) != 64:
            raise MalformedError("store_attr_rloc needs an rloc")
        self.certifier.attr_rlocs.append(rloc)

    def _cert_set_attributes(self, tx: Transaction):
        """Publish the attribute universe and reader assignments; set-once.

        A second call is accepted but changes nothing: the originally stored
        sets stay in force and remain what get_attributes returns.
        """
        self._require_majority(tx, set(self.certifiers), self.threshold)
        universe = tx.args.get("universe")
        assignments = tx.args.get("assignments")
        if not isinstance(universe, list) or not all(isinstance(a, str) and a for a in universe):
            raise MalformedError("attribute universe must be a list of literals")
        if not isinstance(assignments, dict):
            raise MalformedError("assignments must map reader addresses to literal lists")
        for reader, literals in assignments.items():
            if reader not in self.accounts:
                raise NotFoundError(f"assignment for unknown account {reader}")
            if not isinstance(literals, list) or not all(l in universe for l in literals):
                raise MalformedError(f"assignments for {reader} must come from the universe")
        if self.certifier.universe or self.certifier.assignments:
            return  # set-once: later initializations are no-ops
        self.certifier.universe = list(universe)
        self.certifier.assignments = {r: list(ls) for r, ls in assignments.items()}

    # -- message contract -------------------------------------------------------

    def _msg_store(self, tx: Transaction):
        self._require_role(tx.sender, "DataOwner")
        message_id = tx.args.get("message_id")
        rloc = tx.args.get("rloc")
        policies = tx.args.get("policies")
        if not isinstance(message_id, str) or len(message_id) != 8 or not message_id.isdigit():
            raise MalformedError("message id must be 8 decimal digits")
        if not isinstance(rloc, str) or len(rloc) != 64:
            raise MalformedError("store_message needs an rloc")
        if not isinstance(policies, list) or not policies:
            raise MalformedError("store_message needs the slice policies")
        if message_id in self.message.messages:
            raise MalformedError(f"message id {message_id} already stored")
        normalized = [policy_mod.normalize_policy_text(p) for p in policies]
        self.message.messages[message_id] = {"rloc": rloc, "sender": tx.sender}
        for text in normalized:
            bucket = self.message.policy_index.setdefault(text, [])
            if rloc not in bucket:
                bucket.append(rloc)

    # -- rsa key contract --------------------------------------------------------

    def _rsa_store(self, tx: Transaction):
        if not (self.has_role(tx.sender, "Reader") or self.has_role(tx.sender, "DataOwner")):
            raise UnauthorizedError(f"{tx.sender} lacks the Reader or DataOwner role")
        pem = tx.args.get("public_key_pem")
        if not isinstance(pem, str) or "PUBLIC KEY" not in pem:
            raise MalformedError("store_rsa_key needs a PEM public key")
        if tx.sender in self.rsa.keys:
            raise MalformedError("public key already stored for this address")
        self.rsa.keys[tx.sender] = pem

    # -- reads -------------------------------------------------------------------

    def get_authority_record(self, name: str) -> dict:
        address = self.authority.address_of(name)
        return {
            "name": name,
            "address": address,
            "commitment": self.authority.commitments.get(address),
            "opening": self.authority.openings.get(address),
            "rlocs": self.authority.rlocs.get(address),
        }

    def authority_names(self) -> tuple:
        return tuple(self.authority.names)

    def get_attr_rlocs(self) -> tuple:
        return tuple(self.certifier.attr_rlocs)

    def get_attributes(self) -> tuple:
        """The certified universe and reader assignments as first stored."""
        return (
            tuple(self.certifier.universe),
            {r: tuple(ls) for r, ls in self.certifier.assignments.items()},
        )

    def get_rsa_key(self, address: str) -> str:
        pem = self.rsa.keys.get(address)
        if pem is None:
            raise NotFoundError(f"no public key stored for {address}")
        return pem

    def get_message_rloc(self, message_id: str) -> str:
        entry = self.message.messages.get(message_id)
        if entry is None:
            raise NotFoundError(f"no message stored under id {message_id}")
        return entry["rloc"]

    def retrieve_dict(self) -> dict:
        return {text: list(rlocs) for text, rlocs in self.message.policy_index.items()}

    def retrieve_ctx(self, literals) -> list:
        """Rlocs of every stored message whose policy the literals satisfy."""
        owned = set(literals)
        authorities = self.authority_names()
        out = []
        for text, rlocs in self.message.policy_index.items():
            ast = policy_mod.parse_policy(text)
            if policy_mod.evaluate(ast, owned, authorities):
                for rloc in rlocs:
                    if rloc not in out:
                        out.append(rloc)
        return out

    # -- state digest and replay ---------------------------------------------------

    def state_snapshot(self) -> dict:
        return {
            "accounts": {
                addr: {"verify_key": acct.verify_key.hex(), "roles": sorted(acct.roles)}
                for addr, acct in sorted(self.accounts.items())
            },
            "nonces": dict(sorted(self.nonces.items())),
            "deployed": self.deployed,
            "certifiers": list(self.certifiers),
            "threshold": self.threshold,
            "authority": self.authority.snapshot(),
            "certifier": self.certifier.snapshot(),
            "message": self.message.snapshot(),
            "rsa": self.rsa.snapshot(),
        }

    def state_hash(self) -> str:
        return hashlib.sha256(canonical_json_bytes(self.state_snapshot())).hexdigest()

    def export_journal(self) -> bytes:
        lines = [
            canonical_json_bytes({"type": kind, **payload})
            for kind, payload in self.journal
        ]
        return b"\n".join(lines) + (b"\n" if lines else b"")

    @classmethod
    def replay(cls, journal_bytes: bytes) -> "Ledger":
        """Rebuild a ledger by re-validating every journal entry in order."""
        ledger = cls()
        for line in journal_bytes.splitlines():
            if not line.strip():
                continue
            entry = parse_json_bytes(line)
            kind = entry.pop("type", None)
            if kind == "account":
                ledger.register_account(bytes.fromhex(entry["verify_key"]))
            elif kind == "tx":
                ledger.apply(Transaction.from_dict(entry))
            else:
                raise MalformedError(f"unknown journal entry type {kind!r}")
        return ledger
