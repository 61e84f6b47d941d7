"""The four protocol roles as workflow functions over ledger + datastore.

Phases mirror the deployment lifecycle: certifier-led boot (deploy, roles,
authority name registration), authority initialization (metadata files, the
commit-then-open generator toss, parameter publication), attribute
certification, key distribution (secure-channel and on-chain schemes), and
the data exchange itself (publish and fetch).

Authorities never accept caller-supplied attribute claims: eligibility is
always resolved from the certifier files referenced on chain.  All random
choices flow through labeled streams derived from one root seed, which keeps
whole runs byte-reproducible, including RSA-wrapped on-chain payloads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import envelope as envelope_mod
from . import maabe
from .datastore import validate_rloc
from .encoding import canonical_json_bytes, parse_json_bytes
from .errors import (
    IntegrityError,
    MalformedError,
    NotFoundError,
    UnauthorizedError,
)
from .groups import hash_to_group
from .identity import (
    ActorIdentity,
    derived_rng,
    load_rsa_public_pem,
    pss_sign,
    pss_verify,
    unwrap_payload,
    wrap_payload,
)
from .ledger import Ledger, sign_transaction

TOSS_BYTES = 48  # canonical size of a committed generator-toss element
CHALLENGE_STEPS = 64  # logical steps a challenge stays redeemable


def _apply(ledger: Ledger, identity: ActorIdentity, contract: str, method: str,
           args: dict, co_signers: Sequence[ActorIdentity] = ()) -> int:
    tx = sign_transaction(
        identity.signing_key,
        identity.address,
        contract,
        method,
        args,
        ledger.next_nonce(identity.address),
        [(co.address, co.signing_key) for co in co_signers],
    )
    return ledger.apply(tx)


@dataclass
class CertifierGroup:
    """The consortium; every write it makes carries all members' signatures."""

    members: Tuple[ActorIdentity, ...]

    def __post_init__(self):
        if not self.members:
            raise MalformedError("a certifier group needs at least one member")

    @property
    def addresses(self) -> List[str]:
        return [m.address for m in self.members]

    def apply(self, ledger: Ledger, contract: str, method: str, args: dict) -> int:
        lead, rest = self.members[0], self.members[1:]
        return _apply(ledger, lead, contract, method, args, co_signers=rest)


class AuthorityNode:
    """One key authority: toss participant, key issuer, challenge server."""

    def __init__(self, name: str, root_seed: int):
        self.name = name
        self.root_seed = root_seed
        self.identity = ActorIdentity.generate(root_seed, f"authority/{name}")
        self.pp: Optional[maabe.GlobalParams] = None
        self.public_key: Optional[maabe.AuthorityPublicKey] = None
        self.secret_key: Optional[maabe.AuthoritySecretKey] = None
        self.clock = 0
        self._challenges: Dict[bytes, tuple] = {}  # nonce -> (gid, expiry step)
        self._challenge_rng = derived_rng(root_seed, "challenge", name)
        # adversarial hooks used by scenario toggles
        self.dishonest_opening = False
        self.metadata_extra: Optional[str] = None
        self.withhold_gids: set = set()

    # -- initialization ------------------------------------------------------

    def toss_element_bytes(self) -> bytes:
        from .groups import random_element

        rng = derived_rng(self.root_seed, "toss", self.name)
        return random_element("G1", rng).to_bytes()

    def metadata_file(self, roster: Sequence[Tuple[str, str]]) -> bytes:
        doc = {"authorities": [{"name": n, "address": a} for n, a in roster]}
        if self.metadata_extra is not None:
            doc["note"] = self.metadata_extra
        return canonical_json_bytes(doc)

    def opening_bytes(self) -> bytes:
        if self.dishonest_opening:
            # open a value other than the committed one
            from .groups import random_element

            rng = derived_rng(self.root_seed, "toss-cheat", self.name)
            return random_element("G1", rng).to_bytes()
        return self.toss_element_bytes()

    def derive_keys(self, pp: maabe.GlobalParams):
        self.pp = pp
        rng = derived_rng(self.root_seed, "maabe", self.name)
        self.public_key, self.secret_key = maabe.auth_setup(pp, self.name, rng)

    def restore_from_chain(self, ledger: Ledger, store):
        """Reload published parameters and re-derive this node's keypair.

        The rederived public key must equal the one notarized at init, which
        ties the restored secret to the published material.
        """
        pp, pubkeys = fetch_public_context(ledger, store)
        self.derive_keys(pp)
        published = pubkeys.get(self.name)
        if published is None or published.to_dict() != self.public_key.to_dict():
            raise IntegrityError(
                f"restored key for {self.name!r} does not match the published one"
            )

    # -- key issuance ----------------------------------------------------------

    def issue_shares(self, ledger: Ledger, store, gid: str) -> List[maabe.KeyShare]:
        if self.secret_key is None:
            raise MalformedError(f"authority {self.name!r} is not initialized")
        if gid in self.withhold_gids:
            return []
        shares = []
        for attr in resolve_attributes(ledger, store, gid):
            rng = derived_rng(self.root_seed, "share", self.name, gid, attr)
            shares.append(maabe.keygen(self.pp, self.secret_key, gid, attr, rng))
        return shares

    # -- scheme I: challenge-response over a direct channel ---------------------

    def issue_challenge(self, gid: str) -> bytes:
        self.clock += 1
        nonce = self._challenge_rng.randbytes(32)
        self._challenges[nonce] = (gid, self.clock + CHALLENGE_STEPS)
        return nonce

    def answer_challenge(self, ledger: Ledger, store, gid: str,
                         nonce: bytes, signature: bytes) -> List[maabe.KeyShare]:
        self.clock += 1
        entry = self._challenges.pop(nonce, None)  # single use
        if entry is None:
            raise UnauthorizedError("unknown or already redeemed challenge")
        issued_to, expiry = entry
        if issued_to != gid:
            raise UnauthorizedError("challenge was issued to a different identity")
        if self.clock > expiry:
            raise UnauthorizedError("challenge expired")
        pem = ledger.get_rsa_key(gid)
        pss_verify(load_rsa_public_pem(pem), signature, nonce)
        return self.issue_shares(ledger, store, gid)

    # -- scheme II: requests and responses on the ledger -------------------------

    def serve_onchain_requests(self, ledger: Ledger, store) -> int:
        """Answer every pending on-chain request addressed to this authority."""
        answered = {r["request_index"] for r in ledger.authority.key_responses}
        served = 0
        for request in list(ledger.authority.key_requests):
            if request["authority"] != self.name or request["index"] in answered:
                continue
            gid = request["reader"]
            shares = self.issue_shares(ledger, store, gid)
            plain = canonical_json_bytes(
                {"gid": gid, "shares": [s.to_dict() for s in shares]}
            )
            rng = derived_rng(self.root_seed, "wrap", self.name, gid, str(request["index"]))
            payload = wrap_payload(ledger.get_rsa_key(gid), plain, rng)
            _apply(ledger, self.identity, "authority", "respond_key",
                   {"request_index": request["index"], "payload": payload})
            served += 1
        return served


# ---------------------------------------------------------------------------
# phase 1: system boot


def run_system_boot(ledger: Ledger, certifiers: CertifierGroup,
                    role_grants: Mapping[str, Sequence[str]],
                    authorities: Sequence[AuthorityNode]) -> dict:
    """Deploy contracts, grant roles, and register authority names.

    ``role_grants`` covers readers and data owners; the Authority role is
    granted here to every listed authority node.
    """
    for member in certifiers.members:
        ledger.register_account(member.verify_key)
    for node in authorities:
        ledger.register_account(node.identity.verify_key)
    certifiers.apply(ledger, "governance", "deploy", {"certifiers": certifiers.addresses})
    for address, roles in role_grants.items():
        for role in roles:
            certifiers.apply(ledger, "governance", "assign_role",
                             {"address": address, "role": role})
    for node in authorities:
        certifiers.apply(ledger, "governance", "assign_role",
                         {"address": node.identity.address, "role": "Authority"})
        _apply(ledger, node.identity, "authority", "register_authority", {"name": node.name})
    return {"certifiers": certifiers.addresses, "authorities": [n.name for n in authorities]}


# ---------------------------------------------------------------------------
# phase 2: authority initialization


def _roster(authorities: Sequence[AuthorityNode]) -> List[Tuple[str, str]]:
    return [(n.name, n.identity.address) for n in authorities]


def combine_openings(openings: Sequence[bytes]):
    """XOR the opened encodings, then map the entropy back onto the curve."""
    if not openings:
        raise MalformedError("no openings to combine")
    combined = bytes(TOSS_BYTES)
    for raw in openings:
        if len(raw) != TOSS_BYTES:
            raise MalformedError("opening is not a 48-byte group encoding")
        combined = bytes(a ^ b for a, b in zip(combined, raw))
    return hash_to_group(combined, "G1")


def derive_global_params(ledger: Ledger, attribute_universe) -> maabe.GlobalParams:
    """What any party recomputes from the chain after a completed toss."""
    names = ledger.authority_names()
    if not names:
        raise MalformedError("no authorities registered")
    openings = []
    for name in names:
        record = ledger.get_authority_record(name)
        if record["opening"] is None:
            raise MalformedError(f"authority {name!r} has not opened its commitment")
        raw = bytes.fromhex(record["opening"])
        if hashlib.sha256(raw).hexdigest() != record["commitment"]:
            raise IntegrityError(f"opening of {name!r} contradicts its commitment")
        openings.append(raw)
    seed = combine_openings(openings)
    return maabe.global_setup(seed, names, attribute_universe)


def run_authority_init(ledger: Ledger, store, authorities: Sequence[AuthorityNode],
                       attribute_universe) -> dict:
    """Steps: metadata files, commit, open, derive params, publish rlocs.

    Any opening that contradicts its commitment aborts the phase with the
    culprit's address attached (the ledger rejects it, nothing is published).
    """
    if not authorities:
        raise MalformedError("initialization needs at least one authority")
    roster = _roster(authorities)
    metadata_rlocs = {n.name: store.put(n.metadata_file(roster)) for n in authorities}

    for node in authorities:
        digest = hashlib.sha256(node.toss_element_bytes()).hexdigest()
        _apply(ledger, node.identity, "authority", "submit_commitment", {"digest": digest})
    for node in authorities:
        _apply(ledger, node.identity, "authority", "submit_opening",
               {"opening": node.opening_bytes().hex()})

    digests = set()
    params_rlocs = {}
    pubkey_rlocs = {}
    for node in authorities:
        pp = derive_global_params(ledger, attribute_universe)
        node.derive_keys(pp)
        digests.add(pp.digest())
        params_rlocs[node.name] = store.put(pp.to_bytes())
        pubkey_rlocs[node.name] = store.put(
            canonical_json_bytes(node.public_key.to_dict())
        )
    if len(digests) != 1:
        raise IntegrityError("authorities disagree on the derived parameters")

    for node in authorities:
        _apply(ledger, node.identity, "authority", "publish_rlocs",
               {"metadata": metadata_rlocs[node.name],
                "params": params_rlocs[node.name],
                "pubkey": pubkey_rlocs[node.name]})
    return {"params_digest": digests.pop(), "params_rlocs": params_rlocs}


# ---------------------------------------------------------------------------
# phase 3: attribute certification and key requests


def certify_attributes(ledger: Ledger, store, certifiers: CertifierGroup,
                       universe: Sequence[str], assignments: Mapping[str, Sequence[str]]) -> str:
    """Store the attribute file, notarize its rloc, publish the F_SC view."""
    doc = {
        "universe": sorted(universe),
        "assignments": {gid: sorted(attrs) for gid, attrs in assignments.items()},
    }
    rloc = store.put(canonical_json_bytes(doc))
    certifiers.apply(ledger, "certifier", "store_attr_rloc", {"rloc": rloc})
    certifiers.apply(ledger, "certifier", "set_attributes",
                     {"universe": doc["universe"],
                      "assignments": {g: list(a) for g, a in doc["assignments"].items()}})
    return rloc


def resolve_attributes(ledger: Ledger, store, gid: str) -> Tuple[str, ...]:
    """Union of the gid's attributes across every notarized certifier file."""
    merged: List[str] = []
    for rloc in ledger.get_attr_rlocs():
        doc = parse_json_bytes(store.get(rloc))
        for attr in doc.get("assignments", {}).get(gid, ()):
            if attr not in merged:
                merged.append(attr)
    return tuple(merged)


def store_reader_rsa_key(ledger: Ledger, reader: ActorIdentity) -> int:
    return _apply(ledger, reader, "rsa", "store_rsa_key",
                  {"public_key_pem": reader.rsa_public_pem()})


def request_key_channel(reader: ActorIdentity, authority: AuthorityNode,
                        ledger: Ledger, store) -> List[maabe.KeyShare]:
    """Scheme I: challenge-response over a direct authenticated channel."""
    nonce = authority.issue_challenge(reader.gid)
    signature = pss_sign(reader.rsa_key, nonce)
    return authority.answer_challenge(ledger, store, reader.gid, nonce, signature)


def request_key_onchain(reader: ActorIdentity, authority: AuthorityNode,
                        ledger: Ledger, store) -> List[maabe.KeyShare]:
    """Scheme II: signed request tx, RSA-wrapped response tx, reader unwraps."""
    index = len(ledger.authority.key_requests)
    _apply(ledger, reader, "authority", "request_key", {"authority": authority.name})
    authority.serve_onchain_requests(ledger, store)
    return collect_onchain_shares(reader, ledger, request_index=index)


def collect_onchain_shares(reader: ActorIdentity, ledger: Ledger,
                           request_index: Optional[int] = None) -> List[maabe.KeyShare]:
    """Decrypt the on-chain responses addressed to this reader."""
    shares: List[maabe.KeyShare] = []
    for response in ledger.authority.key_responses:
        if response["reader"] != reader.address:
            continue
        if request_index is not None and response["request_index"] != request_index:
            continue
        plain = parse_json_bytes(unwrap_payload(reader.rsa_key, response["payload"]))
        if plain.get("gid") != reader.gid:
            raise IntegrityError("response payload names a different identity")
        shares.extend(maabe.KeyShare.from_dict(d) for d in plain.get("shares", ()))
    return shares


def assemble_fdk(shares: Sequence[maabe.KeyShare]) -> Tuple[maabe.KeyShare, ...]:
    """Merge per-authority shares into the reader's full decryption key."""
    gids = {s.gid for s in shares}
    if len(gids) > 1:
        raise MalformedError("key shares span multiple identities")
    merged: Dict[tuple, maabe.KeyShare] = {}
    for share in shares:
        merged.setdefault((share.attr, share.authority), share)
    return tuple(merged.values())


# ---------------------------------------------------------------------------
# phase 4: data exchange


def fetch_public_context(ledger: Ledger, store):
    """Shared parameters and authority public keys, after the equality check.

    Every consumer verifies that all authorities notarized the same metadata
    and parameter rlocs before trusting any of them.
    """
    names = ledger.authority_names()
    if not names:
        raise MalformedError("no authorities registered")
    records = []
    for name in names:
        record = ledger.get_authority_record(name)
        if record["rlocs"] is None:
            raise MalformedError(f"authority {name!r} has not published its parameters")
        records.append(record)
    for kind in ("metadata", "params"):
        rlocs = {r["rlocs"][kind] for r in records}
        if len(rlocs) != 1:
            raise IntegrityError(f"authority set inconsistent: {kind} rlocs differ")
    params_rloc = records[0]["rlocs"]["params"]
    pp = maabe.GlobalParams.from_bytes(store.get(params_rloc))
    pubkeys = {}
    for record in records:
        doc = parse_json_bytes(store.get(record["rlocs"]["pubkey"]))
        pk = maabe.AuthorityPublicKey.from_dict(doc)
        if pk.authority != record["name"]:
            raise IntegrityError(f"published key does not belong to {record['name']!r}")
        pubkeys[pk.authority] = pk
    return pp, pubkeys


def attribute_universe_from_chain(ledger: Ledger, store) -> Tuple[str, ...]:
    """The union of certified universes, as authorities recompute it."""
    universe: List[str] = []
    for rloc in ledger.get_attr_rlocs():
        doc = parse_json_bytes(store.get(rloc))
        for attr in doc.get("universe", ()):
            if attr not in universe:
                universe.append(attr)
    return tuple(universe)


def owner_publish(owner: ActorIdentity, ledger: Ledger, store, case_id: str,
                  parts: Sequence[tuple], rng) -> str:
    """Seal the slices, store the envelope, notarize rloc + policies."""
    pp, pubkeys = fetch_public_context(ledger, store)
    message_id = envelope_mod.new_decimal_id(rng)
    while message_id in ledger.message.messages:
        message_id = envelope_mod.new_decimal_id(rng)
    metadata = envelope_mod.MessageMetadata(owner.address, case_id, message_id)
    sealed = envelope_mod.seal_message(pp, pubkeys, metadata, parts, rng)
    rloc = store.put(sealed.to_bytes())
    _apply(ledger, owner, "message", "store_message",
           {"message_id": message_id, "rloc": rloc,
            "policies": [s.policy_text for s in sealed.slices]})
    return message_id


def reader_fetch(reader: ActorIdentity, ledger: Ledger, store, message_id: str,
                 shares: Sequence[maabe.KeyShare]) -> List[dict]:
    """Open every slice the shares authorize; report the rest by error code."""
    rloc = ledger.get_message_rloc(message_id)
    validate_rloc(rloc)
    sealed = envelope_mod.MessageEnvelope.from_bytes(store.get(rloc))
    pp, _ = fetch_public_context(ledger, store)
    bundle = assemble_fdk(shares)
    results = []
    for index, piece in enumerate(sealed.slices):
        entry = {"index": index, "slice_id": piece.slice_id, "policy": piece.policy_text}
        try:
            entry["fields"] = envelope_mod.open_envelope_slice(pp, sealed, index, bundle)
            entry["status"] = "ok"
        except MalformedError:
            raise
        except (UnauthorizedError, IntegrityError, NotFoundError) as exc:
            entry["status"] = exc.code
        results.append(entry)
    return results
