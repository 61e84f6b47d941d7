"""Deterministic scenario scripts and their runner.

A script declares the cast (certifiers, authorities, actors with roles and
attributes) and an ordered list of steps; the runner executes it against a
fresh ledger and store, recording a canonical transcript: one event per step,
per-phase transaction counts, the message-id registry, the reader-by-slice
access results, and the final ledger state hash.  Under a fixed seed the
transcript is byte-stable, which is what the adversarial and replay tests pin.

Steps that are supposed to fail carry ``"expect": "<error code>"``; the runner
treats a missing or different failure as a harness error (plain RuntimeError,
outside the protocol error taxonomy).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, List, Optional

from . import actors as act
from . import maabe
from .datastore import MemoryStore
from .encoding import canonical_json_bytes, parse_json_bytes
from .errors import MartsiaError, MalformedError
from .identity import ActorIdentity, derived_rng
from .ledger import Ledger
from .policy import parse_policy

ROLE_NAMES = ("DataOwner", "Reader")
_FORGE_OFFSET = 104729  # distinct seed stream for self-appointed authorities


def validate_script(script: dict) -> dict:
    """Structural checks; returns the script unchanged on success."""
    if not isinstance(script, dict):
        raise MalformedError("scenario script must be an object")
    for key in ("name", "seed", "case_id", "certifiers", "authorities", "actors", "steps"):
        if key not in script:
            raise MalformedError(f"scenario script lacks {key!r}")
    if not isinstance(script["seed"], int):
        raise MalformedError("scenario seed must be an integer")
    if not script["certifiers"] or len(set(script["certifiers"])) != len(script["certifiers"]):
        raise MalformedError("certifier names must be unique and non-empty")
    if not script["authorities"] or len(set(script["authorities"])) != len(script["authorities"]):
        raise MalformedError("authority names must be unique and non-empty")
    universe = script.get("attribute_universe", [])
    actors = script["actors"]
    if not isinstance(actors, dict) or not actors:
        raise MalformedError("scenario needs at least one actor")
    for name, profile in actors.items():
        for role in profile.get("roles", ()):
            if role not in ROLE_NAMES:
                raise MalformedError(f"actor {name!r} declares unknown role {role!r}")
        for attr in profile.get("attributes", ()):
            if attr not in universe:
                raise MalformedError(f"attribute {attr!r} of {name!r} is outside the universe")
    known_messages = set()
    for idx, step in enumerate(script["steps"]):
        op = step.get("op")
        where = f"step {idx}"
        if op == "publish":
            if step.get("owner") not in actors:
                raise MalformedError(f"{where}: unknown owner {step.get('owner')!r}")
            if not step.get("slices"):
                raise MalformedError(f"{where}: publish needs slices")
            for piece in step["slices"]:
                parse_policy(piece["policy"])
            known_messages.add(step.get("message"))
        elif op in ("request-keys",):
            if step.get("reader") not in actors:
                raise MalformedError(f"{where}: unknown reader {step.get('reader')!r}")
            if step.get("scheme", "channel") not in ("channel", "onchain"):
                raise MalformedError(f"{where}: unknown scheme {step.get('scheme')!r}")
        elif op in ("fetch", "forged-fetch"):
            if step.get("reader") not in actors:
                raise MalformedError(f"{where}: unknown reader {step.get('reader')!r}")
            if step.get("message") not in known_messages:
                raise MalformedError(f"{where}: unknown message {step.get('message')!r}")
        elif op == "collusion":
            readers = step.get("readers", [])
            if len(readers) < 2 or any(r not in actors for r in readers):
                raise MalformedError(f"{where}: collusion needs two declared readers")
            if step.get("message") not in known_messages:
                raise MalformedError(f"{where}: unknown message {step.get('message')!r}")
        elif op in ("dishonest-opening", "withhold-share"):
            if step.get("authority") not in script["authorities"]:
                raise MalformedError(f"{where}: unknown authority {step.get('authority')!r}")
            if op == "withhold-share" and step.get("reader") not in actors:
                raise MalformedError(f"{where}: unknown reader {step.get('reader')!r}")
        elif op == "tamper-envelope":
            if step.get("message") not in known_messages:
                raise MalformedError(f"{where}: unknown message {step.get('message')!r}")
        elif op in ("boot", "init", "certify", "store-rsa-keys"):
            pass
        else:
            raise MalformedError(f"{where}: unknown op {op!r}")
    return script


def build_cast(script: dict, seed: Optional[int] = None) -> dict:
    """Deterministic identities for everyone a script declares."""
    seed = script["seed"] if seed is None else seed
    return {
        "seed": seed,
        "certifiers": act.CertifierGroup(
            tuple(ActorIdentity.generate(seed, f"certifier/{n}")
                  for n in script["certifiers"])
        ),
        "authorities": [act.AuthorityNode(n, seed) for n in script["authorities"]],
        # actors sort by name so runs do not depend on JSON object key order
        "actors": {
            name: ActorIdentity.generate(seed, f"actor/{name}", with_rsa=True)
            for name in sorted(script["actors"])
        },
    }


@dataclass
class RunResult:
    transcript: dict
    ledger: Ledger
    store: object
    runner: "ScenarioRunner"

    def transcript_bytes(self) -> bytes:
        return canonical_json_bytes(self.transcript) + b"\n"


class ScenarioRunner:
    def __init__(self, script: dict, store=None):
        self.script = validate_script(script)
        self.seed = script["seed"]
        self.ledger = Ledger()
        self.store = store if store is not None else MemoryStore()
        cast = build_cast(script)
        self.certifiers = cast["certifiers"]
        self.authorities = cast["authorities"]
        self.actors: Dict[str, ActorIdentity] = cast["actors"]
        self.universe = tuple(script.get("attribute_universe", ()))
        self.case_id = script["case_id"]
        self.bundles: Dict[str, list] = {}  # actor name -> key shares
        self.messages: Dict[str, str] = {}  # alias -> message id
        self.events: List[dict] = []
        self.phase_counts: Dict[str, int] = {}
        self.access: Dict[str, dict] = {}

    # -- helpers ---------------------------------------------------------------

    def _count_phase(self, phase: str, before: int):
        self.phase_counts[phase] = self.phase_counts.get(phase, 0) + (len(self.ledger.log) - before)

    def _node(self, name: str) -> act.AuthorityNode:
        for node in self.authorities:
            if node.name == name:
                return node
        raise MalformedError(f"unknown authority {name!r}")

    def _message_id(self, alias: str) -> str:
        if alias not in self.messages:
            raise MalformedError(f"message {alias!r} has not been published")
        return self.messages[alias]

    # -- step implementations ----------------------------------------------------

    def _do_boot(self, step: dict) -> dict:
        for identity in self.actors.values():
            self.ledger.register_account(identity.verify_key)
        grants = {}
        for name, profile in sorted(self.script["actors"].items()):
            grants[self.actors[name].address] = list(profile.get("roles", ()))
        act.run_system_boot(self.ledger, self.certifiers, grants, self.authorities)
        return {"accounts": len(self.ledger.accounts)}

    def _do_init(self, step: dict) -> dict:
        out = act.run_authority_init(self.ledger, self.store, self.authorities, self.universe)
        return {"params_digest": out["params_digest"]}

    def _do_certify(self, step: dict) -> dict:
        assignments = {
            self.actors[name].gid: list(profile.get("attributes", ()))
            for name, profile in sorted(self.script["actors"].items())
            if profile.get("attributes")
        }
        rloc = act.certify_attributes(self.ledger, self.store, self.certifiers,
                                      self.universe, assignments)
        return {"attr_rloc": rloc}

    def _do_store_rsa_keys(self, step: dict) -> dict:
        stored = []
        for name, profile in sorted(self.script["actors"].items()):
            if "Reader" in profile.get("roles", ()):
                act.store_reader_rsa_key(self.ledger, self.actors[name])
                stored.append(name)
        return {"stored": stored}

    def _do_request_keys(self, step: dict) -> dict:
        name = step["reader"]
        scheme = step.get("scheme", "channel")
        reader = self.actors[name]
        shares = []
        for node in self.authorities:
            if scheme == "channel":
                shares.extend(act.request_key_channel(reader, node, self.ledger, self.store))
            else:
                shares.extend(act.request_key_onchain(reader, node, self.ledger, self.store))
        self.bundles[name] = list(act.assemble_fdk(shares))
        return {"reader": name, "scheme": scheme, "shares": len(self.bundles[name])}

    def _do_publish(self, step: dict) -> dict:
        owner = self.actors[step["owner"]]
        parts = [(piece["policy"], dict(piece["fields"])) for piece in step["slices"]]
        rng = derived_rng(self.seed, "publish", step["owner"], str(len(self.ledger.log)))
        message_id = act.owner_publish(owner, self.ledger, self.store, self.case_id, parts, rng)
        self.messages[step["message"]] = message_id
        return {"message": step["message"], "message_id": message_id, "slices": len(parts)}

    def _fetch_with(self, reader_name: str, alias: str, shares) -> list:
        results = act.reader_fetch(self.actors[reader_name], self.ledger, self.store,
                                   self._message_id(alias), shares)
        return [
            {k: v for k, v in r.items() if k in ("index", "slice_id", "policy", "status", "fields")}
            for r in results
        ]

    def _do_fetch(self, step: dict) -> dict:
        name = step["reader"]
        results = self._fetch_with(name, step["message"], self.bundles.get(name, []))
        self.access.setdefault(name, {})[step["message"]] = [r["status"] for r in results]
        return {"reader": name, "message": step["message"], "slices": results}

    def _do_collusion(self, step: dict) -> dict:
        pooled = []
        for name in step["readers"]:
            pooled.extend(self.bundles.get(name, []))
        # the pooled bundle crosses gids, so assembly itself must refuse
        act.assemble_fdk(pooled)
        return {"readers": step["readers"]}

    def _do_forged_fetch(self, step: dict) -> dict:
        name = step["reader"]
        reader = self.actors[name]
        pp, _ = act.fetch_public_context(self.ledger, self.store)
        attrs = act.resolve_attributes(self.ledger, self.store, reader.gid)
        forged_shares = []
        for auth_name in self.script["authorities"]:
            impostor = act.AuthorityNode(auth_name, self.seed + _FORGE_OFFSET)
            impostor.derive_keys(pp)
            for attr in attrs:
                rng = derived_rng(self.seed + _FORGE_OFFSET, "share", auth_name, reader.gid, attr)
                forged_shares.append(
                    maabe.keygen(pp, impostor.secret_key, reader.gid, attr, rng)
                )
        results = self._fetch_with(name, step["message"], forged_shares)
        opened = [r for r in results if r["status"] == "ok"]
        if opened:
            raise RuntimeError(f"forged authority opened slices: {opened}")
        return {"reader": name, "message": step["message"],
                "slices": [{k: r[k] for k in ("index", "status")} for r in results]}

    def _do_dishonest_opening(self, step: dict) -> dict:
        self._node(step["authority"]).dishonest_opening = True
        return {"authority": step["authority"]}

    def _do_withhold_share(self, step: dict) -> dict:
        node = self._node(step["authority"])
        node.withhold_gids.add(self.actors[step["reader"]].gid)
        return {"authority": step["authority"], "reader": step["reader"]}

    def _do_tamper_envelope(self, step: dict) -> dict:
        rloc = self.ledger.get_message_rloc(self._message_id(step["message"]))
        data = bytearray(self.store.get(rloc))
        offset = step.get("offset", 0) % len(data)
        data[offset] ^= 0x01
        self.store.corrupt(rloc, bytes(data))
        return {"message": step["message"], "offset": offset}

    # -- driver ---------------------------------------------------------------

    _PHASES = {
        "boot": "boot",
        "init": "init",
        "certify": "certify",
        "store-rsa-keys": "key-setup",
        "request-keys": "key-request",
        "publish": "publish",
        "fetch": "fetch",
        "collusion": "adversarial",
        "forged-fetch": "adversarial",
        "dishonest-opening": "adversarial",
        "withhold-share": "adversarial",
        "tamper-envelope": "adversarial",
    }

    def run(self) -> RunResult:
        handlers = {
            "boot": self._do_boot,
            "init": self._do_init,
            "certify": self._do_certify,
            "store-rsa-keys": self._do_store_rsa_keys,
            "request-keys": self._do_request_keys,
            "publish": self._do_publish,
            "fetch": self._do_fetch,
            "collusion": self._do_collusion,
            "forged-fetch": self._do_forged_fetch,
            "dishonest-opening": self._do_dishonest_opening,
            "withhold-share": self._do_withhold_share,
            "tamper-envelope": self._do_tamper_envelope,
        }
        for index, step in enumerate(self.script["steps"]):
            op = step["op"]
            expect = step.get("expect")
            before = len(self.ledger.log)
            event = {"step": index, "op": op}
            try:
                event.update(handlers[op](step) or {})
            except MartsiaError as exc:
                if expect is None:
                    raise
                if exc.code != expect:
                    raise RuntimeError(
                        f"step {index} ({op}) failed with {exc.code!r}, expected {expect!r}"
                    ) from exc
                event["error"] = exc.code
                event["detail"] = str(exc)
            else:
                if expect is not None:
                    raise RuntimeError(f"step {index} ({op}) succeeded, expected {expect!r}")
            self._count_phase(self._PHASES[op], before)
            self.events.append(event)
        transcript = {
            "name": self.script["name"],
            "seed": self.seed,
            "script_digest": hashlib.sha256(canonical_json_bytes(self.script)).hexdigest(),
            "events": self.events,
            "phases": dict(sorted(self.phase_counts.items())),
            "messages": dict(sorted(self.messages.items())),
            "access": {r: dict(sorted(m.items())) for r, m in sorted(self.access.items())},
            "transactions": len(self.ledger.log),
            "final_state_hash": self.ledger.state_hash(),
        }
        return RunResult(transcript, self.ledger, self.store, self)


def run_script(script: dict, store=None) -> RunResult:
    return ScenarioRunner(script, store=store).run()


def load_script(data: bytes) -> dict:
    return validate_script(parse_json_bytes(data))


# ---------------------------------------------------------------------------
# the built-in supply-chain example


def running_example(seed: int = 20260814) -> dict:
    """Cross-border supply chain: six readers, three messages, six slices."""
    po_policy = "43175279@2+ and (Manufacturer@1+ or (Supplier@1+ and International@1+))"
    slice_a = ("Customs@A or (43175279@2+ and ((Supplier@1+ and International@1+) "
               "or Manufacturer@1+ or (Carrier@1+ and International@1+)))")
    slice_b = "Customs@A or (43175279@2+ and (Supplier@1+ and International@1+))"
    slice_c = "43175279@2+ and ((Supplier@2+ and International@1+) or Manufacturer@1+)"
    slice_d = ("Customs@A or (43175279@2+ and ((Supplier@1+ and International@1+) "
               "or Manufacturer@1+))")
    clearance = "Customs@A or (43175279@2+ and Manufacturer@1+)"

    actors = {
        "manufacturer": {"roles": ["DataOwner", "Reader"],
                         "attributes": ["Manufacturer", "43175279"]},
        "international-supplier": {"roles": ["DataOwner", "Reader"],
                                   "attributes": ["Supplier", "International", "43175279"]},
        "national-supplier": {"roles": ["Reader"],
                              "attributes": ["Supplier", "National", "43175279"]},
        "national-customs": {"roles": ["DataOwner", "Reader"],
                             "attributes": ["Customs", "National"]},
        "international-customs": {"roles": ["Reader"],
                                  "attributes": ["Customs", "International"]},
        "international-carrier": {"roles": ["Reader"],
                                  "attributes": ["Carrier", "International", "43175279"]},
    }
    readers = list(actors)
    steps: List[dict] = [
        {"op": "boot"},
        {"op": "init"},
        {"op": "certify"},
        {"op": "store-rsa-keys"},
    ]
    onchain = {"manufacturer", "international-supplier", "national-supplier"}
    for name in readers:
        steps.append({"op": "request-keys", "reader": name,
                      "scheme": "onchain" if name in onchain else "channel"})
    steps.append({
        "op": "publish", "owner": "manufacturer", "message": "purchase-order",
        "slices": [{"policy": po_policy,
                    "fields": {"item": "wheelchair ramp", "quantity": "4",
                               "delivery": "assembly plant 2"}}],
    })
    steps.append({
        "op": "publish", "owner": "international-supplier", "message": "export-document",
        "slices": [
            {"policy": slice_a, "fields": {"consignee": "manufacturer",
                                           "route": "port of trieste",
                                           "container": "MSKU-204631-7"}},
            {"policy": slice_b, "fields": {"csdd": "supply chain due diligence report",
                                           "hs_code": "8714.20"}},
            {"policy": slice_c, "fields": {"order_reference": "purchase-order/43175279"}},
            {"policy": slice_d, "fields": {"invoice_total": "18090.00 EUR",
                                           "payment_terms": "net 30"}},
        ],
    })
    steps.append({
        "op": "publish", "owner": "national-customs", "message": "customs-clearance",
        "slices": [{"policy": clearance,
                    "fields": {"clearance_no": "IT-EXP-771031", "status": "approved"}}],
    })
    for name in readers:
        for alias in ("purchase-order", "export-document", "customs-clearance"):
            steps.append({"op": "fetch", "reader": name, "message": alias})
    return {
        "name": "running-example",
        "seed": seed,
        "case_id": "43175279",
        "certifiers": ["AC1", "AC2", "AC3"],
        "authorities": ["A", "B", "C"],
        "attribute_universe": sorted(
            {"Manufacturer", "Supplier", "International", "National",
             "Customs", "Carrier", "43175279"}
        ),
        "actors": actors,
        "steps": steps,
    }


#: reader -> {message alias: tuple of per-slice expectations} for the example;
#: "ok" means the recipients column grants access (sender included).
EXPECTED_ACCESS = {
    "manufacturer": {
        "purchase-order": ("ok",),
        "export-document": ("ok", "unauthorized", "ok", "ok"),
        "customs-clearance": ("ok",),
    },
    "international-supplier": {
        "purchase-order": ("ok",),
        "export-document": ("ok", "ok", "ok", "ok"),
        "customs-clearance": ("unauthorized",),
    },
    "national-supplier": {
        "purchase-order": ("unauthorized",),
        "export-document": ("unauthorized",) * 4,
        "customs-clearance": ("unauthorized",),
    },
    "national-customs": {
        "purchase-order": ("unauthorized",),
        "export-document": ("ok", "ok", "unauthorized", "ok"),
        "customs-clearance": ("ok",),
    },
    "international-customs": {
        "purchase-order": ("unauthorized",),
        "export-document": ("ok", "ok", "unauthorized", "ok"),
        "customs-clearance": ("ok",),
    },
    "international-carrier": {
        "purchase-order": ("unauthorized",),
        "export-document": ("ok", "unauthorized", "unauthorized", "unauthorized"),
        "customs-clearance": ("unauthorized",),
    },
}
