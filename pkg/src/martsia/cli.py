"""Command line front end.

Stateful commands share two artifacts on disk: the ledger journal (newline
delimited JSON, replayed and re-validated on every load) and the
content-addressed store directory.  The cast of a deployment is declared in a
scenario script; because every identity derives from the script seed, any
command can reconstruct any actor without key files.

Protocol failures exit with stable codes from the error taxonomy; 0 is
success and 1 an unexpected crash.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import actors as act
from . import policy as policy_mod
from . import scenario as scenario_mod
from .datastore import DirectoryStore
from .encoding import canonical_json_bytes
from .errors import EXIT_CODES, MalformedError, MartsiaError, NotFoundError
from .identity import derived_rng
from .ledger import Ledger


def _echo_json(data):
    click.echo(canonical_json_bytes(data).decode())


def _load_script(path: str, seed_override) -> dict:
    script = scenario_mod.load_script(Path(path).read_bytes())
    if seed_override is not None:
        script = dict(script, seed=int(seed_override))
    return script


def _load_ledger(path: str) -> Ledger:
    ledger_path = Path(path)
    if ledger_path.exists():
        return Ledger.replay(ledger_path.read_bytes())
    return Ledger()


def _save_ledger(ledger: Ledger, path: str):
    Path(path).write_bytes(ledger.export_journal())


def _fail(exc: MartsiaError):
    click.echo(f"error[{exc.code}]: {exc}", err=True)
    sys.exit(EXIT_CODES.get(exc.code, 1))


def _common(fn):
    fn = click.option("--script", "-s", "script_path", required=True,
                      type=click.Path(exists=True, dir_okay=False),
                      help="Scenario script declaring the cast.")(fn)
    fn = click.option("--ledger-file", default="martsia-ledger.ndjson",
                      show_default=True, help="Ledger journal path.")(fn)
    fn = click.option("--store-dir", default="martsia-store", show_default=True,
                      help="Content-addressed store directory.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the script seed.")(fn)
    return fn


@click.group()
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def main(ctx, as_json):
    """Attribute-gated data exchange over a notarizing ledger."""
    ctx.ensure_object(dict)
    ctx.obj["json"] = as_json


def _restored_nodes(cast, ledger, store):
    for node in cast["authorities"]:
        node.restore_from_chain(ledger, store)
    return cast["authorities"]


def _resolve_message_id(script: dict, token: str, ledger: Ledger) -> str:
    """Accept a raw message id or a publish-step alias from the script.

    Aliases never reach the chain, so they resolve through the policy index:
    a message published for the alias carries exactly that step's policies.
    """
    if token in ledger.message.messages:
        return token
    step = next((s for s in script["steps"]
                 if s.get("op") == "publish" and s.get("message") == token), None)
    if step is None:
        return token
    wanted = {policy_mod.normalize_policy_text(p["policy"]) for p in step["slices"]}
    candidates = None
    for text in wanted:
        bucket = set(ledger.message.policy_index.get(text, ()))
        candidates = bucket if candidates is None else candidates & bucket
    ids = [mid for mid, entry in ledger.message.messages.items()
           if candidates and entry["rloc"] in candidates]
    if not ids:
        raise NotFoundError(f"message {token!r} has not been published yet")
    return ids[-1]


@main.command()
@_common
@click.pass_context
def boot(ctx, script_path, ledger_file, store_dir, seed):
    """Deploy contracts, assign roles, register authorities."""
    try:
        script = _load_script(script_path, seed)
        cast = scenario_mod.build_cast(script)
        ledger = _load_ledger(ledger_file)
        for identity in cast["actors"].values():
            ledger.register_account(identity.verify_key)
        grants = {
            cast["actors"][name].address: list(profile.get("roles", ()))
            for name, profile in sorted(script["actors"].items())
        }
        out = act.run_system_boot(ledger, cast["certifiers"], grants, cast["authorities"])
        _save_ledger(ledger, ledger_file)
        if ctx.obj["json"]:
            _echo_json({"deployed": True, **out, "transactions": len(ledger.log)})
        else:
            click.echo(f"deployed with {len(out['certifiers'])} certifiers; "
                       f"authorities: {', '.join(out['authorities'])}")
    except MartsiaError as exc:
        _fail(exc)


@main.command("init-authorities")
@_common
@click.pass_context
def init_authorities(ctx, script_path, ledger_file, store_dir, seed):
    """Run the commit-then-open toss and publish the shared parameters."""
    try:
        script = _load_script(script_path, seed)
        cast = scenario_mod.build_cast(script)
        ledger = _load_ledger(ledger_file)
        store = DirectoryStore(store_dir)
        out = act.run_authority_init(ledger, store, cast["authorities"],
                                     tuple(script.get("attribute_universe", ())))
        _save_ledger(ledger, ledger_file)
        if ctx.obj["json"]:
            _echo_json({"params_digest": out["params_digest"]})
        else:
            click.echo(f"parameters agreed; digest {out['params_digest']}")
    except MartsiaError as exc:
        _fail(exc)


@main.command()
@_common
@click.pass_context
def certify(ctx, script_path, ledger_file, store_dir, seed):
    """Notarize the declared reader attributes."""
    try:
        script = _load_script(script_path, seed)
        cast = scenario_mod.build_cast(script)
        ledger = _load_ledger(ledger_file)
        store = DirectoryStore(store_dir)
        assignments = {
            cast["actors"][name].gid: list(profile.get("attributes", ()))
            for name, profile in sorted(script["actors"].items())
            if profile.get("attributes")
        }
        rloc = act.certify_attributes(ledger, store, cast["certifiers"],
                                      tuple(script.get("attribute_universe", ())),
                                      assignments)
        _save_ledger(ledger, ledger_file)
        if ctx.obj["json"]:
            _echo_json({"attr_rloc": rloc, "readers": len(assignments)})
        else:
            click.echo(f"certified {len(assignments)} readers; file at {rloc}")
    except MartsiaError as exc:
        _fail(exc)


@main.command("request-key")
@_common
@click.option("--reader", required=True, help="Actor name from the script.")
@click.option("--scheme", type=click.Choice(["channel", "onchain"]),
              default="channel", show_default=True)
@click.pass_context
def request_key(ctx, script_path, ledger_file, store_dir, seed, reader, scheme):
    """Obtain decryption key shares from every authority."""
    try:
        script = _load_script(script_path, seed)
        if reader not in script["actors"]:
            raise MalformedError(f"unknown actor {reader!r}")
        cast = scenario_mod.build_cast(script)
        ledger = _load_ledger(ledger_file)
        store = DirectoryStore(store_dir)
        identity = cast["actors"][reader]
        try:
            ledger.get_rsa_key(identity.address)
        except NotFoundError:
            act.store_reader_rsa_key(ledger, identity)
        nodes = _restored_nodes(cast, ledger, store)
        shares = []
        for node in nodes:
            if scheme == "channel":
                shares.extend(act.request_key_channel(identity, node, ledger, store))
            else:
                shares.extend(act.request_key_onchain(identity, node, ledger, store))
        bundle = act.assemble_fdk(shares)
        _save_ledger(ledger, ledger_file)
        literals = sorted(f"{s.attr}@{s.authority}" for s in bundle)
        if ctx.obj["json"]:
            _echo_json({"reader": reader, "scheme": scheme, "shares": literals})
        else:
            click.echo(f"{reader} holds {len(bundle)} shares via {scheme}: "
                       + (", ".join(literals) if literals else "(none)"))
    except MartsiaError as exc:
        _fail(exc)


@main.command()
@_common
@click.option("--message", "alias", required=True,
              help="Message alias from the script's publish steps.")
@click.pass_context
def publish(ctx, script_path, ledger_file, store_dir, seed, alias):
    """Seal and notarize one of the script's declared messages."""
    try:
        script = _load_script(script_path, seed)
        step = next((s for s in script["steps"]
                     if s.get("op") == "publish" and s.get("message") == alias), None)
        if step is None:
            raise MalformedError(f"script declares no publish step for {alias!r}")
        cast = scenario_mod.build_cast(script)
        ledger = _load_ledger(ledger_file)
        store = DirectoryStore(store_dir)
        owner = cast["actors"][step["owner"]]
        parts = [(p["policy"], dict(p["fields"])) for p in step["slices"]]
        rng = derived_rng(script["seed"], "publish", step["owner"], str(len(ledger.log)))
        message_id = act.owner_publish(owner, ledger, store, script["case_id"], parts, rng)
        _save_ledger(ledger, ledger_file)
        if ctx.obj["json"]:
            _echo_json({"message": alias, "message_id": message_id})
        else:
            click.echo(f"published {alias} as message {message_id}")
    except MartsiaError as exc:
        _fail(exc)


@main.command()
@_common
@click.option("--reader", required=True, help="Actor name from the script.")
@click.option("--message", "message_id", required=True,
              help="8-digit message id or publish-step alias.")
@click.pass_context
def fetch(ctx, script_path, ledger_file, store_dir, seed, reader, message_id):
    """Retrieve a message and open every slice the reader's shares allow."""
    try:
        script = _load_script(script_path, seed)
        if reader not in script["actors"]:
            raise MalformedError(f"unknown actor {reader!r}")
        cast = scenario_mod.build_cast(script)
        ledger = _load_ledger(ledger_file)
        store = DirectoryStore(store_dir)
        message_id = _resolve_message_id(script, message_id, ledger)
        identity = cast["actors"][reader]
        try:
            ledger.get_rsa_key(identity.address)
        except NotFoundError:
            act.store_reader_rsa_key(ledger, identity)
            _save_ledger(ledger, ledger_file)
        nodes = _restored_nodes(cast, ledger, store)
        shares = []
        for node in nodes:
            shares.extend(act.request_key_channel(identity, node, ledger, store))
        results = act.reader_fetch(identity, ledger, store, message_id, shares)
        if ctx.obj["json"]:
            _echo_json({"reader": reader, "message_id": message_id, "slices": results})
        else:
            for entry in results:
                tag = entry["slice_id"] or str(entry["index"])
                if entry["status"] == "ok":
                    rendered = ", ".join(f"{k}={v}" for k, v in entry["fields"].items())
                    click.echo(f"slice {tag}: {rendered}")
                else:
                    click.echo(f"slice {tag}: {entry['status']}")
    except MartsiaError as exc:
        _fail(exc)


@main.group()
def policy():
    """Policy language utilities."""


@policy.command("check")
@click.argument("text")
@click.option("--authorities", default=None,
              help="Comma-separated authority names for @n+ expansion.")
@click.option("--literals", default=None,
              help="Comma-separated Attr@Authority literals to evaluate.")
@click.pass_context
def policy_check(ctx, text, authorities, literals):
    """Parse a policy; optionally test a literal set against it."""
    try:
        ast = policy_mod.parse_policy(text)
        canonical = policy_mod.policy_to_text(ast)
        out = {"canonical": canonical}
        if authorities:
            names = tuple(n.strip() for n in authorities.split(",") if n.strip())
            structure = policy_mod.compile_policy_text(text, names)
            out["rows"] = len(structure.matrix)
            out["width"] = structure.width
            if literals is not None:
                owned = set()
                for item in literals.split(","):
                    item = item.strip()
                    if not item:
                        continue
                    if "@" not in item:
                        raise MalformedError(f"literal {item!r} must be Attr@Authority")
                    attr, _, auth = item.rpartition("@")
                    owned.add((attr, auth))
                out["satisfied"] = policy_mod.evaluate(ast, owned, names)
        if ctx.obj["json"]:
            _echo_json(out)
        else:
            click.echo(f"canonical: {out['canonical']}")
            if "rows" in out:
                click.echo(f"compiled: {out['rows']} rows, width {out['width']}")
            if "satisfied" in out:
                click.echo("satisfied" if out["satisfied"] else "not satisfied")
    except MartsiaError as exc:
        _fail(exc)


@main.group()
def ledger():
    """Ledger inspection."""


@ledger.command("dump")
@click.option("--ledger-file", default="martsia-ledger.ndjson", show_default=True)
@click.pass_context
def ledger_dump(ctx, ledger_file):
    """Print contract state, transaction count, and the state hash."""
    try:
        led = _load_ledger(ledger_file)
        snapshot = led.state_snapshot()
        out = {
            "state": snapshot,
            "transactions": len(led.log),
            "state_hash": led.state_hash(),
        }
        if ctx.obj["json"]:
            _echo_json(out)
        else:
            click.echo(json.dumps(out, indent=2, sort_keys=True))
    except MartsiaError as exc:
        _fail(exc)


@main.group()
def scenario():
    """Scripted end-to-end runs."""


@scenario.command("run")
@click.argument("script_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--transcript", "transcript_path", default=None,
              help="Write the canonical transcript JSON here.")
@click.option("--store-dir", default=None,
              help="Persist stored objects to this directory.")
@click.option("--ledger-file", default=None,
              help="Persist the ledger journal to this file.")
@click.option("--seed", type=int, default=None, help="Override the script seed.")
@click.pass_context
def scenario_run(ctx, script_file, transcript_path, store_dir, ledger_file, seed):
    """Execute a scenario script against a fresh ledger and store."""
    try:
        script = _load_script(script_file, seed)
        store = DirectoryStore(store_dir) if store_dir else None
        result = scenario_mod.run_script(script, store=store)
        if transcript_path:
            Path(transcript_path).write_bytes(result.transcript_bytes())
        if ledger_file:
            _save_ledger(result.ledger, ledger_file)
        t = result.transcript
        if ctx.obj["json"]:
            _echo_json(t)
        else:
            click.echo(f"scenario {t['name']} finished: {t['transactions']} transactions")
            for phase, count in t["phases"].items():
                click.echo(f"  {phase}: {count}")
            for reader, per_msg in t["access"].items():
                for alias, statuses in per_msg.items():
                    click.echo(f"  {reader} x {alias}: {', '.join(statuses)}")
            click.echo(f"state hash {t['final_state_hash']}")
    except MartsiaError as exc:
        _fail(exc)


@scenario.command("example")
@click.argument("path", required=False)
@click.pass_context
def scenario_example(ctx, path):
    """Emit the built-in supply-chain script (stdout or PATH)."""
    data = canonical_json_bytes(scenario_mod.running_example()) + b"\n"
    if path:
        Path(path).write_bytes(data)
        click.echo(f"wrote {path}")
    else:
        click.echo(data.decode(), nl=False)


@scenario.command("report")
@click.argument("transcript_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def scenario_report(ctx, transcript_file):
    """Per-phase transaction counts from a transcript."""
    try:
        from .encoding import parse_json_bytes

        t = parse_json_bytes(Path(transcript_file).read_bytes())
        phases = t.get("phases", {})
        out = {"phases": phases, "transactions": t.get("transactions")}
        if ctx.obj["json"]:
            _echo_json(out)
        else:
            for phase, count in sorted(phases.items()):
                click.echo(f"{phase}: {count}")
            click.echo(f"total: {out['transactions']}")
    except MartsiaError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
