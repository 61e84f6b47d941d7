"""Attribute-gated data exchange notarized on a deterministic ledger.

Data owners split messages into slices, seal each slice under a boolean
attribute policy, and notarize the resulting locators.  A set of mutually
distrusting attribute authorities jointly derives the public parameters via
a commit-then-open coin toss and hands out per-attribute key shares bound to
a reader's global identity, so shares from different readers never combine.
"""

from .datastore import DirectoryStore, MemoryStore, compute_rloc
from .envelope import (
    MessageEnvelope,
    MessageMetadata,
    SealedSlice,
    open_envelope_slice,
    seal_message,
)
from .errors import (
    EXIT_CODES,
    CommitMismatchError,
    IntegrityError,
    MajorityError,
    MalformedError,
    MartsiaError,
    NotFoundError,
    PolicySyntaxError,
    UnauthorizedError,
)
from .identity import ActorIdentity, derived_rng
from .ledger import Ledger, Transaction, sign_transaction
from .maabe import (
    AuthorityPublicKey,
    AuthoritySecretKey,
    Ciphertext,
    GlobalParams,
    KeyShare,
    auth_setup,
    decrypt,
    encrypt,
    global_setup,
    keygen,
)
from .policy import (
    AccessStructure,
    compile_policy_text,
    evaluate,
    normalize_policy_text,
    parse_policy,
    policy_to_text,
)
from .scenario import (
    EXPECTED_ACCESS,
    RunResult,
    ScenarioRunner,
    build_cast,
    load_script,
    run_script,
    running_example,
    validate_script,
)

__version__ = "1.0.0"

__all__ = [
    "AccessStructure",
    "ActorIdentity",
    "AuthorityPublicKey",
    "AuthoritySecretKey",
    "Ciphertext",
    "CommitMismatchError",
    "DirectoryStore",
    "EXIT_CODES",
    "EXPECTED_ACCESS",
    "GlobalParams",
    "IntegrityError",
    "KeyShare",
    "Ledger",
    "MajorityError",
    "MalformedError",
    "MartsiaError",
    "MemoryStore",
    "MessageEnvelope",
    "MessageMetadata",
    "NotFoundError",
    "PolicySyntaxError",
    "RunResult",
    "ScenarioRunner",
    "SealedSlice",
    "Transaction",
    "UnauthorizedError",
    "auth_setup",
    "build_cast",
    "compile_policy_text",
    "compute_rloc",
    "decrypt",
    "derived_rng",
    "encrypt",
    "evaluate",
    "global_setup",
    "keygen",
    "load_script",
    "normalize_policy_text",
    "open_envelope_slice",
    "parse_policy",
    "policy_to_text",
    "run_script",
    "running_example",
    "seal_message",
    "sign_transaction",
    "validate_script",
]
