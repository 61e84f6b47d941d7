"""Error taxonomy shared by every layer of the package.

Each error carries a stable machine-readable ``code`` so the CLI can map
failures to exit statuses and scenario transcripts can record classifications
without string-matching human-readable text.
"""

from __future__ import annotations


class MartsiaError(Exception):
    """Base class; ``code`` is stable across releases."""

    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class UnauthorizedError(MartsiaError):
    """Attributes held do not satisfy the policy, or a role check failed."""

    code = "unauthorized"


class IntegrityError(MartsiaError):
    """Stored or transported bytes fail an authenticity or digest check."""

    code = "integrity-failure"


class MajorityError(MartsiaError):
    """A governance action lacks the required number of certifier signatures."""

    code = "majority-missing"


class CommitMismatchError(MartsiaError):
    """An opened value does not hash to the previously posted commitment.

    ``details["culprit"]`` names the misbehaving party's address when known.
    """

    code = "commit-mismatch"


class NotFoundError(MartsiaError):
    """A referenced object (rloc, message id, account, contract) is absent."""

    code = "not-found"


class MalformedError(MartsiaError):
    """Input bytes or structures violate the expected format."""

    code = "malformed"


class PolicySyntaxError(MalformedError):
    """Policy text failed to parse; ``position`` is a 0-based char offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})", position=position)
        self.position = position


#: Exit statuses used by the command line front end.  0 is success and 1 is
#: reserved for unexpected crashes, so taxonomy codes start at 2.
EXIT_CODES = {
    "unauthorized": 2,
    "integrity-failure": 3,
    "majority-missing": 4,
    "commit-mismatch": 5,
    "not-found": 6,
    "malformed": 7,
}
