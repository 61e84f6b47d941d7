import pytest

from martsia import maabe
from martsia.groups import hash_to_group
from martsia.identity import derived_rng

UNIVERSE = (
    "Manufacturer",
    "Supplier",
    "Customs",
    "Carrier",
    "International",
    "National",
    "43175279",
)
AUTHS = ("A", "B", "C")


@pytest.fixture(scope="session")
def pp3():
    seed = hash_to_group(b"tests/shared-params", "G1")
    return maabe.global_setup(seed, AUTHS, UNIVERSE)


@pytest.fixture(scope="session")
def keys3(pp3):
    pub, sec = {}, {}
    for name in AUTHS:
        p, s = maabe.auth_setup(pp3, name, derived_rng(7, "auth", name))
        pub[name], sec[name] = p, s
    return pub, sec


def random_policy_text(rng, attrs=UNIVERSE, auths=AUTHS, max_leaves=5, thresh_bias=0.4):
    """Well-formed random policy over the shared attribute/authority pools."""

    def leaf():
        attr = rng.choice(attrs)
        if rng.random() < thresh_bias:
            return f"{attr}@{rng.randint(1, len(auths))}+"
        return f"{attr}@{rng.choice(auths)}"

    def build(n):
        if n == 1:
            return leaf()
        k = rng.randint(1, n - 1)
        op = rng.choice(("and", "or"))
        text = f"{build(k)} {op} {build(n - k)}"
        return f"({text})" if rng.random() < 0.5 else text

    return build(rng.randint(1, max_leaves))


@pytest.fixture(scope="session")
def share_factory(pp3, keys3):
    # keygen is deterministic in its inputs, so caching across tests cannot
    # change any outcome, only the wall clock
    _, sec = keys3
    cache = {}

    def make(gid, attr, auth):
        key = (gid, attr, auth)
        if key not in cache:
            cache[key] = maabe.keygen(
                pp3, sec[auth], gid, attr, derived_rng(11, "kg", gid, attr, auth)
            )
        return cache[key]

    return make
