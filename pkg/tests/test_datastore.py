import hashlib

import pytest

from martsia.datastore import DirectoryStore, MemoryStore, compute_rloc, validate_rloc
from martsia.errors import IntegrityError, MalformedError, NotFoundError


@pytest.fixture(params=["memory", "directory"])
def store(request, tmp_path):
    if request.param == "memory":
        return MemoryStore()
    return DirectoryStore(tmp_path / "objects")


def test_rloc_is_sha256_hex():
    data = b"hello world"
    assert compute_rloc(data) == hashlib.sha256(data).hexdigest()


def test_validate_rloc():
    good = compute_rloc(b"x")
    assert validate_rloc(good) == good
    for bad in ("", "zz", good[:-1], good + "0", good.upper(), 42, None, "../etc/passwd"):
        with pytest.raises(MalformedError):
            validate_rloc(bad)


def test_put_get_round_trip(store):
    data = b"some payload"
    rloc = store.put(data)
    assert rloc == compute_rloc(data)
    assert store.get(rloc) == data
    assert store.has(rloc)


def test_put_is_idempotent(store):
    data = b"dedup me"
    assert store.put(data) == store.put(data)
    assert store.rlocs().count(compute_rloc(data)) == 1


def test_put_rejects_empty_and_non_bytes(store):
    with pytest.raises(MalformedError):
        store.put(b"")
    with pytest.raises(MalformedError):
        store.put("text")


def test_get_missing(store):
    with pytest.raises(NotFoundError):
        store.get(compute_rloc(b"never stored"))
    with pytest.raises(MalformedError):
        store.get("not-a-locator")
    assert not store.has(compute_rloc(b"never stored"))


def test_corruption_is_detected_on_read(store):
    rloc = store.put(b"original content")
    tampered = bytearray(b"original content")
    tampered[0] ^= 0x01
    store.corrupt(rloc, bytes(tampered))
    with pytest.raises(IntegrityError):
        store.get(rloc)


def test_rlocs_listing_sorted(store):
    locs = [store.put(bytes([i]) * 3) for i in range(5)]
    assert store.rlocs() == sorted(locs)


def test_directory_store_persists_across_instances(tmp_path):
    first = DirectoryStore(tmp_path / "objects")
    rloc = first.put(b"durable")
    second = DirectoryStore(tmp_path / "objects")
    assert second.get(rloc) == b"durable"


def test_directory_store_ignores_foreign_files(tmp_path):
    store = DirectoryStore(tmp_path / "objects")
    rloc = store.put(b"real object")
    (tmp_path / "objects" / "README.txt").write_text("not an object")
    assert store.rlocs() == [rloc]
