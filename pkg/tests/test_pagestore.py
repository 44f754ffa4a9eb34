from __future__ import annotations

import pytest

from seuss_sim.pagestore import _pure
from seuss_sim.pagestore._pure import (
    BadPageData,
    DeadObject,
    DeletionBlocked,
    MisalignedAddress,
)

from conftest import make_store

PS = 16  # tiny pages keep the tests readable


def page(core, fill: bytes) -> bytes:
    return fill * PS


def test_create_base_image_empty(core):
    store = make_store(core)
    img = store.create_base_image({})
    assert img.page_count == 0
    assert store.stats() == (0, 0, 0)


def test_create_base_image_two_pages(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a"), PS: page(core, b"b")})
    assert img.page_count == 2
    assert store.stats().unique_frames == 2
    assert all(rc == 1 for rc in store.frame_refcounts().values())


def test_identical_bytes_are_not_deduplicated(core):
    store = make_store(core)
    store.create_base_image({0: page(core, b"x"), PS: page(core, b"x")})
    # sharing is by lineage only, never by content
    assert store.stats().unique_frames == 2


def test_create_base_image_rejects_bad_input(core):
    store = make_store(core)
    with pytest.raises(MisalignedAddress):
        store.create_base_image({3: page(core, b"a")})
    with pytest.raises(BadPageData):
        store.create_base_image({0: b"short"})
    with pytest.raises(BadPageData):
        store.create_base_image({}, registers=b"\x00" * 99)


def test_boot_empty_image(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    assert space.entry_map() == {}
    assert space.private_page_count == 0


def test_boot_maps_image_read_only(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a"), PS: page(core, b"b")})
    space = img.boot()
    assert space.private_page_count == 0
    assert all(not dirty for _, dirty in space.entry_map().values())
    assert all(rc == 2 for rc in store.frame_refcounts().values())


def test_boot_twice_shares_frames(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a"), PS: page(core, b"b")})
    s1, s2 = img.boot(), img.boot()
    assert {a: f for a, (f, _) in s1.entry_map().items()} == {
        a: f for a, (f, _) in s2.entry_map().items()
    }
    assert store.stats().unique_frames == 2


def test_read_after_boot_returns_image_bytes(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a")})
    assert img.boot().read(0) == page(core, b"a")


def test_read_unmapped_returns_zero_page(core):
    store = make_store(core)
    space = store.create_base_image({0: page(core, b"a")}).boot()
    assert space.read(7 * PS) == bytes(PS)
    # zero fill is a default, not an allocation
    assert store.stats().unique_frames == 1


def test_read_fault_caches_ancestor_mapping(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a")})
    space = img.boot()
    snap = space.capture()
    child = snap.deploy()
    before = store.stats().total_mappings
    assert child.read(0) == page(core, b"a")
    after = store.stats()
    assert after.total_mappings == before + 1  # read-only entry installed
    assert after.unique_frames == 1  # no copy
    assert child.private_page_count == 0


def test_misaligned_read_write(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    with pytest.raises(MisalignedAddress):
        space.read(5)
    with pytest.raises(MisalignedAddress):
        space.write(5, page(core, b"z"))


def test_first_write_is_copy_on_write(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a")})
    space = img.boot()
    space.write(0, page(core, b"z"))
    assert space.private_page_count == 1
    # ancestor frame untouched and still referenced by the image
    image_frame = img.page_map()[0]
    assert store.frame_content(image_frame) == page(core, b"a")
    assert store.frame_refcounts()[image_frame] == 1
    assert space.read(0) == page(core, b"z")


def test_second_write_same_page_stays_private(core):
    store = make_store(core)
    space = store.create_base_image({0: page(core, b"a")}).boot()
    space.write(0, page(core, b"y"))
    frames_after_first = store.stats().unique_frames
    space.write(0, page(core, b"z"))
    assert space.private_page_count == 1
    assert store.stats().unique_frames == frames_after_first
    assert space.read(0) == page(core, b"z")


def test_thirteen_writes_capture_thirteen_pages(core):
    # the modeled hot-path write count
    store = make_store(core)
    space = store.create_base_image({}).boot()
    for i in range(13):
        space.write(i * PS, page(core, b"h"))
    assert space.capture().size_pages == 13


def test_write_to_destroyed_space_fails(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    space.destroy()
    with pytest.raises(DeadObject):
        space.write(0, page(core, b"z"))
    with pytest.raises(DeadObject):
        space.destroy()


def test_capture_with_no_dirty_pages(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a")})
    space = img.boot()
    snap = space.capture()
    assert snap.size_pages == 0
    assert space.source is snap
    assert space.read(0) == page(core, b"a")


def test_capture_diff_is_dirty_set(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    for i in range(3):
        space.write(i * PS, page(core, b"w"))
    snap = space.capture()
    assert snap.size_pages == 3
    assert space.private_page_count == 0


def test_stacked_captures_diff_against_previous(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    a, b, c = 0, PS, 2 * PS
    space.write(a, page(core, b"1"))
    space.write(b, page(core, b"1"))
    s1 = space.capture()
    space.write(b, page(core, b"2"))
    space.write(c, page(core, b"2"))
    s2 = space.capture()
    assert s1.size_pages == 2
    assert s2.size_pages == 2
    assert s2.parent is s1
    # A was only written before S1: S2's stack resolves it from S1
    assert s2.read(a) == page(core, b"1")
    assert s2.read(b) == page(core, b"2")


def test_capture_on_destroyed_space_fails(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    space.destroy()
    with pytest.raises(DeadObject):
        space.capture()


def test_deploy_reads_through_stack(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a")})
    space = img.boot()
    space.write(PS, page(core, b"b"))
    snap = space.capture()
    clone = snap.deploy()
    assert clone.read(0) == page(core, b"a")
    assert clone.read(PS) == page(core, b"b")


def test_deploy_many_adds_no_frames(core):
    store = make_store(core)
    space = store.create_base_image({0: page(core, b"a")}).boot()
    space.write(PS, page(core, b"b"))
    snap = space.capture()
    frames = store.stats().unique_frames
    spaces = [snap.deploy() for _ in range(1000)]
    assert store.stats().unique_frames == frames
    assert snap.refcount == 1001  # 1000 clones + the captured space
    for s in spaces:
        s.destroy()
    assert snap.refcount == 1


def test_deploy_write_destroy_reclaims(core):
    store = make_store(core)
    space = store.create_base_image({0: page(core, b"a")}).boot()
    snap = space.capture()
    frames = store.stats().unique_frames
    clone = snap.deploy()
    clone.write(4 * PS, page(core, b"w"))
    assert store.stats().unique_frames == frames + 1
    clone.destroy()
    assert store.stats().unique_frames == frames


def test_deploy_from_deleted_snapshot_fails(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    snap = space.capture()
    space.destroy()
    snap.delete()
    with pytest.raises(DeadObject):
        snap.deploy()


def test_destroy_fresh_boot_leaks_nothing(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a")})
    before = store.stats()
    space = img.boot()
    space.destroy()
    assert store.stats() == before


def test_destroy_after_writes_reclaims_frames(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a")})
    space = img.boot()
    for i in range(10):
        space.write((i + 1) * PS, page(core, b"w"))
    assert store.stats().unique_frames == 11
    space.destroy()
    assert store.stats().unique_frames == 1


def test_destroy_last_space_makes_snapshot_deletable(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    space.write(0, page(core, b"w"))
    snap = space.capture()
    clone = snap.deploy()
    assert snap.refcount == 2
    space.destroy()
    clone.destroy()
    assert snap.refcount == 0
    snap.delete()  # now legal
    assert store.stats().unique_frames == 0


def test_delete_blocked_by_live_space(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    snap = space.capture()
    with pytest.raises(DeletionBlocked):
        snap.delete()
    space.destroy()
    snap.delete()


def test_delete_child_then_parent(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a")})
    space = img.boot()
    space.write(PS, page(core, b"1"))
    parent = space.capture()
    space.write(2 * PS, page(core, b"2"))
    child = space.capture()
    space.destroy()
    child.delete()
    assert parent.refcount == 0
    parent.delete()
    # base image intact
    assert store.stats().unique_frames == 1
    assert img.boot().read(0) == page(core, b"a")


def test_double_delete_fails(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    snap = space.capture()
    space.destroy()
    snap.delete()
    with pytest.raises(DeadObject):
        snap.delete()


def test_stats_empty(core):
    assert make_store(core).stats() == (0, 0, 0)


def test_stats_image_and_two_boots(core):
    store = make_store(core)
    img = store.create_base_image({0: page(core, b"a"), PS: page(core, b"b")})
    img.boot()
    img.boot()
    stats = store.stats()
    assert stats.unique_frames == 2
    assert stats.total_mappings == 6  # image + 2 spaces
    assert stats.bytes_resident == 2 * PS


def test_stats_base_image_and_function_diff_arithmetic():
    # 114.5 MiB base at 4 KiB pages is exactly 29312 frames; each initialized
    # function context adds its 391 private pages on top of the shared stack.
    store = _pure.PageStore(page_size=4096)
    base_pages = (114 * 1024 * 1024 + 512 * 1024) // 4096
    assert base_pages == 29312
    content = b"\x42" * 4096
    img = store.create_base_image({i * 4096: content for i in range(base_pages)})
    space = img.boot()
    runtime_snap = space.capture()
    assert store.stats().unique_frames == base_pages

    clone = runtime_snap.deploy()
    for i in range(391):
        clone.write((base_pages + i) * 4096, content)
    stats = store.stats()
    assert stats.unique_frames == base_pages + 391
    assert stats.bytes_resident == (base_pages + 391) * 4096


def test_snapshot_read_zero_page_and_registers(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    regs = bytes(range(8))
    snap = space.capture(regs)
    assert snap.registers == regs
    assert snap.read(0) == bytes(PS)
    clone = snap.deploy()
    assert clone.registers == regs


def test_acyclic_stack_depth_matches_captures(core):
    store = make_store(core)
    space = store.create_base_image({}).boot()
    snaps = []
    for i in range(5):
        space.write(i * PS, page(core, b"w"))
        snaps.append(space.capture())
    assert snaps[-1].stack_depth() == 5
    parents = []
    node = snaps[-1]
    while hasattr(node, "parent"):
        parents.append(node)
        node = node.parent
    assert parents == snaps[::-1]
