"""Pure-Python page store: COW address spaces over a snapshot stack.

Physical memory is a pool of refcounted page frames.  A ``BaseImage`` is an
immutable set of pages (the booted environment).  An ``AddressSpace`` is the
mutable view a running context owns: reads resolve through its snapshot
lineage, first writes allocate a private frame (copy-on-write), and a capture
turns the dirty set into an immutable ``Snapshot`` diff that later spaces can
be deployed from.  Snapshots chain parent-to-parent down to a base image, so
pages written once are shared by every descendant.

All bookkeeping is exact and immediate: a frame is freed the instant its
refcount reaches zero, and ``stats()`` is O(1).  Page *content* is stored by
reference to the caller's bytes object, so writing the same payload to a
million pages costs a million table entries, not a million copies.

Not thread-safe; one store belongs to one simulation/event loop.
"""

from __future__ import annotations

from typing import Iterator, Mapping, NamedTuple, Union

BACKEND_NAME = "pure"

DEFAULT_PAGE_SIZE = 4096
DEFAULT_REGISTER_SIZE = 256


class PageStoreError(Exception):
    """Base class for page store misuse."""


class MisalignedAddress(PageStoreError):
    """Address is not a multiple of the store's page size."""


class BadPageData(PageStoreError):
    """Page or register payload has the wrong length."""


class DeadObject(PageStoreError):
    """Operation on a destroyed address space or deleted snapshot."""


class DeletionBlocked(PageStoreError):
    """Snapshot still has live dependents (child snapshots or spaces)."""


class StoreStats(NamedTuple):
    unique_frames: int
    total_mappings: int
    bytes_resident: int


class PageStore:
    """Pool of refcounted page frames plus factory for images and spaces."""

    def __init__(self, page_size: int = DEFAULT_PAGE_SIZE,
                 register_size: int = DEFAULT_REGISTER_SIZE) -> None:
        if page_size <= 0 or register_size <= 0:
            raise ValueError("page_size and register_size must be positive")
        self.page_size = page_size
        self.register_size = register_size
        self._frame_bytes: dict[int, bytes] = {}
        self._frame_rc: dict[int, int] = {}
        self._next_frame = 0
        self._next_object = 0
        self._total_mappings = 0
        self._zero_page = bytes(page_size)
        self._zero_regs = bytes(register_size)

    # -- internal frame pool ------------------------------------------------

    def _alloc_frame(self, content: bytes) -> int:
        fid = self._next_frame
        self._next_frame = fid + 1
        self._frame_bytes[fid] = content
        self._frame_rc[fid] = 1
        return fid

    def _ref(self, fid: int) -> None:
        self._frame_rc[fid] += 1

    def _unref(self, fid: int) -> None:
        rc = self._frame_rc[fid] - 1
        if rc:
            self._frame_rc[fid] = rc
        else:
            del self._frame_rc[fid]
            del self._frame_bytes[fid]

    def _next_id(self) -> int:
        oid = self._next_object
        self._next_object = oid + 1
        return oid

    def _check_addr(self, addr: int) -> None:
        if addr % self.page_size or addr < 0:
            raise MisalignedAddress(f"address {addr:#x} not page-aligned")

    def _check_page(self, data: bytes) -> None:
        if len(data) != self.page_size:
            raise BadPageData(
                f"page payload is {len(data)} bytes, expected {self.page_size}")

    def _check_regs(self, regs: bytes) -> None:
        if len(regs) != self.register_size:
            raise BadPageData(
                f"register blob is {len(regs)} bytes, expected {self.register_size}")

    # -- public surface -----------------------------------------------------

    def zero_registers(self) -> bytes:
        return self._zero_regs

    def zero_page(self) -> bytes:
        return self._zero_page

    def create_base_image(self, pages: Mapping[int, bytes],
                          registers: bytes | None = None) -> "BaseImage":
        """Intern an immutable page set; each page gets one frame (no dedup)."""
        regs = self._zero_regs if registers is None else bytes(registers)
        self._check_regs(regs)
        page_map: dict[int, int] = {}
        for addr in sorted(pages):
            self._check_addr(addr)
            data = pages[addr]
            self._check_page(data)
            page_map[addr] = self._alloc_frame(data)
        self._total_mappings += len(page_map)
        return BaseImage(self, self._next_id(), page_map, regs)

    def stats(self) -> StoreStats:
        n = len(self._frame_bytes)
        return StoreStats(n, self._total_mappings, n * self.page_size)

    # test/introspection hooks
    def frame_refcounts(self) -> dict[int, int]:
        return dict(self._frame_rc)

    def frame_content(self, fid: int) -> bytes:
        return self._frame_bytes[fid]


class BaseImage:
    """Immutable page set a snapshot stack terminates at."""

    __slots__ = ("store", "image_id", "_pages", "entry_registers")

    def __init__(self, store: PageStore, image_id: int,
                 pages: dict[int, int], registers: bytes) -> None:
        self.store = store
        self.image_id = image_id
        self._pages = pages
        self.entry_registers = registers

    @property
    def page_count(self) -> int:
        return len(self._pages)

    def page_map(self) -> dict[int, int]:
        return dict(self._pages)

    def boot(self) -> "AddressSpace":
        """Map every image page read-only into a fresh address space."""
        store = self.store
        entries = {addr: [fid, False] for addr, fid in self._pages.items()}
        for fid in self._pages.values():
            store._ref(fid)
        store._total_mappings += len(entries)
        return AddressSpace(store, store._next_id(), self, entries,
                            self.entry_registers)


Parent = Union[BaseImage, "Snapshot"]


class Snapshot:
    """Immutable capture: parent link + dirty-page diff + register blob."""

    __slots__ = ("store", "snapshot_id", "parent", "_diff", "registers",
                 "refcount", "alive")

    def __init__(self, store: PageStore, snapshot_id: int, parent: Parent,
                 diff: dict[int, int], registers: bytes) -> None:
        self.store = store
        self.snapshot_id = snapshot_id
        self.parent = parent
        self._diff = diff
        self.registers = registers
        self.refcount = 0
        self.alive = True

    @property
    def size_pages(self) -> int:
        return len(self._diff)

    def diff_map(self) -> dict[int, int]:
        return dict(self._diff)

    def stack_depth(self) -> int:
        depth = 0
        node: Parent = self
        while isinstance(node, Snapshot):
            depth += 1
            node = node.parent
        return depth

    def stack_pages(self) -> int:
        """Total pages visible through this stack (diffs plus base image)."""
        seen: set[int] = set()
        node: Parent = self
        while isinstance(node, Snapshot):
            seen.update(node._diff)
            node = node.parent
        seen.update(node._pages)
        return len(seen)

    def acquire(self) -> None:
        """Take an external pin (e.g. a cache pool holding this snapshot)."""
        if not self.alive:
            raise DeadObject(f"snapshot {self.snapshot_id} is deleted")
        self.refcount += 1

    def release(self) -> None:
        self.refcount -= 1

    def read(self, addr: int) -> bytes:
        """Resolve a page through the stack without deploying a space."""
        store = self.store
        store._check_addr(addr)
        node: Parent = self
        while isinstance(node, Snapshot):
            if not node.alive:
                raise DeadObject(f"snapshot {node.snapshot_id} is deleted")
            fid = node._diff.get(addr)
            if fid is not None:
                return store._frame_bytes[fid]
            node = node.parent
        fid = node._pages.get(addr)
        if fid is not None:
            return store._frame_bytes[fid]
        return store._zero_page

    def deploy(self) -> "AddressSpace":
        """Create a space backed by this snapshot; mappings install lazily."""
        if not self.alive:
            raise DeadObject(f"snapshot {self.snapshot_id} is deleted")
        store = self.store
        self.refcount += 1
        return AddressSpace(store, store._next_id(), self, {}, self.registers)

    def delete(self) -> None:
        """Free the diff; only legal once nothing depends on this snapshot."""
        if not self.alive:
            raise DeadObject(f"snapshot {self.snapshot_id} already deleted")
        if self.refcount != 0:
            raise DeletionBlocked(
                f"snapshot {self.snapshot_id} has {self.refcount} dependents")
        store = self.store
        for fid in self._diff.values():
            store._unref(fid)
        store._total_mappings -= len(self._diff)
        self._diff = {}
        self.alive = False
        parent = self.parent
        if isinstance(parent, Snapshot):
            parent.release()


class AddressSpace:
    """Single-owner mutable view over a snapshot stack (one UC's memory).

    Entries map page address -> [frame_id, dirty].  A non-dirty entry is a
    read cache of a frame shared with the stack; a dirty entry is a private
    frame this space alone owns (writable, captured by the next snapshot).
    """

    __slots__ = ("store", "space_id", "source", "_entries", "registers",
                 "private_page_count", "alive")

    def __init__(self, store: PageStore, space_id: int, source: Parent,
                 entries: dict[int, list], registers: bytes) -> None:
        self.store = store
        self.space_id = space_id
        self.source = source
        self._entries = entries
        self.registers = registers
        self.private_page_count = 0
        self.alive = True

    def _check_alive(self) -> None:
        if not self.alive:
            raise DeadObject(f"address space {self.space_id} is destroyed")

    def entry_map(self) -> dict[int, tuple[int, bool]]:
        return {a: (e[0], e[1]) for a, e in self._entries.items()}

    def mapped_addresses(self) -> Iterator[int]:
        return iter(self._entries)

    def _resolve_stack(self, addr: int) -> int | None:
        node = self.source
        while isinstance(node, Snapshot):
            fid = node._diff.get(addr)
            if fid is not None:
                return fid
            node = node.parent
        return node._pages.get(addr)

    def read(self, addr: int) -> bytes:
        """Return the visible page; fault-cache ancestor hits read-only."""
        self._check_alive()
        store = self.store
        store._check_addr(addr)
        entry = self._entries.get(addr)
        if entry is not None:
            return store._frame_bytes[entry[0]]
        fid = self._resolve_stack(addr)
        if fid is None:
            return store._zero_page
        self._entries[addr] = [fid, False]
        store._ref(fid)
        store._total_mappings += 1
        return store._frame_bytes[fid]

    def write(self, addr: int, data: bytes) -> None:
        """Whole-page write; first touch of a shared page goes private."""
        self._check_alive()
        store = self.store
        store._check_addr(addr)
        store._check_page(data)
        entry = self._entries.get(addr)
        if entry is not None:
            if entry[1]:
                # already private: replace content in place
                store._frame_bytes[entry[0]] = data
                return
            # shared read mapping: drop it, take a private copy
            store._unref(entry[0])
            entry[0] = store._alloc_frame(data)
            entry[1] = True
        else:
            self._entries[addr] = [store._alloc_frame(data), True]
            store._total_mappings += 1
        self.private_page_count += 1

    def capture(self, registers: bytes | None = None) -> Snapshot:
        """Freeze the dirty set into a snapshot and re-parent onto it.

        The new snapshot's diff holds exactly the pages written since this
        space was created (or last captured); afterwards the space is clean
        again, so successive captures stack as incremental diffs.
        """
        self._check_alive()
        store = self.store
        regs = self.registers if registers is None else bytes(registers)
        store._check_regs(regs)
        diff: dict[int, int] = {}
        for addr, entry in self._entries.items():
            if entry[1]:
                fid = entry[0]
                diff[addr] = fid
                store._ref(fid)
                entry[1] = False
        store._total_mappings += len(diff)
        snap = Snapshot(store, store._next_id(), self.source, diff, regs)
        # parent gains a child; this space moves from old source to snap
        if isinstance(self.source, Snapshot):
            self.source.refcount += 1  # child link
            self.source.release()      # space no longer deployed from it
        self.source = snap
        snap.refcount = 1
        self.private_page_count = 0
        return snap

    def destroy(self) -> None:
        """Drop every mapping; private frames are reclaimed immediately."""
        self._check_alive()
        store = self.store
        for entry in self._entries.values():
            store._unref(entry[0])
        store._total_mappings -= len(self._entries)
        self._entries = {}
        self.alive = False
        self.private_page_count = 0
        if isinstance(self.source, Snapshot):
            self.source.release()
