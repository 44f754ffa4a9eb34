# cython: language_level=3
# cython: boundscheck=False, wraparound=False
"""Compiled page-store core: observable twin of ``_pure``.

Same classes, same semantics, same object ids for the same op sequence;
only faster.  Error types and the stats tuple are shared with the pure
module so callers never see backend-specific types.
"""

from seuss_sim.pagestore._pure import (
    DEFAULT_PAGE_SIZE,
    DEFAULT_REGISTER_SIZE,
    BadPageData,
    DeadObject,
    DeletionBlocked,
    MisalignedAddress,
    PageStoreError,
    StoreStats,
)

BACKEND_NAME = "compiled"


cdef class PageStore:
    """Pool of refcounted page frames plus factory for images and spaces."""

    cdef public long long page_size
    cdef public long long register_size
    cdef dict _frame_bytes
    cdef dict _frame_rc
    cdef long long _next_frame
    cdef long long _next_object
    cdef long long _total_mappings
    cdef bytes _zero_page_b
    cdef bytes _zero_regs_b

    def __init__(self, page_size=DEFAULT_PAGE_SIZE,
                 register_size=DEFAULT_REGISTER_SIZE):
        if page_size <= 0 or register_size <= 0:
            raise ValueError("page_size and register_size must be positive")
        self.page_size = page_size
        self.register_size = register_size
        self._frame_bytes = {}
        self._frame_rc = {}
        self._next_frame = 0
        self._next_object = 0
        self._total_mappings = 0
        self._zero_page_b = bytes(page_size)
        self._zero_regs_b = bytes(register_size)

    cdef long long _alloc_frame(self, bytes content):
        cdef long long fid = self._next_frame
        self._next_frame = fid + 1
        self._frame_bytes[fid] = content
        self._frame_rc[fid] = 1
        return fid

    cdef void _ref(self, long long fid):
        self._frame_rc[fid] = self._frame_rc[fid] + 1

    cdef void _unref(self, long long fid):
        cdef long long rc = self._frame_rc[fid] - 1
        if rc:
            self._frame_rc[fid] = rc
        else:
            del self._frame_rc[fid]
            del self._frame_bytes[fid]

    cdef long long _next_id(self):
        cdef long long oid = self._next_object
        self._next_object = oid + 1
        return oid

    cdef int _check_addr(self, long long addr) except -1:
        if addr % self.page_size or addr < 0:
            raise MisalignedAddress(f"address {addr:#x} not page-aligned")
        return 0

    cdef int _check_page(self, bytes data) except -1:
        if len(data) != self.page_size:
            raise BadPageData(
                f"page payload is {len(data)} bytes, expected {self.page_size}")
        return 0

    cdef int _check_regs(self, bytes regs) except -1:
        if len(regs) != self.register_size:
            raise BadPageData(
                f"register blob is {len(regs)} bytes, expected {self.register_size}")
        return 0

    def zero_registers(self):
        return self._zero_regs_b

    def zero_page(self):
        return self._zero_page_b

    def create_base_image(self, pages, registers=None):
        """Intern an immutable page set; each page gets one frame (no dedup)."""
        cdef bytes regs = self._zero_regs_b if registers is None else bytes(registers)
        self._check_regs(regs)
        cdef dict page_map = {}
        cdef long long addr
        for addr in sorted(pages):
            self._check_addr(addr)
            data = pages[addr]
            self._check_page(data)
            page_map[addr] = self._alloc_frame(data)
        self._total_mappings += len(page_map)
        return BaseImage(self, self._next_id(), page_map, regs)

    def stats(self):
        cdef long long n = len(self._frame_bytes)
        return StoreStats(n, self._total_mappings, n * self.page_size)

    def frame_refcounts(self):
        return dict(self._frame_rc)

    def frame_content(self, fid):
        return self._frame_bytes[fid]


cdef class BaseImage:
    """Immutable page set a snapshot stack terminates at."""

    cdef public PageStore store
    cdef public long long image_id
    cdef dict _pages
    cdef public bytes entry_registers

    def __init__(self, PageStore store, image_id, dict pages, bytes registers):
        self.store = store
        self.image_id = image_id
        self._pages = pages
        self.entry_registers = registers

    @property
    def page_count(self):
        return len(self._pages)

    def page_map(self):
        return dict(self._pages)

    def boot(self):
        """Map every image page read-only into a fresh address space."""
        cdef PageStore store = self.store
        cdef dict entries = {}
        cdef long long fid
        for addr, fid in self._pages.items():
            entries[addr] = [fid, False]
            store._ref(fid)
        store._total_mappings += len(entries)
        return AddressSpace(store, store._next_id(), self, entries,
                            self.entry_registers)


cdef class Snapshot:
    """Immutable capture: parent link + dirty-page diff + register blob."""

    cdef public PageStore store
    cdef public long long snapshot_id
    cdef public object parent
    cdef dict _diff
    cdef public bytes registers
    cdef public long long refcount
    cdef public bint alive

    def __init__(self, PageStore store, snapshot_id, parent, dict diff,
                 bytes registers):
        self.store = store
        self.snapshot_id = snapshot_id
        self.parent = parent
        self._diff = diff
        self.registers = registers
        self.refcount = 0
        self.alive = True

    @property
    def size_pages(self):
        return len(self._diff)

    def diff_map(self):
        return dict(self._diff)

    def stack_depth(self):
        cdef long long depth = 0
        node = self
        while isinstance(node, Snapshot):
            depth += 1
            node = (<Snapshot>node).parent
        return depth

    def stack_pages(self):
        """Total pages visible through this stack (diffs plus base image)."""
        seen = set()
        node = self
        while isinstance(node, Snapshot):
            seen.update((<Snapshot>node)._diff)
            node = (<Snapshot>node).parent
        seen.update((<BaseImage>node)._pages)
        return len(seen)

    def acquire(self):
        """Take an external pin (e.g. a cache pool holding this snapshot)."""
        if not self.alive:
            raise DeadObject(f"snapshot {self.snapshot_id} is deleted")
        self.refcount += 1

    def release(self):
        self.refcount -= 1

    def read(self, addr):
        """Resolve a page through the stack without deploying a space."""
        cdef PageStore store = self.store
        store._check_addr(addr)
        node = self
        cdef Snapshot snap
        while isinstance(node, Snapshot):
            snap = <Snapshot>node
            if not snap.alive:
                raise DeadObject(f"snapshot {snap.snapshot_id} is deleted")
            fid = snap._diff.get(addr)
            if fid is not None:
                return store._frame_bytes[fid]
            node = snap.parent
        fid = (<BaseImage>node)._pages.get(addr)
        if fid is not None:
            return store._frame_bytes[fid]
        return store._zero_page_b

    def deploy(self):
        """Create a space backed by this snapshot; mappings install lazily."""
        if not self.alive:
            raise DeadObject(f"snapshot {self.snapshot_id} is deleted")
        cdef PageStore store = self.store
        self.refcount += 1
        return AddressSpace(store, store._next_id(), self, {}, self.registers)

    def delete(self):
        """Free the diff; only legal once nothing depends on this snapshot."""
        if not self.alive:
            raise DeadObject(f"snapshot {self.snapshot_id} already deleted")
        if self.refcount != 0:
            raise DeletionBlocked(
                f"snapshot {self.snapshot_id} has {self.refcount} dependents")
        cdef PageStore store = self.store
        cdef long long fid
        for fid in self._diff.values():
            store._unref(fid)
        store._total_mappings -= len(self._diff)
        self._diff = {}
        self.alive = False
        parent = self.parent
        if isinstance(parent, Snapshot):
            (<Snapshot>parent).refcount -= 1


cdef class AddressSpace:
    """Single-owner mutable view over a snapshot stack (one UC's memory)."""

    cdef public PageStore store
    cdef public long long space_id
    cdef public object source
    cdef dict _entries
    cdef public bytes registers
    cdef public long long private_page_count
    cdef public bint alive

    def __init__(self, PageStore store, space_id, source, dict entries,
                 bytes registers):
        self.store = store
        self.space_id = space_id
        self.source = source
        self._entries = entries
        self.registers = registers
        self.private_page_count = 0
        self.alive = True

    cdef int _check_alive(self) except -1:
        if not self.alive:
            raise DeadObject(f"address space {self.space_id} is destroyed")
        return 0

    def entry_map(self):
        return {a: (e[0], e[1]) for a, e in self._entries.items()}

    def mapped_addresses(self):
        return iter(self._entries)

    cdef object _resolve_stack(self, addr):
        node = self.source
        cdef Snapshot snap
        while isinstance(node, Snapshot):
            snap = <Snapshot>node
            fid = snap._diff.get(addr)
            if fid is not None:
                return fid
            node = snap.parent
        return (<BaseImage>node)._pages.get(addr)

    def read(self, addr):
        """Return the visible page; fault-cache ancestor hits read-only."""
        self._check_alive()
        cdef PageStore store = self.store
        store._check_addr(addr)
        cdef list entry = self._entries.get(addr)
        if entry is not None:
            return store._frame_bytes[entry[0]]
        fid = self._resolve_stack(addr)
        if fid is None:
            return store._zero_page_b
        self._entries[addr] = [fid, False]
        store._ref(fid)
        store._total_mappings += 1
        return store._frame_bytes[fid]

    def write(self, addr, bytes data):
        """Whole-page write; first touch of a shared page goes private."""
        self._check_alive()
        cdef PageStore store = self.store
        store._check_addr(addr)
        store._check_page(data)
        cdef list entry = self._entries.get(addr)
        if entry is not None:
            if entry[1]:
                store._frame_bytes[entry[0]] = data
                return
            store._unref(entry[0])
            entry[0] = store._alloc_frame(data)
            entry[1] = True
        else:
            self._entries[addr] = [store._alloc_frame(data), True]
            store._total_mappings += 1
        self.private_page_count += 1

    def capture(self, registers=None):
        """Freeze the dirty set into a snapshot and re-parent onto it."""
        self._check_alive()
        cdef PageStore store = self.store
        cdef bytes regs = self.registers if registers is None else bytes(registers)
        store._check_regs(regs)
        cdef dict diff = {}
        cdef list entry
        cdef long long fid
        for addr, entry in self._entries.items():
            if entry[1]:
                fid = entry[0]
                diff[addr] = fid
                store._ref(fid)
                entry[1] = False
        store._total_mappings += len(diff)
        snap = Snapshot(store, store._next_id(), self.source, diff, regs)
        if isinstance(self.source, Snapshot):
            (<Snapshot>self.source).refcount += 1  # child link
            (<Snapshot>self.source).refcount -= 1  # space moves off old source
        self.source = snap
        (<Snapshot>snap).refcount = 1
        self.private_page_count = 0
        return snap

    def destroy(self):
        """Drop every mapping; private frames are reclaimed immediately."""
        self._check_alive()
        cdef PageStore store = self.store
        cdef list entry
        for entry in self._entries.values():
            store._unref(entry[0])
        store._total_mappings -= len(self._entries)
        self._entries = {}
        self.alive = False
        self.private_page_count = 0
        if isinstance(self.source, Snapshot):
            (<Snapshot>self.source).refcount -= 1
