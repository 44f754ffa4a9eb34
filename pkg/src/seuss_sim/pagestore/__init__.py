"""Page store with twin cores: compiled kernel if built, pure Python otherwise.

Both cores implement the identical API and are observably equivalent (the
test suite replays random op programs against both and compares traces).
Set ``SEUSS_SIM_PURE=1`` to force the pure core even when the compiled one
is importable.
"""

from __future__ import annotations

import os

if os.environ.get("SEUSS_SIM_PURE", "0") not in ("", "0"):
    from . import _pure as _impl
else:
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _pure as _impl  # type: ignore[no-redef]

BACKEND = _impl.BACKEND_NAME

PageStore = _impl.PageStore
BaseImage = _impl.BaseImage
Snapshot = _impl.Snapshot
AddressSpace = _impl.AddressSpace
StoreStats = _impl.StoreStats

PageStoreError = _impl.PageStoreError
MisalignedAddress = _impl.MisalignedAddress
BadPageData = _impl.BadPageData
DeadObject = _impl.DeadObject
DeletionBlocked = _impl.DeletionBlocked

DEFAULT_PAGE_SIZE = _impl.DEFAULT_PAGE_SIZE
DEFAULT_REGISTER_SIZE = _impl.DEFAULT_REGISTER_SIZE

__all__ = [
    "BACKEND",
    "PageStore",
    "BaseImage",
    "Snapshot",
    "AddressSpace",
    "StoreStats",
    "PageStoreError",
    "MisalignedAddress",
    "BadPageData",
    "DeadObject",
    "DeletionBlocked",
    "DEFAULT_PAGE_SIZE",
    "DEFAULT_REGISTER_SIZE",
]
