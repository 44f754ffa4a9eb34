from __future__ import annotations

import pytest

from seuss_sim.pagestore import _pure

BACKENDS = {"pure": _pure}
try:
    from seuss_sim.pagestore import _kernel

    BACKENDS["compiled"] = _kernel
except ImportError:
    pass


@pytest.fixture(params=sorted(BACKENDS))
def core(request):
    """Page-store implementation module (pure, plus compiled when built)."""
    return BACKENDS[request.param]


def make_store(core, page_size=16, register_size=8):
    return core.PageStore(page_size=page_size, register_size=register_size)
