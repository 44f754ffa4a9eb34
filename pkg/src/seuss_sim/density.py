"""Instance-density arithmetic for the four deployment models.

Counts how many initialized runtime environments fit in a memory budget.
The snapshot model is page-exact: one shared runtime stack plus a private
page diff per instance (the same arithmetic the page store produces, checked
against it in the tests).  Process, container, and microVM footprints are
back-derived from their measured densities on the 88 GiB reference node.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import GIB, MIB, ContainerModel

REFERENCE_MEMORY_BYTES = 88 * GIB


@dataclass(frozen=True)
class DensityReport:
    memory_bytes: int
    seuss: int
    process: int
    container: int
    microvm: int

    def rows(self) -> list[tuple[str, int]]:
        return [("seuss", self.seuss), ("process", self.process),
                ("container", self.container), ("microvm", self.microvm)]


def snapshot_instances(memory_bytes: int, *, base_stack_pages: int,
                       pages_per_instance: int, page_size: int = 4096) -> int:
    """Instances sharing one runtime stack, each adding a private diff."""
    if pages_per_instance <= 0:
        raise ValueError("pages_per_instance must be > 0")
    remaining = memory_bytes - base_stack_pages * page_size
    if remaining < 0:
        return 0
    return remaining // (pages_per_instance * page_size)


def base_pages_for_mib(base_mib: float, page_size: int = 4096) -> int:
    return -(-int(base_mib * MIB) // page_size)  # ceil


def _footprint_count(memory_bytes: int, reference_density: int) -> int:
    footprint = REFERENCE_MEMORY_BYTES // reference_density
    return memory_bytes // footprint


def density_report(memory_bytes: int, container_model: ContainerModel, *,
                   base_mib: float = 114.5, pages_per_instance: int = 391,
                   page_size: int = 4096) -> DensityReport:
    return DensityReport(
        memory_bytes=memory_bytes,
        seuss=snapshot_instances(
            memory_bytes,
            base_stack_pages=base_pages_for_mib(base_mib, page_size),
            pages_per_instance=pages_per_instance, page_size=page_size),
        process=_footprint_count(memory_bytes, container_model.process_density),
        container=_footprint_count(memory_bytes, container_model.density_limit),
        microvm=_footprint_count(memory_bytes, container_model.microvm_density),
    )
