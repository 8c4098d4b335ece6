"""Trace parsing, block-boundary splitting, and synthetic workload
generation with controllable spatial locality."""

from __future__ import annotations

import bisect
import gzip
import random
from dataclasses import dataclass

from .recency import mix64

DEFAULT_REQUEST_BYTES = 64
DEFAULT_BLOCK_BYTES = 128

WORKLOAD_KINDS = ("sequential", "strided", "zipfian", "sparse-wide",
                  "streaming-store")


class TraceError(ValueError):
    """Malformed trace input."""


@dataclass(frozen=True)
class TraceRecord:
    kind: str          # "R" or "W"
    host_addr: int
    size_bytes: int

    def line(self) -> str:
        return f"{self.kind} {self.host_addr:#x} {self.size_bytes}"


def split_record(kind: str, addr: int, size: int,
                 block_bytes: int = DEFAULT_BLOCK_BYTES):
    """Split one request at block boundaries, preserving order and bytes."""
    out = []
    while size > 0:
        room = block_bytes - (addr % block_bytes)
        take = min(size, room)
        out.append(TraceRecord(kind, addr, take))
        addr += take
        size -= take
    return out


def parse_trace(stream, block_bytes: int = DEFAULT_BLOCK_BYTES):
    """Parse `R|W <hex-addr> [<size>]` lines into split records."""
    records = []
    for lineno, raw in enumerate(stream, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0].upper()
        if kind not in ("R", "W") or len(parts) > 3:
            raise TraceError(f"line {lineno}: expected 'R|W <addr> [<size>]', got {raw!r}")
        try:
            addr = int(parts[1], 16)
        except ValueError:
            raise TraceError(f"line {lineno}: bad address {parts[1]!r}") from None
        size = DEFAULT_REQUEST_BYTES
        if len(parts) == 3:
            try:
                size = int(parts[2])
            except ValueError:
                raise TraceError(f"line {lineno}: bad size {parts[2]!r}") from None
        if size <= 0:
            raise TraceError(f"line {lineno}: size must be positive")
        if addr < 0:
            raise TraceError(f"line {lineno}: negative address")
        records.extend(split_record(kind, addr, size, block_bytes))
    return records


def open_trace(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rt")
    return open(path)


def load_trace(path, block_bytes: int = DEFAULT_BLOCK_BYTES):
    with open_trace(path) as fh:
        return parse_trace(fh, block_bytes)


def write_trace(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.line() + "\n")


# Synthetic workloads -------------------------------------------------------


@dataclass
class WorkloadSpec:
    kind: str
    footprint_bytes: int
    request_count: int
    write_fraction: float = 0.3
    request_bytes: int = DEFAULT_REQUEST_BYTES
    page_bytes: int = 4096
    stride_bytes: int = 4096
    zipf_s: float = 1.0
    seed: int = 0

    def validate(self):
        if self.kind not in WORKLOAD_KINDS:
            raise TraceError(f"unknown workload kind {self.kind!r}")
        if self.footprint_bytes < self.page_bytes:
            raise TraceError("footprint smaller than one page")
        if self.request_count <= 0:
            raise TraceError("request count must be positive")
        if self.request_bytes <= 0 or self.page_bytes % self.request_bytes:
            raise TraceError("page size must be a multiple of the request size")
        if not 0.0 <= self.write_fraction <= 1.0:
            raise TraceError("write fraction must be in [0, 1]")
        return self


def _kind_for(rng, write_fraction):
    return "W" if rng.random() < write_fraction else "R"


def generate(spec: WorkloadSpec):
    """Produce a deterministic request list for the given workload shape."""
    spec.validate()
    rng = random.Random(spec.seed)
    pages = spec.footprint_bytes // spec.page_bytes
    lines_per_page = spec.page_bytes // spec.request_bytes
    total_lines = pages * lines_per_page
    records = []

    if spec.kind in ("sequential", "streaming-store"):
        wf = spec.write_fraction if spec.kind == "sequential" else max(spec.write_fraction, 0.9)
        for i in range(spec.request_count):
            addr = (i % total_lines) * spec.request_bytes
            records.append(TraceRecord(_kind_for(rng, wf), addr, spec.request_bytes))

    elif spec.kind == "strided":
        stride = max(spec.request_bytes, spec.stride_bytes)
        stride -= stride % spec.request_bytes
        pos = 0
        for i in range(spec.request_count):
            addr = pos % spec.footprint_bytes
            addr -= addr % spec.request_bytes
            records.append(TraceRecord(_kind_for(rng, spec.write_fraction),
                                       addr, spec.request_bytes))
            pos += stride

    elif spec.kind == "zipfian":
        # Rank pages by a power law, then scatter the ranks across the
        # footprint so hot pages are not clustered at low addresses. The
        # touched line inside a page is uniform; s == 0 degenerates to a
        # uniform page distribution.
        weights = [1.0 / (r ** spec.zipf_s) for r in range(1, pages + 1)]
        cumulative = []
        acc = 0.0
        for w in weights:
            acc += w
            cumulative.append(acc)
        total = cumulative[-1]
        page_of_rank = list(range(pages))
        rng.shuffle(page_of_rank)
        for i in range(spec.request_count):
            rank = bisect.bisect_left(cumulative, rng.random() * total)
            page = page_of_rank[min(rank, pages - 1)]
            line = rng.randrange(lines_per_page)
            addr = page * spec.page_bytes + line * spec.request_bytes
            records.append(TraceRecord(_kind_for(rng, spec.write_fraction),
                                       addr, spec.request_bytes))

    elif spec.kind == "sparse-wide":
        # One fixed line per page; pages visited in a fresh random order
        # each full pass, so N requests over N pages touch N distinct pages.
        order = list(range(pages))
        line_of_page = [mix64(spec.seed * 0x10001 + p) % lines_per_page
                        for p in range(pages)]
        emitted = 0
        while emitted < spec.request_count:
            rng.shuffle(order)
            for page in order:
                if emitted >= spec.request_count:
                    break
                addr = page * spec.page_bytes + line_of_page[page] * spec.request_bytes
                records.append(TraceRecord(_kind_for(rng, spec.write_fraction),
                                           addr, spec.request_bytes))
                emitted += 1

    return records
