"""Top-level simulator: request dispatch over the page table, block cache,
migration engine, policy layer and meters."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .config import CACHING, MIGRATING, Policy, SimConfig
from .metering import REPORT_SCHEMA_VERSION, MeterLedger, gib
from .migration import DmaEngine
from .pagetable import PageTable
from .policies import COPY_BLOCK, TRY_SWAP, make_controller, slow_touch_action
from .recency import make_recency_filter
from .trace import TraceError


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MemoryRequest:
    kind: str              # "R" or "W"
    host_addr: int
    size_bytes: int
    seq: int


@dataclass
class ServiceOutcome:
    seq: int
    device: str            # "fast" or "slow"
    latency_ns: int
    stall_ns: int = 0
    data: bytes | None = None
    migrations: tuple = ()


class SimClock:
    __slots__ = ("now_ns",)

    def __init__(self):
        self.now_ns = 0

    def advance(self, ns: int):
        assert ns >= 0
        self.now_ns += ns


def write_payload(seq: int, size: int) -> bytes:
    """Deterministic bytes carried by write `seq`; tests recompute these."""
    return bytes((seq + i) & 0xFF for i in range(size))


class Simulator:
    def __init__(self, config: SimConfig):
        self.config = config.validate()
        cfg = self.config
        self.clock = SimClock()
        self.ledger = MeterLedger(cfg)
        self.blocks_per_page = cfg.blocks_per_page
        self.mem = {}                  # internal page -> bytearray
        self.touched_blocks = set()    # host block ids
        self.requests = 0
        self.reads = 0
        self.writes = 0
        self.page_relocations = 0
        self.block_relocations = 0
        self.writebacks = 0
        self.recycles = 0

        if cfg.policy is Policy.ALLDRAM:
            self.pagetable = None
            self.engine = None
            self.cache = None
            self.controller = None
            self._touched_pages = set()
            return

        recency = make_recency_filter(cfg.bloom_window, cfg.exact_recency)
        shuffle_seed = cfg.rng_seed if cfg.policy is Policy.STATIC else None
        self.pagetable = PageTable(cfg.fast_pages, cfg.total_pages,
                                   cfg.blocks_per_page, recency,
                                   static_shuffle_seed=shuffle_seed)
        self.engine = DmaEngine(cfg.page_size_bytes, cfg.block_size_bytes,
                                cfg.dma_bandwidth_bytes_per_ns,
                                on_complete=self._swap_completed)
        self.controller = make_controller(cfg)
        if cfg.policy in CACHING:
            from .subcache import BlockCache
            self.cache = BlockCache(cfg.cache_sets, cfg.cache_ways,
                                    cfg.block_size_bytes)
        else:
            self.cache = None
        if cfg.policy in MIGRATING:
            self.pagetable.search_candidate()

    # Content helpers ---------------------------------------------------

    def _page_mem(self, internal_page: int) -> bytearray:
        buf = self.mem.get(internal_page)
        if buf is None:
            buf = bytearray(self.config.page_size_bytes)
            self.mem[internal_page] = buf
        return buf

    def _exchange_chunk(self, chunk_index: int):
        job = self.engine.job
        a = self._page_mem(job.src_internal)
        b = self._page_mem(job.dst_internal)
        lo = chunk_index * self.config.block_size_bytes
        hi = lo + self.config.block_size_bytes
        a[lo:hi], b[lo:hi] = b[lo:hi], a[lo:hi]

    def _swap_completed(self, job):
        self.pagetable.swap_mappings(job.src_host, job.dst_host)

    # Dispatch ------------------------------------------------------------

    def dispatch(self, request: MemoryRequest) -> ServiceOutcome:
        cfg = self.config
        kind, addr, size, seq = (request.kind, request.host_addr,
                                 request.size_bytes, request.seq)
        if size <= 0 or size > cfg.block_size_bytes:
            raise TraceError(f"request {seq}: bad size {size}")
        if addr // cfg.block_size_bytes != (addr + size - 1) // cfg.block_size_bytes:
            raise TraceError(f"request {seq}: crosses a block boundary")
        if addr < 0 or addr + size > cfg.host_space_bytes:
            raise TraceError(
                f"request {seq}: address {addr:#x} beyond configured capacity "
                f"({cfg.host_space_bytes:#x})")

        self.requests += 1
        if kind == "R":
            self.reads += 1
        else:
            self.writes += 1

        host_page = addr // cfg.page_size_bytes
        offset_in_page = addr % cfg.page_size_bytes
        block_index = offset_in_page // cfg.block_size_bytes
        block_id = addr // cfg.block_size_bytes
        offset_in_block = addr % cfg.block_size_bytes
        self.touched_blocks.add(block_id)

        if cfg.policy is Policy.ALLDRAM:
            return self._dispatch_alldram(kind, host_page, offset_in_page,
                                          size, seq)

        self.engine.advance_to(self.clock.now_ns, self._exchange_chunk)
        self.pagetable.record_access(host_page, block_index)

        # The cache copy, when present, is always the authoritative one.
        if self.cache is not None:
            way = self.cache.lookup(block_id)
            if way is not None:
                outcome = self._serve_cached(kind, host_page, block_id, way,
                                             offset_in_page, offset_in_block,
                                             size, seq)
                if outcome is not None:
                    return outcome
                # Block was recycled into the fast page; fall through.

        job = self.engine.job
        if job is not None and job.involves(host_page):
            return self._serve_conflicting(kind, host_page, offset_in_page,
                                           size, seq)

        internal = self.pagetable.lookup(host_page)
        if self.pagetable.in_fast(internal):
            return self._serve_page(kind, "fast", internal, offset_in_page,
                                    size, seq)

        outcome = self._serve_page(kind, "slow", internal, offset_in_page,
                                   size, seq)
        migrations = self._slow_policy_actions(host_page, internal, block_id,
                                               offset_in_page, size)
        outcome.migrations = tuple(migrations)
        return outcome

    # Serving paths -------------------------------------------------------

    def _dispatch_alldram(self, kind, host_page, offset_in_page, size, seq):
        cfg = self.config
        if host_page not in self._touched_pages:
            self._touched_pages.add(host_page)
            footprint = len(self._touched_pages) * cfg.page_size_bytes
            if footprint > cfg.fast_capacity_bytes:
                raise SimulationError(
                    "all-DRAM run needs fast capacity >= trace footprint "
                    f"({footprint} > {cfg.fast_capacity_bytes} bytes)")
        buf = self._page_mem(host_page)
        data = None
        if kind == "R":
            latency = self.ledger.charge("fast", "read", True, size)
            data = bytes(buf[offset_in_page:offset_in_page + size])
        else:
            latency = self.ledger.charge("fast", "write", True, size)
            buf[offset_in_page:offset_in_page + size] = write_payload(seq, size)
        self.clock.advance(latency)
        return ServiceOutcome(seq, "fast", latency, data=data)

    def _serve_page(self, kind, tier, internal, offset_in_page, size, seq):
        buf = self._page_mem(internal)
        data = None
        if kind == "R":
            latency = self.ledger.charge(tier, "read", True, size)
            data = bytes(buf[offset_in_page:offset_in_page + size])
        else:
            latency = self.ledger.charge(tier, "write", True, size)
            buf[offset_in_page:offset_in_page + size] = write_payload(seq, size)
        self.clock.advance(latency)
        return ServiceOutcome(seq, tier, latency, data=data)

    def _serve_cached(self, kind, host_page, block_id, way, offset_in_page,
                      offset_in_block, size, seq):
        """Serve a cache hit, or recycle the block first if its page has
        been promoted (returns None after recycling so the caller re-routes)."""
        internal = self.pagetable.lookup(host_page)
        job = self.engine.job
        in_flight = job is not None and job.involves(host_page)
        if self.pagetable.in_fast(internal) and not in_flight:
            dirty, data = self.cache.invalidate(block_id, way)
            self.pagetable.drop_cached_block(host_page)
            self.recycles += 1
            if dirty:
                block_lo = (offset_in_page // self.config.block_size_bytes
                            ) * self.config.block_size_bytes
                self._page_mem(internal)[block_lo:block_lo + len(data)] = data
                self.ledger.charge("fast", "write", False, len(data))
                self.ledger.charge_migrated(len(data))
            return None

        data = None
        if kind == "R":
            latency = self.ledger.charge("fast", "read", True, size)
            data = self.cache.read(block_id, way, offset_in_block, size)
        else:
            latency = self.ledger.charge("fast", "write", True, size)
            self.cache.write(block_id, way, offset_in_block,
                             write_payload(seq, size))
        self.clock.advance(latency)
        return ServiceOutcome(seq, "fast", latency, data=data)

    def _serve_conflicting(self, kind, host_page, offset_in_page, size, seq):
        """Request to a page whose swap is in flight: route by progress."""
        engine = self.engine
        stall = 0
        if kind == "W":
            stall = engine.write_stall_ns(offset_in_page, self.clock.now_ns)
            if stall:
                self.ledger.charge_stall(stall)
                self.clock.advance(stall)
                engine.advance_to(self.clock.now_ns, self._exchange_chunk)

        if engine.job is not None:
            loc = engine.location_for(host_page, engine.route(offset_in_page))
        else:
            loc = self.pagetable.lookup(host_page)  # swap finished during stall
        tier = "fast" if self.pagetable.in_fast(loc) else "slow"
        buf = self._page_mem(loc)
        data = None
        if kind == "R":
            latency = self.ledger.charge(tier, "read", True, size)
            data = bytes(buf[offset_in_page:offset_in_page + size])
        else:
            latency = self.ledger.charge(tier, "write", True, size)
            buf[offset_in_page:offset_in_page + size] = write_payload(seq, size)
        self.clock.advance(latency)
        return ServiceOutcome(seq, tier, latency, stall_ns=stall, data=data)

    # Policy side effects ---------------------------------------------------

    def _live_threshold(self) -> int:
        if self.controller is not None:
            return self.controller.threshold
        return self.config.promotion_threshold

    def _slow_policy_actions(self, host_page, internal, block_id,
                             offset_in_page, size):
        action = slow_touch_action(self.config.policy,
                                   self.pagetable.cached_blocks[host_page],
                                   self._live_threshold())
        migrations = []
        if action == TRY_SWAP:
            if not self.engine.busy and self.pagetable.candidate is not None:
                self._start_swap(host_page, internal)
                migrations.append(("page_swap", host_page))
        elif action == COPY_BLOCK:
            self._copy_block_in(host_page, internal, block_id, offset_in_page,
                                migrations)
        return migrations

    def _start_swap(self, host_page, internal):
        dst_host, dst_internal = self.pagetable.take_candidate()
        if self.controller is not None:
            self.controller.on_promotion(
                self.pagetable.bitmap_popcount(host_page))
        self.pagetable.reset_bitmap(host_page)
        job = self.engine.start_swap(host_page, internal, dst_host,
                                     dst_internal, self.clock.now_ns)
        page = self.config.page_size_bytes
        # Both pages move: each tier sees a full page of reads and writes.
        self.ledger.charge("slow", "read", False, page)
        self.ledger.charge("fast", "write", False, page)
        self.ledger.charge("fast", "read", False, page)
        self.ledger.charge("slow", "write", False, page)
        self.ledger.charge_migrated(2 * page)
        self.page_relocations += 1
        self.pagetable.search_candidate(excluded_internal=job.internal_pages())

    def _copy_block_in(self, host_page, internal, block_id, offset_in_page,
                       migrations):
        block = self.config.block_size_bytes
        lo = (offset_in_page // block) * block
        data = bytes(self._page_mem(internal)[lo:lo + block])
        victim = self.cache.insert(block_id, data)
        self.pagetable.add_cached_block(host_page)
        self.ledger.charge("slow", "read", False, block)
        self.ledger.charge("fast", "write", False, block)
        self.ledger.charge_migrated(block)
        self.block_relocations += 1
        migrations.append(("block_copy", block_id))
        if victim is not None:
            self._evict_victim(victim, migrations)

    def _evict_victim(self, victim, migrations):
        vtag, vdirty, vdata = victim
        v_host = vtag // self.blocks_per_page
        self.pagetable.drop_cached_block(v_host)
        if not vdirty:
            return
        block = self.config.block_size_bytes
        v_offset = (vtag % self.blocks_per_page) * block
        job = self.engine.job
        if job is not None and job.involves(v_host):
            loc = self.engine.location_for(v_host, self.engine.route(v_offset))
        else:
            loc = self.pagetable.lookup(v_host)
        self._page_mem(loc)[v_offset:v_offset + block] = vdata
        if self.pagetable.in_fast(loc):
            self.ledger.charge("fast", "write", False, block)
            self.recycles += 1
            migrations.append(("recycle_merge", vtag))
        else:
            self.ledger.charge("slow", "write", False, block)
            self.writebacks += 1
            migrations.append(("writeback", vtag))
        self.ledger.charge_migrated(block)

    # Run loop --------------------------------------------------------------

    def run(self, records) -> dict:
        for seq, rec in enumerate(records):
            self.dispatch(MemoryRequest(rec.kind, rec.host_addr,
                                        rec.size_bytes, seq))
        return self.finish()

    def finish(self) -> dict:
        if self.engine is not None and self.engine.busy:
            # Drain the in-flight swap; DMA time is off the foreground clock.
            self.engine.advance_to(self.engine.completion_ns(),
                                   self._exchange_chunk)
        return self._report()

    def _report(self) -> dict:
        cfg = self.config
        report = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "policy": cfg.policy.value,
            "rng_seed": cfg.rng_seed,
            "fast_capacity_bytes": cfg.fast_capacity_bytes,
            "slow_capacity_bytes": cfg.slow_capacity_bytes,
            "cache_zone_bytes": cfg.cache_zone_bytes,
            "page_size_bytes": cfg.page_size_bytes,
            "block_size_bytes": cfg.block_size_bytes,
            "bloom_window": cfg.bloom_window,
            "exact_recency": cfg.exact_recency,
            "threshold_initial": cfg.promotion_threshold,
            "threshold_final": self._live_threshold(),
            "requests": self.requests,
            "reads": self.reads,
            "writes": self.writes,
            "footprint_pages": (len(self._touched_pages)
                                if cfg.policy is Policy.ALLDRAM
                                else len({b // self.blocks_per_page
                                          for b in self.touched_blocks})),
            "page_relocations": self.page_relocations,
            "block_relocations": self.block_relocations,
            "writebacks": self.writebacks,
            "recycles": self.recycles,
        }
        report.update(self.ledger.finalize(self.ledger.total_foreground_ns,
                                           gib(cfg.fast_capacity_bytes)))
        return report

    # Test interfaces ---------------------------------------------------------

    def peek(self, host_addr: int, size: int) -> bytes:
        """Resolve the freshest bytes for a host address without metering."""
        cfg = self.config
        host_page = host_addr // cfg.page_size_bytes
        offset_in_page = host_addr % cfg.page_size_bytes
        if cfg.policy is Policy.ALLDRAM:
            buf = self._page_mem(host_page)
            return bytes(buf[offset_in_page:offset_in_page + size])
        block_id = host_addr // cfg.block_size_bytes
        if self.cache is not None:
            way = self.cache.peek(block_id)
            if way is not None:
                return self.cache.read(block_id, way,
                                       host_addr % cfg.block_size_bytes, size)
        job = self.engine.job
        if job is not None and job.involves(host_page):
            loc = self.engine.location_for(host_page,
                                           self.engine.route(offset_in_page))
        else:
            loc = self.pagetable.lookup(host_page)
        buf = self._page_mem(loc)
        return bytes(buf[offset_in_page:offset_in_page + size])

    def content_digest(self) -> str:
        block = self.config.block_size_bytes
        h = hashlib.sha256()
        for block_id in sorted(self.touched_blocks):
            h.update(block_id.to_bytes(8, "little"))
            h.update(self.peek(block_id * block, block))
        return h.hexdigest()


def run_trace(records, config: SimConfig) -> dict:
    """Convenience wrapper: one simulator, one trace, one report."""
    return Simulator(config).run(records)
