"""Simulator configuration: geometry, device timing/energy, policy knobs."""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields


class Policy(enum.Enum):
    STATIC = "static"
    PAGEMOVE = "pagemove"
    STATCOMB = "statcomb"
    ADPCOMB = "adpcomb"
    ALLDRAM = "alldram"


# Policies that move data between tiers (and therefore run the victim search).
MIGRATING = (Policy.PAGEMOVE, Policy.STATCOMB, Policy.ADPCOMB)
# Policies that manage a sub-page block cache in fast memory.
CACHING = (Policy.STATCOMB, Policy.ADPCOMB)

# Decimal-looking suffixes are treated as binary too; device sheets mix
# them freely and the worked numbers only come out exact in binary units.
_SUFFIXES = {
    "kib": 1024, "kb": 1024, "k": 1024,
    "mib": 1024 ** 2, "mb": 1024 ** 2, "m": 1024 ** 2,
    "gib": 1024 ** 3, "gb": 1024 ** 3, "g": 1024 ** 3,
    "b": 1,
}


def parse_size(text) -> int:
    """Parse a byte size like '128MiB', '4KiB', '512' into an int."""
    if isinstance(text, int):
        return text
    s = str(text).strip().lower().replace("_", "")
    for suffix in sorted(_SUFFIXES, key=len, reverse=True):
        if s.endswith(suffix):
            num = s[: -len(suffix)].strip()
            try:
                return int(float(num) * _SUFFIXES[suffix])
            except ValueError:
                break   # a bare number that merely ends in a suffix letter
    return int(s, 0)


def format_size(n: int) -> str:
    for suffix, mult in (("GiB", 1024 ** 3), ("MiB", 1024 ** 2), ("KiB", 1024)):
        if n % mult == 0 and n >= mult:
            return f"{n // mult}{suffix}"
    return str(n)


class ConfigError(ValueError):
    """Raised when a configuration violates a structural constraint."""


@dataclass
class SimConfig:
    # Capacities.  The cache zone is carved out of fast memory, so the
    # host-visible space is (fast - cache_zone) + slow.
    fast_capacity_bytes: int = 128 * 1024 ** 2
    slow_capacity_bytes: int = 1024 ** 3
    page_size_bytes: int = 4096
    block_size_bytes: int = 128
    cache_zone_bytes: int = 0
    cache_ways: int = 4

    # Device timing (ns per access) and energy (nJ per block-sized access).
    fast_read_ns: int = 50
    fast_write_ns: int = 50
    slow_read_ns: int = 100
    slow_write_ns: int = 300
    fast_read_nj: float = 4.2
    fast_write_nj: float = 3.5
    slow_read_nj: float = 1.28
    slow_write_nj: float = 8.7
    fast_background_mw_per_gb: float = 30.0

    # Migration engine.
    dma_bandwidth_bytes_per_ns: float = 8.0

    # Placement policy.
    policy: Policy = Policy.PAGEMOVE
    promotion_threshold: int = 4
    bloom_window: int = 2048
    rng_seed: int = 0

    # Adaptive-threshold controller (only read under the adaptive policy;
    # adaptive_window_pages == 0 disables adaptation entirely).
    adaptive_min_threshold: int = 1
    adaptive_max_threshold: int = 8
    adaptive_window_pages: int = 64
    adaptive_alpha: float = 0.25
    adaptive_hi_water: float = 0.75
    adaptive_lo_water: float = 0.25

    # Test hook: replace the bloom filter with an exact sliding-window queue
    # so runs are bit-comparable against the reference oracle.
    exact_recency: bool = False

    # Derived geometry ------------------------------------------------

    @property
    def blocks_per_page(self) -> int:
        return self.page_size_bytes // self.block_size_bytes

    @property
    def fast_pages(self) -> int:
        """Page-managed pages in the fast tier (cache zone excluded)."""
        if self.policy is Policy.ALLDRAM:
            return self.total_pages
        return (self.fast_capacity_bytes - self.cache_zone_bytes) // self.page_size_bytes

    @property
    def slow_pages(self) -> int:
        if self.policy is Policy.ALLDRAM:
            return 0
        return self.slow_capacity_bytes // self.page_size_bytes

    @property
    def total_pages(self) -> int:
        """Host-visible pages."""
        if self.policy is Policy.ALLDRAM:
            return (self.fast_capacity_bytes + self.slow_capacity_bytes) // self.page_size_bytes
        return self.fast_pages + self.slow_pages

    @property
    def host_space_bytes(self) -> int:
        return self.total_pages * self.page_size_bytes

    @property
    def cache_sets(self) -> int:
        if self.cache_zone_bytes == 0:
            return 0
        return self.cache_zone_bytes // (self.block_size_bytes * self.cache_ways)

    def validate(self) -> "SimConfig":
        p = self.page_size_bytes
        if p <= 0 or (p & (p - 1)) != 0:
            raise ConfigError(f"page size {p} is not a power of two")
        if self.block_size_bytes <= 0 or p % self.block_size_bytes != 0:
            raise ConfigError("page size must be a multiple of the block size")
        if self.fast_capacity_bytes % p or self.slow_capacity_bytes % p:
            raise ConfigError("tier capacities must be whole pages")
        if self.cache_zone_bytes >= self.fast_capacity_bytes:
            raise ConfigError("cache zone must leave room for page-managed fast memory")
        if self.policy in CACHING:
            if self.cache_zone_bytes <= 0:
                raise ConfigError(f"{self.policy.value} requires a non-empty cache zone")
            line = self.block_size_bytes * self.cache_ways
            if self.cache_zone_bytes % line:
                raise ConfigError("cache zone must be a multiple of block_size * ways")
            sets = self.cache_sets
            if sets & (sets - 1):
                raise ConfigError(f"cache set count {sets} is not a power of two")
        elif self.cache_zone_bytes != 0:
            raise ConfigError(f"policy {self.policy.value} does not use a cache zone")
        if not 1 <= self.promotion_threshold <= self.blocks_per_page:
            raise ConfigError(
                f"promotion threshold must be in [1, {self.blocks_per_page}]")
        if self.policy in MIGRATING:
            if self.fast_pages < 1:
                raise ConfigError("no page-managed fast pages available")
            if self.bloom_window >= self.fast_pages:
                raise ConfigError(
                    "bloom window must be smaller than the fast page count "
                    "or the victim search cannot terminate")
        if self.bloom_window < 1:
            raise ConfigError("bloom window must be positive")
        if self.dma_bandwidth_bytes_per_ns <= 0:
            raise ConfigError("DMA bandwidth must be positive")
        if min(self.fast_read_ns, self.fast_write_ns,
               self.slow_read_ns, self.slow_write_ns) < 0:
            raise ConfigError("latencies must be non-negative")
        if not 1 <= self.adaptive_min_threshold <= self.adaptive_max_threshold <= self.blocks_per_page:
            raise ConfigError("adaptive threshold bounds out of range")
        return self


_SIZE_FIELDS = {
    "fast_capacity_bytes", "slow_capacity_bytes", "page_size_bytes",
    "block_size_bytes", "cache_zone_bytes",
}


def config_from_mapping(mapping: dict) -> SimConfig:
    """Build a SimConfig from string-valued keys (config file / CLI)."""
    kwargs = {}
    known = {f.name: f for f in fields(SimConfig)}
    for key, value in mapping.items():
        name = key.strip().replace("-", "_")
        if name not in known:
            raise ConfigError(f"unknown config key: {key}")
        if name in _SIZE_FIELDS:
            kwargs[name] = parse_size(value)
        elif name == "policy":
            kwargs[name] = value if isinstance(value, Policy) else Policy(str(value).lower())
        elif name == "exact_recency":
            kwargs[name] = value in (True, "1", "true", "yes", "on")
        else:
            conv = known[name].type
            if isinstance(value, str) and conv in ("float", float):
                kwargs[name] = float(value)
            elif isinstance(value, str):
                kwargs[name] = int(float(value)) if "." in value else int(value, 0)
            else:
                kwargs[name] = value
    return SimConfig(**kwargs)


def load_config_file(path) -> dict:
    """Read `key = value` lines; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
