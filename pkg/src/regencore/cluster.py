"""In-process storage cluster using the relayer recovery model.

Each node is a store of strips keyed by global stripe index. A file is cut
into blocks; every group of ``k`` data blocks is encoded stripe by stripe
into ``n`` blocks, one per node, and code positions are rotated by one node
per group so parity is spread evenly. Recovery and degraded reads move bytes
only through the relayer, and every byte crossing a boundary is counted in a
:class:`TrafficLedger`.

On-disk layout (see README)::

    <root>/metadata.json
    <root>/node<i>/stripe<idx>.strip
"""

from __future__ import annotations

import json
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from regencore.analysis import Table
from regencore.codes import CodeSpec, StripeView, UnavailableStripError, encode_stripe
from regencore.recovery import (
    FailurePattern, UnrecoverableError, gather_symbols, plan_recovery, reconstruct,
)

METADATA = "metadata.json"
FORMAT_VERSION = 1
HDFS_BLOCK_SIZE = 64 * 1024 * 1024

LEDGER_FIELDS = ("bytes_read", "bytes_encoded", "bytes_downloaded",
                 "bytes_reconstructed", "bytes_uploaded")


def default_block_size(spec: CodeSpec, target: int = HDFS_BLOCK_SIZE) -> int:
    """Largest multiple of the strip size not above ``target`` (at least one strip)."""
    return max(1, target // spec.strip_size) * spec.strip_size


@dataclass
class TrafficLedger:
    """Per-node byte counters for the five relayer-model steps.

    ``bytes_read`` and ``bytes_encoded`` are charged to the survivor doing the
    work, ``bytes_downloaded`` to the survivor the relayer pulls from, and
    ``bytes_reconstructed``/``bytes_uploaded`` to the node being rebuilt.
    """

    n: int
    bytes_read: list[int] = field(default_factory=list)
    bytes_encoded: list[int] = field(default_factory=list)
    bytes_downloaded: list[int] = field(default_factory=list)
    bytes_reconstructed: list[int] = field(default_factory=list)
    bytes_uploaded: list[int] = field(default_factory=list)
    stripes: int = 0
    plan_bandwidth: int = 0

    def __post_init__(self):
        for name in LEDGER_FIELDS:
            if not getattr(self, name):
                setattr(self, name, [0] * self.n)

    def total(self, name: str) -> int:
        return sum(getattr(self, name))

    def merge(self, other: TrafficLedger) -> None:
        for name in LEDGER_FIELDS:
            mine = getattr(self, name)
            for i, v in enumerate(getattr(other, name)):
                mine[i] += v
        self.stripes += other.stripes
        self.plan_bandwidth += other.plan_bandwidth

    @property
    def empty(self) -> bool:
        return self.stripes == 0 and not any(self.total(f) for f in LEDGER_FIELDS)

    def to_table(self) -> Table:
        table = Table(["node", *LEDGER_FIELDS])
        for i in range(self.n):
            table.rows.append((i, *(getattr(self, f)[i] for f in LEDGER_FIELDS)))
        table.rows.append(("total", *(self.total(f) for f in LEDGER_FIELDS)))
        return table


@dataclass(frozen=True)
class Block:
    id: int
    group: int
    position: int  # code position within the stripe
    node: int
    role: str  # "data" or "parity"
    first_stripe: int
    stripe_count: int
    size: int

    @property
    def stripes(self) -> range:
        return range(self.first_stripe, self.first_stripe + self.stripe_count)


class NodeFailedError(UnavailableStripError):
    pass


class Cluster:
    def __init__(self, spec: CodeSpec, block_size: int | None = None):
        if block_size is None:
            block_size = default_block_size(spec)
        if block_size <= 0 or block_size % spec.strip_size:
            raise ValueError(
                f"block size {block_size} is not a positive multiple of the strip size "
                f"{spec.strip_size} (r={spec.r} x symbol_size={spec.symbol_size})"
            )
        self.spec = spec
        self.block_size = block_size
        self.stripes_per_block = block_size // spec.strip_size
        self.nodes: list[dict[int, bytes]] = [{} for _ in range(spec.n)]
        self.failed: set[int] = set()
        self.rotation: list[int] = []
        self.files: list[dict] = []

    # placement

    @property
    def groups(self) -> int:
        return len(self.rotation)

    @property
    def stripe_count(self) -> int:
        return self.groups * self.stripes_per_block

    def node_of(self, group: int, position: int) -> int:
        return (position + self.rotation[group]) % self.spec.n

    def position_of(self, group: int, node: int) -> int:
        return (node - self.rotation[group]) % self.spec.n

    def block(self, block_id: int) -> Block:
        group, position = divmod(block_id, self.spec.n)
        if not 0 <= group < self.groups:
            raise KeyError(f"no block {block_id}")
        role = "data" if position < self.spec.k else "parity"
        return Block(block_id, group, position, self.node_of(group, position), role,
                     group * self.stripes_per_block, self.stripes_per_block, self.block_size)

    def blocks(self) -> list[Block]:
        return [self.block(b) for b in range(self.groups * self.spec.n)]

    # node I/O

    def _read(self, node: int, stripe: int) -> bytes:
        if node in self.failed:
            raise NodeFailedError(f"node {node} is failed; stripe {stripe} is unreadable")
        return self.nodes[node][stripe]

    def _strip_array(self, raw: bytes) -> np.ndarray:
        return np.frombuffer(raw, dtype=np.uint8).reshape(self.spec.r, self.spec.symbol_size)

    # striping

    def stripe_file(self, data: bytes) -> list[int]:
        """Encode ``data`` into new block groups; returns the created block ids."""
        if self.failed:
            raise RuntimeError(f"nodes {sorted(self.failed)} are failed; recover before striping")
        spec = self.spec
        group_bytes = spec.k * self.block_size
        groups = max(1, -(-len(data) // group_bytes))
        padding = groups * group_bytes - len(data)
        padded = np.frombuffer(bytes(data) + bytes(padding), dtype=np.uint8)
        first_group = self.groups
        created = []
        for g in range(groups):
            group = first_group + g
            self.rotation.append(group % spec.n)
            base = g * group_bytes
            blocks = padded[base:base + group_bytes].reshape(spec.k, self.stripes_per_block,
                                                             spec.strip_size)
            for j in range(self.stripes_per_block):
                stripe_idx = group * self.stripes_per_block + j
                region = blocks[:, j, :].reshape(spec.k * spec.r, spec.symbol_size)
                view = encode_stripe(spec, region)
                for pos in range(spec.n):
                    self.nodes[self.node_of(group, pos)][stripe_idx] = view.stored[pos].tobytes()
            created.extend(group * spec.n + pos for pos in range(spec.n))
        self.files.append({"id": len(self.files), "size": len(data), "padding": padding,
                           "first_group": first_group, "groups": groups})
        return created

    def data_blocks(self, file_id: int = 0) -> list[int]:
        f = self.files[file_id]
        return [g * self.spec.n + pos
                for g in range(f["first_group"], f["first_group"] + f["groups"])
                for pos in range(self.spec.k)]

    # failures

    def fail_nodes(self, pattern) -> None:
        nodes = set(pattern.failed if isinstance(pattern, FailurePattern) else pattern)
        if any(not 0 <= i < self.spec.n for i in nodes):
            raise ValueError(f"node ids must lie in [0, {self.spec.n})")
        combined = self.failed | nodes
        if len(combined) > self.spec.n - self.spec.k:
            raise UnrecoverableError(
                f"{len(combined)} failed nodes exceed the tolerance n - k = "
                f"{self.spec.n - self.spec.k}"
            )
        for i in nodes - self.failed:
            self.nodes[i].clear()
        self.failed = combined

    # recovery

    def _pattern_for(self, stripe: int) -> FailurePattern:
        group = stripe // self.stripes_per_block
        return FailurePattern(tuple(self.position_of(group, i) for i in self.failed))

    def _collect(self, stripe: int, scheme: str, relayer: int | None, count_local: bool):
        """Input stage: survivors read and encode, the relayer downloads."""
        spec = self.spec
        group = stripe // self.stripes_per_block
        plan = plan_recovery(spec, self._pattern_for(stripe), scheme)
        stored = np.zeros((spec.n, spec.r, spec.symbol_size), dtype=np.uint8)
        available = np.zeros(spec.n, dtype=bool)
        delta = TrafficLedger(spec.n, stripes=1, plan_bandwidth=plan.expected_bandwidth)
        per_node = plan.beta_per_node
        targets = plan.effective_pattern.t
        for pos in plan.contacted:
            node = self.node_of(group, pos)
            stored[pos] = self._strip_array(self._read(node, stripe))
            available[pos] = True
            delta.bytes_read[node] += spec.strip_size
            if plan.scheme == "core":
                delta.bytes_encoded[node] += targets * spec.strip_size
            if count_local or node != relayer:
                delta.bytes_downloaded[node] += per_node
        symbols = gather_symbols(spec, StripeView(spec, stored, available), plan)
        return plan, symbols, delta

    def _install(self, stripe: int, strips: dict[int, np.ndarray], delta: TrafficLedger) -> None:
        """Output stage: upload rebuilt strips to the replacement nodes."""
        group = stripe // self.stripes_per_block
        for pos, strip in strips.items():
            node = self.node_of(group, pos)
            self.nodes[node][stripe] = strip.tobytes()
            delta.bytes_reconstructed[node] += self.spec.strip_size
            delta.bytes_uploaded[node] += self.spec.strip_size

    def run_recovery(self, scheme: str = "core", workers: int = 0, queue_size: int = 8,
                     relayer: int | None = None, count_local: bool = True) -> TrafficLedger:
        """Rebuild every failed node onto a replacement with the same identity.

        ``workers=0`` runs stripe by stripe in the calling thread; otherwise an
        input thread, ``workers`` reconstruction threads and an output stage in
        the calling thread are linked by bounded queues. Both give identical
        contents and ledgers.
        """
        ledger = TrafficLedger(self.spec.n)
        if not self.failed:
            return ledger
        stripes = range(self.stripe_count)
        if workers <= 0:
            for s in stripes:
                plan, symbols, delta = self._collect(s, scheme, relayer, count_local)
                self._install(s, reconstruct(self.spec, plan, symbols), delta)
                ledger.merge(delta)
        else:
            self._run_pipelined(stripes, scheme, workers, queue_size, relayer, count_local, ledger)
        self.failed = set()
        return ledger

    def _run_pipelined(self, stripes, scheme, workers, queue_size, relayer, count_local, ledger):
        inbound: queue.Queue = queue.Queue(maxsize=queue_size)
        outbound: queue.Queue = queue.Queue(maxsize=queue_size)
        stop = object()
        abort = threading.Event()

        def input_stage():
            try:
                for s in stripes:
                    if abort.is_set():
                        break
                    inbound.put((s, *self._collect(s, scheme, relayer, count_local)))
            except BaseException as exc:  # noqa: BLE001 - surfaced by the output stage
                outbound.put(("error", exc))
            finally:
                for _ in range(workers):
                    inbound.put(stop)

        def worker_stage():
            while True:
                item = inbound.get()
                if item is stop:
                    outbound.put(stop)
                    return
                s, plan, symbols, delta = item
                try:
                    outbound.put((s, reconstruct(self.spec, plan, symbols), delta))
                except BaseException as exc:  # noqa: BLE001
                    outbound.put(("error", exc))

        threads = [threading.Thread(target=input_stage, daemon=True)]
        threads += [threading.Thread(target=worker_stage, daemon=True) for _ in range(workers)]
        for th in threads:
            th.start()

        pending: dict[int, tuple] = {}
        next_stripe, finished, error = 0, 0, None
        while finished < workers:
            item = outbound.get()
            if item is stop:
                finished += 1
                continue
            if item[0] == "error":
                error = error or item[1]
                abort.set()
                continue
            s, strips, delta = item
            pending[s] = (strips, delta)
            while next_stripe in pending:
                strips, delta = pending.pop(next_stripe)
                self._install(next_stripe, strips, delta)
                ledger.merge(delta)
                next_stripe += 1
        for th in threads:
            th.join()
        if error is not None:
            raise error

    # reads

    def read_block(self, block_id: int, scheme: str = "core") -> tuple[bytes, TrafficLedger]:
        """Return a block's bytes, reconstructing it if its node is failed."""
        blk = self.block(block_id)
        ledger = TrafficLedger(self.spec.n)
        if blk.node not in self.failed:
            return b"".join(self._read(blk.node, s) for s in blk.stripes), ledger
        if len(self.failed) > self.spec.n - self.spec.k:  # pragma: no cover - fail_nodes guards
            raise UnrecoverableError("too many failed nodes")
        parts = []
        for s in blk.stripes:
            plan, symbols, delta = self._collect(s, scheme, None, True)
            strip = reconstruct(self.spec, plan, symbols)[blk.position]
            delta.bytes_reconstructed[blk.node] += self.spec.strip_size
            delta.bytes_uploaded[blk.node] += self.spec.strip_size
            ledger.merge(delta)
            parts.append(strip.tobytes())
        return b"".join(parts), ledger

    def degraded_read(self, block_id: int, scheme: str = "core") -> tuple[bytes, TrafficLedger]:
        return self.read_block(block_id, scheme)

    def read_file(self, file_id: int = 0, scheme: str = "core") -> tuple[bytes, TrafficLedger]:
        f = self.files[file_id]
        ledger = TrafficLedger(self.spec.n)
        parts = []
        for b in self.data_blocks(file_id):
            data, delta = self.read_block(b, scheme)
            ledger.merge(delta)
            parts.append(data)
        return b"".join(parts)[: f["size"]], ledger

    # persistence

    def metadata(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "code": self.spec.to_dict(),
            "block_size": self.block_size,
            "stripes_per_block": self.stripes_per_block,
            "rotation": self.rotation,
            "files": self.files,
            "blocks": [
                {"id": b.id, "group": b.group, "position": b.position, "node": b.node,
                 "role": b.role, "first_stripe": b.first_stripe, "stripe_count": b.stripe_count}
                for b in self.blocks()
            ],
            "failed": sorted(self.failed),
        }

    def save(self, root) -> Path:
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        for i, store in enumerate(self.nodes):
            node_dir = root / f"node{i}"
            node_dir.mkdir(exist_ok=True)
            for old in node_dir.glob("stripe*.strip"):
                if int(old.stem[len("stripe"):]) not in store:
                    old.unlink()
            for s, raw in store.items():
                (node_dir / f"stripe{s}.strip").write_bytes(raw)
        (root / METADATA).write_text(json.dumps(self.metadata(), indent=2) + "\n")
        return root

    @classmethod
    def load(cls, root) -> Cluster:
        root = Path(root)
        meta_path = root / METADATA
        if not meta_path.exists():
            raise FileNotFoundError(f"no cluster store at {root} (missing {METADATA})")
        meta = json.loads(meta_path.read_text())
        if meta.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported store format {meta.get('format')!r}")
        spec = CodeSpec.from_dict(meta["code"])
        cluster = cls(spec, meta["block_size"])
        cluster.rotation = list(meta["rotation"])
        cluster.files = list(meta["files"])
        cluster.failed = set(meta["failed"])
        for i in range(spec.n):
            if i in cluster.failed:
                continue
            node_dir = root / f"node{i}"
            for s in range(cluster.stripe_count):
                raw = (node_dir / f"stripe{s}.strip").read_bytes()
                if len(raw) != spec.strip_size:
                    raise ValueError(f"{node_dir}/stripe{s}.strip has {len(raw)} bytes, "
                                     f"expected {spec.strip_size}")
                cluster.nodes[i][s] = raw
        return cluster


def create_cluster(spec: CodeSpec, block_size: int | None = None) -> Cluster:
    return Cluster(spec, block_size)
