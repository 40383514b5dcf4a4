"""Systematic MDS codes and the single-failure repair primitives Enc/Rec.

Two code families are provided:

* Reed-Solomon with one symbol per strip (``r = 1``), built from a Cauchy
  parity block.
* A product-matrix MSR code with ``d = n - 1`` helpers and ``r = n - k``
  symbols per strip, for ``n = 2k``. The product-matrix construction needs
  ``d = 2k - 2``; we build the ``(n + 1, k + 1)`` code, make it systematic and
  shorten away one all-zero systematic node. During repair that phantom node
  would contribute a zero symbol, so repair uses exactly the ``n - 1`` real
  survivors.

Stripe contents are ``uint8`` arrays: a strip is ``r x L`` where ``L`` is the
symbol size in bytes, so every field operation acts bytewise on whole symbols.
"""

from __future__ import annotations

import enum
import functools
import itertools
import json
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from regencore import gf

FORMAT_VERSION = 1

# exhaustive MDS verification up to this many k-subsets, sampled beyond it
MDS_EXHAUSTIVE_LIMIT = 4000
MDS_SAMPLE_SIZE = 400


class CodeKind(str, enum.Enum):
    RS = "rs"
    MSR = "msr"


class CodeParameterError(ValueError):
    """Unsupported (n, k, kind) combination."""


class CodeConstructionError(RuntimeError):
    """A candidate generator failed verification at build time."""


class UnavailableStripError(RuntimeError):
    """A strip of an unavailable node was read. Always a caller bug."""


@dataclass(frozen=True, eq=False)
class CodeSpec:
    kind: CodeKind
    n: int
    k: int
    r: int
    symbol_size: int
    generator: np.ndarray
    # MSR only: enc_coeffs[i, f] is the length-r functional node i applies
    # for target f; rec_matrices[f] maps the n-1 helper symbols to strip f.
    enc_coeffs: np.ndarray | None = field(default=None, repr=False)
    rec_matrices: np.ndarray | None = field(default=None, repr=False)
    memo: dict = field(default_factory=dict, repr=False)
    memo_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def strip_size(self) -> int:
        return self.r * self.symbol_size

    @property
    def stripe_data_size(self) -> int:
        """Original data per stripe in bytes (M)."""
        return self.k * self.r * self.symbol_size

    def node_rows(self, i: int) -> np.ndarray:
        return self.generator[i * self.r:(i + 1) * self.r]

    def helpers(self, f: int) -> list[int]:
        return [i for i in range(self.n) if i != f]

    def with_symbol_size(self, symbol_size: int) -> CodeSpec:
        return build_code(self.n, self.k, self.kind, symbol_size)

    def __eq__(self, other):
        if not isinstance(other, CodeSpec):
            return NotImplemented
        return (self.kind, self.n, self.k, self.r, self.symbol_size) == (
            other.kind, other.n, other.k, other.r, other.symbol_size
        ) and np.array_equal(self.generator, other.generator)

    def __hash__(self):
        return hash((self.kind, self.n, self.k, self.r, self.symbol_size))

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "kind": self.kind.value,
            "n": self.n,
            "k": self.k,
            "r": self.r,
            "symbol_size": self.symbol_size,
            "generator": [row.tobytes().hex() for row in self.generator],
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> CodeSpec:
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported code document version {doc.get('version')!r}")
        gen = np.array([list(bytes.fromhex(row)) for row in doc["generator"]], dtype=np.uint8)
        spec = build_code(doc["n"], doc["k"], CodeKind(doc["kind"]), doc["symbol_size"])
        if spec.r != doc["r"] or not np.array_equal(spec.generator, gen):
            raise ValueError("stored generator does not match the deterministic construction")
        return spec

    @classmethod
    def from_text(cls, text: str) -> CodeSpec:
        return cls.from_dict(json.loads(text))


@dataclass
class StripeView:
    spec: CodeSpec
    stored: np.ndarray  # (n, r, L)
    available: np.ndarray  # (n,) bool

    def strip(self, i: int) -> np.ndarray:
        if not self.available[i]:
            raise UnavailableStripError(f"strip of node {i} is unavailable")
        return self.stored[i]

    def with_failures(self, nodes) -> StripeView:
        """Copy with ``nodes`` marked unavailable and their contents wiped."""
        stored = self.stored.copy()
        available = self.available.copy()
        for i in nodes:
            stored[i] = 0
            available[i] = False
        return StripeView(self.spec, stored, available)

    @property
    def failed(self) -> list[int]:
        return [i for i in range(self.spec.n) if not self.available[i]]


@dataclass(frozen=True)
class EncodedSymbol:
    from_node: int
    for_node: int
    payload: np.ndarray  # (L,)
    coefficients: np.ndarray  # (r,)


def _cauchy_rs(n: int, k: int) -> np.ndarray:
    m = n - k
    parity = np.zeros((m, k), dtype=np.uint8)
    for i in range(m):
        for j in range(k):
            parity[i, j] = gf.inv(i ^ (m + j))
    return np.vstack([gf.identity(k), parity])


def _msr_points(count: int, alpha: int) -> list[int]:
    """Distinct nonzero x whose powers x^alpha are also distinct."""
    xs: list[int] = []
    seen: set[int] = set()
    for x in range(1, 256):
        lam = gf.power(x, alpha)
        if lam not in seen:
            xs.append(x)
            seen.add(lam)
            if len(xs) == count:
                return xs
    raise CodeParameterError(
        f"GF(2^8) has too few points for {count} nodes with {alpha} symbols per strip"
    )


def _product_matrix_msr(n: int, k: int):
    alpha = k
    ext_n, ext_k = n + 1, k + 1
    d = 2 * alpha
    xs = _msr_points(ext_n, alpha)
    psi = np.array([[gf.power(x, l) for l in range(d)] for x in xs], dtype=np.uint8)

    # message: two symmetric alpha x alpha matrices stacked (d x alpha);
    # free variables are their upper triangles
    variables = [(h, a, b) for h in range(2) for a in range(alpha) for b in range(a, alpha)]
    assert len(variables) == ext_k * alpha
    g_ext = np.zeros((ext_n * alpha, ext_k * alpha), dtype=np.uint8)
    for v, (h, a, b) in enumerate(variables):
        for e in range(ext_n):
            g_ext[e * alpha + b, v] ^= psi[e, h * alpha + a]
            if a != b:
                g_ext[e * alpha + a, v] ^= psi[e, h * alpha + b]

    top = g_ext[: ext_k * alpha]
    try:
        g_sys = gf.mat_mul(g_ext, gf.mat_invert(top))
    except gf.SingularMatrixError as exc:
        raise CodeConstructionError("product-matrix systematic block is singular") from exc
    generator = np.ascontiguousarray(g_sys[alpha:, alpha:])

    enc_coeffs = np.zeros((n, n, alpha), dtype=np.uint8)
    rec_matrices = np.zeros((n, alpha, n - 1), dtype=np.uint8)
    for f in range(n):
        phi = psi[f + 1, :alpha]
        for i in range(n):
            if i != f:
                enc_coeffs[i, f] = phi
        lam = gf.power(xs[f + 1], alpha)
        ext_helpers = [e for e in range(ext_n) if e != f + 1]
        psi_inv = gf.mat_invert(psi[ext_helpers])
        select = np.zeros((alpha, 2 * alpha), dtype=np.uint8)
        select[np.arange(alpha), np.arange(alpha)] = 1
        select[np.arange(alpha), alpha + np.arange(alpha)] = lam
        rec_ext = gf.mat_mul(select, psi_inv)
        # column 0 belongs to the phantom node, whose symbol is always zero
        rec_matrices[f] = rec_ext[:, 1:]
    return generator, enc_coeffs, rec_matrices


def _check_mds(spec: CodeSpec) -> None:
    n, k = spec.n, spec.k
    total = math.comb(n, k)
    if total <= MDS_EXHAUSTIVE_LIMIT:
        subsets = itertools.combinations(range(n), k)
    else:
        rng = np.random.default_rng(n * 1000 + k)
        subsets = (tuple(sorted(rng.choice(n, size=k, replace=False))) for _ in range(MDS_SAMPLE_SIZE))
    for nodes in subsets:
        sub = np.vstack([spec.node_rows(i) for i in nodes])
        if not gf.is_invertible(sub):
            raise CodeConstructionError(f"generator is not MDS: nodes {nodes} are dependent")


def _check_repair(spec: CodeSpec) -> None:
    rng = np.random.default_rng(7)
    data = rng.integers(0, 256, (spec.k * spec.r, 4), dtype=np.uint8)
    stored = gf.mat_mul(spec.generator, data).reshape(spec.n, spec.r, -1)
    for f in range(spec.n):
        helpers = np.vstack([gf.mat_mul(spec.enc_coeffs[i, f][None, :], stored[i])
                             for i in spec.helpers(f)])
        if not np.array_equal(gf.mat_mul(spec.rec_matrices[f], helpers), stored[f]):
            raise CodeConstructionError(f"repair of node {f} does not reproduce its strip")


@functools.lru_cache(maxsize=None)
def _construct(n: int, k: int, kind: CodeKind):
    if kind is CodeKind.RS:
        if not 1 <= k < n <= 256:
            raise CodeParameterError(f"Reed-Solomon needs 1 <= k < n <= 256, got n={n}, k={k}")
        r, gen, enc_c, rec_m = 1, _cauchy_rs(n, k), None, None
    elif kind is CodeKind.MSR:
        if not 1 <= k < n or n != 2 * k:
            raise CodeParameterError(f"MSR codes here need n = 2k with k >= 1, got n={n}, k={k}")
        r = n - k
        gen, enc_c, rec_m = _product_matrix_msr(n, k)
    else:
        raise CodeParameterError(f"unknown code kind {kind!r}")
    for arr in (gen, enc_c, rec_m):
        if arr is not None:
            arr.flags.writeable = False
    probe = CodeSpec(kind, n, k, r, 1, gen, enc_c, rec_m)
    _check_mds(probe)
    if kind is CodeKind.MSR:
        _check_repair(probe)
    return r, gen, enc_c, rec_m


@functools.lru_cache(maxsize=None)
def build_code(n: int, k: int, kind: CodeKind | str = CodeKind.MSR, symbol_size: int = 1) -> CodeSpec:
    kind = CodeKind(kind)
    if symbol_size < 1:
        raise CodeParameterError(f"symbol_size must be positive, got {symbol_size}")
    r, gen, enc_c, rec_m = _construct(n, k, kind)
    return CodeSpec(kind, n, k, r, symbol_size, gen, enc_c, rec_m)


def _as_region(data, rows: int, spec: CodeSpec) -> np.ndarray:
    if isinstance(data, (bytes, bytearray, memoryview)):
        arr = np.frombuffer(bytes(data), dtype=np.uint8)
        if arr.size != rows * spec.symbol_size:
            raise ValueError(f"expected {rows * spec.symbol_size} bytes, got {arr.size}")
        return arr.reshape(rows, spec.symbol_size)
    arr = np.asarray(data, dtype=np.uint8)
    if arr.ndim == 1:
        arr = arr.reshape(rows, -1) if arr.size % rows == 0 else arr
    if arr.ndim != 2 or arr.shape[0] != rows:
        raise ValueError(f"expected {rows} symbols, got array of shape {arr.shape}")
    return np.ascontiguousarray(arr)


def encode_stripe(spec: CodeSpec, data) -> StripeView:
    """Encode ``k*r`` data symbols into a full stripe of ``n`` strips."""
    region = _as_region(data, spec.k * spec.r, spec)
    stored = gf.mat_mul(spec.generator, region).reshape(spec.n, spec.r, region.shape[1])
    return StripeView(spec, stored, np.ones(spec.n, dtype=bool))


def _require_msr(spec: CodeSpec) -> None:
    if spec.kind is not CodeKind.MSR:
        raise CodeParameterError("Enc/Rec are only defined for MSR codes")


def enc_coefficients(spec: CodeSpec, i: int, target: int) -> np.ndarray:
    _require_msr(spec)
    if i == target:
        raise ValueError(f"node {i} cannot encode for itself")
    return spec.enc_coeffs[i, target]


def enc(spec: CodeSpec, i: int, target: int, strip) -> EncodedSymbol:
    """Encoded symbol node ``i`` sends towards rebuilding node ``target``."""
    coeffs = enc_coefficients(spec, i, target)
    strip = _as_region(strip, spec.r, spec)
    payload = gf.mat_mul(coeffs[None, :], strip)[0]
    return EncodedSymbol(i, target, payload, coeffs)


def rec_matrix(spec: CodeSpec, target: int) -> np.ndarray:
    """Linear map from helper symbols (ascending node order) to the lost strip."""
    _require_msr(spec)
    return spec.rec_matrices[target]


def rec(spec: CodeSpec, target: int, symbols) -> np.ndarray:
    """Rebuild the strip of ``target`` from one encoded symbol per other node."""
    _require_msr(spec)
    by_node = {}
    for s in symbols:
        if s.for_node != target:
            raise ValueError(f"symbol from node {s.from_node} targets {s.for_node}, not {target}")
        if s.from_node == target or s.from_node in by_node:
            raise ValueError(f"unexpected or duplicate symbol from node {s.from_node}")
        by_node[s.from_node] = s.payload
    helpers = spec.helpers(target)
    if sorted(by_node) != helpers:
        raise ValueError(f"need one symbol from each of nodes {helpers}, got {sorted(by_node)}")
    payloads = np.vstack([by_node[i] for i in helpers])
    return gf.mat_mul(rec_matrix(spec, target), payloads)


def decode_original(spec: CodeSpec, strips: dict) -> np.ndarray:
    """Recover the ``k*r`` data symbols from any ``k`` strips keyed by node id."""
    if len(strips) != spec.k:
        raise ValueError(f"need exactly {spec.k} strips, got {len(strips)}")
    nodes = sorted(strips)
    if nodes[0] < 0 or nodes[-1] >= spec.n:
        raise ValueError(f"node ids out of range: {nodes}")
    sub = np.vstack([spec.node_rows(i) for i in nodes])
    try:
        inverse = gf.mat_invert(sub)
    except gf.SingularMatrixError as exc:  # pragma: no cover - violates verified MDS property
        raise CodeConstructionError(f"nodes {nodes} do not decode; generator is not MDS") from exc
    region = np.vstack([_as_region(strips[i], spec.r, spec) for i in nodes])
    return gf.mat_mul(inverse, region)
