"""Recovery of failed strips: conventional, single-failure MSR, and CORE.

CORE treats the symbols failed nodes would have sent to each other as
unknowns ("virtual symbols"). Each virtual symbol e[g, f] equals
Enc[g, f](Rec[g](...)), a linear expression in other virtual symbols and in
symbols actually downloaded from survivors. Solving that t(t-1)-unknown
system expresses every virtual symbol in terms of downloaded ones, after
which each failed strip is rebuilt by Rec.

All of this is linear and independent of stripe contents, so per failure
pattern the whole recovery collapses to one decoding matrix, computed once
and memoized on the :class:`~regencore.codes.CodeSpec`.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from regencore import gf
from regencore.codes import CodeKind, CodeSpec, StripeView


class PatternClass(str, enum.Enum):
    GOOD = "good"
    BAD = "bad"


class BadPatternError(RuntimeError):
    """The virtual-symbol system of the pattern has no unique solution."""


class UnrecoverableError(RuntimeError):
    """Fewer than k nodes survive."""


class EscalationError(RuntimeError):
    """No good superset of a bad pattern exists within n - k failures."""


@dataclass(frozen=True)
class FailurePattern:
    failed: tuple[int, ...]

    def __post_init__(self):
        nodes = tuple(sorted(int(i) for i in self.failed))
        if not nodes:
            raise ValueError("a failure pattern needs at least one failed node")
        if len(set(nodes)) != len(nodes):
            raise ValueError(f"duplicate node ids in failure pattern {self.failed}")
        if nodes[0] < 0:
            raise ValueError(f"negative node id in failure pattern {self.failed}")
        object.__setattr__(self, "failed", nodes)

    @property
    def t(self) -> int:
        return len(self.failed)

    def survivors(self, n: int) -> list[int]:
        return [i for i in range(n) if i not in self.failed]

    def __iter__(self):
        return iter(self.failed)

    def __contains__(self, node):
        return node in self.failed

    def __str__(self):
        return "{" + ", ".join(f"N{i}" for i in self.failed) + "}"


def as_pattern(spec: CodeSpec, pattern) -> FailurePattern:
    if not isinstance(pattern, FailurePattern):
        pattern = FailurePattern(tuple(pattern))
    if pattern.failed[-1] >= spec.n:
        raise ValueError(f"node {pattern.failed[-1]} does not exist in a {spec.n}-node code")
    if pattern.t > spec.n - spec.k:
        raise UnrecoverableError(
            f"{pattern.t} failures exceed the tolerance n - k = {spec.n - spec.k}"
        )
    return pattern


@dataclass
class VirtualSymbolSystem:
    pattern: FailurePattern
    unknowns: list[tuple[int, int]]  # virtual e[g, f]
    real_symbols: list[tuple[int, int]]  # downloaded e[h, f], survivor-major
    coefficient_matrix: np.ndarray  # len(unknowns) square
    constant_map: np.ndarray  # len(unknowns) x len(real_symbols)

    def residual(self, virtual_values: np.ndarray, real_values: np.ndarray) -> np.ndarray:
        """``A @ virtual + C @ real``; zero when both come from one stripe."""
        return gf.mat_mul(self.coefficient_matrix, virtual_values) ^ gf.mat_mul(
            self.constant_map, real_values
        )


@dataclass
class RecoveryPlan:
    pattern: FailurePattern
    effective_pattern: FailurePattern
    scheme: str  # "core" or "conventional"
    downloads: list[tuple[int, int | None]]  # (node, target); None = whole strip
    expected_bandwidth: int  # bytes per stripe
    d: int
    beta_per_node: int
    symbol_size: int
    escalation_depth: int = 0
    decoder: np.ndarray = field(default=None, repr=False)
    decoded_nodes: tuple[int, ...] = ()

    @property
    def contacted(self) -> list[int]:
        return sorted({i for i, _ in self.downloads})

    def report(self) -> str:
        lines = [
            f"pattern: {self.pattern}",
            f"effective pattern: {self.effective_pattern}",
            f"scheme: {self.scheme}",
            f"contacted nodes (d): {self.d}",
            f"bytes per contacted node (beta): {self.beta_per_node}",
            f"recovery bandwidth: {self.expected_bandwidth} bytes per stripe",
        ]
        if self.escalation_depth:
            lines.append(f"escalation depth: {self.escalation_depth}")
        return "\n".join(lines) + "\n"


def _memo(spec: CodeSpec, key, compute):
    hit = spec.memo.get(key)
    if hit is None:
        hit = compute()
        # concurrent duplicate computation is harmless; first writer wins
        hit = spec.memo.setdefault(key, hit)
    return hit


def _require_msr(spec: CodeSpec) -> None:
    if spec.kind is not CodeKind.MSR:
        raise ValueError("CORE recovery requires an MSR code")


def build_virtual_system(spec: CodeSpec, pattern) -> VirtualSymbolSystem:
    _require_msr(spec)
    pattern = as_pattern(spec, pattern)
    if pattern.t < 2:
        raise ValueError("a single failure has no virtual symbols")
    failed = pattern.failed
    unknowns = [(g, f) for g in failed for f in failed if g != f]
    reals = [(h, f) for h in pattern.survivors(spec.n) for f in failed]
    u_idx = {key: i for i, key in enumerate(unknowns)}
    r_idx = {key: i for i, key in enumerate(reals)}

    a = gf.identity(len(unknowns))
    c = np.zeros((len(unknowns), len(reals)), dtype=np.uint8)
    for row, (g, f) in enumerate(unknowns):
        # e[g, f] = Enc[g, f] . Rec[g] . (symbols e[h, g] for h != g)
        weights = gf.mat_mul(spec.enc_coeffs[g, f][None, :], spec.rec_matrices[g])[0]
        for h, w in zip(spec.helpers(g), weights):
            if not w:
                continue
            if h in pattern:
                a[row, u_idx[(h, g)]] ^= w
            else:
                c[row, r_idx[(h, g)]] ^= w
    return VirtualSymbolSystem(pattern, unknowns, reals, a, c)


def classify_pattern(spec: CodeSpec, pattern) -> PatternClass:
    _require_msr(spec)
    pattern = as_pattern(spec, pattern)
    if pattern.t == 1:
        return PatternClass.GOOD

    def compute():
        system = build_virtual_system(spec, pattern)
        good = gf.is_invertible(system.coefficient_matrix)
        return PatternClass.GOOD if good else PatternClass.BAD

    return _memo(spec, ("class", pattern.failed), compute)


def _core_decoder(spec: CodeSpec, pattern: FailurePattern) -> np.ndarray:
    """Matrix taking the downloaded real symbols to all failed strips, stacked."""

    def compute():
        failed = pattern.failed
        reals = [(h, f) for h in pattern.survivors(spec.n) for f in failed]
        r_idx = {key: i for i, key in enumerate(reals)}
        if pattern.t > 1:
            system = build_virtual_system(spec, pattern)
            try:
                solved = gf.mat_mul(gf.mat_invert(system.coefficient_matrix), system.constant_map)
            except gf.SingularMatrixError:
                raise BadPatternError(f"pattern {pattern} is bad") from None
            u_idx = {key: i for i, key in enumerate(system.unknowns)}
        blocks = []
        for f in failed:
            helper_rows = np.zeros((spec.n - 1, len(reals)), dtype=np.uint8)
            for pos, h in enumerate(spec.helpers(f)):
                if h in pattern:
                    helper_rows[pos] = solved[u_idx[(h, f)]]
                else:
                    helper_rows[pos, r_idx[(h, f)]] = 1
            blocks.append(gf.mat_mul(spec.rec_matrices[f], helper_rows))
        out = np.vstack(blocks)
        out.flags.writeable = False
        return out

    return _memo(spec, ("core", pattern.failed), compute)


def _core_plan(spec: CodeSpec, pattern: FailurePattern, effective: FailurePattern, depth: int) -> RecoveryPlan:
    decoder = _core_decoder(spec, effective)
    survivors = effective.survivors(spec.n)
    t = effective.t
    return RecoveryPlan(
        pattern=pattern,
        effective_pattern=effective,
        scheme="core",
        downloads=[(h, f) for h in survivors for f in effective.failed],
        expected_bandwidth=t * len(survivors) * spec.symbol_size,
        d=len(survivors),
        beta_per_node=t * spec.symbol_size,
        symbol_size=spec.symbol_size,
        escalation_depth=depth,
        decoder=decoder,
        decoded_nodes=effective.failed,
    )


def _conventional_plan(spec: CodeSpec, pattern: FailurePattern) -> RecoveryPlan:
    survivors = pattern.survivors(spec.n)
    if len(survivors) < spec.k:
        raise UnrecoverableError(f"only {len(survivors)} survivors, need {spec.k}")
    contacted = tuple(survivors[: spec.k])

    def compute():
        sub = np.vstack([spec.node_rows(i) for i in contacted])
        lost = np.vstack([spec.node_rows(f) for f in pattern.failed])
        out = gf.mat_mul(lost, gf.mat_invert(sub))
        out.flags.writeable = False
        return out

    decoder = _memo(spec, ("conventional", pattern.failed), compute)
    return RecoveryPlan(
        pattern=pattern,
        effective_pattern=pattern,
        scheme="conventional",
        downloads=[(i, None) for i in contacted],
        expected_bandwidth=spec.k * spec.strip_size,
        d=spec.k,
        beta_per_node=spec.strip_size,
        symbol_size=spec.symbol_size,
        decoder=decoder,
        decoded_nodes=pattern.failed,
    )


def escalate_pattern(spec: CodeSpec, pattern) -> tuple[FailurePattern, int]:
    """Smallest good superset of a bad pattern, and how many nodes were added.

    Supersets are tried by size, then in lexicographic order of the added
    survivors, so the lowest-indexed survivor wins ties.
    """
    pattern = as_pattern(spec, pattern)
    survivors = pattern.survivors(spec.n)
    for extra in range(1, spec.n - spec.k - pattern.t + 1):
        for added in itertools.combinations(survivors, extra):
            candidate = FailurePattern(pattern.failed + added)
            if classify_pattern(spec, candidate) is PatternClass.GOOD:
                return candidate, extra
    raise EscalationError(f"no good superset of {pattern} within {spec.n - spec.k} failures")


def plan_recovery(spec: CodeSpec, pattern, scheme: str = "core") -> RecoveryPlan:
    """Choose how to recover ``pattern``.

    Conventional recovery is used for RS codes, when asked for, or when
    ``t >= k``. Otherwise good patterns go through CORE directly and bad ones
    through CORE on an escalated superset.
    """
    pattern = as_pattern(spec, pattern)
    if scheme not in ("core", "conventional"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "conventional" or spec.kind is CodeKind.RS or pattern.t >= spec.k:
        return _conventional_plan(spec, pattern)
    if classify_pattern(spec, pattern) is PatternClass.GOOD:
        return _core_plan(spec, pattern, pattern, 0)
    try:
        effective, depth = escalate_pattern(spec, pattern)
    except EscalationError:
        return _conventional_plan(spec, pattern)
    if effective.t >= spec.k:
        return _conventional_plan(spec, pattern)
    return _core_plan(spec, pattern, effective, depth)


def gather_symbols(spec: CodeSpec, stripe: StripeView, plan: RecoveryPlan) -> np.ndarray:
    """Survivor side: read strips and encode what the plan downloads."""
    if plan.scheme == "conventional":
        return np.vstack([stripe.strip(i) for i in plan.contacted])
    targets = plan.effective_pattern.failed
    rows = []
    for h in plan.contacted:
        coeffs = spec.enc_coeffs[h, list(targets)]
        rows.append(gf.mat_mul(coeffs, stripe.strip(h)))
    return np.vstack(rows)


def reconstruct(spec: CodeSpec, plan: RecoveryPlan, symbols: np.ndarray) -> dict[int, np.ndarray]:
    """Relayer side: turn downloaded symbols into the strips of ``plan.pattern``."""
    out = gf.mat_mul(plan.decoder, symbols)
    strips = {}
    for pos, f in enumerate(plan.decoded_nodes):
        if f in plan.pattern:
            strips[f] = out[pos * spec.r:(pos + 1) * spec.r]
    return strips


def _run(spec, stripe, plan):
    return reconstruct(spec, plan, gather_symbols(spec, stripe, plan)), plan


def recover_concurrent(spec: CodeSpec, stripe: StripeView, pattern):
    _require_msr(spec)
    pattern = as_pattern(spec, pattern)
    if classify_pattern(spec, pattern) is PatternClass.BAD:
        raise BadPatternError(f"pattern {pattern} is bad; escalate it first")
    return _run(spec, stripe, _core_plan(spec, pattern, pattern, 0))


def recover_conventional(spec: CodeSpec, stripe: StripeView, pattern):
    return _run(spec, stripe, _conventional_plan(spec, as_pattern(spec, pattern)))


def recover(spec: CodeSpec, stripe: StripeView, pattern, scheme: str = "core"):
    """Rebuild the strips of ``pattern``; returns ``(strips, plan)``."""
    return _run(spec, stripe, plan_recovery(spec, pattern, scheme))
