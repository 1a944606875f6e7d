"""Sum-product decoding for one-way key reconciliation.

Belief propagation alternates two message fields over the code graph:

* check -> bit messages r(i,j): the probability that parity check i is
  satisfied given an assumed value of bit j and the current conditional
  beliefs of the other bits in the check;
* bit -> check conditionals P'(i,j): the bit's prior combined with the r
  messages of all *other* checks containing it (sum-product exclusion).

Check-node messages are evaluated with the pairwise parity convolution
rather than by enumerating bit patterns.  For a set S of independent bits
with P(bit_k = 1) = p_k, let (E(S), O(S)) be the probabilities that S has
even/odd parity.  Then for any disjoint S, T:

    E(S+T) = E(S)E(T) + O(S)O(T),   O(S+T) = E(S)O(T) + O(S)E(T)

(condition on the parity of S; the parity of T must complete the total).
A single bit has (E, O) = (P_0, P_1), so folding this combine across a
check's other bits reproduces exactly the sum over all bit patterns with the
given parity -- the enumerated case form -- in O(row weight) products
instead of O(2^row_weight) terms.  Both probability components are carried
explicitly everywhere (never via 1-x), which keeps decoding exactly
equivariant under translating key and syndrome by a fixed vector, in float
and fixed point alike.

Everything is vectorized over a batch of blocks; the single-block functions
are thin views over the same kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fixedpoint import FixedPointFormat
from .matrix import ParityCheckMatrix, compute_parity

FLOAT_QBER_FLOOR = 1e-12


class DecodingNumericsError(ArithmeticError):
    """Belief pair degenerated to (0, 0) even in the log domain."""


@dataclass(frozen=True)
class DecoderConfig:
    """Decoding policy: iteration cap and arithmetic."""

    max_iter: int = 40
    arithmetic: str = "float"   # "float" or "fixedN" (e.g. fixed24)

    @property
    def fmt(self) -> FixedPointFormat | None:
        if self.arithmetic == "float":
            return None
        if self.arithmetic.startswith("fixed"):
            return FixedPointFormat(int(self.arithmetic[5:]))
        raise ValueError(f"unknown arithmetic {self.arithmetic!r}")


@dataclass
class DecodeResult:
    corrected: np.ndarray
    converged: bool
    iterations: int
    syndrome_matched: bool


@dataclass
class BatchDecodeResult:
    corrected: np.ndarray    # (B, n)
    converged: np.ndarray    # (B,)
    iterations: np.ndarray   # (B,)


@dataclass
class BeliefState:
    """Message state of one block (probability pairs, float or mantissas)."""

    h: ParityCheckMatrix
    received: np.ndarray
    prior0: np.ndarray   # (n,)
    prior1: np.ndarray
    q0: np.ndarray       # (E,) bit->check conditionals P'_0(i,j)
    q1: np.ndarray
    r0: np.ndarray       # (E,) check->bit messages r_{alpha=0}(i,j)
    r1: np.ndarray
    p0: np.ndarray       # (n,) posterior pair
    p1: np.ndarray
    fmt: FixedPointFormat | None = None

    def _edge_index(self, i: int, j: int) -> int:
        grid = self.h.edge_col.reshape(self.h.m, self.h.row_weight)
        pos = np.flatnonzero(grid[i] == j)
        if len(pos) == 0:
            raise KeyError(f"no edge between check {i} and bit {j}")
        return i * self.h.row_weight + int(pos[0])

    def _pair(self, a, b, idx):
        if self.fmt is None:
            return float(a[idx]), float(b[idx])
        return float(self.fmt.to_float(a[idx])), float(self.fmt.to_float(b[idx]))

    def check_message(self, i: int, j: int) -> tuple[float, float]:
        """(r_{alpha_j=0}(i,j), r_{alpha_j=1}(i,j))."""
        return self._pair(self.r0, self.r1, self._edge_index(i, j))

    def edge_belief(self, i: int, j: int) -> tuple[float, float]:
        """(P'_0(i,j), P'_1(i,j))."""
        return self._pair(self.q0, self.q1, self._edge_index(i, j))

    def posterior(self, j: int) -> tuple[float, float]:
        return self._pair(self.p0, self.p1, j)

    def unnormalized_q(self, j: int) -> tuple[float, float]:
        """(q_{alpha_j=0}(j), q_{alpha_j=1}(j)): prior times all r messages."""
        cols = np.flatnonzero(self.h.edge_col == j)
        if self.fmt is None:
            return (float(self.prior0[j] * np.prod(self.r0[cols])),
                    float(self.prior1[j] * np.prod(self.r1[cols])))
        a = int(self.prior0[j])
        b = int(self.prior1[j])
        for e in cols:
            a = (a * int(self.r0[e])) >> self.fmt.total_bits
            b = (b * int(self.r1[e])) >> self.fmt.total_bits
        return float(self.fmt.to_float(a)), float(self.fmt.to_float(b))


# ---------------------------------------------------------------------------
# kernels (batched)
# ---------------------------------------------------------------------------

def _combine(e1, o1, e2, o2, fmt):
    if fmt is None:
        return e1 * e2 + o1 * o2, e1 * o2 + o1 * e2
    bits = fmt.total_bits
    return (((e1 * e2) >> bits) + ((o1 * o2) >> bits),
            ((e1 * o2) >> bits) + ((o1 * e2) >> bits))


def _check_kernel(h: ParityCheckMatrix, q0, q1, parity, fmt):
    """Check-node update: leave-one-out parity convolution per row."""
    B = q0.shape[0]
    rw = h.row_weight
    shape = (B, h.m, rw)
    e = q0.reshape(shape)
    o = q1.reshape(shape)
    if fmt is None:
        one, zero = 1.0, 0.0
        dtype = float
    else:
        one, zero = fmt.scale, 0   # exact multiplicative identity
        dtype = np.int64
    pe = np.empty(shape, dtype=dtype)
    po = np.empty(shape, dtype=dtype)
    se = np.empty(shape, dtype=dtype)
    so = np.empty(shape, dtype=dtype)
    pe[:, :, 0] = one
    po[:, :, 0] = zero
    se[:, :, -1] = one
    so[:, :, -1] = zero
    for k in range(1, rw):
        pe[:, :, k], po[:, :, k] = _combine(pe[:, :, k - 1], po[:, :, k - 1],
                                            e[:, :, k - 1], o[:, :, k - 1], fmt)
        kk = rw - 1 - k
        se[:, :, kk], so[:, :, kk] = _combine(se[:, :, kk + 1], so[:, :, kk + 1],
                                              e[:, :, kk + 1], o[:, :, kk + 1], fmt)
    loo_e, loo_o = _combine(pe, po, se, so, fmt)
    p = parity.reshape(B, h.m, 1).astype(bool)
    r0 = np.where(p, loo_o, loo_e)
    r1 = np.where(p, loo_e, loo_o)
    if fmt is not None:
        r0 = fmt.clamp_zero(r0)
        r1 = fmt.clamp_zero(r1)
    return r0.reshape(B, -1), r1.reshape(B, -1)


def _logsafe_pairs(a_chain, b_chain):
    """Normalize pairs given per-factor chains, in the log domain."""
    with np.errstate(divide="ignore"):
        la = np.sum(np.log(a_chain), axis=-1)
        lb = np.sum(np.log(b_chain), axis=-1)
    top = np.maximum(la, lb)
    if np.any(np.isneginf(top)):
        raise DecodingNumericsError("belief pair degenerated to (0, 0)")
    pa = np.exp(la - top)
    pb = np.exp(lb - top)
    s = pa + pb
    return pa / s, pb / s


def _variable_kernel(h: ParityCheckMatrix, r0, r1, prior0, prior1, fmt):
    """Variable-node update.

    Returns (q0e, q1e) per-edge conditionals (own check excluded, normalized)
    and (p0, p1) posteriors (all checks, normalized).
    """
    B, E = r0.shape
    ce = h.col_edges              # (n, wmax), sentinel = E
    if fmt is None:
        pad = 1.0
    else:
        pad = fmt.scale
    r0p = np.concatenate([r0, np.full((B, 1), pad, dtype=r0.dtype)], axis=1)
    r1p = np.concatenate([r1, np.full((B, 1), pad, dtype=r1.dtype)], axis=1)
    a = r0p[:, ce]                # (B, n, wmax)
    b = r1p[:, ce]
    wmax = ce.shape[1]
    pre_a = np.empty_like(a)
    pre_b = np.empty_like(b)
    suf_a = np.empty_like(a)
    suf_b = np.empty_like(b)
    pre_a[:, :, 0] = pad
    pre_b[:, :, 0] = pad
    suf_a[:, :, -1] = pad
    suf_b[:, :, -1] = pad
    if fmt is None:
        for k in range(1, wmax):
            pre_a[:, :, k] = pre_a[:, :, k - 1] * a[:, :, k - 1]
            pre_b[:, :, k] = pre_b[:, :, k - 1] * b[:, :, k - 1]
            kk = wmax - 1 - k
            suf_a[:, :, kk] = suf_a[:, :, kk + 1] * a[:, :, kk + 1]
            suf_b[:, :, kk] = suf_b[:, :, kk + 1] * b[:, :, kk + 1]
        full_a = pre_a[:, :, -1] * a[:, :, -1]
        full_b = pre_b[:, :, -1] * b[:, :, -1]
        loo_a = pre_a * suf_a
        loo_b = pre_b * suf_b
        q0_full = prior0 * full_a
        q1_full = prior1 * full_b
        psum = q0_full + q1_full
        bad = psum == 0.0
        p0 = np.divide(q0_full, psum, out=np.zeros_like(q0_full), where=~bad)
        p1 = np.divide(q1_full, psum, out=np.zeros_like(q1_full), where=~bad)
        if np.any(bad):
            bi, bj = np.nonzero(bad)
            p0[bi, bj], p1[bi, bj] = _logsafe_pairs(
                np.concatenate([a[bi, bj], prior0[bi, bj, None]], axis=1),
                np.concatenate([b[bi, bj], prior1[bi, bj, None]], axis=1))
        q0e_grid = prior0[..., np.newaxis] * loo_a
        q1e_grid = prior1[..., np.newaxis] * loo_b
        esum = q0e_grid + q1e_grid
        ebad = esum == 0.0
        n0 = np.divide(q0e_grid, esum, out=np.zeros_like(q0e_grid), where=~ebad)
        n1 = np.divide(q1e_grid, esum, out=np.zeros_like(q1e_grid), where=~ebad)
        if np.any(ebad):
            bi, bj, bk = np.nonzero(ebad)
            mask = np.arange(wmax)[np.newaxis, :] != bk[:, np.newaxis]
            ca = np.where(mask, a[bi, bj], 1.0)
            cb = np.where(mask, b[bi, bj], 1.0)
            n0[bi, bj, bk], n1[bi, bj, bk] = _logsafe_pairs(
                np.concatenate([ca, prior0[bi, bj, None]], axis=1),
                np.concatenate([cb, prior1[bi, bj, None]], axis=1))
    else:
        bits = fmt.total_bits
        for k in range(1, wmax):
            pre_a[:, :, k] = (pre_a[:, :, k - 1] * a[:, :, k - 1]) >> bits
            pre_b[:, :, k] = (pre_b[:, :, k - 1] * b[:, :, k - 1]) >> bits
            kk = wmax - 1 - k
            suf_a[:, :, kk] = (suf_a[:, :, kk + 1] * a[:, :, kk + 1]) >> bits
            suf_b[:, :, kk] = (suf_b[:, :, kk + 1] * b[:, :, kk + 1]) >> bits
        full_a = (pre_a[:, :, -1] * a[:, :, -1]) >> bits
        full_b = (pre_b[:, :, -1] * b[:, :, -1]) >> bits
        loo_a = (pre_a * suf_a) >> bits
        loo_b = (pre_b * suf_b) >> bits
        q0_full = (prior0 * full_a) >> bits
        q1_full = (prior1 * full_b) >> bits
        p0, p1 = fmt.normalize_pair(q0_full, q1_full)
        q0e_grid = (prior0[..., np.newaxis] * loo_a) >> bits
        q1e_grid = (prior1[..., np.newaxis] * loo_b) >> bits
        n0, n1 = fmt.normalize_pair(q0e_grid, q1e_grid)
    # scatter grid conditionals back to edge order (sentinel writes land in
    # the scratch slot)
    q0e = np.empty((B, E + 1), dtype=n0.dtype)
    q1e = np.empty((B, E + 1), dtype=n1.dtype)
    bidx = np.arange(B)[:, None, None]
    q0e[bidx, ce[np.newaxis, :, :]] = n0
    q1e[bidx, ce[np.newaxis, :, :]] = n1
    return q0e[:, :E], q1e[:, :E], p0, p1


def _priors(received, qber, fmt):
    received = np.asarray(received, dtype=np.uint8)
    if not 0.0 <= qber < 0.5:
        raise ValueError("qber must be in [0, 0.5)")
    q = max(qber, FLOAT_QBER_FLOOR)
    p1 = np.where(received == 1, 1.0 - q, q)
    p0 = np.where(received == 1, q, 1.0 - q)
    if fmt is None:
        return p0.astype(float), p1.astype(float)
    return fmt.clamp_zero(fmt.quantize(p0)), fmt.clamp_zero(fmt.quantize(p1))


def init_beliefs(h: ParityCheckMatrix, received, qber: float,
                 arithmetic: str = "float") -> BeliefState:
    """Initial beliefs from the received key and the expected error rate.

    A qber of exactly zero is clamped to a documented floor (float) or to the
    smallest representable mantissa (fixed); certainty would freeze the
    message passing.
    """
    fmt = DecoderConfig(arithmetic=arithmetic).fmt
    received = np.asarray(received, dtype=np.uint8)
    if received.shape != (h.n,):
        raise ValueError(f"received length {received.shape} does not match n={h.n}")
    p0, p1 = _priors(received[np.newaxis, :], qber, fmt)
    q0 = p0[0][h.edge_col].copy()
    q1 = p1[0][h.edge_col].copy()
    if fmt is None:
        r0 = np.full(h.n_edges, 0.5)
        r1 = np.full(h.n_edges, 0.5)
    else:
        half = fmt.scale >> 1
        r0 = np.full(h.n_edges, half, dtype=np.int64)
        r1 = np.full(h.n_edges, half, dtype=np.int64)
    return BeliefState(h=h, received=received, prior0=p0[0], prior1=p1[0],
                       q0=q0, q1=q1, r0=r0, r1=r1,
                       p0=p0[0].copy(), p1=p1[0].copy(), fmt=fmt)


def check_node_update(h: ParityCheckMatrix, state: BeliefState,
                      parity) -> BeliefState:
    """One check-node half-iteration: refresh all r messages."""
    parity = np.asarray(parity, dtype=np.uint8)[np.newaxis, :]
    r0, r1 = _check_kernel(h, state.q0[np.newaxis, :], state.q1[np.newaxis, :],
                           parity, state.fmt)
    state.r0, state.r1 = r0[0], r1[0]
    return state


def variable_node_update(h: ParityCheckMatrix, state: BeliefState) -> BeliefState:
    """One variable-node half-iteration: refresh conditionals and posteriors."""
    q0e, q1e, p0, p1 = _variable_kernel(
        h, state.r0[np.newaxis, :], state.r1[np.newaxis, :],
        state.prior0[np.newaxis, :], state.prior1[np.newaxis, :], state.fmt)
    state.q0, state.q1 = q0e[0], q1e[0]
    state.p0, state.p1 = p0[0], p1[0]
    return state


def _decisions(p0, p1, received):
    dec = np.where(p1 > p0, 1, 0).astype(np.uint8)
    ties = p0 == p1
    if np.any(ties):
        dec = np.where(ties, received, dec).astype(np.uint8)
    return dec


def decode_batch(h: ParityCheckMatrix, parities, received, qber: float,
                 max_iter: int = 40, arithmetic: str = "float",
                 chunk_size: int | None = None) -> BatchDecodeResult:
    """Decode a batch of blocks against their syndromes.

    Per iteration: check-node update, variable-node update, hard decision
    (ties resolve to the received bit), syndrome test; a block freezes at its
    first syndrome match.  Blocks that never match return the final
    best-effort decision with converged=False.
    """
    parities = np.atleast_2d(np.asarray(parities, dtype=np.uint8))
    received = np.atleast_2d(np.asarray(received, dtype=np.uint8))
    B = received.shape[0]
    if parities.shape != (B, h.m) or received.shape != (B, h.n):
        raise ValueError("parity/received shapes do not match the code")
    fmt = DecoderConfig(arithmetic=arithmetic).fmt
    if chunk_size is None:
        chunk_size = max(16, min(B, 4_000_000 // (h.n_edges + 1)))
    corrected = np.empty((B, h.n), dtype=np.uint8)
    converged = np.zeros(B, dtype=bool)
    iterations = np.full(B, max_iter, dtype=np.int64)
    for lo in range(0, B, chunk_size):
        hi = min(lo + chunk_size, B)
        sl = slice(lo, hi)
        p0, p1 = _priors(received[sl], qber, fmt)
        q0 = p0[:, h.edge_col]
        q1 = p1[:, h.edge_col]
        par = parities[sl]
        done = np.zeros(hi - lo, dtype=bool)
        out = received[sl].copy()
        last = received[sl].copy()
        for it in range(1, max_iter + 1):
            r0, r1 = _check_kernel(h, q0, q1, par, fmt)
            q0, q1, post0, post1 = _variable_kernel(h, r0, r1, p0, p1, fmt)
            dec = _decisions(post0, post1, received[sl])
            syn = compute_parity(h, dec)
            ok = np.all(syn == par, axis=1) & ~done
            if np.any(ok):
                out[ok] = dec[ok]
                iterations[np.flatnonzero(ok) + lo] = it
                done |= ok
            last = dec
            if done.all():
                break
        out[~done] = last[~done]
        corrected[sl] = out
        converged[sl] = done
    return BatchDecodeResult(corrected=corrected, converged=converged,
                             iterations=iterations)


def decode(h: ParityCheckMatrix, parity, received, qber: float,
           max_iter: int = 40, arithmetic: str = "float") -> DecodeResult:
    """Decode one block; see :func:`decode_batch`."""
    res = decode_batch(h, np.asarray(parity)[np.newaxis, :],
                       np.asarray(received)[np.newaxis, :], qber,
                       max_iter=max_iter, arithmetic=arithmetic)
    corrected = res.corrected[0]
    matched = bool(np.all(compute_parity(h, corrected) == np.asarray(parity, dtype=np.uint8)))
    return DecodeResult(corrected=corrected, converged=bool(res.converged[0]),
                        iterations=int(res.iterations[0]), syndrome_matched=matched)
