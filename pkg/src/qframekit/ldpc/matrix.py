"""Sparse parity-check matrices: construction, parity computation, alist IO.

Codes have a fixed number of ones per row and a variable number per column.
The column-weight distribution is chosen by a small search over candidate
integer distributions (weights 2..8), scored by Monte-Carlo density
evolution on the binary symmetric channel at the target error rate; with the
row weight and check count fixed the total edge count (and hence decoder
complexity) is the same for every candidate, so the threshold constraint is
the binding criterion and the highest-threshold candidate wins.  Explicit
distributions are accepted as an override.

Edge placement is a progressive-edge-growth style greedy: each edge goes to
the least-filled admissible check, preferring checks that do not close a
length-4 cycle; unavoidable 4-cycles are counted and reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DesignInfeasibleError(ValueError):
    """The requested code parameters cannot be satisfied."""


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass
class ParityCheckMatrix:
    """m x n binary parity-check matrix with fixed row weight.

    Edges are stored in row-major order (all edges of check 0, then check 1,
    ...), so ``edge_col`` reshapes to an (m, row_weight) grid.
    """

    n: int
    m: int
    row_weight: int
    edge_col: np.ndarray                # (E,) column index of each edge
    four_cycles: int = 0                # unavoidable 4-cycles accepted at design
    _col_edges: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.edge_col = np.asarray(self.edge_col, dtype=np.int64)
        if self.m >= self.n:
            raise ValueError("need m < n for a positive code rate")
        if self.edge_col.shape != (self.m * self.row_weight,):
            raise ValueError("edge list does not match m * row_weight")
        if np.any(self.edge_col < 0) or np.any(self.edge_col >= self.n):
            raise ValueError("edge column index out of range")
        grid = self.edge_col.reshape(self.m, self.row_weight)
        for i in range(self.m):
            if len(set(grid[i].tolist())) != self.row_weight:
                raise ValueError(f"duplicate column in check {i}")

    @property
    def n_edges(self) -> int:
        return self.m * self.row_weight

    @property
    def edge_row(self) -> np.ndarray:
        return np.repeat(np.arange(self.m), self.row_weight)

    @property
    def column_weights(self) -> np.ndarray:
        return np.bincount(self.edge_col, minlength=self.n)

    @property
    def col_edges(self) -> np.ndarray:
        """(n, w_max) grid of edge indices per column, padded with E (sentinel)."""
        if self._col_edges is None:
            wmax = int(self.column_weights.max())
            grid = np.full((self.n, wmax), self.n_edges, dtype=np.int64)
            fill = np.zeros(self.n, dtype=np.int64)
            for e, j in enumerate(self.edge_col):
                grid[j, fill[j]] = e
                fill[j] += 1
            self._col_edges = grid
        return self._col_edges

    def to_dense(self) -> np.ndarray:
        h = np.zeros((self.m, self.n), dtype=np.uint8)
        h[self.edge_row, self.edge_col] = 1
        return h

    @classmethod
    def from_dense(cls, h) -> "ParityCheckMatrix":
        h = np.asarray(h)
        m, n = h.shape
        weights = h.sum(axis=1)
        if len(set(weights.tolist())) != 1:
            raise ValueError("row weight must be constant")
        edge_col = np.concatenate([np.flatnonzero(h[i]) for i in range(m)])
        return cls(n=n, m=m, row_weight=int(weights[0]), edge_col=edge_col)

    @classmethod
    def from_rows(cls, n: int, rows: list[list[int]]) -> "ParityCheckMatrix":
        """Build from explicit per-check column lists (fixed row weight)."""
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ValueError("row weight must be constant")
        edge_col = np.concatenate([np.sort(np.asarray(r, dtype=np.int64)) for r in rows])
        return cls(n=n, m=len(rows), row_weight=widths.pop(), edge_col=edge_col)


def compute_parity(h: ParityCheckMatrix, key: np.ndarray) -> np.ndarray:
    """Parity vector H . key (mod 2).  ``key`` may be (n,) or batched (B, n)."""
    key = np.asarray(key)
    if key.shape[-1] != h.n:
        raise ValueError(f"key length {key.shape[-1]} does not match n={h.n}")
    gathered = key[..., h.edge_col].reshape(*key.shape[:-1], h.m, h.row_weight)
    return np.bitwise_xor.reduce(gathered.astype(np.uint8), axis=-1)


# ---------------------------------------------------------------------------
# column-weight distribution search (Monte-Carlo density evolution on BSC)
# ---------------------------------------------------------------------------

def _candidate_distributions(n: int, edges: int, weights=range(2, 9)):
    """Integer column-weight distributions {weight: count} matching the
    column count and edge total, with at most three distinct weights."""
    weights = sorted(weights)
    seen = set()
    out = []

    def add(dist):
        key = tuple(sorted(dist.items()))
        if key not in seen and all(c > 0 for c in dist.values()):
            seen.add(key)
            out.append(dict(dist))

    if edges % n == 0 and edges // n in weights:
        add({edges // n: n})
    for i, w1 in enumerate(weights):
        for w2 in weights[i + 1:]:
            n2, r = divmod(edges - w1 * n, w2 - w1)
            if r == 0 and 0 < n2 < n:
                add({w1: n - n2, w2: n2})
            for w3 in weights:
                if w3 <= w2:
                    continue
                step = max(1, n // 16)
                for n1 in range(step, n, step):
                    rem_cols = n - n1
                    n3, r3 = divmod(edges - w1 * n1 - w2 * rem_cols, w3 - w2)
                    if r3 == 0 and 0 < n3 < rem_cols:
                        add({w1: n1, w2: rem_cols - n3, w3: n3})
    return out


def _de_passes(dist: dict[int, int], row_weight: int, qber: float,
               rng: np.random.Generator, population: int = 8192,
               max_iter: int = 120, target: float = 1e-4) -> bool:
    """Population-dynamics density evolution: does sum-product decoding of
    the ensemble drive the edge error probability to ``target`` on a BSC?"""
    edges = sum(w * c for w, c in dist.items())
    lam = {w: w * c / edges for w, c in dist.items()}  # edge-perspective
    degs = np.array(sorted(lam))
    probs = np.array([lam[d] for d in degs])
    llr0 = math.log((1.0 - qber) / qber)
    ch = np.where(rng.random(population) < qber, -llr0, llr0)
    msg = ch.copy()
    recent: list[float] = []
    for _ in range(max_iter):
        # check node: tanh rule over row_weight - 1 sampled inputs
        picks = msg[rng.integers(0, population, size=(population, row_weight - 1))]
        t = np.prod(np.tanh(0.5 * picks), axis=1)
        cmsg = 2.0 * np.arctanh(np.clip(t, -1 + 1e-12, 1 - 1e-12))
        # variable node: channel + (dv - 1) sampled check messages
        dv = degs[rng.choice(len(degs), size=population, p=probs)]
        acc = np.where(rng.random(population) < qber, -llr0, llr0)
        for d in degs:
            sel = dv == d
            cnt = int(sel.sum())
            if cnt and d > 1:
                acc[sel] += cmsg[rng.integers(0, population, size=(cnt, d - 1))].sum(axis=1)
        msg = np.clip(acc, -60.0, 60.0)
        p_err = float(np.mean(msg < 0))
        if p_err < target:
            return True
        # stalled well above the target: declare failure early
        recent.append(p_err)
        if len(recent) > 15:
            recent.pop(0)
            if p_err > 20 * target and p_err > 0.98 * recent[0]:
                return False
    return False


_DISTRIBUTION_CACHE: dict = {}


def select_column_distribution(n: int, m: int, row_weight: int, target_qber: float,
                               seed: int = 1) -> dict[int, int]:
    """Pick the column-weight distribution with the highest estimated
    decoding threshold among the feasible candidates."""
    key = (n, m, row_weight, round(target_qber, 6), seed)
    if key in _DISTRIBUTION_CACHE:
        return dict(_DISTRIBUTION_CACHE[key])
    edges = m * row_weight
    candidates = _candidate_distributions(n, edges)
    if not candidates:
        raise DesignInfeasibleError(
            f"no column-weight distribution over 2..8 matches n={n}, edges={edges}")
    levels = [target_qber + k * 0.0025 for k in range(8)]
    best, best_score = None, -1
    for idx, dist in enumerate(candidates):
        rng = np.random.default_rng(seed + 1000 * idx)
        score = -1
        for li, q in enumerate(levels):
            if not _de_passes(dist, row_weight, q, rng):
                break
            score = li
        # ties: prefer a larger minimum column weight (fewer fragile columns)
        rank = (score, min(dist))
        if best is None or rank > (best_score, min(best)):
            best, best_score = dist, score
    if best_score < 0:
        raise DesignInfeasibleError(
            f"no candidate distribution decodes at QBER {target_qber} "
            f"(rate margin too small)")
    _DISTRIBUTION_CACHE[key] = dict(best)
    return best


# ---------------------------------------------------------------------------
# progressive-edge-growth style placement
# ---------------------------------------------------------------------------

def _place_edges(n: int, m: int, row_weight: int, col_weights: np.ndarray,
                 rng: np.random.Generator):
    """Greedy placement; returns (rows_per_column, four_cycle_count)."""
    row_fill = np.zeros(m, dtype=np.int64)
    rows_of_col: list[list[int]] = [[] for _ in range(n)]
    cols_of_row: list[list[int]] = [[] for _ in range(m)]
    four_cycles = 0
    # heaviest columns first: they are the most constrained, so they get
    # first pick while the checks are still empty
    order = np.lexsort((rng.random(n), -col_weights))
    for j in order:
        for _ in range(int(col_weights[j])):
            mine = set(rows_of_col[j])
            free = [i for i in range(m) if row_fill[i] < row_weight and i not in mine]
            if not free:
                raise DesignInfeasibleError(
                    "ran out of admissible checks; reduce weights or retry")
            # rows that would close a 4-cycle: adjacent to a column already
            # sharing a check with j
            two_step_cols = set()
            for i in mine:
                two_step_cols.update(cols_of_row[i])
            two_step_cols.discard(j)
            bad = {i for jj in two_step_cols for i in rows_of_col[jj]}
            good = [i for i in free if i not in bad]
            pool = good if good else free
            fills = row_fill[pool]
            least = [i for i, f in zip(pool, fills) if f == fills.min()]
            pick = int(least[rng.integers(len(least))])
            if not good:
                four_cycles += 1
            rows_of_col[j].append(pick)
            cols_of_row[pick].append(int(j))
            row_fill[pick] += 1
    return rows_of_col, cols_of_row, four_cycles


def design_matrix(n: int, target_qber: float, row_weight: int,
                  rate_margin: float | None = None, m: int | None = None,
                  column_weights: dict[int, int] | None = None,
                  rng: np.random.Generator | None = None,
                  max_attempts: int = 20) -> ParityCheckMatrix:
    """Design an irregular code for one-way reconciliation at ``target_qber``.

    Exactly one of ``rate_margin`` (multiplier on the Shannon minimum
    n*H2(qber)) and ``m`` fixes the number of checks.  Configurations below
    the Shannon bound are rejected.  ``column_weights`` overrides the
    distribution search.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if not 0.0 < target_qber < 0.5:
        raise ValueError("target_qber must be in (0, 0.5)")
    shannon_min = n * binary_entropy(target_qber)
    if (m is None) == (rate_margin is None):
        raise ValueError("specify exactly one of m and rate_margin")
    if m is None:
        m = int(round(shannon_min * rate_margin))
    if m < shannon_min:
        raise DesignInfeasibleError(
            f"m={m} below the Shannon minimum n*H2(qber) = {shannon_min:.1f}")
    if m >= n:
        raise DesignInfeasibleError("m must be below n for a positive rate")
    edges = m * row_weight
    if edges < 2 * n:
        raise DesignInfeasibleError("fewer than two edges per column on average")
    if column_weights is None:
        column_weights = select_column_distribution(n, m, row_weight, target_qber)
    if sum(column_weights.values()) != n or \
            sum(w * c for w, c in column_weights.items()) != edges:
        raise DesignInfeasibleError(
            f"column distribution {column_weights} does not match n={n}, edges={edges}")
    per_col = np.repeat([int(w) for w in sorted(column_weights)],
                        [column_weights[w] for w in sorted(column_weights)])
    if per_col.max() > m:
        raise DesignInfeasibleError("column weight exceeds the number of checks")
    last_err: Exception | None = None
    for _ in range(max_attempts):
        weights = per_col[rng.permutation(n)]
        try:
            _, cols_of_row, cycles = _place_edges(n, m, row_weight, weights, rng)
        except DesignInfeasibleError as err:
            last_err = err
            continue
        edge_col = np.concatenate([np.sort(np.asarray(c, dtype=np.int64))
                                   for c in cols_of_row])
        return ParityCheckMatrix(n=n, m=m, row_weight=row_weight,
                                 edge_col=edge_col, four_cycles=cycles)
    raise DesignInfeasibleError(f"placement failed after {max_attempts} attempts: {last_err}")


# ---------------------------------------------------------------------------
# alist interchange format
# ---------------------------------------------------------------------------

def write_alist(h: ParityCheckMatrix, path) -> None:
    """Canonical alist: 1-based indices, ascending, zero-padded columns/rows."""
    col_w = h.column_weights
    wmax = int(col_w.max())
    grid = h.edge_col.reshape(h.m, h.row_weight)
    rows_of_col: list[list[int]] = [[] for _ in range(h.n)]
    for i in range(h.m):
        for j in grid[i]:
            rows_of_col[int(j)].append(i + 1)
    lines = [f"{h.n} {h.m}", f"{wmax} {h.row_weight}",
             " ".join(str(int(w)) for w in col_w),
             " ".join(str(h.row_weight) for _ in range(h.m))]
    for j in range(h.n):
        entries = sorted(rows_of_col[j]) + [0] * (wmax - len(rows_of_col[j]))
        lines.append(" ".join(str(e) for e in entries))
    for i in range(h.m):
        lines.append(" ".join(str(int(j) + 1) for j in np.sort(grid[i])))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_alist(path) -> ParityCheckMatrix:
    with open(path) as fh:
        tokens_per_line = [line.split() for line in fh.read().splitlines() if line.strip()]
    try:
        n, m = int(tokens_per_line[0][0]), int(tokens_per_line[0][1])
        row_lines = tokens_per_line[4 + n: 4 + n + m]
        if len(row_lines) != m:
            raise IndexError
        rows = [[int(t) - 1 for t in line if int(t) != 0] for line in row_lines]
    except (IndexError, ValueError) as err:
        raise ValueError(f"unreadable alist file {path}: {err}") from None
    return ParityCheckMatrix.from_rows(n, rows)
