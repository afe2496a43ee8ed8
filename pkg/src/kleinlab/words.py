"""Reduced words in a free group and folded subgroup graphs.

Letters are encoded as small integers: generator ``i`` with exponent +1 is
``2*i`` and with exponent -1 is ``2*i + 1``, so ``code ^ 1`` is the inverse
letter.  Word arrays are int8 matrices padded with -1 on the right.
"""

from __future__ import annotations

import re
from collections import defaultdict

import numpy as np

from .errors import BudgetExceededError, KleinlabError

DEFAULT_WORD_CAP = 10**7


def letter(gen: int, exp: int) -> int:
    if exp not in (1, -1):
        raise KleinlabError("exponent must be +1 or -1")
    return 2 * gen + (exp == -1)


class Word(tuple):
    """A freely reduced word, stored as a tuple of letter codes."""

    def __new__(cls, codes=()):
        out = []
        for c in codes:
            c = int(c)
            if out and out[-1] == c ^ 1:
                out.pop()
            else:
                out.append(c)
        return super().__new__(cls, out)

    @classmethod
    def from_letters(cls, letters) -> "Word":
        return cls(letter(g, e) for g, e in letters)

    @classmethod
    def parse(cls, text: str, names) -> "Word":
        """Parse ``"a b^-1 a"`` (space or ``*`` separated; ``^k`` powers allowed)."""
        index = {name: i for i, name in enumerate(names)}
        codes = []
        for tok in re.split(r"[\s*]+", text.strip()):
            if not tok or tok in ("e", "1"):
                continue
            m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)(?:\^(-?\d+))?", tok)
            if not m or m.group(1) not in index:
                raise KleinlabError(f"cannot parse word token {tok!r}")
            k = int(m.group(2) or 1)
            c = letter(index[m.group(1)], 1 if k > 0 else -1)
            codes.extend([c] * abs(k))
        return cls(codes)

    @property
    def letters(self):
        return [(c >> 1, -1 if c & 1 else 1) for c in self]

    def inverse(self) -> "Word":
        return Word(c ^ 1 for c in reversed(self))

    def __mul__(self, other) -> "Word":
        return Word(tuple(self) + tuple(other))

    def format(self, names) -> str:
        if not self:
            return "e"
        parts = []
        for c in self:
            name = names[c >> 1]
            parts.append(name + ("^-1" if c & 1 else ""))
        return " ".join(parts)

    def __repr__(self):
        return f"Word({list(self)})"


def free_count(k: int, N: int) -> int:
    """Number of reduced words of length <= N on k generators."""
    if k == 0:
        return 1
    total, shell = 1, 2 * k
    for _ in range(N):
        total += shell
        shell *= 2 * k - 1
    return total


def shell_count(k: int, L: int) -> int:
    return 1 if L == 0 else 2 * k * (2 * k - 1) ** (L - 1)


def check_budget(k: int, N: int, cap: int = DEFAULT_WORD_CAP) -> int:
    if N < 0:
        raise KleinlabError("length bound must be nonnegative")
    n = free_count(k, N)
    if n > cap:
        raise BudgetExceededError(f"{n} words up to length {N} exceeds the cap {cap}")
    return n


def extend_left(level: np.ndarray, k: int):
    """All reduced ``s*w`` for ``w`` in ``level`` (rows of one length), in lex order.

    Returns ``(rows, parent_index, letter_code)``; ``level`` must be lex sorted.
    """
    m, L = level.shape
    rows, parents, codes = [], [], []
    for s in range(2 * k):
        if L == 0:
            keep = np.arange(m)
        else:
            keep = np.flatnonzero(level[:, 0] != (s ^ 1))
        new = np.empty((keep.size, L + 1), dtype=np.int8)
        new[:, 0] = s
        new[:, 1:] = level[keep]
        rows.append(new)
        parents.append(keep)
        codes.append(np.full(keep.size, s, dtype=np.int8))
    return np.concatenate(rows), np.concatenate(parents), np.concatenate(codes)


def word_levels(k: int, N: int, cap: int = DEFAULT_WORD_CAP):
    """Yield ``(L, rows)`` for L = 0..N with rows lex sorted."""
    check_budget(k, N, cap)
    level = np.zeros((1, 0), dtype=np.int8)
    yield 0, level
    for L in range(1, N + 1):
        level, _, _ = extend_left(level, k)
        yield L, level


def word_array(k: int, N: int, cap: int = DEFAULT_WORD_CAP):
    """All reduced words up to length N as ``(padded int8 array, lengths)``, shortlex order."""
    blocks, lengths = [], []
    for L, rows in word_levels(k, N, cap):
        pad = np.full((rows.shape[0], N), -1, dtype=np.int8)
        pad[:, :L] = rows
        blocks.append(pad)
        lengths.append(np.full(rows.shape[0], L, dtype=np.int16))
    return np.concatenate(blocks), np.concatenate(lengths)


def enumerate_words(k, N: int, cap: int = DEFAULT_WORD_CAP):
    """Stream every reduced word of length <= N in (length, lex) order.

    ``k`` is the number of generators or anything with a ``rank``.
    """
    k = getattr(k, "rank", k)
    for _, rows in word_levels(k, N, cap):
        for r in rows:
            yield Word(r.tolist())


def row_to_word(row, length=None) -> Word:
    row = np.asarray(row)
    if length is None:
        length = int(np.count_nonzero(row >= 0))
    return Word(row[:length].tolist())


def pad_words(words, width: int | None = None):
    """Padded ``(int8 array, lengths)`` for a list of words (their order is kept)."""
    words = [Word(w) for w in words]
    lengths = np.array([len(w) for w in words], dtype=np.int16)
    width = max(int(lengths.max(initial=0)), 1) if width is None else width
    out = np.full((len(words), width), -1, dtype=np.int8)
    for i, w in enumerate(words):
        out[i, : len(w)] = w
    return out, lengths


def shortlex_sort(words: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Indices sorting padded word rows by (length, lex)."""
    keys = [words[:, j] for j in range(words.shape[1] - 1, -1, -1)]
    keys.append(lengths)
    return np.lexsort(keys)


# ---------------------------------------------------------------------------
# Stallings folding


class SubgroupGraph:
    """Folded graph of a finitely generated subgroup of the free group of rank ``k``.

    Vertex 0 is the base point.  ``table[v, c]`` is the target of the edge
    labelled ``c`` leaving ``v`` (or -1).
    """

    def __init__(self, gens, k: int):
        self.k = k
        self.gens = [Word(g) for g in gens]
        adj = defaultdict(lambda: defaultdict(set))
        nv = 1
        for w in self.gens:
            if not w:
                continue
            cur = 0
            for i, c in enumerate(w):
                if i == len(w) - 1:
                    nxt = 0
                else:
                    nxt = nv
                    nv += 1
                adj[cur][c].add(nxt)
                adj[nxt][c ^ 1].add(cur)
                cur = nxt
        self._fold(adj)

    def _fold(self, adj):
        parent = {}

        def find(v):
            while parent.get(v, v) != v:
                v = parent[v]
            return v

        changed = True
        while changed:
            changed = False
            for v in list(adj):
                for c in list(adj[v]):
                    targets = {find(t) for t in adj[v][c]}
                    if len(targets) > 1:
                        keep = min(targets)
                        for t in targets:
                            if t != keep:
                                parent[t] = keep
                        changed = True
            if changed:
                new = defaultdict(lambda: defaultdict(set))
                for v in adj:
                    for c, ts in adj[v].items():
                        for t in ts:
                            new[find(v)][c].add(find(t))
                adj = new
        verts = sorted({0} | set(adj))
        index = {v: i for i, v in enumerate(verts)}
        table = np.full((len(verts), 2 * self.k), -1, dtype=np.int64)
        for v in adj:
            for c, ts in adj[v].items():
                (t,) = ts
                table[index[v], c] = index[t]
        self.table = table

    @property
    def n_vertices(self) -> int:
        return self.table.shape[0]

    def contains(self, word) -> bool:
        """Exact membership of a reduced word in the subgroup."""
        v = 0
        for c in Word(word):
            v = self.table[v, c]
            if v < 0:
                return False
        return v == 0

    def left_coset_keys(self, words: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        """Complete invariants of the left cosets ``wH`` for padded word rows.

        ``wH`` is determined by reading ``w^{-1}`` from the base vertex: the
        vertex where reading stops plus the unread part of ``w^{-1}``.
        """
        m, N = words.shape
        v = np.zeros(m, dtype=np.int64)
        consumed = np.zeros(m, dtype=np.int64)
        reading = np.ones(m, dtype=bool)
        for j in range(N - 1, -1, -1):
            act = reading & (j < lengths)
            if not act.any():
                continue
            idx = np.flatnonzero(act)
            c = words[idx, j].astype(np.int64) ^ 1
            nxt = self.table[v[idx], c]
            stuck = nxt < 0
            reading[idx[stuck]] = False
            go = idx[~stuck]
            v[go] = nxt[~stuck]
            consumed[go] += 1
        prefix = lengths.astype(np.int64) - consumed
        keys = np.full((m, N + 2), -1, dtype=np.int64)
        keys[:, 0] = v
        keys[:, 1] = prefix
        cols = np.arange(N)
        mask = cols[None, :] < prefix[:, None]
        keys[:, 2:] = np.where(mask, words, -1)
        return keys
