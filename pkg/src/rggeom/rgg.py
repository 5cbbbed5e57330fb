"""Random geometric graphs with keyed edge variates.

Vertex ``i`` carries a latent point ``X_i`` drawn uniformly from the
manifold, and the pair ``{i, j}`` is an edge iff ``U_ij <= p(|X_i - X_j|)``
where ``U_ij`` is the keyed uniform for ``(seed, min(i,j), max(i,j))``.

Because every ``U_ij`` is a pure function of its key, the adjacency matrix
never has to be stored: any block of it can be recomputed on demand with
bit-identical results.  Small graphs are materialized as bit-packed rows of
64-bit words; large graphs answer block queries lazily.  Either way the
reconstruction code only sees adjacency, never the latent points.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field

import numpy as np

from . import manifold as mf
from .errors import AccessError, ConfigError, DomainError
from .fileio import atomic_write
from .linkfn import LinkFunction, eval_link
from .streams import _seed_key, pair_uniforms, stream

try:
    from . import _fastedge as _fast
except ImportError:  # pragma: no cover - numba missing
    _fast = None

MATERIALIZE_LIMIT = 8192
_BLOCK_PAIRS = 1 << 21
_HEADER_RE = re.compile(r"#\s*rgg v1 n=(\d+) seed=(-?\d+)")


def vertex_set(vertices) -> np.ndarray:
    """Normalize to a sorted array of unique int64 vertex indices."""
    return np.unique(np.asarray(vertices, dtype=np.int64).ravel())


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack a boolean matrix row-wise into uint64 words (little bit order)."""
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    rows, cols = bits.shape
    words = -(-cols // 64)
    padded = np.zeros((rows, words * 64), dtype=bool)
    padded[:, :cols] = bits
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64)


def unpack_rows(words: np.ndarray, cols: int) -> np.ndarray:
    bits = np.unpackbits(np.ascontiguousarray(words).view(np.uint8), axis=1, bitorder="little")
    return bits[:, :cols].astype(bool)


def popcount(words: np.ndarray, axis=-1) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=axis, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class GeometricGraph:
    vertex_count: int
    seed: int
    model_tag: str
    link_tag: str
    _latents: np.ndarray | None = field(default=None, repr=False)
    _link: LinkFunction | None = field(default=None, repr=False)
    _packed: np.ndarray | None = field(default=None, repr=False)
    evaluation: bool = False

    # -- evaluation boundary -------------------------------------------------

    @property
    def latents(self) -> np.ndarray:
        """Latent positions; only available on an evaluation view."""
        if not self.evaluation:
            raise AccessError("latent positions require the evaluation capability")
        if self._latents is None:
            raise AccessError("this graph carries no latent positions")
        return self._latents

    def with_evaluation(self) -> "GeometricGraph":
        return dataclasses.replace(self, evaluation=True)

    def without_evaluation(self) -> "GeometricGraph":
        return dataclasses.replace(self, evaluation=False)

    @property
    def materialized(self) -> bool:
        return self._packed is not None

    # -- adjacency -------------------------------------------------------------

    def adjacency_block(self, rows, cols) -> np.ndarray:
        """Boolean adjacency between index arrays ``rows`` and ``cols``."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        self._check_indices(rows)
        self._check_indices(cols)
        if self._packed is not None:
            bits = unpack_rows(self._packed[rows], self.vertex_count)
            return bits[:, cols]
        return _edge_block(self._latents, self._link, self.seed, rows, cols)

    def packed_rows(self, rows, cols) -> np.ndarray:
        """Rows of the adjacency restricted to ``cols``, packed into words."""
        rows = np.asarray(rows, dtype=np.int64)
        if self._packed is not None and len(cols) == self.vertex_count:
            return self._packed[rows]
        return pack_rows(self.adjacency_block(rows, cols))

    def mask(self, S) -> np.ndarray:
        """Packed bit mask of the vertex set ``S`` over all vertices."""
        bits = np.zeros(self.vertex_count, dtype=bool)
        bits[np.asarray(S, dtype=np.int64)] = True
        return pack_rows(bits)[0]

    def neighbor_count_in(self, i: int, S) -> int:
        """``|N(i) & S|``; ``i`` itself never counts."""
        self._check_indices(np.asarray([i]))
        S = vertex_set(S)
        if len(S) == 0:
            return 0
        if self._packed is not None:
            return int(popcount(self._packed[i] & self.mask(S)))
        return int(popcount(self.packed_rows([i], S)[0]))

    def common_neighbor_count_in(self, i: int, j: int, W) -> int:
        """``|N_W(i) & N_W(j)|`` by AND + popcount on packed rows."""
        if i == j:
            raise DomainError("common neighbours need two distinct vertices")
        W = vertex_set(W)
        if len(W) == 0:
            return 0
        if self._packed is not None:
            self._check_indices(np.asarray([i, j]))
            return int(popcount(self._packed[i] & self._packed[j] & self.mask(W)))
        rows = self.packed_rows([i, j], W)
        return int(popcount(rows[0] & rows[1]))

    def neighbor_counts(self, rows, S) -> np.ndarray:
        """Vector of ``|N(i) & S|`` over ``i`` in ``rows``."""
        S = np.asarray(S, dtype=np.int64)
        rows = np.asarray(rows, dtype=np.int64)
        if len(S) == 0 or len(rows) == 0:
            return np.zeros(len(rows), dtype=np.int64)
        return self.adjacency_block(rows, S).sum(axis=1, dtype=np.int64)

    def neighbor_ratios(self, rows, S) -> np.ndarray:
        """``|N(i) & S| / |S|`` over ``i`` in ``rows``."""
        return self.neighbor_counts(rows, S) / len(S)

    def common_neighbor_matrix(self, V2, W) -> np.ndarray:
        """All-pairs common neighbour counts ``|N_W(i) & N_W(j)|`` on ``V2``.

        Uses a float32 matrix product, which is exact for counts below 2^24.
        The single-pair popcount path gives identical numbers.
        """
        V2 = np.asarray(V2, dtype=np.int64)
        W = np.asarray(W, dtype=np.int64)
        if len(W) >= 1 << 24:
            raise DomainError("batch too large for exact float32 counting")
        A = self.adjacency_block(V2, W).astype(np.float32)
        return np.rint(A @ A.T).astype(np.int64)

    def _check_indices(self, idx: np.ndarray):
        if idx.size and (idx.min() < 0 or idx.max() >= self.vertex_count):
            raise DomainError("vertex index out of range")

    # -- export ----------------------------------------------------------------

    def iter_edges(self, block: int = 1024):
        """Yield ``(i, j)`` with ``i < j`` in lexicographic order."""
        all_v = np.arange(self.vertex_count)
        for start in range(0, self.vertex_count, block):
            rows = all_v[start:start + block]
            bits = self.adjacency_block(rows, all_v)
            for k, i in enumerate(rows):
                for j in np.flatnonzero(bits[k, i + 1:]) + i + 1:
                    yield int(i), int(j)

    def write_edge_list(self, path):
        lines = [f"# rgg v1 n={self.vertex_count} seed={self.seed}\n"]
        lines.extend(f"{i} {j}\n" for i, j in self.iter_edges())
        atomic_write(path, "".join(lines))

    def write_latents_csv(self, path):
        X = self.latents
        header = "index," + ",".join(f"x{k}" for k in range(X.shape[1])) + "\n"
        body = "".join(
            f"{i}," + ",".join(f"{v:.17g}" for v in row) + "\n" for i, row in enumerate(X)
        )
        atomic_write(path, header + body)


def generate(model: mf.ManifoldModel, link: LinkFunction, vertex_count: int, seed: int,
             materialize: bool | None = None) -> GeometricGraph:
    """Sample latents and realize the graph.

    ``materialize=None`` stores packed rows when the graph is small enough;
    otherwise edges are recomputed from the keyed variates on each query.
    """
    if vertex_count < 2:
        raise ConfigError("a graph needs at least two vertices")
    if link.D < model.diam_euc:
        raise ConfigError("link domain bound D must cover the manifold diameter")
    latents = mf.sample_points(model, stream(seed, "latents"), vertex_count)
    graph = GeometricGraph(
        vertex_count=int(vertex_count), seed=int(seed), model_tag=model.tag, link_tag=link.tag,
        _latents=latents, _link=link,
    )
    if materialize is None:
        materialize = vertex_count <= MATERIALIZE_LIMIT
    if materialize:
        all_v = np.arange(vertex_count)
        packed = np.concatenate([
            pack_rows(_edge_block(latents, link, seed, all_v[s:s + 512], all_v))
            for s in range(0, vertex_count, 512)
        ])
        graph = dataclasses.replace(graph, _packed=packed)
    return graph


def from_edge_list(path) -> GeometricGraph:
    """Load an exported edge list; the result has no latent positions."""
    with open(path) as fh:
        header = fh.readline()
        m = _HEADER_RE.match(header.strip())
        if not m:
            raise ConfigError(f"bad edge-list header: {header.strip()!r}")
        n, seed = int(m.group(1)), int(m.group(2))
        data = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    bits = np.zeros((n, n), dtype=bool)
    if data.size:
        bits[data[:, 0], data[:, 1]] = True
        bits[data[:, 1], data[:, 0]] = True
    return GeometricGraph(n, seed, "unknown", "unknown", _packed=pack_rows(bits))


def _edge_block(latents, link, seed, rows, cols) -> np.ndarray:
    if len(rows) == 0 or len(cols) == 0:
        return np.empty((len(rows), len(cols)), dtype=bool)
    if _fast is not None:
        return _fast.edge_block(latents, rows, cols, _seed_key(seed),
                                _fast.FAMILY_CODES[link.family], link.a, link.b)
    return _edge_block_numpy(latents, link, seed, rows, cols)


def _edge_block_numpy(latents, link, seed, rows, cols) -> np.ndarray:
    out = np.empty((len(rows), len(cols)), dtype=bool)
    step = max(1, _BLOCK_PAIRS // max(1, len(cols)))
    Xc = latents[cols]
    for s in range(0, len(rows), step):
        r = rows[s:s + step]
        diff = latents[r][:, None, :] - Xc[None, :, :]
        sq = diff[..., 0] * diff[..., 0]
        for k in range(1, diff.shape[-1]):
            sq += diff[..., k] * diff[..., k]
        u = pair_uniforms(seed, r[:, None], cols[None, :])
        block = u <= eval_link(link, np.sqrt(sq))
        block &= r[:, None] != cols[None, :]
        out[s:s + step] = block
    return out
