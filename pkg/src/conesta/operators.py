"""Sparse structure operators for grid total variation and group penalties.

An operator is a sparse matrix A together with an ordered partition of its
rows into contiguous per-group blocks A_g.  Structured penalties built from
it all take the form

    s(beta) = sum_g || A_g beta ||_2,

which covers forward-difference total variation on masked 1D/2D/3D grids
(one group per cell, one row per in-mask forward neighbour) and weighted,
possibly overlapping, group lasso (one single-entry row per group member).

Row and group ordering is fully deterministic: groups follow the linear cell
index of the mask (C order), rows inside a TV group follow the i, j, k
directions.  Two builds from the same mask are bit-identical.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .linalg import largest_eigenvalue_sym

__all__ = [
    "GridMask",
    "LinearStructureOperator",
    "build_tv_operator",
    "build_group_lasso_operator",
    "parse_mask_text",
    "format_mask_text",
    "read_mask_file",
    "write_mask_file",
]

_FORWARD_STEPS = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


class GridMask:
    """Boolean occupancy mask on a d1 x d2 x d3 grid with a linear cell index.

    In-mask cells are numbered 0..p-1 in C order over (i, j, k), which fixes
    the layout of every operator built on the mask.  1D and 2D masks are
    stored with trailing dimensions of size one.

    Parameters
    ----------
    inside : array-like of bool
        Occupancy array with 1, 2 or 3 dimensions.
    """

    def __init__(self, inside):
        arr = np.asarray(inside, dtype=bool)
        if arr.ndim == 0 or arr.ndim > 3:
            raise ValueError("mask must be 1-, 2- or 3-dimensional")
        arr = arr.reshape(arr.shape + (1,) * (3 - arr.ndim))
        self.inside = arr
        self.dims = arr.shape
        index = np.full(arr.shape, -1, dtype=np.int64)
        index[arr] = np.arange(int(arr.sum()), dtype=np.int64)
        self._index = index

    @property
    def p(self) -> int:
        """Number of in-mask cells."""
        return int(self.inside.sum())

    def phi(self, i, j=0, k=0) -> int:
        """Linear index of cell (i, j, k), or -1 if the cell is outside."""
        return int(self._index[i, j, k])

    @classmethod
    def full(cls, dims) -> "GridMask":
        """All-inside mask for the given grid shape."""
        dims = tuple(int(d) for d in np.atleast_1d(dims))
        return cls(np.ones(dims, dtype=bool))

    @classmethod
    def chain(cls, p) -> "GridMask":
        """Full 1D mask of length p."""
        return cls.full((int(p),))

    def __repr__(self):
        return f"GridMask(dims={self.dims}, p={self.p})"


class LinearStructureOperator:
    """Sparse linear operator with contiguous per-group row blocks.

    Instances are immutable after construction; the spectral norm is computed
    on first request and cached write-once, so a single operator can be
    shared by concurrent solver runs.

    Parameters
    ----------
    n_rows, n_cols : int
        Operator shape.
    rows, cols, vals : array-like
        Coordinate triples of the nonzero entries, ordered by row.
    group_ptr : array-like of int
        Offsets of length n_groups + 1; group g owns rows
        group_ptr[g]..group_ptr[g+1]-1.  Empty groups are allowed.
    """

    def __init__(self, n_rows, n_cols, rows, cols, vals, group_ptr):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        ptr = np.asarray(group_ptr, dtype=np.int64)
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise ValueError("rows, cols and vals must be 1D arrays of equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= self.n_rows):
            raise ValueError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise ValueError("column index out of range")
        if ptr.ndim != 1 or ptr.size < 1 or ptr[0] != 0 or ptr[-1] != self.n_rows:
            raise ValueError("group_ptr must run from 0 to n_rows")
        if np.any(np.diff(ptr) < 0):
            raise ValueError("group_ptr must be nondecreasing")
        self.rows = rows
        self.cols = cols
        self.vals = vals
        self.group_ptr = ptr
        self._mat = sp.csr_matrix(
            (vals, (rows, cols)), shape=(self.n_rows, self.n_cols)
        )
        self._mat_t = self._mat.T.tocsr()
        self._group_of_row = np.repeat(
            np.arange(self.n_groups, dtype=np.int64), np.diff(ptr)
        )
        self._single_row_groups = bool(np.all(np.diff(ptr) <= 1))
        self._spectral_norm = None

    @property
    def n_groups(self) -> int:
        return self.group_ptr.size - 1

    @property
    def n_nonempty_groups(self) -> int:
        return int(np.count_nonzero(np.diff(self.group_ptr)))

    @property
    def entries(self):
        """Coordinate triples (rows, cols, vals) of the nonzero entries."""
        return self.rows, self.cols, self.vals

    def group_row_ranges(self):
        """Iterate over (start, stop) row ranges, one per group."""
        for g in range(self.n_groups):
            yield int(self.group_ptr[g]), int(self.group_ptr[g + 1])

    def apply(self, beta) -> np.ndarray:
        """Compute A beta."""
        beta = np.asarray(beta, dtype=np.float64).ravel()
        if beta.size != self.n_cols:
            raise ValueError(f"expected a vector of length {self.n_cols}, got {beta.size}")
        if self.n_rows == 0:
            return np.zeros(0)
        return self._mat @ beta

    def apply_transpose(self, alpha) -> np.ndarray:
        """Compute A^T alpha."""
        alpha = np.asarray(alpha, dtype=np.float64).ravel()
        if alpha.size != self.n_rows:
            raise ValueError(f"expected a vector of length {self.n_rows}, got {alpha.size}")
        if self.n_rows == 0:
            return np.zeros(self.n_cols)
        return self._mat_t @ alpha

    def group_norms(self, r) -> np.ndarray:
        """Per-group Euclidean norms of a row-space vector of length n_rows."""
        r = np.asarray(r, dtype=np.float64).ravel()
        sq = np.bincount(self._group_of_row, weights=r * r, minlength=self.n_groups)
        return np.sqrt(sq)

    def spectral_norm(self, tol=1e-10) -> float:
        """Largest singular value ||A||_2, cached after the first call."""
        if self._spectral_norm is None:
            if self.n_rows == 0 or self.vals.size == 0:
                value = 0.0
            else:
                lam = largest_eigenvalue_sym(
                    lambda v: self._mat_t @ (self._mat @ v), self.n_cols, tol
                )
                value = float(np.sqrt(max(lam, 0.0)))
            self._spectral_norm = value
        return self._spectral_norm

    def dense(self) -> np.ndarray:
        """Dense copy of A (small operators / tests only)."""
        return self._mat.toarray()

    def __repr__(self):
        return (
            f"LinearStructureOperator({self.n_rows}x{self.n_cols}, "
            f"{self.vals.size} entries, {self.n_groups} groups)"
        )


def build_tv_operator(mask: GridMask) -> LinearStructureOperator:
    """Forward-difference total-variation operator on a masked grid.

    One group per in-mask cell.  The group of cell (i, j, k) has one row per
    in-mask forward neighbour -- (i+1, j, k), (i, j+1, k), (i, j, k+1), in
    that order -- computing beta[neighbour] - beta[cell].  Cells without any
    in-mask forward neighbour contribute an empty group.  Rows whose
    neighbour falls outside the mask are removed entirely.
    """
    p = mask.p
    if p == 0:
        raise ValueError("cannot build a TV operator on an empty mask")
    inside = mask.inside
    index = mask._index

    cells = []
    nbrs = []
    dirs = []
    for axis in range(3):
        if mask.dims[axis] < 2:
            continue
        src = [slice(None)] * 3
        dst = [slice(None)] * 3
        src[axis] = slice(0, mask.dims[axis] - 1)
        dst[axis] = slice(1, None)
        both = inside[tuple(src)] & inside[tuple(dst)]
        cells.append(index[tuple(src)][both])
        nbrs.append(index[tuple(dst)][both])
        dirs.append(np.full(int(both.sum()), axis, dtype=np.int64))

    if cells:
        cell = np.concatenate(cells)
        nbr = np.concatenate(nbrs)
        direction = np.concatenate(dirs)
        order = np.lexsort((direction, cell))
        cell = cell[order]
        nbr = nbr[order]
    else:
        cell = np.zeros(0, dtype=np.int64)
        nbr = np.zeros(0, dtype=np.int64)

    n_rows = cell.size
    rows = np.repeat(np.arange(n_rows, dtype=np.int64), 2)
    cols = np.column_stack([cell, nbr]).ravel() if n_rows else np.zeros(0, np.int64)
    vals = np.tile(np.array([-1.0, 1.0]), n_rows)
    counts = np.bincount(cell, minlength=p)
    group_ptr = np.concatenate([[0], np.cumsum(counts)])
    return LinearStructureOperator(n_rows, p, rows, cols, vals, group_ptr)


def build_group_lasso_operator(groups, weights, p) -> LinearStructureOperator:
    """Operator for a weighted (possibly overlapping) group-lasso penalty.

    Group g contributes one row per member index holding weight_g at that
    column, so that ||A_g beta||_2 = weight_g * ||beta_g||_2 and the full
    penalty is sum_g weight_g * ||beta_g||_2.

    Parameters
    ----------
    groups : sequence of index collections
        Member indices of each group, 0-based; groups may overlap.  Member
        indices are sorted within each group for a reproducible row layout.
    weights : float or sequence of float
        Positive per-group weight (a scalar is broadcast to all groups).
    p : int
        Number of columns (features).
    """
    p = int(p)
    if p <= 0:
        raise ValueError("p must be positive")
    member_lists = [np.asarray(sorted(int(i) for i in g), dtype=np.int64) for g in groups]
    n_groups = len(member_lists)
    if np.isscalar(weights):
        w = np.full(n_groups, float(weights))
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n_groups,):
            raise ValueError("need one weight per group")
    if n_groups and np.any(w <= 0):
        raise ValueError("group weights must be positive")
    for members in member_lists:
        if members.size and (members[0] < 0 or members[-1] >= p):
            raise ValueError("group index out of range")

    sizes = np.array([m.size for m in member_lists], dtype=np.int64)
    n_rows = int(sizes.sum())
    cols = np.concatenate(member_lists) if n_groups else np.zeros(0, np.int64)
    vals = np.repeat(w, sizes) if n_groups else np.zeros(0)
    rows = np.arange(n_rows, dtype=np.int64)
    group_ptr = np.concatenate([[0], np.cumsum(sizes)]) if n_groups else np.zeros(1, np.int64)
    return LinearStructureOperator(n_rows, p, rows, cols, vals, group_ptr)


def parse_mask_text(text: str) -> GridMask:
    """Parse the plain-text mask format.

    The first line is ``dims D1 D2 D3``; then D3 blocks follow, each with D1
    lines of D2 space-separated 0/1 integers, blocks separated by blank
    lines (blank lines are accepted anywhere after the header).
    """
    lines = [ln.strip() for ln in text.splitlines()]
    nonblank = [ln for ln in lines if ln]
    if not nonblank:
        raise ValueError("empty mask file")
    header = nonblank[0].split()
    if len(header) != 4 or header[0] != "dims":
        raise ValueError("mask file must start with 'dims D1 D2 D3'")
    try:
        d1, d2, d3 = (int(t) for t in header[1:])
    except ValueError as exc:
        raise ValueError("mask dimensions must be integers") from exc
    if min(d1, d2, d3) < 1:
        raise ValueError("mask dimensions must be positive")
    body = nonblank[1:]
    if len(body) != d1 * d3:
        raise ValueError(f"expected {d1 * d3} data lines, got {len(body)}")
    values = np.zeros((d3, d1, d2), dtype=bool)
    for pos, line in enumerate(body):
        tokens = line.split()
        if len(tokens) != d2:
            raise ValueError(f"line {pos + 2}: expected {d2} values, got {len(tokens)}")
        if any(t not in ("0", "1") for t in tokens):
            raise ValueError(f"line {pos + 2}: mask values must be 0 or 1")
        values[pos // d1, pos % d1] = [t == "1" for t in tokens]
    return GridMask(np.transpose(values, (1, 2, 0)))


def format_mask_text(mask: GridMask) -> str:
    """Serialize a mask in the plain-text format accepted by parse_mask_text."""
    d1, d2, d3 = mask.dims
    out = [f"dims {d1} {d2} {d3}"]
    for k in range(d3):
        for i in range(d1):
            out.append(" ".join("1" if mask.inside[i, j, k] else "0" for j in range(d2)))
        if k + 1 < d3:
            out.append("")
    return "\n".join(out) + "\n"


def read_mask_file(path) -> GridMask:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_mask_text(fh.read())


def write_mask_file(mask: GridMask, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_mask_text(mask))
