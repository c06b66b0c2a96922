"""Equidistant binning of the confounder and merging of sparse bins."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CannotSatisfy, DegenerateRange, InvalidInput, TooManyBins


@dataclass(frozen=True)
class BinPartition:
    """Contiguous intervals over the confounder range.

    Bin ``j`` covers ``[edges[j], edges[j + 1])``; the last bin is closed on
    the right. ``assignments[i]`` is the bin of observation ``i``.
    """

    edges: np.ndarray
    assignments: np.ndarray
    counts: np.ndarray
    m_initial: int

    @property
    def number_of_bins(self) -> int:
        return len(self.counts)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == j)


def default_m(n: int) -> int:
    """Initial bin count used when none is given: ``round(2 * sqrt(n))``, capped at n."""
    return max(1, min(n, int(round(2.0 * np.sqrt(n)))))


def make_bins(u_values, m: int) -> BinPartition:
    u = np.asarray(u_values, dtype=float).ravel()
    if u.size == 0:
        raise InvalidInput("no confounder values")
    if not np.all(np.isfinite(u)):
        raise InvalidInput("confounder contains non-finite values")
    if m < 1:
        raise InvalidInput("m must be at least 1")
    if m > u.size:
        raise TooManyBins(f"m={m} exceeds n={u.size}")
    lo, hi = float(u.min()), float(u.max())
    if hi == lo:
        if m > 1:
            raise DegenerateRange("all confounder values are equal")
        edges = np.array([lo, hi])
        assignments = np.zeros(u.size, dtype=np.intp)
    else:
        edges = np.linspace(lo, hi, m + 1)
        # right-closure of the last bin comes from the clip
        assignments = np.searchsorted(edges, u, side="right") - 1
        assignments = np.clip(assignments, 0, m - 1).astype(np.intp)
    counts = np.bincount(assignments, minlength=m)
    return BinPartition(edges=edges, assignments=assignments, counts=counts, m_initial=m)


def merge_sparse_bins(partition: BinPartition, min_bin_size: int) -> BinPartition:
    """Merge bins holding fewer than ``min_bin_size`` points into a neighbour.

    Bins are scanned left to right. A sparse bin joins whichever adjacent bin
    currently holds fewer points, preferring the left one on ties; the scan
    restarts after each merge until every bin is large enough or only one
    bin is left.
    """
    if min_bin_size < 1:
        raise InvalidInput("min_bin_size must be at least 1")
    counts = [int(c) for c in partition.counts]
    if sum(counts) < min_bin_size:
        raise CannotSatisfy(f"n={sum(counts)} < min_bin_size={min_bin_size}")

    # groups[k] lists the original bin indices that make up merged bin k
    groups = [[j] for j in range(len(counts))]
    while len(counts) > 1:
        sparse = next((k for k, c in enumerate(counts) if c < min_bin_size), None)
        if sparse is None:
            break
        if sparse == 0:
            target = 1
        elif sparse == len(counts) - 1:
            target = sparse - 1
        else:
            target = sparse - 1 if counts[sparse - 1] <= counts[sparse + 1] else sparse + 1
        a, b = min(sparse, target), max(sparse, target)
        counts[a] += counts[b]
        groups[a].extend(groups[b])
        del counts[b], groups[b]

    relabel = np.empty(len(partition.counts), dtype=np.intp)
    for k, members in enumerate(groups):
        relabel[members] = k
    edges = np.array(
        [partition.edges[g[0]] for g in groups] + [partition.edges[-1]], dtype=float
    )
    return BinPartition(
        edges=edges,
        assignments=relabel[partition.assignments],
        counts=np.asarray(counts, dtype=np.intp),
        m_initial=partition.m_initial,
    )


def default_min_bin_size(p: int) -> int:
    """Smallest bin that leaves one residual degree of freedom for ``p`` predictors."""
    return p + 2


def bin_data(u_values, m: int, min_bin_size: int) -> BinPartition:
    return merge_sparse_bins(make_bins(u_values, m), min_bin_size)
