"""Replicate-group discovery by thresholding the score table.

Every pair scoring at most 2 * delta is declared parallel; groups are the
connected components of the resulting pair graph (union-find), which is
the transitive closure of the pairwise relation.  The discovered index
set grows monotonically with delta.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import InvalidArgument
from .score import ScoreTable


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint groups of variable indices plus their union."""

    groups: Tuple[Tuple[int, ...], ...]
    universe: Tuple[int, ...]

    @property
    def g(self) -> int:
        return len(self.groups)

    def group_of(self) -> dict:
        """Map each universe index to its group position."""
        out = {}
        for k, members in enumerate(self.groups):
            for i in members:
                out[i] = k
        return out

    def to_json_dict(self) -> dict:
        return {"universe": list(self.universe), "groups": [list(g) for g in self.groups]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_groups(cls, groups) -> "GroupPartition":
        norm = tuple(tuple(sorted(int(i) for i in g)) for g in groups)
        norm = tuple(sorted(norm, key=lambda g: g[0]))
        universe = tuple(sorted(i for g in norm for i in g))
        if len(universe) != len(set(universe)):
            raise InvalidArgument("groups are not disjoint")
        return cls(groups=norm, universe=universe)


class _UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size

    def find(self, u: int) -> int:
        root = u
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[u] != root:
            self.parent[u], u = root, self.parent[u]
        return root

    def union(self, u: int, v: int) -> None:
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return
        if self.rank[ru] < self.rank[rv]:
            ru, rv = rv, ru
        self.parent[rv] = ru
        if self.rank[ru] == self.rank[rv]:
            self.rank[ru] += 1


def _score_values(scores) -> np.ndarray:
    if isinstance(scores, ScoreTable):
        return scores.values
    return np.asarray(scores, dtype=float)


def find_parallel(scores, delta: float) -> GroupPartition:
    """Group all indices connected through pairs with score <= 2 * delta.

    Indices touching no qualifying pair are left out, so every returned
    group has at least two members.  Groups are ordered by their smallest
    member; the empty partition is a valid output.
    """
    if delta < 0:
        raise InvalidArgument(f"delta must be nonnegative, got {delta}")
    values = _score_values(scores)
    p = values.shape[0]
    iu, ju = np.triu_indices(p, k=1)
    hit = values[iu, ju] <= 2.0 * delta
    uf = _UnionFind(p)
    touched = np.zeros(p, dtype=bool)
    for i, j in zip(iu[hit], ju[hit]):
        uf.union(int(i), int(j))
        touched[i] = touched[j] = True
    components: dict = {}
    for i in np.flatnonzero(touched):
        components.setdefault(uf.find(int(i)), []).append(int(i))
    return GroupPartition.from_groups(components.values())


def partitions_for_ascending(scores, deltas: Sequence[float]):
    """Partitions for an ascending list of thresholds, built incrementally.

    Equivalent to calling ``find_parallel`` per delta (components do not
    depend on union order), but sorts the pairs once and only adds the
    newly qualifying ones at each step.
    """
    deltas = [float(d) for d in deltas]
    if any(b < a for a, b in zip(deltas, deltas[1:])):
        raise InvalidArgument("deltas must be ascending")
    if any(d < 0 for d in deltas):
        raise InvalidArgument("deltas must be nonnegative")
    values = _score_values(scores)
    p = values.shape[0]
    iu, ju = np.triu_indices(p, k=1)
    vals = values[iu, ju]
    order = np.argsort(vals, kind="stable")
    si, sj, sv = iu[order], ju[order], vals[order]
    uf = _UnionFind(p)
    touched = np.zeros(p, dtype=bool)
    out = []
    pos = 0
    for d in deltas:
        while pos < len(sv) and sv[pos] <= 2.0 * d:
            uf.union(int(si[pos]), int(sj[pos]))
            touched[si[pos]] = touched[sj[pos]] = True
            pos += 1
        components: dict = {}
        for i in np.flatnonzero(touched):
            components.setdefault(uf.find(int(i)), []).append(int(i))
        out.append(GroupPartition.from_groups(components.values()))
    return out


def partition_sizes_monotone_check(scores, deltas: Sequence[float]):
    """|H(delta)| for each threshold in an ascending list of deltas.

    Exposed so that the monotonicity of the discovered set size in delta
    can be asserted directly.
    """
    deltas = [float(d) for d in deltas]
    if any(b < a for a, b in zip(deltas, deltas[1:])):
        raise InvalidArgument("deltas must be ascending")
    return [len(find_parallel(scores, d).universe) for d in deltas]
