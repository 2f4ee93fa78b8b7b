"""Candidate-model spaces: variable subsets and set partitions.

A subset model lists the (1-based) variables it keeps. A partition model is
stored as a restricted-growth string: ``labels[i]`` is the block of item
``i + 1`` and labels appear in first-use order starting from 0, which makes
the encoding canonical.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np

from .errors import InvalidModel, ModelSpaceMismatch, PartitionSpaceTooLarge

SUBSET = "subset"
PARTITION = "partition"

ALL_SUBSETS = "all-subsets"
ALL_PARTITIONS = "all-partitions"

DEFAULT_CAP = 2**24
MAX_PARTITION_P = 14

# A feature is a variable id (subset spaces) or a co-clustered pair (partitions).
FeatureId = Union[int, tuple[int, int]]


def is_restricted_growth(labels) -> bool:
    top = -1
    for g in labels:
        if g < 0 or g > top + 1:
            return False
        top = max(top, g)
    return True


def canonical_labels(labels) -> tuple[int, ...]:
    """Relabel arbitrary block labels into first-use order."""
    seen: dict = {}
    out = []
    for g in labels:
        if g not in seen:
            seen[g] = len(seen)
        out.append(seen[g])
    return tuple(out)


@dataclass(frozen=True, order=True)
class ModelIndex:
    kind: str
    items: tuple[int, ...]

    def __post_init__(self):
        if self.kind == SUBSET:
            items = self.items
            if any(b <= a for a, b in zip(items, items[1:])):
                raise InvalidModel(f"subset ids must be strictly increasing: {items}")
            if items and items[0] < 1:
                raise InvalidModel(f"subset ids are 1-based: {items}")
        elif self.kind == PARTITION:
            if not self.items or not is_restricted_growth(self.items):
                raise InvalidModel(f"not a restricted-growth string: {self.items}")
        else:
            raise InvalidModel(f"unknown model kind {self.kind!r}")

    @classmethod
    def subset(cls, ids) -> "ModelIndex":
        ids = [int(i) for i in ids]
        if len(set(ids)) != len(ids):
            raise InvalidModel(f"duplicate variable ids in {ids}")
        return cls(SUBSET, tuple(sorted(ids)))

    @classmethod
    def partition(cls, labels) -> "ModelIndex":
        return cls(PARTITION, canonical_labels(labels))

    @classmethod
    def from_mask(cls, mask) -> "ModelIndex":
        return cls(SUBSET, tuple(int(j) + 1 for j in np.flatnonzero(mask)))

    @classmethod
    def parse(cls, text: str, kind: str | None = None) -> "ModelIndex":
        text = text.strip()
        if kind is None:
            kind = PARTITION if "|" in text else SUBSET
        if kind == PARTITION:
            return cls(PARTITION, tuple(int(t) for t in text.split("|")))
        if not text:
            return cls(SUBSET, ())
        return cls.subset(int(t) for t in text.split(","))

    def encode(self) -> str:
        if self.kind == PARTITION:
            return "|".join(map(str, self.items))
        return ",".join(map(str, self.items))

    def __str__(self) -> str:
        return self.encode()

    @property
    def blocks(self) -> list[list[int]]:
        """Partition blocks as lists of 1-based items, in label order."""
        if self.kind != PARTITION:
            raise InvalidModel("blocks are only defined for partitions")
        out: list[list[int]] = [[] for _ in range(max(self.items) + 1)]
        for i, g in enumerate(self.items):
            out[g].append(i + 1)
        return out

    def mask(self, p: int) -> np.ndarray:
        m = np.zeros(p, dtype=bool)
        m[[j - 1 for j in self.items]] = True
        return m


def bell_number(p: int) -> int:
    """p-th Bell number from the Bell triangle."""
    if p < 0:
        raise ValueError("p must be non-negative")
    if p == 0:
        return 1
    row = [1]
    for _ in range(p - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1]


def _restricted_growth_strings(p: int) -> Iterator[tuple[int, ...]]:
    # lexicographic order; prefix_max[i] = max(a[0..i])
    a = [0] * p
    prefix_max = [0] * p
    while True:
        yield tuple(a)
        i = p - 1
        while i > 0 and a[i] > prefix_max[i - 1]:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        prefix_max[i] = max(prefix_max[i - 1], a[i])
        for j in range(i + 1, p):
            a[j] = 0
            prefix_max[j] = prefix_max[i]


@dataclass(frozen=True)
class ModelSpace:
    kind: str
    p: int
    forced: frozenset = field(default_factory=frozenset)
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.kind not in (ALL_SUBSETS, ALL_PARTITIONS):
            raise InvalidModel(f"unknown space kind {self.kind!r}")
        if self.p < 1:
            raise InvalidModel("model space needs p >= 1")
        object.__setattr__(self, "forced", frozenset(int(j) for j in self.forced))
        if self.forced and self.kind == ALL_PARTITIONS:
            raise InvalidModel("forced variables only apply to subset spaces")
        if any(not 1 <= j <= self.p for j in self.forced):
            raise InvalidModel(f"forced ids out of range 1..{self.p}")

    @classmethod
    def subsets(cls, p: int, forced=(), cap: int = DEFAULT_CAP) -> "ModelSpace":
        return cls(ALL_SUBSETS, p, frozenset(forced), cap)

    @classmethod
    def partitions(cls, p: int, cap: int = DEFAULT_CAP) -> "ModelSpace":
        return cls(ALL_PARTITIONS, p, frozenset(), cap)

    @property
    def model_kind(self) -> str:
        return SUBSET if self.kind == ALL_SUBSETS else PARTITION

    @property
    def free(self) -> list[int]:
        return [j for j in range(1, self.p + 1) if j not in self.forced]

    def cardinality(self) -> int:
        if self.kind == ALL_SUBSETS:
            return 2 ** (self.p - len(self.forced))
        return bell_number(self.p)

    def full_model(self) -> ModelIndex:
        if self.kind == ALL_SUBSETS:
            return ModelIndex(SUBSET, tuple(range(1, self.p + 1)))
        return ModelIndex(PARTITION, (0,) * self.p)

    def contains(self, model: ModelIndex) -> bool:
        if model.kind != self.model_kind:
            return False
        if model.kind == PARTITION:
            return len(model.items) == self.p
        return (not model.items or model.items[-1] <= self.p) and self.forced <= set(model.items)

    def check(self, model: ModelIndex) -> None:
        if not self.contains(model):
            raise ModelSpaceMismatch(f"model {model} does not belong to {self.kind}(p={self.p})")

    def enumerate(self) -> Iterator[ModelIndex]:
        """Yield every model once, in a fixed order.

        Subsets: binary counting over the free ids (bit i <-> i-th free id).
        Partitions: lexicographic restricted-growth strings.
        """
        if self.kind == ALL_PARTITIONS and self.p > MAX_PARTITION_P:
            raise PartitionSpaceTooLarge(f"partition enumeration limited to p <= {MAX_PARTITION_P}")
        total = self.cardinality()
        if total > self.cap:
            raise PartitionSpaceTooLarge(f"{total} models exceed the enumeration cap {self.cap}")
        if self.kind == ALL_PARTITIONS:
            for labels in _restricted_growth_strings(self.p):
                yield ModelIndex(PARTITION, labels)
            return
        free = self.free
        forced = sorted(self.forced)
        for code in range(total):
            chosen = [free[i] for i in range(len(free)) if code >> i & 1]
            yield ModelIndex(SUBSET, tuple(sorted(forced + chosen)))

    def features(self) -> list[FeatureId]:
        """All features of the space, in a fixed order."""
        if self.kind == ALL_SUBSETS:
            return list(range(1, self.p + 1))
        return list(itertools.combinations(range(1, self.p + 1), 2))


def features_of(space: ModelSpace, model: ModelIndex) -> frozenset:
    space.check(model)
    if model.kind == SUBSET:
        return frozenset(model.items)
    pairs = []
    for block in model.blocks:
        pairs.extend(itertools.combinations(block, 2))
    return frozenset(pairs)


def feature_label(feature: FeatureId) -> str:
    if isinstance(feature, tuple):
        return f"{feature[0]}-{feature[1]}"
    return str(feature)
