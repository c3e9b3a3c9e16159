"""Set partitions of {1, ..., i} in restricted-growth (first-appearance) form."""

from dataclasses import dataclass
from math import comb

MAX_ENUMERATION_SIZE = 12


class EnumerationLimitError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    """A partition encoded by its restricted-growth assignment.

    ``assignment[k]`` is the block of item ``k``; blocks are numbered in order
    of first appearance so ``assignment[0] == 0``.  ``block_sizes[j]`` is the
    cardinality of block ``j``.
    """

    assignment: tuple
    block_sizes: tuple

    def __post_init__(self):
        a = tuple(int(x) for x in self.assignment)
        object.__setattr__(self, "assignment", a)
        top = -1
        for label in a:
            if label < 0 or label > top + 1:
                raise ValueError(f"not a restricted-growth string: {list(a)}")
            top = max(top, label)
        sizes = [0] * (top + 1)
        for label in a:
            sizes[label] += 1
        if tuple(self.block_sizes) != tuple(sizes):
            raise ValueError(
                f"block_sizes {list(self.block_sizes)} inconsistent with assignment {list(a)}"
            )
        object.__setattr__(self, "block_sizes", tuple(sizes))

    @classmethod
    def from_assignment(cls, assignment):
        assignment = tuple(assignment)
        n = max(assignment) + 1 if assignment else 0
        sizes = [0] * n
        for label in assignment:
            sizes[label] += 1
        return cls(assignment, tuple(sizes))

    @classmethod
    def from_block_sizes(cls, sizes):
        """The canonical partition with blocks laid out contiguously: [2,1] -> 0,0,1."""
        assignment = []
        for j, e in enumerate(sizes):
            if e < 1:
                raise ValueError("block sizes must be positive")
            assignment.extend([j] * e)
        return cls(tuple(assignment), tuple(sizes))

    @classmethod
    def empty(cls):
        return cls((), ())

    @property
    def n_blocks(self):
        return len(self.block_sizes)

    @property
    def size(self):
        return len(self.assignment)

    @property
    def shape(self):
        """Sorted block sizes; the orbit of the partition under permutations."""
        return tuple(sorted(self.block_sizes, reverse=True))

    def __len__(self):
        return len(self.assignment)


def canonicalize_labels(labels):
    """Relabel ``labels`` by order of first appearance.

    >>> canonicalize_labels([5, 2, 5]).assignment
    (0, 1, 0)
    """
    labels = list(labels)
    if not labels:
        raise ValueError("labels must be nonempty")
    seen = {}
    out = []
    for x in labels:
        if x not in seen:
            seen[x] = len(seen)
        out.append(seen[x])
    return Partition.from_assignment(out)


def is_restricted_growth(labels):
    top = -1
    for x in labels:
        if x < 0 or x > top + 1:
            return False
        top = max(top, x)
    return True


def _rgs(i):
    # Iterative generation in lexicographic order.
    a = [0] * i
    while True:
        yield tuple(a)
        k = i - 1
        while k > 0 and a[k] == max(a[:k]) + 1:
            k -= 1
        if k == 0:
            return
        a[k] += 1
        for t in range(k + 1, i):
            a[t] = 0


def enumerate_label_sequences(i, limit=MAX_ENUMERATION_SIZE):
    """Yield every partition of {1, ..., i} exactly once, lexicographically."""
    if i < 1:
        raise ValueError("i must be a positive integer")
    if limit is not None and i > limit:
        raise EnumerationLimitError(
            f"i={i} exceeds the enumeration cap of {limit} (Bell({i}) = {bell_number(i)})"
        )
    for a in _rgs(i):
        yield Partition.from_assignment(a)


_bell = [1]


def bell_number(n):
    """B(n) by the recurrence B(n+1) = sum_k C(n, k) B(k)."""
    while len(_bell) <= n:
        m = len(_bell) - 1
        _bell.append(sum(comb(m, k) * _bell[k] for k in range(m + 1)))
    return _bell[n]
