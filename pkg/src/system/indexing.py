"""
Index-set slicing, merging and deterministic enumerations.

Enumeration orders fix which realizing pair is reported first:
removed sets by cardinality then lexicographically, patterns by total order
then lexicographically, complements lexicographically.
"""

from collections.abc import Iterator, Sequence
from itertools import combinations, product
from typing import Optional, TypeVar

from src.models.system import IndexSet, ProlongationPattern
from src.utils.errors import IndexSetError

T = TypeVar("T")


def slice_by(q: Sequence[T], S: IndexSet) -> list[T]:
    """
    Order-preserving extraction q_S.

    Raises:
        IndexSetError: If an index exceeds len(q)
    """
    for i in S:
        if i > len(q):
            raise IndexSetError(f"Index {i} out of range for length {len(q)}")
    return [q[i - 1] for i in S]


def merge(S: IndexSet, q_in: Sequence[T], q_out: Sequence[T]) -> list[T]:
    """
    Place q_in on the positions of S and q_out on its complement.

    Raises:
        IndexSetError: If len(q_in) != |S| or S exceeds the merged length
    """
    p = len(q_in) + len(q_out)
    if len(q_in) != len(S):
        raise IndexSetError(
            f"Merge size mismatch: {len(q_in)} values for {len(S)} positions"
        )
    if any(i > p for i in S):
        raise IndexSetError(f"Index set {S.label()} out of range for length {p}")
    inside = iter(q_in)
    outside = iter(q_out)
    return [next(inside) if i in S else next(outside) for i in range(1, p + 1)]


def merge_patterns(
    removed: IndexSet, kept_part: Sequence[int], removed_part: Sequence[int]
) -> ProlongationPattern:
    """Pattern with removed_part on the removed inputs and kept_part elsewhere."""
    return ProlongationPattern(orders=tuple(merge(removed, removed_part, kept_part)))


def enumerate_subsets(
    p: int, max_size: int, min_size: int = 0
) -> Iterator[IndexSet]:
    """Subsets of {1..p} by cardinality, then lexicographically."""
    for size in range(min_size, min(max_size, p) + 1):
        for combo in combinations(range(1, p + 1), size):
            yield IndexSet(indices=combo)


def enumerate_patterns(
    p: int, l_max: int, removed: Optional[IndexSet] = None
) -> Iterator[ProlongationPattern]:
    """
    Patterns with entries <= l_max, zero on removed inputs, ordered by total
    order then lexicographically.
    """
    removed = removed or IndexSet()
    free = [i for i in range(1, p + 1) if i not in removed]
    by_total: dict[int, list[tuple[int, ...]]] = {}
    for values in product(range(l_max + 1), repeat=len(free)):
        orders = [0] * p
        for i, v in zip(free, values):
            orders[i - 1] = v
        by_total.setdefault(sum(values), []).append(tuple(orders))
    for total in sorted(by_total):
        for orders in sorted(by_total[total]):
            yield ProlongationPattern(orders=orders)


def enumerate_complements(m: int, k: int) -> Iterator[IndexSet]:
    """Index sets O of size k over {1..m}, lexicographically."""
    for combo in combinations(range(1, m + 1), k):
        yield IndexSet(indices=combo)
