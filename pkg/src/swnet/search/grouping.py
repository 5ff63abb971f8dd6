"""Greedy grouping driven by a max-priority queue of pairwise scores."""

import heapq
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Tuple

Item = Hashable


class SimilarityQueue:
    """Max-queue over scored pairs; ties broken by ascending pair key."""

    def __init__(self):
        self._heap: List[Tuple[float, Item, Item]] = []

    def push(self, item_a: Item, item_b: Item, score: float) -> None:
        if item_a == item_b:
            raise ValueError(f"pair must join distinct items, got {item_a!r} twice")
        a, b = sorted((item_a, item_b))
        heapq.heappush(self._heap, (-float(score), a, b))

    def pop(self) -> Tuple[float, Item, Item]:
        neg, a, b = heapq.heappop(self._heap)
        return -neg, a, b

    def __len__(self) -> int:
        return len(self._heap)


def group_by_queue(
    pair_scores: Mapping[Tuple[Item, Item], float],
    epsilon: float,
    items: Optional[Iterable[Item]] = None,
) -> List[List[Item]]:
    """Pop pairs best-first; while the score clears epsilon, join the two
    items into one group (creating, extending, or merging groups as needed).
    Once the best remaining score is at or below epsilon, everything still
    ungrouped becomes a singleton.

    Returns groups as sorted lists, ordered by smallest member.
    """
    universe = set(items) if items is not None else set()
    queue = SimilarityQueue()
    for (a, b), score in pair_scores.items():
        queue.push(a, b, score)
        universe.add(a)
        universe.add(b)

    group_of: Dict[Item, int] = {}
    groups: Dict[int, set] = {}
    next_gid = 0
    while queue:
        score, a, b = queue.pop()
        if score <= epsilon:
            break
        ga = group_of.get(a)
        gb = group_of.get(b)
        if ga is None and gb is None:
            groups[next_gid] = {a, b}
            group_of[a] = group_of[b] = next_gid
            next_gid += 1
        elif ga is None:
            groups[gb].add(a)
            group_of[a] = gb
        elif gb is None:
            groups[ga].add(b)
            group_of[b] = ga
        elif ga != gb:
            keep, drop = (ga, gb) if ga < gb else (gb, ga)
            for item in groups[drop]:
                group_of[item] = keep
            groups[keep] |= groups.pop(drop)
        # same group already: nothing to do

    for item in universe:
        if item not in group_of:
            groups[next_gid] = {item}
            group_of[item] = next_gid
            next_gid += 1

    out = [sorted(g) for g in groups.values()]
    out.sort(key=lambda g: g[0])
    return out
