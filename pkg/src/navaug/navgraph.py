"""Navigation graph: heading-based action derivation and the
trajectory-evaluation metrics (task completion, shortest-path distance,
edit-distance-weighted success).
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from navaug.actions import Action
from navaug.errors import InvalidTrajectoryError, ParseError, UnreachableGoalError

DEFAULT_FWD_THRESHOLD_DEG = 45.0


class NavGraph:
    """Undirected graph of panorama nodes, each with a heading in [0, 360)."""

    def __init__(
        self,
        headings: Mapping[str, float],
        edges: Sequence[tuple[str, str]],
    ) -> None:
        self._headings = {str(k): float(v) % 360.0 for k, v in headings.items()}
        self._adjacency: dict[str, set[str]] = {node: set() for node in self._headings}
        for a, b in edges:
            a, b = str(a), str(b)
            if a == b:
                raise ValueError(f"self-loop on node {a!r}")
            if a not in self._headings or b not in self._headings:
                raise ValueError(f"edge ({a!r}, {b!r}) references unknown node")
            self._adjacency[a].add(b)
            self._adjacency[b].add(a)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._headings

    def __len__(self) -> int:
        return len(self._headings)

    def nodes(self) -> list[str]:
        return sorted(self._headings)

    def heading(self, node_id: str) -> float:
        return self._headings[node_id]

    def neighbors(self, node_id: str) -> set[str]:
        return set(self._adjacency[node_id])

    def adjacent(self, a: str, b: str) -> bool:
        return b in self._adjacency.get(a, ())

    def validate_trajectory(self, trajectory: Sequence[str]) -> None:
        if not trajectory:
            raise InvalidTrajectoryError("trajectory is empty")
        for node in trajectory:
            if node not in self._headings:
                raise InvalidTrajectoryError(f"unknown node {node!r}")
        for a, b in zip(trajectory, trajectory[1:]):
            if not self.adjacent(a, b):
                raise InvalidTrajectoryError(f"nodes {a!r} and {b!r} are not adjacent")

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "NavGraph":
        headings = {str(n["id"]): float(n["heading"]) for n in doc["nodes"]}
        edges = [(str(a), str(b)) for a, b in doc["edges"]]
        return cls(headings, edges)

    @classmethod
    def load(cls, path: str | Path) -> "NavGraph":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(str(path), exc.lineno, f"invalid graph JSON: {exc.msg}") from exc
        try:
            return cls.from_json_dict(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(str(path), 1, f"bad graph document: {exc}") from exc


@dataclass(frozen=True)
class EvalResult:
    tc: int
    spd: float
    sed: float

    def __post_init__(self) -> None:
        if self.tc not in (0, 1):
            raise ValueError("tc must be 0 or 1")
        if self.spd < 0 or not 0.0 <= self.sed <= 1.0:
            raise ValueError("spd must be >= 0 and sed within [0, 1]")
        if self.tc == 0 and self.sed != 0.0:
            raise ValueError("sed must be 0 when tc is 0")
        if self.spd == 0 and self.tc != 1:
            raise ValueError("tc must be 1 at the goal")


def wrap_heading_delta(delta_deg: float) -> float:
    """Heading difference wrapped into (-180, 180]."""
    wrapped = delta_deg % 360.0
    if wrapped > 180.0:
        wrapped -= 360.0
    return wrapped


def derive_actions(
    graph: NavGraph,
    trajectory: Sequence[str],
    fwd_threshold_deg: float = DEFAULT_FWD_THRESHOLD_DEG,
) -> list[Action]:
    """One action per hop from the heading change (positive = clockwise =
    RIGHT), then a terminal STOP; output length equals |trajectory|."""
    graph.validate_trajectory(trajectory)
    actions: list[Action] = []
    for a, b in zip(trajectory, trajectory[1:]):
        delta = wrap_heading_delta(graph.heading(b) - graph.heading(a))
        if abs(delta) < fwd_threshold_deg:
            actions.append(Action.FORWARD)
        elif delta > 0:
            actions.append(Action.RIGHT)
        else:
            actions.append(Action.LEFT)
    actions.append(Action.STOP)
    return actions


def task_completion(graph: NavGraph, predicted: Sequence[str], goal: str) -> int:
    """1 iff the trajectory ends at the goal or one of its neighbors."""
    if not predicted:
        raise ValueError("empty trajectory")
    if goal not in graph:
        raise ValueError(f"goal {goal!r} not in graph")
    final = predicted[-1]
    return 1 if final == goal or graph.adjacent(final, goal) else 0


def spd(
    graph: NavGraph,
    predicted: Sequence[str],
    goal: str,
    edge_lengths: Mapping[frozenset, float] | None = None,
) -> float:
    """Shortest-path distance from the final node to the goal, in hops by
    default or in `edge_lengths` units when provided."""
    if not predicted:
        raise ValueError("empty trajectory")
    if goal not in graph:
        raise ValueError(f"goal {goal!r} not in graph")
    start = predicted[-1]
    if start not in graph:
        raise ValueError(f"node {start!r} not in graph")
    if start == goal:
        return 0.0
    if edge_lengths is None:
        seen = {start}
        queue = deque([(start, 0)])
        while queue:
            node, dist = queue.popleft()
            for nxt in graph.neighbors(node):
                if nxt == goal:
                    return float(dist + 1)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append((nxt, dist + 1))
        raise UnreachableGoalError(f"no path from {start!r} to {goal!r}")
    best = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        dist, node = heapq.heappop(heap)
        if node == goal:
            return dist
        if dist > best.get(node, float("inf")):
            continue
        for nxt in graph.neighbors(node):
            length = edge_lengths.get(frozenset((node, nxt)), 1.0)
            cand = dist + length
            if cand < best.get(nxt, float("inf")):
                best[nxt] = cand
                heapq.heappush(heap, (cand, nxt))
    raise UnreachableGoalError(f"no path from {start!r} to {goal!r}")


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    """Edit distance over node-id sequences, two-row dynamic program."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, item_a in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, item_b in enumerate(b, start=1):
            cost = 0 if item_a == item_b else 1
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + cost,
            )
        previous = current
    return previous[len(b)]


def sed(
    graph: NavGraph,
    predicted: Sequence[str],
    gold: Sequence[str],
    goal: str,
) -> float:
    """Task completion weighted by normalized trajectory edit distance."""
    tc = task_completion(graph, predicted, goal)
    if tc == 0:
        return 0.0
    if not gold:
        raise ValueError("empty gold trajectory")
    distance = levenshtein(predicted, gold)
    score = tc * (1.0 - distance / max(len(predicted), len(gold)))
    return min(1.0, max(0.0, score))


def evaluate(
    graph: NavGraph,
    predicted: Sequence[str],
    gold: Sequence[str],
    goal: str,
) -> EvalResult:
    return EvalResult(
        tc=task_completion(graph, predicted, goal),
        spd=spd(graph, predicted, goal),
        sed=sed(graph, predicted, gold, goal),
    )


def evaluate_batch(
    graph: NavGraph, records: Sequence[Mapping]
) -> tuple[list[dict], dict]:
    """Per-record metrics plus aggregate means, in input order."""
    results = []
    sums = {"tc": 0.0, "spd": 0.0, "sed": 0.0}
    for record in records:
        res = evaluate(
            graph,
            [str(n) for n in record["predicted"]],
            [str(n) for n in record["gold"]],
            str(record["goal"]),
        )
        results.append(
            {
                "sample_id": str(record["sample_id"]),
                "tc": res.tc,
                "spd": res.spd,
                "sed": res.sed,
            }
        )
        sums["tc"] += res.tc
        sums["spd"] += res.spd
        sums["sed"] += res.sed
    n = len(results)
    aggregate = {
        "count": n,
        "mean_tc": sums["tc"] / n if n else 0.0,
        "mean_spd": sums["spd"] / n if n else 0.0,
        "mean_sed": sums["sed"] / n if n else 0.0,
    }
    return results, aggregate
