"""Inverse-size task weighting and deterministic epoch schedules.

Each batch holds records of one task only. Per-epoch batch counts follow
the weights by largest-remainder apportionment, and the order of tasks
within the epoch is interleaved by error diffusion so small tasks are
spread out rather than bunched.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Mapping

from .datasets import apportion


@dataclass(frozen=True)
class MixtureWeights:
    """Per-task weights proportional to ``1 / size``; the largest task gets 1."""

    weights: dict[str, Fraction]

    @property
    def tasks(self) -> tuple[str, ...]:
        return tuple(self.weights)

    @property
    def ratio(self) -> tuple[int, ...] | None:
        """Integer ratio in task order, or None when some weight is fractional."""
        if all(w.denominator == 1 for w in self.weights.values()):
            return tuple(int(w) for w in self.weights.values())
        return None

    def ratio_string(self) -> str:
        ratio = self.ratio
        if ratio is not None:
            return ":".join(str(r) for r in ratio)
        return ":".join(str(w) for w in self.weights.values())

    def share(self, task: str) -> Fraction:
        return self.weights[task] / sum(self.weights.values())


def compute_weights(sizes: Mapping[str, int]) -> MixtureWeights:
    if not sizes:
        raise ValueError("no task sizes given")
    for task, n in sizes.items():
        if int(n) < 1:
            raise ValueError(f"task {task!r} has size {n}; every task needs at least one record")
    largest = max(int(n) for n in sizes.values())
    return MixtureWeights({t: Fraction(largest, int(n)) for t, n in sizes.items()})


@dataclass(frozen=True)
class ScheduleEntry:
    step: int
    task: str
    record_ids: tuple[int, ...]


@dataclass(frozen=True)
class MixtureSchedule:
    entries: tuple[ScheduleEntry, ...]
    batch_size: int
    seed: int
    epoch_batches: int
    epoch: int = 0

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.entries:
            out[e.task] = out.get(e.task, 0) + 1
        return out

    def task_sequence(self) -> list[str]:
        return [e.task for e in self.entries]

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps({"step": e.step, "task": e.task, "record_ids": list(e.record_ids)}) + "\n"
            for e in self.entries
        )

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())


def interleave(counts: Mapping[str, int]) -> list[str]:
    """Order tasks so each appears ``counts[t]`` times, evenly spread.

    Every step credits each task with its count, picks the task holding the
    largest credit (earlier task wins ties) and debits the chosen task by
    the total. Credits always sum to zero, so the totals come out exact.
    """
    tasks = [t for t in counts if counts[t] > 0]
    total = sum(counts[t] for t in tasks)
    credit = {t: 0 for t in tasks}
    left = {t: counts[t] for t in tasks}
    order = []
    for _ in range(total):
        for t in tasks:
            credit[t] += counts[t]
        pick = max((t for t in tasks if left[t] > 0), key=lambda t: credit[t])
        credit[pick] -= total
        left[pick] -= 1
        order.append(pick)
    return order


def _record_stream(n: int, rng: random.Random) -> Iterator[int]:
    while True:
        perm = list(range(n))
        rng.shuffle(perm)
        yield from perm


def build_schedule(
    weights: MixtureWeights,
    sizes: Mapping[str, int],
    batch_size: int,
    epoch_batches: int,
    seed: int,
    epoch: int = 0,
) -> MixtureSchedule:
    """Schedule ``epoch_batches`` homogeneous batches for one epoch.

    Records of each task are drawn from a seeded shuffle that is reshuffled
    when exhausted; epoch ``e`` continues the stream where epoch ``e - 1``
    stopped, so consecutive epochs cover every record.
    """
    tasks = weights.tasks
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    if epoch_batches < len(tasks):
        raise ValueError(f"epoch of {epoch_batches} batches cannot cover {len(tasks)} tasks")
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    missing = [t for t in tasks if t not in sizes or int(sizes[t]) < 1]
    if missing:
        raise ValueError(f"no records for tasks {missing}")

    counts = dict(zip(tasks, apportion(epoch_batches, [weights.weights[t] for t in tasks])))
    streams = {}
    for t in tasks:
        stream = _record_stream(int(sizes[t]), random.Random(f"{seed}:{t}"))
        for _ in range(epoch * counts[t] * batch_size):
            next(stream)
        streams[t] = stream

    entries = []
    for step, t in enumerate(interleave(counts)):
        batch = tuple(next(streams[t]) for _ in range(batch_size))
        entries.append(ScheduleEntry(step, t, batch))
    return MixtureSchedule(tuple(entries), batch_size, seed, epoch_batches, epoch)
