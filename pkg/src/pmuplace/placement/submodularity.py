"""Search for a violation of diminishing returns in trace reduction."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from ..errors import RefusedScale

MAX_CANDIDATES = 12
MARGIN = 1e-9


@dataclass
class SubmodularityWitness:
    smaller: tuple
    larger: tuple
    element: int
    gain_smaller: float
    gain_larger: float

    @property
    def sets(self):
        return self.smaller, self.larger, self.element

    @property
    def margins(self):
        return self.gain_smaller, self.gain_larger


def _subsets(items):
    for k in range(len(items) + 1):
        yield from itertools.combinations(items, k)


def non_submodularity_witness(prob, max_candidates=MAX_CANDIDATES):
    """First ``(T1 ⊂ T2, i)`` where adding ``i`` to ``T2`` helps more than adding it to ``T1``.

    Gains are trace reductions; pairs involving a non-convergent set are
    skipped.  Search order: element, then the larger set by size and
    index, then the smaller set likewise.  Returns ``None`` if the
    objective has diminishing returns everywhere.
    """
    M = prob.M
    if M > max_candidates:
        raise RefusedScale(f"witness search refused for {M} candidates (limit {max_candidates})")
    ev = prob.evaluator
    everything = list(_subsets(range(M)))
    values = dict(zip(everything, ev.traces(everything)))

    def gain(T, i):
        before, after = values[T], values[tuple(sorted(T + (i,)))]
        if not (math.isfinite(before) and math.isfinite(after)):
            return None
        return before - after

    for i in range(M):
        rest = [k for k in range(M) if k != i]
        for T2 in _subsets(rest):
            g2 = gain(T2, i)
            if g2 is None:
                continue
            for T1 in _subsets(T2):
                if len(T1) == len(T2):
                    continue
                g1 = gain(T1, i)
                if g1 is not None and g2 > g1 + MARGIN:
                    return SubmodularityWitness(T1, T2, i, g1, g2)
    return None
