"""Question features: expected information gain, zero-EIG indicator,
complexity (-log q), answer-type one-hots, and the board-reference filter.

EIG is reported in bits. For a deterministic program the expected entropy
reduction equals the Shannon entropy of its answer partition, which is how
the fast path computes it; the test suite checks this against a termwise
sum over (answer, hypothesis) pairs. Complexity uses the natural log of
the derivation probability. Everything except EIG and the zero-EIG flag is
independent of the context.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dsl, grammar
from .domain import Belief

FEATURE_NAMES = (
    "eig",
    "eig_zero",
    "complexity",
    "type_boolean",
    "type_number",
    "type_color",
    "type_location",
    "relevance",
)

# Answer-type bookkeeping: Orientation counts as Boolean.
_TYPE_SLOT = {"B": 3, "O": 3, "N": 4, "C": 5, "L": 6}

EIG_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class FeatureVector:
    eig: float
    eig_zero: float
    complexity: float
    type_boolean: float
    type_number: float
    type_color: float
    type_location: float
    relevance: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, row: np.ndarray) -> "FeatureVector":
        return cls(*(float(v) for v in row))


class FeatureCache:
    """Memoizes EIG per (canonical text, belief key) and the
    context-independent feature block per text. Plain dict writes are
    atomic under the GIL, so concurrent workers may share an instance."""

    def __init__(self):
        self.eig: dict[tuple[str, str], float] = {}
        self.static: dict[str, np.ndarray] = {}

    def __len__(self):
        return len(self.eig) + len(self.static)


def partition_masses(program: dsl.Program, belief: Belief) -> np.ndarray:
    """Sorted-by-code probability masses of the answer partition."""
    codes = dsl.answer_codes(program, belief)
    _, inverse = np.unique(codes, return_inverse=True)
    return np.bincount(inverse, weights=belief.weights)


def _partition_entropy(masses: np.ndarray) -> float:
    m = masses[masses > 0]
    return max(0.0, float(-(m * np.log2(m)).sum()))


def eig(program: dsl.Program, belief: Belief, cache: FeatureCache | None = None) -> float:
    """Expected information gain of asking `program` under `belief`, in bits.

    Programs that never read the board have a constant answer, hence 0.
    """
    if not program.board_referential:
        return 0.0
    if cache is not None:
        key = (program.text, belief.key)
        hit = cache.eig.get(key)
        if hit is not None:
            return hit
    value = _partition_entropy(partition_masses(program, belief))
    if cache is not None:
        cache.eig[key] = value
    return value


def _static_block(program: dsl.Program, cache: FeatureCache | None) -> np.ndarray:
    """(complexity, 4 type one-hots, relevance), context-independent."""
    if cache is not None:
        hit = cache.static.get(program.text)
        if hit is not None:
            return hit
    block = np.zeros(6, dtype=np.float64)
    block[0] = -grammar.log_q(program)
    block[_TYPE_SLOT[program.answer_type] - 2] = 1.0
    block[5] = 1.0 if program.board_referential else 0.0
    if cache is not None:
        cache.static[program.text] = block
    return block


def feature_row(program: dsl.Program, belief: Belief,
                cache: FeatureCache | None = None) -> np.ndarray:
    """All eight features as an array in FEATURE_NAMES order."""
    row = np.empty(8, dtype=np.float64)
    gain = eig(program, belief, cache)
    row[0] = gain
    row[1] = 1.0 if gain <= EIG_ZERO_TOL else 0.0
    row[2:8] = _static_block(program, cache)
    return row


def feature_vector(program: dsl.Program, belief: Belief,
                   cache: FeatureCache | None = None) -> FeatureVector:
    return FeatureVector.from_array(feature_row(program, belief, cache))


def _worker_count() -> int:
    env = os.environ.get("QGEN_THREADS")
    if env:
        return max(1, int(env))
    return 1


def feature_matrix(programs, belief: Belief, cache: FeatureCache | None = None,
                   threads: int | None = None) -> np.ndarray:
    """(len(programs), 8) feature matrix, order-preserving.

    Repeated canonical texts are computed once through the cache. With
    `threads` > 1 (or QGEN_THREADS set) rows are computed in parallel;
    output is identical regardless of worker count.
    """
    programs = list(programs)
    out = np.empty((len(programs), 8), dtype=np.float64)
    n_workers = threads if threads is not None else _worker_count()
    local_cache = cache if cache is not None else FeatureCache()

    if n_workers <= 1 or len(programs) < 64:
        for i, p in enumerate(programs):
            out[i] = feature_row(p, belief, local_cache)
        return out

    def fill(span):
        lo, hi = span
        for i in range(lo, hi):
            out[i] = feature_row(programs[i], belief, local_cache)

    step = max(1, (len(programs) + n_workers - 1) // n_workers)
    spans = [(lo, min(lo + step, len(programs))) for lo in range(0, len(programs), step)]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        list(pool.map(fill, spans))
    return out


def save_feature_matrix(path, programs, matrix: np.ndarray) -> None:
    """Columnar text: one row per program, canonical text plus 8 fields.
    Enables training restarts without recomputation."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("program\t" + "\t".join(FEATURE_NAMES) + "\n")
        for p, row in zip(programs, matrix):
            text = p.text if isinstance(p, dsl.Program) else str(p)
            fh.write(text + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")


def load_feature_matrix(path) -> tuple[list[str], np.ndarray]:
    texts = []
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header != ["program", *FEATURE_NAMES]:
            raise ValueError(f"unexpected feature file header in {path}")
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            texts.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    return texts, np.asarray(rows, dtype=np.float64)
