"""Novel question generation: energy-weighted sampling from the proposal
pool with equivalence-based novelty filtering.

Two questions are equivalent when they partition the hypotheses
identically (answer labels are allowed to differ; this is the
threshold-free reading of "same answer distribution"), or when their ASTs
coincide after substituting terminal arguments (ship colors, locations,
number literals). Non-board programs are not questions about the game and
are filtered out of the output.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass

import numpy as np

from . import dsl, features, model
from .domain import Belief
from .dsl import AllLocations, AllShips, App, Lam, Lit, Program, Var


@dataclass(frozen=True)
class EquivalenceVerdict:
    equivalent: bool
    reason: str  # "identical_partition" | "argument_variant" | "distinct"


def partition_signature(program: Program, belief: Belief) -> bytes:
    """Digest of the partition as a set-partition of the support: per-board
    cells renumbered by first occurrence, so relabeled answers collide."""
    codes = dsl.answer_codes(program, belief)
    _, first = np.unique(codes, return_index=True)
    order = {int(codes[i]): rank for rank, i in enumerate(np.sort(first))}
    normalized = np.fromiter((order[int(c)] for c in codes), dtype=np.int32,
                             count=codes.size)
    return hashlib.sha1(normalized.tobytes()).digest()


def _skeleton(node) -> str:
    if isinstance(node, Lit):
        if node.kind in ("ship", "loc", "num"):
            return "_"
        return dsl.print_node(node)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, (AllShips, AllLocations)):
        return dsl.print_node(node)
    if isinstance(node, Lam):
        return f"(λ {node.var} {_skeleton(node.body)})"
    if isinstance(node, App):
        return "(" + " ".join([node.head] + [_skeleton(a) for a in node.args]) + ")"
    raise TypeError(f"cannot take skeleton of {node!r}")


def argument_skeleton(program: Program) -> str:
    """Canonical text with ship colors, locations and number literals
    replaced by a placeholder."""
    return _skeleton(program.root)


def equivalent(p1: Program, p2: Program, belief: Belief) -> EquivalenceVerdict:
    """Equivalence used by the novelty filter; reflexive and symmetric.
    Partition identity is transitive; argument-variant matching is applied
    pairwise only."""
    if partition_signature(p1, belief) == partition_signature(p2, belief):
        return EquivalenceVerdict(True, "identical_partition")
    if argument_skeleton(p1) == argument_skeleton(p2):
        return EquivalenceVerdict(True, "argument_variant")
    return EquivalenceVerdict(False, "distinct")


@dataclass
class NovelSample:
    program: Program
    energy: float


def sample_novel(belief: Belief, weights: model.Weights, pool,
                 known: list[Program], k: int, seed: int = 0,
                 cache: features.FeatureCache | None = None
                 ) -> list[tuple[Program, float]]:
    """`k` weighted samples (probability proportional to exp(-energy)),
    drawn without replacement from the pool deduplicated by canonical
    text. A draw is rejected if it is equivalent to any known program or
    to an already accepted one, or if it does not reference the board.
    Returns (program, energy) pairs sorted by energy ascending; emits a
    warning and returns fewer than `k` if the pool is exhausted first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cache = cache if cache is not None else features.FeatureCache()
    unique: dict[str, Program] = {}
    for p in pool.programs if hasattr(pool, "programs") else pool:
        if p.text not in unique:
            unique[p.text] = p
    candidates = list(unique.values())
    feats = features.feature_matrix(candidates, belief, cache)
    all_energies = model.energies(feats, weights)
    relevance = feats[:, features.FEATURE_NAMES.index("relevance")]

    known_sigs = {partition_signature(p, belief) for p in known}
    known_skels = {argument_skeleton(p) for p in known}
    known_texts = {p.text for p in known}

    rng = np.random.default_rng(seed)
    alive = np.ones(len(candidates), dtype=bool)
    accepted: list[tuple[Program, float]] = []
    accepted_sigs: set[bytes] = set()
    accepted_skels: set[str] = set()

    while len(accepted) < k and alive.any():
        logits = np.where(alive, -all_energies, -np.inf)
        shifted = np.exp(logits - logits.max())
        probs = shifted / shifted.sum()
        pick = int(rng.choice(len(candidates), p=probs))
        alive[pick] = False
        prog = candidates[pick]
        if relevance[pick] == 0.0:
            continue  # no board reference: not a question about the game
        if prog.text in known_texts:
            continue
        sig = partition_signature(prog, belief)
        if sig in known_sigs or sig in accepted_sigs:
            continue
        skel = argument_skeleton(prog)
        if skel in known_skels or skel in accepted_skels:
            continue
        accepted.append((prog, float(all_energies[pick])))
        accepted_sigs.add(sig)
        accepted_skels.add(skel)

    if len(accepted) < k:
        warnings.warn(
            f"pool exhausted: returning {len(accepted)} of {k} requested samples"
        )
    return sorted(accepted, key=lambda pair: pair[1])
