"""Regenerate the committed demo inputs under data/demo/.

Deterministic: six partially revealed contexts derived from fixed boards,
a demo board file, and a small synthetic question corpus drawn from a
hand-set weight vector (concise, board-referential questions dominate,
mimicking the shape of human question data).

Run from the repository root: python3 scripts/make_demo_data.py
"""

import json
import random
from pathlib import Path

import numpy as np

from qgen import domain, features, grammar, model

OUT = Path(__file__).resolve().parent.parent / "data" / "demo"

BOARDS = {
    "1": (("Blue", 3, "H", 1, 1), ("Red", 2, "V", 2, 5), ("Purple", 4, "V", 2, 2)),
    "2": (("Blue", 2, "H", 6, 5), ("Red", 4, "H", 4, 1), ("Purple", 3, "H", 1, 4)),
    "3": (("Blue", 4, "V", 3, 6), ("Red", 3, "H", 1, 1), ("Purple", 2, "V", 5, 2)),
    "4": (("Blue", 2, "V", 1, 3), ("Red", 3, "V", 4, 5), ("Purple", 4, "H", 6, 1)),
    "5": (("Blue", 3, "V", 2, 1), ("Red", 2, "H", 1, 5), ("Purple", 3, "H", 4, 3)),
    "6": (("Blue", 4, "H", 2, 2), ("Red", 2, "V", 4, 1), ("Purple", 2, "H", 6, 4)),
}

THETA_DEMO = {
    "eig": -0.8,
    "eig_zero": 1.5,
    "complexity": 0.8,
    "type_boolean": -0.5,
    "type_number": -0.2,
    "type_color": 0.3,
    "type_location": 0.1,
    "relevance": -3.0,
}


def make_board(spec):
    ships = tuple(
        domain.ShipPlacement(size, orient, row, col, color)
        for color, size, orient, row, col in spec
    )
    return domain.Board(ships)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "contexts").mkdir(exist_ok=True)
    rng = random.Random(2024)

    board1 = make_board(BOARDS["1"])
    (OUT / "board.json").write_text(
        json.dumps({"id": "demo-board", "grid": board1.to_grid()}, indent=1) + "\n"
    )

    space = domain.enumerate_hypotheses()
    base = domain.prior(space)
    contexts = []
    for ctx_id, spec in BOARDS.items():
        board = make_board(spec)
        tiles = rng.sample(range(36), 14)
        ctx = domain.reveal_context(board, tiles, ctx_id)
        contexts.append(ctx)
        path = OUT / "contexts" / f"context_{ctx_id}.json"
        path.write_text(json.dumps(ctx.to_json_obj(), indent=1) + "\n")
        belief = domain.condition(base, ctx)
        print(f"context {ctx_id}: support {len(belief)}")

    # synthetic corpus: energy-weighted draws per context
    pool = model.ProposalPool.sample(seed=7, size=4000, max_functions=20)
    unique = {}
    for p in pool.programs:
        unique.setdefault(p.text, p)
    programs = list(unique.values())
    weights = model.Weights(dict(THETA_DEMO), "full")
    cache = features.FeatureCache()
    nprng = np.random.default_rng(11)
    lines = []
    for ctx in contexts:
        belief = domain.condition(base, ctx)
        feats = features.feature_matrix(programs, belief, cache)
        e = model.energies(feats, weights)
        p = np.exp(-(e - e.min()))
        p /= p.sum()
        n_q = int(nprng.integers(26, 40))
        for i in nprng.choice(len(programs), size=n_q, p=p):
            lines.append(json.dumps({"context": ctx.id, "program": programs[i].text}))
    (OUT / "corpus.jsonl").write_text("\n".join(lines) + "\n")
    print(f"corpus: {len(lines)} questions across {len(contexts)} contexts")


if __name__ == "__main__":
    main()
