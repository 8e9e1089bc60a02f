"""Question asking as probabilistic program generation over Battleship.

Subpackages follow the pipeline: `domain` (world model and beliefs),
`dsl` (the question language), `grammar` (the uniform PCFG proposal),
`features` (EIG, complexity, answer type, relevance), `model` (log-linear
density estimation), `generator` (novel question sampling), `cli`.
"""

__version__ = "0.1.0"
