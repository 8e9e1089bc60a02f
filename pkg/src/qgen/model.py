"""Log-linear density estimation over question programs.

Probability of a question x in context c is exp(-E_c(x)) / Z_c with
E_c(x) = theta . f_c(x). EIG features depend on the context, so the
normalizer and model expectations are computed per context; a datum's
log-likelihood uses its own context's Z. Model expectations and Z are
estimated by self-normalized importance sampling from the uniform-PCFG
proposal, or computed exactly over an enumerated universe (the test
oracle and the moment-matching path).

Gradient ascent maximizes the log-likelihood. With the exp(-E) energy
convention the likelihood gradient is N * (E_model[f] - E_data[f]); the
fixed point is the same moment match either way, and this is the sign
that matches finite differences of the log-likelihood. We scale by 1/N,
which only rescales the learning rate.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.stats import rankdata

from . import dsl, features, grammar
from .domain import Belief, Context, HypothesisSpace, condition, prior
from .dsl import Program, QgenError
from .features import FEATURE_NAMES, FeatureCache

N_FEATURES = len(FEATURE_NAMES)

# Lesioned variants: feature names pinned to exactly 0 and never updated.
VARIANT_MASKED = {
    "full": (),
    "information_agnostic": ("eig", "eig_zero"),
    "complexity_agnostic": ("complexity",),
    "type_agnostic": ("type_boolean", "type_number", "type_color", "type_location"),
}
VARIANTS = tuple(VARIANT_MASKED)


class SchemaError(QgenError):
    """Feature names or file fields do not line up."""


class NumericError(QgenError):
    """Degenerate numerics (all importance weights underflow, NaN trace)."""


@dataclass
class Weights:
    theta: dict[str, float]
    variant: str = "full"

    def __post_init__(self):
        if self.variant not in VARIANT_MASKED:
            raise SchemaError(f"unknown variant {self.variant!r}")
        missing = [n for n in FEATURE_NAMES if n not in self.theta]
        if missing:
            raise SchemaError(f"weights missing features {missing}")
        for name in VARIANT_MASKED[self.variant]:
            if self.theta[name] != 0.0:
                raise SchemaError(f"{self.variant} requires {name} pinned to 0")

    @classmethod
    def zeros(cls, variant: str = "full") -> "Weights":
        return cls({name: 0.0 for name in FEATURE_NAMES}, variant)

    def vector(self) -> np.ndarray:
        return np.array([self.theta[n] for n in FEATURE_NAMES], dtype=np.float64)

    def active_mask(self) -> np.ndarray:
        masked = set(VARIANT_MASKED[self.variant])
        return np.array([n not in masked for n in FEATURE_NAMES], dtype=bool)

    def replace_vector(self, vec: np.ndarray) -> "Weights":
        return Weights(
            {n: float(v) for n, v in zip(FEATURE_NAMES, vec)}, self.variant
        )

    def to_json_obj(self, metadata: dict | None = None) -> dict:
        return {
            "variant": self.variant,
            "theta": {n: self.theta[n] for n in FEATURE_NAMES},
            "metadata": metadata or {},
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Weights":
        return cls(dict(obj["theta"]), obj.get("variant", "full"))


def energy(fv, weights: Weights) -> float:
    """E(x) = sum_k theta_k f_k(x). Accepts a FeatureVector or an array row."""
    row = fv.as_array() if isinstance(fv, features.FeatureVector) else np.asarray(fv)
    if row.shape[-1] != N_FEATURES:
        raise SchemaError(f"feature row has {row.shape[-1]} fields, need {N_FEATURES}")
    return float(row @ weights.vector())


def energies(feature_rows: np.ndarray, weights: Weights) -> np.ndarray:
    return feature_rows @ weights.vector()


def estimate_log_Z(pool_F: np.ndarray, pool_logq: np.ndarray, weights: Weights) -> float:
    """log of (1/M) sum_i exp(-E(x_i)) / q(x_i), max-shifted for stability."""
    if pool_F.shape[0] == 0:
        raise NumericError("empty proposal pool")
    lw = -energies(pool_F, weights) - pool_logq
    return float(logsumexp(lw) - math.log(pool_F.shape[0]))


def exact_log_Z(universe_F: np.ndarray, weights: Weights) -> float:
    """log sum_x exp(-E(x)) over an enumerated universe."""
    return float(logsumexp(-energies(universe_F, weights)))


# --------------------------------------------------------------------------
# Datasets and pools


@dataclass
class QuestionDataset:
    pairs: list[tuple[str, Program]]
    draw_rejected: int = 0

    @property
    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for ctx, _ in self.pairs:
            out[ctx] = out.get(ctx, 0) + 1
        return out

    def context_ids(self) -> list[str]:
        seen = []
        for ctx, _ in self.pairs:
            if ctx not in seen:
                seen.append(ctx)
        return seen

    def programs_for(self, context_id: str) -> list[Program]:
        return [p for c, p in self.pairs if c == context_id]

    def restrict(self, context_ids) -> "QuestionDataset":
        keep = set(context_ids)
        return QuestionDataset([(c, p) for c, p in self.pairs if c in keep])

    @classmethod
    def load_jsonl(cls, path) -> "QuestionDataset":
        """JSON lines {"context": id, "program": text}. `draw` questions are
        rejected with a warning tally; anything else unparseable raises."""
        pairs = []
        rejected = 0
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if "context" not in obj or "program" not in obj:
                    raise SchemaError(
                        f"{path}:{line_no}: expected fields 'context' and 'program'"
                    )
                try:
                    program = dsl.parse(obj["program"])
                except dsl.UnsupportedPrimitiveError:
                    rejected += 1
                    continue
                pairs.append((str(obj["context"]), program))
        if rejected:
            warnings.warn(f"rejected {rejected} draw question(s) from {path}")
        return cls(pairs, draw_rejected=rejected)

    def validation_report(self) -> str:
        counts = self.counts
        lines = [
            f"questions: {len(self.pairs)}",
            f"contexts: {len(counts)}",
            f"draw questions rejected: {self.draw_rejected}",
        ]
        for ctx in sorted(counts, key=lambda c: (len(c), c)):
            lines.append(f"  context {ctx}: {counts[ctx]} questions")
        return "\n".join(lines)


def context_uniqueness(dataset: QuestionDataset) -> dict[str, float]:
    """Per context: fraction of its questions (by canonical text) that
    appear in no other context."""
    texts_by_ctx: dict[str, set[str]] = {}
    for ctx, p in dataset.pairs:
        texts_by_ctx.setdefault(ctx, set()).add(p.text)
    out = {}
    for ctx, _ in texts_by_ctx.items():
        others = set().union(
            *(t for c, t in texts_by_ctx.items() if c != ctx)
        ) if len(texts_by_ctx) > 1 else set()
        own = [p.text for c, p in dataset.pairs if c == ctx]
        unique = sum(1 for t in own if t not in others)
        out[ctx] = unique / len(own)
    return out


@dataclass
class ProposalPool:
    """Importance-sampling pool: programs drawn from the uniform PCFG.
    Duplicates are kept (they carry proposal mass)."""

    programs: list[Program]
    log_q: np.ndarray
    seed: int
    max_functions: int

    @classmethod
    def sample(cls, seed: int, size: int,
               max_functions: int = grammar.DEFAULT_MAX_FUNCTIONS) -> "ProposalPool":
        import random

        rng = random.Random(seed)
        programs = [grammar.sample(rng, max_functions) for _ in range(size)]
        lq = np.array([grammar.log_q(p) for p in programs], dtype=np.float64)
        return cls(programs, lq, seed, max_functions)

    def __len__(self):
        return len(self.programs)


# --------------------------------------------------------------------------
# Per-context data bundles


@dataclass
class ContextData:
    """Everything the objective needs about one context."""

    context_id: str
    data_F: np.ndarray  # (n_c, 8) features of the human questions here
    pool_F: np.ndarray  # (M, 8) pool or universe features here
    pool_logq: np.ndarray  # (M,)
    exact: bool = False  # True: pool_F enumerates the whole universe
    data_texts: list = field(default_factory=list)

    @property
    def n_data(self) -> int:
        return self.data_F.shape[0]

    def log_Z(self, weights: Weights) -> float:
        if self.exact:
            return exact_log_Z(self.pool_F, weights)
        return estimate_log_Z(self.pool_F, self.pool_logq, weights)

    def model_expectations(self, weights: Weights) -> np.ndarray:
        """E_model[f] under this context, exactly or by self-normalized IS."""
        lw = -energies(self.pool_F, weights)
        if not self.exact:
            lw = lw - self.pool_logq
        shift = lw.max()
        if not np.isfinite(shift):
            raise NumericError("importance weights degenerate (non-finite)")
        w = np.exp(lw - shift)
        total = w.sum()
        if total <= 0 or not np.isfinite(total):
            raise NumericError("importance weights underflowed to zero")
        return (w / total) @ self.pool_F


def build_context_data(dataset: QuestionDataset, contexts: list[Context],
                       space: HypothesisSpace, pool, cache: FeatureCache | None = None,
                       threads: int | None = None,
                       exact_universe=None) -> list[ContextData]:
    """Assemble per-context bundles. Pass `pool` for IS mode, or
    `exact_universe` (list of (Program, log_q)) for exact mode."""
    cache = cache if cache is not None else FeatureCache()
    base = prior(space)
    out = []
    for ctx in contexts:
        belief = condition(base, ctx)
        data_programs = dataset.programs_for(ctx.id)
        data_F = features.feature_matrix(data_programs, belief, cache, threads)
        if exact_universe is not None:
            progs = [p for p, _ in exact_universe]
            logq = np.array([lq for _, lq in exact_universe])
            pool_F = features.feature_matrix(progs, belief, cache, threads)
            out.append(ContextData(ctx.id, data_F, pool_F, logq, exact=True,
                                   data_texts=[p.text for p in data_programs]))
        else:
            pool_F = features.feature_matrix(pool.programs, belief, cache, threads)
            out.append(ContextData(ctx.id, data_F, pool_F, pool.log_q, exact=False,
                                   data_texts=[p.text for p in data_programs]))
    return out


# --------------------------------------------------------------------------
# Objective, gradient, training


def log_likelihood(context_data: list[ContextData], weights: Weights) -> float:
    """sum_i [ -E(d_i) - log Z(context of d_i) ]."""
    total = 0.0
    for cd in context_data:
        if cd.n_data == 0:
            continue
        total += float(-energies(cd.data_F, weights).sum())
        total -= cd.n_data * cd.log_Z(weights)
    return total


def gradient(context_data: list[ContextData], weights: Weights) -> np.ndarray:
    """d log-likelihood / d theta, scaled by 1/N: the per-datum average of
    E_model[f] - f(d), with each datum using its own context's model
    expectation. Zero exactly when the model matches the data moments."""
    n_total = sum(cd.n_data for cd in context_data)
    if n_total == 0:
        raise ValueError("no data")
    g = np.zeros(N_FEATURES)
    for cd in context_data:
        if cd.n_data == 0:
            continue
        e_model = cd.model_expectations(weights)
        e_data = cd.data_F.mean(axis=0)
        g += cd.n_data * (e_model - e_data)
    return g / n_total


@dataclass
class TrainConfig:
    iterations: int = 100_000
    learning_rate: float = 0.1
    ll_every: int = 0  # 0: 20 trace points

    def trace_interval(self) -> int:
        if self.ll_every > 0:
            return self.ll_every
        return max(1, self.iterations // 20)


@dataclass
class TrainResult:
    weights: Weights
    trace: list[tuple[int, float]]  # (iteration, approximate log-likelihood)


def train(context_data: list[ContextData], variant: str = "full",
          config: TrainConfig | None = None) -> TrainResult:
    """Plain gradient ascent from a zero initialization on a fixed pool.
    Masked features stay exactly 0. Aborts with the trace on divergence."""
    config = config or TrainConfig()
    weights = Weights.zeros(variant)
    theta = weights.vector()
    active = weights.active_mask()
    trace: list[tuple[int, float]] = []
    interval = config.trace_interval()
    for it in range(config.iterations):
        w = weights.replace_vector(theta)
        if it % interval == 0:
            ll = log_likelihood(context_data, w)
            trace.append((it, ll))
            if not np.isfinite(ll):
                raise NumericError(f"training diverged at iteration {it}; trace={trace}")
        g = gradient(context_data, w)
        theta[active] += config.learning_rate * g[active]
        if not np.isfinite(theta).all():
            raise NumericError(f"training diverged at iteration {it}; trace={trace}")
    weights = weights.replace_vector(theta)
    trace.append((config.iterations, log_likelihood(context_data, weights)))
    return TrainResult(weights, trace)


# --------------------------------------------------------------------------
# Evaluation


def rank_correlation(program_energies: np.ndarray, human_frequencies: np.ndarray) -> float:
    """Spearman rho between -energy and frequency with average-rank ties.
    Lower energy should align with higher frequency, so a perfect
    anti-ordering of energy vs frequency gives rho = 1."""
    e = np.asarray(program_energies, dtype=np.float64)
    f = np.asarray(human_frequencies, dtype=np.float64)
    if e.size != f.size:
        raise ValueError("energy and frequency vectors must align")
    if e.size < 3:
        raise ValueError("need at least 3 distinct programs for a rank correlation")
    if np.ptp(e) == 0 or np.ptp(f) == 0:
        raise ValueError("undefined correlation: constant input")
    ra = rankdata(-e)
    rb = rankdata(f)
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    return float((ra @ rb) / math.sqrt((ra @ ra) * (rb @ rb)))


def heldout_spearman(cd: ContextData, weights: Weights) -> float:
    """Spearman rho between model energy and question frequency in one
    context, over that context's distinct questions. NaN when undefined."""
    by_text: dict[str, tuple[np.ndarray, int]] = {}
    for text, row in zip(cd.data_texts, cd.data_F):
        if text in by_text:
            by_text[text] = (by_text[text][0], by_text[text][1] + 1)
        else:
            by_text[text] = (row, 1)
    if len(by_text) < 3:
        return float("nan")
    rows = np.stack([r for r, _ in by_text.values()])
    freqs = np.array([n for _, n in by_text.values()], dtype=np.float64)
    e = energies(rows, weights)
    try:
        return rank_correlation(e, freqs)
    except ValueError:
        return float("nan")


@dataclass
class LoocvRow:
    variant: str
    held_out_context: str
    loglik: float
    mean_spearman: float


def loocv(context_data: list[ContextData], variants=VARIANTS,
          config: TrainConfig | None = None) -> list[LoocvRow]:
    """Leave-one-context-out: fit on the rest, score the held-out context.
    With 4 variants and 16 contexts this is the 64-fit layout."""
    rows = []
    for variant in variants:
        for held in context_data:
            train_set = [cd for cd in context_data if cd.context_id != held.context_id]
            result = train(train_set, variant, config)
            ll = log_likelihood([held], result.weights)
            rho = heldout_spearman(held, result.weights)
            rows.append(LoocvRow(variant, held.context_id, ll, rho))
    return rows


def loocv_summary(rows: list[LoocvRow]) -> dict[str, dict[str, float]]:
    """Per variant: mean held-out log-likelihood and mean Spearman rho
    (NaN rhos excluded)."""
    out: dict[str, dict[str, float]] = {}
    for variant in {r.variant for r in rows}:
        vs = [r for r in rows if r.variant == variant]
        lls = np.array([r.loglik for r in vs])
        rhos = np.array([r.mean_spearman for r in vs])
        rhos = rhos[~np.isnan(rhos)]
        out[variant] = {
            "mean_loglik": float(lls.mean()),
            "total_loglik": float(lls.sum()),
            "mean_spearman": float(rhos.mean()) if rhos.size else float("nan"),
        }
    return out


# --------------------------------------------------------------------------
# Bootstrap machinery for approximate-Z comparisons


def bootstrap_loglik(context_data: list[ContextData], weights: Weights,
                     n_replicates: int = 1000, seed: int = 0) -> np.ndarray:
    """Log-likelihood replicates under pool resampling of the Z estimate.
    Exact-universe bundles are not resampled (their Z is not estimated),
    so their replicates are constant."""
    rng = np.random.default_rng(seed)
    data_term = 0.0
    lw_by_ctx = []
    for cd in context_data:
        if cd.n_data == 0:
            continue
        data_term += float(-energies(cd.data_F, weights).sum())
        lw = -energies(cd.pool_F, weights)
        if not cd.exact:
            lw = lw - cd.pool_logq
        lw_by_ctx.append((cd, lw))
    out = np.empty(n_replicates)
    for rep in range(n_replicates):
        total = data_term
        for cd, lw in lw_by_ctx:
            if cd.exact:
                log_z = float(logsumexp(lw))
            else:
                pick = rng.integers(0, lw.size, size=lw.size)
                log_z = float(logsumexp(lw[pick]) - math.log(lw.size))
            total -= cd.n_data * log_z
        out[rep] = total
    return out


def bootstrap_compare(context_data: list[ContextData], weights_a: Weights,
                      weights_b: Weights, n_replicates: int = 1000,
                      seed: int = 0) -> float:
    """Fraction of bootstrap replicates where model A outscores model B."""
    ll_a = bootstrap_loglik(context_data, weights_a, n_replicates, seed)
    ll_b = bootstrap_loglik(context_data, weights_b, n_replicates, seed + 1)
    return float((ll_a > ll_b).mean())
