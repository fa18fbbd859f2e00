"""Parent selection methods.

Four methods share one calling convention: they take an
:class:`~lexsel.core.EquivalenceClassing` and return one selected class
index per selection event.

``dalex`` replaces lexicase's sequential case filtering with a single
weighted aggregation.  Each event draws a row of importance scores, one
per case; a softmax turns the scores into case weights; the class with
the lowest weighted mean error wins.  The spread of the scores (the
particularity pressure) controls how concentrated the weights are: zero
pressure weights all cases equally, while large pressures let a single
case dominate, which reproduces lexicase's hyper-selective behavior.
Because every event is an independent row, thousands of events reduce to
one matrix product.

``lexicase``, ``epsilon_lexicase``, and ``batch_lexicase`` are the
classic iterative filters, kept both as references and as baselines.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import (
    EVENT_STREAM,
    IMPORTANCE_STREAM,
    TIEBREAK_STREAM,
    EquivalenceClassing,
    RandomSource,
    build_classes,
    expand_class_selection,
    standardize_per_case,
)
from .exceptions import ConfigError, ShapeError

__all__ = [
    "METHODS",
    "IMPORTANCE_DISTRIBUTIONS",
    "SelectorConfig",
    "config_from_mapping",
    "config_to_mapping",
    "sample_importance",
    "softmax_rows",
    "weighted_fitness",
    "dalex_select",
    "lexicase_select",
    "epsilon_for_cases",
    "epsilon_lexicase_select",
    "batch_lexicase_select",
    "select_classes",
    "select_parents",
]

METHODS = ("dalex", "lexicase", "epsilon_lexicase", "batch_lexicase")
IMPORTANCE_DISTRIBUTIONS = ("normal", "uniform", "shuffled_range")
BATCH_THRESHOLD_MODES = ("mad", "absolute")


@dataclass(frozen=True)
class SelectorConfig:
    """Hyperparameters for one selection method.

    Parameters
    ----------
    method : str
        One of ``dalex``, ``lexicase``, ``epsilon_lexicase``,
        ``batch_lexicase``.
    pressure : float
        Particularity pressure: the standard deviation of the importance
        scores.  Zero collapses dalex to a mean-error argmin; values
        around 200 make it nearly indistinguishable from lexicase.
    distribution : str
        Importance score distribution: ``normal``, ``uniform``, or
        ``shuffled_range`` (each event a random permutation of an evenly
        spaced grid).
    relaxed : bool
        Standardize each case column to mean 0 / std 1 before weighting,
        so cases with larger error scales cannot dominate.
    batch_size : int
        Cases per batch for ``batch_lexicase``.
    batch_threshold_mode : str
        ``mad`` derives the survival threshold from the batch means'
        median absolute deviation; ``absolute`` uses a fixed value.
    batch_threshold_value : float
        The fixed threshold used by ``absolute`` mode.
    """

    method: str
    pressure: float = 20.0
    distribution: str = "normal"
    relaxed: bool = False
    batch_size: int = 1
    batch_threshold_mode: str = "mad"
    batch_threshold_value: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(
                f"method: unknown method {self.method!r}, expected one of {METHODS}"
            )
        if self.distribution not in IMPORTANCE_DISTRIBUTIONS:
            raise ConfigError(
                f"distribution: unknown distribution {self.distribution!r}, "
                f"expected one of {IMPORTANCE_DISTRIBUTIONS}"
            )
        if not np.isfinite(self.pressure) or self.pressure < 0:
            raise ConfigError(f"pressure: must be a finite value >= 0, got {self.pressure}")
        if not isinstance(self.batch_size, (int, np.integer)) or self.batch_size < 1:
            raise ConfigError(f"batch_size: must be an integer >= 1, got {self.batch_size}")
        if self.batch_threshold_mode not in BATCH_THRESHOLD_MODES:
            raise ConfigError(
                f"batch_threshold_mode: unknown mode {self.batch_threshold_mode!r}, "
                f"expected one of {BATCH_THRESHOLD_MODES}"
            )
        if not np.isfinite(self.batch_threshold_value) or self.batch_threshold_value < 0:
            raise ConfigError(
                "batch_threshold_value: must be a finite value >= 0, "
                f"got {self.batch_threshold_value}"
            )


_CONFIG_KEYS = (
    "method",
    "pressure",
    "distribution",
    "relaxed",
    "batch_size",
    "batch_threshold_mode",
    "batch_threshold_value",
    "seed",
)

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


def config_from_mapping(mapping: Mapping[str, str]) -> tuple[SelectorConfig, int | None]:
    """Build a config (plus optional seed) from flat string key-values.

    This is the on-disk form used by config files.  Unknown keys and
    unparsable values raise :class:`ConfigError` naming the key.
    """
    for key in mapping:
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{key}: unknown config key")
    if "method" not in mapping:
        raise ConfigError("method: required config key is missing")

    def parse(key, conv, default):
        if key not in mapping:
            return default
        raw = str(mapping[key]).strip()
        try:
            return conv(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: could not parse value {raw!r}") from None

    def parse_bool(raw: str) -> bool:
        word = raw.lower()
        if word in _TRUE_WORDS:
            return True
        if word in _FALSE_WORDS:
            return False
        raise ValueError(raw)

    cfg = SelectorConfig(
        method=str(mapping["method"]).strip(),
        pressure=parse("pressure", float, 20.0),
        distribution=parse("distribution", str, "normal"),
        relaxed=parse("relaxed", parse_bool, False),
        batch_size=parse("batch_size", int, 1),
        batch_threshold_mode=parse("batch_threshold_mode", str, "mad"),
        batch_threshold_value=parse("batch_threshold_value", float, 0.0),
    )
    seed = parse("seed", int, None)
    if seed is not None and seed < 0:
        raise ConfigError(f"seed: must be >= 0, got {seed}")
    return cfg, seed


def config_to_mapping(cfg: SelectorConfig, seed: int | None = None) -> dict[str, str]:
    """Serialize a config to the flat string form read back by
    :func:`config_from_mapping`."""
    out = {
        "method": cfg.method,
        "pressure": repr(float(cfg.pressure)),
        "distribution": cfg.distribution,
        "relaxed": "true" if cfg.relaxed else "false",
        "batch_size": str(cfg.batch_size),
        "batch_threshold_mode": cfg.batch_threshold_mode,
        "batch_threshold_value": repr(float(cfg.batch_threshold_value)),
    }
    if seed is not None:
        out["seed"] = str(seed)
    return out


def sample_importance(
    n_events: int, m: int, cfg: SelectorConfig, rng: RandomSource
) -> np.ndarray:
    """Draw an (n_events, m) matrix of importance scores.

    Every distribution is scaled so its standard deviation equals the
    particularity pressure.  ``shuffled_range`` fills each row with an
    independent random permutation of m evenly spaced values centered at
    zero; its spacing grows with the pressure, and once consecutive
    weights are further apart than the largest possible error ratio the
    induced score order decides selection exactly like lexicase.
    """
    if n_events < 1 or m < 1:
        raise ShapeError(f"need n_events >= 1 and m >= 1, got {n_events}, {m}")
    gen = rng.generator(IMPORTANCE_STREAM)
    if cfg.distribution == "normal":
        return gen.normal(0.0, cfg.pressure, size=(n_events, m))
    if cfg.distribution == "uniform":
        half = cfg.pressure * np.sqrt(3.0)
        return gen.uniform(-half, half, size=(n_events, m))
    # shuffled_range: grid spacing chosen so the population std of the m
    # grid values equals the pressure.
    if m == 1:
        return np.zeros((n_events, 1))
    grid_std = np.sqrt((m * m - 1) / 12.0)
    grid = (np.arange(m, dtype=np.float64) - (m - 1) / 2.0) * (cfg.pressure / grid_std)
    tiled = np.tile(grid, (n_events, 1))
    return gen.permuted(tiled, axis=1)


def softmax_rows(scores) -> np.ndarray:
    """Row-wise softmax with max-subtraction for overflow safety.

    Entries that underflow to zero are clamped to the smallest positive
    normal float so weights stay strictly positive; support-normalization
    denominators then never vanish.  Each row still sums to 1 within
    1e-9.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2:
        raise ShapeError(f"scores must be 2-D, got shape {s.shape}")
    if not np.isfinite(s).all():
        raise ShapeError("scores contain non-finite entries")
    z = s - s.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    np.maximum(z, np.finfo(np.float64).tiny, out=z)
    return z


def weighted_fitness(classing: EquivalenceClassing, weights: np.ndarray) -> np.ndarray:
    """Fitness of every class under every weight row.

    Entry (i, c) is the weighted mean error of class c over the cases it
    is defined on: ``(sum_j w_ij e_cj) / (sum_j w_ij s_cj)``.  With full
    support the denominator is identically 1 and is skipped.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != classing.m:
        raise ShapeError(
            f"weights shape {weights.shape} does not match m={classing.m}"
        )
    fitness = weights @ classing.class_errors.T
    if not classing.full_support:
        fitness /= weights @ classing.class_support.T
    return fitness


def _uniform_pick_from_mask(mask: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Pick one set column per row, uniformly among that row's set columns.

    One uniform is drawn per row whether or not that row has several
    candidates, so stream consumption does not depend on the data.
    """
    counts = mask.sum(axis=1)
    u = gen.random(mask.shape[0])
    if (counts == 1).all():
        return mask.argmax(axis=1)
    target = np.minimum(np.floor(u * counts).astype(np.int64), counts - 1)
    cum = mask.cumsum(axis=1)
    return (cum > target[:, None]).argmax(axis=1)


def _argmin_uniform_ties(fitness: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Per-row argmin with ties broken uniformly at random."""
    rowmin = fitness.min(axis=1, keepdims=True)
    return _uniform_pick_from_mask(fitness == rowmin, gen)


def _agreed_cases(tie_mask: np.ndarray, class_errors: np.ndarray) -> np.ndarray:
    """Per event, the cases on which every flagged class has the same
    error.  Chunked so the (events, classes, cases) cube stays small."""
    n = tie_mask.shape[0]
    k, m = class_errors.shape
    out = np.empty((n, m), dtype=bool)
    chunk = max(1, 2_000_000 // (k * m))
    for start in range(0, n, chunk):
        t = tie_mask[start : start + chunk]
        vals = np.where(t[:, :, None], class_errors[None, :, :], np.nan)
        out[start : start + chunk] = np.nanmax(vals, axis=1) == np.nanmin(vals, axis=1)
    return out


def _cascaded_argmin(
    scores: np.ndarray, class_errors: np.ndarray, gen: np.random.Generator
) -> np.ndarray:
    """Argmin of softmax-weighted mean error per event, faithful to the
    real-valued computation across the full pressure range.

    High pressure spreads the case weights over many more orders of
    magnitude than a float64 sum can represent, so the contributions
    that should separate classes tied on the heaviest cases are rounded
    away and the argmin degenerates into a coin flip.  The cascade
    recovers the lost information: after one aggregation pass, classes
    whose fitness is bit-equal have (up to absorbed terms) identical
    contributions, so the cases on which all tied classes agree cancel
    exactly and can be removed; the remaining scores are re-shifted,
    which brings the previously underflowed weights back into float
    range, and the contested events are aggregated again.  Each round
    settles an event or removes at least one of its cases, so at most m
    rounds run; without bit-equal ties the loop exits after one.  Ties
    that persist with no agreed case left lie below float resolution
    and are broken uniformly, one draw per event either way.
    """
    n_events, m = scores.shape
    k = class_errors.shape[0]
    survivors = np.ones((n_events, k), dtype=bool)
    usable = np.ones((n_events, m), dtype=bool)
    active = np.arange(n_events)
    for _ in range(m + 1):
        s = np.where(usable[active], scores[active], -np.inf)
        z = s - s.max(axis=1, keepdims=True)
        np.exp(z, out=z)
        z /= z.sum(axis=1, keepdims=True)
        # Subnormal weights cost an order of magnitude in the matrix
        # product and can only matter when every larger contribution
        # cancels bit-exactly; flushing them to zero turns that corner
        # into a tie the later rounds resolve at full precision, the
        # same way masked cases are.
        z[z < np.finfo(np.float64).tiny] = 0.0
        fitness = np.where(survivors[active], z @ class_errors.T, np.inf)
        tied = fitness == fitness.min(axis=1, keepdims=True)
        survivors[active] = tied
        contested = tied.sum(axis=1) > 1
        if not contested.any():
            break
        sub = active[contested]
        dropped = _agreed_cases(survivors[sub], class_errors) & usable[sub]
        usable[sub] &= ~dropped
        # Events keep cascading only while the round removed something
        # and a case is left to weigh.  Running out of cases means the
        # tied classes have identical error rows (duplicates kept as
        # separate classes), a genuine tie.
        active = sub[dropped.any(axis=1) & usable[sub].any(axis=1)]
        if active.size == 0:
            break
    return _uniform_pick_from_mask(survivors, gen)


def dalex_select(
    classing: EquivalenceClassing,
    n_events: int,
    cfg: SelectorConfig,
    rng: RandomSource,
    importance: np.ndarray | None = None,
) -> np.ndarray:
    """Run ``n_events`` weighted-aggregation selection events at once.

    Per event: importance scores -> softmax case weights w -> fitness of
    class c is (sum_j w_j e_cj) / (sum_j w_j s_cj), i.e. the weighted
    mean error over the cases the class is defined on.  With full
    support the denominator is identically 1 and is skipped.  The argmin
    class per event wins, ties broken uniformly at random.

    ``importance`` lets callers inject pre-drawn scores (shape
    ``(n_events, m)``); by default scores come from
    :func:`sample_importance`.

    With full support, aggregation runs through a tie-resolving cascade
    (:func:`_cascaded_argmin`) so that high pressure yields the
    lexicographic order the weights encode instead of float64 round-off
    noise.  Partial support keeps the single-pass computation: dividing
    by per-class support mass leaves no exact cancellation to exploit.
    """
    if cfg.method != "dalex":
        raise ConfigError(f"method: dalex_select called with method {cfg.method!r}")
    class_errors = classing.class_errors
    if cfg.relaxed:
        class_errors = standardize_per_case(class_errors, classing.sizes)
    if importance is None:
        importance = sample_importance(n_events, classing.m, cfg, rng)
    else:
        importance = np.asarray(importance, dtype=np.float64)
        if importance.shape != (n_events, classing.m):
            raise ShapeError(
                f"importance shape {importance.shape} does not match "
                f"({n_events}, {classing.m})"
            )
    gen = rng.generator(TIEBREAK_STREAM)
    if classing.full_support:
        # Shift each case so its best class sits at zero.  The shift adds
        # the same constant to every class's fitness within an event, so
        # the argmin is unchanged, but classes tied at a case's minimum
        # now contribute nothing there and fewer cascade rounds are
        # needed to separate the rest.
        class_errors = class_errors - class_errors.min(axis=0, keepdims=True)
        return _cascaded_argmin(importance, class_errors, gen)
    if class_errors is not classing.class_errors:
        classing = EquivalenceClassing(
            class_errors=class_errors,
            class_support=classing.class_support,
            members=classing.members,
        )
    fitness = weighted_fitness(classing, softmax_rows(importance))
    return _argmin_uniform_ties(fitness, gen)


def _finish_event(
    alive: np.ndarray, sizes: np.ndarray, gen: np.random.Generator
) -> int:
    """Resolve an event that still has several surviving classes.

    The pick is weighted by class member counts so it matches a uniform
    draw over the surviving individuals.
    """
    if alive.size == 1:
        return int(alive[0])
    cum = np.cumsum(sizes[alive])
    u = gen.random() * cum[-1]
    return int(alive[np.searchsorted(cum, u, side="right")])


def _survivors_for_order(
    errors: np.ndarray,
    support: np.ndarray | None,
    order: np.ndarray,
    epsilons: np.ndarray | None = None,
) -> np.ndarray:
    """Filter classes case by case in the given order; return survivors.

    Each case keeps the classes whose error is within ``epsilons`` of
    the minimum among the classes still in the running (zero tolerance
    when ``epsilons`` is None).  A case on which no survivor is defined
    is skipped; classes undefined on a case are never elite on it.
    """
    alive = np.arange(errors.shape[0])
    for c in order:
        if alive.size == 1:
            break
        col = errors[alive, c]
        if support is not None:
            defined = support[alive, c]
            if not defined.any():
                continue
            col = np.where(defined, col, np.inf)
        threshold = col.min()
        if epsilons is not None:
            threshold += epsilons[c]
        alive = alive[col <= threshold]
    return alive


def lexicase_select(
    classing: EquivalenceClassing, n_events: int, rng: RandomSource
) -> np.ndarray:
    """Classic lexicase selection, one event at a time.

    Each event shuffles the cases uniformly, then repeatedly keeps only
    the classes with minimum error on the next case.  The lone survivor
    wins; if the cases run out first, the winner is drawn uniformly over
    the surviving individuals.
    """
    return _iterative_select(classing, n_events, rng, epsilons=None)


def _iterative_select(
    classing: EquivalenceClassing,
    n_events: int,
    rng: RandomSource,
    epsilons: np.ndarray | None,
) -> np.ndarray:
    if n_events < 1:
        raise ShapeError(f"need n_events >= 1, got {n_events}")
    errors = classing.class_errors
    support = None if classing.full_support else classing.class_support.astype(bool)
    sizes = classing.sizes
    out = np.empty(n_events, dtype=np.int64)
    for i in range(n_events):
        gen = rng.generator(EVENT_STREAM, i)
        order = gen.permutation(classing.m)
        alive = _survivors_for_order(errors, support, order, epsilons)
        out[i] = _finish_event(alive, sizes, gen)
    return out


def epsilon_for_cases(classing: EquivalenceClassing) -> np.ndarray:
    """Per-case tolerance: median absolute deviation from the median.

    Computed over the full population, so class rows are weighted by
    their member counts.  Even-length medians average the two middle
    values.
    """
    reps = np.repeat(classing.class_errors, classing.sizes, axis=0)
    med = np.median(reps, axis=0)
    return np.median(np.abs(reps - med), axis=0)


def epsilon_lexicase_select(
    classing: EquivalenceClassing,
    n_events: int,
    rng: RandomSource,
    epsilons: np.ndarray | None = None,
) -> np.ndarray:
    """Lexicase with a per-case survival tolerance.

    The tolerance vector defaults to :func:`epsilon_for_cases` computed
    once from the full population; during an event each case keeps the
    classes within ``eps`` of the minimum among those still remaining.
    Passing ``epsilons`` explicitly overrides the MAD computation (an
    all-zero vector reproduces plain lexicase).
    """
    if epsilons is None:
        epsilons = epsilon_for_cases(classing)
    else:
        epsilons = np.asarray(epsilons, dtype=np.float64)
        if epsilons.shape != (classing.m,):
            raise ShapeError(
                f"epsilons shape {epsilons.shape} does not match m={classing.m}"
            )
        if not np.isfinite(epsilons).all() or (epsilons < 0).any():
            raise ShapeError("epsilons must be finite and >= 0")
    return _iterative_select(classing, n_events, rng, epsilons=epsilons)


def batch_lexicase_select(
    classing: EquivalenceClassing,
    n_events: int,
    cfg: SelectorConfig,
    rng: RandomSource,
) -> np.ndarray:
    """Lexicase over batches of cases instead of single cases.

    Each event shuffles the cases and partitions them into consecutive
    batches of ``cfg.batch_size`` (the last batch may be smaller; sizes
    above m are clamped to m).  A class's score on a batch is its mean
    error over the batch cases it is defined on; classes defined on no
    case in the batch are skipped past only if every survivor is.  A
    batch keeps the classes within a threshold of the minimum score:
    ``mad`` mode uses the median absolute deviation of the survivors'
    batch means, ``absolute`` mode a fixed value.  Batch size 1 with a
    zero absolute threshold reproduces plain lexicase.
    """
    if cfg.method != "batch_lexicase":
        raise ConfigError(
            f"method: batch_lexicase_select called with method {cfg.method!r}"
        )
    if n_events < 1:
        raise ShapeError(f"need n_events >= 1, got {n_events}")
    errors = classing.class_errors
    full = classing.full_support
    support = classing.class_support
    sizes = classing.sizes
    m = classing.m
    b = min(cfg.batch_size, m)
    absolute = cfg.batch_threshold_mode == "absolute"
    out = np.empty(n_events, dtype=np.int64)
    for i in range(n_events):
        gen = rng.generator(EVENT_STREAM, i)
        order = gen.permutation(m)
        alive = np.arange(classing.k)
        for start in range(0, m, b):
            if alive.size == 1:
                break
            batch = order[start : start + b]
            sub = errors[np.ix_(alive, batch)]
            if full:
                means = sub.mean(axis=1)
                defined = None
            else:
                cover = support[np.ix_(alive, batch)]
                counts = cover.sum(axis=1)
                defined = counts > 0
                if not defined.any():
                    continue
                means = np.where(
                    defined, (sub * cover).sum(axis=1) / np.maximum(counts, 1), np.inf
                )
            if absolute:
                tau = cfg.batch_threshold_value
            else:
                vals = means if defined is None else means[defined]
                weights = sizes[alive] if defined is None else sizes[alive][defined]
                reps = np.repeat(vals, weights)
                tau = np.median(np.abs(reps - np.median(reps)))
            alive = alive[means <= means.min() + tau]
        out[i] = _finish_event(alive, sizes, gen)
    return out


def select_classes(
    classing: EquivalenceClassing,
    n_events: int,
    cfg: SelectorConfig,
    rng: RandomSource,
) -> np.ndarray:
    """Dispatch to the selector named by ``cfg.method``."""
    if cfg.method == "dalex":
        return dalex_select(classing, n_events, cfg, rng)
    if cfg.method == "lexicase":
        return lexicase_select(classing, n_events, rng)
    if cfg.method == "epsilon_lexicase":
        return epsilon_lexicase_select(classing, n_events, rng)
    return batch_lexicase_select(classing, n_events, cfg, rng)


def select_parents(
    errors,
    support,
    cfg: SelectorConfig,
    n_events: int,
    rng: RandomSource,
) -> np.ndarray:
    """Full pipeline on raw matrices: group, select classes, expand.

    Returns one selected individual index per event.
    """
    classing = build_classes(errors, support)
    picks = select_classes(classing, n_events, cfg, rng)
    return expand_class_selection(classing, picks, rng)
