"""Wall-clock comparison of batched and iterative selection.

The timed unit is one full selection pass: grouping a population's
matrices into classes, running the configured method for n events, and
expanding class picks back to individuals.  Each (regime, size, method)
cell is timed over several repetitions after one untimed warm-up; the
median is the headline number since single runs are noisy.

Regimes shape the matrices to stress different paths: ``discrete``
produces heavy ties and few classes, ``continuous_all_distinct`` forces
every per-case error to be unique (the case-by-case filter then does the
most work per event), and ``partial_support`` mixes in undefined
entries.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import RandomSource, build_classes, expand_class_selection
from .exceptions import ConfigError
from .selectors import SelectorConfig, select_classes

__all__ = ["REGIMES", "BenchRecord", "make_regime_matrices", "time_selection", "run_bench"]

REGIMES = ("discrete", "continuous_all_distinct", "partial_support")


@dataclass(frozen=True)
class BenchRecord:
    """One timed cell of the benchmark grid."""

    regime: str
    method: str
    n: int
    m: int
    k: int
    repetitions: int
    median_seconds: float
    min_seconds: float
    max_seconds: float

    CSV_FIELDS = (
        "regime",
        "method",
        "n",
        "m",
        "k",
        "repetitions",
        "median_seconds",
        "min_seconds",
        "max_seconds",
    )

    def to_csv_row(self) -> list[str]:
        return [
            self.regime,
            self.method,
            str(self.n),
            str(self.m),
            str(self.k),
            str(self.repetitions),
            repr(self.median_seconds),
            repr(self.min_seconds),
            repr(self.max_seconds),
        ]


def make_regime_matrices(
    regime: str, n: int, m: int, rng: RandomSource
) -> tuple[np.ndarray, np.ndarray | None]:
    """Generate an (errors, support) pair for a benchmark regime."""
    if regime not in REGIMES:
        raise ConfigError(f"regime: unknown regime {regime!r}, expected one of {REGIMES}")
    gen = rng.generator(0)
    if regime == "discrete":
        return gen.integers(0, 6, (n, m)).astype(np.float64), None
    if regime == "continuous_all_distinct":
        # Shuffled ranks plus a sub-unit jitter: values stay distinct
        # within every column.
        errors = np.empty((n, m))
        for j in range(m):
            errors[:, j] = gen.permutation(n) + gen.random(n) * 0.5
        return errors, None
    support = (gen.random((n, m)) < 0.35).astype(np.float64)
    empty = ~support.any(axis=1)
    if empty.any():
        support[np.flatnonzero(empty), gen.integers(0, m, int(empty.sum()))] = 1.0
    errors = gen.integers(0, 6, (n, m)).astype(np.float64) * support
    return errors, support


def time_selection(
    errors: np.ndarray,
    support: np.ndarray | None,
    cfg: SelectorConfig,
    n_events: int,
    rng: RandomSource,
    repetitions: int = 5,
) -> tuple[float, list[float]]:
    """Median wall time of the population-to-parents pipeline.

    Runs one untimed warm-up, then ``repetitions`` identical timed
    passes (same substreams, so identical work).  Returns the median and
    the individual times.
    """
    if repetitions < 3:
        raise ConfigError(f"repetitions: need >= 3 for a stable median, got {repetitions}")

    def run():
        classing = build_classes(errors, support)
        picks = select_classes(classing, n_events, cfg, rng)
        return expand_class_selection(classing, picks, rng)

    run()
    times = []
    for _ in range(repetitions):
        start = time.perf_counter()
        run()
        times.append(time.perf_counter() - start)
    return float(np.median(times)), times


def run_bench(
    regime: str,
    sizes,
    configs,
    rng: RandomSource,
    repetitions: int = 5,
    n_events: int | None = None,
) -> list[BenchRecord]:
    """Time every (size, method) cell on one regime's matrices.

    ``sizes`` is a sequence of (n, m) pairs; ``configs`` a sequence of
    :class:`SelectorConfig`.  Events per pass default to n, selecting a
    full replacement population.
    """
    records = []
    for idx, (n, m) in enumerate(sizes):
        errors, support = make_regime_matrices(regime, n, m, rng.child(idx))
        k = build_classes(errors, support).k
        events = n if n_events is None else n_events
        for cfg in configs:
            median, times = time_selection(
                errors, support, cfg, events, rng.child(idx), repetitions
            )
            records.append(
                BenchRecord(
                    regime=regime,
                    method=cfg.method,
                    n=n,
                    m=m,
                    k=k,
                    repetitions=repetitions,
                    median_seconds=median,
                    min_seconds=float(min(times)),
                    max_seconds=float(max(times)),
                )
            )
    return records
