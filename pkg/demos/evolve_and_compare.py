"""Selection methods driving the miniature evolutionary harness.

Runs the same seeded search under lexicase and under high-pressure
weighted aggregation, traces how faithfully the latter's per-generation
selection distribution follows the former, and closes with a wall-clock
comparison on a population large enough for the batched path to pay off.

Run:  python3 demos/evolve_and_compare.py
"""

import numpy as np

from lexsel import (
    RandomSource,
    SelectorConfig,
    SyntheticProblem,
    fidelity_trace,
    make_regime_matrices,
    run_evolution,
    time_selection,
)

PROBLEM = SyntheticProblem(kind="discrete_vector", m=8, n_keys=4, n_values=8, seed=22)
POP, GENERATIONS = 60, 25


def main():
    print(f"problem: {PROBLEM.kind}, {PROBLEM.m} cases, "
          f"{PROBLEM.n_keys} keys x {PROBLEM.n_values} values\n")

    configs = {
        "lexicase": SelectorConfig(method="lexicase"),
        "dalex p=200": SelectorConfig(method="dalex", pressure=200.0),
        "epsilon lexicase": SelectorConfig(method="epsilon_lexicase"),
    }
    print(f"{'method':>17}  {'solved':>6}  {'generation':>10}  {'best gen-0':>10}")
    for name, cfg in configs.items():
        result = run_evolution(PROBLEM, cfg, POP, GENERATIONS, RandomSource(5))
        when = "-" if result.success_generation is None else str(result.success_generation)
        first = result.records[0].best_error
        solved = "yes" if result.success else "no"
        print(f"{name:>17}  {solved:>6}  {when:>10}  {first:>10.1f}")

    print("\nper-generation fidelity of dalex against the lexicase")
    print("distribution over the same population (exact reference,")
    print("probability ratio tracks the eventual winner's ancestor):")
    reports, result = fidelity_trace(
        PROBLEM,
        SelectorConfig(method="lexicase"),
        SelectorConfig(method="dalex", pressure=200.0),
        POP,
        GENERATIONS,
        RandomSource(5),
        n_samples=20_000,
    )
    print(f"  {'generation':>10}  {'JS divergence':>14}  {'ratio':>7}")
    for report in reports:
        ratio = "-" if report.probability_ratio is None else f"{report.probability_ratio:.3f}"
        print(f"  {report.generation:>10}  {report.js_divergence:>14.5f}  {ratio:>7}")

    print("\nwall clock, one full selection pass (n=1000, m=200, all errors")
    print("distinct so the iterative filter works hardest):")
    errors, support = make_regime_matrices(
        "continuous_all_distinct", 1000, 200, RandomSource(7)
    )
    for name, cfg in (
        ("lexicase", SelectorConfig(method="lexicase")),
        ("dalex p=200", SelectorConfig(method="dalex", pressure=200.0)),
    ):
        median, _ = time_selection(errors, support, cfg, 1000, RandomSource(8))
        print(f"  {name:>12}: {median * 1e3:7.1f} ms")


if __name__ == "__main__":
    main()
