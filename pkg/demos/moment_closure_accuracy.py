"""How far can the second-order closure be trusted?

The closed three-moment system replaces the softmax inside expectations
by a Taylor expansion around the mean value gap.  At beta=0 the policy
is constant and the closure is exact; as beta grows the truncation error
grows with it.  This script propagates the closed system next to a large
simulated ensemble and tabulates the relative error of each moment at
the end of a long run, for unbiased and confirmation-biased rates.
"""

import numpy as np

from banditlab import (
    Environment,
    MomentState,
    Policy,
    QAgentSpec,
    ensemble_value_moments,
    propagate_moments,
    x_curve_rates,
)

HORIZON = 300
REPLICAS = 40_000
SEED = 11


def run_case(x: float, beta: float):
    rates = x_curve_rates(x)
    env = Environment(p1=0.5, p2=0.5, counterfactual=True, horizon=HORIZON)
    agent = QAgentSpec(rates, Policy(beta=beta))
    mc = ensemble_value_moments(agent, env, REPLICAS, seed=SEED)
    closed = propagate_moments(MomentState.point_mass(0.5), rates, 0.5,
                               beta, HORIZON)
    m = closed[-1]
    t = HORIZON
    rel = lambda a, b: (a - b) / b
    return (rel(m.m1, mc.mean1[t]), rel(m.m11, mc.mean11[t]),
            rel(m.m12, mc.mean12[t]))


def main():
    print(f"closure vs {REPLICAS}-replica ensemble after {HORIZON} trials "
          "(relative error)")
    print(f"{'x':>5} {'beta':>5} {'m1':>9} {'m11':>9} {'m12':>9}")
    for x in (1.0, 0.6, 1.5):
        for beta in (0.0, 1.0, 3.0, 5.0):
            try:
                e1, e11, e12 = run_case(x, beta)
            except Exception as e:
                print(f"{x:>5} {beta:>5}  ({e})")
                continue
            print(f"{x:>5} {beta:>5} {e1:>9.4f} {e11:>9.4f} {e12:>9.4f}")
    print()
    print("beta=0 rows are exact up to sampling noise; the truncation error "
          "grows with beta\nand with the bias level, fastest in the cross "
          "moment m12.  the last row sits in\nthe regime where the closed "
          "system has no admissible fixed point: the simulated\nensemble "
          "stays bounded but the propagated second moments run away, which "
          "is the\nclosure announcing its own breakdown.")


if __name__ == "__main__":
    main()
