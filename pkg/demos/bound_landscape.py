"""Walk the convergence-bound landscape for one problem.

Shows how the generic last-iterate bound and its closed-form corollaries
move with the horizon T and the step-size scale, and where the complexity
estimate says a target accuracy is reached.
"""

import argparse

import lastiter as li


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--smoothness", type=float, default=1.0)
    parser.add_argument("--distance-sq", type=float, default=1.0)
    parser.add_argument("--noise", type=float, default=0.5)
    args = parser.parse_args()

    L, d2, s2 = args.smoothness, args.distance_sq, args.noise
    schedule = li.PolynomialStep(C=2.0, beta=0.5)

    print(f"constants: L={L} D^2={d2} sigma*^2={s2}, step 1/(2 L sqrt(T))")
    print(f"{'T':>8} {'gamma':>12} {'phi':>8} {'generic':>12} {'sqrt_c2':>12} {'tightest':>12}")
    for T in (10, 100, 1000, 10000, 100000):
        rep = li.build_bound_report(schedule, L, d2, s2, T)
        print(
            f"{T:>8} {rep.gamma:>12.5f} {rep.phi:>8.4f} "
            f"{rep.generic:>12.5f} {rep.sqrt_c2:>12.5f} {rep.tightest():>12.5f}"
        )
    print()

    # the generic bound is schedule-agnostic: feed it a fixed gamma and
    # watch the T^phi tilt fight the 1/T term
    print("constant step, varying gamma*L at T=1000:")
    T = 1000
    for gl in (0.05, 0.1, 0.3, 0.5, 0.8):
        gamma = gl / L
        value = li.last_iterate_bound(gamma, L, d2, s2, T)
        print(f"  gamma*L={gl:4.2f}  phi={li.phi(gamma, L):.4f}  bound={value:.5f}")
    print()

    for eps in (0.5, 0.1, 0.05):
        T_eps = li.complexity_horizon(eps, L, d2, s2)
        print(f"horizon for accuracy {eps:>5}: T = {T_eps}")
    print()

    # abc constants and the weight sequence behind the generic bound
    gamma = 0.5 / L
    consts = li.abc_constants(gamma, L, s2)
    print(f"gamma*L=0.5: a={consts.a:.6f} b={consts.b:.6f} c={consts.c:.6f} (a+b+c={consts.a + consts.b + consts.c:.1e})")
    ws = li.weight_sequence(20, consts.ratio_ab)
    print(f"weights for T=20, phi={ws.phi:.4f}: alpha_0={ws.alpha(0):.4f} ... alpha_19={ws.alpha(19):.4f}")
    print(f"max defining-relation residual: {max(ws.defining_residuals()):.2e}")


if __name__ == "__main__":
    main()
