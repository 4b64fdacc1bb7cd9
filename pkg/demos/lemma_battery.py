"""Run the numeric inequality battery and print its findings.

Every analytic ingredient of the convergence bounds is checked on grids:
variance transfer between reference points, the one-step descent
inequality, weight-sum envelopes, the exponent comparison (with its known
t=1 boundary failure), chord convexity of exp, and the two-sided Gamma
ratio envelope.
"""

import lastiter as li


def main():
    plan = li.load_lemma_plan()
    print(f"problems: {[label for label, _, _ in plan.entries]}")
    print()
    results = li.run_battery(list(plan.entries), plan.grids)
    for r in results:
        mark = "pass" if r.passed else "FAIL"
        flag = "  [flagged boundary]" if r.flagged else ""
        print(f"{r.lemma_id:<28} {mark}{flag}")
        print(f"    grid={r.grid_size}  worst_slack={r.worst_slack:+.3e}")
        if r.lemma_id == "exponent_inequality":
            d = r.details
            print(
                f"    boundary t=1: lhs={d['boundary_lhs']:.4f} > rhs={d['boundary_rhs']:.4f}; "
                f"holds for t >= {d['first_valid_t_max']:.2f} on every theta: "
                f"{d['holds_beyond_first_valid']}"
            )
    print()
    gating = [r for r in results if not r.passed and not r.flagged]
    print(f"gating failures: {len(gating)}")


if __name__ == "__main__":
    main()
