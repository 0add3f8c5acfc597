// Cools the target qubit with a hot bath and prints the population, both models side by side.
#include <cstdio>

#include "qar/experiments.hpp"

int main() {
    qar::ExperimentSpec spec;
    spec.kind = qar::ExperimentKind::reset_trace;
    spec.n_h = {21.424};
    spec.times = qar::linspace(0.0, 2e-6, 11);

    const auto rate = qar::run_reset_trace(spec);
    spec.model = qar::ModelKind::lindblad;
    const auto full = qar::run_reset_trace(spec);

    std::printf("%10s %12s %12s\n", "t (us)", "rate model", "lindblad");
    for (std::size_t k = 0; k < rate.times.size(); ++k) {
        std::printf("%10.2f %12.4e %12.4e\n", rate.times[k] * 1e6, rate.p1[k], full.p1[k]);
    }
    std::printf("reset time (P = 0.01): %.0f ns\n", qar::reset_time(rate) * 1e9);

    qar::ExperimentSpec cop = spec;
    cop.kind = qar::ExperimentKind::cop_table;
    const auto pt = qar::compute_cop(cop, 21.424, 0.0);
    std::printf("steady-state COP %.3f (Carnot %.3f)\n", pt.lindblad.cop, pt.lindblad.carnot);
}
