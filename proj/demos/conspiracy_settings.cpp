// A deterministic hidden-variable source can "violate" the space-1 bound
// without any nonlocality: let the setting choice peek at lambda. The same
// response table stays within [-1, 0] under fair coin-flip settings and
// climbs to +1 as the settings become fully conspiratorial. What breaks is
// the independence of settings and source, not locality.

#include <cstdio>

#include "belllab/belllab.hpp"

using namespace belllab;

int main() {
    // Four lambdas; each one answers the four contexts differently.
    ResponseTable table;
    table.left[0] = {1, 1, 0, 0};  // unprimed
    table.left[1] = {0, 0, 1, 0};  // primed
    table.right[0] = {1, 0, 1, 0}; // unprimed
    table.right[1] = {0, 1, 0, 0}; // primed

    ModelSpec honest;
    honest.kind = ModelKind::LhvDeterministic;
    honest.response = table;
    honest.lambda_weights = uniform_weights(4);
    std::printf("exact value under fair settings: %.4f\n\n",
                ch_value(lhv_exact_ch_terms(honest)));

    // With bias b the setting pair equals lambda with probability b and is
    // uniform otherwise, so the value interpolates 1.25 b - 0.25: the bound
    // breaks as soon as b > 0.2.
    std::printf("%8s %12s %12s   %s\n", "bias", "estimate", "stderr", "verdict");
    for (double bias : {0.0, 0.1, 0.2, 0.4, 0.7, 1.0}) {
        ModelSpec spec = honest;
        if (bias > 0.0) {
            spec.kind = ModelKind::Conspiracy;
            spec.conspiracy_bias = bias;
        }
        const ChEvaluation eval = space1_ch(accumulate(run_trials(spec, 400000, 29, 4)));
        const CheckedEvaluation checked = flag_violation(eval);
        std::printf("%8.2f %12.4f %12.4f   %s\n", bias, eval.s, eval.stderr_,
                    checked.violated ? "VIOLATED" : "within bounds");
    }

    std::printf("\nsame table, same lambda weights, same estimator; only the setting draw "
                "changed\n");
    return 0;
}
