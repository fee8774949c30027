// Train on half of the subjects of a generated gesture set, test on the other half,
// and compare the euclidean and regularized elastic kernels.

#include "gesturekit/eval.hpp"
#include "gesturekit/synthetic.hpp"

#include <cstdio>

int main() {
    using namespace gesturekit;

    const dataset data = make_synthetic(synthetic_options::hard(7));
    std::printf("%zu sequences, %zu classes, %zu subjects\n", data.size(), data.class_set().size(), data.subject_set().size());

    const std::vector<split_plan> plans{ fixed_split(data, { "s01", "s02", "s03", "s04", "s05" }, { "s06", "s07", "s08", "s09", "s10" }) };

    for (const auto family : { kernel_family::euclid, kernel_family::rdtw }) {
        experiment_config config;
        config.poses = 15;
        config.spec.family = family;
        config.spec.nu = 1.0;
        config.spec.sigma = 1.0;
        config.relative_sigma = true;
        config.C = 100.0;
        const eval_report report = run_experiment(data, plans, config);
        std::printf("%-6s test accuracy %6.2f%%  train accuracy %6.2f%%\n", std::string{ to_string(family) }.c_str(), report.mean_test,
                    report.mean_train);
    }

    // a standalone model classifies raw sequences of any length
    experiment_config config;
    config.spec.sigma = 1.0;
    config.relative_sigma = true;
    config.C = 100.0;
    const auto trained = train_model(data, config);
    const pose_sequence &probe = data.sequences().back();
    std::printf("%s (%zu frames) -> %s\n", probe.id.c_str(), probe.length(), classify(trained.model, probe).c_str());
    return 0;
}
