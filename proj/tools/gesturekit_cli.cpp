// gesturekit command-line driver.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.

#include "gesturekit/eval.hpp"
#include "gesturekit/mocap.hpp"
#include "gesturekit/svm.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gesturekit;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_numeric = 3;

// JSON config files: top-level keys are option long names of the selected subcommand;
// a nested object named after a subcommand holds values for that subcommand only.
// Arrays become repeated values.
class json_config : public CLI::Config {
  public:
    explicit json_config(const CLI::App *root) :
        root_{ root } {}

    std::string to_config(const CLI::App *app, bool default_also, bool, std::string) const override {
        nlohmann::json j;
        for (const CLI::Option *opt : app->get_options({})) {
            if (opt->get_lnames().empty() || !opt->get_configurable()) {
                continue;
            }
            const std::string name = opt->get_lnames().front();
            if (opt->count() > 0) {
                const auto &results = opt->results();
                if (results.size() == 1) {
                    j[name] = results.front();
                } else {
                    j[name] = results;
                }
            } else if (default_also && !opt->get_default_str().empty()) {
                j[name] = opt->get_default_str();
            }
        }
        return j.dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream &input) const override {
        nlohmann::json j;
        try {
            input >> j;
        } catch (const nlohmann::json::exception &e) {
            throw CLI::ConversionError(std::string{ "config file is not valid JSON: " } + e.what());
        }
        if (!j.is_object()) {
            throw CLI::ConversionError("config file must hold a JSON object");
        }
        std::vector<std::string> selected;
        for (const CLI::App *sub : root_->get_subcommands()) {
            selected.push_back(sub->get_name());
        }
        std::vector<CLI::ConfigItem> items;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it->is_object()) {
                for (auto inner = it->begin(); inner != it->end(); ++inner) {
                    items.push_back(make_item(inner.key(), *inner, { it.key() }));
                }
            } else {
                items.push_back(make_item(it.key(), *it, selected));
            }
        }
        return items;
    }

  private:
    static CLI::ConfigItem make_item(const std::string &name, const nlohmann::json &value, std::vector<std::string> parents) {
        CLI::ConfigItem item;
        item.name = name;
        item.parents = std::move(parents);
        const auto add = [&](const nlohmann::json &v) {
            if (v.is_string()) {
                item.inputs.push_back(v.get<std::string>());
            } else if (v.is_boolean()) {
                item.inputs.emplace_back(v.get<bool>() ? "true" : "false");
            } else if (v.is_number()) {
                item.inputs.push_back(v.dump());
            } else {
                throw CLI::ConversionError("config value for '" + name + "' must be a string, number, boolean or array of those");
            }
        };
        if (value.is_array()) {
            for (const auto &v : value) {
                add(v);
            }
        } else {
            add(value);
        }
        return item;
    }

    const CLI::App *root_;
};

// Output written next to its target and renamed into place on success; removed otherwise.
class staged_output {
  public:
    explicit staged_output(fs::path target) :
        target_{ std::move(target) }, partial_{ target_.string() + ".partial" } {}

    staged_output(const staged_output &) = delete;
    staged_output &operator=(const staged_output &) = delete;

    ~staged_output() {
        if (!committed_) {
            std::error_code ec;
            fs::remove(partial_, ec);
        }
    }

    std::ofstream open() {
        if (target_.has_parent_path()) {
            fs::create_directories(target_.parent_path());
        }
        std::ofstream out{ partial_, std::ios::binary };
        if (!out) {
            throw malformed_file{ "cannot write '" + target_.string() + "'" };
        }
        return out;
    }

    [[nodiscard]] const fs::path &partial() const noexcept { return partial_; }

    void commit() {
        fs::rename(partial_, target_);
        committed_ = true;
    }

  private:
    fs::path target_;
    fs::path partial_;
    bool committed_{ false };
};

struct data_args {
    std::string input;
    std::string format{ "generic" };
    std::size_t n_joints{ 20 };
    std::optional<std::size_t> root_joint;
    bool no_relativize{ false };
    bool has_header{ false };

    void add_to(CLI::App *app) {
        app->add_option("-i,--input", input, "dataset: MSR skeleton directory/file or generic JSON-lines file")->required();
        app->add_option("--format", format, "input format")->check(CLI::IsMember({ "msr", "generic" }))->capture_default_str();
        app->add_option("--n-joints", n_joints, "joints per MSR frame")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--root-joint", root_joint, "root joint for root-relative poses (MSR default 6, generic default none)");
        app->add_flag("--no-relativize", no_relativize, "keep absolute joint positions for MSR input");
        app->add_flag("--has-header", has_header, "MSR files start with a frame/joint count header");
    }

    [[nodiscard]] dataset load() const {
        if (format == "msr") {
            msr_load_options opts;
            opts.n_joints = n_joints;
            opts.has_header = has_header;
            opts.root_joint = no_relativize ? std::nullopt : std::optional<std::size_t>{ root_joint.value_or(msr_default_root_joint) };
            return load_msr(input, opts);
        }
        dataset data = load_generic_file(input);
        if (root_joint) {
            data = relativize_all(data, *root_joint);
        }
        return data;
    }
};

std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    std::stringstream in{ s };
    for (std::string item; std::getline(in, item, ',');) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

struct model_args {
    std::size_t poses{ 15 };
    std::string kernel{ "rdtw" };
    double nu{ 1.0 };
    double sigma{ 1.0 };
    std::string sigma_mode{ "absolute" };
    double C{ 1.0 };
    std::optional<std::size_t> corridor;
    std::string resample{ "nearest" };

    void add_to(CLI::App *app, bool sigma_required) {
        app->add_option("--poses", poses, "poses per resampled sequence (L)")->check(CLI::Range(2, 100000))->capture_default_str();
        app->add_option("--kernel", kernel, "kernel family")->check(CLI::IsMember({ "euclid", "dtw", "rdtw" }))->capture_default_str();
        app->add_option("--nu", nu, "rdtw stiffness")->check(CLI::PositiveNumber)->capture_default_str();
        auto *s = app->add_option("--sigma", sigma, "kernel bandwidth")->check(CLI::PositiveNumber);
        if (sigma_required) {
            s->required();
        } else {
            s->capture_default_str();
        }
        app->add_option("--sigma-mode", sigma_mode, "absolute, or relative to the median training statistic")
            ->check(CLI::IsMember({ "absolute", "relative" }))
            ->capture_default_str();
        app->add_option("--C", C, "SVM box constraint")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--corridor", corridor, "rdtw alignment corridor half-width");
        app->add_option("--resample", resample, "frame selection")->check(CLI::IsMember({ "nearest", "linear" }))->capture_default_str();
    }

    [[nodiscard]] experiment_config config() const {
        experiment_config c;
        c.poses = poses;
        c.spec.family = kernel_family_from_string(kernel);
        c.spec.nu = nu;
        c.spec.sigma = sigma;
        c.spec.corridor = corridor;
        c.relative_sigma = sigma_mode == "relative";
        c.C = C;
        c.mode = resample == "linear" ? resample_mode::linear : resample_mode::nearest;
        return c;
    }
};

struct run_args {
    std::size_t workers{ 0 };
    std::optional<std::string> cache_dir;
    double tol{ 1e-3 };

    void add_to(CLI::App *app) {
        app->add_option("--workers", workers, "worker threads (0 = all CPUs)")->capture_default_str();
        app->add_option("--cache-dir", cache_dir, "directory for cached statistic matrices");
        app->add_option("--tol", tol, "SMO stopping tolerance")->check(CLI::PositiveNumber)->capture_default_str();
    }

    [[nodiscard]] eval_options options() const {
        eval_options o;
        o.workers = workers;
        if (cache_dir) {
            o.cache_dir = fs::path{ *cache_dir };
        }
        o.smo.tol = tol;
        return o;
    }
};

struct protocol_args {
    std::string protocol{ "subjects" };
    std::size_t n_train{ 5 };
    std::size_t folds{ 10 };
    std::uint64_t seed{ 1 };
    std::string train_subjects;
    std::string test_subjects;

    void add_to(CLI::App *app) {
        app->add_option("--protocol", protocol, "split protocol")->check(CLI::IsMember({ "subjects", "kfold", "fixed" }))->capture_default_str();
        app->add_option("--n-train", n_train, "training subjects per split (subjects protocol)")->capture_default_str();
        app->add_option("--folds", folds, "fold count (kfold protocol)")->capture_default_str();
        app->add_option("--seed", seed, "fold shuffling seed (kfold protocol)")->capture_default_str();
        app->add_option("--train-subjects", train_subjects, "comma-separated training subjects (fixed protocol)");
        app->add_option("--test-subjects", test_subjects, "comma-separated test subjects (fixed protocol)");
    }

    [[nodiscard]] std::vector<split_plan> plans(const dataset &data) const {
        if (protocol == "kfold") {
            return kfold(data, folds, seed);
        }
        if (protocol == "fixed") {
            return { fixed_split(data, split_list(train_subjects), split_list(test_subjects)) };
        }
        return subject_splits(data, n_train);
    }
};

template <typename T>
std::vector<T> parse_list(const std::string &flag, const std::string &s) {
    std::vector<T> out;
    for (const auto &item : split_list(s)) {
        std::istringstream in{ item };
        T v{};
        if (!(in >> v) || !in.eof()) {
            throw param_error{ "bad value '" + item + "' in " + flag };
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw param_error{ flag + " needs at least one value" };
    }
    return out;
}

std::vector<kernel_family> parse_families(const std::string &s) {
    std::vector<kernel_family> out;
    for (const auto &name : split_list(s)) {
        out.push_back(kernel_family_from_string(name));
    }
    if (out.empty()) {
        throw param_error{ "--kernel needs at least one family" };
    }
    return out;
}

void print_counts(const dataset &data) {
    std::cout << data.size() << " sequences, " << data.class_set().size() << " classes, " << data.subject_set().size() << " subjects\n";
}

std::string fixed2(double v) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << v;
    return out.str();
}

int run(int argc, char **argv) {
    CLI::App app{ "Skeleton gesture classification with elastic kernels and SVMs" };
    app.config_formatter(std::make_shared<json_config>(&app));
    app.set_config("--config", "", "JSON file with option values; command-line flags win");
    app.fallthrough();
    app.require_subcommand(1);
    std::function<void()> action;

    // convert ---------------------------------------------------------------------------------
    auto *convert = app.add_subcommand("convert", "load a dataset and write it in the generic JSON-lines format");
    data_args convert_data;
    std::string convert_out;
    convert_data.add_to(convert);
    convert->add_option("-o,--out", convert_out, "output JSON-lines file")->required();
    convert->callback([&] {
        action = [&] {
            const dataset data = convert_data.load();
            staged_output out{ convert_out };
            {
                auto stream = out.open();
                serialize_generic(data, stream);
            }
            out.commit();
            print_counts(data);
        };
    });

    // train -----------------------------------------------------------------------------------
    auto *train = app.add_subcommand("train", "train a multiclass SVM on a whole dataset");
    data_args train_data;
    model_args train_model_args;
    run_args train_run;
    std::string train_out;
    train_data.add_to(train);
    train_model_args.add_to(train, true);
    train_run.add_to(train);
    train->add_option("-o,--out", train_out, "output model file")->required();
    train->callback([&] {
        action = [&] {
            const dataset data = train_data.load();
            const auto trained = train_model(data, train_model_args.config(), train_run.options());
            staged_output out{ train_out };
            {
                auto stream = out.open();
                stream << model_to_json(trained.model).dump(1) << '\n';
            }
            out.commit();
            print_counts(data);
            std::cout << "training accuracy " << fixed2(trained.train_accuracy) << "%\n";
            if (!trained.model.all_converged()) {
                std::cerr << "warning: some binary problems stopped at the iteration limit\n";
            }
        };
    });

    // predict ---------------------------------------------------------------------------------
    auto *predict_cmd = app.add_subcommand("predict", "label every sequence of a dataset with a trained model");
    data_args predict_data;
    std::string predict_model;
    std::optional<std::string> predict_out;
    std::string predict_resample{ "nearest" };
    predict_data.add_to(predict_cmd);
    predict_cmd->add_option("-m,--model", predict_model, "model file from 'train'")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("-o,--out", predict_out, "write labels here instead of stdout");
    predict_cmd->add_option("--resample", predict_resample, "frame selection")->check(CLI::IsMember({ "nearest", "linear" }))->capture_default_str();
    predict_cmd->callback([&] {
        action = [&] {
            const svm_model model = load_model(predict_model);
            const dataset data = predict_data.load();
            const auto mode = predict_resample == "linear" ? resample_mode::linear : resample_mode::nearest;
            std::ostringstream labels;
            for (const auto &seq : data.sequences()) {
                labels << classify(model, seq, mode) << '\n';
            }
            if (predict_out) {
                staged_output out{ *predict_out };
                {
                    auto stream = out.open();
                    stream << labels.str();
                }
                out.commit();
            } else {
                std::cout << labels.str();
            }
        };
    });

    // evaluate --------------------------------------------------------------------------------
    auto *evaluate = app.add_subcommand("evaluate", "run one configuration over a split protocol");
    data_args eval_data;
    model_args eval_model;
    run_args eval_run;
    protocol_args eval_protocol;
    std::optional<std::string> eval_out;
    std::optional<std::string> eval_summary;
    eval_data.add_to(evaluate);
    eval_model.add_to(evaluate, false);
    eval_run.add_to(evaluate);
    eval_protocol.add_to(evaluate);
    evaluate->add_option("-o,--out", eval_out, "per-split CSV report");
    evaluate->add_option("--summary", eval_summary, "JSON summary with confusion matrices and timings");
    evaluate->callback([&] {
        action = [&] {
            const dataset data = eval_data.load();
            const auto plans = eval_protocol.plans(data);
            const eval_report report = run_experiment(data, plans, eval_model.config(), eval_run.options());
            const std::span<const eval_report> reports{ &report, 1 };
            std::optional<staged_output> csv;
            std::optional<staged_output> summary;
            if (eval_out) {
                csv.emplace(*eval_out);
                auto stream = csv->open();
                write_report_csv(stream, reports);
            }
            if (eval_summary) {
                summary.emplace(*eval_summary);
                auto stream = summary->open();
                stream << report_summary(reports).dump(1) << '\n';
            }
            if (csv) {
                csv->commit();
            }
            if (summary) {
                summary->commit();
            }
            std::cout << plans.size() << " splits, test accuracy " << fixed2(report.mean_test) << " +/- " << fixed2(report.std_test)
                      << ", train accuracy " << fixed2(report.mean_train) << " +/- " << fixed2(report.std_train) << '\n';
        };
    });

    // grid ------------------------------------------------------------------------------------
    auto *grid = app.add_subcommand("grid", "search kernel and SVM hyperparameters over a split protocol");
    data_args grid_data;
    run_args grid_run;
    protocol_args grid_protocol;
    std::string grid_kernels{ "rdtw" };
    std::string grid_poses{ "15" };
    std::string grid_nus{ "0.01,0.1,1,10" };
    std::string grid_sigmas{ "0.1,1,10,100" };
    std::string grid_Cs{ "0.1,1,10,100" };
    std::string grid_sigma_mode{ "relative" };
    std::optional<std::size_t> grid_corridor;
    std::optional<std::string> grid_out;
    std::optional<std::string> grid_summary;
    std::optional<std::string> grid_curve;
    grid_data.add_to(grid);
    grid_run.add_to(grid);
    grid_protocol.add_to(grid);
    grid->add_option("--kernel", grid_kernels, "comma-separated kernel families")->capture_default_str();
    grid->add_option("--poses", grid_poses, "comma-separated pose counts")->capture_default_str();
    grid->add_option("--nu", grid_nus, "comma-separated rdtw stiffness values")->capture_default_str();
    grid->add_option("--sigma", grid_sigmas, "comma-separated bandwidths")->capture_default_str();
    grid->add_option("--sigma-mode", grid_sigma_mode, "absolute, or relative to the median training statistic")
        ->check(CLI::IsMember({ "absolute", "relative" }))
        ->capture_default_str();
    grid->add_option("--C", grid_Cs, "comma-separated box constraints")->capture_default_str();
    grid->add_option("--corridor", grid_corridor, "rdtw alignment corridor half-width");
    grid->add_option("-o,--out", grid_out, "per-split CSV report for every configuration");
    grid->add_option("--summary", grid_summary, "JSON summary");
    grid->add_option("--curve", grid_curve, "CSV of the best mean accuracy per pose count and family");
    grid->callback([&] {
        action = [&] {
            grid_axes axes;
            axes.families = parse_families(grid_kernels);
            axes.poses = parse_list<std::size_t>("--poses", grid_poses);
            axes.nus = parse_list<double>("--nu", grid_nus);
            axes.sigmas = parse_list<double>("--sigma", grid_sigmas);
            axes.Cs = parse_list<double>("--C", grid_Cs);
            experiment_config base;
            base.relative_sigma = grid_sigma_mode == "relative";
            base.spec.corridor = grid_corridor;
            (void) expand_grid(axes, base);  // rejects bad axes before any data is read
            const dataset data = grid_data.load();
            const auto plans = grid_protocol.plans(data);
            const grid_result result = grid_search(data, plans, axes, base, grid_run.options());
            std::optional<staged_output> csv;
            std::optional<staged_output> summary;
            std::optional<staged_output> curve;
            if (grid_out) {
                csv.emplace(*grid_out);
                auto stream = csv->open();
                write_report_csv(stream, result.reports);
            }
            if (grid_summary) {
                summary.emplace(*grid_summary);
                auto stream = summary->open();
                stream << report_summary(result.reports, result.best).dump(1) << '\n';
            }
            if (grid_curve) {
                curve.emplace(*grid_curve);
                auto stream = curve->open();
                const auto points = accuracy_curve(result);
                write_curve_csv(stream, points);
            }
            for (auto *o : { &csv, &summary, &curve }) {
                if (*o) {
                    (*o)->commit();
                }
            }
            const auto &best = result.reports[result.best];
            const auto &c = best.config;
            std::cout << result.reports.size() << " configurations over " << plans.size() << " splits\n"
                      << "best: kernel=" << to_string(c.spec.family) << " poses=" << c.poses;
            if (c.spec.family == kernel_family::rdtw) {
                std::cout << " nu=" << c.spec.nu;
            }
            std::cout << " sigma=" << c.spec.sigma << (c.relative_sigma ? " (relative)" : "") << " C=" << c.C << " test accuracy "
                      << fixed2(best.mean_test) << " +/- " << fixed2(best.std_test) << '\n';
        };
    });

    // benchmark -------------------------------------------------------------------------------
    auto *bench = app.add_subcommand("benchmark", "time single-sequence classification per pose count and family");
    data_args bench_data;
    run_args bench_run;
    std::string bench_kernels{ "euclid,rdtw" };
    std::string bench_poses{ "10,15,20,25,30" };
    double bench_nu = 1.0;
    double bench_sigma = 1.0;
    std::string bench_sigma_mode{ "relative" };
    double bench_C = 10.0;
    std::size_t bench_runs = 100;
    std::size_t bench_warmup = 5;
    std::optional<std::size_t> bench_n_train;
    std::optional<std::string> bench_out;
    bench_data.add_to(bench);
    bench_run.add_to(bench);
    bench->add_option("--kernel", bench_kernels, "comma-separated kernel families")->capture_default_str();
    bench->add_option("--poses", bench_poses, "comma-separated pose counts")->capture_default_str();
    bench->add_option("--nu", bench_nu, "rdtw stiffness")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--sigma", bench_sigma, "kernel bandwidth")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--sigma-mode", bench_sigma_mode, "absolute, or relative to the median training statistic")
        ->check(CLI::IsMember({ "absolute", "relative" }))
        ->capture_default_str();
    bench->add_option("--C", bench_C, "SVM box constraint")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--runs", bench_runs, "timed classifications per configuration")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--warmup", bench_warmup, "untimed classifications first")->capture_default_str();
    bench->add_option("--n-train", bench_n_train, "train on the first subject split with this many subjects instead of everything");
    bench->add_option("-o,--out", bench_out, "latency CSV");
    bench->callback([&] {
        action = [&] {
            const auto families = parse_families(bench_kernels);
            const auto poses = parse_list<std::size_t>("--poses", bench_poses);
            const dataset data = bench_data.load();
            dataset train_set = data;
            std::vector<pose_sequence> samples = data.sequences();
            if (bench_n_train) {
                const split_plan plan = subject_splits(data, *bench_n_train).front();
                std::vector<pose_sequence> tr;
                samples.clear();
                for (const auto i : plan.train_index) {
                    tr.push_back(data.sequences()[i]);
                }
                for (const auto i : plan.test_index) {
                    samples.push_back(data.sequences()[i]);
                }
                train_set = dataset{ std::move(tr) };
            }
            std::ostringstream csv;
            csv << "poses,family,median_ms,p95_ms,runs,n_train\n";
            for (const auto family : families) {
                for (const std::size_t L : poses) {
                    experiment_config c;
                    c.poses = L;
                    c.spec.family = family;
                    c.spec.nu = bench_nu;
                    c.spec.sigma = bench_sigma;
                    c.relative_sigma = bench_sigma_mode == "relative";
                    c.C = bench_C;
                    const auto trained = train_model(train_set, c, bench_run.options());
                    const auto stats = benchmark_latency(trained.model, samples, bench_runs, bench_warmup);
                    csv << L << ',' << to_string(family) << ',' << stats.median_ms << ',' << stats.p95_ms << ',' << stats.samples << ','
                        << train_set.size() << '\n';
                    std::cout << to_string(family) << " L=" << L << ": median " << stats.median_ms << " ms, p95 " << stats.p95_ms << " ms\n";
                }
            }
            if (bench_out) {
                staged_output out{ *bench_out };
                {
                    auto stream = out.open();
                    stream << csv.str();
                }
                out.commit();
            }
        };
    });

    for (CLI::App *sub : app.get_subcommands({})) {
        sub->footer("Any subcommand also accepts --config FILE: a JSON object of option values keyed by long name; command-line flags win.");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }
    action();
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    try {
        return run(argc, argv);
    } catch (const gesturekit::error &e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.category()) {
            case error_category::usage: return exit_usage;
            case error_category::data: return exit_data;
            case error_category::numeric: return exit_numeric;
        }
        return exit_data;
    } catch (const fs::filesystem_error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numeric;
    }
}
