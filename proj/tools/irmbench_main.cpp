// Benchmark CLI: dataset dumps, single training runs, full suites,
// conditioning sweeps, diagnostics, and table aggregation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "irmbench/bench.hpp"

namespace {

using namespace irmbench;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

int cmd_gen(const std::string& what, uint64_t seed, long n, const std::string& out_path,
            bool quiet) {
    std::vector<TaggedData> rows;
    if (what == "sem") {
        const SemSpec spec = default_sem_spec();
        for (int e = 0; e < spec.n_env(); ++e)
            rows.push_back({"E" + std::to_string(e), "train", gen_sem(spec, e, n, seed)});
    } else if (what == "arjovsky") {
        rows.push_back({"E0", "train", gen_arjovsky(1.0, 1.0, n, seed).data});
    } else {
        const int example = std::stoi(what);
        UnitTestConfig cfg;
        if (n > 0) {
            cfg.n_train = n;
            cfg.n_test = n;
        }
        for (int e = 0; e < cfg.n_env; ++e) {
            rows.push_back(
                {"E" + std::to_string(e), "train", gen_unit_test(example, cfg, e, Split::train, seed)});
            rows.push_back(
                {"E" + std::to_string(e), "test", gen_unit_test(example, cfg, e, Split::test, seed)});
        }
    }
    const std::string csv = dataset_csv(rows);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_file(out_path, csv);
        if (!quiet) std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_train(const std::string& method_str, int example, bool scrambled, uint64_t seed,
              double lambda, double lambda0, int steps, double lr, const std::string& opt_str,
              const std::string& out_path, bool quiet) {
    Method method;
    if (!parse_method(method_str, &method)) {
        std::cerr << "unknown method " << method_str << "\n";
        return 1;
    }
    UnitTestConfig ut;
    std::vector<EnvironmentData> envs;
    for (int e = 0; e < ut.n_env; ++e) {
        EnvironmentData d = gen_unit_test(example, ut, e, Split::train, seed);
        if (method == Method::Oracle)
            d = shuffle_spurious(d, mix_seed({seed, fnv1a64("oracle"), static_cast<uint64_t>(e)}));
        if (scrambled) d = scramble(d, mix_seed({seed, fnv1a64("scramble")}));
        envs.push_back(std::move(d));
    }

    TrainConfig cfg;
    cfg.method = method;
    cfg.lambda = lambda;
    cfg.lambda0 = lambda0;
    cfg.steps = steps;
    cfg.learning_rate = lr;
    cfg.seed = mix_seed({seed, fnv1a64(method_str)});
    if (opt_str == "gd")
        cfg.optimizer = Optimizer::gd;
    else if (opt_str == "momentum")
        cfg.optimizer = Optimizer::momentum;
    else
        cfg.optimizer = Optimizer::adamlike;

    TrainResult result;
    try {
        result = train(cfg, envs);
    } catch (const DivergedError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return 2;
    }

    std::string eval_report;
    for (int e = 0; e < ut.n_env; ++e) {
        EnvironmentData t = gen_unit_test(example, ut, e, Split::test, seed);
        if (scrambled) t = scramble(t, mix_seed({seed, fnv1a64("scramble")}));
        const double err = evaluate(result.theta, result.w, t);
        eval_report += "E" + std::to_string(e) + " test " +
                       (t.task == Task::regression ? "mse " : "error ") + std::to_string(err) + "\n";
    }

    const std::string json = train_result_json(cfg, result);
    if (out_path.empty()) {
        std::cout << json << "\n";
    } else {
        write_file(out_path, json);
        if (!quiet) std::cout << "wrote " << out_path << "\n";
    }
    if (!quiet) std::cout << eval_report;
    return 0;
}

int cmd_suite(ExperimentConfig cfg, const std::string& out_dir, bool quiet) {
    cfg.quiet = quiet;
    if (cfg.suite == SuiteKind::sem_theory && cfg.methods.size() == 7)
        cfg.methods = {Method::IRMv2};  // leakage suite defaults to the trained-representation method
    const std::vector<RunRecord> records = run_suite(cfg);
    const std::string csv = records_csv(records);
    const std::string path =
        (out_dir.empty() ? "." : out_dir) + "/records_" + suite_name(cfg.suite) + ".csv";
    write_file(path, csv);
    if (!quiet) std::cout << "wrote " << path << " (" << records.size() << " records)\n";

    if (cfg.suite == SuiteKind::unit_tests) {
        const AggregateTable table = aggregate_table(records);
        write_file((out_dir.empty() ? "." : out_dir) + "/table_unit_tests.csv", table.csv);
        if (!quiet) std::cout << table.text;
    }
    for (const RunRecord& r : records)
        if (r.metric == "failed") return 2;
    return 0;
}

int cmd_diagnose(const std::string& spec_name, bool train_leakage, uint64_t seed, int steps,
                 double lambda, const std::string& out_path, bool quiet) {
    const SemSpec spec = (spec_name == "duplicated") ? duplicated_sem_spec() : default_sem_spec();
    const NondegeneracyReport report = check_nondegeneracy(spec);
    std::string out = "{\n\"nondegeneracy\": " + nondegeneracy_json(report);

    if (train_leakage) {
        std::vector<EnvironmentData> envs;
        for (int e = 0; e < spec.n_env(); ++e) envs.push_back(gen_sem(spec, e, 10000, seed));
        TrainConfig cfg;
        cfg.method = Method::IRMv2;
        cfg.lambda = lambda;
        cfg.steps = steps;
        cfg.optimizer = Optimizer::adamlike;
        cfg.seed = mix_seed({seed, fnv1a64("diagnose")});
        const TrainResult result = train(cfg, envs);
        out += ",\n\"irmv2_leakage\": " + std::to_string(theorem1_leakage(result.theta, spec));
        const LinearRepresentation proj = invariant_projection(spec, spec.d_c);
        out += ",\n\"invariant_projection_leakage\": " +
               std::to_string(theorem1_leakage(proj, spec));
    }
    out += "\n}\n";
    if (out_path.empty()) {
        std::cout << out;
    } else {
        write_file(out_path, out);
        if (!quiet) std::cout << "wrote " << out_path << "\n";
    }
    return report.overall_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic invariance benchmark over linear representations"};
    app.require_subcommand(1);

    std::string config_path, out_path, out_dir;
    uint64_t seed = 1;
    bool quiet = false;

    // gen
    auto* gen = app.add_subcommand("gen", "dump a dataset as CSV");
    std::string gen_what = "1";
    long gen_n = 0;
    gen->add_option("--example", gen_what, "1|2|3|sem|arjovsky");
    gen->add_option("--seed", seed);
    gen->add_option("--n", gen_n, "samples per environment (0 = default)");
    gen->add_option("--out", out_path);
    gen->add_flag("--quiet", quiet);

    // train
    auto* tr = app.add_subcommand("train", "single training run, JSON result");
    std::string tr_method = "IRMv2", tr_opt = "adamlike";
    int tr_example = 1, tr_steps = 2000;
    bool tr_scrambled = false;
    double tr_lambda = 1.0, tr_lambda0 = 1.0, tr_lr = 1e-2;
    tr->add_option("--method", tr_method, "ERM|IRMv1|IRMv1A|IRMv2|IGA|ANDMask|Oracle");
    tr->add_option("--example", tr_example, "1|2|3");
    tr->add_flag("--scrambled", tr_scrambled);
    tr->add_option("--seed", seed);
    tr->add_option("--lambda", tr_lambda);
    tr->add_option("--lambda0", tr_lambda0);
    tr->add_option("--steps", tr_steps);
    tr->add_option("--learning-rate", tr_lr);
    tr->add_option("--optimizer", tr_opt, "gd|momentum|adamlike");
    tr->add_option("--out", out_path);
    tr->add_flag("--quiet", quiet);

    // suite
    auto* su = app.add_subcommand("suite", "run a full experiment suite");
    std::string su_suite = "unit_tests", su_methods, su_selection, su_lambda_grid;
    int su_seeds = 0, su_steps = 0, su_jobs = 0;
    double su_lr = 0.0;
    su->add_option("--suite", su_suite, "unit_tests|sem_theory|arjovsky_sweep|rosenfeld_sweep|figure1");
    su->add_option("--config", config_path, "flat key=value config file");
    su->add_option("--methods", su_methods, "comma-separated method list");
    su->add_option("--seeds", su_seeds, "number of seeds (1..n)");
    su->add_option("--seed", seed, "base seed");
    su->add_option("--lambda", su_lambda_grid, "comma-separated lambda grid");
    su->add_option("--selection", su_selection, "test_val|train_val");
    su->add_option("--steps", su_steps);
    su->add_option("--learning-rate", su_lr);
    su->add_option("--jobs", su_jobs);
    su->add_option("--out", out_dir, "output directory");
    su->add_flag("--quiet", quiet);

    // figure1
    auto* f1 = app.add_subcommand("figure1", "penalty curves over the c grid");
    double f1_sigma = 1.0, f1_cmin = 1e-6, f1_cmax = 1e3;
    int f1_points = 37;
    long f1_mc = 0;
    f1->add_option("--sigma", f1_sigma);
    f1->add_option("--cmin", f1_cmin);
    f1->add_option("--cmax", f1_cmax);
    f1->add_option("--points", f1_points);
    f1->add_option("--mc-n", f1_mc, "0 = closed-form moments");
    f1->add_option("--seed", seed);
    f1->add_option("--out", out_path);
    f1->add_flag("--quiet", quiet);

    // kappa-sweep
    auto* ks = app.add_subcommand("kappa-sweep", "masked-representation conditioning sweep");
    std::string ks_eps = "1,2,4,8";
    long ks_n = 100000;
    ks->add_option("--epsilons", ks_eps, "comma-separated epsilon grid");
    ks->add_option("--n", ks_n);
    ks->add_option("--seed", seed);
    ks->add_option("--out", out_path);
    ks->add_flag("--quiet", quiet);

    // diagnose
    auto* di = app.add_subcommand("diagnose", "non-degeneracy + leakage report");
    std::string di_spec = "default";
    bool di_train = false;
    int di_steps = 2000;
    double di_lambda = 10.0;
    di->add_option("--spec", di_spec, "default|duplicated");
    di->add_flag("--train-leakage", di_train, "also train IRMv2 and report leakage");
    di->add_option("--seed", seed);
    di->add_option("--steps", di_steps);
    di->add_option("--lambda", di_lambda);
    di->add_option("--out", out_path);
    di->add_flag("--quiet", quiet);

    // table
    auto* tb = app.add_subcommand("table", "aggregate records CSVs into a table");
    std::vector<std::string> tb_inputs;
    tb->add_option("--records", tb_inputs, "records CSV paths")->required();
    tb->add_option("--out", out_path, "output prefix (writes <prefix>.csv and <prefix>.txt)");
    tb->add_flag("--quiet", quiet);

    // selfcheck
    auto* sc = app.add_subcommand("selfcheck", "run the library invariant suites");
    sc->add_flag("--quiet", quiet);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(gen_what, seed, gen_n, out_path, quiet);
        if (tr->parsed())
            return cmd_train(tr_method, tr_example, tr_scrambled, seed, tr_lambda, tr_lambda0,
                             tr_steps, tr_lr, tr_opt, out_path, quiet);
        if (su->parsed()) {
            ExperimentConfig cfg;
            if (!config_path.empty()) apply_config_file(read_file(config_path), &cfg);
            if (!parse_suite(su_suite, &cfg.suite)) {
                std::cerr << "unknown suite " << su_suite << "\n";
                return 1;
            }
            if (!su_methods.empty()) {
                cfg.methods.clear();
                std::stringstream ss(su_methods);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    Method m;
                    if (!parse_method(item, &m)) {
                        std::cerr << "unknown method " << item << "\n";
                        return 1;
                    }
                    cfg.methods.push_back(m);
                }
            }
            if (su_seeds > 0) {
                cfg.seeds.clear();
                for (int i = 1; i <= su_seeds; ++i) cfg.seeds.push_back(static_cast<uint64_t>(i));
            }
            cfg.base_seed = seed;
            if (!su_lambda_grid.empty()) cfg.lambda_grid = parse_double_list(su_lambda_grid);
            if (su_selection == "train_val") cfg.selection = LambdaSelection::train_val;
            if (su_selection == "test_val") cfg.selection = LambdaSelection::test_val;
            if (su_steps > 0) cfg.steps = su_steps;
            if (su_lr > 0) cfg.learning_rate = su_lr;
            if (su_jobs > 0) cfg.jobs = su_jobs;
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            return cmd_suite(cfg, cfg.out_dir, quiet);
        }
        if (f1->parsed()) {
            std::vector<double> grid = {0.0};
            for (int i = 0; i < f1_points; ++i)
                grid.push_back(f1_cmin * std::pow(f1_cmax / f1_cmin,
                                                  f1_points > 1 ? double(i) / (f1_points - 1) : 0.0));
            const std::string csv = figure1_sweep_csv(grid, f1_sigma, f1_mc, seed);
            if (out_path.empty())
                std::cout << csv;
            else {
                write_file(out_path, csv);
                if (!quiet) std::cout << "wrote " << out_path << "\n";
            }
            return 0;
        }
        if (ks->parsed()) {
            const std::string csv =
                rosenfeld_sweep_csv(default_sem_spec(), parse_double_list(ks_eps), ks_n, seed);
            if (out_path.empty())
                std::cout << csv;
            else {
                write_file(out_path, csv);
                if (!quiet) std::cout << "wrote " << out_path << "\n";
            }
            return 0;
        }
        if (di->parsed())
            return cmd_diagnose(di_spec, di_train, seed, di_steps, di_lambda, out_path, quiet);
        if (tb->parsed()) {
            std::vector<RunRecord> records;
            for (const std::string& path : tb_inputs) {
                const std::vector<RunRecord> r = parse_records_csv(read_file(path));
                records.insert(records.end(), r.begin(), r.end());
            }
            const AggregateTable table = aggregate_table(records);
            if (out_path.empty()) {
                std::cout << table.text;
            } else {
                write_file(out_path + ".csv", table.csv);
                write_file(out_path + ".txt", table.text);
                if (!quiet) std::cout << "wrote " << out_path << ".csv and .txt\n";
            }
            return 0;
        }
        if (sc->parsed()) {
            const std::vector<CheckResult> results = selfcheck();
            bool all = true;
            for (const CheckResult& r : results) {
                all = all && r.pass;
                if (!quiet || !r.pass)
                    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name
                              << (r.detail.empty() ? "" : "  (" + r.detail + ")") << "\n";
            }
            std::cout << (all ? "selfcheck: all passed\n" : "selfcheck: FAILURES\n");
            return all ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
