#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "irmbench/diagnostics.hpp"
#include "irmbench/envgen.hpp"
#include "irmbench/trainers.hpp"

namespace irmbench {

enum class SuiteKind { unit_tests, sem_theory, arjovsky_sweep, rosenfeld_sweep, figure1 };
enum class LambdaSelection { test_val, train_val };

std::string suite_name(SuiteKind s);
bool parse_suite(const std::string& s, SuiteKind* out);

// One result row. metric is one of
//   mse, class_error, penalty_v1, penalty_v2, kappa, leakage, failed
// ("failed" rows carry the diverged step index as the value).
struct RunRecord {
    std::string suite;
    std::string example;
    std::string variant;  // plain | scrambled
    std::string env;
    std::string split;
    std::string method;
    uint64_t seed = 0;
    std::string metric;
    double value = 0.0;

    std::string key() const;
    std::string csv_row() const;
};

constexpr const char* kRecordsCsvHeader = "suite,example,variant,env,split,method,seed,metric,value";

std::string records_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> parse_records_csv(const std::string& csv);

struct ExperimentConfig {
    SuiteKind suite = SuiteKind::unit_tests;
    std::vector<Method> methods = {Method::ANDMask, Method::ERM,   Method::IGA, Method::IRMv1,
                                   Method::IRMv1A,  Method::IRMv2, Method::Oracle};
    std::vector<int> examples = {1, 2, 3};
    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> lambda_grid = {0.1, 1.0, 10.0, 100.0};
    LambdaSelection selection = LambdaSelection::test_val;
    uint64_t base_seed = 0;
    UnitTestConfig unit;
    bool scrambled_variants = true;

    // Trainer settings for suite runs.
    int steps = 2000;
    double learning_rate = 1e-2;
    Optimizer optimizer = Optimizer::adamlike;

    // sem_theory settings.
    double sem_lambda = 10.0;
    long sem_n = 10000;

    int jobs = 0;  // 0 = hardware concurrency
    bool quiet = false;
    std::string out_dir;
};

// Flat key=value config file (# comments). Unknown keys are an error.
void apply_config_file(const std::string& text, ExperimentConfig* cfg);

// Runs the configured suite. unit_tests: per (example, variant, method,
// seed), train on an 80/20 train/validation split of each training
// environment, select the penalty coefficient over lambda_grid, evaluate on
// fresh spurious-shuffled per-environment test splits. Training divergences
// become "failed" records instead of aborting the suite. Independent runs
// execute on a worker pool; the output is sorted by record key, so it is a
// pure function of the config.
std::vector<RunRecord> run_suite(const ExperimentConfig& cfg);

// Mean +- sample standard deviation per (example.env, method) over the
// error metrics, rendered to two decimals; rows sorted lexicographically,
// method columns alphabetical.
struct AggregateTable {
    std::string csv;
    std::string text;
    std::vector<std::string> footnotes;
};
AggregateTable aggregate_table(const std::vector<RunRecord>& records);

// Penalty/kappa curves of the two-variable SEM on a c grid, from closed-form
// moments (mc_n = 0) or Monte-Carlo moments (mc_n > 0).
// CSV columns: c,curve,value with curves distance_sq, weighted_sq, gram_sq,
// kappa. A c = 0 row is always present (pseudoinverse semantics).
std::string figure1_sweep_csv(const std::vector<double>& c_grid, double sigma, long mc_n,
                              uint64_t seed);

// Masked-representation conditioning sweep. CSV columns:
// epsilon,kappa_empirical,kappa_stderr,p_sec43,p_appB2,bound_constant,
// lower_bound,mask_prob,penalty_v1,penalty_v2
// The penalties are evaluated at the masked representation with the
// invariant classifier (pooled LSE of the fully masked representation).
std::string rosenfeld_sweep_csv(const SemSpec& spec, const std::vector<double>& eps_grid, long n,
                                uint64_t seed);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Library-level invariant suites, runnable from the CLI.
std::vector<CheckResult> selfcheck();

}  // namespace irmbench
