#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "irmbench/bench.hpp"

using namespace irmbench;

TEST_CASE("config file parsing") {
    ExperimentConfig cfg;
    apply_config_file(
        "# comment\n"
        "suite=unit_tests\n"
        "methods=ERM,IRMv2\n"
        "examples=1,2\n"
        "seeds=3\n"
        "lambda_grid=0.5,5\n"
        "selection=train_val\n"
        "steps=123\n"
        "learning_rate=0.02\n"
        "optimizer=gd\n"
        "n_train=777\n"
        "jobs=2\n",
        &cfg);
    CHECK(cfg.suite == SuiteKind::unit_tests);
    CHECK(cfg.methods == std::vector<Method>{Method::ERM, Method::IRMv2});
    CHECK(cfg.examples == std::vector<int>{1, 2});
    CHECK(cfg.seeds == std::vector<uint64_t>{1, 2, 3});
    CHECK(cfg.lambda_grid == std::vector<double>{0.5, 5.0});
    CHECK(cfg.selection == LambdaSelection::train_val);
    CHECK(cfg.steps == 123);
    CHECK(cfg.learning_rate == doctest::Approx(0.02));
    CHECK(cfg.optimizer == Optimizer::gd);
    CHECK(cfg.unit.n_train == 777);
    CHECK(cfg.jobs == 2);

    CHECK_THROWS_AS(apply_config_file("bogus_key=1\n", &cfg), SpecError);
    CHECK_THROWS_AS(apply_config_file("no equals sign\n", &cfg), SpecError);
}

TEST_CASE("records csv round trip") {
    RunRecord r;
    r.suite = "unit_tests";
    r.example = "Example1";
    r.variant = "plain";
    r.env = "E0";
    r.split = "test";
    r.method = "ERM";
    r.seed = 7;
    r.metric = "mse";
    r.value = 0.123456789012345;
    const std::string csv = records_csv({r});
    const std::vector<RunRecord> back = parse_records_csv(csv);
    REQUIRE(back.size() == 1);
    CHECK(back[0].key() == r.key());
    CHECK(back[0].value == r.value);  // %.17g survives the round trip exactly
}

TEST_CASE("aggregate table rendering") {
    auto rec = [](const std::string& method, uint64_t seed, double v) {
        RunRecord r;
        r.suite = "unit_tests";
        r.example = "Example1";
        r.variant = "plain";
        r.env = "E0";
        r.split = "test";
        r.method = method;
        r.seed = seed;
        r.metric = "mse";
        r.value = v;
        return r;
    };
    std::vector<RunRecord> rs = {rec("ERM", 1, 1.0), rec("ERM", 2, 1.0), rec("ERM", 3, 1.0),
                                 rec("IRMv2", 1, 0.0), rec("IRMv2", 2, 1.0),
                                 rec("Oracle", 1, 0.25)};
    const AggregateTable t = aggregate_table(rs);
    CHECK(t.csv.find("1.00 ± 0.00") != std::string::npos);
    CHECK(t.csv.find("0.50 ± 0.71") != std::string::npos);  // sample std, n-1
    CHECK(t.csv.find("0.25 ± n/a") != std::string::npos);
    bool has_single_note = false;
    for (const std::string& f : t.footnotes)
        has_single_note = has_single_note || f.find("single value") != std::string::npos;
    CHECK(has_single_note);

    // permutation invariance in record order
    std::vector<RunRecord> shuffled = {rs[3], rs[5], rs[0], rs[4], rs[2], rs[1]};
    CHECK(aggregate_table(shuffled).csv == t.csv);

    // scrambled variant lands in its own row with the `s` suffix
    RunRecord s = rec("ERM", 1, 2.0);
    s.variant = "scrambled";
    const AggregateTable t2 = aggregate_table({s});
    CHECK(t2.csv.find("Example1s.E0") != std::string::npos);
}

TEST_CASE("figure1 sweep csv") {
    std::vector<double> grid = {0.0, 1e-3, 1.0, 1e3};
    const std::string csv = figure1_sweep_csv(grid, 1.0, 0, 1);
    CHECK(csv.rfind("c,curve,value", 0) == 0);
    CHECK(csv.find("nan") == std::string::npos);
    CHECK(csv.find("0,distance_sq,") != std::string::npos);

    // pointwise: ||G u||^2 <= lambda_max * u^T G u on the grid
    for (double c : grid) {
        const PenaltyCurvePoint p = penalty_curves_at(c, 1.0);
        const EigDecomp eig = sym_eig(arjovsky_gram(c, 1.0).gram);
        CHECK(p.gram_sq <= eig.eigenvalues.front() * p.weighted_sq + 1e-9);
    }

    // monte-carlo route stays close to the closed form
    const std::string mc = figure1_sweep_csv({1.0}, 1.0, 200000, 5);
    CHECK(mc.find("weighted_sq") != std::string::npos);
}

TEST_CASE("rosenfeld sweep csv") {
    const std::string csv = rosenfeld_sweep_csv(default_sem_spec(), {1.0, 2.0}, 5000, 3);
    CHECK(csv.rfind("epsilon,kappa_empirical", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("nan") == std::string::npos);
}

TEST_CASE("run_suite cardinality and determinism") {
    ExperimentConfig cfg;
    cfg.suite = SuiteKind::unit_tests;
    cfg.methods = {Method::ERM};
    cfg.examples = {1};
    cfg.seeds = {1, 2};
    cfg.scrambled_variants = false;
    cfg.unit.n_train = 600;
    cfg.unit.n_test = 400;
    cfg.steps = 150;
    cfg.jobs = 2;
    const std::vector<RunRecord> a = run_suite(cfg);
    CHECK(a.size() == 6);  // 1 method x 1 example x 2 seeds x 3 envs
    const std::vector<RunRecord> b = run_suite(cfg);
    CHECK(records_csv(a) == records_csv(b));
    CHECK(std::is_sorted(a.begin(), a.end(), [](const RunRecord& x, const RunRecord& y) {
        return x.key() < y.key();
    }));
}

TEST_CASE("oracle beats erm on example 1 (light config)") {
    ExperimentConfig cfg;
    cfg.suite = SuiteKind::unit_tests;
    cfg.methods = {Method::ERM, Method::Oracle};
    cfg.examples = {1};
    cfg.seeds = {1, 2};
    cfg.scrambled_variants = false;
    cfg.unit.n_train = 4000;
    cfg.unit.n_test = 4000;
    cfg.steps = 800;
    cfg.jobs = 2;
    const std::vector<RunRecord> records = run_suite(cfg);
    double erm = 0.0, oracle = 0.0;
    int n_erm = 0, n_oracle = 0;
    for (const RunRecord& r : records) {
        REQUIRE(r.metric == "mse");
        if (r.env != "E0") continue;
        if (r.method == "ERM") {
            erm += r.value;
            ++n_erm;
        } else {
            oracle += r.value;
            ++n_oracle;
        }
    }
    REQUIRE(n_erm == 2);
    REQUIRE(n_oracle == 2);
    CHECK(oracle / n_oracle < erm / n_erm);
}

TEST_CASE("sem_theory suite emits leakage records") {
    ExperimentConfig cfg;
    cfg.suite = SuiteKind::sem_theory;
    cfg.methods = {Method::IRMv2};
    cfg.seeds = {1};
    cfg.sem_n = 2000;
    cfg.sem_lambda = 10.0;
    cfg.steps = 400;
    const std::vector<RunRecord> records = run_suite(cfg);
    REQUIRE(records.size() == 1);
    CHECK(records[0].metric == "leakage");
    CHECK(records[0].value >= 0.0);
    CHECK(records[0].value <= 1.0);
}

TEST_CASE("selfcheck passes") {
    for (const CheckResult& r : selfcheck()) {
        INFO(r.name, " ", r.detail);
        CHECK(r.pass);
    }
}
