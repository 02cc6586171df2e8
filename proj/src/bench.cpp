#include "irmbench/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

namespace irmbench {

std::string suite_name(SuiteKind s) {
    switch (s) {
        case SuiteKind::unit_tests: return "unit_tests";
        case SuiteKind::sem_theory: return "sem_theory";
        case SuiteKind::arjovsky_sweep: return "arjovsky_sweep";
        case SuiteKind::rosenfeld_sweep: return "rosenfeld_sweep";
        case SuiteKind::figure1: return "figure1";
    }
    return "?";
}

bool parse_suite(const std::string& s, SuiteKind* out) {
    const SuiteKind all[] = {SuiteKind::unit_tests, SuiteKind::sem_theory,
                             SuiteKind::arjovsky_sweep, SuiteKind::rosenfeld_sweep,
                             SuiteKind::figure1};
    for (SuiteKind k : all)
        if (s == suite_name(k)) {
            *out = k;
            return true;
        }
    return false;
}

namespace {

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_2f(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string RunRecord::key() const {
    return suite + "|" + example + "|" + variant + "|" + env + "|" + split + "|" + method + "|" +
           std::to_string(seed) + "|" + metric;
}

std::string RunRecord::csv_row() const {
    return suite + "," + example + "," + variant + "," + env + "," + split + "," + method + "," +
           std::to_string(seed) + "," + metric + "," + fmt_g17(value);
}

std::string records_csv(const std::vector<RunRecord>& records) {
    std::string out = kRecordsCsvHeader;
    out += "\n";
    for (const RunRecord& r : records) {
        out += r.csv_row();
        out += "\n";
    }
    return out;
}

std::vector<RunRecord> parse_records_csv(const std::string& csv) {
    std::vector<RunRecord> out;
    std::istringstream in(csv);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line == kRecordsCsvHeader) continue;
        }
        const std::vector<std::string> f = split(line, ',');
        if (f.size() != 9) throw SpecError("records csv: malformed row: " + line);
        RunRecord r;
        r.suite = f[0];
        r.example = f[1];
        r.variant = f[2];
        r.env = f[3];
        r.split = f[4];
        r.method = f[5];
        r.seed = std::stoull(f[6]);
        r.metric = f[7];
        r.value = std::stod(f[8]);
        out.push_back(std::move(r));
    }
    return out;
}

void apply_config_file(const std::string& text, ExperimentConfig* cfg) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const size_t e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw SpecError("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);

        if (key == "suite") {
            if (!parse_suite(val, &cfg->suite))
                throw SpecError("config: unknown suite " + val);
        } else if (key == "methods") {
            cfg->methods.clear();
            for (const std::string& m : split(val, ',')) {
                Method method;
                if (!parse_method(m, &method)) throw SpecError("config: unknown method " + m);
                cfg->methods.push_back(method);
            }
        } else if (key == "examples") {
            cfg->examples.clear();
            for (const std::string& s : split(val, ',')) cfg->examples.push_back(std::stoi(s));
        } else if (key == "seeds") {
            cfg->seeds.clear();
            const std::vector<std::string> parts = split(val, ',');
            if (parts.size() == 1 && parts[0].find(',') == std::string::npos &&
                std::stoll(parts[0]) > 0 && parts[0].find('.') == std::string::npos) {
                // a bare count n means seeds 1..n
                const long n = std::stol(parts[0]);
                for (long i = 1; i <= n; ++i) cfg->seeds.push_back(static_cast<uint64_t>(i));
            } else {
                for (const std::string& s : parts) cfg->seeds.push_back(std::stoull(s));
            }
        } else if (key == "seed_list") {
            cfg->seeds.clear();
            for (const std::string& s : split(val, ',')) cfg->seeds.push_back(std::stoull(s));
        } else if (key == "lambda_grid") {
            cfg->lambda_grid.clear();
            for (const std::string& s : split(val, ',')) cfg->lambda_grid.push_back(std::stod(s));
        } else if (key == "selection") {
            if (val == "test_val")
                cfg->selection = LambdaSelection::test_val;
            else if (val == "train_val")
                cfg->selection = LambdaSelection::train_val;
            else
                throw SpecError("config: unknown selection " + val);
        } else if (key == "base_seed") {
            cfg->base_seed = std::stoull(val);
        } else if (key == "steps") {
            cfg->steps = std::stoi(val);
        } else if (key == "learning_rate") {
            cfg->learning_rate = std::stod(val);
        } else if (key == "optimizer") {
            if (val == "gd")
                cfg->optimizer = Optimizer::gd;
            else if (val == "momentum")
                cfg->optimizer = Optimizer::momentum;
            else if (val == "adamlike")
                cfg->optimizer = Optimizer::adamlike;
            else
                throw SpecError("config: unknown optimizer " + val);
        } else if (key == "n_train") {
            cfg->unit.n_train = std::stol(val);
        } else if (key == "n_test") {
            cfg->unit.n_test = std::stol(val);
        } else if (key == "scrambled_variants") {
            cfg->scrambled_variants = (val == "1" || val == "true");
        } else if (key == "sem_lambda") {
            cfg->sem_lambda = std::stod(val);
        } else if (key == "sem_n") {
            cfg->sem_n = std::stol(val);
        } else if (key == "jobs") {
            cfg->jobs = std::stoi(val);
        } else if (key == "quiet") {
            cfg->quiet = (val == "1" || val == "true");
        } else if (key == "out_dir") {
            cfg->out_dir = val;
        } else {
            throw SpecError("config: unknown key " + key);
        }
    }
}

namespace {

EnvironmentData take_rows(const EnvironmentData& d, long row0, long nrows) {
    EnvironmentData out;
    out.task = d.task;
    out.spurious_indices = d.spurious_indices;
    out.x = d.x.block(static_cast<int>(row0), 0, static_cast<int>(nrows), d.x.cols());
    out.y = d.y.block(static_cast<int>(row0), 0, static_cast<int>(nrows), d.y.cols());
    if (d.has_latents())
        out.latents =
            d.latents.block(static_cast<int>(row0), 0, static_cast<int>(nrows), d.latents.cols());
    return out;
}

bool has_lambda_grid(Method m) {
    return m == Method::IRMv1 || m == Method::IRMv1A || m == Method::IRMv2 || m == Method::IGA;
}

struct UnitTask {
    int example = 1;
    bool scrambled = false;
    Method method = Method::ERM;
    uint64_t seed_value = 0;
};

std::vector<RunRecord> run_unit_task(const ExperimentConfig& cfg, const UnitTask& t) {
    const uint64_t data_seed = mix_seed({cfg.base_seed, fnv1a64("unit_tests"),
                                         static_cast<uint64_t>(t.example), t.seed_value});
    const uint64_t train_seed = mix_seed({data_seed, fnv1a64(method_name(t.method))});
    const UnitTestConfig& ut = cfg.unit;

    // The model-selection split must come from the same experiment instance
    // (same once-per-seed parameter draws), so both it and the reported test
    // split are halves of one double-size test draw.
    UnitTestConfig ut_double = ut;
    ut_double.n_test = 2 * ut.n_test;

    std::vector<EnvironmentData> train_part, val_part, select_envs, test_envs;
    for (int e = 0; e < ut.n_env; ++e) {
        EnvironmentData tr = gen_unit_test(t.example, ut, e, Split::train, data_seed);
        if (t.method == Method::Oracle)
            tr = shuffle_spurious(tr,
                                  mix_seed({data_seed, fnv1a64("oracle"), static_cast<uint64_t>(e)}));
        const long n80 = tr.n() * 8 / 10;
        train_part.push_back(take_rows(tr, 0, n80));
        val_part.push_back(take_rows(tr, n80, tr.n() - n80));
        const EnvironmentData both = gen_unit_test(t.example, ut_double, e, Split::test, data_seed);
        select_envs.push_back(take_rows(both, 0, ut.n_test));
        test_envs.push_back(take_rows(both, ut.n_test, ut.n_test));
    }
    if (t.scrambled) {
        const uint64_t rot_seed = mix_seed({data_seed, fnv1a64("scramble")});
        for (std::vector<EnvironmentData>* group :
             {&train_part, &val_part, &select_envs, &test_envs})
            for (EnvironmentData& d : *group) d = scramble(d, rot_seed);
    }

    std::vector<EnvironmentMoments> train_moments, val_moments;
    for (const EnvironmentData& d : train_part) train_moments.push_back(compute_moments(d));
    for (const EnvironmentData& d : val_part) val_moments.push_back(compute_moments(d));

    TrainConfig base;
    base.method = t.method;
    base.steps = cfg.steps;
    base.learning_rate = cfg.learning_rate;
    base.optimizer = cfg.optimizer;
    base.seed = train_seed;
    // A full-width theta leaves the IRMv2 objective constant under
    // reparameterization; the suite trains it at the invariant width.
    if (t.method == Method::IRMv2) base.d_phi = ut.d_inv;

    const std::string example_name = "Example" + std::to_string(t.example);
    const std::string variant = t.scrambled ? "scrambled" : "plain";
    auto make_record = [&](const std::string& env, const std::string& metric, double value) {
        RunRecord r;
        r.suite = "unit_tests";
        r.example = example_name;
        r.variant = variant;
        r.env = env;
        r.split = "test";
        r.method = method_name(t.method);
        r.seed = t.seed_value;
        r.metric = metric;
        r.value = value;
        return r;
    };

    std::vector<double> grid =
        has_lambda_grid(t.method) ? cfg.lambda_grid : std::vector<double>{base.lambda};
    bool have_best = false;
    double best_score = 0.0;
    TrainResult best;
    int diverged_step = -1;
    for (double lam : grid) {
        TrainConfig c = base;
        if (t.method == Method::IRMv1A)
            c.lambda0 = lam;  // the grid drives the offset of the adaptive rule
        else
            c.lambda = lam;
        TrainResult r;
        try {
            r = train_on_moments(c, train_moments);
        } catch (const DivergedError& e) {
            diverged_step = e.step;
            continue;
        }
        double score = 0.0;
        if (cfg.selection == LambdaSelection::train_val) {
            for (const EnvironmentMoments& m : val_moments) score += risk(r.theta, r.w, m);
            score /= static_cast<double>(val_moments.size());
        } else {
            for (const EnvironmentData& d : select_envs) score += evaluate(r.theta, r.w, d);
            score /= static_cast<double>(select_envs.size());
        }
        if (!have_best || score < best_score) {
            have_best = true;
            best_score = score;
            best = std::move(r);
        }
    }

    std::vector<RunRecord> records;
    if (!have_best) {
        records.push_back(make_record("all", "failed", static_cast<double>(diverged_step)));
        return records;
    }
    for (int e = 0; e < ut.n_env; ++e) {
        const std::string metric =
            (test_envs[e].task == Task::regression) ? "mse" : "class_error";
        records.push_back(make_record("E" + std::to_string(e), metric,
                                      evaluate(best.theta, best.w, test_envs[e])));
    }
    return records;
}

std::vector<RunRecord> run_sem_theory_task(const ExperimentConfig& cfg, Method method,
                                           uint64_t seed_value) {
    const SemSpec spec = default_sem_spec();
    const uint64_t data_seed = mix_seed({cfg.base_seed, fnv1a64("sem_theory"), seed_value});
    std::vector<EnvironmentData> envs;
    for (int e = 0; e < spec.n_env(); ++e) envs.push_back(gen_sem(spec, e, cfg.sem_n, data_seed));

    // Pinned protocol for the leakage suite: a reduced representation of
    // width d_c (a square theta makes the IRMv2 objective constant under
    // reparameterization) trained by plain descent with step halving, which
    // settles far below the adaptive optimizer's jitter floor.
    TrainConfig c;
    c.method = method;
    c.lambda = cfg.sem_lambda;
    c.d_phi = spec.d_c;
    c.steps = cfg.steps;
    c.learning_rate = 0.02;
    c.optimizer = Optimizer::gd;
    c.halve_on_increase = true;
    c.seed = mix_seed({data_seed, fnv1a64(method_name(method))});

    RunRecord r;
    r.suite = "sem_theory";
    r.example = "sem";
    r.variant = "plain";
    r.env = "pooled";
    r.split = "train";
    r.method = method_name(method);
    r.seed = seed_value;
    try {
        const TrainResult result = train(c, envs);
        r.metric = "leakage";
        r.value = theorem1_leakage(result.theta, spec);
    } catch (const DivergedError& e) {
        r.metric = "failed";
        r.value = static_cast<double>(e.step);
    }
    return {r};
}

std::vector<RunRecord> run_arjovsky_sweep(const ExperimentConfig& cfg) {
    (void)cfg;
    std::vector<RunRecord> out;
    const double sigmas[] = {0.5, 1.0, 2.0};
    const double cs[] = {1e-3, 0.5, 1.0, 2.0, 1e3};
    for (double sigma : sigmas)
        for (double c : cs) {
            const PenaltyCurvePoint p = penalty_curves_at(c, sigma);
            RunRecord base;
            base.suite = "arjovsky_sweep";
            base.example = "arjovsky";
            base.variant = "plain";
            base.env = "sigma=" + fmt_2f(sigma) + ";c=" + fmt_g17(c);
            base.split = "population";
            base.method = "closed_form";
            base.seed = 0;
            RunRecord r = base;
            r.metric = "kappa";
            r.value = p.kappa;
            out.push_back(r);
            r = base;
            r.metric = "penalty_v2";
            r.value = p.weighted_sq;
            out.push_back(r);
            r = base;
            r.metric = "penalty_v1";
            r.value = 4.0 * p.gram_sq;
            out.push_back(r);
        }
    return out;
}

std::vector<RunRecord> run_figure1_suite(const ExperimentConfig& cfg) {
    (void)cfg;
    std::vector<RunRecord> out;
    std::vector<double> grid = {0.0};
    for (int i = 0; i <= 36; ++i) grid.push_back(std::pow(10.0, -6.0 + 0.25 * i));
    for (double c : grid) {
        const PenaltyCurvePoint p = penalty_curves_at(c, 1.0);
        RunRecord base;
        base.suite = "figure1";
        base.example = "arjovsky";
        base.variant = "plain";
        base.env = "c=" + fmt_g17(c);
        base.split = "population";
        base.method = "closed_form";
        base.seed = 0;
        RunRecord r = base;
        r.metric = "kappa";
        r.value = p.kappa;
        out.push_back(r);
        r = base;
        r.metric = "penalty_v2";
        r.value = p.weighted_sq;
        out.push_back(r);
        r = base;
        r.metric = "penalty_v1";
        r.value = 4.0 * p.gram_sq;
        out.push_back(r);
    }
    return out;
}

int widest_env(const SemSpec& spec) {
    int best = 0;
    for (int e = 1; e < spec.n_env(); ++e)
        if (spec.environments[e].sigma_e > spec.environments[best].sigma_e) best = e;
    return best;
}

std::vector<RunRecord> run_rosenfeld_suite(const ExperimentConfig& cfg) {
    std::vector<RunRecord> out;
    const SemSpec spec = default_sem_spec();
    const int env = widest_env(spec);
    const double epsilons[] = {1.0, 2.0, 4.0, 8.0};
    for (double eps : epsilons) {
        const CounterexampleProfile p = rosenfeld_kappa_bound(
            spec, env, eps, MaskProbFormula::appB2, cfg.sem_n, mix_seed({cfg.base_seed, 11}));
        RunRecord r;
        r.suite = "rosenfeld_sweep";
        r.example = "sem";
        r.variant = "plain";
        r.env = "eps=" + fmt_g17(eps);
        r.split = "montecarlo";
        r.method = "masked_rep";
        r.seed = cfg.base_seed;
        r.metric = "kappa";
        r.value = p.kappa_empirical;
        out.push_back(r);
    }
    return out;
}

}  // namespace

std::vector<RunRecord> run_suite(const ExperimentConfig& cfg) {
    if (cfg.methods.empty()) throw SpecError("run_suite: no methods");
    if (cfg.seeds.empty()) throw SpecError("run_suite: no seeds");

    // Closed-form sweeps are cheap and run inline.
    if (cfg.suite == SuiteKind::arjovsky_sweep) return run_arjovsky_sweep(cfg);
    if (cfg.suite == SuiteKind::figure1) return run_figure1_suite(cfg);
    if (cfg.suite == SuiteKind::rosenfeld_sweep) return run_rosenfeld_suite(cfg);

    std::vector<std::function<std::vector<RunRecord>()>> tasks;
    if (cfg.suite == SuiteKind::unit_tests) {
        for (int example : cfg.examples) {
            if (example < 1 || example > 3) throw SpecError("run_suite: bad example id");
            for (int variant = 0; variant < (cfg.scrambled_variants ? 2 : 1); ++variant)
                for (Method method : cfg.methods)
                    for (uint64_t seed : cfg.seeds) {
                        UnitTask t{example, variant == 1, method, seed};
                        tasks.push_back([&cfg, t] { return run_unit_task(cfg, t); });
                    }
        }
    } else {
        for (Method method : cfg.methods)
            for (uint64_t seed : cfg.seeds)
                tasks.push_back(
                    [&cfg, method, seed] { return run_sem_theory_task(cfg, method, seed); });
    }

    std::vector<std::vector<RunRecord>> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                results[i] = tasks[i]();
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned n_threads = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs)
                                      : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(tasks.size()));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<RunRecord> records;
    for (std::vector<RunRecord>& r : results)
        records.insert(records.end(), r.begin(), r.end());
    std::sort(records.begin(), records.end(),
              [](const RunRecord& a, const RunRecord& b) { return a.key() < b.key(); });
    return records;
}

AggregateTable aggregate_table(const std::vector<RunRecord>& records) {
    struct Cell {
        std::vector<double> values;
    };
    std::map<std::string, std::map<std::string, Cell>> rows;  // row -> method -> values
    std::vector<std::string> methods;
    for (const RunRecord& r : records) {
        if (r.metric != "mse" && r.metric != "class_error") continue;
        const std::string row =
            r.example + (r.variant == "scrambled" ? "s" : "") + "." + r.env;
        rows[row][r.method].values.push_back(r.value);
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);
    }
    std::sort(methods.begin(), methods.end());

    AggregateTable out;
    std::vector<std::vector<std::string>> table;
    std::vector<std::string> header = {"cell"};
    header.insert(header.end(), methods.begin(), methods.end());
    table.push_back(header);
    for (const auto& [row, cells] : rows) {
        std::vector<std::string> line = {row};
        for (const std::string& m : methods) {
            const auto it = cells.find(m);
            if (it == cells.end()) {
                line.push_back("");
                out.footnotes.push_back("missing cell: " + row + "/" + m);
                continue;
            }
            const std::vector<double>& v = it->second.values;
            double mean = 0.0;
            for (double x : v) mean += x / v.size();
            if (v.size() < 2) {
                line.push_back(fmt_2f(mean) + " ± n/a");
                out.footnotes.push_back("single value: " + row + "/" + m);
            } else {
                double var = 0.0;
                for (double x : v) var += (x - mean) * (x - mean) / (v.size() - 1);
                line.push_back(fmt_2f(mean) + " ± " + fmt_2f(std::sqrt(var)));
            }
        }
        table.push_back(line);
    }

    for (const std::vector<std::string>& line : table) {
        for (size_t j = 0; j < line.size(); ++j) out.csv += (j ? "," : "") + line[j];
        out.csv += "\n";
    }
    std::vector<size_t> width(header.size(), 0);
    for (const auto& line : table)
        for (size_t j = 0; j < line.size(); ++j) width[j] = std::max(width[j], line[j].size());
    for (const auto& line : table) {
        for (size_t j = 0; j < line.size(); ++j) {
            std::string padded = line[j];
            padded.resize(width[j] + 2, ' ');
            out.text += padded;
        }
        out.text += "\n";
    }
    for (const std::string& f : out.footnotes) out.text += "note: " + f + "\n";
    return out;
}

std::string figure1_sweep_csv(const std::vector<double>& c_grid, double sigma, long mc_n,
                              uint64_t seed) {
    if (c_grid.empty()) throw SpecError("figure1_sweep: empty grid");
    std::string csv = "c,curve,value\n";
    for (double c : c_grid) {
        PenaltyCurvePoint p;
        if (mc_n <= 0) {
            p = penalty_curves_at(c, sigma);
        } else {
            const ArjovskyData ad =
                gen_arjovsky(c, sigma, mc_n, mix_seed({seed, fnv1a64("figure1")}));
            const EnvironmentMoments m = compute_moments(ad.data);
            const SymMatrix g = gram(ad.rep, m);
            const Matrix b = ad.rep.theta * m.sxy;
            const Matrix wstar = spd_solve(g, b);
            const Matrix u = Matrix::col({1.0, 0.0}) - wstar;
            p.c = c;
            p.distance_sq = u.frobenius_norm() * u.frobenius_norm();
            const Matrix gu = g.mat() * u;
            p.weighted_sq = frob_inner(u, gu);
            p.gram_sq = gu.frobenius_norm() * gu.frobenius_norm();
            const EigDecomp eig = sym_eig(g);
            p.kappa = condition_number(eig);
        }
        csv += fmt_g17(c) + ",distance_sq," + fmt_g17(p.distance_sq) + "\n";
        csv += fmt_g17(c) + ",weighted_sq," + fmt_g17(p.weighted_sq) + "\n";
        csv += fmt_g17(c) + ",gram_sq," + fmt_g17(p.gram_sq) + "\n";
        csv += fmt_g17(c) + ",kappa," + fmt_g17(p.kappa) + "\n";
    }
    return csv;
}

std::string rosenfeld_sweep_csv(const SemSpec& spec, const std::vector<double>& eps_grid, long n,
                                uint64_t seed) {
    if (eps_grid.empty()) throw SpecError("rosenfeld_sweep: empty grid");
    validate_spec(spec);

    // Invariant classifier: pooled LSE of the fully masked representation
    // [Z_c; 0], embedded in latent coordinates.
    const int dz = spec.d_c + spec.d_e;
    const LinearRepresentation id_rep{Matrix::identity(dz)};
    std::vector<EnvironmentMoments> inv_moments;
    for (int e = 0; e < spec.n_env(); ++e) {
        const EnvironmentData data = gen_sem(spec, e, n, mix_seed({seed, 0x494e56ULL}));
        EnvironmentData zeroed;
        zeroed.task = data.task;
        zeroed.y = data.y;
        zeroed.x = Matrix(static_cast<int>(data.n()), dz);
        for (long i = 0; i < data.n(); ++i)
            for (int j = 0; j < spec.d_c; ++j)
                zeroed.x(static_cast<int>(i), j) = data.latents(static_cast<int>(i), j);
        inv_moments.push_back(compute_moments(zeroed));
    }
    const Classifier w_inv = pooled_classifier(id_rep, inv_moments);

    const int env = widest_env(spec);
    std::string csv =
        "epsilon,kappa_empirical,kappa_stderr,p_sec43,p_appB2,bound_constant,lower_bound,"
        "mask_prob,penalty_v1,penalty_v2\n";
    for (double eps : eps_grid) {
        const CounterexampleProfile p =
            rosenfeld_kappa_bound(spec, env, eps, MaskProbFormula::appB2, n, seed);
        const EnvironmentData data = gen_sem(spec, env, n, seed);
        const MaskedRepresentation masked = apply_masked_representation(data, spec, eps);
        const EnvironmentMoments m = compute_moments(masked.data);
        const double rho1 = penalty_irmv1(id_rep, w_inv, m);
        const double rho2 = penalty_irmv2(id_rep, w_inv, m);
        csv += fmt_g17(eps) + "," + fmt_g17(p.kappa_empirical) + "," + fmt_g17(p.kappa_stderr) +
               "," + fmt_g17(p.p_mask_sec43) + "," + fmt_g17(p.p_mask_appB2) + "," +
               fmt_g17(p.bound_constant) + "," + fmt_g17(p.kappa_lower_bound) + "," +
               fmt_g17(p.empirical_mask_prob) + "," + fmt_g17(rho1) + "," + fmt_g17(rho2) + "\n";
    }
    return csv;
}

}  // namespace irmbench
