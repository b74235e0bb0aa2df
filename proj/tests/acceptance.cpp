// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// required criterion fails. Criterion 8 runs only when QNEAT_UNSW_DATA points
// at a real 256-byte feature CSV; it is reported as SKIP otherwise.

#include <bit>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "qneat/qneat.hpp"
#include "support/test_util.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, const char* name, bool pass, const std::string& detail = "") {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << criterion << ": " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!pass) ++failures;
}

void report_skip(int criterion, const char* name, const std::string& why) {
    std::cout << "[SKIP] criterion " << criterion << ": " << name << " (" << why << ")"
              << std::endl;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

bool bits_equal(double a, double b) {
    return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

// ---- criterion 1: quantizer correctness on random vectors ----
void criterion_1() {
    const auto start = Clock::now();
    std::mt19937_64 rng(0xC1);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    bool monotone = true, consistent = true, idempotent = true;

    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 1 + static_cast<int>(rng() % 3);
        // log-uniform length in [2, 4096]
        const double t = u01(rng);
        const std::size_t n =
            static_cast<std::size_t>(2.0 * std::pow(2048.0, t));
        const bool is_signed = rng() & 1;
        std::normal_distribution<double> xdist(is_signed ? 0.0 : 0.5, 0.35);
        std::vector<double> values(n);
        for (auto& x : values) x = xdist(rng);

        const auto basis = qneat::fit_basis(values, k, 10, std::nullopt,
                                            is_signed ? qneat::Domain::Signed
                                                      : qneat::Domain::Unsigned);
        for (std::size_t i = 1; i < basis.fit_errors.size(); ++i)
            if (basis.fit_errors[i] > basis.fit_errors[i - 1]) monotone = false;
        for (std::size_t i = 0; i < std::min<std::size_t>(n, 256); ++i) {
            const double q = basis.quantize(values[i]);
            if (!bits_equal(basis.code_value(basis.encode(values[i])), q)) consistent = false;
            if (!bits_equal(basis.quantize(q), q)) idempotent = false;
        }
    }
    const double elapsed = seconds_since(start);
    std::ostringstream detail;
    detail << "monotone=" << monotone << " encode=" << consistent
           << " idempotent=" << idempotent << " " << elapsed << "s";
    report(1, "quantizer correctness suite",
           monotone && consistent && idempotent && elapsed < 30.0, detail.str());
}

// ---- criterion 2: exhaustive oracle equivalence at tiny scale ----
void criterion_2() {
    std::mt19937_64 rng(0xC2);
    std::normal_distribution<double> xdist(0.2, 1.0);
    bool reproduces = true, closed_form = true, oracle_is_floor = true;

    for (int trial = 0; trial < 150; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 5);  // lengths 2..6
        const int k = 1 + static_cast<int>(rng() % 2);
        std::vector<double> values(static_cast<std::size_t>(n));
        for (auto& x : values) x = xdist(rng);

        const auto oracle = testutil::oracle_global_fit(values, k, true);
        qneat::QuantizerBasis init(qneat::Domain::Signed, oracle.v);
        const auto fitted = qneat::fit_basis(values, k, 10, init, qneat::Domain::Signed);
        if (std::fabs(qneat::quantization_error(values, fitted) - oracle.error) > 1e-9)
            reproduces = false;
        const auto cold = qneat::fit_basis(values, k, 10, std::nullopt, qneat::Domain::Signed);
        if (qneat::quantization_error(values, cold) < oracle.error - 1e-9)
            oracle_is_floor = false;

        if (k == 1) {
            double mean_abs = 0.0;
            for (double x : values) mean_abs += std::fabs(x);
            mean_abs /= n;
            const auto k1 = qneat::fit_basis(values, 1, 10, std::nullopt, qneat::Domain::Signed);
            if (std::fabs(k1.basis()[0] - mean_abs) > 1e-9) closed_form = false;
        }
    }
    std::ostringstream detail;
    detail << "fit-from-oracle=" << reproduces << " k1-closed-form=" << closed_form
           << " global-floor=" << oracle_is_floor;
    report(2, "oracle equivalence", reproduces && closed_form && oracle_is_floor, detail.str());
}

// ---- criterion 3: bitwise dot equals direct quantized dot ----
void criterion_3() {
    std::mt19937_64 rng(0xC3);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 1 + static_cast<int>(rng() % 3);
        const std::size_t n =
            static_cast<std::size_t>(1.0 + u01(rng) * 4095.0);
        std::normal_distribution<double> wdist(0.0, 0.2);
        std::uniform_real_distribution<double> adist(0.0, 1.0);
        std::vector<double> w(n), a(n);
        for (auto& x : w) x = wdist(rng);
        for (auto& x : a) x = adist(rng);
        const auto wb = qneat::fit_basis(w, k, 8, std::nullopt, qneat::Domain::Signed);
        const auto ab = qneat::fit_basis(a, k, 8, std::nullopt, qneat::Domain::Unsigned);

        double direct = 0.0;
        for (std::size_t i = 0; i < n; ++i) direct += wb.quantize(w[i]) * ab.quantize(a[i]);
        const double bitwise =
            qneat::bitwise_dot(qneat::encode_all(w, wb), qneat::encode_all(a, ab), wb, ab);
        worst = std::max(worst, std::fabs(bitwise - direct));
    }
    std::ostringstream detail;
    detail << "max |bitwise - direct| = " << worst;
    report(3, "bitwise inference", worst <= 1e-9, detail.str());
}

// ---- criterion 4: MLPification equivalence ----
void criterion_4() {
    std::mt19937_64 rng(0xC4);
    std::normal_distribution<double> d(0.0, 2.0);
    bool bitwise_ok = true, count_ok = true;

    for (int genome_i = 0; genome_i < 100; ++genome_i) {
        const int inputs = 3 + static_cast<int>(rng() % 6);
        const auto g = testutil::random_evolved_genome(inputs, 0xC400 + genome_i, 25);

        const auto layered = qneat::insert_dummy_nodes(g);
        if (layered.dummy_count != testutil::reference_dummy_need(g)) count_ok = false;

        // Quantizers fitted on a small random batch, as in training.
        std::vector<qneat::FlowRecord> batch;
        for (int i = 0; i < 20; ++i) {
            qneat::FlowRecord r;
            r.features.resize(static_cast<std::size_t>(inputs));
            for (auto& f : r.features) f = d(rng);
            r.label = i % 2;
            batch.push_back(std::move(r));
        }
        const auto quant = qneat::refit_quantizers(g, batch, 2, 10, std::nullopt);
        const auto dense = qneat::to_dense(layered, quant);

        const qneat::EvalPlan plan_orig_f(g, nullptr);
        const qneat::EvalPlan plan_layer_f(layered.genome, nullptr);
        const qneat::EvalPlan plan_orig_q(g, &quant);
        const qneat::EvalPlan plan_layer_q(layered.genome, &quant);

        std::vector<double> input(static_cast<std::size_t>(inputs));
        for (int i = 0; i < 1000; ++i) {
            for (auto& x : input) x = d(rng);
            // float path: original vs dummy-inserted
            const auto of = plan_orig_f.run(input);
            const auto lf = plan_layer_f.run(input);
            // quantized path: original vs dummy-inserted vs dense
            const auto oq = plan_orig_q.run(input);
            const auto lq = plan_layer_q.run(input);
            const auto dq = qneat::dense_evaluate(dense, quant, input);
            for (std::size_t o = 0; o < of.size(); ++o) {
                if (!bits_equal(of[o], lf[o]) || !bits_equal(oq[o], lq[o]) ||
                    !bits_equal(oq[o], dq[o]))
                    bitwise_ok = false;
            }
        }
    }
    std::ostringstream detail;
    detail << "bit-exact=" << bitwise_ok << " dummy-count=" << count_ok;
    report(4, "MLPification equivalence", bitwise_ok && count_ok, detail.str());
}

// ---- criterion 5: evolution sanity on a separable task ----
void criterion_5() {
    const std::vector<std::uint64_t> seeds{101, 102, 103, 104, 105};
    int successes = 0;
    double worst_time = 0.0;
    bool time_ok = true;
    std::ostringstream detail;

    for (auto seed : seeds) {
        // 2000 samples, 16 features, two well-separated Gaussian clusters.
        const auto data = testutil::gaussian_task(1000, 16, 1.0, 0.25, seed * 7);

        // Closed-form separability check: a single-connection genome reading
        // one coordinate classifies almost perfectly.
        {
            const auto probe = testutil::GenomeBuilder{}
                                   .node(0, qneat::NodeKind::Input)
                                   .node(1, qneat::NodeKind::Output)
                                   .edge(0, 1, 0.4)
                                   .build();
            long correct = 0;
            for (const auto& rec : data) {
                const std::vector<double> one{rec.features[0]};
                if (qneat::predict_label(probe, one) == rec.label) ++correct;
            }
            if (static_cast<double>(correct) / static_cast<double>(data.size()) < 0.95) {
                report(5, "evolution sanity at desk scale", false,
                       "task not separable by closed form");
                return;
            }
        }

        const auto [train, validation] = testutil::split_train_validation(data, 0.75, seed);
        qneat::EvolutionConfig config;  // Table-scale defaults: pop 16, batch 500, 30 gens
        config.seed = seed;
        const auto start = Clock::now();
        const auto result = qneat::evolve(config, train, validation);
        const double elapsed = seconds_since(start);
        worst_time = std::max(worst_time, elapsed);
        if (elapsed >= 120.0) time_ok = false;
        if (result.best_validation_accuracy >= 0.95) ++successes;
        detail << "s" << seed << "=" << result.best_validation_accuracy << "/"
               << static_cast<int>(elapsed) << "s ";
    }
    detail << "successes=" << successes << "/5 worst=" << worst_time << "s";
    report(5, "evolution sanity at desk scale", successes >= 4 && time_ok, detail.str());
}

// ---- criterion 6: dataset machinery ----
void criterion_6() {
    std::mt19937_64 rng(0xC6);
    bool balance_ok = true, batch_ok = true, fold_ok = true;

    // balance: equal label counts over random category distributions
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<qneat::FlowRecord> records;
        int tag = 0;
        const int cats = 1 + static_cast<int>(rng() % 9);
        for (int c = 0; c < cats; ++c) {
            const int count = 1 + static_cast<int>(rng() % 50);
            for (int i = 0; i < count; ++i) {
                qneat::FlowRecord r;
                r.features = {static_cast<double>(tag++)};
                r.category = "cat" + std::to_string(c);
                r.label = 1;
                records.push_back(std::move(r));
            }
        }
        const int normals = 1 + static_cast<int>(rng() % 500);
        for (int i = 0; i < normals; ++i) {
            qneat::FlowRecord r;
            r.features = {static_cast<double>(tag++)};
            r.category = "normal";
            r.label = 0;
            records.push_back(std::move(r));
        }
        qneat::Rng brng(rng());
        try {
            const auto balanced = qneat::balance(records, brng);
            long attack = 0, normal = 0;
            std::set<double> seen;
            for (const auto& r : balanced) {
                (r.label ? attack : normal)++;
                if (!seen.insert(r.features[0]).second) balance_ok = false;
            }
            if (attack != normal || attack == 0) balance_ok = false;
        } catch (const qneat::InsufficientData&) {
            // legitimate when normals < categories
        }
    }

    // batches: every 500-batch is exactly 250/250
    {
        std::vector<qneat::FlowRecord> records;
        for (int i = 0; i < 700; ++i) {
            qneat::FlowRecord r;
            r.features = {static_cast<double>(i)};
            r.label = i % 2;
            r.category = r.label ? "attack" : "normal";
            records.push_back(std::move(r));
        }
        qneat::Rng brng(0xBA7C);
        for (int i = 0; i < 100; ++i) {
            const auto batch = qneat::sample_batch(records, 500, brng);
            long attack = 0;
            std::set<double> seen;
            for (const auto& r : batch) {
                attack += r.label;
                if (!seen.insert(r.features[0]).second) batch_ok = false;
            }
            if (batch.size() != 500 || attack != 250) batch_ok = false;
        }
    }

    // fold plans: disjoint, covering, stratified within 1% plus the
    // unavoidable integer-rounding allowance of 2/fold_size
    for (int trial = 0; trial < 10; ++trial) {
        const int attacks = 400 + static_cast<int>(rng() % 600);
        const int normals = 400 + static_cast<int>(rng() % 600);
        std::vector<qneat::FlowRecord> records;
        for (int i = 0; i < attacks + normals; ++i) {
            qneat::FlowRecord r;
            r.features = {static_cast<double>(i)};
            r.label = i < attacks ? 1 : 0;
            r.category = r.label ? "attack" : "normal";
            records.push_back(std::move(r));
        }
        const double global_ratio =
            static_cast<double>(attacks) / static_cast<double>(attacks + normals);
        for (int k = 3; k <= 10; ++k) {
            const auto plan = qneat::kfold_split(records, k, rng());
            if (plan.assignments.size() != records.size()) fold_ok = false;
            std::vector<long> size(static_cast<std::size_t>(k), 0);
            std::vector<long> attack(static_cast<std::size_t>(k), 0);
            for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
                const int f = plan.assignments[i];
                if (f < 0 || f >= k) {
                    fold_ok = false;
                    continue;
                }
                ++size[static_cast<std::size_t>(f)];
                attack[static_cast<std::size_t>(f)] += records[i].label;
            }
            long covered = 0;
            for (int f = 0; f < k; ++f) {
                covered += size[static_cast<std::size_t>(f)];
                const double ratio = static_cast<double>(attack[static_cast<std::size_t>(f)]) /
                                     static_cast<double>(size[static_cast<std::size_t>(f)]);
                const double allowance =
                    0.01 + 2.0 / static_cast<double>(size[static_cast<std::size_t>(f)]);
                if (std::fabs(ratio - global_ratio) > allowance) fold_ok = false;
            }
            if (covered != static_cast<long>(records.size())) fold_ok = false;
            const auto [mn, mx] = std::minmax_element(size.begin(), size.end());
            if (*mx - *mn > 1) fold_ok = false;
        }
    }
    std::ostringstream detail;
    detail << "balance=" << balance_ok << " batch=" << batch_ok << " folds=" << fold_ok;
    report(6, "dataset machinery", balance_ok && batch_ok && fold_ok, detail.str());
}

// ---- criterion 7: byte determinism of cmd_train ----
std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void criterion_7() {
    const fs::path dir = fs::temp_directory_path() / "qneat_acceptance_c7";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path data = dir / "flows.csv";

    auto shell = [](const std::string& cmd) {
        return std::system((cmd + " > /dev/null 2>&1").c_str());
    };
    bool ok = shell(std::string(QNEAT_SYNTHGEN_BIN) + " --out " + data.string() +
                    " --attacks 25 --features 32 --seed 5") == 0;
    const std::string train = std::string(QNEAT_CLI_BIN) + " train --data " + data.string() +
                              " --pop 8 --batch 60 --generations 4 --seed 2024 --out ";
    ok = ok && shell(train + (dir / "run1").string()) == 0;
    ok = ok && shell(train + (dir / "run2").string()) == 0;

    bool identical = false;
    if (ok) {
        identical = slurp(dir / "run1" / "model.qneat.json") ==
                        slurp(dir / "run2" / "model.qneat.json") &&
                    slurp(dir / "run1" / "learning_curve.csv") ==
                        slurp(dir / "run2" / "learning_curve.csv") &&
                    !slurp(dir / "run1" / "model.qneat.json").empty();
    }
    report(7, "cmd_train byte determinism", ok && identical);
    fs::remove_all(dir);
}

// ---- criterion 8 (optional): UNSW-NB15-derived dataset reproduction ----
void criterion_8() {
    const char* path = std::getenv("QNEAT_UNSW_DATA");
    if (path == nullptr) {
        report_skip(8, "UNSW-NB15 cross-validation bands",
                    "set QNEAT_UNSW_DATA to a 256-byte feature CSV to enable");
        return;
    }
    try {
        auto records = qneat::load_records(path, qneat::kFlowFeatureCount);
        qneat::Rng brng(qneat::mix_seed(1, 0xba1a));
        auto balanced = qneat::balance(records, brng);

        auto run_k = [&](int k) {
            const auto plan = qneat::kfold_split(balanced, k, qneat::mix_seed(1, 0xf01d + k));
            std::vector<double> scores;
            for (int fold = 0; fold < k; ++fold) {
                const auto train = qneat::gather(balanced, plan.train_indices(fold));
                const auto holdout = qneat::gather(balanced, plan.test_indices(fold));
                qneat::EvolutionConfig config;
                config.seed = qneat::mix_seed(1, 1000ULL * k + fold);
                const auto result = qneat::evolve(config, train, holdout);
                scores.push_back(result.best_validation_accuracy);
            }
            return std::accumulate(scores.begin(), scores.end(), 0.0) /
                   static_cast<double>(scores.size());
        };

        const double k4 = run_k(4);
        bool ok = std::fabs(k4 - 0.884) <= 0.06;
        std::ostringstream detail;
        detail << "k=4 avg=" << k4;
        for (int k = 3; k <= 10; ++k) {
            if (k == 4) continue;
            const double avg = run_k(k);
            detail << " k" << k << "=" << avg;
            if (avg < 0.848 - 0.06 || avg > 0.884 + 0.06) ok = false;
        }
        detail << "; hardware figures (LUTs/latency) are out of scope";
        report(8, "UNSW-NB15 cross-validation bands", ok, detail.str());
    } catch (const std::exception& e) {
        report(8, "UNSW-NB15 cross-validation bands", false, e.what());
    }
}

} // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    if (failures == 0)
        std::cout << "all required acceptance criteria passed" << std::endl;
    else
        std::cout << failures << " acceptance criteria FAILED" << std::endl;
    return failures;
}
