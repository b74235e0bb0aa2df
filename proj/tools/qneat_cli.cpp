// qneat command line: train, crossval, eval, predict, quantreport, mlpify.
//
// Option precedence: command-line flags override config-file values
// (--config, key=value with the same key names), which override the
// QNEAT_SEED environment variable (seed only), which overrides built-in
// defaults. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qneat/qneat.hpp"

namespace fs = std::filesystem;

namespace {

struct RunConfig {
    std::string data;
    std::string out = "qneat_out";
    std::string metric = "accuracy";
    std::string kfold = "4";  // fold count or "sweep" (crossval only)
    qneat::EvolutionConfig evo;
};

// Shortest round-trip decimal text for a double; keeps CSV output byte-stable
// across runs.
std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string metric_label(const std::string& metric) {
    return metric == "f1" ? "F1" : "accuracy";
}

double score_predictions(const std::string& metric, std::span<const int> preds,
                         std::span<const int> labels) {
    return metric == "f1" ? qneat::f1_score(preds, labels) : qneat::accuracy(preds, labels);
}

void write_learning_curve(const std::vector<qneat::GenerationRecord>& curve,
                          const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw qneat::Error("cannot write " + path.string());
    out << "generation,best_acc,mean_acc,best_nmi,species,quant_error\n";
    for (const auto& r : curve) {
        out << r.generation << ',' << format_double(r.best_accuracy) << ','
            << format_double(r.mean_accuracy) << ',' << format_double(r.best_info) << ','
            << r.species_count << ',' << format_double(r.quantizer_error) << '\n';
    }
}

std::pair<std::vector<int>, std::vector<int>> predictions_for(
    const qneat::ModelArtifact& artifact, const std::vector<qneat::FlowRecord>& records) {
    std::vector<int> preds, labels;
    preds.reserve(records.size());
    labels.reserve(records.size());
    for (const auto& rec : records) {
        preds.push_back(qneat::predict(artifact, rec.features).label);
        labels.push_back(rec.label);
    }
    return {std::move(preds), std::move(labels)};
}

qneat::ModelArtifact build_artifact(const qneat::EvolveResult& result,
                                    const qneat::EvolutionConfig& config,
                                    const std::string& fingerprint,
                                    const std::vector<qneat::FlowRecord>& validation) {
    const qneat::LayeredGenome layered = qneat::insert_dummy_nodes(result.best);
    qneat::ModelArtifact artifact{qneat::to_dense(layered, result.quantizers),
                                  result.quantizers,
                                  config,
                                  result.generations_run,
                                  qneat::ModelMetrics{},
                                  fingerprint};
    const auto [preds, labels] = predictions_for(artifact, validation);
    artifact.metrics.accuracy = qneat::accuracy(preds, labels);
    artifact.metrics.f1 = qneat::f1_score(preds, labels);
    artifact.metrics.nmi = qneat::normalized_mutual_information(preds, labels);
    auto fit_err = [](const qneat::QuantizerBasis& b) {
        return b.fit_errors.empty()
            ? 0.0
            : *std::min_element(b.fit_errors.begin(), b.fit_errors.end());
    };
    artifact.metrics.weight_quant_error = fit_err(result.quantizers.weights);
    artifact.metrics.activation_quant_error = fit_err(result.quantizers.activations);
    return artifact;
}

int cmd_train(const RunConfig& rc) {
    const int k = std::stoi(rc.kfold);
    auto records = qneat::load_records(rc.data);
    qneat::Rng balance_rng(qneat::mix_seed(rc.evo.seed, 0xba1a) );
    auto balanced = qneat::balance(records, balance_rng);
    const std::string fp = qneat::fingerprint(balanced);

    const auto plan = qneat::kfold_split(balanced, k, qneat::mix_seed(rc.evo.seed, 0xf01d));
    const auto train = qneat::gather(balanced, plan.train_indices(0));
    const auto validation = qneat::gather(balanced, plan.test_indices(0));

    std::cout << "training on " << train.size() << " rows, validating on "
              << validation.size() << " rows\n";
    const auto result = qneat::evolve(rc.evo, train, validation,
        [](const qneat::Population&, const std::vector<double>&,
           const qneat::GenerationRecord& rec) {
            std::cout << "gen " << std::setw(3) << rec.generation
                      << "  best_acc " << std::fixed << std::setprecision(4) << rec.best_accuracy
                      << "  mean_acc " << rec.mean_accuracy
                      << "  nmi " << rec.best_info
                      << "  species " << rec.species_count << '\n'
                      << std::defaultfloat;
        });

    fs::create_directories(rc.out);
    const auto artifact = build_artifact(result, rc.evo, fp, validation);
    const fs::path model_path = fs::path(rc.out) / ("model" + std::string(qneat::kModelExtension));
    qneat::save_model(artifact, model_path);
    write_learning_curve(result.curve, fs::path(rc.out) / "learning_curve.csv");
    {
        std::ofstream g(fs::path(rc.out) / "best_genome.json");
        g << qneat::genome_to_json(result.best).dump(2) << '\n';
    }

    std::cout << "generations run: " << result.generations_run << '\n'
              << "validation accuracy: " << artifact.metrics.accuracy << '\n'
              << "validation F1: " << artifact.metrics.f1 << '\n'
              << "validation NMI: " << artifact.metrics.nmi << '\n'
              << "model: " << model_path.string() << '\n';
    return 0;
}

int cmd_crossval(const RunConfig& rc) {
    std::vector<int> ks;
    if (rc.kfold == "sweep") {
        for (int k = 3; k <= 10; ++k) ks.push_back(k);
    } else {
        ks.push_back(std::stoi(rc.kfold));
    }

    auto records = qneat::load_records(rc.data);
    qneat::Rng balance_rng(qneat::mix_seed(rc.evo.seed, 0xba1a));
    auto balanced = qneat::balance(records, balance_rng);
    const std::string fp = qneat::fingerprint(balanced);
    fs::create_directories(rc.out);

    std::ostringstream report;
    report << "k,min,max,avg\n";
    std::cout << "k-folds   min      max      avg   (" << metric_label(rc.metric) << ")\n";
    for (int k : ks) {
        const auto plan =
            qneat::kfold_split(balanced, k, qneat::mix_seed(rc.evo.seed, 0xf01d + k));
        {
            std::ofstream pf(fs::path(rc.out) / ("k" + std::to_string(k) + "_foldplan.json"));
            pf << plan.to_json().dump(2) << '\n';
        }
        std::vector<double> scores;
        for (int fold = 0; fold < k; ++fold) {
            const auto train = qneat::gather(balanced, plan.train_indices(fold));
            const auto holdout = qneat::gather(balanced, plan.test_indices(fold));
            qneat::EvolutionConfig evo = rc.evo;
            evo.seed = qneat::mix_seed(rc.evo.seed, 1000ULL * k + fold);
            const auto result = qneat::evolve(evo, train, holdout);
            const auto artifact = build_artifact(result, evo, fp, holdout);
            const fs::path model_path =
                fs::path(rc.out) /
                ("k" + std::to_string(k) + "_fold" + std::to_string(fold) +
                 std::string(qneat::kModelExtension));
            qneat::save_model(artifact, model_path);
            const auto [preds, labels] = predictions_for(artifact, holdout);
            scores.push_back(score_predictions(rc.metric, preds, labels));
        }
        const double mn = *std::min_element(scores.begin(), scores.end());
        const double mx = *std::max_element(scores.begin(), scores.end());
        const double avg =
            std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
        std::cout << std::setw(7) << k << std::fixed << std::setprecision(3) << "  "
                  << std::setw(7) << mn << "  " << std::setw(7) << mx << "  "
                  << std::setw(7) << avg << std::defaultfloat << '\n';
        report << k << ',' << format_double(mn) << ',' << format_double(mx) << ','
               << format_double(avg) << '\n';
    }
    std::ofstream rf(fs::path(rc.out) / "crossval_report.csv");
    rf << report.str();
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& metric) {
    const auto artifact = qneat::load_model(model_path);
    const auto records = qneat::load_records(
        data_path, static_cast<std::size_t>(artifact.network.input_count));
    const auto [preds, labels] = predictions_for(artifact, records);
    const double score = score_predictions(metric, preds, labels);
    std::cout << metric_label(metric) << ": " << format_double(score) << '\n';
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& row) {
    const auto artifact = qneat::load_model(model_path);
    std::vector<double> features;
    std::stringstream ss(row);
    std::string field;
    while (std::getline(ss, field, ',')) {
        try {
            features.push_back(std::stod(field));
        } catch (const std::exception&) {
            throw qneat::ParseError("cannot parse feature value '" + field + "'");
        }
    }
    const auto result = qneat::predict(artifact, features);
    std::cout << "score: " << format_double(result.score) << '\n'
              << "label: " << (result.label == 1 ? "attack" : "normal") << '\n';
    return 0;
}

int cmd_quantreport(const std::string& model_path) {
    const auto artifact = qneat::load_model(model_path);
    auto print_basis = [](const char* name, const qneat::QuantizerBasis& b, double fit_error) {
        std::cout << name << " quantizer ("
                  << (b.domain() == qneat::Domain::Signed ? "signed" : "unsigned")
                  << ", k=" << b.bits() << ")";
        if (b.is_degenerate()) std::cout << "  DEGENERATE";
        std::cout << "\n  basis:";
        for (double v : b.basis()) std::cout << ' ' << format_double(v);
        std::cout << "\n  levels:";
        for (double l : b.levels()) std::cout << ' ' << format_double(l);
        std::cout << "\n  thresholds:";
        for (double t : b.thresholds()) std::cout << ' ' << format_double(t);
        std::cout << "\n  fit error: " << format_double(fit_error) << "\n";
    };
    print_basis("weight", artifact.quant.weights, artifact.metrics.weight_quant_error);
    print_basis("activation", artifact.quant.activations,
                artifact.metrics.activation_quant_error);
    const auto est = qneat::resource_estimate(artifact);
    std::cout << "parameters: " << est.param_count << " (" << est.param_bits << " bits)\n"
              << "mult-adds per inference: " << est.mult_adds << '\n'
              << "activations per inference: " << est.activation_count << '\n';
    return 0;
}

int cmd_mlpify(const std::string& genome_path, const std::string& out_path) {
    std::ifstream in(genome_path);
    if (!in) throw qneat::Error("cannot open " + genome_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw qneat::ParseError(genome_path + ": " + e.what());
    }
    const qneat::Genome genome = qneat::genome_from_json(j);
    const auto report = qneat::validate_genome(genome);
    if (!report.ok()) {
        std::string msg = genome_path + " is not a valid genome:";
        for (const auto& e : report.errors) msg += "\n  " + e;
        throw qneat::ParseError(msg);
    }
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    const qneat::LayeredGenome layered = qneat::insert_dummy_nodes(genome);

    std::cout << "layers: " << layered.layer_count << '\n'
              << "dummy nodes inserted: " << layered.dummy_count << '\n'
              << "nodes: " << genome.nodes.size() << " -> " << layered.genome.nodes.size() << '\n'
              << "connections: " << genome.connections.size() << " -> "
              << layered.genome.connections.size() << '\n';
    std::cout << "layer sizes:";
    std::vector<int> sizes(static_cast<std::size_t>(layered.layer_count), 0);
    for (const auto& [id, l] : layered.layer_of) ++sizes[static_cast<std::size_t>(l)];
    for (int s : sizes) std::cout << ' ' << s;
    std::cout << '\n';

    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw qneat::Error("cannot write " + out_path);
        out << qneat::genome_to_json(layered.genome).dump(2) << '\n';
        std::cout << "layered genome: " << out_path << '\n';
    }
    return 0;
}

} // namespace

namespace {

// key=value config file with the same keys as the long flags. Values from
// the file apply only where no command-line flag was given, keeping the
// precedence flags > config file > QNEAT_SEED > defaults.
bool apply_config_file(CLI::App* cmd, RunConfig& rc, const std::string& path,
                       bool& seed_from_config) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "error: cannot open config file " << path << '\n';
        return false;
    }
    auto unset = [&](const char* flag) { return cmd->count(flag) == 0; };
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            std::cerr << "error: " << path << ":" << line_no << ": expected key=value\n";
            return false;
        }
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        try {
            if (key == "data") {
                if (unset("--data")) rc.data = value;
            } else if (key == "k") {
                if (unset("--k")) rc.kfold = value;
            } else if (key == "bits") {
                if (unset("--bits")) rc.evo.quant_bits = std::stoi(value);
            } else if (key == "pop") {
                if (unset("--pop")) rc.evo.population_size = std::stoi(value);
            } else if (key == "batch") {
                if (unset("--batch")) rc.evo.batch_size = std::stoi(value);
            } else if (key == "generations") {
                if (unset("--generations")) rc.evo.max_generations = std::stoi(value);
            } else if (key == "sigma") {
                if (unset("--sigma")) rc.evo.sigma = std::stod(value);
            } else if (key == "metric") {
                if (value != "accuracy" && value != "f1") {
                    std::cerr << "error: " << path << ":" << line_no
                              << ": metric must be accuracy or f1\n";
                    return false;
                }
                if (unset("--metric")) rc.metric = value;
            } else if (key == "seed") {
                if (unset("--seed")) {
                    rc.evo.seed = std::stoull(value);
                    seed_from_config = true;
                }
            } else if (key == "out") {
                if (unset("--out")) rc.out = value;
            } else if (key == "hidden") {
                if (unset("--hidden")) rc.evo.initial_hidden_nodes = std::stoi(value);
            } else if (key == "quant-iters") {
                if (unset("--quant-iters")) rc.evo.quant_iters = std::stoi(value);
            } else {
                std::cerr << "error: " << path << ":" << line_no << ": unknown key '"
                          << key << "'\n";
                return false;
            }
        } catch (const std::exception&) {
            std::cerr << "error: " << path << ":" << line_no << ": bad value for '"
                      << key << "'\n";
            return false;
        }
    }
    return true;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qneat: evolved quantized networks for network-flow classification"};
    app.require_subcommand(1);

    RunConfig rc;
    std::string model_path, row, genome_path, out_genome;
    std::string config_path;

    auto add_common = [&](CLI::App* cmd, bool needs_data) {
        cmd->add_option("--config", config_path,
                        "config file (key=value, same keys as the long flags)");
        // --data is validated after the config file is applied, so it can
        // come from either source.
        cmd->add_option("--data", rc.data, "feature CSV (f0..fN,category)");
        (void)needs_data;
        cmd->add_option("--k", rc.kfold, "fold count in [3,10], or 'sweep' for crossval");
        cmd->add_option("--bits", rc.evo.quant_bits, "quantizer bit width");
        cmd->add_option("--pop", rc.evo.population_size, "population size");
        cmd->add_option("--batch", rc.evo.batch_size, "per-generation batch size");
        cmd->add_option("--generations", rc.evo.max_generations, "maximum generations");
        cmd->add_option("--sigma", rc.evo.sigma, "weight scale sigma");
        cmd->add_option("--metric", rc.metric, "accuracy or f1")
            ->check(CLI::IsMember({"accuracy", "f1"}));
        cmd->add_option("--seed", rc.evo.seed, "run seed");
        cmd->add_option("--out", rc.out, "output directory");
        cmd->add_option("--hidden", rc.evo.initial_hidden_nodes, "initial hidden nodes");
        cmd->add_option("--quant-iters", rc.evo.quant_iters, "quantizer fit iterations");
    };

    auto* train = app.add_subcommand("train", "balance, split, evolve, save a model");
    add_common(train, true);

    auto* crossval = app.add_subcommand("crossval", "k-fold cross-validation report");
    add_common(crossval, true);

    auto* eval = app.add_subcommand("eval", "score a saved model against a dataset");
    eval->add_option("--model", model_path, "model file")->required();
    eval->add_option("--data", rc.data, "feature CSV")->required();
    eval->add_option("--metric", rc.metric, "accuracy or f1")
        ->check(CLI::IsMember({"accuracy", "f1"}));

    auto* predict = app.add_subcommand("predict", "classify one feature row");
    predict->add_option("--model", model_path, "model file")->required();
    predict->add_option("--row", row, "comma-separated feature values")->required();

    auto* quantreport = app.add_subcommand("quantreport", "print quantizer bases and levels");
    quantreport->add_option("--model", model_path, "model file")->required();

    auto* mlpify = app.add_subcommand("mlpify", "layer a genome JSON with dummy nodes");
    mlpify->add_option("--genome", genome_path, "genome JSON file")->required();
    mlpify->add_option("--out", out_genome, "write the layered genome here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    for (CLI::App* cmd : {train, crossval}) {
        if (!cmd->parsed()) continue;
        bool seed_from_config = false;
        if (cmd->count("--config") > 0 &&
            !apply_config_file(cmd, rc, config_path, seed_from_config))
            return 2;
        // QNEAT_SEED is the lowest-priority seed source: it applies only
        // when neither a flag nor the config file set one.
        if (cmd->count("--seed") == 0 && !seed_from_config) {
            if (const char* env = std::getenv("QNEAT_SEED")) {
                try {
                    rc.evo.seed = std::stoull(env);
                } catch (const std::exception&) {
                    std::cerr << "error: QNEAT_SEED is not an integer\n";
                    return 2;
                }
            }
        }
        if (rc.data.empty()) {
            std::cerr << "error: --data is required (as a flag or a config-file key)\n";
            return 2;
        }
    }

    try {
        if (train->parsed() || crossval->parsed()) {
            if (rc.kfold != "sweep") {
                int k = 0;
                try {
                    k = std::stoi(rc.kfold);
                } catch (const std::exception&) {
                    std::cerr << "error: --k must be an integer in [3,10] or 'sweep'\n";
                    return 2;
                }
                if (k < 3 || k > 10) {
                    std::cerr << "error: --k must be in [3,10]\n";
                    return 2;
                }
            } else if (train->parsed()) {
                std::cerr << "error: 'sweep' is only valid for crossval\n";
                return 2;
            }
            rc.evo.validate();
        }
        if (train->parsed()) return cmd_train(rc);
        if (crossval->parsed()) return cmd_crossval(rc);
        if (eval->parsed()) return cmd_eval(model_path, rc.data, rc.metric);
        if (predict->parsed()) return cmd_predict(model_path, row);
        if (quantreport->parsed()) return cmd_quantreport(model_path);
        if (mlpify->parsed()) return cmd_mlpify(genome_path, out_genome);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
