#pragma once

// Persistent model artifact: the dense layered network, its quantizer bases,
// and training metadata, stored as a single canonical JSON document with an
// embedded SHA-256 checksum. Serialization is byte-stable for a given
// artifact: fixed key order, shortest round-trip reals, base64 bit planes.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qneat/base64.hpp"
#include "qneat/dataset.hpp"
#include "qneat/errors.hpp"
#include "qneat/evolution.hpp"
#include "qneat/mlpify.hpp"
#include "qneat/quantizer.hpp"
#include "qneat/sha256.hpp"

namespace qneat {

constexpr const char* kModelFormatVersion = "1";
constexpr const char* kModelExtension = ".qneat.json";

struct ModelMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    double nmi = 0.0;
    double weight_quant_error = 0.0;
    double activation_quant_error = 0.0;
};

struct ModelArtifact {
    DenseNetwork network;
    QuantizerPair quant;
    EvolutionConfig config;
    int generations_run = 0;
    ModelMetrics metrics;
    std::string dataset_fingerprint;
};

namespace detail {

inline nlohmann::ordered_json basis_to_json(const QuantizerBasis& b) {
    nlohmann::ordered_json j;
    j["domain"] = b.domain() == Domain::Signed ? "signed" : "unsigned";
    j["k"] = b.bits();
    j["v"] = b.basis();
    return j;
}

inline QuantizerBasis basis_from_json(const nlohmann::json& j) {
    const std::string d = j.at("domain").get<std::string>();
    if (d != "signed" && d != "unsigned")
        throw CorruptionError("unknown quantizer domain: " + d);
    auto v = j.at("v").get<std::vector<double>>();
    if (static_cast<int>(v.size()) != j.at("k").get<int>())
        throw CorruptionError("quantizer basis length does not match k");
    // Degeneracy is recoverable: an all-zero basis is the flagged zero basis.
    return QuantizerBasis(d == "signed" ? Domain::Signed : Domain::Unsigned, std::move(v));
}

inline std::string pack_bits(const std::vector<std::uint8_t>& bits) {
    std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return base64_encode(bytes);
}

inline std::vector<std::uint8_t> unpack_bits(const std::string& b64, std::size_t count) {
    const auto bytes = base64_decode(b64);
    if (bytes.size() != (count + 7) / 8)
        throw CorruptionError("bit array has wrong length");
    std::vector<std::uint8_t> bits(count, 0);
    for (std::size_t i = 0; i < count; ++i)
        bits[i] = (bytes[i / 8] >> (i % 8)) & 1u;
    return bits;
}

inline nlohmann::ordered_json config_to_json(const EvolutionConfig& c) {
    nlohmann::ordered_json j;
    j["population_size"] = c.population_size;
    j["batch_size"] = c.batch_size;
    j["initial_hidden_nodes"] = c.initial_hidden_nodes;
    j["max_generations"] = c.max_generations;
    j["sigma"] = c.sigma;
    j["quant_bits"] = c.quant_bits;
    j["quant_iters"] = c.quant_iters;
    j["mutation"] = {{"perturb_weight", c.mutation.perturb_weight},
                     {"add_connection", c.mutation.add_connection},
                     {"add_node", c.mutation.add_node},
                     {"toggle_enable", c.mutation.toggle_enable},
                     {"delete_node", c.mutation.delete_node}};
    j["crossover_prob"] = c.crossover_prob;
    j["compat"] = {{"excess", c.compat.excess},
                   {"disjoint", c.compat.disjoint},
                   {"weight", c.compat.weight}};
    j["compat_threshold"] = c.compat_threshold;
    j["species_stagnation"] = c.species_stagnation;
    j["stop_epsilon"] = c.stop_epsilon;
    j["stop_patience"] = c.stop_patience;
    j["seed"] = c.seed;
    return j;
}

inline EvolutionConfig config_from_json(const nlohmann::json& j) {
    EvolutionConfig c;
    c.population_size = j.at("population_size").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.initial_hidden_nodes = j.at("initial_hidden_nodes").get<int>();
    c.max_generations = j.at("max_generations").get<int>();
    c.sigma = j.at("sigma").get<double>();
    c.quant_bits = j.at("quant_bits").get<int>();
    c.quant_iters = j.at("quant_iters").get<int>();
    const auto& m = j.at("mutation");
    c.mutation.perturb_weight = m.at("perturb_weight").get<double>();
    c.mutation.add_connection = m.at("add_connection").get<double>();
    c.mutation.add_node = m.at("add_node").get<double>();
    c.mutation.toggle_enable = m.at("toggle_enable").get<double>();
    c.mutation.delete_node = m.at("delete_node").get<double>();
    c.crossover_prob = j.at("crossover_prob").get<double>();
    const auto& cc = j.at("compat");
    c.compat.excess = cc.at("excess").get<double>();
    c.compat.disjoint = cc.at("disjoint").get<double>();
    c.compat.weight = cc.at("weight").get<double>();
    c.compat_threshold = j.at("compat_threshold").get<double>();
    c.species_stagnation = j.at("species_stagnation").get<int>();
    c.stop_epsilon = j.at("stop_epsilon").get<double>();
    c.stop_patience = j.at("stop_patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

} // namespace detail

inline nlohmann::ordered_json model_payload_json(const ModelArtifact& artifact) {
    nlohmann::ordered_json payload;

    nlohmann::ordered_json meta;
    meta["seed"] = artifact.config.seed;
    meta["generations_run"] = artifact.generations_run;
    meta["dataset_fingerprint"] = artifact.dataset_fingerprint;
    meta["config"] = detail::config_to_json(artifact.config);
    meta["metrics"] = {{"accuracy", artifact.metrics.accuracy},
                       {"f1", artifact.metrics.f1},
                       {"nmi", artifact.metrics.nmi},
                       {"weight_quant_error", artifact.metrics.weight_quant_error},
                       {"activation_quant_error", artifact.metrics.activation_quant_error}};
    payload["metadata"] = std::move(meta);

    payload["quantizers"] = {{"weights", detail::basis_to_json(artifact.quant.weights)},
                             {"activations", detail::basis_to_json(artifact.quant.activations)}};

    nlohmann::ordered_json net;
    net["input_count"] = artifact.network.input_count;
    net["output_count"] = artifact.network.output_count;
    auto& layers = net["layers"] = nlohmann::ordered_json::array();
    for (const auto& layer : artifact.network.layer_nodes) {
        nlohmann::ordered_json jl = nlohmann::ordered_json::array();
        for (const auto& n : layer) {
            nlohmann::ordered_json jn;
            jn["id"] = n.id;
            jn["kind"] = to_string(n.kind);
            jn["activation"] = to_string(n.activation);
            jl.push_back(std::move(jn));
        }
        layers.push_back(std::move(jl));
    }
    auto& mats = net["matrices"] = nlohmann::ordered_json::array();
    for (const auto& m : artifact.network.matrices) {
        nlohmann::ordered_json jm;
        jm["rows"] = m.rows;
        jm["cols"] = m.cols;
        jm["conn"] = detail::pack_bits(m.conn);
        jm["pass"] = detail::pack_bits(m.pass);
        auto planes = nlohmann::ordered_json::array();
        for (int p = 0; p < m.codes.bits; ++p)
            planes.push_back(base64_encode(m.codes.plane_bytes(p)));
        jm["weight_planes"] = std::move(planes);
        mats.push_back(std::move(jm));
    }
    payload["network"] = std::move(net);
    return payload;
}

inline nlohmann::ordered_json model_to_json(const ModelArtifact& artifact) {
    nlohmann::ordered_json doc;
    doc["format"] = "qneat-model";
    doc["format_version"] = kModelFormatVersion;
    auto payload = model_payload_json(artifact);
    const std::string checksum = sha256_hex(payload.dump());
    doc["payload"] = std::move(payload);
    doc["checksum"] = checksum;
    return doc;
}

inline void save_model(const ModelArtifact& artifact, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << model_to_json(artifact).dump(2) << '\n';
}

// The document must be parsed as ordered_json: the checksum covers the
// payload in its on-disk key order.
inline ModelArtifact model_from_json(const nlohmann::ordered_json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "qneat-model")
            throw CorruptionError("not a qneat model file");
        if (doc.at("format_version").get<std::string>() != kModelFormatVersion)
            throw VersionError("unsupported model format version '" +
                               doc.at("format_version").get<std::string>() + "'");

        const nlohmann::ordered_json& payload = doc.at("payload");
        if (sha256_hex(payload.dump()) != doc.at("checksum").get<std::string>())
            throw CorruptionError("model checksum mismatch");

        ModelArtifact artifact{
            DenseNetwork{},
            QuantizerPair{detail::basis_from_json(payload.at("quantizers").at("weights")),
                          detail::basis_from_json(payload.at("quantizers").at("activations"))},
            detail::config_from_json(payload.at("metadata").at("config")),
            payload.at("metadata").at("generations_run").get<int>(),
            ModelMetrics{},
            payload.at("metadata").at("dataset_fingerprint").get<std::string>()};
        const auto& jm = payload.at("metadata").at("metrics");
        artifact.metrics.accuracy = jm.at("accuracy").get<double>();
        artifact.metrics.f1 = jm.at("f1").get<double>();
        artifact.metrics.nmi = jm.at("nmi").get<double>();
        artifact.metrics.weight_quant_error = jm.at("weight_quant_error").get<double>();
        artifact.metrics.activation_quant_error = jm.at("activation_quant_error").get<double>();

        const auto& net = payload.at("network");
        artifact.network.input_count = net.at("input_count").get<int>();
        artifact.network.output_count = net.at("output_count").get<int>();
        for (const auto& jl : net.at("layers")) {
            std::vector<DenseNodeInfo> layer;
            for (const auto& jn : jl) {
                DenseNodeInfo n;
                n.id = jn.at("id").get<int>();
                n.kind = node_kind_from_string(jn.at("kind").get<std::string>());
                n.activation = activation_from_string(jn.at("activation").get<std::string>());
                layer.push_back(n);
            }
            artifact.network.layer_nodes.push_back(std::move(layer));
        }
        for (const auto& jmat : net.at("matrices")) {
            DenseLayerMatrix m;
            m.rows = jmat.at("rows").get<int>();
            m.cols = jmat.at("cols").get<int>();
            const std::size_t entries = static_cast<std::size_t>(m.rows) * m.cols;
            m.conn = detail::unpack_bits(jmat.at("conn").get<std::string>(), entries);
            m.pass = detail::unpack_bits(jmat.at("pass").get<std::string>(), entries);
            const auto& planes = jmat.at("weight_planes");
            m.codes = PackedCodes(entries, static_cast<int>(planes.size()));
            for (std::size_t p = 0; p < planes.size(); ++p) {
                const auto bytes = base64_decode(planes[p].get<std::string>());
                m.codes.load_plane_bytes(static_cast<int>(p), bytes);
            }
            artifact.network.matrices.push_back(std::move(m));
        }
        return artifact;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(std::string("malformed model document: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw CorruptionError(std::string("malformed model document: ") + e.what());
    }
}

inline ModelArtifact load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    nlohmann::ordered_json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(path.string() + ": not valid JSON: " + e.what());
    }
    return model_from_json(doc);
}

struct PredictResult {
    double score = 0.0;
    int label = 0;
};

inline PredictResult predict(const ModelArtifact& artifact, std::span<const double> features) {
    if (static_cast<int>(features.size()) != artifact.network.input_count)
        throw SchemaMismatch("model expects " + std::to_string(artifact.network.input_count) +
                             " features, got " + std::to_string(features.size()));
    const auto out = dense_evaluate(artifact.network, artifact.quant, features);
    PredictResult r;
    r.score = out.at(0);
    r.label = r.score > 0.5 ? 1 : 0;
    return r;
}

struct ResourceEstimate {
    long param_count = 0;       // present, non-pass-through weights
    long param_bits = 0;        // param_count * k
    long mult_adds = 0;         // multiply-accumulates per inference
    long activation_count = 0;  // sigmoid applications per inference
};

// Coarse arithmetic cost of one inference. Pass-through wires are plain
// copies: they carry no parameter and no multiply. This deliberately counts
// operations, not hardware resources.
inline ResourceEstimate resource_estimate(const ModelArtifact& artifact) {
    ResourceEstimate est;
    for (const auto& m : artifact.network.matrices) {
        for (std::size_t e = 0; e < m.conn.size(); ++e) {
            if (!m.conn[e] || m.pass[e]) continue;
            ++est.param_count;
            ++est.mult_adds;
        }
    }
    est.param_bits = est.param_count * artifact.quant.weights.bits();
    for (std::size_t l = 1; l < artifact.network.layer_nodes.size(); ++l)
        for (const auto& n : artifact.network.layer_nodes[l])
            if (n.kind == NodeKind::Hidden || n.kind == NodeKind::Output)
                ++est.activation_count;
    return est;
}

} // namespace qneat
