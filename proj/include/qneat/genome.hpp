#pragma once

// Genotype of an irregular feed-forward network: node genes plus connection
// genes carrying innovation ids. The enabled-connection digraph must stay
// acyclic. Evaluation runs in topological order; when a quantizer pair is
// supplied, connection weights pass through the signed basis and hidden
// sigmoid activations through the unsigned basis (outputs are never
// activation-quantized, and edges feeding dummy pass-through nodes keep
// their exact unit weight).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qneat/errors.hpp"
#include "qneat/math.hpp"
#include "qneat/quantizer.hpp"

namespace qneat {

enum class NodeKind { Input, Bias, Hidden, Output, Dummy };
enum class Activation { Sigmoid, Identity };

struct NodeGene {
    int id = 0;
    NodeKind kind = NodeKind::Hidden;
    Activation activation = Activation::Sigmoid;

    bool operator==(const NodeGene&) const = default;
};

struct ConnectionGene {
    int innovation = 0;
    int from = 0;
    int to = 0;
    double weight = 0.0;
    bool enabled = true;

    bool operator==(const ConnectionGene&) const = default;
};

struct Genome {
    std::vector<NodeGene> nodes;
    std::vector<ConnectionGene> connections;
    int input_count = 0;
    int output_count = 0;

    bool operator==(const Genome&) const = default;

    const NodeGene* find_node(int id) const {
        for (const auto& n : nodes)
            if (n.id == id) return &n;
        return nullptr;
    }

    bool has_connection(int from, int to) const {
        for (const auto& c : connections)
            if (c.from == from && c.to == to) return true;
        return false;
    }

    int max_node_id() const {
        int mx = -1;
        for (const auto& n : nodes) mx = std::max(mx, n.id);
        return mx;
    }

    int max_innovation() const {
        int mx = -1;
        for (const auto& c : connections) mx = std::max(mx, c.innovation);
        return mx;
    }
};

namespace detail {

inline int kind_rank(NodeKind k) {
    switch (k) {
        case NodeKind::Input: return 0;
        case NodeKind::Bias: return 1;
        case NodeKind::Output: return 3;
        default: return 2;  // hidden, dummy
    }
}

} // namespace detail

// Kahn's algorithm over enabled connections, breaking ties so inputs come
// first and outputs last among simultaneously-ready nodes.
inline std::vector<int> topological_order(const Genome& genome) {
    std::map<int, int> in_degree;
    std::map<int, std::vector<int>> out_edges;
    std::map<int, const NodeGene*> node_of;
    for (const auto& n : genome.nodes) {
        in_degree[n.id] = 0;
        node_of[n.id] = &n;
    }
    for (const auto& c : genome.connections) {
        if (!c.enabled) continue;
        if (!node_of.count(c.from) || !node_of.count(c.to))
            throw Error("connection " + std::to_string(c.innovation) +
                        " references a node that does not exist");
        out_edges[c.from].push_back(c.to);
        ++in_degree[c.to];
    }

    using Key = std::pair<int, int>;  // (kind rank, id)
    auto key_of = [&](int id) { return Key{detail::kind_rank(node_of[id]->kind), id}; };
    std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
    for (const auto& [id, deg] : in_degree)
        if (deg == 0) ready.push(key_of(id));

    std::vector<int> order;
    order.reserve(genome.nodes.size());
    while (!ready.empty()) {
        const int id = ready.top().second;
        ready.pop();
        order.push_back(id);
        for (int to : out_edges[id])
            if (--in_degree[to] == 0) ready.push(key_of(to));
    }
    if (order.size() != genome.nodes.size())
        throw CycleError("enabled connections form a cycle");
    return order;
}

// Compiled evaluation plan for one (genome, quantizer) combination.
// Building it once and reusing it across many input rows avoids re-running
// topological sort and weight quantization per row. Node sums use exact
// accumulation so the result does not depend on edge ordering.
class EvalPlan {
public:
    EvalPlan(const Genome& genome, const QuantizerPair* quant)
        : input_count_(genome.input_count) {
        const std::vector<int> order = topological_order(genome);
        std::map<int, int> slot_of;
        nodes_.reserve(order.size());
        for (int id : order) {
            slot_of[id] = static_cast<int>(nodes_.size());
            const NodeGene* n = genome.find_node(id);
            NodeSlot slot;
            slot.kind = n->kind;
            slot.activation = n->activation;
            nodes_.push_back(slot);
        }

        const bool quantize_weights =
            quant != nullptr && !quant->weights.is_degenerate();
        quantize_activations_ =
            quant != nullptr && !quant->activations.is_degenerate();
        if (quantize_activations_) activation_basis_ = &quant->activations;

        for (const auto& c : genome.connections) {
            if (!c.enabled) continue;
            const NodeGene* to = genome.find_node(c.to);
            double w = c.weight;
            if (quantize_weights && to->kind != NodeKind::Dummy)
                w = quant->weights.quantize(w);
            nodes_[static_cast<std::size_t>(slot_of[c.to])].inputs.push_back(
                {c.innovation, slot_of[c.from], w});
        }
        for (auto& slot : nodes_)
            std::sort(slot.inputs.begin(), slot.inputs.end(),
                      [](const Edge& a, const Edge& b) { return a.innovation < b.innovation; });

        // Input vector positions and output ordering follow ascending node
        // id, matching the dense layered form.
        std::vector<int> input_ids, output_ids;
        for (const auto& n : genome.nodes) {
            if (n.kind == NodeKind::Input) input_ids.push_back(n.id);
            if (n.kind == NodeKind::Output) output_ids.push_back(n.id);
        }
        std::sort(input_ids.begin(), input_ids.end());
        std::sort(output_ids.begin(), output_ids.end());
        for (std::size_t i = 0; i < input_ids.size(); ++i)
            input_index_[slot_of[input_ids[i]]] = static_cast<int>(i);
        for (int id : output_ids) output_slots_.push_back(slot_of[id]);
    }

    std::vector<double> run(std::span<const double> input) const {
        if (static_cast<int>(input.size()) != input_count_)
            throw DimensionError("evaluate: expected " + std::to_string(input_count_) +
                                 " inputs, got " + std::to_string(input.size()));
        std::vector<double> values(nodes_.size(), 0.0);
        run_into(input, values);
        std::vector<double> out;
        out.reserve(output_slots_.size());
        for (int s : output_slots_) out.push_back(values[static_cast<std::size_t>(s)]);
        return out;
    }

    // Values of every node, keyed by evaluation slot; used to pool hidden
    // activations when fitting the activation basis.
    void run_into(std::span<const double> input, std::vector<double>& values) const {
        ExactSum acc;
        for (std::size_t s = 0; s < nodes_.size(); ++s) {
            const NodeSlot& node = nodes_[s];
            if (node.kind == NodeKind::Input) {
                values[s] = input[static_cast<std::size_t>(input_index_.at(static_cast<int>(s)))];
                continue;
            }
            if (node.kind == NodeKind::Bias) {
                values[s] = 1.0;
                continue;
            }
            acc.reset();
            for (const Edge& e : node.inputs)
                acc.add(e.weight * values[static_cast<std::size_t>(e.source_slot)]);
            double v = acc.value();
            if (node.activation == Activation::Sigmoid) v = sigmoid(v);
            if (quantize_activations_ && node.kind == NodeKind::Hidden &&
                node.activation == Activation::Sigmoid)
                v = activation_basis_->quantize(v);
            values[s] = v;
        }
    }

    std::size_t node_count() const { return nodes_.size(); }
    NodeKind kind_of_slot(std::size_t s) const { return nodes_[s].kind; }
    Activation activation_of_slot(std::size_t s) const { return nodes_[s].activation; }

private:
    struct Edge {
        int innovation;
        int source_slot;
        double weight;
    };
    struct NodeSlot {
        NodeKind kind;
        Activation activation;
        std::vector<Edge> inputs;
    };

    int input_count_;
    std::vector<NodeSlot> nodes_;
    std::map<int, int> input_index_;
    std::vector<int> output_slots_;
    bool quantize_activations_ = false;
    const QuantizerBasis* activation_basis_ = nullptr;
};

inline std::vector<double> evaluate(const Genome& genome, std::span<const double> input,
                                    const QuantizerPair* quant = nullptr) {
    return EvalPlan(genome, quant).run(input);
}

// Threshold the single output at 0.5; a score of exactly 0.5 maps to 0.
inline int predict_label(const Genome& genome, std::span<const double> input,
                         const QuantizerPair* quant = nullptr) {
    if (genome.output_count != 1)
        throw DimensionError("predict_label requires a single-output genome");
    return evaluate(genome, input, quant)[0] > 0.5 ? 1 : 0;
}

struct CompatCoeffs {
    double excess = 1.0;    // c1
    double disjoint = 1.0;  // c2
    double weight = 0.4;    // c3
};

// Classic NEAT distance: c1*E/N + c2*D/N + c3*mean|dw| over matching genes.
// N is the larger connection-gene count, taken as 1 when both genomes are
// small (< 20 genes).
inline double compatibility_distance(const Genome& a, const Genome& b,
                                     const CompatCoeffs& coeffs = {}) {
    std::map<int, double> wa, wb;
    for (const auto& c : a.connections) wa[c.innovation] = c.weight;
    for (const auto& c : b.connections) wb[c.innovation] = c.weight;
    if (wa.empty() && wb.empty()) return 0.0;

    const int max_a = wa.empty() ? -1 : wa.rbegin()->first;
    const int max_b = wb.empty() ? -1 : wb.rbegin()->first;

    int excess = 0, disjoint = 0, matching = 0;
    double weight_diff = 0.0;
    for (const auto& [innov, w] : wa) {
        auto it = wb.find(innov);
        if (it != wb.end()) {
            ++matching;
            weight_diff += std::fabs(w - it->second);
        } else {
            (innov > max_b ? excess : disjoint)++;
        }
    }
    for (const auto& [innov, w] : wb) {
        if (wa.count(innov)) continue;
        (innov > max_a ? excess : disjoint)++;
    }

    double n = static_cast<double>(std::max(wa.size(), wb.size()));
    if (wa.size() < 20 && wb.size() < 20) n = 1.0;
    const double mean_wd = matching > 0 ? weight_diff / matching : 0.0;
    return coeffs.excess * excess / n + coeffs.disjoint * disjoint / n +
           coeffs.weight * mean_wd;
}

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;  // e.g. dangling hidden nodes
    bool ok() const { return errors.empty(); }
};

inline ValidationReport validate_genome(const Genome& g) {
    ValidationReport report;
    std::set<int> ids;
    for (const auto& n : g.nodes)
        if (!ids.insert(n.id).second)
            report.errors.push_back("duplicate node id " + std::to_string(n.id));

    bool refs_ok = true;
    std::set<std::pair<int, int>> pairs;
    for (const auto& c : g.connections) {
        if (!ids.count(c.from) || !ids.count(c.to)) {
            report.errors.push_back("connection " + std::to_string(c.innovation) +
                                    " references a missing node");
            refs_ok = false;
        }
        if (!pairs.insert({c.from, c.to}).second)
            report.errors.push_back("duplicate connection (" + std::to_string(c.from) +
                                    "," + std::to_string(c.to) + ")");
        const NodeGene* from = g.find_node(c.from);
        const NodeGene* to = g.find_node(c.to);
        if (to && (to->kind == NodeKind::Input || to->kind == NodeKind::Bias))
            report.errors.push_back("connection into input/bias node " + std::to_string(c.to));
        if (from && from->kind == NodeKind::Output)
            report.errors.push_back("connection out of output node " + std::to_string(c.from));
    }

    if (refs_ok) {
        try {
            topological_order(g);
        } catch (const CycleError&) {
            report.errors.push_back("enabled connections form a cycle");
        }
    }

    // Dangling hidden nodes are legal but worth surfacing.
    std::set<int> has_in, has_out;
    for (const auto& c : g.connections) {
        if (!c.enabled) continue;
        has_out.insert(c.from);
        has_in.insert(c.to);
    }
    for (const auto& n : g.nodes) {
        if (n.kind != NodeKind::Hidden && n.kind != NodeKind::Dummy) continue;
        if (!has_in.count(n.id) && !has_out.count(n.id))
            report.warnings.push_back("dangling node " + std::to_string(n.id));
    }
    return report;
}

// ---- JSON serialization (versioned, fixed field order) ----

inline std::string to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Input: return "input";
        case NodeKind::Bias: return "bias";
        case NodeKind::Hidden: return "hidden";
        case NodeKind::Output: return "output";
        case NodeKind::Dummy: return "dummy";
    }
    return "hidden";
}

inline std::string to_string(Activation a) {
    return a == Activation::Sigmoid ? "sigmoid" : "identity";
}

inline NodeKind node_kind_from_string(const std::string& s) {
    if (s == "input") return NodeKind::Input;
    if (s == "bias") return NodeKind::Bias;
    if (s == "hidden") return NodeKind::Hidden;
    if (s == "output") return NodeKind::Output;
    if (s == "dummy") return NodeKind::Dummy;
    throw ParseError("unknown node kind: " + s);
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "identity") return Activation::Identity;
    throw ParseError("unknown activation: " + s);
}

inline nlohmann::ordered_json genome_to_json(const Genome& g) {
    nlohmann::ordered_json j;
    j["version"] = "1";
    auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes) {
        nlohmann::ordered_json jn;
        jn["id"] = n.id;
        jn["kind"] = to_string(n.kind);
        jn["activation"] = to_string(n.activation);
        nodes.push_back(std::move(jn));
    }
    auto& conns = j["connections"] = nlohmann::ordered_json::array();
    for (const auto& c : g.connections) {
        nlohmann::ordered_json jc;
        jc["innovation"] = c.innovation;
        jc["from"] = c.from;
        jc["to"] = c.to;
        jc["weight"] = c.weight;
        jc["enabled"] = c.enabled;
        conns.push_back(std::move(jc));
    }
    j["input_count"] = g.input_count;
    j["output_count"] = g.output_count;
    return j;
}

inline Genome genome_from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<std::string>() != "1")
            throw VersionError("unsupported genome version");
        Genome g;
        for (const auto& jn : j.at("nodes")) {
            NodeGene n;
            n.id = jn.at("id").get<int>();
            n.kind = node_kind_from_string(jn.at("kind").get<std::string>());
            n.activation = activation_from_string(jn.at("activation").get<std::string>());
            g.nodes.push_back(n);
        }
        for (const auto& jc : j.at("connections")) {
            ConnectionGene c;
            c.innovation = jc.at("innovation").get<int>();
            c.from = jc.at("from").get<int>();
            c.to = jc.at("to").get<int>();
            c.weight = jc.at("weight").get<double>();
            c.enabled = jc.at("enabled").get<bool>();
            g.connections.push_back(c);
        }
        g.input_count = j.at("input_count").get<int>();
        g.output_count = j.at("output_count").get<int>();
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("genome json: ") + e.what());
    }
}

} // namespace qneat
