#pragma once

// Turns an irregular evolved genome into a strictly layered network by
// inserting identity pass-through (dummy) nodes on every connection that
// spans more than one layer, then exports dense per-layer matrices. The
// rewrite preserves input-output behavior exactly: the carried value rides
// unit-weight wires that are exempt from quantization, and the final hop of
// each chain keeps the original weight and innovation id.

#include <algorithm>
#include <map>
#include <span>
#include <vector>

#include "qneat/errors.hpp"
#include "qneat/genome.hpp"
#include "qneat/math.hpp"
#include "qneat/quantizer.hpp"

namespace qneat {

// Longest enabled path from any source node; outputs are pulled up to the
// top layer so they always sit last.
inline std::map<int, int> assign_layers(const Genome& genome) {
    const std::vector<int> order = topological_order(genome);
    std::map<int, int> layer;
    for (int id : order) layer[id] = 0;
    std::map<int, std::vector<std::pair<int, int>>> in_edges;  // to -> (from)
    for (const auto& c : genome.connections)
        if (c.enabled) in_edges[c.to].push_back({c.from, c.to});
    for (int id : order) {
        int depth = 0;
        for (const auto& [from, to] : in_edges[id])
            depth = std::max(depth, layer[from] + 1);
        layer[id] = depth;
    }
    int top = genome.output_count > 0 ? 1 : 0;
    for (const auto& [id, l] : layer) top = std::max(top, l);
    for (const auto& n : genome.nodes)
        if (n.kind == NodeKind::Output) layer[n.id] = top;
    return layer;
}

struct LayeredGenome {
    Genome genome;
    std::map<int, int> layer_of;
    int layer_count = 0;
    int dummy_count = 0;
};

inline LayeredGenome insert_dummy_nodes(const Genome& genome) {
    std::map<int, int> layer = assign_layers(genome);

    LayeredGenome out;
    out.genome = genome;
    int next_id = genome.max_node_id() + 1;
    int next_innovation = genome.max_innovation() + 1;

    const std::size_t original_count = out.genome.connections.size();
    for (std::size_t ci = 0; ci < original_count; ++ci) {
        const ConnectionGene gene = out.genome.connections[ci];  // copy: we append below
        if (!gene.enabled) continue;
        const int span = layer[gene.to] - layer[gene.from];
        if (span <= 1) continue;
        int prev = gene.from;
        for (int step = 1; step < span; ++step) {
            const int node_id = next_id++;
            out.genome.nodes.push_back({node_id, NodeKind::Dummy, Activation::Identity});
            out.genome.connections.push_back(
                {next_innovation++, prev, node_id, 1.0, true});
            layer[node_id] = layer[gene.from] + step;
            prev = node_id;
            ++out.dummy_count;
        }
        // The original gene becomes the last hop; it keeps its weight and
        // innovation id.
        out.genome.connections[ci].from = prev;
    }

    out.layer_of = std::move(layer);
    int top = 0;
    for (const auto& [id, l] : out.layer_of) top = std::max(top, l);
    out.layer_count = top + 1;
    return out;
}

struct DenseNodeInfo {
    int id = 0;
    NodeKind kind = NodeKind::Hidden;
    Activation activation = Activation::Sigmoid;
};

// One adjacent-layer weight matrix in row-major order: rows index the lower
// layer's nodes, columns the upper layer's. `conn` marks where a connection
// exists, `pass` the dummy pass-through wires carried at full precision 1.0;
// every other present entry is a quantized weight code.
struct DenseLayerMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> conn;
    std::vector<std::uint8_t> pass;
    PackedCodes codes;
};

struct DenseNetwork {
    int input_count = 0;
    int output_count = 0;
    std::vector<std::vector<DenseNodeInfo>> layer_nodes;
    std::vector<DenseLayerMatrix> matrices;
};

inline DenseNetwork to_dense(const LayeredGenome& layered, const QuantizerPair& quant) {
    const Genome& g = layered.genome;
    DenseNetwork net;
    net.input_count = g.input_count;
    net.output_count = g.output_count;
    net.layer_nodes.resize(static_cast<std::size_t>(layered.layer_count));

    for (const auto& n : g.nodes)
        net.layer_nodes[static_cast<std::size_t>(layered.layer_of.at(n.id))].push_back(
            {n.id, n.kind, n.activation});
    for (auto& nodes : net.layer_nodes)
        std::sort(nodes.begin(), nodes.end(), [](const DenseNodeInfo& a, const DenseNodeInfo& b) {
            const int ra = detail::kind_rank(a.kind), rb = detail::kind_rank(b.kind);
            if (ra != rb) return ra < rb;
            return a.id < b.id;
        });

    std::map<int, std::pair<int, int>> position;  // node -> (layer, index)
    for (std::size_t l = 0; l < net.layer_nodes.size(); ++l)
        for (std::size_t i = 0; i < net.layer_nodes[l].size(); ++i)
            position[net.layer_nodes[l][i].id] = {static_cast<int>(l), static_cast<int>(i)};

    const bool quantize_weights = !quant.weights.is_degenerate();
    net.matrices.resize(layered.layer_count > 0
                            ? static_cast<std::size_t>(layered.layer_count - 1)
                            : 0);
    for (std::size_t l = 0; l < net.matrices.size(); ++l) {
        auto& m = net.matrices[l];
        m.rows = static_cast<int>(net.layer_nodes[l].size());
        m.cols = static_cast<int>(net.layer_nodes[l + 1].size());
        const std::size_t entries = static_cast<std::size_t>(m.rows) * m.cols;
        m.conn.assign(entries, 0);
        m.pass.assign(entries, 0);
        m.codes = PackedCodes(entries, quant.weights.bits());
    }

    for (const auto& c : g.connections) {
        if (!c.enabled) continue;
        const auto [lf, rf] = position.at(c.from);
        const auto [lt, rt] = position.at(c.to);
        if (lt != lf + 1)
            throw DimensionError("layered genome has a non-adjacent connection");
        auto& m = net.matrices[static_cast<std::size_t>(lf)];
        const std::size_t e = static_cast<std::size_t>(rf) * m.cols + rt;
        m.conn[e] = 1;
        const NodeGene* to = g.find_node(c.to);
        if (to->kind == NodeKind::Dummy) {
            m.pass[e] = 1;
        } else if (quantize_weights) {
            m.codes.set(e, quant.weights.encode(c.weight));
        }
        // With a degenerate weight basis every weight is exactly 0 and the
        // all-zero code already decodes to it.
    }
    return net;
}

// Mask-aware forward pass over the dense form. Uses the same exact
// accumulation as the sparse evaluator, so for any input the dense result is
// bit-identical to evaluating the layered genome directly.
inline std::vector<double> dense_evaluate(const DenseNetwork& net, const QuantizerPair& quant,
                                          std::span<const double> input) {
    if (static_cast<int>(input.size()) != net.input_count)
        throw DimensionError("dense_evaluate: expected " + std::to_string(net.input_count) +
                             " inputs, got " + std::to_string(input.size()));
    const bool quantize_weights = !quant.weights.is_degenerate();
    const bool quantize_acts = !quant.activations.is_degenerate();

    auto node_value = [&](const DenseNodeInfo& n, double raw) {
        double v = raw;
        if (n.activation == Activation::Sigmoid) v = sigmoid(v);
        if (quantize_acts && n.kind == NodeKind::Hidden && n.activation == Activation::Sigmoid)
            v = quant.activations.quantize(v);
        return v;
    };

    if (net.layer_nodes.empty()) return {};
    std::vector<double> current;
    std::size_t input_seen = 0;
    for (const auto& n : net.layer_nodes[0]) {
        if (n.kind == NodeKind::Input)
            current.push_back(input[input_seen++]);
        else if (n.kind == NodeKind::Bias)
            current.push_back(1.0);
        else
            current.push_back(node_value(n, 0.0));  // source node with no in-edges
    }

    for (std::size_t l = 0; l < net.matrices.size(); ++l) {
        const auto& m = net.matrices[l];
        const auto& targets = net.layer_nodes[l + 1];
        std::vector<double> next(targets.size(), 0.0);
        ExactSum acc;
        for (int c = 0; c < m.cols; ++c) {
            acc.reset();
            for (int r = 0; r < m.rows; ++r) {
                const std::size_t e = static_cast<std::size_t>(r) * m.cols + c;
                if (!m.conn[e]) continue;
                double w;
                if (m.pass[e])
                    w = 1.0;
                else if (quantize_weights)
                    w = quant.weights.code_value(m.codes.get(e));
                else
                    w = 0.0;  // degenerate basis: every real weight was 0
                acc.add(w * current[static_cast<std::size_t>(r)]);
            }
            next[static_cast<std::size_t>(c)] = node_value(targets[static_cast<std::size_t>(c)], acc.value());
        }
        current = std::move(next);
    }

    std::vector<double> out;
    const auto& last = net.layer_nodes.back();
    for (std::size_t i = 0; i < last.size(); ++i)
        if (last[i].kind == NodeKind::Output) out.push_back(current[i]);
    return out;
}

} // namespace qneat
