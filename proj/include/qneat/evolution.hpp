#pragma once

// The quantization-aware neuroevolution loop: a speciated population of
// minimal genomes grows structure and weights generation by generation.
// Every generation refits each genome's learned quantizers (warm-started
// from its parent), scores fitness through the quantized forward pass on a
// balanced batch, and tracks a normalized-mutual-information score on the
// validation set for stopping and model selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "qneat/dataset.hpp"
#include "qneat/errors.hpp"
#include "qneat/genome.hpp"
#include "qneat/metrics.hpp"
#include "qneat/quantizer.hpp"

namespace qneat {

struct MutationRates {
    double perturb_weight = 0.8;  // per connection
    double add_connection = 0.3;
    double add_node = 0.1;
    double toggle_enable = 0.05;
    double delete_node = 0.05;
};

struct EvolutionConfig {
    int population_size = 16;
    int batch_size = 500;
    int initial_hidden_nodes = 1;
    int max_generations = 30;
    double sigma = 0.155;             // weight init/perturbation scale
    int quant_bits = 2;
    int quant_iters = 10;
    MutationRates mutation;
    double crossover_prob = 0.75;
    CompatCoeffs compat;
    double compat_threshold = 3.0;
    int species_stagnation = 15;
    double stop_epsilon = 1e-3;
    int stop_patience = 5;
    std::uint64_t seed = 0;

    double weight_bound() const { return 3.0 * sigma; }

    void validate() const {
        if (population_size < 2)
            throw std::invalid_argument("population_size must be >= 2");
        if (batch_size < 2 || batch_size % 2 != 0)
            throw std::invalid_argument("batch_size must be even and >= 2");
        if (max_generations < 1)
            throw std::invalid_argument("max_generations must be >= 1");
        if (sigma <= 0) throw std::invalid_argument("sigma must be positive");
        if (quant_bits < 1) throw std::invalid_argument("quant_bits must be >= 1");
        if (quant_iters < 1) throw std::invalid_argument("quant_iters must be >= 1");
        for (double p : {mutation.perturb_weight, mutation.add_connection,
                         mutation.add_node, mutation.toggle_enable,
                         mutation.delete_node, crossover_prob})
            if (p < 0.0 || p > 1.0)
                throw std::invalid_argument("probabilities must lie in [0,1]");
        if (initial_hidden_nodes < 0)
            throw std::invalid_argument("initial_hidden_nodes must be >= 0");
    }
};

// Global registry of structural events. The same (from,to) pair always maps
// to the same innovation id so crossover can align genes; node ids created by
// connection splits are tracked per split so independent genomes splitting
// the same connection produce alignable structure. Assignment is serialized:
// this is the only shared mutable state in the loop.
class InnovationRegistry {
public:
    InnovationRegistry(int next_innovation, int next_node_id)
        : next_innovation_(next_innovation), next_node_id_(next_node_id) {}

    int connection_id(int from, int to) {
        std::lock_guard<std::mutex> lock(mu_);
        const auto [it, inserted] = conn_ids_.try_emplace({from, to}, next_innovation_);
        if (inserted) ++next_innovation_;
        return it->second;
    }

    // First split-node id for this innovation not already present in the
    // genome; a fresh id is minted when all previous ones are taken.
    int node_for_split(int innovation, const Genome& g) {
        std::lock_guard<std::mutex> lock(mu_);
        auto& candidates = split_nodes_[innovation];
        for (int id : candidates)
            if (g.find_node(id) == nullptr) return id;
        candidates.push_back(next_node_id_);
        return next_node_id_++;
    }

private:
    std::mutex mu_;
    std::map<std::pair<int, int>, int> conn_ids_;
    std::map<int, std::vector<int>> split_nodes_;
    int next_innovation_;
    int next_node_id_;
};

struct Species {
    int id = 0;
    Genome representative;
    std::vector<int> members;  // population indices
    double best_fitness = -std::numeric_limits<double>::infinity();
    int stagnation = 0;
};

struct GenerationRecord {
    int generation = 0;
    double best_accuracy = 0.0;   // best-so-far model, frozen validation set
    double mean_accuracy = 0.0;   // population mean on the training batch
    double best_info = 0.0;       // best-so-far validation NMI
    int species_count = 0;
    double quantizer_error = 0.0; // best model's recorded fit error
};

struct Population {
    std::vector<Genome> genomes;
    std::vector<std::optional<QuantizerPair>> warm_starts;
    std::vector<Species> species;
    std::shared_ptr<InnovationRegistry> registry;
    int next_species_id = 0;

    std::size_t size() const { return genomes.size(); }
};

namespace detail {

inline double clip(double x, double bound) {
    return std::clamp(x, -bound, bound);
}

inline double clipped_normal(Rng& rng, double sigma, double bound) {
    std::normal_distribution<double> d(0.0, sigma);
    return clip(d(rng), bound);
}

inline bool coin(Rng& rng, double p) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(rng) < p;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng)];
}

// Would adding from->to close a cycle? True iff `to` already reaches `from`
// through enabled connections.
inline bool creates_cycle(const Genome& g, int from, int to) {
    if (from == to) return true;
    std::map<int, std::vector<int>> adj;
    for (const auto& c : g.connections)
        if (c.enabled) adj[c.from].push_back(c.to);
    std::vector<int> stack{to};
    std::set<int> seen{to};
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        if (cur == from) return true;
        for (int nxt : adj[cur])
            if (seen.insert(nxt).second) stack.push_back(nxt);
    }
    return false;
}

} // namespace detail

// Minimal starting topology: all inputs and the bias feed every initial
// hidden node, hidden nodes feed every output; with no hidden nodes the
// sources connect straight to the outputs. Weights are N(0, sigma) clipped
// to the configured bound.
inline Population initialize_population(const EvolutionConfig& config, int input_count,
                                        int output_count, Rng& rng) {
    config.validate();
    if (input_count < 1 || output_count < 1)
        throw std::invalid_argument("need at least one input and one output");

    const int bias_id = input_count;
    const int hidden_base = input_count + 1;
    const int output_base = hidden_base + config.initial_hidden_nodes;
    const int node_total = output_base + output_count;

    Population pop;
    pop.registry = std::make_shared<InnovationRegistry>(0, node_total);

    Genome proto;
    proto.input_count = input_count;
    proto.output_count = output_count;
    for (int i = 0; i < input_count; ++i)
        proto.nodes.push_back({i, NodeKind::Input, Activation::Identity});
    proto.nodes.push_back({bias_id, NodeKind::Bias, Activation::Identity});
    for (int h = 0; h < config.initial_hidden_nodes; ++h)
        proto.nodes.push_back({hidden_base + h, NodeKind::Hidden, Activation::Sigmoid});
    for (int o = 0; o < output_count; ++o)
        proto.nodes.push_back({output_base + o, NodeKind::Output, Activation::Sigmoid});

    std::vector<std::pair<int, int>> wiring;
    if (config.initial_hidden_nodes > 0) {
        for (int h = 0; h < config.initial_hidden_nodes; ++h)
            for (int s = 0; s <= input_count; ++s)  // inputs plus bias
                wiring.emplace_back(s, hidden_base + h);
        for (int o = 0; o < output_count; ++o)
            for (int h = 0; h < config.initial_hidden_nodes; ++h)
                wiring.emplace_back(hidden_base + h, output_base + o);
    } else {
        for (int o = 0; o < output_count; ++o)
            for (int s = 0; s <= input_count; ++s)
                wiring.emplace_back(s, output_base + o);
    }
    for (const auto& [from, to] : wiring)
        proto.connections.push_back(
            {pop.registry->connection_id(from, to), from, to, 0.0, true});

    const double bound = config.weight_bound();
    for (int i = 0; i < config.population_size; ++i) {
        Genome g = proto;
        for (auto& c : g.connections)
            c.weight = detail::clipped_normal(rng, config.sigma, bound);
        pop.genomes.push_back(std::move(g));
        pop.warm_starts.emplace_back();
    }
    return pop;
}

// Fraction of the batch classified correctly through the quantized network.
inline double fitness(const Genome& genome, const std::vector<FlowRecord>& batch,
                      const QuantizerPair& quant) {
    if (batch.empty()) return 0.0;
    const EvalPlan plan(genome, &quant);
    long correct = 0;
    for (const auto& rec : batch) {
        const double out = plan.run(rec.features)[0];
        const int label = out > 0.5 ? 1 : 0;
        if (label == rec.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(batch.size());
}

// Weight basis over the enabled connection weights (signed); activation
// basis over hidden sigmoid outputs pooled from a floating-point pass over
// the batch (unsigned). Degenerate cases (no connections, no hidden nodes)
// come back flagged instead of failing: inference then skips that quantizer.
inline QuantizerPair refit_quantizers(const Genome& genome,
                                      const std::vector<FlowRecord>& batch, int bits,
                                      int iterations,
                                      const std::optional<QuantizerPair>& previous) {
    std::vector<double> weights;
    for (const auto& c : genome.connections) {
        if (!c.enabled) continue;
        const NodeGene* to = genome.find_node(c.to);
        if (to && to->kind == NodeKind::Dummy) continue;  // pass-through wires
        weights.push_back(c.weight);
    }

    std::optional<QuantizerBasis> weight_init, act_init;
    if (previous) {
        weight_init = previous->weights;
        act_init = previous->activations;
    }

    QuantizerBasis wbasis = weights.empty()
        ? QuantizerBasis::zero(Domain::Signed, bits)
        : fit_basis(weights, bits, iterations, weight_init, Domain::Signed);

    const EvalPlan plan(genome, nullptr);
    std::vector<double> activations;
    std::vector<double> values(plan.node_count());
    for (const auto& rec : batch) {
        plan.run_into(rec.features, values);
        for (std::size_t s = 0; s < plan.node_count(); ++s)
            if (plan.kind_of_slot(s) == NodeKind::Hidden &&
                plan.activation_of_slot(s) == Activation::Sigmoid)
                activations.push_back(values[s]);
    }
    QuantizerBasis abasis = activations.empty()
        ? QuantizerBasis::zero(Domain::Unsigned, bits)
        : fit_basis(activations, bits, iterations, act_init, Domain::Unsigned);

    return QuantizerPair{std::move(wbasis), std::move(abasis)};
}

// Greedy assignment against the previous generation's representatives; a
// genome that fits no existing species founds a new one.
inline std::vector<Species>& speciate(Population& pop, const EvolutionConfig& config) {
    for (auto& s : pop.species) s.members.clear();
    for (int i = 0; i < static_cast<int>(pop.genomes.size()); ++i) {
        bool placed = false;
        for (auto& s : pop.species) {
            if (compatibility_distance(pop.genomes[static_cast<std::size_t>(i)],
                                       s.representative,
                                       config.compat) < config.compat_threshold) {
                s.members.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) {
            Species s;
            s.id = pop.next_species_id++;
            s.representative = pop.genomes[static_cast<std::size_t>(i)];
            s.members.push_back(i);
            pop.species.push_back(std::move(s));
        }
    }
    std::erase_if(pop.species, [](const Species& s) { return s.members.empty(); });
    for (auto& s : pop.species)
        s.representative = pop.genomes[static_cast<std::size_t>(s.members.front())];
    return pop.species;
}

// Matching genes take their weight from either parent at random; disjoint
// and excess genes come from the fitter parent (ties favor parent a). A gene
// disabled in either parent stays disabled in the child with probability
// 0.75.
inline Genome crossover(const Genome& parent_a, const Genome& parent_b, double fitness_a,
                        double fitness_b, Rng& rng) {
    const bool a_fitter = fitness_a >= fitness_b;
    const Genome& base = a_fitter ? parent_a : parent_b;
    const Genome& other = a_fitter ? parent_b : parent_a;

    std::map<int, const ConnectionGene*> other_genes;
    for (const auto& c : other.connections) other_genes[c.innovation] = &c;

    Genome child;
    child.nodes = base.nodes;
    child.input_count = base.input_count;
    child.output_count = base.output_count;
    for (const auto& c : base.connections) {
        ConnectionGene gene = c;
        bool disabled_somewhere = !c.enabled;
        const auto it = other_genes.find(c.innovation);
        if (it != other_genes.end()) {
            if (detail::coin(rng, 0.5)) gene.weight = it->second->weight;
            disabled_somewhere = disabled_somewhere || !it->second->enabled;
        }
        gene.enabled = disabled_somewhere ? !detail::coin(rng, 0.75) : true;
        child.connections.push_back(gene);
    }
    return child;
}

// Applies each mutation kind independently at its configured rate. Structural
// edits that would close a cycle are re-drawn a few times, then skipped, so
// the result is always acyclic.
inline Genome mutate(const Genome& genome, const EvolutionConfig& config,
                     InnovationRegistry& registry, Rng& rng) {
    Genome g = genome;
    const double bound = config.weight_bound();

    for (auto& c : g.connections)
        if (detail::coin(rng, config.mutation.perturb_weight))
            c.weight = detail::clip(c.weight + detail::clipped_normal(rng, config.sigma, bound),
                                    bound);

    if (detail::coin(rng, config.mutation.add_connection)) {
        std::vector<int> sources, targets;
        for (const auto& n : g.nodes) {
            if (n.kind == NodeKind::Dummy) continue;
            if (n.kind != NodeKind::Output) sources.push_back(n.id);
            if (n.kind == NodeKind::Hidden || n.kind == NodeKind::Output)
                targets.push_back(n.id);
        }
        for (int attempt = 0; attempt < 10 && !sources.empty() && !targets.empty();
             ++attempt) {
            const int from = detail::pick(sources, rng);
            const int to = detail::pick(targets, rng);
            if (from == to || g.has_connection(from, to)) continue;
            if (detail::creates_cycle(g, from, to)) continue;
            g.connections.push_back({registry.connection_id(from, to), from, to,
                                     detail::clipped_normal(rng, config.sigma, bound), true});
            break;
        }
    }

    if (detail::coin(rng, config.mutation.add_node)) {
        std::vector<std::size_t> enabled;
        for (std::size_t i = 0; i < g.connections.size(); ++i)
            if (g.connections[i].enabled) enabled.push_back(i);
        if (!enabled.empty()) {
            const std::size_t pick_i = detail::pick(enabled, rng);
            ConnectionGene& old = g.connections[pick_i];
            old.enabled = false;
            const int node_id = registry.node_for_split(old.innovation, g);
            g.nodes.push_back({node_id, NodeKind::Hidden, Activation::Sigmoid});
            const int from = old.from, to = old.to;
            const double w = old.weight;
            g.connections.push_back(
                {registry.connection_id(from, node_id), from, node_id, 1.0, true});
            g.connections.push_back(
                {registry.connection_id(node_id, to), node_id, to, w, true});
        }
    }

    if (detail::coin(rng, config.mutation.toggle_enable) && !g.connections.empty()) {
        for (int attempt = 0; attempt < 10; ++attempt) {
            std::uniform_int_distribution<std::size_t> d(0, g.connections.size() - 1);
            ConnectionGene& c = g.connections[d(rng)];
            if (c.enabled) {
                c.enabled = false;
                break;
            }
            // Re-enabling must not close a cycle through edges added since.
            c.enabled = true;
            bool cyclic = false;
            try {
                topological_order(g);
            } catch (const CycleError&) {
                cyclic = true;
            }
            if (!cyclic) break;
            c.enabled = false;
        }
    }

    if (detail::coin(rng, config.mutation.delete_node)) {
        std::vector<int> hidden;
        for (const auto& n : g.nodes)
            if (n.kind == NodeKind::Hidden) hidden.push_back(n.id);
        if (!hidden.empty()) {
            const int victim = detail::pick(hidden, rng);
            std::erase_if(g.nodes, [victim](const NodeGene& n) { return n.id == victim; });
            std::erase_if(g.connections, [victim](const ConnectionGene& c) {
                return c.from == victim || c.to == victim;
            });
        }
    }
    return g;
}

inline double info_score(std::span<const int> predicted, std::span<const int> truth) {
    return normalized_mutual_information(predicted, truth);
}

// Plateau rule: stop once the best info score has failed to improve by at
// least epsilon for `patience` consecutive generations. The first entry
// counts as non-improving (its baseline is itself), so a flat history of
// length >= patience stops.
inline bool should_stop(std::span<const double> best_info_history, double epsilon,
                        int patience) {
    if (best_info_history.empty()) return false;
    int quiet = 0;
    for (std::size_t t = best_info_history.size(); t-- > 0;) {
        const double before = t == 0 ? best_info_history[0] : best_info_history[t - 1];
        if (best_info_history[t] - before < epsilon)
            ++quiet;
        else
            break;
    }
    return quiet >= patience;
}

namespace detail {

struct Candidate {
    double info = -1.0;
    double acc = -1.0;
    std::size_t genes = 0;
    int index = 0;

    // Higher info, then higher accuracy, then fewer genes, then lower index.
    bool beats(const Candidate& o) const {
        if (info != o.info) return info > o.info;
        if (acc != o.acc) return acc > o.acc;
        if (genes != o.genes) return genes < o.genes;
        return index < o.index;
    }
};

inline Candidate score_candidate(const Genome& g, const QuantizerPair& quant,
                                 const std::vector<FlowRecord>& validation, int index) {
    const EvalPlan plan(g, &quant);
    std::vector<int> preds, labels;
    preds.reserve(validation.size());
    labels.reserve(validation.size());
    for (const auto& rec : validation) {
        preds.push_back(plan.run(rec.features)[0] > 0.5 ? 1 : 0);
        labels.push_back(rec.label);
    }
    Candidate c;
    c.info = info_score(preds, labels);
    c.acc = accuracy(preds, labels);
    c.genes = g.connections.size();
    c.index = index;
    return c;
}

// Largest-remainder apportionment of `total` offspring over species scores.
inline std::vector<int> allocate_offspring(const std::vector<double>& scores, int total) {
    const double sum = std::accumulate(scores.begin(), scores.end(), 0.0);
    std::vector<int> alloc(scores.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t s = 0; s < scores.size(); ++s) {
        const double share = sum > 0.0
            ? scores[s] / sum * total
            : static_cast<double>(total) / static_cast<double>(scores.size());
        alloc[s] = static_cast<int>(std::floor(share));
        assigned += alloc[s];
        remainders.push_back({share - std::floor(share), s});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int i = 0; i < total - assigned; ++i)
        ++alloc[remainders[static_cast<std::size_t>(i) % remainders.size()].second];
    return alloc;
}

} // namespace detail

// Index of the genome with the best validation info score; ties go to higher
// accuracy, then fewer genes, then the lower index.
inline int select_best(const std::vector<Genome>& genomes,
                       const std::vector<QuantizerPair>& quantizers,
                       const std::vector<FlowRecord>& validation) {
    detail::Candidate best;
    bool first = true;
    for (std::size_t i = 0; i < genomes.size(); ++i) {
        const auto c = detail::score_candidate(genomes[i], quantizers[i], validation,
                                               static_cast<int>(i));
        if (first || c.beats(best)) {
            best = c;
            first = false;
        }
    }
    return best.index;
}

// Produces the next generation: stagnant species are dropped (the one holding
// the global best survives), fitness sharing apportions offspring across
// species, parents come from each species' top half, and the global best is
// copied through unchanged.
inline Population select_and_reproduce(Population& pop, const std::vector<double>& fitnesses,
                                       const std::vector<QuantizerPair>& quantizers,
                                       const EvolutionConfig& config, Rng& rng) {
    const int pop_size = config.population_size;
    int global_best = 0;
    for (int i = 1; i < static_cast<int>(fitnesses.size()); ++i)
        if (fitnesses[static_cast<std::size_t>(i)] > fitnesses[static_cast<std::size_t>(global_best)])
            global_best = i;

    // Update stagnation counters before pruning.
    for (auto& s : pop.species) {
        double best = -std::numeric_limits<double>::infinity();
        for (int m : s.members) best = std::max(best, fitnesses[static_cast<std::size_t>(m)]);
        if (best > s.best_fitness) {
            s.best_fitness = best;
            s.stagnation = 0;
        } else {
            ++s.stagnation;
        }
    }
    std::erase_if(pop.species, [&](const Species& s) {
        if (std::find(s.members.begin(), s.members.end(), global_best) != s.members.end())
            return false;
        return s.stagnation >= config.species_stagnation;
    });

    // Shared fitness: each member's score divided by its species size.
    std::vector<double> shared_scores;
    for (const auto& s : pop.species) {
        double total = 0.0;
        for (int m : s.members) total += fitnesses[static_cast<std::size_t>(m)];
        shared_scores.push_back(total / static_cast<double>(s.members.size()));
    }
    std::vector<int> alloc = detail::allocate_offspring(shared_scores, pop_size);

    // The elite occupies one slot of its own species' quota.
    std::size_t best_species = 0;
    for (std::size_t s = 0; s < pop.species.size(); ++s) {
        const auto& m = pop.species[s].members;
        if (std::find(m.begin(), m.end(), global_best) != m.end()) best_species = s;
    }
    if (alloc[best_species] == 0) {
        const auto richest = static_cast<std::size_t>(
            std::max_element(alloc.begin(), alloc.end()) - alloc.begin());
        --alloc[richest];
        ++alloc[best_species];
    }

    Population next;
    next.registry = pop.registry;
    next.species = pop.species;
    next.next_species_id = pop.next_species_id;
    for (auto& s : next.species) s.members.clear();

    next.genomes.push_back(pop.genomes[static_cast<std::size_t>(global_best)]);
    next.warm_starts.emplace_back(quantizers[static_cast<std::size_t>(global_best)]);

    for (std::size_t s = 0; s < pop.species.size(); ++s) {
        auto parents = pop.species[s].members;
        std::sort(parents.begin(), parents.end(), [&](int a, int b) {
            if (fitnesses[static_cast<std::size_t>(a)] != fitnesses[static_cast<std::size_t>(b)])
                return fitnesses[static_cast<std::size_t>(a)] > fitnesses[static_cast<std::size_t>(b)];
            return a < b;
        });
        parents.resize(std::max<std::size_t>(1, (parents.size() + 1) / 2));

        int to_make = alloc[s];
        if (s == best_species) --to_make;  // elite already emitted
        for (int i = 0; i < to_make; ++i) {
            Genome child;
            int warm_from;
            if (parents.size() >= 2 && detail::coin(rng, config.crossover_prob)) {
                const int pa = detail::pick(parents, rng);
                const int pb = detail::pick(parents, rng);
                child = crossover(pop.genomes[static_cast<std::size_t>(pa)],
                                  pop.genomes[static_cast<std::size_t>(pb)],
                                  fitnesses[static_cast<std::size_t>(pa)],
                                  fitnesses[static_cast<std::size_t>(pb)], rng);
                warm_from =
                    fitnesses[static_cast<std::size_t>(pa)] >= fitnesses[static_cast<std::size_t>(pb)]
                        ? pa : pb;
            } else {
                warm_from = detail::pick(parents, rng);
                child = pop.genomes[static_cast<std::size_t>(warm_from)];
            }
            child = mutate(child, config, *pop.registry, rng);
            next.genomes.push_back(std::move(child));
            next.warm_starts.emplace_back(quantizers[static_cast<std::size_t>(warm_from)]);
        }
    }
    return next;
}

struct EvolveResult {
    Genome best;
    QuantizerPair quantizers;
    std::vector<GenerationRecord> curve;
    int generations_run = 0;
    double best_validation_accuracy = 0.0;
    double best_validation_info = 0.0;
};

// Observer runs after each generation's evaluation, before reproduction.
using GenerationObserver =
    std::function<void(const Population&, const std::vector<double>& fitnesses,
                       const GenerationRecord&)>;

inline EvolveResult evolve(const EvolutionConfig& config,
                           const std::vector<FlowRecord>& train,
                           const std::vector<FlowRecord>& validation,
                           const GenerationObserver& observer = nullptr) {
    config.validate();
    if (train.empty() || validation.empty())
        throw InsufficientData("evolve needs non-empty train and validation sets");
    const int input_count = static_cast<int>(train.front().features.size());
    for (const auto& r : validation)
        if (static_cast<int>(r.features.size()) != input_count)
            throw DimensionError("validation feature width differs from training data");

    for (const auto& r : train)
        if (static_cast<int>(r.features.size()) != input_count)
            throw DimensionError("training rows have inconsistent feature widths");

    Rng rng(config.seed);
    Population pop = initialize_population(config, input_count, 1, rng);

    std::optional<Genome> best_genome;
    std::optional<QuantizerPair> best_quant;
    detail::Candidate best_candidate;
    double best_accuracy_seen = 0.0;
    std::vector<double> best_info_history;
    std::vector<GenerationRecord> curve;

    int generation = 0;
    for (; generation < config.max_generations; ++generation) {
        const auto batch = sample_batch(train, static_cast<std::size_t>(config.batch_size), rng);

        std::vector<QuantizerPair> quantizers;
        std::vector<double> fitnesses;
        quantizers.reserve(pop.size());
        fitnesses.reserve(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i) {
            quantizers.push_back(refit_quantizers(pop.genomes[i], batch, config.quant_bits,
                                                  config.quant_iters, pop.warm_starts[i]));
            fitnesses.push_back(fitness(pop.genomes[i], batch, quantizers.back()));
        }

        // Challenger for the best-so-far snapshot, judged on the frozen
        // validation set.
        for (std::size_t i = 0; i < pop.size(); ++i) {
            const auto c = detail::score_candidate(pop.genomes[i], quantizers[i], validation,
                                                   static_cast<int>(i));
            best_accuracy_seen = std::max(best_accuracy_seen, c.acc);
            if (!best_genome || c.beats(best_candidate)) {
                best_candidate = c;
                best_genome = pop.genomes[i];
                best_quant = quantizers[i];
            }
        }
        best_info_history.push_back(best_candidate.info);

        speciate(pop, config);

        GenerationRecord rec;
        rec.generation = generation;
        rec.best_accuracy = best_accuracy_seen;
        rec.mean_accuracy =
            std::accumulate(fitnesses.begin(), fitnesses.end(), 0.0) /
            static_cast<double>(fitnesses.size());
        rec.best_info = best_candidate.info;
        rec.species_count = static_cast<int>(pop.species.size());
        auto fit_err = [](const QuantizerBasis& b) {
            return b.fit_errors.empty()
                ? 0.0
                : *std::min_element(b.fit_errors.begin(), b.fit_errors.end());
        };
        rec.quantizer_error = fit_err(best_quant->weights) + fit_err(best_quant->activations);
        curve.push_back(rec);

        if (observer) observer(pop, fitnesses, rec);

        if (should_stop(best_info_history, config.stop_epsilon, config.stop_patience))
            break;
        if (generation + 1 == config.max_generations) break;

        pop = select_and_reproduce(pop, fitnesses, quantizers, config, rng);
    }

    EvolveResult result{std::move(*best_genome), std::move(*best_quant), std::move(curve),
                        0, best_candidate.acc, best_candidate.info};
    result.generations_run = static_cast<int>(result.curve.size());
    return result;
}

} // namespace qneat
