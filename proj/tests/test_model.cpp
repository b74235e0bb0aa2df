#include <gtest/gtest.h>

#include <bit>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "qneat/model.hpp"
#include "support/test_util.hpp"

using namespace qneat;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        dir_ = fs::temp_directory_path() /
               ("qneat_model_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter_++));
        fs::create_directories(dir_);
    }
    ~TempDir() { fs::remove_all(dir_); }
    fs::path path(const std::string& name) const { return dir_ / name; }

private:
    fs::path dir_;
    static inline int counter_ = 0;
};

ModelArtifact make_artifact(std::uint64_t seed, int inputs = 4) {
    const auto g = testutil::random_evolved_genome(inputs, seed);
    std::vector<FlowRecord> batch;
    Rng rng(seed + 1);
    std::normal_distribution<double> d(0.0, 1.5);
    for (int i = 0; i < 40; ++i) {
        FlowRecord r;
        r.features.resize(static_cast<std::size_t>(inputs));
        for (auto& f : r.features) f = d(rng);
        r.label = i % 2;
        batch.push_back(std::move(r));
    }
    const auto quant = refit_quantizers(g, batch, 2, 10, std::nullopt);
    const auto layered = insert_dummy_nodes(g);
    ModelArtifact artifact{to_dense(layered, quant), quant, EvolutionConfig{}, 7,
                           ModelMetrics{0.9, 0.88, 0.6, 0.01, 0.02},
                           fingerprint(batch)};
    artifact.config.seed = seed;
    return artifact;
}

// Fully connected layered genome, optionally with a bias row.
ModelArtifact dense_mlp_artifact(int inputs, int hidden, bool with_bias) {
    testutil::GenomeBuilder b;
    for (int i = 0; i < inputs; ++i) b.node(i, NodeKind::Input);
    int next = inputs;
    int bias_id = -1;
    if (with_bias) {
        bias_id = next++;
        b.node(bias_id, NodeKind::Bias);
    }
    std::vector<int> hidden_ids;
    for (int h = 0; h < hidden; ++h) {
        hidden_ids.push_back(next);
        b.node(next++, NodeKind::Hidden);
    }
    const int out_id = next++;
    b.node(out_id, NodeKind::Output);
    if (hidden > 0) {
        for (int h : hidden_ids) {
            for (int i = 0; i < inputs; ++i) b.edge(i, h, 0.05);
            if (with_bias) b.edge(bias_id, h, 0.05);
        }
        for (int h : hidden_ids) b.edge(h, out_id, 0.05);
        if (with_bias) b.edge(bias_id, out_id, 0.05);
    } else {
        for (int i = 0; i < inputs; ++i) b.edge(i, out_id, 0.05);
    }
    const auto g = b.build();
    QuantizerPair quant{QuantizerBasis(Domain::Signed, {0.05, 0.025}),
                        QuantizerBasis(Domain::Unsigned, {0.5, 0.25})};
    return ModelArtifact{to_dense(insert_dummy_nodes(g), quant), quant,
                         EvolutionConfig{}, 1, ModelMetrics{}, "test"};
}

} // namespace

TEST(ModelRoundTrip, StructurallyEqualAfterSaveLoad) {
    TempDir tmp;
    const auto artifact = make_artifact(100);
    const auto p = tmp.path("m.qneat.json");
    save_model(artifact, p);
    const auto back = load_model(p);

    EXPECT_EQ(back.network.input_count, artifact.network.input_count);
    EXPECT_EQ(back.network.matrices.size(), artifact.network.matrices.size());
    EXPECT_EQ(back.quant.weights.basis(), artifact.quant.weights.basis());
    EXPECT_EQ(back.quant.activations.basis(), artifact.quant.activations.basis());
    EXPECT_EQ(back.generations_run, artifact.generations_run);
    EXPECT_EQ(back.dataset_fingerprint, artifact.dataset_fingerprint);
    EXPECT_DOUBLE_EQ(back.metrics.accuracy, artifact.metrics.accuracy);
    for (std::size_t l = 0; l < back.network.matrices.size(); ++l) {
        EXPECT_EQ(back.network.matrices[l].conn, artifact.network.matrices[l].conn);
        EXPECT_EQ(back.network.matrices[l].pass, artifact.network.matrices[l].pass);
    }
}

TEST(ModelRoundTrip, EvaluationBitExactAfterReload) {
    TempDir tmp;
    std::mt19937_64 rng(101);
    std::normal_distribution<double> d(0.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto artifact = make_artifact(200 + static_cast<std::uint64_t>(trial));
        const auto p = tmp.path("m" + std::to_string(trial) + ".qneat.json");
        save_model(artifact, p);
        const auto back = load_model(p);
        for (int i = 0; i < 50; ++i) {
            std::vector<double> input{d(rng), d(rng), d(rng), d(rng)};
            const auto a = predict(artifact, input);
            const auto b = predict(back, input);
            EXPECT_EQ(std::bit_cast<std::uint64_t>(a.score),
                      std::bit_cast<std::uint64_t>(b.score));
            EXPECT_EQ(a.label, b.label);
        }
    }
}

TEST(ModelRoundTrip, SaveIsByteStable) {
    TempDir tmp;
    const auto artifact = make_artifact(300);
    const auto p1 = tmp.path("a.qneat.json");
    const auto p2 = tmp.path("b.qneat.json");
    save_model(artifact, p1);
    save_model(artifact, p2);
    std::ifstream f1(p1), f2(p2);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    EXPECT_EQ(s1, s2);
}

TEST(ModelLoad, FlippedByteIsCorruption) {
    TempDir tmp;
    const auto artifact = make_artifact(400);
    const auto p = tmp.path("c.qneat.json");
    save_model(artifact, p);

    std::ifstream in(p);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    // Flip a digit inside the payload (a weight-plane character would break
    // base64 or the checksum; a numeric field breaks the checksum).
    const auto pos = text.find("\"generations_run\": 7");
    ASSERT_NE(pos, std::string::npos);
    text[pos + std::string("\"generations_run\": ").size()] = '9';
    std::ofstream out(p);
    out << text;
    out.close();
    EXPECT_THROW(load_model(p), CorruptionError);
}

TEST(ModelLoad, TruncatedFileIsCorruption) {
    TempDir tmp;
    const auto artifact = make_artifact(500);
    const auto p = tmp.path("d.qneat.json");
    save_model(artifact, p);
    std::ifstream in(p);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(p);
    out << text.substr(0, text.size() / 2);
    out.close();
    EXPECT_THROW(load_model(p), CorruptionError);
}

TEST(ModelLoad, UnknownVersionTag) {
    TempDir tmp;
    const auto artifact = make_artifact(600);
    auto doc = model_to_json(artifact);
    doc["format_version"] = "999";
    const auto p = tmp.path("e.qneat.json");
    std::ofstream out(p);
    out << doc.dump(2);
    out.close();
    EXPECT_THROW(load_model(p), VersionError);
}

TEST(ResourceEstimate, FullyConnectedNoBias) {
    // 256x4x1 without bias: 256*4 + 4*1 = 1028 parameters, 2056 bits at k=2.
    const auto artifact = dense_mlp_artifact(256, 4, false);
    const auto est = resource_estimate(artifact);
    EXPECT_EQ(est.param_count, 1028);
    EXPECT_EQ(est.param_bits, 2056);
    EXPECT_EQ(est.mult_adds, 1028);
    EXPECT_EQ(est.activation_count, 5);  // 4 hidden sigmoids + 1 output
}

TEST(ResourceEstimate, FullyConnectedWithBias) {
    // Bias row adds 4 hidden-bias weights + 1 output-bias weight: 1033.
    const auto artifact = dense_mlp_artifact(256, 4, true);
    const auto est = resource_estimate(artifact);
    const long expected = 256 * 4 + 4 * 1 + 5;
    EXPECT_EQ(est.param_count, expected);
    EXPECT_EQ(est.param_bits, 2 * expected);
}

TEST(ResourceEstimate, NoHiddenLayerMultAddsEqualsInputCount) {
    const auto artifact = dense_mlp_artifact(256, 0, false);
    const auto est = resource_estimate(artifact);
    EXPECT_EQ(est.mult_adds, 256);
    EXPECT_EQ(est.activation_count, 1);
}

TEST(ResourceEstimate, DisabledConnectionDoesNotCount) {
    auto g = testutil::GenomeBuilder{}
                 .node(0, NodeKind::Input)
                 .node(1, NodeKind::Output)
                 .node(2, NodeKind::Hidden)
                 .edge(0, 2, 0.1)
                 .edge(2, 1, 0.1)
                 .build();
    QuantizerPair quant{QuantizerBasis(Domain::Signed, {0.1}),
                        QuantizerBasis(Domain::Unsigned, {0.5})};
    const ModelArtifact base{to_dense(insert_dummy_nodes(g), quant), quant,
                             EvolutionConfig{}, 1, ModelMetrics{}, "t"};
    const auto before = resource_estimate(base);

    g.connections.push_back({99, 0, 1, 0.2, false});  // disabled skip
    const ModelArtifact with_disabled{to_dense(insert_dummy_nodes(g), quant), quant,
                                      EvolutionConfig{}, 1, ModelMetrics{}, "t"};
    const auto after = resource_estimate(with_disabled);
    EXPECT_EQ(before.param_count, after.param_count);
    EXPECT_EQ(before.mult_adds, after.mult_adds);
}

TEST(ResourceEstimate, InvariantUnderDummyInsertion) {
    // Pass-through wires carry no parameters, so layering an irregular
    // genome never changes the estimate.
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = testutil::random_evolved_genome(4, 900 + trial);
        QuantizerPair quant{QuantizerBasis(Domain::Signed, {0.1, 0.05}),
                            QuantizerBasis(Domain::Unsigned, {0.5, 0.25})};
        const auto layered = insert_dummy_nodes(g);
        const ModelArtifact artifact{to_dense(layered, quant), quant,
                                     EvolutionConfig{}, 1, ModelMetrics{}, "t"};
        const auto est = resource_estimate(artifact);
        long enabled = 0;
        for (const auto& c : g.connections) enabled += c.enabled ? 1 : 0;
        EXPECT_EQ(est.param_count, enabled);
    }
}

TEST(Predict, SchemaMismatchOnWrongWidth) {
    const auto artifact = make_artifact(700);
    std::vector<double> short_row{1.0, 2.0, 3.0};
    EXPECT_THROW(predict(artifact, short_row), SchemaMismatch);
}
