#pragma once

// Flow-feature ingestion and sampling machinery. Records come from CSV files
// with columns f0..f{n-1} (integer bytes, 0..255) plus a trailing `category`
// column; the binary label derives from the category ("normal" vs anything
// else). Feature values pass through untouched: no normalization or scaling.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qneat/errors.hpp"
#include "qneat/math.hpp"
#include "qneat/sha256.hpp"

namespace qneat {

constexpr std::size_t kFlowFeatureCount = 256;

struct FlowRecord {
    std::vector<double> features;
    int label = 0;             // 0 normal, 1 attack
    std::string category;      // "normal" or an attack name
};

using Rng = std::mt19937_64;

namespace detail {

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Partial Fisher-Yates: first `take` entries of a shuffled copy.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t take, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < take && i + 1 < n; ++i) {
        std::uniform_int_distribution<std::size_t> d(i, n - 1);
        std::swap(idx[i], idx[d(rng)]);
    }
    idx.resize(take);
    return idx;
}

} // namespace detail

// Loads and validates a feature CSV. The header fixes the feature width
// (f0..f{n-1},category); every row must match it and every feature must be
// an integer in 0..255. `expected_features`, when given, rejects files whose
// width differs from what a model expects.
inline std::vector<FlowRecord> load_records(
    const std::filesystem::path& path,
    std::optional<std::size_t> expected_features = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2 || detail::trim(header.back()) != "category")
        throw ParseError(path.string() + ": header must be f0..fN,category");
    const std::size_t width = header.size() - 1;
    for (std::size_t i = 0; i < width; ++i) {
        if (detail::trim(header[i]) != "f" + std::to_string(i))
            throw ParseError(path.string() + ": header column " + std::to_string(i) +
                             " must be f" + std::to_string(i));
    }
    if (expected_features && width != *expected_features)
        throw SchemaMismatch(path.string() + ": expected " +
                             std::to_string(*expected_features) + " features, file has " +
                             std::to_string(width));

    std::vector<FlowRecord> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != width + 1)
            throw ParseError(path.string() + ": row " + std::to_string(row) + " has " +
                             std::to_string(fields.size() - 1) + " features, expected " +
                             std::to_string(width));
        FlowRecord rec;
        rec.features.resize(width);
        for (std::size_t i = 0; i < width; ++i) {
            const std::string f = detail::trim(fields[i]);
            long value = 0;
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
            if (ec != std::errc() || ptr != f.data() + f.size())
                throw ParseError(path.string() + ": row " + std::to_string(row) +
                                 ", column f" + std::to_string(i) + ": not an integer");
            if (value < 0 || value > 255)
                throw RangeError(path.string() + ": row " + std::to_string(row) +
                                 ", column f" + std::to_string(i) + ": byte out of 0..255");
            rec.features[i] = static_cast<double>(value);
        }
        rec.category = detail::trim(fields[width]);
        if (rec.category.empty())
            throw ParseError(path.string() + ": row " + std::to_string(row) +
                             ": empty category");
        rec.label = detail::lower(rec.category) == "normal" ? 0 : 1;
        records.push_back(std::move(rec));
    }
    return records;
}

inline void save_records_csv(const std::vector<FlowRecord>& records,
                             const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    const std::size_t width = records.empty() ? kFlowFeatureCount : records[0].features.size();
    for (std::size_t i = 0; i < width; ++i) out << 'f' << i << ',';
    out << "category\n";
    for (const auto& r : records) {
        for (double f : r.features) out << static_cast<long>(f) << ',';
        out << r.category << '\n';
    }
}

// Balanced subset per the training-set construction rule: take the same
// number n_a from every attack category, then as many normals as the attacks
// total. n_a is the smallest category count, capped by the normal supply.
// `required_categories`, when given, must each be present.
inline std::vector<FlowRecord> balance(
    const std::vector<FlowRecord>& records, Rng& rng,
    const std::vector<std::string>& required_categories = {}) {
    std::map<std::string, std::vector<std::size_t>> by_category;
    std::vector<std::size_t> normals;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].label == 0)
            normals.push_back(i);
        else
            by_category[detail::lower(records[i].category)].push_back(i);
    }
    for (const auto& cat : required_categories)
        if (!by_category.count(detail::lower(cat)))
            throw InsufficientData("no records for attack category '" + cat + "'");
    if (by_category.empty()) throw InsufficientData("no attack records");

    const std::size_t cats = by_category.size();
    std::size_t na = SIZE_MAX;
    std::string smallest;
    for (const auto& [cat, idx] : by_category) {
        if (idx.size() < na) {
            na = idx.size();
            smallest = cat;
        }
    }
    na = std::min(na, normals.size() / cats);
    if (na == 0) {
        if (normals.size() < cats)
            throw InsufficientData("not enough 'normal' records (" +
                                   std::to_string(normals.size()) + " for " +
                                   std::to_string(cats) + " categories)");
        throw InsufficientData("attack category '" + smallest + "' has too few records");
    }

    std::vector<FlowRecord> out;
    out.reserve(2 * cats * na);
    for (const auto& [cat, idx] : by_category)
        for (std::size_t j : detail::sample_indices(idx.size(), na, rng))
            out.push_back(records[idx[j]]);
    for (std::size_t j : detail::sample_indices(normals.size(), cats * na, rng))
        out.push_back(records[normals[j]]);
    return out;
}

// Stratified k-fold plan. Each label class is shuffled and dealt round-robin
// with a rotating start so fold sizes differ by at most one overall.
struct FoldPlan {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<int> assignments;  // record index -> fold index

    std::vector<std::size_t> train_indices(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] != fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> test_indices(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] == fold) out.push_back(i);
        return out;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["k"] = k;
        j["seed"] = seed;
        j["assignments"] = assignments;
        return j;
    }

    static FoldPlan from_json(const nlohmann::json& j) {
        FoldPlan p;
        p.k = j.at("k").get<int>();
        p.seed = j.at("seed").get<std::uint64_t>();
        p.assignments = j.at("assignments").get<std::vector<int>>();
        return p;
    }
};

inline FoldPlan kfold_split(const std::vector<FlowRecord>& records, int k,
                            std::uint64_t seed) {
    if (k < 3 || k > 10)
        throw InvalidK("k must be in [3,10], got " + std::to_string(k));
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < records.size(); ++i)
        by_class[records[i].label].push_back(i);
    for (int c = 0; c < 2; ++c)
        if (by_class[c].size() < static_cast<std::size_t>(k))
            throw InsufficientData("class " + std::to_string(c) + " has fewer than k records");

    Rng rng(mix_seed(seed, 0x6b666f6c64ULL));
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(records.size(), 0);
    std::size_t offset = 0;
    for (int c = 0; c < 2; ++c) {
        auto& idx = by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t j = 0; j < idx.size(); ++j)
            plan.assignments[idx[j]] = static_cast<int>((j + offset) % k);
        offset = (offset + idx.size()) % k;
    }
    return plan;
}

inline std::vector<FlowRecord> gather(const std::vector<FlowRecord>& records,
                                      std::span<const std::size_t> indices) {
    std::vector<FlowRecord> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(records[i]);
    return out;
}

// Batch with exactly size/2 records of each label, sampled uniformly without
// replacement within class.
inline std::vector<FlowRecord> sample_batch(const std::vector<FlowRecord>& records,
                                            std::size_t size, Rng& rng) {
    if (size % 2 != 0)
        throw std::invalid_argument("batch size must be even, got " + std::to_string(size));
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < records.size(); ++i)
        by_class[records[i].label].push_back(i);
    const std::size_t half = size / 2;
    for (int c = 0; c < 2; ++c)
        if (by_class[c].size() < half)
            throw InsufficientData("class " + std::to_string(c) + " has " +
                                   std::to_string(by_class[c].size()) +
                                   " records, need " + std::to_string(half));
    std::vector<FlowRecord> out;
    out.reserve(size);
    for (int c = 0; c < 2; ++c)
        for (std::size_t j : detail::sample_indices(by_class[c].size(), half, rng))
            out.push_back(records[by_class[c][j]]);
    return out;
}

// Content hash over a canonical encoding of the record set; stored in model
// artifacts so a model remembers what it was trained on.
inline std::string fingerprint(const std::vector<FlowRecord>& records) {
    Sha256 h;
    auto put_u64 = [&](std::uint64_t v) {
        std::uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        h.update(b, 8);
    };
    put_u64(records.size());
    for (const auto& r : records) {
        put_u64(r.features.size());
        for (double f : r.features) {
            std::uint64_t bits;
            std::memcpy(&bits, &f, 8);
            put_u64(bits);
        }
        const std::uint8_t label_byte = static_cast<std::uint8_t>(r.label);
        h.update(&label_byte, 1);
        put_u64(r.category.size());
        h.update(r.category);
    }
    return h.hex_digest();
}

} // namespace qneat
