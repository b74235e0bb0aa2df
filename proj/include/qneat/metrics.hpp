#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

#include "qneat/errors.hpp"

namespace qneat {

struct Confusion {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const { return tp + fp + tn + fn; }
};

// Attack (label 1) is the positive class throughout.
inline Confusion confusion(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size())
        throw DimensionError("confusion: prediction/label lengths differ");
    Confusion c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (truth[i] == 1)
            (predicted[i] == 1 ? c.tp : c.fn)++;
        else
            (predicted[i] == 1 ? c.fp : c.tn)++;
    }
    return c;
}

inline double accuracy(const Confusion& c) {
    if (c.total() == 0) return 0.0;
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    return accuracy(confusion(predicted, truth));
}

// F1 = 2PR/(P+R); any undefined precision or recall collapses to 0.
inline double f1_score(const Confusion& c) {
    if (c.tp + c.fp == 0 || c.tp + c.fn == 0) return 0.0;
    const double p = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    const double r = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

inline double f1_score(std::span<const int> predicted, std::span<const int> truth) {
    return f1_score(confusion(predicted, truth));
}

// NMI = I(P;Y) / sqrt(H(P) H(Y)) over the empirical joint distribution of
// two binary sequences, with the convention that a zero entropy on either
// side gives 0. Clamped to [0,1] against floating wobble.
inline double normalized_mutual_information(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size())
        throw DimensionError("nmi: sequence lengths differ");
    if (a.empty()) return 0.0;

    double joint[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] != 0 && a[i] != 1) || (b[i] != 0 && b[i] != 1))
            throw std::invalid_argument("nmi expects binary labels");
        joint[a[i]][b[i]] += 1.0;
    }
    const double n = static_cast<double>(a.size());
    const double pa[2] = {(joint[0][0] + joint[0][1]) / n, (joint[1][0] + joint[1][1]) / n};
    const double pb[2] = {(joint[0][0] + joint[1][0]) / n, (joint[0][1] + joint[1][1]) / n};

    auto h = [](const double p[2]) {
        double out = 0.0;
        for (int i = 0; i < 2; ++i)
            if (p[i] > 0.0) out -= p[i] * std::log(p[i]);
        return out;
    };
    const double ha = h(pa), hb = h(pb);
    if (ha == 0.0 || hb == 0.0) return 0.0;

    double mi = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double pij = joint[i][j] / n;
            if (pij > 0.0) mi += pij * std::log(pij / (pa[i] * pb[j]));
        }
    }
    return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

} // namespace qneat
