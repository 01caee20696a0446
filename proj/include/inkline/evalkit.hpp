#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "inkline/rng.hpp"

namespace inkline {

// Strings are compared as sequences of Unicode code points.
inline std::vector<uint32_t> utf8_decode(const std::string& s) {
    std::vector<uint32_t> out;
    size_t i = 0;
    while (i < s.size()) {
        unsigned char c = s[i];
        uint32_t cp;
        int extra;
        if (c < 0x80) { cp = c; extra = 0; }
        else if ((c >> 5) == 0x6) { cp = c & 0x1f; extra = 1; }
        else if ((c >> 4) == 0xe) { cp = c & 0x0f; extra = 2; }
        else if ((c >> 3) == 0x1e) { cp = c & 0x07; extra = 3; }
        else { cp = 0xfffd; extra = 0; }  // invalid byte
        for (int k = 0; k < extra; ++k) {
            if (i + 1 + k >= s.size()) { cp = 0xfffd; extra = k; break; }
            unsigned char cc = s[i + 1 + k];
            if ((cc >> 6) != 0x2) { cp = 0xfffd; extra = k; break; }
            cp = (cp << 6) | (cc & 0x3f);
        }
        out.push_back(cp);
        i += 1 + extra;
    }
    return out;
}

inline std::string utf8_encode(uint32_t cp) {
    std::string s;
    if (cp < 0x80) s += static_cast<char>(cp);
    else if (cp < 0x800) {
        s += static_cast<char>(0xc0 | (cp >> 6));
        s += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp < 0x10000) {
        s += static_cast<char>(0xe0 | (cp >> 12));
        s += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        s += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
        s += static_cast<char>(0xf0 | (cp >> 18));
        s += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
        s += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        s += static_cast<char>(0x80 | (cp & 0x3f));
    }
    return s;
}

inline size_t levenshtein(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
    size_t n = a.size(), m = b.size();
    if (n == 0) return m;
    if (m == 0) return n;
    std::vector<size_t> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

inline size_t levenshtein(const std::string& a, const std::string& b) {
    return levenshtein(utf8_decode(a), utf8_decode(b));
}

inline double cer(const std::string& pred, const std::string& real) {
    auto r = utf8_decode(real);
    if (r.empty()) throw std::invalid_argument("cer: empty reference");
    return static_cast<double>(levenshtein(utf8_decode(pred), r)) / r.size();
}

// Micro-averaged CER over a corpus: total edits / total reference length.
inline double corpus_cer(const std::vector<std::string>& preds, const std::vector<std::string>& reals) {
    if (preds.size() != reals.size()) throw std::invalid_argument("corpus_cer: length mismatch");
    size_t edits = 0, len = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        auto r = utf8_decode(reals[i]);
        edits += levenshtein(utf8_decode(preds[i]), r);
        len += r.size();
    }
    if (len == 0) throw std::invalid_argument("corpus_cer: empty references");
    return static_cast<double>(edits) / len;
}

// Word-level exact-match error fraction (each sample is one word image).
inline double wer(const std::vector<std::string>& preds, const std::vector<std::string>& reals) {
    if (preds.size() != reals.size()) throw std::invalid_argument("wer: length mismatch");
    if (preds.empty()) return 0.0;
    size_t wrong = 0;
    for (size_t i = 0; i < preds.size(); ++i)
        if (preds[i] != reals[i]) ++wrong;
    return static_cast<double>(wrong) / preds.size();
}

struct ConfusionMatrix {
    std::vector<std::string> categories;
    std::vector<size_t> counts;  // row = true, col = predicted

    explicit ConfusionMatrix(std::vector<std::string> cats = {})
        : categories(std::move(cats)), counts(categories.size() * categories.size(), 0) {}

    size_t index_of(const std::string& c) const {
        auto it = std::find(categories.begin(), categories.end(), c);
        if (it == categories.end()) throw std::invalid_argument("unknown category: " + c);
        return static_cast<size_t>(it - categories.begin());
    }
    void add(const std::string& truth, const std::string& pred, size_t n = 1) {
        counts[index_of(truth) * categories.size() + index_of(pred)] += n;
    }
    size_t at(size_t i, size_t j) const { return counts[i * categories.size() + j]; }
    size_t total() const {
        size_t t = 0;
        for (size_t c : counts) t += c;
        return t;
    }
};

struct CategoryMetrics {
    std::optional<double> recall, precision, f1;
};

struct ClassificationReport {
    double accuracy = 0;
    std::vector<CategoryMetrics> per_category;
};

inline ClassificationReport classification_metrics(const ConfusionMatrix& cm) {
    size_t k = cm.categories.size();
    if (k == 0 || cm.total() == 0) throw std::invalid_argument("empty confusion matrix");
    ClassificationReport rep;
    size_t diag = 0;
    rep.per_category.resize(k);
    for (size_t i = 0; i < k; ++i) {
        diag += cm.at(i, i);
        size_t row = 0, col = 0;
        for (size_t j = 0; j < k; ++j) {
            row += cm.at(i, j);
            col += cm.at(j, i);
        }
        auto& m = rep.per_category[i];
        if (row) m.recall = static_cast<double>(cm.at(i, i)) / row;
        if (col) m.precision = static_cast<double>(cm.at(i, i)) / col;
        if (m.recall && m.precision && (*m.recall + *m.precision) > 0)
            m.f1 = 2 * (*m.recall) * (*m.precision) / (*m.recall + *m.precision);
    }
    rep.accuracy = static_cast<double>(diag) / cm.total();
    return rep;
}

struct RocPoint {
    double threshold, fpr, tpr;
};

struct RocResult {
    std::vector<RocPoint> curve;
    double auc = 0;
};

// Curve swept over distinct score thresholds (descending); ties grouped, so a
// constant score yields the two-point diagonal and AUC 0.5.
inline RocResult roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
    size_t pos = 0, neg = 0;
    for (bool b : labels) (b ? pos : neg)++;
    if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: need both classes");

    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    RocResult r;
    r.curve.push_back({scores[order[0]] + 1, 0.0, 0.0});
    size_t tp = 0, fp = 0;
    double prev_fpr = 0, prev_tpr = 0;
    size_t i = 0;
    while (i < order.size()) {
        double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] ? tp : fp)++;
            ++i;
        }
        double fpr = static_cast<double>(fp) / neg;
        double tpr = static_cast<double>(tp) / pos;
        r.curve.push_back({s, fpr, tpr});
        r.auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2;
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    return r;
}

struct BootstrapCI {
    double point = 0, lower = 0, upper = 0;
    double confidence = 0;
    size_t resamples = 0;
};

inline double percentile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0;
    double pos = q * (sorted.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    size_t hi = std::min(lo + 1, sorted.size() - 1);
    double t = pos - lo;
    return sorted[lo] * (1 - t) + sorted[hi] * t;
}

// Percentile bootstrap over with-replacement resamples of per-sample values.
inline BootstrapCI bootstrap_ci(const std::vector<double>& values, size_t n_resamples, double confidence, Rng& rng) {
    if (values.size() < 2) throw std::invalid_argument("bootstrap_ci: need at least 2 samples");
    if (n_resamples < 100) throw std::invalid_argument("bootstrap_ci: need at least 100 resamples");
    double point = 0;
    for (double v : values) point += v;
    point /= values.size();
    std::vector<double> stats(n_resamples);
    for (size_t r = 0; r < n_resamples; ++r) {
        double acc = 0;
        for (size_t i = 0; i < values.size(); ++i) acc += values[rng.uniform_int(values.size())];
        stats[r] = acc / values.size();
    }
    std::sort(stats.begin(), stats.end());
    double alpha = (1 - confidence) / 2;
    return {point, percentile_sorted(stats, alpha), percentile_sorted(stats, 1 - alpha), confidence, n_resamples};
}

// Same, but resampling (pred, ref) pairs under an arbitrary corpus metric.
inline BootstrapCI bootstrap_ci_pairs(const std::vector<std::string>& preds, const std::vector<std::string>& reals,
                                      const std::function<double(const std::vector<std::string>&, const std::vector<std::string>&)>& metric,
                                      size_t n_resamples, double confidence, Rng& rng) {
    if (preds.size() != reals.size() || preds.size() < 2) throw std::invalid_argument("bootstrap_ci_pairs: bad sample");
    if (n_resamples < 100) throw std::invalid_argument("bootstrap_ci_pairs: need at least 100 resamples");
    double point = metric(preds, reals);
    std::vector<double> stats(n_resamples);
    std::vector<std::string> p(preds.size()), q(preds.size());
    for (size_t r = 0; r < n_resamples; ++r) {
        for (size_t i = 0; i < preds.size(); ++i) {
            size_t j = rng.uniform_int(preds.size());
            p[i] = preds[j];
            q[i] = reals[j];
        }
        stats[r] = metric(p, q);
    }
    std::sort(stats.begin(), stats.end());
    double alpha = (1 - confidence) / 2;
    return {point, percentile_sorted(stats, alpha), percentile_sorted(stats, 1 - alpha), confidence, n_resamples};
}

}  // namespace inkline
