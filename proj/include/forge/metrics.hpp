#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "forge/error.hpp"
#include "forge/providers.hpp"

namespace forge {

// Per-label tallies backing macro-F1.
struct LabelCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  bool operator==(const LabelCounts&) const = default;
};

struct ConfusionCounts {
  std::map<std::string, LabelCounts> per_label;
  bool operator==(const ConfusionCounts&) const = default;
};

inline double cosine_similarity(const EmbeddingVector& a,
                                const EmbeddingVector& b) {
  if (a.dim != b.dim)
    throw ValidationError("cosine_similarity: dimension mismatch (" +
                          std::to_string(a.dim) + " vs " +
                          std::to_string(b.dim) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int i = 0; i < a.dim; ++i) {
    const double x = a.values[static_cast<size_t>(i)];
    const double y = b.values[static_cast<size_t>(i)];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0)
    throw ValidationError("cosine_similarity: zero vector");
  if (a.values == b.values) return 1.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// exp(-(1/N) * sum(logprob)); natural log throughout.
inline double perplexity(const std::vector<TokenScore>& scored) {
  if (scored.empty()) throw ValidationError("perplexity: empty input");
  double sum = 0.0;
  for (const auto& ts : scored) {
    if (ts.logprob > 0.0)
      throw ValidationError("perplexity: positive log-probability for token " +
                            ts.token);
    sum += ts.logprob;
  }
  return std::exp(-sum / static_cast<double>(scored.size()));
}

// Mean distance from each new vector to its nearest base vector.
inline double diversity_gain(const std::vector<EmbeddingVector>& base,
                             const std::vector<EmbeddingVector>& added) {
  if (base.empty()) throw ValidationError("diversity_gain: empty base set");
  if (added.empty()) throw ValidationError("diversity_gain: empty new set");
  double total = 0.0;
  for (const auto& x : added) {
    double best = -1.0;
    for (const auto& y : base) {
      if (x.dim != y.dim)
        throw ValidationError("diversity_gain: dimension mismatch");
      double dist2 = 0.0;
      for (int i = 0; i < x.dim; ++i) {
        const double d = x.values[static_cast<size_t>(i)] -
                         y.values[static_cast<size_t>(i)];
        dist2 += d * d;
      }
      const double dist = std::sqrt(dist2);
      if (best < 0.0 || dist < best) best = dist;
    }
    total += best;
  }
  return total / static_cast<double>(added.size());
}

// Unweighted mean of per-label F1 over label_set. 0/0 precision or recall
// counts as 0.
inline double macro_f1_from_counts(const ConfusionCounts& counts,
                                   const std::vector<std::string>& label_set) {
  if (label_set.empty()) throw ValidationError("macro_f1: empty label set");
  double sum = 0.0;
  for (const auto& label : label_set) {
    LabelCounts c;
    auto it = counts.per_label.find(label);
    if (it != counts.per_label.end()) c = it->second;
    const double precision =
        (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) /
                                static_cast<double>(c.tp + c.fp)
                          : 0.0;
    const double recall =
        (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) /
                                static_cast<double>(c.tp + c.fn)
                          : 0.0;
    const double f1 = (precision + recall) > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    sum += f1;
  }
  return sum / static_cast<double>(label_set.size());
}

inline ConfusionCounts confusion_counts(
    const std::vector<std::string>& gold,
    const std::vector<std::string>& pred,
    const std::vector<std::string>& label_set) {
  if (gold.size() != pred.size())
    throw ValidationError("macro_f1: gold/pred length mismatch");
  if (gold.empty()) throw ValidationError("macro_f1: empty inputs");
  std::map<std::string, bool> known;
  for (const auto& l : label_set) known[l] = true;
  ConfusionCounts counts;
  for (const auto& l : label_set) counts.per_label[l];  // ensure all present
  for (size_t i = 0; i < gold.size(); ++i) {
    if (!known.count(gold[i]))
      throw ValidationError("macro_f1: gold label not in label set: " +
                            gold[i]);
    if (pred[i] == gold[i]) {
      counts.per_label[gold[i]].tp++;
    } else {
      counts.per_label[gold[i]].fn++;
      // Predictions outside the label set (e.g. unparsable output) credit
      // no label at all.
      if (known.count(pred[i])) counts.per_label[pred[i]].fp++;
    }
  }
  return counts;
}

inline double macro_f1(const std::vector<std::string>& gold,
                       const std::vector<std::string>& pred,
                       const std::vector<std::string>& label_set) {
  return macro_f1_from_counts(confusion_counts(gold, pred, label_set),
                              label_set);
}

// (candidate wins - baseline wins) / total questions.
inline double win_rate(int wins_candidate, int wins_baseline, int total) {
  if (total <= 0) throw ValidationError("win_rate: total must be positive");
  if (wins_candidate < 0 || wins_baseline < 0)
    throw ValidationError("win_rate: negative win count");
  if (wins_candidate + wins_baseline > total)
    throw ValidationError("win_rate: win counts exceed total");
  return static_cast<double>(wins_candidate - wins_baseline) /
         static_cast<double>(total);
}

}  // namespace forge
