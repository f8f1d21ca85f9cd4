#include "tinc/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace tinc {

namespace {

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b || a == 0) throw std::invalid_argument("metrics: size mismatch or empty input");
}

std::pair<std::int64_t, std::int64_t> class_counts(const std::vector<int>& labels) {
  std::int64_t pos = 0, neg = 0;
  for (int l : labels) (l ? pos : neg)++;
  return {pos, neg};
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_sizes(scores.size(), labels.size());
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: both classes required");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // rank-sum with midranks for tie groups
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = 0.5 * double(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]]) rank_sum_pos += midrank;
    i = j;
  }
  return (rank_sum_pos - 0.5 * double(pos) * double(pos + 1)) / (double(pos) * double(neg));
}

double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_sizes(scores.size(), labels.size());
  const auto [pos, neg] = class_counts(labels);
  (void)neg;
  if (pos == 0) throw std::invalid_argument("pr_auc: at least one positive required");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double ap = 0.0, prev_recall = 0.0;
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) (labels[idx[k]] ? tp : fp)++;
    const double recall = double(tp) / double(pos);
    const double precision = double(tp) / double(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double balanced_accuracy(const std::vector<double>& predictions, const std::vector<int>& labels) {
  check_sizes(predictions.size(), labels.size());
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw std::invalid_argument("balanced_accuracy: both classes required");
  std::int64_t tp = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred_pos = predictions[i] >= 0.5;
    if (labels[i] && pred_pos) ++tp;
    if (!labels[i] && !pred_pos) ++tn;
  }
  return 0.5 * (double(tp) / double(pos) + double(tn) / double(neg));
}

double concordance_index(const std::vector<double>& times, const std::vector<double>& values) {
  check_sizes(times.size(), values.size());
  if (times.size() < 2) throw std::invalid_argument("concordance_index: >= 2 entries required");
  double concordant = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < times.size(); ++i)
    for (std::size_t j = i + 1; j < times.size(); ++j) {
      if (times[i] == times[j]) throw std::invalid_argument("concordance_index: times must be distinct");
      const bool i_earlier = times[i] < times[j];
      const double lo = i_earlier ? values[i] : values[j];
      const double hi = i_earlier ? values[j] : values[i];
      ++pairs;
      if (hi > lo)
        concordant += 1.0;
      else if (hi == lo)
        concordant += 0.5;
    }
  return concordant / double(pairs);
}

}  // namespace tinc
