#pragma once

#include <vector>

namespace tinc {

// Mann-Whitney ROCAUC: probability a random positive outranks a random
// negative, ties counted 0.5. Labels are 0/1; both classes required.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Average precision: step-wise integration of precision over recall at each
// distinct descending score threshold. At least one positive required.
double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Mean of the two class recalls at probability threshold 0.5.
double balanced_accuracy(const std::vector<double>& predictions, const std::vector<int>& labels);

// Fraction of time-ordered pairs with strictly increasing values; value ties
// count 0.5. Times must be distinct, >= 2 entries.
double concordance_index(const std::vector<double>& times, const std::vector<double>& values);

}  // namespace tinc
