#pragma once

#include <vector>

#include "tinc/cohort.hpp"

namespace tinc {

enum class Label { negative, positive, excluded };

struct LabelledScan {
  VisitRecord visit;
  Label label = Label::negative;
};

// Conversion label per visit: with conversion month c and visit month t,
//   c - t > horizon   -> negative
//   0 <= c - t <= horizon -> positive
//   c - t < 0         -> excluded (already converted)
// and eyes without a conversion are negative throughout.
std::vector<LabelledScan> assign_labels(const EyeSeries& eye, int horizon_months = 6);

}  // namespace tinc
