#include "tinc/labels.hpp"

namespace tinc {

std::vector<LabelledScan> assign_labels(const EyeSeries& eye, int horizon_months) {
  std::vector<LabelledScan> out;
  out.reserve(eye.visits.size());
  for (const auto& v : eye.visits) {
    Label label = Label::negative;
    if (eye.conversion_month) {
      const int delta = *eye.conversion_month - v.visit_month;
      if (delta < 0)
        label = Label::excluded;
      else if (delta <= horizon_months)
        label = Label::positive;
    }
    out.push_back({v, label});
  }
  return out;
}

}  // namespace tinc
