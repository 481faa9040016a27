// Confusion matrices, per-class precision/recall/F-beta, and the CSV report
// writers (per-class score table plus full confusion matrix).
#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mrseq/common.hpp"

namespace mrseq::eval {

using Confusion = Eigen::Matrix<std::int64_t, kNumClasses, kNumClasses>;  // rows=truth, cols=pred

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct EvaluationReport {
  Confusion confusion = Confusion::Zero();
  std::array<ClassMetrics, kNumClasses> per_class{};
  double beta = 1.0;
  std::string split_name;
};

// counts[truth][pred] += 1 per pair. Throws BadLabel outside {0..3}.
Confusion confusion_matrix(const std::vector<std::pair<int, int>>& pairs);

// (1+b^2)PR / (b^2 P + R); any zero denominator along the way gives 0.
double f_beta(const Confusion& m, int cls, double beta);

EvaluationReport report(const std::vector<int>& truths, const std::vector<int>& preds,
                        double beta, const std::string& split_name);

// One row per class: method,split,class,f_beta.
std::string report_csv(const std::string& method, const EvaluationReport& rep,
                       std::uint64_t seed, std::string_view config_hash);

// truth rows x predicted columns, labeled both ways.
std::string confusion_csv(const std::string& method, const EvaluationReport& rep,
                          std::uint64_t seed, std::string_view config_hash);

}  // namespace mrseq::eval
