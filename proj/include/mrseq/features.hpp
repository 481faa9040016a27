// Metadata feature engineering: per-series raw attribute extraction (median
// across instances), z-score scaling fitted on training data, and the fixed
// 10-slot feature vector consumed by both classifiers.
//
// Slot order: [TR, TE, FA (scaled), has_SE, has_GR, has_EP, has_IR, has_RM,
// contrast_present, is4d].
#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "mrseq/common.hpp"
#include "mrseq/dicom.hpp"
#include "mrseq/geometry.hpp"

namespace mrseq::feat {

struct RawMetadata {
  std::optional<double> repetition_time;  // ms
  std::optional<double> echo_time;        // ms
  std::optional<double> flip_angle;       // degrees
  std::vector<std::string> scanning_sequence;  // sorted unique codes
  bool contrast_present = false;
  bool is4d = false;

  bool operator==(const RawMetadata&) const = default;
};

// Per-attribute z-score statistics. Missing values fill with the mean, so
// they scale to 0. A column that never appears in training keeps mean 0 /
// std 1 and is flagged degenerate; a constant column keeps its mean with
// std falling back to 1.
struct AxisScaling {
  double mean = 0.0;
  double stddev = 1.0;
  bool degenerate = false;

  bool operator==(const AxisScaling&) const = default;
};

struct ScalingParams {
  AxisScaling tr, te, fa;

  bool operator==(const ScalingParams&) const = default;
};

inline constexpr int kFeatureDim = 10;
using FeatureVector = Eigen::Matrix<double, kFeatureDim, 1>;

// Codes mapped to presence flags, in slot order 3..7.
inline constexpr const char* kSequenceCodes[5] = {"SE", "GR", "EP", "IR", "RM"};

// Numeric attributes = median over instances where present; scanning
// sequence = sorted union of per-instance codes; contrast_present = any
// instance with a nonempty agent other than "NONE" (case-insensitive).
RawMetadata extract_raw(const dicom::SeriesRecord& series, const geom::SeriesGeometry& geometry);

// Population statistics over present values only. Throws EmptyTrainingSet.
ScalingParams fit_scaler(const std::vector<RawMetadata>& train);

// Total and deterministic: every RawMetadata maps to a finite vector.
FeatureVector vectorize(const RawMetadata& raw, const ScalingParams& scaler);

// Versioned JSON round-trip, embedded in every persisted model.
std::string scaler_to_json(const ScalingParams& scaler);
ScalingParams scaler_from_json(std::string_view text);

}  // namespace mrseq::feat
