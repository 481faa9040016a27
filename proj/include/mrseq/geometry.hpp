// Slice geometry per series: slice normal, scalar offsets along it,
// orientation class, and the 4D flag (spatially overlapping slices).
#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "mrseq/dicom.hpp"

namespace mrseq::geom {

enum class Orientation { Axial, Sagittal, Coronal, Oblique, Unknown };

const char* to_string(Orientation o);

struct SeriesGeometry {
  std::optional<Eigen::Vector3d> normal;  // unit when present
  std::vector<double> offsets;            // one per instance, instance-ordered; 0 when unprojectable
  std::vector<int> position_cluster;      // cluster id per instance (ascending offset order), -1 when no position
  Orientation orientation_class = Orientation::Unknown;
  bool is4d = false;
  int distinct_positions = 1;
};

// Cross product of the row and column direction cosines, normalized.
// Throws DegenerateOrientation for near-zero or near-parallel cosines.
Eigen::Vector3d slice_normal(const Eigen::Matrix<double, 6, 1>& orientation);

// Dominant absolute component of the normal decides the class; anything
// with max |component| < 0.9 is Oblique. Sign-invariant.
Orientation classify_orientation(const Eigen::Vector3d& normal);

// Total over degenerate input: missing orientation gives Unknown and
// is4d=false, never a failure. Offsets are clustered along the normal with
// `overlap_tol` (single pass over sorted offsets, new cluster when the gap
// exceeds the tolerance); is4d is true iff any cluster holds >= 2 instances.
inline constexpr double kDefaultOverlapTolMm = 0.01;
SeriesGeometry compute_geometry(const dicom::SeriesRecord& series,
                                double overlap_tol = kDefaultOverlapTolMm);

}  // namespace mrseq::geom
