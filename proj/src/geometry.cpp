#include "mrseq/geometry.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace mrseq::geom {

const char* to_string(Orientation o) {
  switch (o) {
    case Orientation::Axial: return "Axial";
    case Orientation::Sagittal: return "Sagittal";
    case Orientation::Coronal: return "Coronal";
    case Orientation::Oblique: return "Oblique";
    case Orientation::Unknown: return "Unknown";
  }
  return "?";
}

Eigen::Vector3d slice_normal(const Eigen::Matrix<double, 6, 1>& orientation) {
  Eigen::Vector3d row = orientation.head<3>();
  Eigen::Vector3d col = orientation.tail<3>();
  if (row.norm() <= 1e-6 || col.norm() <= 1e-6)
    throw DegenerateOrientation("near-zero direction cosine vector");
  Eigen::Vector3d n = row.normalized().cross(col.normalized());
  if (n.norm() < 1e-6)
    throw DegenerateOrientation("near-parallel direction cosine vectors");
  return n.normalized();
}

Orientation classify_orientation(const Eigen::Vector3d& normal) {
  Eigen::Vector3d n = normal;
  double len = n.norm();
  if (len <= 0.0 || !std::isfinite(len)) return Orientation::Unknown;
  n /= len;
  int axis = 0;
  n.cwiseAbs().maxCoeff(&axis);
  if (std::abs(n[axis]) < 0.9) return Orientation::Oblique;
  switch (axis) {
    case 0: return Orientation::Sagittal;
    case 1: return Orientation::Coronal;
    default: return Orientation::Axial;
  }
}

SeriesGeometry compute_geometry(const dicom::SeriesRecord& series, double overlap_tol) {
  SeriesGeometry g;
  const std::size_t n = series.instances.size();
  g.offsets.assign(n, 0.0);
  g.position_cluster.assign(n, -1);

  for (const auto& inst : series.instances) {
    if (!inst.image_orientation_patient) continue;
    try {
      g.normal = slice_normal(*inst.image_orientation_patient);
      break;
    } catch (const DegenerateOrientation&) {
      // keep scanning; a later instance may carry a usable orientation
    }
  }
  g.orientation_class = g.normal ? classify_orientation(*g.normal) : Orientation::Unknown;

  if (!g.normal) {
    g.is4d = false;
    g.distinct_positions = static_cast<int>(std::max<std::size_t>(n, 1));
    return g;
  }

  std::vector<std::size_t> located;  // instance indices with a position
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = series.instances[i];
    if (inst.image_position_patient) {
      g.offsets[i] = g.normal->dot(*inst.image_position_patient);
      located.push_back(i);
    }
  }

  std::sort(located.begin(), located.end(), [&](std::size_t a, std::size_t b) {
    if (g.offsets[a] != g.offsets[b]) return g.offsets[a] < g.offsets[b];
    return a < b;
  });

  int cluster = -1;
  double cluster_end = 0.0;
  int cluster_size = 0;
  bool any_overlap = false;
  for (std::size_t k = 0; k < located.size(); ++k) {
    double off = g.offsets[located[k]];
    if (cluster < 0 || off - cluster_end > overlap_tol) {
      ++cluster;
      cluster_size = 0;
    }
    cluster_end = off;
    ++cluster_size;
    if (cluster_size >= 2) any_overlap = true;
    g.position_cluster[located[k]] = cluster;
  }

  const int located_clusters = located.empty() ? 0 : cluster + 1;
  const int unlocated = static_cast<int>(n - located.size());
  g.is4d = any_overlap;
  g.distinct_positions = std::max(located_clusters + unlocated, 1);
  return g;
}

}  // namespace mrseq::geom
