// Image input preparation: center-slice selection, align-corners bilinear
// resampling to 64x64, min-max normalization to [0,1], and a PGM debug dump.
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "mrseq/common.hpp"
#include "mrseq/dicom.hpp"
#include "mrseq/geometry.hpp"

namespace mrseq::img {

using dicom::ImageMatrix;

inline constexpr int kInputSize = 64;

// Picks the representative instance: index floor(n/2) of the offset-ordered
// instances for 3D series; for 4D series, the spatially-middle position
// cluster of the first temporal volume. When the chosen instance carries no
// pixel payload the nearest one that does is used instead, so the operation
// is total whenever any instance has pixels.
inline const dicom::InstanceMetadata& center_instance(const dicom::SeriesRecord& series,
                                                      const geom::SeriesGeometry& geometry) {
  const auto& insts = series.instances;
  if (insts.empty()) throw NoPixelData("series has no instances");

  std::ptrdiff_t chosen = -1;
  if (geometry.is4d && geometry.distinct_positions > 0) {
    int target_cluster = geometry.distinct_positions / 2;
    // Instances are offset-then-temporal ordered, so the first member of the
    // cluster belongs to the first temporal volume.
    for (std::size_t i = 0; i < insts.size(); ++i) {
      if (i < geometry.position_cluster.size() &&
          geometry.position_cluster[i] == target_cluster) {
        chosen = static_cast<std::ptrdiff_t>(i);
        break;
      }
    }
  }
  if (chosen < 0) chosen = static_cast<std::ptrdiff_t>(insts.size() / 2);

  if (insts[static_cast<std::size_t>(chosen)].has_pixel_payload)
    return insts[static_cast<std::size_t>(chosen)];
  for (std::ptrdiff_t d = 1; d < static_cast<std::ptrdiff_t>(insts.size()); ++d) {
    for (std::ptrdiff_t k : {chosen + d, chosen - d}) {
      if (k >= 0 && k < static_cast<std::ptrdiff_t>(insts.size()) &&
          insts[static_cast<std::size_t>(k)].has_pixel_payload)
        return insts[static_cast<std::size_t>(k)];
    }
  }
  throw NoPixelData("series " + series.series_instance_uid + " has no pixel data");
}

inline ImageMatrix<float> center_slice(const dicom::SeriesRecord& series,
                                       const geom::SeriesGeometry& geometry) {
  return dicom::read_pixels(center_instance(series, geometry));
}

// Align-corners mapping: source coord = out_i * (in-1)/(out-1); a 1-wide
// output samples the input center. Exact pass-through when sizes match.
template <class Scalar>
ImageMatrix<Scalar> resample_bilinear(const ImageMatrix<Scalar>& in, int out_h = kInputSize,
                                      int out_w = kInputSize) {
  const int in_h = static_cast<int>(in.rows());
  const int in_w = static_cast<int>(in.cols());
  if (in_h < 1 || in_w < 1) throw EmptyImage("resample input is empty");
  if (out_h < 1 || out_w < 1) throw EmptyImage("resample output extent < 1");

  ImageMatrix<Scalar> out(out_h, out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    double sy = out_h == 1 ? (in_h - 1) / 2.0
                           : static_cast<double>(oy) * (in_h - 1) / (out_h - 1);
    int y0 = static_cast<int>(std::floor(sy));
    int y1 = std::min(y0 + 1, in_h - 1);
    double fy = sy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      double sx = out_w == 1 ? (in_w - 1) / 2.0
                             : static_cast<double>(ox) * (in_w - 1) / (out_w - 1);
      int x0 = static_cast<int>(std::floor(sx));
      int x1 = std::min(x0 + 1, in_w - 1);
      double fx = sx - x0;
      double v = (1 - fy) * ((1 - fx) * in(y0, x0) + fx * in(y0, x1)) +
                 fy * ((1 - fx) * in(y1, x0) + fx * in(y1, x1));
      out(oy, ox) = static_cast<Scalar>(v);
    }
  }
  return out;
}

// (v - min) / (max - min); a constant image maps to all zeros.
template <class Scalar>
ImageMatrix<Scalar> normalize01(const ImageMatrix<Scalar>& in) {
  if (in.size() == 0) throw EmptyImage("normalize input is empty");
  Scalar lo = in.minCoeff();
  Scalar hi = in.maxCoeff();
  if (!(hi > lo)) return ImageMatrix<Scalar>::Zero(in.rows(), in.cols());
  return ((in.array() - lo) / (hi - lo)).matrix();
}

// center_slice -> resample -> normalize, as the classifiers consume it.
template <class Scalar>
ImageMatrix<Scalar> prepare_input(const dicom::SeriesRecord& series,
                                  const geom::SeriesGeometry& geometry,
                                  int size = kInputSize) {
  ImageMatrix<Scalar> slice = center_slice(series, geometry).template cast<Scalar>();
  return normalize01(resample_bilinear(slice, size, size));
}

// 8-bit binary PGM for visual inspection of preprocessed slices.
template <class Scalar>
void write_pgm(const std::string& path, const ImageMatrix<Scalar>& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < img.rows(); ++r)
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      double v = std::clamp(static_cast<double>(img(r, c)), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<int>(std::lround(v * 255.0))));
    }
}

}  // namespace mrseq::img
