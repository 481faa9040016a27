#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mrseq/imaging.hpp"

using namespace mrseq;
using dicom::ImageMatrix;
using dicom::InstanceMetadata;
using dicom::SeriesRecord;

namespace {

void set_pixels(InstanceMetadata& m, const ImageMatrix<float>& img) {
  m.rows = static_cast<int>(img.rows());
  m.cols = static_cast<int>(img.cols());
  m.pixel_payload.clear();
  for (Eigen::Index r = 0; r < img.rows(); ++r)
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      auto v = static_cast<std::uint16_t>(img(r, c));
      m.pixel_payload.push_back(static_cast<std::uint8_t>(v & 0xFF));
      m.pixel_payload.push_back(static_cast<std::uint8_t>(v >> 8));
    }
  m.has_pixel_payload = true;
}

// `n` located instances at 3 mm spacing, each with a constant image whose
// value identifies its index.
SeriesRecord slice_stack(int n, bool with_pixels = true) {
  SeriesRecord s;
  s.series_instance_uid = "s";
  for (int i = 0; i < n; ++i) {
    InstanceMetadata m;
    m.series_instance_uid = "s";
    m.sop_instance_uid = "s." + std::to_string(i);
    Eigen::Matrix<double, 6, 1> iop;
    iop << 1, 0, 0, 0, 1, 0;
    m.image_orientation_patient = iop;
    m.image_position_patient = Eigen::Vector3d(0, 0, 3.0 * i);
    if (with_pixels) set_pixels(m, ImageMatrix<float>::Constant(4, 4, static_cast<float>(i)));
    s.instances.push_back(std::move(m));
  }
  return s;
}

ImageMatrix<float> mat2x2(float a, float b, float c, float d) {
  ImageMatrix<float> m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST_CASE("3D center slice is the middle of the offset-ordered stack") {
  auto s = slice_stack(5);
  auto g = geom::compute_geometry(s);
  CHECK(img::center_instance(s, g).sop_instance_uid == "s.2");

  s = slice_stack(4);
  g = geom::compute_geometry(s);
  CHECK(img::center_instance(s, g).sop_instance_uid == "s.2");

  s = slice_stack(1);
  g = geom::compute_geometry(s);
  CHECK(img::center_instance(s, g).sop_instance_uid == "s.0");
}

TEST_CASE("4D center slice is the middle position of the first volume") {
  SeriesRecord s;
  s.series_instance_uid = "s";
  // Offset-then-temporal order, as series grouping produces.
  for (int p = 0; p < 3; ++p) {
    for (int t = 0; t < 5; ++t) {
      InstanceMetadata m;
      m.series_instance_uid = "s";
      m.sop_instance_uid = "s.p" + std::to_string(p) + ".t" + std::to_string(t);
      Eigen::Matrix<double, 6, 1> iop;
      iop << 1, 0, 0, 0, 1, 0;
      m.image_orientation_patient = iop;
      m.image_position_patient = Eigen::Vector3d(0, 0, 3.0 * p);
      m.temporal_position = t + 1;
      set_pixels(m, ImageMatrix<float>::Constant(4, 4, 1.0f));
      s.instances.push_back(std::move(m));
    }
  }
  auto g = geom::compute_geometry(s);
  REQUIRE(g.is4d);
  REQUIRE(g.distinct_positions == 3);
  CHECK(img::center_instance(s, g).sop_instance_uid == "s.p1.t0");
}

TEST_CASE("a pixel-less center falls back to the nearest instance with pixels") {
  auto s = slice_stack(5);
  s.instances[2].has_pixel_payload = false;
  s.instances[2].pixel_payload.clear();
  auto g = geom::compute_geometry(s);
  // Equidistant neighbors resolve to the later index first.
  CHECK(img::center_instance(s, g).sop_instance_uid == "s.3");

  s.instances[3].has_pixel_payload = false;
  CHECK(img::center_instance(s, g).sop_instance_uid == "s.1");
}

TEST_CASE("a series with no pixels anywhere cannot provide a slice") {
  auto s = slice_stack(3, false);
  auto g = geom::compute_geometry(s);
  CHECK_THROWS_AS((void)img::center_instance(s, g), NoPixelData);

  SeriesRecord empty;
  empty.series_instance_uid = "s";
  CHECK_THROWS_AS((void)img::center_instance(empty, geom::SeriesGeometry{}), NoPixelData);
}

TEST_CASE("resampling to the input size is a bitwise pass-through") {
  SeededRng rng(11);
  ImageMatrix<float> in(64, 64);
  for (Eigen::Index r = 0; r < 64; ++r)
    for (Eigen::Index c = 0; c < 64; ++c)
      in(r, c) = static_cast<float>(rng.uniform(0, 4096));
  auto out = img::resample_bilinear(in, 64, 64);
  CHECK((out.array() == in.array()).all());
}

TEST_CASE("corner-aligned upsampling interpolates known values") {
  auto in = mat2x2(0, 100, 100, 200);
  auto out = img::resample_bilinear(in, 3, 3);
  CHECK(out(0, 0) == 0.0f);
  CHECK(out(0, 1) == 50.0f);
  CHECK(out(0, 2) == 100.0f);
  CHECK(out(1, 0) == 50.0f);
  CHECK(out(1, 1) == 100.0f);  // (0+100+100+200)/4
  CHECK(out(2, 2) == 200.0f);

  ImageMatrix<float> row(1, 2);
  row << 0, 100;
  auto wide = img::resample_bilinear(row, 1, 5);
  CHECK(wide(0, 0) == 0.0f);
  CHECK(wide(0, 2) == 50.0f);
  CHECK(wide(0, 4) == 100.0f);
}

TEST_CASE("a 1x1 output samples the input center") {
  auto out = img::resample_bilinear(mat2x2(0, 100, 100, 200), 1, 1);
  CHECK(out(0, 0) == 100.0f);
}

TEST_CASE("resampled values stay inside the input range") {
  SeededRng rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    int h = 1 + static_cast<int>(rng.next_below(40));
    int w = 1 + static_cast<int>(rng.next_below(40));
    ImageMatrix<float> in(h, w);
    for (Eigen::Index r = 0; r < h; ++r)
      for (Eigen::Index c = 0; c < w; ++c)
        in(r, c) = static_cast<float>(rng.uniform(-1000, 1000));
    int oh = 1 + static_cast<int>(rng.next_below(80));
    int ow = 1 + static_cast<int>(rng.next_below(80));
    auto out = img::resample_bilinear(in, oh, ow);
    CHECK(out.minCoeff() >= in.minCoeff() - 1e-3f);
    CHECK(out.maxCoeff() <= in.maxCoeff() + 1e-3f);
  }
}

TEST_CASE("resampling commutes with affine intensity changes") {
  SeededRng rng(31);
  ImageMatrix<float> in(7, 9);
  for (Eigen::Index r = 0; r < 7; ++r)
    for (Eigen::Index c = 0; c < 9; ++c) in(r, c) = static_cast<float>(rng.uniform(0, 100));
  auto direct = img::resample_bilinear<float>((in * 3.0f).eval(), 20, 20);
  auto after = (img::resample_bilinear(in, 20, 20) * 3.0f).eval();
  CHECK((direct - after).cwiseAbs().maxCoeff() < 1e-3f);
}

TEST_CASE("min-max normalization maps extremes to 0 and 1") {
  ImageMatrix<float> in(2, 2);
  in << 1, 2, 3, 5;
  auto out = img::normalize01(in);
  CHECK(out(0, 0) == 0.0f);
  CHECK(out(0, 1) == 0.25f);
  CHECK(out(1, 0) == 0.5f);
  CHECK(out(1, 1) == 1.0f);

  auto flat = img::normalize01<float>(ImageMatrix<float>::Constant(3, 3, 7.0f));
  CHECK((flat.array() == 0.0f).all());

  ImageMatrix<float> empty;
  CHECK_THROWS_AS((void)img::normalize01(empty), EmptyImage);
  CHECK_THROWS_AS((void)img::resample_bilinear(empty), EmptyImage);
  CHECK_THROWS_AS((void)img::resample_bilinear(in, 0, 4), EmptyImage);
}

TEST_CASE("prepare_input yields a normalized square of the requested size") {
  SeriesRecord s;
  s.series_instance_uid = "s";
  InstanceMetadata m;
  m.series_instance_uid = "s";
  m.sop_instance_uid = "s.0";
  ImageMatrix<float> grad(30, 40);
  for (Eigen::Index r = 0; r < 30; ++r)
    for (Eigen::Index c = 0; c < 40; ++c) grad(r, c) = static_cast<float>(r * 40 + c);
  set_pixels(m, grad);
  s.instances.push_back(std::move(m));

  auto g = geom::compute_geometry(s);
  auto in = img::prepare_input<float>(s, g);
  REQUIRE(in.rows() == img::kInputSize);
  REQUIRE(in.cols() == img::kInputSize);
  CHECK(in.minCoeff() == 0.0f);
  CHECK(in.maxCoeff() == 1.0f);

  auto small = img::prepare_input<float>(s, g, 8);
  CHECK(small.rows() == 8);
}

TEST_CASE("PGM dump writes the declared header and clamped bytes") {
  ImageMatrix<float> in(1, 4);
  in << 0.0f, 0.5f, 1.0f, 2.0f;  // last overflows and must clamp
  std::string path = "test_imaging_dump.pgm";
  img::write_pgm(path, in);
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::string header;
  std::getline(f, header);
  CHECK(header == "P5");
  std::string dims, maxval;
  std::getline(f, dims);
  std::getline(f, maxval);
  CHECK(dims == "4 1");
  CHECK(maxval == "255");
  unsigned char px[4];
  f.read(reinterpret_cast<char*>(px), 4);
  CHECK(px[0] == 0);
  CHECK(px[1] == 128);
  CHECK(px[2] == 255);
  CHECK(px[3] == 255);
  f.close();
  std::remove(path.c_str());
}
