#include "mrseq/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include <json.hpp>

namespace mrseq::synth {

const char* to_string(Texture t) {
  switch (t) {
    case Texture::Ellipse: return "ellipse";
    case Texture::Blob: return "blob";
    case Texture::Smooth: return "smooth";
    case Texture::Ring: return "ring";
  }
  return "?";
}

namespace {

Texture texture_from_string(const std::string& s) {
  if (s == "ellipse") return Texture::Ellipse;
  if (s == "blob") return Texture::Blob;
  if (s == "smooth") return Texture::Smooth;
  if (s == "ring") return Texture::Ring;
  throw MalformedJson("unknown texture '" + s + "'");
}

double round_to(double v, int decimals) {
  double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

// Exact-rate rotation over patients: any 10 consecutive patient indices hit
// the rate precisely, so small cohorts can't drift from the profile rate.
bool rotation_hit(int patient_idx, double rate) {
  int count = static_cast<int>(std::lround(rate * 10.0));
  count = std::clamp(count, 0, 10);
  return (patient_idx * 7 + 3) % 10 < count;
}

struct TextureParams {
  double cx, cy;       // center, relative
  double r1, r2;       // primary radii, relative
  double fill, bg;     // intensities
  double noise;        // gaussian sigma
  double grad_x, grad_y;  // smooth-field slopes
};

TextureParams draw_texture_params(Texture t, bool external, SeededRng& rng) {
  TextureParams p{};
  p.cx = 0.5 + rng.uniform(-0.05, 0.05);
  p.cy = 0.5 + rng.uniform(-0.05, 0.05);
  switch (t) {
    case Texture::Ellipse:
      p.r1 = (external ? 0.26 : 0.30) + rng.uniform(-0.03, 0.03);
      p.r2 = (external ? 0.19 : 0.22) + rng.uniform(-0.03, 0.03);
      p.fill = (external ? 780.0 : 850.0) + rng.uniform(-40, 40);
      p.bg = 120.0 + rng.uniform(-20, 20);
      p.noise = 25.0;
      break;
    case Texture::Blob:
      p.r1 = (external ? 0.09 : 0.07) + rng.uniform(-0.015, 0.015);
      p.cx = 0.5 + (external ? 0.15 : 0.18) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      p.cy = 0.5 + rng.uniform(-0.12, 0.12);
      p.fill = (external ? 900.0 : 950.0) + rng.uniform(-30, 30);
      p.bg = 90.0 + rng.uniform(-15, 15);
      p.noise = 20.0;
      break;
    case Texture::Smooth:
      p.bg = 520.0 + rng.uniform(-30, 30);
      p.grad_x = (external ? 60.0 : 120.0) + rng.uniform(-20, 20);
      p.grad_y = (external ? 120.0 : 60.0) + rng.uniform(-20, 20);
      p.noise = 12.0;
      break;
    case Texture::Ring:
      p.r1 = (external ? 0.33 : 0.30) + rng.uniform(-0.02, 0.02);
      p.r2 = (external ? 0.07 : 0.06) + rng.uniform(-0.01, 0.01);  // half thickness
      // Low enough that the 1.5x uptake peak stays inside the 10-bit range;
      // clamping would flatten the temporal curve.
      p.fill = 620.0 + rng.uniform(-40, 40);
      p.bg = 110.0 + rng.uniform(-20, 20);
      p.noise = 20.0;
      break;
  }
  return p;
}

std::vector<std::uint8_t> render_slice(Texture t, const TextureParams& p, int n,
                                       double intensity_scale, SeededRng& rng) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n) * 2);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double fx = (x + 0.5) / n, fy = (y + 0.5) / n;
      double v = p.bg;
      switch (t) {
        case Texture::Ellipse: {
          double dx = (fx - p.cx) / p.r1, dy = (fy - p.cy) / p.r2;
          if (dx * dx + dy * dy <= 1.0) v = p.fill;
          break;
        }
        case Texture::Blob: {
          double dx = fx - p.cx, dy = fy - p.cy;
          if (dx * dx + dy * dy <= p.r1 * p.r1) v = p.fill;
          break;
        }
        case Texture::Smooth:
          v = p.bg + p.grad_x * (fx - 0.5) + p.grad_y * (fy - 0.5);
          break;
        case Texture::Ring: {
          double d = std::sqrt((fx - p.cx) * (fx - p.cx) + (fy - p.cy) * (fy - p.cy));
          if (std::abs(d - p.r1) <= p.r2) v = p.fill * intensity_scale;
          break;
        }
      }
      v += p.noise * rng.normal();
      int q = std::clamp(static_cast<int>(std::lround(v)), 0, 1023);
      bytes.push_back(static_cast<std::uint8_t>(q & 0xFF));
      bytes.push_back(static_cast<std::uint8_t>(q >> 8));
    }
  }
  return bytes;
}

// DCE volumes brighten then wash out over the acquisition.
double temporal_scale(int t) {
  static const double curve[] = {1.0, 1.3, 1.5, 1.35, 1.2, 1.1};
  return curve[std::min<std::size_t>(static_cast<std::size_t>(t), 5)];
}

nlohmann::json range_json(const Range& r) { return {{"lo", r.lo}, {"hi", r.hi}}; }

Range range_from_json(const nlohmann::json& j) {
  Range r{j.at("lo").get<double>(), j.at("hi").get<double>()};
  if (!(r.hi >= r.lo)) throw MalformedJson("range hi < lo");
  return r;
}

}  // namespace

ProfileSet internal_profiles() {
  ProfileSet set;
  set.name = "internal";
  set.patient_prefix = "SP";
  set.nonconforming_phrases = {"research sequence 12", "prostate protocol extra", "series a",
                               "scan 42", "misc acquisition"};

  ClassProfile t2w;
  t2w.cls = SeqClass::T2W;
  t2w.tr_ms = {3000, 6000};
  t2w.te_ms = {85, 130};
  t2w.fa_deg = {90, 160};
  t2w.scanning_sequence = {"SE"};
  t2w.min_slices = 14;
  t2w.max_slices = 20;
  t2w.texture = Texture::Ellipse;
  t2w.phrases = {"t2 tse tra prostate", "T2 Weighted Axial", "t2_tse_tra", "AX T2 FRFSE",
                 "t2 tse axial obl"};

  ClassProfile dwi;
  dwi.cls = SeqClass::DWI;
  dwi.tr_ms = {2800, 4200};
  dwi.te_ms = {55, 84};
  dwi.fa_deg = {88, 92};
  dwi.scanning_sequence = {"SE", "EP"};
  dwi.is4d_rate = 0.9;
  dwi.timepoints = 3;
  dwi.min_slices = 10;
  dwi.max_slices = 14;
  dwi.texture = Texture::Blob;
  dwi.phrases = {"ep2d_diff_tra", "DWI axial prostate", "diffusion weighted imaging", "AX DWI",
                 "ep2d diff 3scan trace"};

  ClassProfile adc;
  adc.cls = SeqClass::ADC;
  adc.tr_ms = {2800, 4200};
  adc.te_ms = {80, 110};
  adc.fa_deg = {88, 92};
  adc.scanning_sequence = {"SE", "EP"};
  adc.min_slices = 10;
  adc.max_slices = 14;
  adc.texture = Texture::Smooth;
  adc.phrases = {"ADC (10^-6 mm2_s)", "apparent diffusion coefficient", "ep2d_diff_tra_ADC",
                 "ADC map axial", "ADC prostate"};

  ClassProfile dce;
  dce.cls = SeqClass::DCE;
  dce.tr_ms = {3, 8};
  dce.te_ms = {1, 3};
  dce.fa_deg = {8, 25};
  dce.scanning_sequence = {"GR"};
  dce.contrast_probability = 1.0;
  dce.is4d_rate = 1.0;
  dce.timepoints = 4;
  dce.min_slices = 8;
  dce.max_slices = 12;
  dce.texture = Texture::Ring;
  dce.phrases = {"DCE dynamic VIBE", "dynamic contrast tra", "twist dynamic", "t1 vibe dyn tra",
                 "perfusion prostate"};

  set.profiles = {t2w, dwi, adc, dce};
  return set;
}

ProfileSet external_profiles() {
  ProfileSet set = internal_profiles();
  set.name = "external";
  set.patient_prefix = "EX";

  ClassProfile& t2w = set.profiles[0];
  t2w.tr_ms = {3500, 7000};
  t2w.te_ms = {90, 140};
  t2w.phrases = {"T2W_TSE_ax", "Ax T2 prostate ERC", "t2 spc tra", "T2 TSE"};

  ClassProfile& dwi = set.profiles[1];
  dwi.tr_ms = {3200, 5200};
  dwi.te_ms = {55, 110};  // fully overlaps ADC
  dwi.is4d_rate = 0.1;
  dwi.phrases = {"DWI_EPI_ax", "ep2d diffusion tra", "Ax DWI prostate", "trace diffusion"};

  ClassProfile& adc = set.profiles[2];
  adc.tr_ms = {3200, 5200};
  adc.te_ms = {80, 110};
  adc.phrases = {"ADC_map", "Apparent Diffusion Coefficient", "ADC axial ERC", "eADC prostate"};

  ClassProfile& dce = set.profiles[3];
  dce.tr_ms = {3.5, 9};
  dce.te_ms = {1, 3.5};
  dce.phrases = {"DCE_TWIST_ax", "dynamic prostate ERC", "perfusion twist tra", "t1 dyn vibe"};

  return set;
}

std::string profiles_to_json(const ProfileSet& set) {
  nlohmann::json j;
  j["version"] = 1;
  j["name"] = set.name;
  j["patient_prefix"] = set.patient_prefix;
  j["nonconforming_phrases"] = set.nonconforming_phrases;
  nlohmann::json profiles = nlohmann::json::array();
  for (const auto& p : set.profiles) {
    profiles.push_back({{"class", to_string(p.cls)},
                        {"tr_ms", range_json(p.tr_ms)},
                        {"te_ms", range_json(p.te_ms)},
                        {"fa_deg", range_json(p.fa_deg)},
                        {"scanning_sequence", p.scanning_sequence},
                        {"contrast_probability", p.contrast_probability},
                        {"is4d_rate", p.is4d_rate},
                        {"min_slices", p.min_slices},
                        {"max_slices", p.max_slices},
                        {"timepoints", p.timepoints},
                        {"image_px", range_json(p.image_px)},
                        {"texture", to_string(p.texture)},
                        {"phrases", p.phrases}});
  }
  j["profiles"] = std::move(profiles);
  return j.dump(2) + "\n";
}

ProfileSet profiles_from_json(std::string_view text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) throw MalformedJson("unsupported profile version");
    ProfileSet set;
    set.name = j.at("name").get<std::string>();
    set.patient_prefix = j.at("patient_prefix").get<std::string>();
    set.nonconforming_phrases = j.at("nonconforming_phrases").get<std::vector<std::string>>();
    for (const auto& jp : j.at("profiles")) {
      ClassProfile p;
      auto cls = seq_class_from_string(jp.at("class").get<std::string>());
      if (!cls) throw MalformedJson("unknown class in profile");
      p.cls = *cls;
      p.tr_ms = range_from_json(jp.at("tr_ms"));
      p.te_ms = range_from_json(jp.at("te_ms"));
      p.fa_deg = range_from_json(jp.at("fa_deg"));
      p.scanning_sequence = jp.at("scanning_sequence").get<std::vector<std::string>>();
      p.contrast_probability = jp.at("contrast_probability").get<double>();
      p.is4d_rate = jp.at("is4d_rate").get<double>();
      p.min_slices = jp.at("min_slices").get<int>();
      p.max_slices = jp.at("max_slices").get<int>();
      p.timepoints = jp.at("timepoints").get<int>();
      p.image_px = range_from_json(jp.at("image_px"));
      p.texture = texture_from_string(jp.at("texture").get<std::string>());
      p.phrases = jp.at("phrases").get<std::vector<std::string>>();
      set.profiles.push_back(std::move(p));
    }
    if (set.profiles.empty()) throw MalformedJson("profile set has no profiles");
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(e.what());
  }
}

std::vector<GeneratedSeries> generate_dataset(const ProfileSet& set, int n_patients,
                                              std::uint64_t seed) {
  std::vector<GeneratedSeries> out;
  out.reserve(static_cast<std::size_t>(n_patients) * set.profiles.size());
  const std::string uid_base =
      "1.2.826.0.1.3680043.9.7433." + std::to_string(seed & 0xFFFFFFu);

  for (int pi = 0; pi < n_patients; ++pi) {
    std::string patient = set.patient_prefix;
    std::string idx = std::to_string(pi);
    patient += std::string(idx.size() < 3 ? 3 - idx.size() : 0, '0') + idx;

    for (std::size_t ci = 0; ci < set.profiles.size(); ++ci) {
      const ClassProfile& profile = set.profiles[ci];
      const int ordinal = pi * static_cast<int>(set.profiles.size()) + static_cast<int>(ci);
      SeededRng rng(SeededRng::derive(seed, static_cast<std::uint64_t>(ordinal)));

      GeneratedSeries gs;
      gs.truth = profile.cls;
      dicom::SeriesRecord& rec = gs.record;
      rec.series_instance_uid = uid_base + "." + std::to_string(ordinal + 1);
      rec.patient_id = patient;

      gs.nonconforming_description = ordinal % 10 == 6;
      const auto& pool = gs.nonconforming_description ? set.nonconforming_phrases : profile.phrases;
      rec.series_description =
          pool[static_cast<std::size_t>(rng.next_below(pool.size()))];

      double tr = round_to(rng.uniform(profile.tr_ms.lo, profile.tr_ms.hi), 1);
      double te = round_to(rng.uniform(profile.te_ms.lo, profile.te_ms.hi), 2);
      double fa = std::round(rng.uniform(profile.fa_deg.lo, profile.fa_deg.hi));
      bool contrast = rng.uniform() < profile.contrast_probability;
      bool is4d = profile.timepoints > 1 && rotation_hit(pi, profile.is4d_rate);
      int positions = profile.min_slices +
                      static_cast<int>(rng.next_below(
                          static_cast<std::uint64_t>(profile.max_slices - profile.min_slices + 1)));
      int timepoints = is4d ? profile.timepoints : 1;
      int n = static_cast<int>(std::lround(rng.uniform(profile.image_px.lo, profile.image_px.hi)));

      bool external = set.name == "external";
      TextureParams texture = draw_texture_params(profile.texture, external, rng);

      int instance_no = 0;
      for (int t = 0; t < timepoints; ++t) {
        for (int p = 0; p < positions; ++p) {
          dicom::InstanceMetadata inst;
          inst.series_instance_uid = rec.series_instance_uid;
          inst.sop_instance_uid = rec.series_instance_uid + "." + std::to_string(++instance_no);
          inst.patient_id = patient;
          inst.series_description = rec.series_description;
          inst.repetition_time = tr;
          inst.echo_time = te;
          inst.flip_angle = fa;
          inst.scanning_sequence = profile.scanning_sequence;
          if (contrast) inst.contrast_bolus_agent = "GADOVIST";
          inst.image_orientation_patient = (Eigen::Matrix<double, 6, 1>() << 1, 0, 0, 0, 1, 0).finished();
          inst.image_position_patient = Eigen::Vector3d(-100.0, -100.0, 3.0 * p);
          inst.rows = n;
          inst.cols = n;
          inst.pixel_spacing = Eigen::Vector2d(0.5, 0.5);
          if (timepoints > 1) inst.temporal_position = t + 1;
          double scale = profile.texture == Texture::Ring ? temporal_scale(t) : 1.0;
          inst.pixel_payload = render_slice(profile.texture, texture, n, scale, rng);
          inst.has_pixel_payload = true;
          rec.instances.push_back(std::move(inst));
        }
      }

      // Same member order as series grouping produces after a parse.
      std::sort(rec.instances.begin(), rec.instances.end(),
                [](const dicom::InstanceMetadata& a, const dicom::InstanceMetadata& b) {
                  double za = (*a.image_position_patient)[2], zb = (*b.image_position_patient)[2];
                  if (za != zb) return za < zb;
                  int ta = a.temporal_position.value_or(0), tb = b.temporal_position.value_or(0);
                  if (ta != tb) return ta < tb;
                  return a.sop_instance_uid < b.sop_instance_uid;
                });
      out.push_back(std::move(gs));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distribution plot
// ---------------------------------------------------------------------------
namespace {

const std::map<std::string, std::string>& class_palette() {
  static const std::map<std::string, std::string> palette = {
      {"T2W", "#1f77b4"}, {"DWI", "#ff7f0e"}, {"ADC", "#2ca02c"}, {"DCE", "#d62728"}};
  return palette;
}

std::string color_of(const std::string& cls) {
  auto it = class_palette().find(cls);
  return it == class_palette().end() ? std::string("#999999") : it->second;
}

std::string opt_str(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

std::string distribution_csv(const std::vector<PlotRow>& rows, std::uint64_t seed,
                             std::string_view config_hash) {
  if (rows.empty()) throw EmptyTable("distribution table has no rows");
  std::string out = provenance_header(seed, config_hash);
  out += "series_uid,class,tr,te,fa,contrast,is4d\n";
  for (const auto& r : rows)
    out += csv_escape(r.series_uid) + "," + csv_escape(r.cls) + "," + opt_str(r.tr) + "," +
           opt_str(r.te) + "," + opt_str(r.fa) + "," + (r.contrast ? "1" : "0") + "," +
           (r.is4d ? "1" : "0") + "\n";
  return out;
}

std::string distribution_html(const std::vector<PlotRow>& rows) {
  if (rows.empty()) throw EmptyTable("distribution table has no rows");

  struct Axis {
    const char* label;
    double lo = 0.0, hi = 1.0;
  };
  std::array<Axis, 5> axes{Axis{"TR (ms)"}, Axis{"TE (ms)"}, Axis{"FA (deg)"}, Axis{"contrast"},
                           Axis{"is4D"}};
  auto value = [](const PlotRow& r, std::size_t axis) -> double {
    switch (axis) {
      case 0: return r.tr.value_or(0.0);
      case 1: return r.te.value_or(0.0);
      case 2: return r.fa.value_or(0.0);
      case 3: return r.contrast ? 1.0 : 0.0;
      default: return r.is4d ? 1.0 : 0.0;
    }
  };
  for (std::size_t a = 0; a < 3; ++a) {
    double lo = 1e300, hi = -1e300;
    for (const auto& r : rows) {
      double v = value(r, a);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) hi = lo + 1.0;
    axes[a].lo = lo;
    axes[a].hi = hi;
  }

  const int width = 900, height = 520, top = 50, bottom = 40, left = 80, right = 60;
  auto axis_x = [&](std::size_t a) {
    return left + static_cast<double>(a) * (width - left - right) / (axes.size() - 1);
  };
  auto axis_y = [&](std::size_t a, double v) {
    double f = (v - axes[a].lo) / (axes[a].hi - axes[a].lo);
    return height - bottom - f * (height - top - bottom);
  };

  std::string svg;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    double x = axis_x(a);
    svg += "<line x1='" + format_double(x) + "' y1='" + std::to_string(top) + "' x2='" +
           format_double(x) + "' y2='" + std::to_string(height - bottom) +
           "' stroke='#444' stroke-width='1'/>\n";
    svg += "<text x='" + format_double(x) + "' y='" + std::to_string(top - 12) +
           "' text-anchor='middle' font-size='13'>" + axes[a].label + "</text>\n";
    svg += "<text x='" + format_double(x) + "' y='" + std::to_string(height - bottom + 16) +
           "' text-anchor='middle' font-size='10'>" + format_double(axes[a].lo) + "</text>\n";
    svg += "<text x='" + format_double(x) + "' y='" + std::to_string(top + 10) +
           "' text-anchor='middle' font-size='10'>" + format_double(axes[a].hi) + "</text>\n";
  }
  for (const auto& r : rows) {
    std::string points;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      if (a) points += " ";
      points += format_double(axis_x(a)) + "," + format_double(axis_y(a, value(r, a)));
    }
    svg += "<polyline fill='none' stroke='" + color_of(r.cls) +
           "' stroke-opacity='0.45' stroke-width='1' points='" + points + "'/>\n";
  }
  double lx = left;
  std::string legend;
  for (const auto& [cls, color] : class_palette()) {
    legend += "<rect x='" + format_double(lx) + "' y='" + std::to_string(height - 18) +
              "' width='12' height='12' fill='" + color + "'/>";
    legend += "<text x='" + format_double(lx + 16) + "' y='" + std::to_string(height - 8) +
              "' font-size='12'>" + cls + "</text>\n";
    lx += 90;
  }

  std::string html;
  html += "<!DOCTYPE html>\n<html><head><meta charset='utf-8'>\n";
  html += "<title>Series metadata distribution</title>\n";
  html += "<style>body{font-family:sans-serif;margin:24px}svg{background:#fafafa}</style>\n";
  html += "</head><body>\n<h2>Series metadata by class</h2>\n";
  html += "<svg width='" + std::to_string(width) + "' height='" + std::to_string(height) + "'>\n";
  html += svg + legend;
  html += "</svg>\n<p>" + std::to_string(rows.size()) + " series.</p>\n</body></html>\n";
  return html;
}

}  // namespace mrseq::synth
