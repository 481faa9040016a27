#include "mrseq/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace mrseq::feat {

namespace {

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AxisScaling fit_axis(const std::vector<double>& values) {
  AxisScaling ax;
  if (values.empty()) {
    ax.degenerate = true;
    return ax;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  ax.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - ax.mean) * (v - ax.mean);
  double var = sq / static_cast<double>(values.size());
  ax.stddev = var > 0.0 ? std::sqrt(var) : 1.0;
  return ax;
}

double scale(const std::optional<double>& value, const AxisScaling& ax) {
  return (value.value_or(ax.mean) - ax.mean) / ax.stddev;
}

nlohmann::json axis_to_json(const AxisScaling& ax) {
  return {{"mean", ax.mean}, {"stddev", ax.stddev}, {"degenerate", ax.degenerate}};
}

AxisScaling axis_from_json(const nlohmann::json& j) {
  AxisScaling ax;
  ax.mean = j.at("mean").get<double>();
  ax.stddev = j.at("stddev").get<double>();
  ax.degenerate = j.at("degenerate").get<bool>();
  if (!(ax.stddev > 0.0)) throw MalformedJson("scaler stddev must be positive");
  return ax;
}

}  // namespace

RawMetadata extract_raw(const dicom::SeriesRecord& series, const geom::SeriesGeometry& geometry) {
  RawMetadata raw;
  std::vector<double> tr, te, fa;
  std::set<std::string> codes;
  for (const auto& inst : series.instances) {
    if (inst.repetition_time) tr.push_back(*inst.repetition_time);
    if (inst.echo_time) te.push_back(*inst.echo_time);
    if (inst.flip_angle) fa.push_back(*inst.flip_angle);
    for (const auto& code : inst.scanning_sequence) codes.insert(code);
    if (inst.contrast_bolus_agent) {
      std::string agent = trim(*inst.contrast_bolus_agent);
      if (!agent.empty() && to_upper(agent) != "NONE") raw.contrast_present = true;
    }
  }
  raw.repetition_time = median(std::move(tr));
  raw.echo_time = median(std::move(te));
  raw.flip_angle = median(std::move(fa));
  raw.scanning_sequence.assign(codes.begin(), codes.end());
  raw.is4d = geometry.is4d;
  return raw;
}

ScalingParams fit_scaler(const std::vector<RawMetadata>& train) {
  if (train.empty()) throw EmptyTrainingSet("scaler requires at least one training example");
  std::vector<double> tr, te, fa;
  for (const auto& raw : train) {
    if (raw.repetition_time) tr.push_back(*raw.repetition_time);
    if (raw.echo_time) te.push_back(*raw.echo_time);
    if (raw.flip_angle) fa.push_back(*raw.flip_angle);
  }
  ScalingParams p;
  p.tr = fit_axis(tr);
  p.te = fit_axis(te);
  p.fa = fit_axis(fa);
  return p;
}

FeatureVector vectorize(const RawMetadata& raw, const ScalingParams& scaler) {
  FeatureVector fv = FeatureVector::Zero();
  fv[0] = scale(raw.repetition_time, scaler.tr);
  fv[1] = scale(raw.echo_time, scaler.te);
  fv[2] = scale(raw.flip_angle, scaler.fa);
  for (int i = 0; i < 5; ++i) {
    bool has = std::find(raw.scanning_sequence.begin(), raw.scanning_sequence.end(),
                         kSequenceCodes[i]) != raw.scanning_sequence.end();
    fv[3 + i] = has ? 1.0 : 0.0;
  }
  fv[8] = raw.contrast_present ? 1.0 : 0.0;
  fv[9] = raw.is4d ? 1.0 : 0.0;
  return fv;
}

std::string scaler_to_json(const ScalingParams& scaler) {
  nlohmann::json j;
  j["version"] = 1;
  j["tr"] = axis_to_json(scaler.tr);
  j["te"] = axis_to_json(scaler.te);
  j["fa"] = axis_to_json(scaler.fa);
  return j.dump();
}

ScalingParams scaler_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw MalformedJson("unsupported scaler version");
    ScalingParams p;
    p.tr = axis_from_json(j.at("tr"));
    p.te = axis_from_json(j.at("te"));
    p.fa = axis_from_json(j.at("fa"));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(e.what());
  }
}

}  // namespace mrseq::feat
