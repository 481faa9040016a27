#include "mrseq/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <set>

#include <json.hpp>

namespace mrseq::harness {

namespace fs = std::filesystem;

const char* to_string(Method m) {
  switch (m) {
    case Method::Metadata: return "metadata";
    case Method::Images: return "images";
    case Method::Fusion: return "fusion";
  }
  return "?";
}

std::optional<Method> method_from_string(std::string_view s) {
  if (s == "metadata") return Method::Metadata;
  if (s == "images") return Method::Images;
  if (s == "fusion") return Method::Fusion;
  return std::nullopt;
}

namespace {

std::vector<std::string> unique_sorted(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// Largest-remainder seat allocation; ties keep declaration order.
std::array<std::size_t, 3> allocate_seats(std::size_t n, const std::array<double, 3>& fractions) {
  std::array<std::size_t, 3> seats{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    double exact = static_cast<double>(n) * fractions[i];
    seats[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[i] = exact - static_cast<double>(seats[i]);
    assigned += seats[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b] + 1e-12; });
  for (std::size_t i = 0; assigned < n; ++i) {
    seats[order[i % 3]] += 1;
    ++assigned;
  }
  return seats;
}

}  // namespace

SplitPlan split_patients(const std::vector<std::string>& patient_ids, Fractions fractions,
                         std::uint64_t seed) {
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 ||
      std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9)
    throw BadFractions("split fractions must be nonnegative and sum to 1");

  std::vector<std::string> patients = unique_sorted(patient_ids);
  SeededRng rng(SeededRng::derive(seed, 0x73706c6974));  // "split" stream
  rng.shuffle(patients);

  auto seats = allocate_seats(patients.size(), {fractions.train, fractions.val, fractions.test});
  SplitPlan plan;
  plan.fractions = fractions;
  plan.seed = seed;
  std::size_t i = 0;
  for (std::size_t k = 0; k < seats[0]; ++k) plan.train.push_back(patients[i++]);
  for (std::size_t k = 0; k < seats[1]; ++k) plan.val.push_back(patients[i++]);
  for (std::size_t k = 0; k < seats[2]; ++k) plan.test.push_back(patients[i++]);
  return plan;
}

std::string split_plan_to_json(const SplitPlan& plan) {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = plan.seed;
  j["fractions"] = {{"train", plan.fractions.train},
                    {"val", plan.fractions.val},
                    {"test", plan.fractions.test}};
  j["train"] = plan.train;
  j["val"] = plan.val;
  j["test"] = plan.test;
  return j.dump(2) + "\n";
}

SplitPlan split_plan_from_json(std::string_view text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.fractions.train = j.at("fractions").at("train").get<double>();
    plan.fractions.val = j.at("fractions").at("val").get<double>();
    plan.fractions.test = j.at("fractions").at("test").get<double>();
    plan.train = j.at("train").get<std::vector<std::string>>();
    plan.val = j.at("val").get<std::vector<std::string>>();
    plan.test = j.at("test").get<std::vector<std::string>>();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(e.what());
  }
}

std::vector<std::vector<std::string>> kfold_patients(const std::vector<std::string>& patient_ids,
                                                     int k, std::uint64_t seed) {
  if (k < 1) throw TooFewPatients("k must be >= 1");
  std::vector<std::string> patients = unique_sorted(patient_ids);
  if (patients.size() < static_cast<std::size_t>(k))
    throw TooFewPatients("need at least " + std::to_string(k) + " patients, have " +
                         std::to_string(patients.size()));
  SeededRng rng(SeededRng::derive(seed, 0x666f6c64));  // "fold" stream
  rng.shuffle(patients);

  std::vector<std::vector<std::string>> folds(static_cast<std::size_t>(k));
  std::size_t base = patients.size() / static_cast<std::size_t>(k);
  std::size_t extra = patients.size() % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].assign(patients.begin() + static_cast<std::ptrdiff_t>(pos),
                    patients.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

namespace {

double forest_mean_loss(const forest::RandomForest& model,
                        const std::vector<feat::FeatureVector>& x, const std::vector<int>& y) {
  if (x.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Eigen::Vector4d probs = forest::predict_forest(model, x[i]);
    sum += -std::log(std::max(probs[y[i]], 1e-12));
  }
  return sum / static_cast<double>(x.size());
}

struct FoldResult {
  MemberModel member;
  double val_loss = 0.0;
  std::vector<EpochLogRow> log;
};

FoldResult train_fold(const std::vector<TrainSeries>& pool,
                      const std::set<std::string>& val_patients, int fold, Method method,
                      const TrainSettings& settings, std::uint64_t seed) {
  std::vector<const TrainSeries*> train, val;
  for (const auto& s : pool)
    (val_patients.count(s.patient_id) ? val : train).push_back(&s);
  if (train.empty() || val.empty())
    throw TooFewPatients("fold " + std::to_string(fold) + " has an empty train or val side");

  FoldResult result;
  result.member.method = method;

  std::vector<feat::RawMetadata> train_raw;
  train_raw.reserve(train.size());
  for (const auto* s : train) train_raw.push_back(s->raw);
  result.member.scaler = feat::fit_scaler(train_raw);
  const feat::ScalingParams& scaler = result.member.scaler;

  if (method == Method::Metadata) {
    std::vector<feat::FeatureVector> xt, xv;
    std::vector<int> yt, yv;
    for (const auto* s : train) {
      xt.push_back(feat::vectorize(s->raw, scaler));
      yt.push_back(s->label);
    }
    for (const auto* s : val) {
      xv.push_back(feat::vectorize(s->raw, scaler));
      yv.push_back(s->label);
    }
    result.member.rf = forest::fit_forest(
        xt, yt, settings.forest, SeededRng::derive(seed, 1000 + static_cast<std::uint64_t>(fold)));
    EpochLogRow row;
    row.fold = fold;
    row.epoch = -1;  // single fit, no epochs
    row.train_loss = forest_mean_loss(result.member.rf, xt, yt);
    row.val_loss = forest_mean_loss(result.member.rf, xv, yv);
    result.log.push_back(row);
    result.val_loss = row.val_loss;
    return result;
  }

  nn::CnnConfig cfg = settings.cnn;
  cfg.mode = method == Method::Fusion ? nn::Mode::Fusion : nn::Mode::ImageOnly;

  auto to_example = [&](const TrainSeries& s) {
    nn::TrainExample<float> ex;
    if (s.image.size() == 0)
      throw ModeMismatch("method " + std::string(to_string(method)) + " requires pixel data for " +
                         s.series_uid);
    ex.image = s.image;
    ex.metadata = feat::vectorize(s.raw, scaler).cast<float>();
    ex.label = s.label;
    return ex;
  };
  std::vector<nn::TrainExample<float>> train_ex, val_ex;
  for (const auto* s : train) train_ex.push_back(to_example(*s));
  for (const auto* s : val) val_ex.push_back(to_example(*s));

  auto model = nn::make_model<float>(cfg, SeededRng::derive(seed, 2000 + static_cast<std::uint64_t>(fold)));
  auto adam = nn::AdamState<float>::zero_like(model);
  SeededRng shuffle_rng(SeededRng::derive(seed, 3000 + static_cast<std::uint64_t>(fold)));

  EarlyStopper stopper;
  stopper.min_delta = settings.min_delta;
  stopper.patience = settings.patience;
  nn::FusionCnn<float> best = model;

  for (int epoch = 1; epoch <= settings.max_epochs; ++epoch) {
    double train_loss = nn::train_one_epoch(model, adam, train_ex, settings.batch_size, shuffle_rng);
    double val_loss = nn::mean_loss(model, val_ex);
    EpochLogRow row;
    row.fold = fold;
    row.epoch = epoch;
    row.train_loss = train_loss;
    row.val_loss = val_loss;
    result.log.push_back(row);

    int prev_best = stopper.best_epoch;
    bool stop = stopper.observe(epoch, val_loss);
    if (stopper.best_epoch == epoch && prev_best != epoch) best = model;
    if (stop) break;
  }
  result.member.cnn = std::move(best);
  result.val_loss = stopper.best;
  return result;
}

}  // namespace

FoldEnsemble kfold_train(const std::vector<TrainSeries>& pool, int k, Method method,
                         const TrainSettings& settings, std::uint64_t seed) {
  std::vector<std::string> patients;
  patients.reserve(pool.size());
  for (const auto& s : pool) patients.push_back(s.patient_id);
  auto folds = kfold_patients(patients, k, seed);

  FoldEnsemble ensemble;
  ensemble.method = method;
  ensemble.seed = seed;
  ensemble.members.resize(folds.size());
  ensemble.val_losses.resize(folds.size());
  std::vector<std::vector<EpochLogRow>> logs(folds.size());

  parallel_for(folds.size(), [&](std::size_t i) {
    std::set<std::string> val_patients(folds[i].begin(), folds[i].end());
    FoldResult r = train_fold(pool, val_patients, static_cast<int>(i), method, settings, seed);
    ensemble.members[i] = std::move(r.member);
    ensemble.val_losses[i] = r.val_loss;
    logs[i] = std::move(r.log);
  });
  for (auto& l : logs)
    for (auto& row : l) ensemble.log.push_back(row);
  return ensemble;
}

std::vector<Eigen::Vector4d> member_probabilities(const FoldEnsemble& ensemble,
                                                  const feat::RawMetadata& raw,
                                                  const nn::Mat<float>& image) {
  std::vector<Eigen::Vector4d> out;
  out.reserve(ensemble.members.size());
  for (const auto& member : ensemble.members) {
    feat::FeatureVector fv = feat::vectorize(raw, member.scaler);
    if (member.method == Method::Metadata) {
      out.push_back(forest::predict_forest(member.rf, fv));
      continue;
    }
    if (image.size() == 0)
      throw ModeMismatch(std::string(to_string(member.method)) + " ensemble requires pixel data");
    std::optional<nn::Vec<float>> meta;
    if (member.method == Method::Fusion) meta = fv.cast<float>().eval();
    nn::Vec<float> probs = nn::predict(member.cnn, image, meta);
    out.push_back(probs.cast<double>());
  }
  return out;
}

EnsemblePrediction ensemble_predict(const FoldEnsemble& ensemble, const feat::RawMetadata& raw,
                                    const nn::Mat<float>& image) {
  auto member_probs = member_probabilities(ensemble, raw, image);
  if (member_probs.empty()) throw Error("ensemble has no members");
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  for (const auto& p : member_probs) mean += p;
  mean /= static_cast<double>(member_probs.size());

  EnsemblePrediction pred;
  pred.probs = mean;
  pred.predicted = 0;
  for (int c = 1; c < static_cast<int>(kNumClasses); ++c)
    if (mean[c] > mean[pred.predicted]) pred.predicted = c;
  return pred;
}

void save_ensemble(const std::string& dir, const FoldEnsemble& ensemble,
                   std::uint64_t config_hash) {
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["tool_version"] = std::string(kToolVersion);
  manifest["config_hash"] = to_hex(config_hash);
  manifest["method"] = to_string(ensemble.method);
  manifest["seed"] = ensemble.seed;
  manifest["k"] = ensemble.members.size();
  manifest["val_losses"] = ensemble.val_losses;
  std::vector<std::string> files;
  for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
    const MemberModel& m = ensemble.members[i];
    std::string name = "member_" + std::to_string(i) +
                       (m.method == Method::Metadata ? ".json" : ".bin");
    files.push_back(name);
    std::string path = (fs::path(dir) / name).string();
    if (m.method == Method::Metadata)
      write_file(path, forest::forest_to_json(m.rf, m.scaler) + "\n");
    else
      nn::save_model(path, m.cnn, feat::scaler_to_json(m.scaler));
  }
  manifest["members"] = files;
  write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");

  std::string log = provenance_header(ensemble.seed, to_hex(config_hash));
  log += "fold,epoch,train_loss,val_loss\n";
  for (const auto& row : ensemble.log)
    log += std::to_string(row.fold) + "," + std::to_string(row.epoch) + "," +
           format_double(row.train_loss) + "," + format_double(row.val_loss) + "\n";
  write_file((fs::path(dir) / "training_log.csv").string(), log);
}

FoldEnsemble load_ensemble(const std::string& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file((fs::path(dir) / "manifest.json").string()));
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(e.what());
  }
  FoldEnsemble ensemble;
  try {
    if (manifest.at("version").get<int>() != 1)
      throw MalformedJson("unsupported ensemble version");
    auto method = method_from_string(manifest.at("method").get<std::string>());
    if (!method) throw MalformedJson("unknown ensemble method");
    ensemble.method = *method;
    ensemble.seed = manifest.at("seed").get<std::uint64_t>();
    ensemble.val_losses = manifest.at("val_losses").get<std::vector<double>>();
    for (const auto& name : manifest.at("members").get<std::vector<std::string>>()) {
      MemberModel member;
      member.method = ensemble.method;
      std::string path = (fs::path(dir) / name).string();
      if (ensemble.method == Method::Metadata) {
        member.rf = forest::forest_from_json(read_file(path), &member.scaler);
      } else {
        std::string scaler_json;
        member.cnn = nn::load_model(path, &scaler_json);
        member.scaler = feat::scaler_from_json(scaler_json);
      }
      ensemble.members.push_back(std::move(member));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(e.what());
  }
  if (ensemble.members.empty()) throw MalformedJson("ensemble has no members");
  return ensemble;
}

}  // namespace mrseq::harness
