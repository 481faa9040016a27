#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "mrseq/harness.hpp"

using namespace mrseq;
using harness::FoldEnsemble;
using harness::Fractions;
using harness::MemberModel;
using harness::Method;
using harness::TrainSeries;
using harness::TrainSettings;

namespace fs = std::filesystem;

namespace {

std::vector<std::string> patient_ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("P" + std::to_string(100 + i));
  return ids;
}

// One series per class per patient, with class-separable metadata and a
// class-identifying 8x8 quadrant image.
std::vector<TrainSeries> toy_pool(int n_patients, std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<TrainSeries> pool;
  for (int p = 0; p < n_patients; ++p) {
    for (int c = 0; c < 4; ++c) {
      TrainSeries s;
      s.patient_id = "P" + std::to_string(100 + p);
      s.series_uid = s.patient_id + ".S" + std::to_string(c);
      s.label = c;
      switch (c) {
        case 0:
          s.raw.repetition_time = 4500 + rng.uniform(-200.0, 200.0);
          s.raw.echo_time = 110 + rng.uniform(-5.0, 5.0);
          s.raw.scanning_sequence = {"SE"};
          break;
        case 1:
          s.raw.repetition_time = 3400 + rng.uniform(-200.0, 200.0);
          s.raw.echo_time = 65 + rng.uniform(-5.0, 5.0);
          s.raw.scanning_sequence = {"EP", "SE"};
          s.raw.is4d = true;
          break;
        case 2:
          s.raw.echo_time = 95 + rng.uniform(-5.0, 5.0);
          s.raw.scanning_sequence = {"EP", "SE"};
          break;
        case 3:
          s.raw.repetition_time = 5 + rng.uniform(-1.0, 1.0);
          s.raw.echo_time = 2 + rng.uniform(-0.5, 0.5);
          s.raw.scanning_sequence = {"GR"};
          s.raw.contrast_present = true;
          s.raw.is4d = true;
          break;
      }
      s.image = nn::Mat<float>::Zero(8, 8);
      int ry = (c / 2) * 4, rx = (c % 2) * 4;
      for (int r = 0; r < 4; ++r)
        for (int cc = 0; cc < 4; ++cc)
          s.image(ry + r, rx + cc) = 0.8f + 0.2f * static_cast<float>(rng.uniform(0.0, 1.0));
      pool.push_back(std::move(s));
    }
  }
  return pool;
}

TrainSettings tiny_settings(int max_epochs = 3) {
  TrainSettings st;
  st.max_epochs = max_epochs;
  st.batch_size = 8;
  st.forest.n_trees = 10;
  st.cnn = nn::tiny_config(nn::Mode::Fusion);
  return st;
}

// Single-leaf forest member whose prediction is counts normalized.
MemberModel leaf_member(std::array<double, kNumClasses> counts) {
  MemberModel m;
  m.method = Method::Metadata;
  forest::DecisionTree tree;
  forest::TreeNode leaf;
  leaf.counts = counts;
  tree.nodes.push_back(leaf);
  m.rf.trees.push_back(tree);
  m.rf.config.n_trees = 1;
  return m;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("patient splitting honors the requested fractions") {
  auto plan = harness::split_patients(patient_ids(10), Fractions{}, 1);
  CHECK(plan.train.size() == 6);
  CHECK(plan.val.size() == 2);
  CHECK(plan.test.size() == 2);

  // 7 patients at 60/20/20: floor gives 4/1/1 and the largest-remainder seat
  // goes to val (ties keep train,val,test declaration order).
  plan = harness::split_patients(patient_ids(7), Fractions{}, 1);
  CHECK(plan.train.size() == 4);
  CHECK(plan.val.size() == 2);
  CHECK(plan.test.size() == 1);

  plan = harness::split_patients(patient_ids(5), Fractions{1.0, 0.0, 0.0}, 1);
  CHECK(plan.train.size() == 5);
  CHECK(plan.test.empty());
}

TEST_CASE("invalid fractions are rejected") {
  CHECK_THROWS_AS((void)harness::split_patients(patient_ids(4), Fractions{0.5, 0.2, 0.2}, 1),
                  BadFractions);
  CHECK_THROWS_AS((void)harness::split_patients(patient_ids(4), Fractions{1.2, -0.1, -0.1}, 1),
                  BadFractions);
}

TEST_CASE("no patient appears in more than one split") {
  auto ids = patient_ids(23);
  // Duplicates collapse before splitting.
  ids.push_back(ids[0]);
  ids.push_back(ids[5]);
  auto plan = harness::split_patients(ids, Fractions{}, 9);

  std::set<std::string> seen;
  for (const auto* part : {&plan.train, &plan.val, &plan.test})
    for (const auto& p : *part) CHECK(seen.insert(p).second);
  CHECK(seen.size() == 23);
}

TEST_CASE("splitting is deterministic in the seed") {
  auto a = harness::split_patients(patient_ids(12), Fractions{}, 4);
  auto b = harness::split_patients(patient_ids(12), Fractions{}, 4);
  auto c = harness::split_patients(patient_ids(12), Fractions{}, 5);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  CHECK(a.train != c.train);  // a different seed shuffles differently
}

TEST_CASE("split plans survive the JSON round-trip") {
  auto plan = harness::split_patients(patient_ids(9), Fractions{}, 77);
  auto text = harness::split_plan_to_json(plan);
  auto back = harness::split_plan_from_json(text);
  CHECK(back.train == plan.train);
  CHECK(back.val == plan.val);
  CHECK(back.test == plan.test);
  CHECK(back.seed == plan.seed);
  CHECK(back.fractions.train == plan.fractions.train);
  CHECK_THROWS_AS((void)harness::split_plan_from_json("{"), MalformedJson);
  CHECK_THROWS_AS((void)harness::split_plan_from_json("{}"), MalformedJson);
}

TEST_CASE("k-fold assignment partitions the patients into balanced chunks") {
  auto folds = harness::kfold_patients(patient_ids(8), 4, 3);
  REQUIRE(folds.size() == 4);
  for (const auto& f : folds) CHECK(f.size() == 2);

  folds = harness::kfold_patients(patient_ids(10), 4, 3);
  CHECK(folds[0].size() == 3);
  CHECK(folds[1].size() == 3);
  CHECK(folds[2].size() == 2);
  CHECK(folds[3].size() == 2);

  std::set<std::string> seen;
  for (const auto& f : folds)
    for (const auto& p : f) CHECK(seen.insert(p).second);
  CHECK(seen.size() == 10);

  CHECK_THROWS_AS((void)harness::kfold_patients(patient_ids(3), 4, 1), TooFewPatients);
  CHECK_THROWS_AS((void)harness::kfold_patients(patient_ids(3), 0, 1), TooFewPatients);
}

TEST_CASE("early stopping fires after patience epochs and keeps the best") {
  harness::EarlyStopper st;  // min_delta 1e-4, patience 2
  CHECK_FALSE(st.observe(1, 1.0));
  CHECK_FALSE(st.observe(2, 0.9));
  CHECK_FALSE(st.observe(3, 0.91));
  CHECK(st.observe(4, 0.92));
  CHECK(st.best_epoch == 2);
  CHECK(st.best == doctest::Approx(0.9));

  // An improvement smaller than min_delta does not reset the streak.
  harness::EarlyStopper tiny;
  CHECK_FALSE(tiny.observe(1, 1.0));
  CHECK_FALSE(tiny.observe(2, 1.0 - 1e-5));
  CHECK(tiny.observe(3, 1.0 - 2e-5));
  CHECK(tiny.best_epoch == 1);

  // A real improvement resets it.
  harness::EarlyStopper resets;
  CHECK_FALSE(resets.observe(1, 1.0));
  CHECK_FALSE(resets.observe(2, 1.01));
  CHECK_FALSE(resets.observe(3, 0.5));
  CHECK_FALSE(resets.observe(4, 0.51));
  CHECK(resets.observe(5, 0.52));
  CHECK(resets.best_epoch == 3);
}

TEST_CASE("metadata k-fold training produces one forest member per fold") {
  auto pool = toy_pool(8, 11);
  auto ens = harness::kfold_train(pool, 4, Method::Metadata, tiny_settings(), 21);
  CHECK(ens.method == Method::Metadata);
  REQUIRE(ens.members.size() == 4);
  REQUIRE(ens.val_losses.size() == 4);
  REQUIRE(ens.log.size() == 4);  // one row per fold, no epochs
  for (const auto& row : ens.log) {
    CHECK(row.epoch == -1);
    CHECK(row.val_loss >= 0.0);
  }
  // The toy problem is separable, so every held-out series is classified.
  int correct = 0;
  for (const auto& s : pool)
    if (harness::ensemble_predict(ens, s.raw, s.image).predicted == s.label) ++correct;
  CHECK(correct == static_cast<int>(pool.size()));
}

TEST_CASE("cnn k-fold training logs epochs and respects the method's mode") {
  auto pool = toy_pool(4, 13);
  auto st = tiny_settings(2);

  auto images = harness::kfold_train(pool, 2, Method::Images, st, 31);
  REQUIRE(images.members.size() == 2);
  for (const auto& m : images.members) CHECK(m.cnn.config.mode == nn::Mode::ImageOnly);
  CHECK(images.log.size() == 4);  // 2 folds x 2 epochs, no early stop this short
  for (const auto& row : images.log) {
    CHECK(row.epoch >= 1);
    CHECK(row.epoch <= 2);
  }

  auto fusion = harness::kfold_train(pool, 2, Method::Fusion, st, 31);
  for (const auto& m : fusion.members) CHECK(m.cnn.config.mode == nn::Mode::Fusion);

  auto probs = harness::member_probabilities(fusion, pool[0].raw, pool[0].image);
  REQUIRE(probs.size() == 2);
  for (const auto& p : probs) CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-5));

  // Pixel-needing methods reject series without pixel data.
  auto no_image = pool;
  no_image[0].image = nn::Mat<float>();
  CHECK_THROWS_AS((void)harness::kfold_train(no_image, 2, Method::Images, st, 31), ModeMismatch);
  CHECK_THROWS_AS((void)harness::ensemble_predict(fusion, pool[0].raw, nn::Mat<float>()),
                  ModeMismatch);

  CHECK_THROWS_AS((void)harness::kfold_train(toy_pool(2, 1), 4, Method::Metadata, st, 1),
                  TooFewPatients);
}

TEST_CASE("the ensemble averages members and breaks ties toward the lowest class") {
  FoldEnsemble ens;
  ens.method = Method::Metadata;
  ens.members.push_back(leaf_member({2, 0, 0, 0}));
  ens.members.push_back(leaf_member({0, 2, 0, 0}));

  feat::RawMetadata raw;
  auto pred = harness::ensemble_predict(ens, raw, {});
  CHECK(pred.probs[0] == doctest::Approx(0.5));
  CHECK(pred.probs[1] == doctest::Approx(0.5));
  CHECK(pred.predicted == 0);  // tie resolves to the lowest index

  FoldEnsemble high;
  high.method = Method::Metadata;
  high.members.push_back(leaf_member({0, 0, 2, 0}));
  high.members.push_back(leaf_member({0, 0, 0, 2}));
  CHECK(harness::ensemble_predict(high, raw, {}).predicted == 2);

  FoldEnsemble empty;
  CHECK_THROWS_AS((void)harness::ensemble_predict(empty, raw, {}), Error);
}

TEST_CASE("member order matches construction order and the mean ignores it") {
  FoldEnsemble ab, ba;
  ab.method = ba.method = Method::Metadata;
  ab.members.push_back(leaf_member({3, 1, 0, 0}));
  ab.members.push_back(leaf_member({0, 0, 1, 1}));
  ba.members.push_back(leaf_member({0, 0, 1, 1}));
  ba.members.push_back(leaf_member({3, 1, 0, 0}));

  feat::RawMetadata raw;
  auto pa = harness::member_probabilities(ab, raw, {});
  auto pb = harness::member_probabilities(ba, raw, {});
  CHECK(pa[0] == pb[1]);
  CHECK(pa[1] == pb[0]);
  CHECK((harness::ensemble_predict(ab, raw, {}).probs.array() ==
         harness::ensemble_predict(ba, raw, {}).probs.array())
            .all());
}

TEST_CASE("a saved metadata ensemble reloads with identical behavior") {
  TempDir dir("mrseq_harness_meta");
  auto pool = toy_pool(6, 17);
  auto ens = harness::kfold_train(pool, 3, Method::Metadata, tiny_settings(), 41);
  harness::save_ensemble(dir.path.string(), ens, 0xABCDEF);

  CHECK(fs::exists(dir.path / "manifest.json"));
  CHECK(fs::exists(dir.path / "training_log.csv"));
  CHECK(fs::exists(dir.path / "member_0.json"));

  std::string log = read_file((dir.path / "training_log.csv").string());
  CHECK(log.rfind("# tool_version=", 0) == 0);
  CHECK(log.find("fold,epoch,train_loss,val_loss") != std::string::npos);

  auto back = harness::load_ensemble(dir.path.string());
  CHECK(back.method == ens.method);
  CHECK(back.seed == ens.seed);
  CHECK(back.val_losses == ens.val_losses);
  REQUIRE(back.members.size() == ens.members.size());
  for (std::size_t i = 0; i < back.members.size(); ++i) {
    CHECK(back.members[i].scaler == ens.members[i].scaler);
    CHECK(forest::forest_to_json(back.members[i].rf, back.members[i].scaler) ==
          forest::forest_to_json(ens.members[i].rf, ens.members[i].scaler));
  }
  for (const auto& s : pool)
    CHECK((harness::ensemble_predict(back, s.raw, {}).probs.array() ==
           harness::ensemble_predict(ens, s.raw, {}).probs.array())
              .all());

  CHECK_THROWS_AS((void)harness::load_ensemble((dir.path / "missing").string()), Error);
}

TEST_CASE("a saved cnn ensemble reloads with identical predictions") {
  TempDir dir("mrseq_harness_cnn");
  auto pool = toy_pool(4, 19);
  auto ens = harness::kfold_train(pool, 2, Method::Fusion, tiny_settings(2), 43);
  harness::save_ensemble(dir.path.string(), ens, 0x123);
  CHECK(fs::exists(dir.path / "member_0.bin"));

  auto back = harness::load_ensemble(dir.path.string());
  REQUIRE(back.members.size() == 2);
  for (const auto& s : pool) {
    auto a = harness::ensemble_predict(ens, s.raw, s.image);
    auto b = harness::ensemble_predict(back, s.raw, s.image);
    CHECK((a.probs.array() == b.probs.array()).all());
    CHECK(a.predicted == b.predicted);
  }
}

TEST_CASE("training does not depend on the worker count") {
  auto pool = toy_pool(8, 23);
  auto st = tiny_settings(2);

  setenv("MRSEQ_WORKERS", "1", 1);
  auto serial = harness::kfold_train(pool, 4, Method::Fusion, st, 51);
  setenv("MRSEQ_WORKERS", "8", 1);
  auto parallel = harness::kfold_train(pool, 4, Method::Fusion, st, 51);
  unsetenv("MRSEQ_WORKERS");

  CHECK(serial.val_losses == parallel.val_losses);
  REQUIRE(serial.members.size() == parallel.members.size());
  for (std::size_t i = 0; i < serial.members.size(); ++i) {
    auto a = nn::save_model_bytes(serial.members[i].cnn,
                                  feat::scaler_to_json(serial.members[i].scaler));
    auto b = nn::save_model_bytes(parallel.members[i].cnn,
                                  feat::scaler_to_json(parallel.members[i].scaler));
    CHECK(a == b);
  }
  // Log rows arrive fold-ordered regardless of scheduling.
  REQUIRE(serial.log.size() == parallel.log.size());
  for (std::size_t i = 0; i < serial.log.size(); ++i) {
    CHECK(serial.log[i].fold == parallel.log[i].fold);
    CHECK(serial.log[i].epoch == parallel.log[i].epoch);
    CHECK(serial.log[i].train_loss == parallel.log[i].train_loss);
    CHECK(serial.log[i].val_loss == parallel.log[i].val_loss);
  }
}
