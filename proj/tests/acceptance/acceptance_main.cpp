// Release gate. Each check covers one shipping criterion end to end and
// prints a single PASS/FAIL line with the measured evidence; the process
// exits nonzero when any gating check fails. The final check runs against
// operator-supplied DICOM data when MRSEQ_IDC_DIR is set and never gates.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "mrseq/commands.hpp"
#include "mrseq/common.hpp"
#include "mrseq/dicom.hpp"
#include "mrseq/evaluate.hpp"
#include "mrseq/features.hpp"
#include "mrseq/geometry.hpp"
#include "mrseq/harness.hpp"
#include "mrseq/imaging.hpp"
#include "mrseq/labeling.hpp"
#include "mrseq/nn.hpp"
#include "mrseq/synth.hpp"
#include "support/random_instance.hpp"

namespace fs = std::filesystem;
using namespace mrseq;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt_e(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
  bool skipped = false;
};

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

// ---------------------------------------------------------------------------
// 1. Parser round-trip and truncation fuzzing
// ---------------------------------------------------------------------------

Outcome parser_round_trip() {
  auto t0 = Clock::now();
  SeededRng rng(20260816);

  for (int i = 0; i < 1000; ++i) {
    auto m = testsupport::make_random_instance(rng);
    auto syntax = i % 2 ? dicom::TransferSyntax::ImplicitLittleEndian
                        : dicom::TransferSyntax::ExplicitLittleEndian;
    auto back = dicom::parse_part10(dicom::serialize_part10(m, syntax));
    if (!(back == m))
      return {false, "instance " + std::to_string(i) + " drifted through serialize/parse"};
  }

  std::vector<std::vector<std::uint8_t>> pool;
  for (int i = 0; i < 50; ++i) {
    auto m = testsupport::make_random_instance(rng);
    auto syntax = i % 2 ? dicom::TransferSyntax::ImplicitLittleEndian
                        : dicom::TransferSyntax::ExplicitLittleEndian;
    pool.push_back(dicom::serialize_part10(m, syntax));
  }
  int rejected = 0, parsed = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto& full = pool[rng.next_below(pool.size())];
    auto cut = static_cast<std::size_t>(rng.next_below(full.size()));
    try {
      (void)dicom::parse_part10(std::span<const std::uint8_t>(full.data(), cut));
      ++parsed;  // prefix happened to end on an element boundary
    } catch (const Error&) {
      ++rejected;
    }
    // anything else escapes to the harness and fails the criterion
  }

  double secs = seconds_since(t0);
  bool ok = secs < 30.0;
  return {ok, "1000 random instances round-trip field-for-field under both transfer syntaxes; "
              "10000 truncated streams: " +
              std::to_string(rejected) + " rejected cleanly, " + std::to_string(parsed) +
              " parsed as shorter datasets, 0 crashes; " + fmt(secs, 1) + "s (budget 30s)"};
}

// ---------------------------------------------------------------------------
// 2. Volume-overlap detection vs the quadratic oracle
// ---------------------------------------------------------------------------

Eigen::Matrix<double, 6, 1> make_iop(const Eigen::Vector3d& row, const Eigen::Vector3d& col) {
  Eigen::Matrix<double, 6, 1> iop;
  iop << row, col;
  return iop;
}

Eigen::Matrix<double, 6, 1> random_iop(SeededRng& rng) {
  Eigen::Vector3d row, col;
  do {
    row = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  } while (row.norm() < 1e-6);
  row.normalize();
  do {
    Eigen::Vector3d t(rng.normal(), rng.normal(), rng.normal());
    col = t - t.dot(row) * row;
  } while (col.norm() < 1e-6);
  col.normalize();
  return make_iop(row, col);
}

// Slice grid with optional revisits: position jitter stays well under the
// overlap tolerance and distinct positions sit well over it, so permutation
// and translation cannot flip any comparison.
dicom::SeriesRecord random_series(SeededRng& rng) {
  dicom::SeriesRecord s;
  s.series_instance_uid = "s";
  s.patient_id = "p";
  const bool oriented = rng.uniform() < 0.85;
  const auto iop = random_iop(rng);
  const Eigen::Vector3d normal =
      iop.head<3>().cross(Eigen::Vector3d(iop.tail<3>())).normalized();
  const Eigen::Vector3d origin(rng.uniform(-100, 100), rng.uniform(-100, 100),
                               rng.uniform(-100, 100));
  const Eigen::Vector3d row = iop.head<3>(), col = iop.tail<3>();

  const int positions = 1 + static_cast<int>(rng.next_below(12));
  const double spacing = rng.uniform(1.0, 5.0);
  const int volumes = rng.uniform() < 0.5 ? 1 + static_cast<int>(rng.next_below(4)) : 1;

  int counter = 0;
  for (int v = 0; v < volumes; ++v) {
    for (int p = 0; p < positions; ++p) {
      if (rng.uniform() < 0.08) continue;  // dropped instance
      dicom::InstanceMetadata m;
      m.series_instance_uid = "s";
      m.sop_instance_uid = "s." + std::to_string(counter++);
      if (oriented && rng.uniform() < 0.95) m.image_orientation_patient = iop;
      if (rng.uniform() < 0.92)
        m.image_position_patient = origin + (p * spacing + rng.uniform(-0.002, 0.002)) * normal +
                                   rng.uniform(-40, 40) * row + rng.uniform(-40, 40) * col;
      s.instances.push_back(std::move(m));
    }
  }
  if (s.instances.empty()) {
    dicom::InstanceMetadata m;
    m.series_instance_uid = "s";
    m.sop_instance_uid = "s.0";
    s.instances.push_back(std::move(m));
  }
  return s;
}

std::optional<Eigen::Vector3d> oracle_normal(const dicom::SeriesRecord& s) {
  for (const auto& m : s.instances) {
    if (!m.image_orientation_patient) continue;
    Eigen::Vector3d r = m.image_orientation_patient->head<3>();
    Eigen::Vector3d c = m.image_orientation_patient->tail<3>();
    Eigen::Vector3d n = r.cross(c);
    if (n.norm() > 1e-6) return n.normalized();
  }
  return std::nullopt;
}

// Ground truth by brute force: overlap exists iff any pair of located
// instances projects within the tolerance along the series normal.
bool oracle_is4d(const dicom::SeriesRecord& s, double tol) {
  auto normal = oracle_normal(s);
  if (!normal) return false;
  std::vector<double> offsets;
  for (const auto& m : s.instances)
    if (m.image_position_patient) offsets.push_back(normal->dot(*m.image_position_patient));
  for (std::size_t i = 0; i < offsets.size(); ++i)
    for (std::size_t j = i + 1; j < offsets.size(); ++j)
      if (std::abs(offsets[i] - offsets[j]) <= tol) return true;
  return false;
}

Outcome geometry_oracle() {
  SeededRng rng(515151);
  for (int i = 0; i < 500; ++i) {
    auto s = random_series(rng);
    auto g = geom::compute_geometry(s);
    if (g.is4d != oracle_is4d(s, geom::kDefaultOverlapTolMm))
      return {false, "series " + std::to_string(i) + " disagrees with the pairwise oracle"};
  }

  for (int i = 0; i < 100; ++i) {
    auto s = random_series(rng);
    auto g1 = geom::compute_geometry(s);

    auto shuffled = s;
    rng.shuffle(shuffled.instances);
    auto g2 = geom::compute_geometry(shuffled);

    auto moved = s;
    Eigen::Vector3d t(rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-500, 500));
    for (auto& m : moved.instances)
      if (m.image_position_patient) *m.image_position_patient += t;
    auto g3 = geom::compute_geometry(moved);

    for (const auto* g : {&g2, &g3}) {
      if (g->is4d != g1.is4d || g->distinct_positions != g1.distinct_positions ||
          g->orientation_class != g1.orientation_class)
        return {false, "case " + std::to_string(i) +
                           " changed under instance permutation or rigid translation"};
    }
  }
  return {true, "overlap flag equals the quadratic pairwise oracle on 500 random series; "
                "permutation and whole-stack translation leave 100 resampled cases unchanged"};
}

// ---------------------------------------------------------------------------
// 3. Analytic gradients vs central finite differences
// ---------------------------------------------------------------------------

Outcome gradient_check() {
  auto t0 = Clock::now();
  auto cfg = nn::tiny_config(nn::Mode::Fusion);
  auto model = nn::make_model<double>(cfg, 99);

  SeededRng rng(606060);
  nn::Mat<double> image(cfg.image_size, cfg.image_size);
  for (int r = 0; r < cfg.image_size; ++r)
    for (int c = 0; c < cfg.image_size; ++c) image(r, c) = rng.uniform();
  nn::Vec<double> meta(cfg.metadata_dim);
  for (int i = 0; i < cfg.metadata_dim; ++i) meta[i] = rng.normal();
  std::optional<nn::Vec<double>> marg = meta;
  const int label = 2;

  auto cache = nn::forward(model, image, marg);
  auto grads = nn::backward(model, cache, label);
  auto params = model.params();
  auto gparams = grads.params();
  auto names = nn::FusionCnn<double>::param_names();

  const double h = 1e-5;
  double worst = 0.0, max_analytic = 0.0;
  std::string worst_group = names.front();
  long checked = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    nn::Mat<double>& w = *params[b];
    const nn::Mat<double>& g = *gparams[b];
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      double save = w.data()[k];
      w.data()[k] = save + h;
      double lp = nn::loss_scce(nn::forward(model, image, marg).probs, label);
      w.data()[k] = save - h;
      double lm = nn::loss_scce(nn::forward(model, image, marg).probs, label);
      w.data()[k] = save;
      double fd = (lp - lm) / (2.0 * h);
      double an = g.data()[k];
      max_analytic = std::max(max_analytic, std::abs(an));
      double rel = std::abs(fd - an) / std::max({std::abs(an), std::abs(fd), 1e-6});
      if (rel > worst) {
        worst = rel;
        worst_group = names[b];
      }
      ++checked;
    }
  }

  double secs = seconds_since(t0);
  bool ok = worst <= 1e-3 && max_analytic > 0.0 && secs < 60.0;
  return {ok, "central differences over all " + std::to_string(checked) + " parameters in " +
              std::to_string(params.size()) + " groups (8x8 fusion input): worst relative error " +
              fmt_e(worst) + " in " + worst_group + " (tolerance 1e-3); " + fmt(secs, 1) +
              "s (budget 60s)"};
}

// ---------------------------------------------------------------------------
// 4. Small-sample overfit
// ---------------------------------------------------------------------------

Outcome overfit_small_set() {
  auto data = synth::generate_dataset(synth::internal_profiles(), 4, 77);

  std::vector<feat::RawMetadata> raws;
  std::vector<nn::Mat<float>> images;
  std::vector<int> labels;
  for (const auto& gs : data) {
    auto g = geom::compute_geometry(gs.record);
    raws.push_back(feat::extract_raw(gs.record, g));
    images.push_back(img::prepare_input<float>(gs.record, g));
    labels.push_back(static_cast<int>(gs.truth));
  }
  auto scaler = feat::fit_scaler(raws);

  std::vector<nn::TrainExample<float>> examples;
  for (std::size_t i = 0; i < raws.size(); ++i) {
    nn::TrainExample<float> ex;
    ex.image = images[i];
    ex.metadata = feat::vectorize(raws[i], scaler).cast<float>();
    ex.label = labels[i];
    examples.push_back(std::move(ex));
  }

  nn::CnnConfig cfg;  // production 64x64 fusion configuration
  cfg.mode = nn::Mode::Fusion;
  auto model = nn::make_model<float>(cfg, 5);
  auto adam = nn::AdamState<float>::zero_like(model);
  SeededRng shuffle_rng(SeededRng::derive(5, 0x6f766572));

  int reached = -1;
  for (int epoch = 1; epoch <= 200; ++epoch) {
    nn::train_one_epoch(model, adam, examples, 8, shuffle_rng);
    int correct = 0;
    for (const auto& ex : examples) {
      auto probs = nn::predict(model, ex.image, nn::metadata_arg(model, ex));
      Eigen::Index am = 0;
      probs.maxCoeff(&am);
      correct += static_cast<int>(am) == ex.label;
    }
    if (correct == static_cast<int>(examples.size())) {
      reached = epoch;
      break;
    }
  }

  if (reached < 0)
    return {false, "training accuracy never reached " + std::to_string(examples.size()) + "/" +
                   std::to_string(examples.size()) + " within 200 epochs"};
  return {true, "fusion model memorizes all " + std::to_string(examples.size()) +
                " training examples by epoch " + std::to_string(reached) + " (limit 200)"};
}

// ---------------------------------------------------------------------------
// 5 and 6 share the trained ensembles.
// ---------------------------------------------------------------------------

std::vector<harness::TrainSeries> build_pool(const synth::ProfileSet& set, int patients,
                                             std::uint64_t seed) {
  std::vector<harness::TrainSeries> pool;
  for (const auto& gs : synth::generate_dataset(set, patients, seed)) {
    auto g = geom::compute_geometry(gs.record);
    harness::TrainSeries ts;
    ts.patient_id = gs.record.patient_id;
    ts.series_uid = gs.record.series_instance_uid;
    ts.raw = feat::extract_raw(gs.record, g);
    ts.image = img::prepare_input<float>(gs.record, g);
    ts.label = static_cast<int>(gs.truth);
    pool.push_back(std::move(ts));
  }
  return pool;
}

struct TrainedModels {
  harness::FoldEnsemble metadata, images, fusion;
  double train_seconds = 0.0;
};

const TrainedModels& ensure_trained() {
  static std::optional<TrainedModels> cached;
  if (!cached) {
    auto t0 = Clock::now();
    auto pool = build_pool(synth::internal_profiles(), 50, 1001);
    harness::TrainSettings settings;  // production defaults
    TrainedModels m;
    m.metadata = harness::kfold_train(pool, 4, harness::Method::Metadata, settings, 42);
    m.images = harness::kfold_train(pool, 4, harness::Method::Images, settings, 42);
    m.fusion = harness::kfold_train(pool, 4, harness::Method::Fusion, settings, 42);
    m.train_seconds = seconds_since(t0);
    cached = std::move(m);
  }
  return *cached;
}

eval::EvaluationReport score(const harness::FoldEnsemble& ensemble,
                             const std::vector<harness::TrainSeries>& test,
                             const std::string& split) {
  std::vector<int> truths, preds;
  for (const auto& ts : test) {
    truths.push_back(ts.label);
    preds.push_back(harness::ensemble_predict(ensemble, ts.raw, ts.image).predicted);
  }
  return eval::report(truths, preds, 1.0, split);
}

double min_f1(const eval::EvaluationReport& rep) {
  double mn = 1.0;
  for (const auto& pc : rep.per_class) mn = std::min(mn, pc.f);
  return mn;
}

Outcome internal_cohort() {
  auto t0 = Clock::now();
  const auto& models = ensure_trained();
  auto test = build_pool(synth::internal_profiles(), 20, 2002);

  const struct {
    const char* name;
    const harness::FoldEnsemble* ensemble;
  } methods[] = {{"metadata", &models.metadata},
                 {"images", &models.images},
                 {"fusion", &models.fusion}};

  double worst = 1.0;
  std::string parts;
  for (const auto& m : methods) {
    double mn = min_f1(score(*m.ensemble, test, "internal-test"));
    worst = std::min(worst, mn);
    parts += std::string(parts.empty() ? "" : ", ") + m.name + " " + fmt(mn);
  }

  double secs = seconds_since(t0);
  bool ok = worst >= 0.95 && secs < 600.0;
  return {ok, "50 train/val + 20 held-out patients: per-class F1 minima " + parts +
              " (threshold 0.95); " + fmt(secs, 1) + "s including training (budget 600s)"};
}

Outcome external_shift() {
  const auto& models = ensure_trained();
  auto test = build_pool(synth::external_profiles(), 20, 3003);

  double meta_dwi = score(models.metadata, test, "external-test")
                        .per_class[static_cast<int>(SeqClass::DWI)].f;
  double fusion_dwi = score(models.fusion, test, "external-test")
                          .per_class[static_cast<int>(SeqClass::DWI)].f;
  double margin = fusion_dwi - meta_dwi;
  return {margin >= 0.05, "distribution-shifted cohort DWI F1: fusion " + fmt(fusion_dwi) +
                          " vs metadata " + fmt(meta_dwi) + " (margin " + fmt(margin) +
                          ", required >= 0.05)"};
}

// ---------------------------------------------------------------------------
// 7. F-beta hand-verified cases
// ---------------------------------------------------------------------------

Outcome fbeta_hand_cases() {
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  const double betas[] = {0.5, 1.0, 2.0};

  std::vector<std::pair<int, int>> diag;
  for (int c = 0; c < kNumClasses; ++c)
    for (int k = 0; k < 3; ++k) diag.emplace_back(c, c);
  auto perfect = eval::confusion_matrix(diag);
  for (int c = 0; c < kNumClasses; ++c)
    for (double b : betas)
      if (!close(eval::f_beta(perfect, c, b), 1.0))
        return {false, "perfect confusion did not score F=1"};

  std::vector<std::pair<int, int>> swapped = {{0, 0}, {0, 0}, {3, 3}, {3, 3},
                                              {1, 2}, {1, 2}, {2, 1}, {2, 1}};
  auto sw = eval::confusion_matrix(swapped);
  if (!close(eval::f_beta(sw, 1, 1.0), 0.0) || !close(eval::f_beta(sw, 2, 1.0), 0.0) ||
      !close(eval::f_beta(sw, 0, 1.0), 1.0) || !close(eval::f_beta(sw, 3, 1.0), 1.0))
    return {false, "swapped DWI/ADC case scored wrong"};

  // Class 2 and 3 never occur and are never predicted: every denominator is
  // zero and the score must collapse to 0, not NaN.
  auto absent = eval::confusion_matrix({{0, 0}, {1, 1}});
  for (double b : betas)
    if (!close(eval::f_beta(absent, 2, b), 0.0) || !close(eval::f_beta(absent, 3, b), 0.0))
      return {false, "absent class did not score 0"};

  // tp=3, fp=1, fn=2 for class 0: P=0.75, R=0.6.
  std::vector<std::pair<int, int>> hand = {{0, 0}, {0, 0}, {0, 0}, {0, 1}, {0, 1}, {1, 0}, {3, 3}};
  auto hm = eval::confusion_matrix(hand);
  if (!close(eval::f_beta(hm, 0, 1.0), 2.0 / 3.0) || !close(eval::f_beta(hm, 0, 2.0), 0.625) ||
      !close(eval::f_beta(hm, 0, 0.5), 5.0 / 7.0))
    return {false, "hand-computed tp=3/fp=1/fn=2 scores drifted beyond 1e-9"};

  return {true, "perfect, swapped-pair, all-zero-denominator, and tp=3/fp=1/fn=2 confusions "
                "score exactly as hand-computed for beta in {0.5, 1, 2}"};
}

// ---------------------------------------------------------------------------
// 8. Byte-level determinism of the full pipeline
// ---------------------------------------------------------------------------

void run_step(const std::vector<std::string>& args) {
  int rc = cli::run(args);
  if (rc != 0) throw Error("pipeline step '" + args[0] + "' exited " + std::to_string(rc));
}

void run_pipeline(const fs::path& root) {
  fs::create_directories(root);
  const auto data = (root / "data").string();
  const auto dicom_dir = (root / "data" / "dicom").string();
  const auto manifest = (root / "ingest" / "manifest.csv").string();
  const auto labels = (root / "curate" / "labels.csv").string();

  run_step({"synth", "--out", data, "--patients", "5", "--seed", "31"});
  run_step({"ingest", "--input", data, "--out", (root / "ingest").string(), "--seed", "31"});
  run_step({"curate", "--manifest", manifest, "--out", (root / "curate").string(), "--seed",
            "31"});
  run_step({"train", "--data", dicom_dir, "--labels", labels, "--out",
            (root / "model_meta").string(), "--method", "metadata", "--k", "2", "--seed", "9"});
  run_step({"train", "--data", dicom_dir, "--labels", labels, "--out",
            (root / "model_fusion").string(), "--method", "fusion", "--k", "2", "--epochs", "2",
            "--seed", "9"});
  run_step({"classify", "--model", (root / "model_meta").string(), "--data", dicom_dir, "--out",
            (root / "preds_meta.csv").string()});
  run_step({"classify", "--model", (root / "model_fusion").string(), "--data", dicom_dir, "--out",
            (root / "preds_fusion.csv").string()});
  run_step({"evaluate", "--predictions", (root / "preds_meta.csv").string(), "--truth",
            data + "/truth.csv", "--out", (root / "eval").string()});
  run_step({"plot", "--manifest", manifest, "--labels", labels, "--out", (root / "plot").string(),
            "--seed", "31"});
}

std::vector<std::string> rel_files(const fs::path& root) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).generic_string());
  std::sort(out.begin(), out.end());
  return out;
}

Outcome pipeline_determinism() {
  TempDir tmp("mrseq-acceptance-determinism");
  const auto a = tmp.path / "a";
  const auto b = tmp.path / "b";
  run_pipeline(a);
  run_pipeline(b);

  auto fa = rel_files(a);
  auto fb = rel_files(b);
  if (fa != fb) return {false, "the two identical-seed runs produced different artifact sets"};
  for (const auto& rel : fa)
    if (read_file_bytes((a / rel).string()) != read_file_bytes((b / rel).string()))
      return {false, "artifact " + rel + " differs between identical-seed runs"};

  return {true, "two identical-seed runs of synth/ingest/curate/train(x2)/classify(x2)/evaluate/"
                "plot produced " +
                std::to_string(fa.size()) + " byte-identical artifacts each"};
}

// ---------------------------------------------------------------------------
// 9. Curation coverage on the default synthetic mix
// ---------------------------------------------------------------------------

Outcome curation_coverage() {
  auto data = synth::generate_dataset(synth::internal_profiles(), 30, 404);
  std::vector<label::CurationInput> inputs;
  for (const auto& gs : data)
    inputs.push_back({gs.record.series_instance_uid, gs.record.series_description,
                      geom::compute_geometry(gs.record)});
  auto rules = label::load_rules(label::kDefaultRuleTable);
  auto result = label::curate(inputs, rules);

  double cov = result.coverage_fraction;
  bool ok = cov >= 0.85 && cov <= 0.95;
  return {ok, "default rules label " + std::to_string(result.labeled.size()) + " of " +
              std::to_string(inputs.size()) + " series (coverage " + fmt(cov) +
              ", window [0.85, 0.95]); " + std::to_string(result.unmatched.size()) +
              " unmatched, " + std::to_string(result.excluded.size()) + " excluded"};
}

// ---------------------------------------------------------------------------
// 10. Operator-supplied data smoke run (never gates)
// ---------------------------------------------------------------------------

Outcome operator_data_smoke() {
  const char* dir = std::getenv("MRSEQ_IDC_DIR");
  if (!dir || !fs::is_directory(dir))
    return {true, "MRSEQ_IDC_DIR is not set to a directory; ingest+curate smoke run not "
                  "exercised (informational only)", true};

  TempDir tmp("mrseq-acceptance-idc");
  const auto manifest = (tmp.path / "manifest.csv").string();
  const auto labels = (tmp.path / "labels.csv").string();
  int rc = cli::run({"ingest", "--input", dir, "--out", manifest});
  if (rc != 0) return {false, std::string("ingest exited ") + std::to_string(rc) + " on " + dir};
  rc = cli::run({"curate", "--manifest", manifest, "--out", labels});
  if (rc != 0) return {false, "curate exited " + std::to_string(rc)};

  std::string coverage = "coverage line missing";
  for (const auto& line : split(read_file(labels), '\n'))
    if (line.rfind("# coverage=", 0) == 0) coverage = trim(line.substr(2));
  return {true, std::string("ingested ") + dir + " and curated it; " + coverage};
}

}  // namespace

int main() {
  struct Check {
    int id;
    bool gating;
    std::function<Outcome()> fn;
  };
  const std::vector<Check> checks = {
      {1, true, parser_round_trip},  {2, true, geometry_oracle},
      {3, true, gradient_check},     {4, true, overfit_small_set},
      {5, true, internal_cohort},    {6, true, external_shift},
      {7, true, fbeta_hand_cases},   {8, true, pipeline_determinism},
      {9, true, curation_coverage},  {10, false, operator_data_smoke},
  };

  int failed = 0;
  for (const auto& check : checks) {
    Outcome o;
    try {
      o = check.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("unexpected exception: ") + e.what()};
    }
    const char* tag = o.skipped ? "SKIP" : o.pass ? "PASS" : "FAIL";
    std::printf("%s criterion %d: %s\n", tag, check.id, o.detail.c_str());
    std::fflush(stdout);
    if (check.gating && !o.pass) ++failed;
  }

  if (failed) std::printf("%d gating criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
