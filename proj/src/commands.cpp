#include "mrseq/commands.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <utility>

#include <CLI11.hpp>

#include "mrseq/dicom.hpp"
#include "mrseq/evaluate.hpp"
#include "mrseq/features.hpp"
#include "mrseq/harness.hpp"
#include "mrseq/imaging.hpp"
#include "mrseq/labeling.hpp"
#include "mrseq/synth.hpp"

namespace fs = std::filesystem;

namespace mrseq::cli {
namespace {

std::string hash_hex(const std::string& canonical) { return to_hex(fnv1a64(canonical)); }

std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::optional<double> parse_opt_double(const std::string& field) {
  if (field.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size())
    throw UsageError("not a number: '" + field + "'");
  return v;
}

// ---------------------------------------------------------------------------
// CSV tables written by this tool: '#' comment lines (key=value captured),
// one header row, then data rows.
// ---------------------------------------------------------------------------
struct CsvTable {
  std::map<std::string, std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path) {
  if (!fs::is_regular_file(path)) throw UsageError("no such file: " + path);
  CsvTable table;
  for (const std::string& line : split(read_file(path), '\n')) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = trim(line.substr(1));
      auto eq = body.find('=');
      if (eq != std::string::npos)
        table.comments[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
      continue;
    }
    if (table.header.empty())
      table.header = csv_split_line(line);
    else
      table.rows.push_back(csv_split_line(line));
  }
  if (table.header.empty()) throw UsageError("no header row in " + path);
  for (const auto& row : table.rows)
    if (row.size() != table.header.size())
      throw UsageError("ragged row in " + path);
  return table;
}

std::size_t col(const CsvTable& table, const std::string& name) {
  auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) throw UsageError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - table.header.begin());
}

std::optional<std::size_t> col_opt(const CsvTable& table, const std::string& name) {
  auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - table.header.begin());
}

geom::Orientation orientation_from_string(const std::string& s) {
  for (auto o : {geom::Orientation::Axial, geom::Orientation::Sagittal, geom::Orientation::Coronal,
                 geom::Orientation::Oblique, geom::Orientation::Unknown})
    if (s == geom::to_string(o)) return o;
  throw UsageError("unknown orientation '" + s + "'");
}

// Recursive lexicographic scan; files parse in parallel. With `skips` null
// any unparseable file aborts the load, otherwise it lands in `skips` with
// its reason and the scan continues.
std::vector<dicom::SeriesRecord> load_series_dir(
    const std::string& dir, std::vector<std::pair<std::string, std::string>>* skips) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
    return a.lexically_relative(dir).generic_string() < b.lexically_relative(dir).generic_string();
  });

  std::vector<std::optional<dicom::InstanceMetadata>> metas(files.size());
  std::vector<std::string> errors(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    try {
      auto instance = dicom::parse_part10(read_file_bytes(files[i].string()));
      if (instance.series_instance_uid.empty())
        errors[i] = "missing SeriesInstanceUID";
      else
        metas[i] = std::move(instance);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::vector<dicom::InstanceMetadata> instances;
  instances.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (metas[i]) {
      instances.push_back(std::move(*metas[i]));
      continue;
    }
    std::string rel = files[i].lexically_relative(dir).generic_string();
    if (skips)
      skips->emplace_back(std::move(rel), errors[i]);
    else
      throw UsageError(rel + ": " + errors[i]);
  }
  try {
    return dicom::group_series(instances);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------
void cmd_synth(const SynthOptions& opt) {
  if (opt.patients <= 0) throw UsageError("--patients must be positive");
  synth::ProfileSet set;
  std::string profile_tag;
  if (!opt.profile_json_path.empty()) {
    if (!fs::is_regular_file(opt.profile_json_path))
      throw UsageError("no such file: " + opt.profile_json_path);
    std::string text = read_file(opt.profile_json_path);
    try {
      set = synth::profiles_from_json(text);
    } catch (const MalformedJson& e) {
      throw UsageError(std::string("bad profile JSON: ") + e.what());
    }
    profile_tag = "json:" + to_hex(fnv1a64(text));
  } else if (opt.profile == "internal") {
    set = synth::internal_profiles();
    profile_tag = "internal";
  } else if (opt.profile == "external") {
    set = synth::external_profiles();
    profile_tag = "external";
  } else {
    throw UsageError("unknown profile '" + opt.profile + "' (internal|external)");
  }

  auto dataset = synth::generate_dataset(set, opt.patients, opt.seed);
  std::string cfg = hash_hex("synth|patients=" + std::to_string(opt.patients) +
                             "|profile=" + profile_tag + "|seed=" + std::to_string(opt.seed));

  fs::create_directories(fs::path(opt.out_dir) / "dicom");
  write_file((fs::path(opt.out_dir) / "profiles.json").string(), synth::profiles_to_json(set));

  std::string truth = provenance_header(opt.seed, cfg);
  truth += "series_uid,patient_id,class,nonconforming\n";
  for (const auto& gs : dataset) {
    truth += csv_escape(gs.record.series_instance_uid) + "," + csv_escape(gs.record.patient_id) +
             "," + to_string(gs.truth) + "," + (gs.nonconforming_description ? "1" : "0") + "\n";
    fs::path series_dir =
        fs::path(opt.out_dir) / "dicom" / gs.record.patient_id / gs.record.series_instance_uid;
    fs::create_directories(series_dir);
    for (const auto& instance : gs.record.instances)
      write_file_bytes((series_dir / (instance.sop_instance_uid + ".dcm")).string(),
                       dicom::serialize_part10(instance));
  }
  write_file((fs::path(opt.out_dir) / "truth.csv").string(), truth);
  std::cout << "wrote " << dataset.size() << " series for " << opt.patients << " patients to "
            << opt.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------
void cmd_ingest(const IngestOptions& opt) {
  std::vector<std::pair<std::string, std::string>> skips;
  auto series = load_series_dir(opt.input_dir, &skips);
  std::string cfg = hash_hex("ingest|tol=" + format_double(opt.overlap_tol));

  std::string manifest = provenance_header(opt.seed, cfg);
  manifest +=
      "series_uid,patient_id,description,instances,orientation,distinct_positions,is4d,tr,te,fa,"
      "codes,contrast\n";
  for (const auto& s : series) {
    auto geometry = geom::compute_geometry(s, opt.overlap_tol);
    auto raw = feat::extract_raw(s, geometry);
    std::string codes;
    for (const auto& c : raw.scanning_sequence) {
      if (!codes.empty()) codes += '+';
      codes += c;
    }
    manifest += csv_escape(s.series_instance_uid) + "," + csv_escape(s.patient_id) + "," +
                csv_escape(s.series_description) + "," + std::to_string(s.instances.size()) + "," +
                geom::to_string(geometry.orientation_class) + "," +
                std::to_string(geometry.distinct_positions) + "," + (geometry.is4d ? "1" : "0") +
                "," + opt_field(raw.repetition_time) + "," + opt_field(raw.echo_time) + "," +
                opt_field(raw.flip_angle) + "," + csv_escape(codes) + "," +
                (raw.contrast_present ? "1" : "0") + "\n";
  }

  std::string skipped = provenance_header(opt.seed, cfg) + "path,reason\n";
  for (const auto& [path, reason] : skips)
    skipped += csv_escape(path) + "," + csv_escape(reason) + "\n";

  fs::create_directories(opt.out_dir);
  write_file((fs::path(opt.out_dir) / "manifest.csv").string(), manifest);
  write_file((fs::path(opt.out_dir) / "skipped.csv").string(), skipped);
  std::cout << "ingested " << series.size() << " series, skipped " << skips.size() << " files\n";
}

// ---------------------------------------------------------------------------
// curate
// ---------------------------------------------------------------------------
void cmd_curate(const CurateOptions& opt) {
  std::string rules_text;
  if (opt.rules_path.empty()) {
    rules_text = label::kDefaultRuleTable;
  } else {
    if (!fs::is_regular_file(opt.rules_path)) throw UsageError("no such file: " + opt.rules_path);
    rules_text = read_file(opt.rules_path);
  }
  std::vector<label::LabelRule> rules;
  try {
    rules = label::load_rules(rules_text);
  } catch (const Error& e) {
    throw UsageError(std::string("bad rule table: ") + e.what());
  }

  CsvTable manifest = read_csv(opt.manifest_path);
  std::size_t c_uid = col(manifest, "series_uid");
  std::size_t c_desc = col(manifest, "description");
  std::size_t c_orient = col(manifest, "orientation");

  std::vector<label::CurationInput> inputs;
  inputs.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) {
    label::CurationInput in;
    in.series_uid = row[c_uid];
    in.description = row[c_desc];
    in.geometry.orientation_class = orientation_from_string(row[c_orient]);
    inputs.push_back(std::move(in));
  }
  auto result = label::curate(inputs, rules);
  std::string cfg = hash_hex("curate|rules=" + to_hex(fnv1a64(rules_text)));

  std::string report = provenance_header(opt.seed, cfg);
  report += "# coverage=" + format_double(result.coverage_fraction) + "\n";
  report += "series_uid,disposition,detail,rule_priority\n";
  for (const auto& in : inputs) {
    auto decision = label::assign_label(in.description, in.geometry, rules);
    std::string disposition, detail;
    switch (decision.disposition) {
      case label::Disposition::Assigned:
        disposition = "labeled";
        detail = to_string(decision.cls);
        break;
      case label::Disposition::Excluded:
        disposition = "excluded";
        detail = decision.reason;
        break;
      case label::Disposition::Unmatched:
        disposition = "unmatched";
        break;
    }
    report += csv_escape(in.series_uid) + "," + disposition + "," + csv_escape(detail) + "," +
              std::to_string(decision.rule_priority) + "\n";
  }

  std::string labels = provenance_header(opt.seed, cfg);
  labels += "series_uid,class\n";
  for (const auto& [uid, cls] : result.labeled)
    labels += csv_escape(uid) + "," + to_string(cls) + "\n";

  fs::create_directories(opt.out_dir);
  write_file((fs::path(opt.out_dir) / "curation.csv").string(), report);
  write_file((fs::path(opt.out_dir) / "labels.csv").string(), labels);
  std::cout << "labeled " << result.labeled.size() << "/" << inputs.size()
            << " series (coverage " << format_double(result.coverage_fraction) << ", "
            << result.excluded.size() << " excluded, " << result.unmatched.size()
            << " unmatched)\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------
void cmd_train(const TrainOptions& opt) {
  auto method = harness::method_from_string(opt.method);
  if (!method) throw UsageError("unknown method '" + opt.method + "' (metadata|images|fusion)");
  if (opt.max_epochs <= 0) throw UsageError("--epochs must be positive");

  CsvTable labels = read_csv(opt.labels_path);
  std::size_t c_uid = col(labels, "series_uid");
  std::size_t c_cls = col(labels, "class");
  std::map<std::string, SeqClass> truth;
  for (const auto& row : labels.rows) {
    auto cls = seq_class_from_string(row[c_cls]);
    if (!cls) throw UsageError("unknown class '" + row[c_cls] + "' for " + row[c_uid]);
    if (!truth.emplace(row[c_uid], *cls).second)
      throw UsageError("duplicate label for series " + row[c_uid]);
  }
  if (truth.empty()) throw UsageError("label file has no rows");

  auto series = load_series_dir(opt.data_dir, nullptr);
  std::vector<harness::TrainSeries> pool;
  pool.reserve(truth.size());
  for (const auto& s : series) {
    auto it = truth.find(s.series_instance_uid);
    if (it == truth.end()) continue;
    auto geometry = geom::compute_geometry(s, opt.overlap_tol);
    harness::TrainSeries ts;
    ts.patient_id = s.patient_id;
    ts.series_uid = s.series_instance_uid;
    ts.raw = feat::extract_raw(s, geometry);
    ts.label = static_cast<int>(it->second);
    if (*method != harness::Method::Metadata) ts.image = img::prepare_input<float>(s, geometry);
    pool.push_back(std::move(ts));
  }
  if (pool.size() != truth.size()) {
    for (const auto& [uid, cls] : truth) {
      (void)cls;
      if (std::none_of(pool.begin(), pool.end(),
                       [&](const harness::TrainSeries& t) { return t.series_uid == uid; }))
        throw UsageError("label references series absent from data: " + uid);
    }
  }

  std::vector<std::string> patients;
  for (const auto& t : pool) patients.push_back(t.patient_id);
  std::sort(patients.begin(), patients.end());
  patients.erase(std::unique(patients.begin(), patients.end()), patients.end());

  harness::SplitPlan plan;
  std::vector<harness::TrainSeries> train_pool;
  harness::FoldEnsemble ensemble;
  try {
    plan = harness::split_patients(patients, {opt.train_frac, opt.val_frac, opt.test_frac},
                                   opt.seed);
    std::set<std::string> pooled(plan.train.begin(), plan.train.end());
    pooled.insert(plan.val.begin(), plan.val.end());
    for (const auto& t : pool)
      if (pooled.count(t.patient_id)) train_pool.push_back(t);

    harness::TrainSettings settings;
    settings.max_epochs = opt.max_epochs;
    ensemble = harness::kfold_train(train_pool, opt.k, *method, settings, opt.seed);
  } catch (const BadFractions& e) {
    throw UsageError(e.what());
  } catch (const TooFewPatients& e) {
    throw UsageError(e.what());
  }

  std::string canonical = "train|epochs=" + std::to_string(opt.max_epochs) +
                          "|fractions=" + format_double(opt.train_frac) + ":" +
                          format_double(opt.val_frac) + ":" + format_double(opt.test_frac) +
                          "|k=" + std::to_string(opt.k) + "|method=" + opt.method +
                          "|seed=" + std::to_string(opt.seed) +
                          "|tol=" + format_double(opt.overlap_tol);
  harness::save_ensemble(opt.out_dir, ensemble, fnv1a64(canonical));
  write_file((fs::path(opt.out_dir) / "split.json").string(), harness::split_plan_to_json(plan));
  std::cout << "trained " << ensemble.members.size() << "-member " << opt.method
            << " ensemble on " << train_pool.size() << " series ("
            << plan.train.size() << "/" << plan.val.size() << "/" << plan.test.size()
            << " patient split) to " << opt.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------
void cmd_classify(const ClassifyOptions& opt) {
  if (!fs::is_regular_file(fs::path(opt.model_dir) / "manifest.json"))
    throw UsageError("no ensemble manifest in " + opt.model_dir);
  auto ensemble = harness::load_ensemble(opt.model_dir);
  auto series = load_series_dir(opt.data_dir, nullptr);

  std::string method_name = harness::to_string(ensemble.method);
  std::string cfg = hash_hex("classify|method=" + method_name +
                             "|seed=" + std::to_string(ensemble.seed) +
                             "|tol=" + format_double(opt.overlap_tol));
  std::string csv = provenance_header(ensemble.seed, cfg);
  csv += "# method=" + method_name + "\n";
  csv += "series_uid,patient_id,predicted";
  for (int c = 0; c < kNumClasses; ++c) csv += std::string(",p_") + to_string(SeqClass(c));
  for (std::size_t m = 0; m < ensemble.members.size(); ++m)
    for (int c = 0; c < kNumClasses; ++c)
      csv += ",m" + std::to_string(m) + "_" + to_string(SeqClass(c));
  csv += "\n";

  for (const auto& s : series) {
    auto geometry = geom::compute_geometry(s, opt.overlap_tol);
    auto raw = feat::extract_raw(s, geometry);
    nn::Mat<float> image;
    if (ensemble.method != harness::Method::Metadata) {
      try {
        image = img::prepare_input<float>(s, geometry);
      } catch (const NoPixelData& e) {
        throw UsageError(s.series_instance_uid + ": " + e.what());
      }
    }
    auto member_probs = harness::member_probabilities(ensemble, raw, image);
    auto prediction = harness::ensemble_predict(ensemble, raw, image);

    csv += csv_escape(s.series_instance_uid) + "," + csv_escape(s.patient_id) + "," +
           to_string(SeqClass(prediction.predicted));
    for (int c = 0; c < kNumClasses; ++c) csv += "," + format_double(prediction.probs[c]);
    for (const auto& probs : member_probs)
      for (int c = 0; c < kNumClasses; ++c) csv += "," + format_double(probs[c]);
    csv += "\n";
  }
  if (fs::path(opt.out_path).has_parent_path())
    fs::create_directories(fs::path(opt.out_path).parent_path());
  write_file(opt.out_path, csv);
  std::cout << "classified " << series.size() << " series with the " << method_name
            << " ensemble\n";
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------
void cmd_evaluate(const EvaluateOptions& opt) {
  CsvTable preds = read_csv(opt.predictions_path);
  CsvTable truth_table = read_csv(opt.truth_path);
  std::size_t pc_uid = col(preds, "series_uid");
  std::size_t pc_pred = col(preds, "predicted");
  std::size_t tc_uid = col(truth_table, "series_uid");
  std::size_t tc_cls = col(truth_table, "class");

  std::map<std::string, int> truth;
  for (const auto& row : truth_table.rows) {
    auto cls = seq_class_from_string(row[tc_cls]);
    if (!cls) throw UsageError("unknown class '" + row[tc_cls] + "' for " + row[tc_uid]);
    truth[row[tc_uid]] = static_cast<int>(*cls);
  }

  // Per-member probability columns, when the predictions carry them.
  std::vector<std::array<std::size_t, kNumClasses>> member_cols;
  for (std::size_t m = 0;; ++m) {
    std::array<std::size_t, kNumClasses> cols{};
    bool all = true;
    for (int c = 0; c < kNumClasses; ++c) {
      auto idx = col_opt(preds, "m" + std::to_string(m) + "_" + to_string(SeqClass(c)));
      if (!idx) {
        all = false;
        break;
      }
      cols[static_cast<std::size_t>(c)] = *idx;
    }
    if (!all) break;
    member_cols.push_back(cols);
  }

  std::vector<int> truths, predictions;
  std::vector<std::vector<int>> member_preds(member_cols.size());
  for (const auto& row : preds.rows) {
    auto it = truth.find(row[pc_uid]);
    if (it == truth.end()) throw UsageError("no truth for series " + row[pc_uid]);
    auto cls = seq_class_from_string(row[pc_pred]);
    if (!cls) throw UsageError("unknown class '" + row[pc_pred] + "' for " + row[pc_uid]);
    truths.push_back(it->second);
    predictions.push_back(static_cast<int>(*cls));
    for (std::size_t m = 0; m < member_cols.size(); ++m) {
      int best = 0;
      double best_p = -1.0;
      for (int c = 0; c < kNumClasses; ++c) {
        auto p = parse_opt_double(row[member_cols[m][static_cast<std::size_t>(c)]]);
        if (p && *p > best_p) {
          best_p = *p;
          best = c;
        }
      }
      member_preds[m].push_back(best);
    }
  }
  if (truths.empty()) throw UsageError("predictions file has no rows");

  std::string method = preds.comments.count("method") ? preds.comments.at("method") : "unknown";
  std::uint64_t seed = 0;
  if (preds.comments.count("seed"))
    seed = std::strtoull(preds.comments.at("seed").c_str(), nullptr, 10);

  auto rep = eval::report(truths, predictions, opt.beta, opt.split_name);
  std::string cfg = hash_hex("evaluate|beta=" + format_double(opt.beta) + "|method=" + method +
                             "|seed=" + std::to_string(seed) + "|split=" + opt.split_name);

  fs::create_directories(opt.out_dir);
  write_file((fs::path(opt.out_dir) / "report.csv").string(),
             eval::report_csv(method, rep, seed, cfg));
  write_file((fs::path(opt.out_dir) / "confusion.csv").string(),
             eval::confusion_csv(method, rep, seed, cfg));

  if (!member_cols.empty()) {
    std::array<double, kNumClasses> mean{};
    for (const auto& mp : member_preds) {
      std::vector<std::pair<int, int>> pairs;
      for (std::size_t i = 0; i < truths.size(); ++i) pairs.emplace_back(truths[i], mp[i]);
      auto confusion = eval::confusion_matrix(pairs);
      for (int c = 0; c < kNumClasses; ++c)
        mean[static_cast<std::size_t>(c)] +=
            eval::f_beta(confusion, c, opt.beta) / static_cast<double>(member_preds.size());
    }
    std::string fold_means = provenance_header(seed, cfg);
    fold_means += "method,split,class,f_beta_fold_mean\n";
    for (int c = 0; c < kNumClasses; ++c)
      fold_means += method + "," + opt.split_name + "," + to_string(SeqClass(c)) + "," +
                    format_double(mean[static_cast<std::size_t>(c)]) + "\n";
    write_file((fs::path(opt.out_dir) / "fold_mean.csv").string(), fold_means);
  }

  for (int c = 0; c < kNumClasses; ++c)
    std::cout << method << " " << opt.split_name << " " << to_string(SeqClass(c)) << " f"
              << format_double(opt.beta) << "="
              << format_double(rep.per_class[static_cast<std::size_t>(c)].f) << "\n";
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------
void cmd_plot(const PlotOptions& opt) {
  CsvTable manifest = read_csv(opt.manifest_path);
  std::size_t c_uid = col(manifest, "series_uid");
  std::size_t c_tr = col(manifest, "tr");
  std::size_t c_te = col(manifest, "te");
  std::size_t c_fa = col(manifest, "fa");
  std::size_t c_contrast = col(manifest, "contrast");
  std::size_t c_is4d = col(manifest, "is4d");

  std::map<std::string, std::string> classes;
  if (!opt.labels_path.empty()) {
    CsvTable labels = read_csv(opt.labels_path);
    std::size_t l_uid = col(labels, "series_uid");
    std::size_t l_cls = col(labels, "class");
    for (const auto& row : labels.rows) classes[row[l_uid]] = row[l_cls];
  }

  std::vector<synth::PlotRow> rows;
  rows.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) {
    synth::PlotRow pr;
    pr.series_uid = row[c_uid];
    auto it = classes.find(pr.series_uid);
    pr.cls = it == classes.end() ? std::string("Unlabeled") : it->second;
    pr.tr = parse_opt_double(row[c_tr]);
    pr.te = parse_opt_double(row[c_te]);
    pr.fa = parse_opt_double(row[c_fa]);
    pr.contrast = row[c_contrast] == "1";
    pr.is4d = row[c_is4d] == "1";
    rows.push_back(std::move(pr));
  }

  std::string cfg = hash_hex("plot|seed=" + std::to_string(opt.seed));
  fs::create_directories(opt.out_dir);
  try {
    write_file((fs::path(opt.out_dir) / "plot.csv").string(),
               synth::distribution_csv(rows, opt.seed, cfg));
    write_file((fs::path(opt.out_dir) / "plot.html").string(), synth::distribution_html(rows));
  } catch (const EmptyTable& e) {
    throw UsageError(e.what());
  }
  std::cout << "plotted " << rows.size() << " series\n";
}

// ---------------------------------------------------------------------------
// argument parsing and exit codes
// ---------------------------------------------------------------------------
int run(const std::vector<std::string>& args) {
  CLI::App app{"Prostate MRI series classification toolkit"};
  app.require_subcommand(1);
  app.footer("Worker threads: set MRSEQ_WORKERS (default: hardware concurrency).");

  SynthOptions so;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic DICOM dataset");
  c_synth->add_option("--out", so.out_dir, "Output directory")->required();
  c_synth->add_option("--patients", so.patients, "Number of patients");
  c_synth->add_option("--seed", so.seed, "RNG seed");
  c_synth->add_option("--profile", so.profile, "Built-in profile set: internal|external");
  c_synth->add_option("--profile-json", so.profile_json_path, "Profile set JSON file");

  IngestOptions io;
  auto* c_ingest = app.add_subcommand("ingest", "Scan a DICOM tree into a series manifest");
  c_ingest->add_option("--input", io.input_dir, "DICOM directory")->required();
  c_ingest->add_option("--out", io.out_dir, "Output directory")->required();
  c_ingest->add_option("--tol", io.overlap_tol, "Slice-overlap tolerance in mm");
  c_ingest->add_option("--seed", io.seed, "Provenance seed");

  CurateOptions co;
  auto* c_curate = app.add_subcommand("curate", "Assign labels from description rules");
  c_curate->add_option("--manifest", co.manifest_path, "Series manifest CSV")->required();
  c_curate->add_option("--out", co.out_dir, "Output directory")->required();
  c_curate->add_option("--rules", co.rules_path, "Rule table CSV (default: built-in)");
  c_curate->add_option("--seed", co.seed, "Provenance seed");

  TrainOptions to;
  auto* c_train = app.add_subcommand("train", "Train a k-fold ensemble");
  c_train->add_option("--data", to.data_dir, "DICOM directory")->required();
  c_train->add_option("--labels", to.labels_path, "Labels CSV (series_uid,class)")->required();
  c_train->add_option("--out", to.out_dir, "Ensemble output directory")->required();
  c_train->add_option("--method", to.method, "metadata|images|fusion");
  c_train->add_option("--k", to.k, "Cross-validation folds");
  c_train->add_option("--seed", to.seed, "RNG seed");
  c_train->add_option("--train-frac", to.train_frac, "Training fraction of patients");
  c_train->add_option("--val-frac", to.val_frac, "Validation fraction of patients");
  c_train->add_option("--test-frac", to.test_frac, "Held-out fraction of patients");
  c_train->add_option("--epochs", to.max_epochs, "Maximum training epochs");
  c_train->add_option("--tol", to.overlap_tol, "Slice-overlap tolerance in mm");

  ClassifyOptions clo;
  auto* c_classify = app.add_subcommand("classify", "Classify a DICOM tree with an ensemble");
  c_classify->add_option("--model", clo.model_dir, "Ensemble directory")->required();
  c_classify->add_option("--data", clo.data_dir, "DICOM directory")->required();
  c_classify->add_option("--out", clo.out_path, "Predictions CSV path")->required();
  c_classify->add_option("--tol", clo.overlap_tol, "Slice-overlap tolerance in mm");

  EvaluateOptions eo;
  auto* c_evaluate = app.add_subcommand("evaluate", "Score predictions against truth");
  c_evaluate->add_option("--predictions", eo.predictions_path, "Predictions CSV")->required();
  c_evaluate->add_option("--truth", eo.truth_path, "Truth CSV (series_uid,class)")->required();
  c_evaluate->add_option("--out", eo.out_dir, "Output directory")->required();
  c_evaluate->add_option("--beta", eo.beta, "F-beta weighting");
  c_evaluate->add_option("--split", eo.split_name, "Split name recorded in the report");

  PlotOptions po;
  auto* c_plot = app.add_subcommand("plot", "Export the metadata distribution plot");
  c_plot->add_option("--manifest", po.manifest_path, "Series manifest CSV")->required();
  c_plot->add_option("--labels", po.labels_path, "Labels CSV for coloring");
  c_plot->add_option("--out", po.out_dir, "Output directory")->required();
  c_plot->add_option("--seed", po.seed, "Provenance seed");

  std::vector<const char*> argv;
  argv.push_back("mrseq");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (c_synth->parsed()) cmd_synth(so);
    if (c_ingest->parsed()) cmd_ingest(io);
    if (c_curate->parsed()) cmd_curate(co);
    if (c_train->parsed()) cmd_train(to);
    if (c_classify->parsed()) cmd_classify(clo);
    if (c_evaluate->parsed()) cmd_evaluate(eo);
    if (c_plot->parsed()) cmd_plot(po);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ModeMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mrseq::cli
