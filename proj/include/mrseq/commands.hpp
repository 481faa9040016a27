// Subcommand implementations behind the command-line binary. Each command
// is a plain function over an options struct so tests drive the pipeline
// without spawning processes; run() adds argument parsing and the exit-code
// contract (0 success, 1 internal error, 2 usage or input error).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrseq/geometry.hpp"

namespace mrseq::cli {

struct SynthOptions {
  std::string out_dir;
  int patients = 10;
  std::uint64_t seed = 1;
  std::string profile = "internal";  // "internal" | "external"
  std::string profile_json_path;     // overrides `profile` when set
};

struct IngestOptions {
  std::string input_dir;
  std::string out_dir;
  double overlap_tol = geom::kDefaultOverlapTolMm;
  std::uint64_t seed = 1;  // provenance only; ingest itself is seed-free
};

struct CurateOptions {
  std::string manifest_path;
  std::string out_dir;
  std::string rules_path;  // empty: built-in default table
  std::uint64_t seed = 1;
};

struct TrainOptions {
  std::string data_dir;    // DICOM tree
  std::string labels_path; // CSV with series_uid,class columns
  std::string out_dir;     // ensemble artifact directory
  std::string method = "fusion";
  int k = 4;
  std::uint64_t seed = 1;
  double train_frac = 0.6, val_frac = 0.2, test_frac = 0.2;
  int max_epochs = 10;
  double overlap_tol = geom::kDefaultOverlapTolMm;
};

struct ClassifyOptions {
  std::string model_dir;
  std::string data_dir;
  std::string out_path;  // predictions CSV
  double overlap_tol = geom::kDefaultOverlapTolMm;
};

struct EvaluateOptions {
  std::string predictions_path;
  std::string truth_path;  // CSV with series_uid,class columns
  std::string out_dir;
  double beta = 1.0;
  std::string split_name = "test";
};

struct PlotOptions {
  std::string manifest_path;
  std::string labels_path;  // optional; rows without a label plot as "Unlabeled"
  std::string out_dir;
  std::uint64_t seed = 1;
};

// Each throws UsageError for bad paths or inconsistent inputs and Error
// subclasses for everything else; run() maps exceptions to exit codes.
void cmd_synth(const SynthOptions& opt);
void cmd_ingest(const IngestOptions& opt);
void cmd_curate(const CurateOptions& opt);
void cmd_train(const TrainOptions& opt);
void cmd_classify(const ClassifyOptions& opt);
void cmd_evaluate(const EvaluateOptions& opt);
void cmd_plot(const PlotOptions& opt);

// Full argument-list entry point (argv without the program name).
int run(const std::vector<std::string>& args);

}  // namespace mrseq::cli
