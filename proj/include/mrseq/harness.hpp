// Patient-wise dataset splitting, k-fold cross-validation training with
// early stopping, and mean-probability ensembling across fold models.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrseq/common.hpp"
#include "mrseq/features.hpp"
#include "mrseq/forest.hpp"
#include "mrseq/nn.hpp"

namespace mrseq::harness {

enum class Method { Metadata, Images, Fusion };
const char* to_string(Method m);
std::optional<Method> method_from_string(std::string_view s);

struct Fractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct SplitPlan {
  std::vector<std::string> train, val, test;  // patient ids
  Fractions fractions;
  std::uint64_t seed = 0;
};

// Deterministic seeded shuffle of the unique patient ids, then a
// largest-remainder partition. Remainder ties resolve in declaration order
// (train, val, test). Throws BadFractions unless fractions are nonnegative
// and sum to 1.
SplitPlan split_patients(const std::vector<std::string>& patient_ids, Fractions fractions,
                         std::uint64_t seed);

std::string split_plan_to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(std::string_view text);

// Contiguous chunks of a seeded patient shuffle; the first n%k folds take
// the extra patient. Throws TooFewPatients when patients < k.
std::vector<std::vector<std::string>> kfold_patients(const std::vector<std::string>& patient_ids,
                                                     int k, std::uint64_t seed);

// Validation-loss early stopping: an epoch improves when best - loss >=
// min_delta; `patience` consecutive non-improvements stop training, and the
// best epoch's weights are restored by the caller.
struct EarlyStopper {
  double min_delta = 1e-4;
  int patience = 2;
  double best = 0.0;
  int best_epoch = -1;
  int streak = 0;

  // Returns true when training should stop after this epoch.
  bool observe(int epoch, double val_loss) {
    if (best_epoch < 0 || best - val_loss >= min_delta) {
      best = val_loss;
      best_epoch = epoch;
      streak = 0;
      return false;
    }
    return ++streak >= patience;
  }
};

// One series as the trainers consume it: unscaled metadata plus the
// preprocessed 64x64 slice. Per-fold scalers are fitted on each fold's
// training portion, so features are scaled inside the fold loop.
struct TrainSeries {
  std::string patient_id;
  std::string series_uid;
  feat::RawMetadata raw;
  nn::Mat<float> image;  // values in [0,1]; empty for metadata-only training
  int label = 0;
};

struct TrainSettings {
  int max_epochs = 10;
  int batch_size = 16;
  double min_delta = 1e-4;
  int patience = 2;
  forest::ForestConfig forest;
  nn::CnnConfig cnn;  // image_size/mode filled per method
};

struct EpochLogRow {
  int fold = 0;
  int epoch = 0;  // -1 for the forest's single fit
  double train_loss = 0.0;
  double val_loss = 0.0;
};

// One fold's trained model: the method's classifier plus the fold scaler.
struct MemberModel {
  Method method = Method::Metadata;
  feat::ScalingParams scaler;
  forest::RandomForest rf;          // Metadata
  nn::FusionCnn<float> cnn;         // Images / Fusion
};

struct FoldEnsemble {
  Method method = Method::Metadata;
  std::uint64_t seed = 0;
  std::vector<MemberModel> members;
  std::vector<double> val_losses;  // best per fold
  std::vector<EpochLogRow> log;
};

// K-fold training over the pooled train+val patients. Folds run via
// parallel_for; every fold derives its own RNG streams, so results never
// depend on scheduling.
FoldEnsemble kfold_train(const std::vector<TrainSeries>& pool, int k, Method method,
                         const TrainSettings& settings, std::uint64_t seed);

// Per-member probabilities for one series (each member applies its own
// scaler). Throws ModeMismatch when the method needs pixels and the image
// is empty.
std::vector<Eigen::Vector4d> member_probabilities(const FoldEnsemble& ensemble,
                                                  const feat::RawMetadata& raw,
                                                  const nn::Mat<float>& image);

struct EnsemblePrediction {
  Eigen::Vector4d probs;
  int predicted = 0;  // argmax, ties to the lowest class index
};

// Arithmetic mean of the member probability vectors.
EnsemblePrediction ensemble_predict(const FoldEnsemble& ensemble, const feat::RawMetadata& raw,
                                    const nn::Mat<float>& image);

// Directory layout: manifest.json + member_<i>.(json|bin) + training_log.csv.
void save_ensemble(const std::string& dir, const FoldEnsemble& ensemble,
                   std::uint64_t config_hash);
FoldEnsemble load_ensemble(const std::string& dir);

}  // namespace mrseq::harness
