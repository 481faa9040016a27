#include "mrseq/evaluate.hpp"

namespace mrseq::eval {

Confusion confusion_matrix(const std::vector<std::pair<int, int>>& pairs) {
  Confusion m = Confusion::Zero();
  for (auto [t, p] : pairs) {
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses)
      throw BadLabel("label pair (" + std::to_string(t) + "," + std::to_string(p) +
                     ") outside class range");
    m(t, p) += 1;
  }
  return m;
}

double f_beta(const Confusion& m, int cls, double beta) {
  if (cls < 0 || cls >= kNumClasses) throw BadLabel("class " + std::to_string(cls));
  double tp = static_cast<double>(m(cls, cls));
  double fp = static_cast<double>(m.col(cls).sum()) - tp;
  double fn = static_cast<double>(m.row(cls).sum()) - tp;
  double precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  double recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
  double b2 = beta * beta;
  double denom = b2 * precision + recall;
  return denom > 0.0 ? (1.0 + b2) * precision * recall / denom : 0.0;
}

EvaluationReport report(const std::vector<int>& truths, const std::vector<int>& preds,
                        double beta, const std::string& split_name) {
  if (truths.size() != preds.size()) throw ShapeMismatch("truth/prediction counts differ");
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) pairs.emplace_back(truths[i], preds[i]);

  EvaluationReport rep;
  rep.confusion = confusion_matrix(pairs);
  rep.beta = beta;
  rep.split_name = split_name;
  for (int c = 0; c < kNumClasses; ++c) {
    double tp = static_cast<double>(rep.confusion(c, c));
    double fp = static_cast<double>(rep.confusion.col(c).sum()) - tp;
    double fn = static_cast<double>(rep.confusion.row(c).sum()) - tp;
    ClassMetrics& cm = rep.per_class[static_cast<std::size_t>(c)];
    cm.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    cm.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    cm.f = f_beta(rep.confusion, c, beta);
  }
  return rep;
}

std::string report_csv(const std::string& method, const EvaluationReport& rep,
                       std::uint64_t seed, std::string_view config_hash) {
  std::string out = provenance_header(seed, config_hash);
  out += "method,split,class,f_beta\n";
  for (int c = 0; c < kNumClasses; ++c)
    out += method + "," + rep.split_name + "," + to_string(static_cast<SeqClass>(c)) + "," +
           format_double(rep.per_class[static_cast<std::size_t>(c)].f) + "\n";
  return out;
}

std::string confusion_csv(const std::string& method, const EvaluationReport& rep,
                          std::uint64_t seed, std::string_view config_hash) {
  std::string out = provenance_header(seed, config_hash);
  out += "# method=" + method + " split=" + rep.split_name + "\n";
  out += "truth\\pred";
  for (int c = 0; c < kNumClasses; ++c) out += std::string(",") + to_string(static_cast<SeqClass>(c));
  out += "\n";
  for (int t = 0; t < kNumClasses; ++t) {
    out += to_string(static_cast<SeqClass>(t));
    for (int p = 0; p < kNumClasses; ++p) out += "," + std::to_string(rep.confusion(t, p));
    out += "\n";
  }
  return out;
}

}  // namespace mrseq::eval
