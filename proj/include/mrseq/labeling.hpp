// Ground-truth assignment from SeriesDescription text via an ordered,
// case-insensitive regex rule table, with geometric exclusion of
// sagittal/coronal series applied before any text rule.
#pragma once

#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "mrseq/common.hpp"
#include "mrseq/geometry.hpp"

namespace mrseq::label {

// One row of the rule table. Lower priority wins; priorities are unique.
struct LabelRule {
  int priority = 0;
  bool excludes = false;  // true: matching series are excluded (target column "Excluded")
  SeqClass target = SeqClass::T2W;
  std::string pattern_text;
  std::regex pattern;  // case-insensitive, searched (not anchored)
  std::string note;
};

enum class Disposition { Assigned, Excluded, Unmatched };

struct LabelDecision {
  Disposition disposition = Disposition::Unmatched;
  SeqClass cls = SeqClass::T2W;  // meaningful when Assigned
  std::string reason;            // meaningful when Excluded
  int rule_priority = -1;        // -1 when no text rule fired
};

struct CurationInput {
  std::string series_uid;
  std::string description;
  geom::SeriesGeometry geometry;
};

struct CurationResult {
  std::vector<std::pair<std::string, SeqClass>> labeled;     // uid, class
  std::vector<std::pair<std::string, std::string>> excluded; // uid, reason
  std::vector<std::string> unmatched;
  double coverage_fraction = 0.0;  // |labeled| / total, 0 for empty input
};

// Rule-table text format, one rule per line:
//   priority,class,pattern [ # note]
// class is one of T2W/DWI/ADC/DCE/Excluded. The pattern is everything after
// the second comma (so patterns may not contain commas); an optional " #"
// suffix sets the rule note. Lines whose first non-space character is '#'
// and blank lines are skipped.
std::vector<LabelRule> load_rules(std::string_view text);

// The table shipped with the tool, also installed as rules/default_rules.csv.
extern const char* const kDefaultRuleTable;

// Geometry exclusion first, then first matching rule by priority, else
// Unmatched. An empty description is always Unmatched.
LabelDecision assign_label(const std::string& description, const geom::SeriesGeometry& geometry,
                           const std::vector<LabelRule>& rules);

// assign_label over every input, keeping input order within each bucket.
CurationResult curate(const std::vector<CurationInput>& series, const std::vector<LabelRule>& rules);

}  // namespace mrseq::label
