#include "mrseq/labeling.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

namespace mrseq::label {

const char* const kDefaultRuleTable =
    "# Ordered description rules: priority,class,pattern [ # note]\n"
    "10,Excluded,locali[sz]er|scout|survey # localizer\n"
    "20,Excluded,calc|computed|b-?[0-9]{3,} # calculated b-value\n"
    "30,ADC,adc|apparent.?diffusion\n"
    "40,DCE,dce|dyn|twist|perfusion|vibe\n"
    "50,DWI,dwi|diff|ep2d\n"
    "60,T2W,t2|tse\n";

std::vector<LabelRule> load_rules(std::string_view text) {
  std::vector<LabelRule> rules;
  std::set<int> seen;
  int line_no = 0;
  for (const auto& raw_line : split(text, '\n')) {
    ++line_no;
    std::string line = trim(raw_line);
    if (line.empty() || line[0] == '#') continue;

    std::string note;
    if (auto hash = line.find(" #"); hash != std::string::npos) {
      note = trim(line.substr(hash + 2));
      line = trim(line.substr(0, hash));
    }

    auto c1 = line.find(',');
    auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos)
      throw BadPattern("line " + std::to_string(line_no) + ": expected priority,class,pattern");

    LabelRule rule;
    std::string prio = trim(line.substr(0, c1));
    char* end = nullptr;
    long p = std::strtol(prio.c_str(), &end, 10);
    if (prio.empty() || end != prio.c_str() + prio.size())
      throw BadPattern("line " + std::to_string(line_no) + ": bad priority '" + prio + "'");
    rule.priority = static_cast<int>(p);
    if (!seen.insert(rule.priority).second)
      throw DuplicatePriority("line " + std::to_string(line_no) + ": priority " + prio +
                              " already used");

    std::string cls = trim(line.substr(c1 + 1, c2 - c1 - 1));
    if (cls == "Excluded") {
      rule.excludes = true;
    } else if (auto sc = seq_class_from_string(cls)) {
      rule.target = *sc;
    } else {
      throw BadPattern("line " + std::to_string(line_no) + ": unknown class '" + cls + "'");
    }

    rule.pattern_text = trim(line.substr(c2 + 1));
    if (rule.pattern_text.empty())
      throw BadPattern("line " + std::to_string(line_no) + ": empty pattern");
    try {
      rule.pattern = std::regex(rule.pattern_text, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw BadPattern("line " + std::to_string(line_no) + ": " + e.what());
    }
    rule.note = note.empty() ? rule.pattern_text : note;
    rules.push_back(std::move(rule));
  }
  std::sort(rules.begin(), rules.end(),
            [](const LabelRule& a, const LabelRule& b) { return a.priority < b.priority; });
  return rules;
}

LabelDecision assign_label(const std::string& description, const geom::SeriesGeometry& geometry,
                           const std::vector<LabelRule>& rules) {
  LabelDecision d;
  if (geometry.orientation_class == geom::Orientation::Sagittal ||
      geometry.orientation_class == geom::Orientation::Coronal) {
    d.disposition = Disposition::Excluded;
    d.reason = "orientation";
    return d;
  }
  std::string desc = trim(description);
  if (desc.empty()) return d;  // Unmatched
  for (const auto& rule : rules) {
    if (!std::regex_search(desc, rule.pattern)) continue;
    d.rule_priority = rule.priority;
    if (rule.excludes) {
      d.disposition = Disposition::Excluded;
      d.reason = rule.note;
    } else {
      d.disposition = Disposition::Assigned;
      d.cls = rule.target;
    }
    return d;
  }
  return d;  // Unmatched
}

CurationResult curate(const std::vector<CurationInput>& series, const std::vector<LabelRule>& rules) {
  CurationResult result;
  for (const auto& s : series) {
    LabelDecision d = assign_label(s.description, s.geometry, rules);
    switch (d.disposition) {
      case Disposition::Assigned:
        result.labeled.emplace_back(s.series_uid, d.cls);
        break;
      case Disposition::Excluded:
        result.excluded.emplace_back(s.series_uid, d.reason);
        break;
      case Disposition::Unmatched:
        result.unmatched.push_back(s.series_uid);
        break;
    }
  }
  result.coverage_fraction =
      series.empty() ? 0.0 : static_cast<double>(result.labeled.size()) / series.size();
  return result;
}

}  // namespace mrseq::label
