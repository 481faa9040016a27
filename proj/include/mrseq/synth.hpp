// Deterministic synthetic DICOM generation: per-class metadata profiles and
// class-distinctive image textures, plus the distribution plot export. The
// generator doubles as the external-shift simulator via a second profile
// set with overlapped DWI/ADC metadata and new description vocabulary.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrseq/common.hpp"
#include "mrseq/dicom.hpp"

namespace mrseq::synth {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

enum class Texture { Ellipse, Blob, Smooth, Ring };
const char* to_string(Texture t);

struct ClassProfile {
  SeqClass cls = SeqClass::T2W;
  Range tr_ms, te_ms, fa_deg;
  std::vector<std::string> scanning_sequence;
  double contrast_probability = 0.0;  // draws the agent string when 1
  double is4d_rate = 0.0;             // applied as an exact rotation over patients
  int min_slices = 10, max_slices = 14;  // spatial positions
  int timepoints = 1;                    // volumes sharing positions when 4D
  Range image_px{72, 96};
  Texture texture = Texture::Ellipse;
  std::vector<std::string> phrases;  // class-conventional SeriesDescription pool
};

struct ProfileSet {
  std::string name;            // "internal" / "external"
  std::string patient_prefix;  // patient ids: prefix + zero-padded index
  std::vector<ClassProfile> profiles;  // one per class, class order
  std::vector<std::string> nonconforming_phrases;  // match no rule -> Unmatched
};

// Separable profiles mirroring conventional prostate acquisitions. DWI and
// ADC echo times overlap slightly and DWI is 4D for 9 of 10 patients, so
// metadata stays a near-perfect but not trivial signal.
ProfileSet internal_profiles();

// Shifted distributions: DWI/ADC echo times fully overlapped, DWI 4D for
// only 1 of 10 patients, new vocabulary, mildly shifted textures. Metadata
// degrades on DWI while images stay informative.
ProfileSet external_profiles();

std::string profiles_to_json(const ProfileSet& set);
ProfileSet profiles_from_json(std::string_view text);

struct GeneratedSeries {
  dicom::SeriesRecord record;  // instances ordered (offset, temporal, sop)
  SeqClass truth = SeqClass::T2W;
  bool nonconforming_description = false;
};

// One series per class per patient. Deterministic by seed at byte level;
// every series derives its own RNG stream, so patients generate in any
// order. Exactly 1 in 10 series (by fixed ordinal rotation) takes a
// description that matches no labeling rule.
std::vector<GeneratedSeries> generate_dataset(const ProfileSet& set, int n_patients,
                                              std::uint64_t seed);

// The Part-10 writer lives with the parser; re-exported here because the
// generator is its main producer.
using dicom::serialize_part10;

// Raw (unscaled) attribute row for the distribution plot.
struct PlotRow {
  std::string series_uid;
  std::string cls;  // class name or "Unmatched"/"Excluded"
  std::optional<double> tr, te, fa;
  bool contrast = false;
  bool is4d = false;
};

// CSV table plus a self-contained parallel-coordinates HTML page (static
// SVG, fixed class palette). Throws EmptyTable on no rows.
std::string distribution_csv(const std::vector<PlotRow>& rows, std::uint64_t seed,
                             std::string_view config_hash);
std::string distribution_html(const std::vector<PlotRow>& rows);

}  // namespace mrseq::synth
