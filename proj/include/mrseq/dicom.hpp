// DICOM ingestion: Part-10 little-endian parsing (explicit and implicit VR),
// DICOM JSON model parsing, pixel access, and grouping instances into series.
//
// The tag dictionary is deliberately fixed and small. Everything outside it
// is skipped by declared length, including sequences. Supported transfer
// syntaxes: implicit VR little endian (1.2.840.10008.1.2) and explicit VR
// little endian (1.2.840.10008.1.2.1). Anything compressed or big-endian is
// rejected up front.
#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrseq/common.hpp"

namespace mrseq::dicom {

template <class Scalar>
using ImageMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Tag {
  std::uint16_t group = 0;
  std::uint16_t element = 0;
  auto operator<=>(const Tag&) const = default;
};

// Two-letter value representation code plus its raw payload, already split
// on backslash multiplicity for string VRs.
struct DataElement {
  Tag tag;
  std::string vr;
  std::vector<std::string> values;     // string-typed VRs (DS/IS/CS/LO/UI/TM, US rendered as decimal)
  std::vector<std::uint8_t> bytes;     // OW/OB payloads
};

struct InstanceMetadata {
  std::string sop_instance_uid;
  std::string series_instance_uid;
  std::string patient_id;
  std::string series_description;
  std::optional<double> repetition_time;   // ms
  std::optional<double> echo_time;         // ms
  std::optional<double> flip_angle;        // degrees
  std::vector<std::string> scanning_sequence;
  std::optional<std::string> contrast_bolus_agent;
  std::optional<Eigen::Vector3d> image_position_patient;            // mm
  std::optional<Eigen::Matrix<double, 6, 1>> image_orientation_patient;  // row then column cosines
  int rows = 0;
  int cols = 0;
  std::optional<Eigen::Vector2d> pixel_spacing;  // mm
  std::optional<int> temporal_position;
  std::vector<std::uint8_t> pixel_payload;       // raw little-endian 16-bit words
  bool has_pixel_payload = false;

  // Exact (bitwise for doubles) equality; Eigen members compared per
  // coefficient since their operator== is coefficient-wise, not bool.
  bool operator==(const InstanceMetadata& o) const {
    auto eq = [](const auto& a, const auto& b) {
      if (a.has_value() != b.has_value()) return false;
      return !a || (a->array() == b->array()).all();
    };
    return sop_instance_uid == o.sop_instance_uid &&
           series_instance_uid == o.series_instance_uid && patient_id == o.patient_id &&
           series_description == o.series_description && repetition_time == o.repetition_time &&
           echo_time == o.echo_time && flip_angle == o.flip_angle &&
           scanning_sequence == o.scanning_sequence &&
           contrast_bolus_agent == o.contrast_bolus_agent &&
           eq(image_position_patient, o.image_position_patient) &&
           eq(image_orientation_patient, o.image_orientation_patient) && rows == o.rows &&
           cols == o.cols && eq(pixel_spacing, o.pixel_spacing) &&
           temporal_position == o.temporal_position && pixel_payload == o.pixel_payload &&
           has_pixel_payload == o.has_pixel_payload;
  }
};

struct SeriesRecord {
  std::string series_instance_uid;
  std::string patient_id;
  std::string series_description;
  std::vector<InstanceMetadata> instances;  // sorted by (slice offset, temporal position, SOP UID)
};

// Transfer syntax UIDs this parser accepts.
inline constexpr std::string_view kImplicitVrLittleEndian = "1.2.840.10008.1.2";
inline constexpr std::string_view kExplicitVrLittleEndian = "1.2.840.10008.1.2.1";

// Parses one Part-10 stream. Accepts the 128-byte preamble + "DICM" form or
// a stream starting directly at the file meta group.
InstanceMetadata parse_part10(std::span<const std::uint8_t> bytes);

// Parses one instance in DICOM JSON model encoding (a single JSON object
// keyed by 8-hex-digit tags with "vr"/"Value" members). Produces the same
// InstanceMetadata parse_part10 would for identical logical content.
InstanceMetadata parse_json_instance(std::string_view text);

// Groups instances by SeriesInstanceUID. Output sorted by UID; instances
// within each record sorted by projected slice offset, then temporal
// position, then SOP UID. Throws ConflictingPatient if one series UID maps
// to more than one patient id.
std::vector<SeriesRecord> group_series(std::vector<InstanceMetadata> instances);

// Decodes the uncompressed 16-bit little-endian grayscale payload into a
// rows x cols matrix. Word k lands at (k / cols, k % cols).
ImageMatrix<float> read_pixels(const InstanceMetadata& instance);

// Serializes per the documented Part-10 layout (group 0002 always explicit;
// dataset per `syntax`). parse_part10(serialize_part10(x)) == x.
enum class TransferSyntax { ExplicitLittleEndian, ImplicitLittleEndian };
std::vector<std::uint8_t> serialize_part10(const InstanceMetadata& instance,
                                           TransferSyntax syntax = TransferSyntax::ExplicitLittleEndian);

// DICOM JSON model text for the same instance; the fixture counterpart of
// serialize_part10. Pixel data is emitted as InlineBinary base64.
std::string to_dicom_json(const InstanceMetadata& instance);

}  // namespace mrseq::dicom
