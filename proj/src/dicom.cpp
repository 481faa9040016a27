#include "mrseq/dicom.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <map>

#include <json.hpp>

#include "mrseq/geometry.hpp"

namespace mrseq::dicom {

namespace {

// Fixed tag dictionary. Everything else is skipped by length.
constexpr Tag kSopInstanceUid{0x0008, 0x0018};
constexpr Tag kSeriesDescription{0x0008, 0x103E};
constexpr Tag kPatientId{0x0010, 0x0020};
constexpr Tag kContrastBolusAgent{0x0018, 0x0010};
constexpr Tag kScanningSequence{0x0018, 0x0020};
constexpr Tag kRepetitionTime{0x0018, 0x0080};
constexpr Tag kEchoTime{0x0018, 0x0081};
constexpr Tag kFlipAngle{0x0018, 0x1314};
constexpr Tag kSeriesInstanceUid{0x0020, 0x000E};
constexpr Tag kImagePositionPatient{0x0020, 0x0032};
constexpr Tag kImageOrientationPatient{0x0020, 0x0037};
constexpr Tag kTemporalPosition{0x0020, 0x0100};
constexpr Tag kRows{0x0028, 0x0010};
constexpr Tag kColumns{0x0028, 0x0011};
constexpr Tag kPixelSpacing{0x0028, 0x0030};
constexpr Tag kPixelData{0x7FE0, 0x0010};
constexpr Tag kTransferSyntaxUid{0x0002, 0x0010};

struct DictEntry {
  Tag tag;
  const char* vr;
};

constexpr DictEntry kDictionary[] = {
    {kSopInstanceUid, "UI"},       {kSeriesDescription, "LO"},
    {kPatientId, "LO"},            {kContrastBolusAgent, "LO"},
    {kScanningSequence, "CS"},     {kRepetitionTime, "DS"},
    {kEchoTime, "DS"},             {kFlipAngle, "DS"},
    {kSeriesInstanceUid, "UI"},    {kImagePositionPatient, "DS"},
    {kImageOrientationPatient, "DS"}, {kTemporalPosition, "IS"},
    {kRows, "US"},                 {kColumns, "US"},
    {kPixelSpacing, "DS"},         {kPixelData, "OW"},
    {kTransferSyntaxUid, "UI"},
};

const char* dictionary_vr(Tag tag) {
  for (const auto& e : kDictionary)
    if (e.tag == tag) return e.vr;
  return nullptr;
}

bool is_long_form_vr(std::string_view vr) {
  return vr == "OB" || vr == "OW" || vr == "OF" || vr == "OD" || vr == "OL" ||
         vr == "OV" || vr == "SQ" || vr == "UC" || vr == "UR" || vr == "UT" ||
         vr == "UN" || vr == "SV" || vr == "UV";
}

constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFFu;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> buf) : buf_(buf) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

  void require(std::size_t n) const {
    if (remaining() < n) throw MalformedFile("truncated stream");
  }

  std::uint16_t u16() {
    require(2);
    std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32() {
    require(4);
    std::uint32_t v = static_cast<std::uint32_t>(buf_[pos_]) |
                      (static_cast<std::uint32_t>(buf_[pos_ + 1]) << 8) |
                      (static_cast<std::uint32_t>(buf_[pos_ + 2]) << 16) |
                      (static_cast<std::uint32_t>(buf_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }

  std::uint16_t peek_u16() const {
    require(2);
    return static_cast<std::uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
  }

  std::span<const std::uint8_t> bytes(std::size_t n) {
    require(n);
    auto s = buf_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  void skip(std::size_t n) {
    require(n);
    pos_ += n;
  }

 private:
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

struct RawElement {
  std::string vr;
  std::vector<std::string> values;
  std::vector<std::uint8_t> bytes;
  bool present = false;
};

using ElementMap = std::map<Tag, RawElement>;

std::vector<std::string> split_multivalue(std::span<const std::uint8_t> payload) {
  std::string s(reinterpret_cast<const char*>(payload.data()), payload.size());
  std::vector<std::string> out;
  for (auto& part : split(s, '\\')) out.push_back(trim(part));
  return out;
}

// Header of one element past the tag. Returns (vr, length).
std::pair<std::string, std::uint32_t> read_element_header(ByteReader& r, Tag tag, bool explicit_vr) {
  if (!explicit_vr) {
    std::uint32_t len = r.u32();
    const char* vr = dictionary_vr(tag);
    return {vr ? vr : "UN", len};
  }
  auto vr_bytes = r.bytes(2);
  std::string vr(reinterpret_cast<const char*>(vr_bytes.data()), 2);
  if (!std::isupper(static_cast<unsigned char>(vr[0])) ||
      !std::isupper(static_cast<unsigned char>(vr[1])))
    throw MalformedFile("invalid VR code");
  std::uint32_t len;
  if (is_long_form_vr(vr)) {
    r.skip(2);  // reserved
    len = r.u32();
  } else {
    len = r.u16();
  }
  return {vr, len};
}

void skip_undefined_sequence(ByteReader& r, bool explicit_vr, int depth);

// Skips the elements of one undefined-length item until its delimiter.
void skip_undefined_item(ByteReader& r, bool explicit_vr, int depth) {
  if (depth > 64) throw MalformedFile("sequence nesting too deep");
  for (;;) {
    Tag tag{r.u16(), r.u16()};
    if (tag.group == 0xFFFE && tag.element == 0xE00D) {
      r.u32();
      return;
    }
    auto [vr, len] = read_element_header(r, tag, explicit_vr);
    if (len == kUndefinedLength) {
      if (vr == "SQ" || vr == "UN")
        skip_undefined_sequence(r, explicit_vr, depth + 1);
      else
        throw MalformedFile("undefined length on non-sequence element");
    } else {
      r.skip(len);
    }
  }
}

void skip_undefined_sequence(ByteReader& r, bool explicit_vr, int depth) {
  if (depth > 64) throw MalformedFile("sequence nesting too deep");
  for (;;) {
    Tag tag{r.u16(), r.u16()};
    std::uint32_t len = r.u32();
    if (tag.group == 0xFFFE && tag.element == 0xE0DD) return;
    if (!(tag.group == 0xFFFE && tag.element == 0xE000))
      throw MalformedFile("expected item tag inside sequence");
    if (len == kUndefinedLength)
      skip_undefined_item(r, explicit_vr, depth + 1);
    else
      r.skip(len);
  }
}

void store_element(ElementMap& map, Tag tag, const std::string& vr,
                   std::span<const std::uint8_t> payload) {
  RawElement el;
  el.vr = vr;
  el.present = true;
  if (tag == kPixelData) {
    el.bytes.assign(payload.begin(), payload.end());
  } else if (vr == "US") {
    if (payload.size() % 2 != 0) throw MalformedFile("odd US element length");
    for (std::size_t i = 0; i < payload.size(); i += 2) {
      std::uint16_t v = static_cast<std::uint16_t>(payload[i] | (payload[i + 1] << 8));
      el.values.push_back(std::to_string(v));
    }
  } else {
    el.values = split_multivalue(payload);
  }
  map[tag] = std::move(el);
}

// One element of the main dataset (or file meta). Returns false when the
// element was skipped as unknown.
void read_dataset_element(ByteReader& r, ElementMap& map, Tag tag, bool explicit_vr) {
  auto [vr, len] = read_element_header(r, tag, explicit_vr);
  if (len == kUndefinedLength) {
    if (tag == kPixelData)
      throw UnsupportedTransferSyntax("encapsulated pixel data");
    if (vr == "SQ" || vr == "UN") {
      skip_undefined_sequence(r, explicit_vr, 0);
      return;
    }
    throw MalformedFile("undefined length on non-sequence element");
  }
  if (vr == "SQ") {  // defined-length sequence skipped wholesale
    r.skip(len);
    return;
  }
  if (dictionary_vr(tag) == nullptr) {
    r.skip(len);
    return;
  }
  store_element(map, tag, vr, r.bytes(len));
}

std::optional<double> parse_decimal(const std::string& s) {
  std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return std::nullopt;
  return v;
}

std::optional<double> first_decimal(const ElementMap& map, Tag tag) {
  auto it = map.find(tag);
  if (it == map.end() || it->second.values.empty()) return std::nullopt;
  return parse_decimal(it->second.values.front());
}

std::string first_string(const ElementMap& map, Tag tag) {
  auto it = map.find(tag);
  if (it == map.end() || it->second.values.empty()) return "";
  return trim(it->second.values.front());
}

std::optional<std::vector<double>> decimals_exactly(const ElementMap& map, Tag tag, std::size_t n) {
  auto it = map.find(tag);
  if (it == map.end() || it->second.values.size() != n) return std::nullopt;
  std::vector<double> out;
  for (const auto& v : it->second.values) {
    auto d = parse_decimal(v);
    if (!d) return std::nullopt;
    out.push_back(*d);
  }
  return out;
}

InstanceMetadata build_instance(const ElementMap& map) {
  InstanceMetadata inst;
  inst.sop_instance_uid = first_string(map, kSopInstanceUid);
  inst.series_instance_uid = first_string(map, kSeriesInstanceUid);
  inst.patient_id = first_string(map, kPatientId);
  inst.series_description = first_string(map, kSeriesDescription);
  inst.repetition_time = first_decimal(map, kRepetitionTime);
  inst.echo_time = first_decimal(map, kEchoTime);
  inst.flip_angle = first_decimal(map, kFlipAngle);

  if (auto it = map.find(kScanningSequence); it != map.end())
    for (const auto& v : it->second.values)
      if (!trim(v).empty()) inst.scanning_sequence.push_back(trim(v));

  if (auto it = map.find(kContrastBolusAgent); it != map.end())
    inst.contrast_bolus_agent = it->second.values.empty() ? "" : trim(it->second.values.front());

  if (auto p = decimals_exactly(map, kImagePositionPatient, 3))
    inst.image_position_patient = Eigen::Vector3d((*p)[0], (*p)[1], (*p)[2]);

  if (auto o = decimals_exactly(map, kImageOrientationPatient, 6)) {
    Eigen::Matrix<double, 6, 1> iop;
    for (int i = 0; i < 6; ++i) iop[i] = (*o)[static_cast<std::size_t>(i)];
    // Direction cosine vectors must be unit within 1e-3; anything else is
    // treated as absent so downstream geometry stays total.
    if (std::abs(iop.head<3>().norm() - 1.0) <= 1e-3 &&
        std::abs(iop.tail<3>().norm() - 1.0) <= 1e-3)
      inst.image_orientation_patient = iop;
  }

  if (auto it = map.find(kRows); it != map.end() && !it->second.values.empty())
    inst.rows = static_cast<int>(std::strtol(it->second.values.front().c_str(), nullptr, 10));
  if (auto it = map.find(kColumns); it != map.end() && !it->second.values.empty())
    inst.cols = static_cast<int>(std::strtol(it->second.values.front().c_str(), nullptr, 10));

  if (auto s = decimals_exactly(map, kPixelSpacing, 2))
    inst.pixel_spacing = Eigen::Vector2d((*s)[0], (*s)[1]);

  if (auto it = map.find(kTemporalPosition); it != map.end() && !it->second.values.empty()) {
    if (auto d = parse_decimal(it->second.values.front()))
      inst.temporal_position = static_cast<int>(*d);
  }

  if (auto it = map.find(kPixelData); it != map.end()) {
    inst.pixel_payload = it->second.bytes;
    inst.has_pixel_payload = true;
  }
  return inst;
}

}  // namespace

InstanceMetadata parse_part10(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);

  bool has_preamble = bytes.size() >= 132 && bytes[128] == 'D' && bytes[129] == 'I' &&
                      bytes[130] == 'C' && bytes[131] == 'M';
  if (has_preamble) {
    r.skip(132);
  } else {
    // Accept a stream starting directly at the file meta group.
    if (bytes.size() < 8 || !(bytes[0] == 0x02 && bytes[1] == 0x00))
      throw MalformedFile("missing DICM magic");
  }

  // File meta group is always explicit VR little endian.
  ElementMap meta;
  bool saw_meta = false;
  while (r.remaining() >= 8 && r.peek_u16() == 0x0002) {
    Tag tag{r.u16(), r.u16()};
    read_dataset_element(r, meta, tag, /*explicit_vr=*/true);
    saw_meta = true;
  }
  if (!saw_meta) throw MalformedFile("missing file meta group");

  std::string ts = first_string(meta, kTransferSyntaxUid);
  if (ts.empty()) throw MalformedFile("file meta missing TransferSyntaxUID");
  bool explicit_vr;
  if (ts == kExplicitVrLittleEndian)
    explicit_vr = true;
  else if (ts == kImplicitVrLittleEndian)
    explicit_vr = false;
  else
    throw UnsupportedTransferSyntax("transfer syntax " + ts);

  ElementMap map;
  while (r.remaining() > 0) {
    if (r.remaining() < 8) throw MalformedFile("truncated element header");
    Tag tag{r.u16(), r.u16()};
    if (tag.group == 0xFFFE) throw MalformedFile("unexpected item tag in dataset");
    read_dataset_element(r, map, tag, explicit_vr);
  }
  return build_instance(map);
}

InstanceMetadata parse_json_instance(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(e.what());
  }
  if (!doc.is_object()) throw MalformedJson("top-level value is not an object");

  ElementMap map;
  for (const auto& [key, entry] : doc.items()) {
    if (key.size() != 8) throw MalformedJson("tag key must be 8 hex digits: " + key);
    char* end = nullptr;
    unsigned long tagv = std::strtoul(key.c_str(), &end, 16);
    if (end != key.c_str() + 8) throw MalformedJson("tag key must be 8 hex digits: " + key);
    Tag tag{static_cast<std::uint16_t>(tagv >> 16), static_cast<std::uint16_t>(tagv & 0xFFFF)};
    if (dictionary_vr(tag) == nullptr) continue;
    if (!entry.is_object()) throw MalformedJson("tag entry must be an object: " + key);

    RawElement el;
    el.present = true;
    el.vr = entry.contains("vr") && entry["vr"].is_string() ? entry["vr"].get<std::string>()
                                                            : dictionary_vr(tag);
    if (entry.contains("InlineBinary")) {
      if (!entry["InlineBinary"].is_string())
        throw MalformedJson("InlineBinary must be a base64 string");
      try {
        el.bytes = base64_decode(entry["InlineBinary"].get<std::string>());
      } catch (const MalformedJson&) {
        throw;
      }
    } else if (entry.contains("Value")) {
      if (!entry["Value"].is_array()) throw MalformedJson("Value must be an array: " + key);
      for (const auto& v : entry["Value"]) {
        if (v.is_string())
          el.values.push_back(trim(v.get<std::string>()));
        else if (v.is_number_integer())
          el.values.push_back(std::to_string(v.get<long long>()));
        else if (v.is_number())
          el.values.push_back(format_double(v.get<double>()));
        else
          throw MalformedJson("unsupported Value entry type in " + key);
      }
    }
    map[tag] = std::move(el);
  }

  if (!map.count(kSeriesInstanceUid) || first_string(map, kSeriesInstanceUid).empty())
    throw MissingRequiredTag("SeriesInstanceUID (0020,000E) absent");
  return build_instance(map);
}

std::vector<SeriesRecord> group_series(std::vector<InstanceMetadata> instances) {
  std::map<std::string, std::vector<InstanceMetadata>> by_uid;
  for (auto& inst : instances) by_uid[inst.series_instance_uid].push_back(std::move(inst));

  std::vector<SeriesRecord> out;
  out.reserve(by_uid.size());
  for (auto& [uid, members] : by_uid) {
    // Deterministic regardless of input order.
    std::sort(members.begin(), members.end(),
              [](const InstanceMetadata& a, const InstanceMetadata& b) {
                return a.sop_instance_uid < b.sop_instance_uid;
              });

    SeriesRecord rec;
    rec.series_instance_uid = uid;
    for (const auto& m : members) {
      if (!m.patient_id.empty()) {
        if (!rec.patient_id.empty() && rec.patient_id != m.patient_id)
          throw ConflictingPatient("series " + uid + " maps to patients '" + rec.patient_id +
                                   "' and '" + m.patient_id + "'");
        if (rec.patient_id.empty()) rec.patient_id = m.patient_id;
      }
      if (rec.series_description.empty()) rec.series_description = m.series_description;
    }

    std::optional<Eigen::Vector3d> normal;
    for (const auto& m : members) {
      if (!m.image_orientation_patient) continue;
      try {
        normal = geom::slice_normal(*m.image_orientation_patient);
        break;
      } catch (const DegenerateOrientation&) {
      }
    }
    auto offset_of = [&](const InstanceMetadata& m) {
      return (normal && m.image_position_patient) ? normal->dot(*m.image_position_patient) : 0.0;
    };
    std::stable_sort(members.begin(), members.end(),
                     [&](const InstanceMetadata& a, const InstanceMetadata& b) {
                       double oa = offset_of(a), ob = offset_of(b);
                       if (oa != ob) return oa < ob;
                       int ta = a.temporal_position.value_or(0), tb = b.temporal_position.value_or(0);
                       if (ta != tb) return ta < tb;
                       return a.sop_instance_uid < b.sop_instance_uid;
                     });
    rec.instances = std::move(members);
    out.push_back(std::move(rec));
  }
  return out;
}

ImageMatrix<float> read_pixels(const InstanceMetadata& instance) {
  if (!instance.has_pixel_payload) throw NoPixelData("instance has no pixel data");
  if (instance.rows <= 0 || instance.cols <= 0)
    throw SizeMismatch("rows/columns missing for pixel data");
  if (instance.pixel_payload.size() % 2 != 0)
    throw SizeMismatch("odd pixel payload byte count");
  const std::size_t words = instance.pixel_payload.size() / 2;
  const std::size_t expected =
      static_cast<std::size_t>(instance.rows) * static_cast<std::size_t>(instance.cols);
  if (words != expected)
    throw SizeMismatch("pixel payload holds " + std::to_string(words) + " words, expected " +
                       std::to_string(expected));
  ImageMatrix<float> img(instance.rows, instance.cols);
  const std::uint8_t* p = instance.pixel_payload.data();
  for (int r = 0; r < instance.rows; ++r)
    for (int c = 0; c < instance.cols; ++c) {
      std::size_t k = 2 * (static_cast<std::size_t>(r) * instance.cols + c);
      img(r, c) = static_cast<float>(p[k] | (p[k + 1] << 8));
    }
  return img;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------
namespace {

void append_padded(std::vector<std::uint8_t>& out, std::string_view s, char pad) {
  out.insert(out.end(), s.begin(), s.end());
  if (s.size() % 2 != 0) out.push_back(static_cast<std::uint8_t>(pad));
}

void write_element(std::vector<std::uint8_t>& out, Tag tag, std::string_view vr,
                   std::span<const std::uint8_t> payload, bool explicit_vr) {
  put_u16(out, tag.group);
  put_u16(out, tag.element);
  if (explicit_vr) {
    out.push_back(static_cast<std::uint8_t>(vr[0]));
    out.push_back(static_cast<std::uint8_t>(vr[1]));
    if (is_long_form_vr(vr)) {
      put_u16(out, 0);
      put_u32(out, static_cast<std::uint32_t>(payload.size()));
    } else {
      if (payload.size() > 0xFFFF) throw Error("element too long for short VR form");
      put_u16(out, static_cast<std::uint16_t>(payload.size()));
    }
  } else {
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
  }
  out.insert(out.end(), payload.begin(), payload.end());
}

void write_string_element(std::vector<std::uint8_t>& out, Tag tag, std::string_view vr,
                          std::string_view value, bool explicit_vr) {
  std::vector<std::uint8_t> payload;
  append_padded(payload, value, vr == "UI" ? '\0' : ' ');
  write_element(out, tag, vr, payload, explicit_vr);
}

std::string join_ds(std::span<const double> values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s.push_back('\\');
    s += format_double(values[i]);
  }
  return s;
}

}  // namespace

std::vector<std::uint8_t> serialize_part10(const InstanceMetadata& instance, TransferSyntax syntax) {
  const bool explicit_vr = syntax == TransferSyntax::ExplicitLittleEndian;
  const std::string ts(explicit_vr ? kExplicitVrLittleEndian : kImplicitVrLittleEndian);

  // File meta group (always explicit VR).
  std::vector<std::uint8_t> meta;
  {
    std::vector<std::uint8_t> v{0x00, 0x01};
    write_element(meta, Tag{0x0002, 0x0001}, "OB", v, true);
  }
  write_string_element(meta, Tag{0x0002, 0x0002}, "UI", "1.2.840.10008.5.1.4.1.1.4", true);
  write_string_element(meta, Tag{0x0002, 0x0003}, "UI", instance.sop_instance_uid, true);
  write_string_element(meta, Tag{0x0002, 0x0010}, "UI", ts, true);

  std::vector<std::uint8_t> out(128, 0);
  out.push_back('D');
  out.push_back('I');
  out.push_back('C');
  out.push_back('M');
  {
    std::vector<std::uint8_t> glen;
    put_u32(glen, static_cast<std::uint32_t>(meta.size()));
    write_element(out, Tag{0x0002, 0x0000}, "UL", glen, true);
  }
  out.insert(out.end(), meta.begin(), meta.end());

  // Dataset in ascending tag order.
  if (!instance.sop_instance_uid.empty())
    write_string_element(out, kSopInstanceUid, "UI", instance.sop_instance_uid, explicit_vr);
  if (!instance.series_description.empty())
    write_string_element(out, kSeriesDescription, "LO", instance.series_description, explicit_vr);
  if (!instance.patient_id.empty())
    write_string_element(out, kPatientId, "LO", instance.patient_id, explicit_vr);
  if (instance.contrast_bolus_agent)
    write_string_element(out, kContrastBolusAgent, "LO", *instance.contrast_bolus_agent, explicit_vr);
  if (!instance.scanning_sequence.empty()) {
    std::string joined;
    for (std::size_t i = 0; i < instance.scanning_sequence.size(); ++i) {
      if (i) joined.push_back('\\');
      joined += instance.scanning_sequence[i];
    }
    write_string_element(out, kScanningSequence, "CS", joined, explicit_vr);
  }
  if (instance.repetition_time)
    write_string_element(out, kRepetitionTime, "DS", format_double(*instance.repetition_time), explicit_vr);
  if (instance.echo_time)
    write_string_element(out, kEchoTime, "DS", format_double(*instance.echo_time), explicit_vr);
  if (instance.flip_angle)
    write_string_element(out, kFlipAngle, "DS", format_double(*instance.flip_angle), explicit_vr);
  if (!instance.series_instance_uid.empty())
    write_string_element(out, kSeriesInstanceUid, "UI", instance.series_instance_uid, explicit_vr);
  if (instance.image_position_patient) {
    std::array<double, 3> p{(*instance.image_position_patient)[0],
                            (*instance.image_position_patient)[1],
                            (*instance.image_position_patient)[2]};
    write_string_element(out, kImagePositionPatient, "DS", join_ds(p), explicit_vr);
  }
  if (instance.image_orientation_patient) {
    std::array<double, 6> o{};
    for (int i = 0; i < 6; ++i) o[static_cast<std::size_t>(i)] = (*instance.image_orientation_patient)[i];
    write_string_element(out, kImageOrientationPatient, "DS", join_ds(o), explicit_vr);
  }
  if (instance.temporal_position)
    write_string_element(out, kTemporalPosition, "IS", std::to_string(*instance.temporal_position), explicit_vr);
  if (instance.rows > 0) {
    std::vector<std::uint8_t> v;
    put_u16(v, static_cast<std::uint16_t>(instance.rows));
    write_element(out, kRows, "US", v, explicit_vr);
  }
  if (instance.cols > 0) {
    std::vector<std::uint8_t> v;
    put_u16(v, static_cast<std::uint16_t>(instance.cols));
    write_element(out, kColumns, "US", v, explicit_vr);
  }
  if (instance.pixel_spacing) {
    std::array<double, 2> s{(*instance.pixel_spacing)[0], (*instance.pixel_spacing)[1]};
    write_string_element(out, kPixelSpacing, "DS", join_ds(s), explicit_vr);
  }
  if (instance.has_pixel_payload)
    write_element(out, kPixelData, "OW", instance.pixel_payload, explicit_vr);
  return out;
}

std::string to_dicom_json(const InstanceMetadata& instance) {
  nlohmann::json doc = nlohmann::json::object();
  auto put_strings = [&](const char* key, const char* vr, std::vector<std::string> vals) {
    nlohmann::json e;
    e["vr"] = vr;
    if (!vals.empty() && !(vals.size() == 1 && vals[0].empty())) e["Value"] = vals;
    doc[key] = e;
  };
  auto put_numbers = [&](const char* key, const char* vr, std::vector<double> vals) {
    nlohmann::json e;
    e["vr"] = vr;
    e["Value"] = vals;
    doc[key] = e;
  };

  if (!instance.sop_instance_uid.empty())
    put_strings("00080018", "UI", {instance.sop_instance_uid});
  if (!instance.series_description.empty())
    put_strings("0008103E", "LO", {instance.series_description});
  if (!instance.patient_id.empty()) put_strings("00100020", "LO", {instance.patient_id});
  if (instance.contrast_bolus_agent)
    put_strings("00180010", "LO", {*instance.contrast_bolus_agent});
  if (!instance.scanning_sequence.empty())
    put_strings("00180020", "CS", instance.scanning_sequence);
  if (instance.repetition_time) put_numbers("00180080", "DS", {*instance.repetition_time});
  if (instance.echo_time) put_numbers("00180081", "DS", {*instance.echo_time});
  if (instance.flip_angle) put_numbers("00181314", "DS", {*instance.flip_angle});
  if (!instance.series_instance_uid.empty())
    put_strings("0020000E", "UI", {instance.series_instance_uid});
  if (instance.image_position_patient)
    put_numbers("00200032", "DS",
                {(*instance.image_position_patient)[0], (*instance.image_position_patient)[1],
                 (*instance.image_position_patient)[2]});
  if (instance.image_orientation_patient) {
    std::vector<double> o(6);
    for (int i = 0; i < 6; ++i) o[static_cast<std::size_t>(i)] = (*instance.image_orientation_patient)[i];
    put_numbers("00200037", "DS", o);
  }
  if (instance.temporal_position)
    put_numbers("00200100", "IS", {static_cast<double>(*instance.temporal_position)});
  if (instance.rows > 0) put_numbers("00280010", "US", {static_cast<double>(instance.rows)});
  if (instance.cols > 0) put_numbers("00280011", "US", {static_cast<double>(instance.cols)});
  if (instance.pixel_spacing)
    put_numbers("00280030", "DS", {(*instance.pixel_spacing)[0], (*instance.pixel_spacing)[1]});
  if (instance.has_pixel_payload) {
    nlohmann::json e;
    e["vr"] = "OW";
    e["InlineBinary"] = base64_encode(instance.pixel_payload.data(), instance.pixel_payload.size());
    doc["7FE00010"] = e;
  }
  return doc.dump(2);
}

}  // namespace mrseq::dicom
