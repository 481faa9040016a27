// Shared primitives: error types, deterministic RNG, byte IO, CSV and
// provenance helpers. Everything downstream assumes little-endian byte
// layouts are produced/consumed explicitly, never via struct punning.
#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mrseq {

inline constexpr std::string_view kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Errors. One exception type per failure contract so tests can match them.
// ---------------------------------------------------------------------------
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MalformedFile : Error { using Error::Error; };
struct UnsupportedTransferSyntax : Error { using Error::Error; };
struct MalformedJson : Error { using Error::Error; };
struct MissingRequiredTag : Error { using Error::Error; };
struct ConflictingPatient : Error { using Error::Error; };
struct NoPixelData : Error { using Error::Error; };
struct SizeMismatch : Error { using Error::Error; };
struct DegenerateOrientation : Error { using Error::Error; };
struct BadPattern : Error { using Error::Error; };
struct DuplicatePriority : Error { using Error::Error; };
struct EmptyTrainingSet : Error { using Error::Error; };
struct EmptyImage : Error { using Error::Error; };
struct ModeMismatch : Error { using Error::Error; };
struct BadLabel : Error { using Error::Error; };
struct CacheMismatch : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct EmptyNode : Error { using Error::Error; };
struct DegenerateData : Error { using Error::Error; };
struct BadFractions : Error { using Error::Error; };
struct TooFewPatients : Error { using Error::Error; };
struct EmptyTable : Error { using Error::Error; };
struct UsageError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Sequence classes. Index order is fixed across the whole toolkit: it is the
// class axis of every probability vector and confusion matrix.
// ---------------------------------------------------------------------------
enum class SeqClass : int { T2W = 0, DWI = 1, ADC = 2, DCE = 3 };
inline constexpr int kNumClasses = 4;

const char* to_string(SeqClass c);
std::optional<SeqClass> seq_class_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// Deterministic RNG (splitmix64). All randomness in the toolkit flows from
// explicit seeds through this generator so artifacts are byte-reproducible
// across platforms; std::random distributions are avoided on purpose.
// ---------------------------------------------------------------------------
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n) { return next() % n; }

  // Standard normal via Box-Muller; spare value cached.
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream seed; used to hand sub-tasks (folds,
  // trees, patients) their own generators so parallel order never matters.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Hashing, base64
// ---------------------------------------------------------------------------
std::uint64_t fnv1a64(std::string_view data);
std::string to_hex(std::uint64_t v);

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// ---------------------------------------------------------------------------
// Little-endian byte IO
// ---------------------------------------------------------------------------
inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------
std::string trim(std::string_view s);
std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Shortest round-trip decimal representation of a double ("4000", "0.25").
std::string format_double(double v);

// CSV: escape one field, split one line honoring double-quote escaping.
std::string csv_escape(std::string_view field);
std::vector<std::string> csv_split_line(std::string_view line);

// Provenance block embedded at the top of every text artifact. Contains no
// wall-clock data so reruns stay byte-identical.
std::string provenance_header(std::uint64_t seed, std::string_view config_hash);

// ---------------------------------------------------------------------------
// Whole-file IO
// ---------------------------------------------------------------------------
std::string read_file(const std::string& path);            // throws Error when unreadable
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file(const std::string& path, std::string_view content);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

// ---------------------------------------------------------------------------
// Worker pool. Honors MRSEQ_WORKERS; nested calls degrade to serial.
// ---------------------------------------------------------------------------
int worker_count();
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mrseq
