#pragma once

// Weight-space checkpoint operations over safetensors-compatible archives:
// an 8-byte little-endian header length N, N bytes of JSON mapping tensor
// name -> {"dtype", "shape", "data_offsets"}, then the raw payload.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace docrl::merge {

enum class DType { F64, F32, F16, BF16, I64, I32, I16, I8, U64, U32, U16, U8, Bool };

std::size_t dtype_size(DType d);
std::string_view dtype_name(DType d);
/// Throws DataError for unknown names.
DType parse_dtype(std::string_view name);
bool is_float(DType d);

struct Tensor {
  DType dtype = DType::F32;
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> data;

  std::size_t numel() const;
  bool same_layout(const Tensor& other) const {
    return dtype == other.dtype && shape == other.shape;
  }
  friend bool operator==(const Tensor&, const Tensor&) = default;

  /// Element `i` widened to double (float dtypes only).
  double get(std::size_t i) const;

  static Tensor from_f32(std::vector<std::int64_t> shape, std::span<const float> values);
  static Tensor from_f64(std::vector<std::int64_t> shape, std::span<const double> values);
  /// Values are rounded to the target dtype (round-to-nearest-even).
  static Tensor from_doubles(DType dtype, std::vector<std::int64_t> shape,
                             std::span<const double> values);
};

struct TensorArchive {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const TensorArchive&, const TensorArchive&) = default;
};

std::vector<std::uint8_t> serialize_archive(const TensorArchive& archive);
TensorArchive parse_archive(std::span<const std::uint8_t> bytes);
TensorArchive read_archive(const std::string& path);
void write_archive(const std::string& path, const TensorArchive& archive);

struct TensorInfo {
  DType dtype = DType::F32;
  std::vector<std::int64_t> shape;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

/// Reads the header eagerly and tensor payloads on demand.
class ArchiveReader {
 public:
  explicit ArchiveReader(const std::string& path);

  const std::string& path() const { return path_; }
  const std::map<std::string, TensorInfo>& tensors() const { return info_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  Tensor read(const std::string& name);

 private:
  std::string path_;
  std::ifstream in_;
  std::uint64_t data_start_ = 0;
  std::map<std::string, TensorInfo> info_;
  std::map<std::string, std::string> metadata_;
};

/// Writes the header up front, then tensors one at a time in name order.
class ArchiveWriter {
 public:
  ArchiveWriter(const std::string& path,
                const std::map<std::string, std::pair<DType, std::vector<std::int64_t>>>& layout,
                const std::map<std::string, std::string>& metadata);

  void write(const std::string& name, const Tensor& tensor);
  void finish();

 private:
  std::string path_;
  std::ofstream out_;
  std::vector<std::string> order_;
  std::size_t next_ = 0;
  std::map<std::string, std::pair<DType, std::vector<std::int64_t>>> layout_;
};

// Rounding helpers, exposed for tests.
std::uint16_t to_f16_bits(double v);
std::uint16_t to_bf16_bits(double v);
double from_f16_bits(std::uint16_t bits);
double from_bf16_bits(std::uint16_t bits);

// Per-tensor kernels ------------------------------------------------------------

/// Elementwise mean. Values are sorted per element and summed pairwise, so
/// the result does not depend on input order. Non-float tensors must be
/// identical and are copied.
Tensor soup_tensor(const std::string& name, std::span<const Tensor* const> inputs);

/// base + alpha * (other - base), widened; alpha == 0 copies base.
Tensor lerp_tensor(const std::string& name, const Tensor& base, const Tensor& other, double alpha);

// Archive operations -------------------------------------------------------------

struct MergeSpec {
  const TensorArchive* base = nullptr;
  const TensorArchive* other = nullptr;
  double alpha = 0.0;
};

/// Interpolation strengths for the OCR and bbox merge recipes.
inline constexpr double kOcrSoupAlpha = 0.4;
inline constexpr double kBboxSoupAlpha = 0.1;
inline constexpr std::size_t kDefaultSoupSize = 5;

/// Throws ConfigError unless alpha is in [0, 1].
void check_alpha(double alpha);

/// Throws StructuralError naming the first offending tensor.
void check_compatible(const TensorArchive& a, const TensorArchive& b);

TensorArchive soup(const std::vector<TensorArchive>& archives);
TensorArchive task_arithmetic(const MergeSpec& spec);

struct SweepEntry {
  double alpha = 0.0;
  std::string name;  // "alpha_<value>"
  TensorArchive archive;
};

std::string alpha_label(double alpha);
std::vector<SweepEntry> alpha_sweep(const TensorArchive& base, const TensorArchive& other,
                                    const std::vector<double>& alphas);

// Streaming file operations (peak memory ~ largest tensor x inputs x workers).

void soup_files(const std::vector<std::string>& inputs, const std::string& output,
                unsigned workers = 1);
void task_arithmetic_files(const std::string& base, const std::string& other, double alpha,
                           const std::string& output, unsigned workers = 1);
/// Writes one archive per alpha into `out_dir` as "<alpha_label>.safetensors";
/// returns the written paths.
std::vector<std::string> alpha_sweep_files(const std::string& base, const std::string& other,
                                           const std::vector<double>& alphas,
                                           const std::string& out_dir, unsigned workers = 1);

}  // namespace docrl::merge
