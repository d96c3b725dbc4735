#include "docrl/merge.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "docrl/error.hpp"
#include "docrl/parallel.hpp"

static_assert(std::endian::native == std::endian::little, "archive payloads are little-endian");

namespace docrl::merge {

using nlohmann::json;

namespace {

constexpr std::uint64_t kMaxHeaderBytes = 100'000'000;

struct DTypeRow {
  DType dtype;
  std::string_view name;
  std::size_t size;
  bool floating;
};

constexpr DTypeRow kDTypes[] = {
    {DType::F64, "F64", 8, true},   {DType::F32, "F32", 4, true},   {DType::F16, "F16", 2, true},
    {DType::BF16, "BF16", 2, true}, {DType::I64, "I64", 8, false},  {DType::I32, "I32", 4, false},
    {DType::I16, "I16", 2, false},  {DType::I8, "I8", 1, false},    {DType::U64, "U64", 8, false},
    {DType::U32, "U32", 4, false},  {DType::U16, "U16", 2, false},  {DType::U8, "U8", 1, false},
    {DType::Bool, "BOOL", 1, false},
};

const DTypeRow& row(DType d) {
  for (const DTypeRow& r : kDTypes) {
    if (r.dtype == d) return r;
  }
  throw DataError("unknown dtype");
}

std::size_t checked_numel(const std::vector<std::int64_t>& shape) {
  std::size_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw DataError("negative dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

/// Rounds to a binary format with `precision` significand bits, minimum
/// normal exponent `emin` and largest finite value `max_finite` (RNE).
double round_to_format(double x, int precision, int emin, double max_finite) {
  if (!std::isfinite(x) || x == 0.0) return x;
  int exp2 = 0;
  std::frexp(x, &exp2);  // |x| = m * 2^exp2, m in [0.5, 1)
  const int leading = exp2 - 1;
  const int quantum = std::max(leading, emin) - (precision - 1);
  const double r = std::ldexp(std::nearbyint(std::ldexp(x, -quantum)), quantum);
  if (std::fabs(r) > max_finite) return std::copysign(INFINITY, x);
  return r;
}

std::uint16_t pack_small_float(double v, int precision, int emin, int exp_bits, double max_finite) {
  const int mant_bits = precision - 1;
  const std::uint16_t sign = std::signbit(v) ? static_cast<std::uint16_t>(1u << 15) : 0;
  const std::uint16_t exp_all = static_cast<std::uint16_t>((1u << exp_bits) - 1);
  if (std::isnan(v)) {
    return static_cast<std::uint16_t>(sign | (exp_all << mant_bits) | (1u << (mant_bits - 1)));
  }
  const double r = round_to_format(v, precision, emin, max_finite);
  if (std::isinf(r)) return static_cast<std::uint16_t>(sign | (exp_all << mant_bits));
  const double a = std::fabs(r);
  if (a == 0.0) return sign;
  int exp2 = 0;
  std::frexp(a, &exp2);
  const int leading = exp2 - 1;
  const int bias = (1 << (exp_bits - 1)) - 1;
  if (leading < emin) {
    const auto mant = static_cast<std::uint32_t>(std::ldexp(a, -(emin - mant_bits)));
    return static_cast<std::uint16_t>(sign | mant);
  }
  const auto biased = static_cast<std::uint32_t>(leading + bias);
  const auto mant =
      static_cast<std::uint32_t>(std::ldexp(a, mant_bits - leading) - std::ldexp(1.0, mant_bits));
  return static_cast<std::uint16_t>(sign | (biased << mant_bits) | mant);
}

double unpack_small_float(std::uint16_t bits, int precision, int emin, int exp_bits) {
  const int mant_bits = precision - 1;
  const bool neg = (bits >> 15) & 1u;
  const std::uint32_t exp_field = (bits >> mant_bits) & ((1u << exp_bits) - 1);
  const std::uint32_t mant = bits & ((1u << mant_bits) - 1);
  const int bias = (1 << (exp_bits - 1)) - 1;
  double v = 0.0;
  if (exp_field == (1u << exp_bits) - 1) {
    v = mant == 0 ? INFINITY : NAN;
  } else if (exp_field == 0) {
    v = std::ldexp(static_cast<double>(mant), emin - mant_bits);
  } else {
    v = std::ldexp(static_cast<double>(mant) + std::ldexp(1.0, mant_bits),
                   static_cast<int>(exp_field) - bias - mant_bits);
  }
  return neg ? -v : v;
}

constexpr double kF16Max = 65504.0;
const double kBF16Max = std::ldexp(255.0, 120);  // (2 - 2^-7) * 2^127

template <class T>
T load(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <class T>
void store(std::uint8_t* p, T v) {
  std::memcpy(p, &v, sizeof(T));
}

void put(Tensor& t, std::size_t i, double v) {
  std::uint8_t* p = t.data.data() + i * dtype_size(t.dtype);
  switch (t.dtype) {
    case DType::F64:
      store<double>(p, v);
      break;
    case DType::F32:
      store<float>(p, static_cast<float>(v));
      break;
    case DType::F16:
      store<std::uint16_t>(p, to_f16_bits(v));
      break;
    case DType::BF16:
      store<std::uint16_t>(p, to_bf16_bits(v));
      break;
    default:
      throw DataError("cannot store floating value in integer tensor");
  }
}

/// Total order over doubles (IEEE totalOrder on the bit pattern).
std::uint64_t order_key(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  return (bits >> 63) ? ~bits : bits | (1ULL << 63);
}

template <class Acc>
Acc pairwise_sum(const double* v, std::size_t n) {
  if (n == 1) return static_cast<Acc>(v[0]);
  const std::size_t half = n / 2;
  return pairwise_sum<Acc>(v, half) + pairwise_sum<Acc>(v + half, n - half);
}

std::string shape_string(const std::vector<std::int64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void require_same_layout(const std::string& name, const Tensor& a, const Tensor& b) {
  if (a.dtype != b.dtype) {
    throw StructuralError("tensor '" + name + "': dtype " + std::string(dtype_name(a.dtype)) +
                          " vs " + std::string(dtype_name(b.dtype)));
  }
  if (a.shape != b.shape) {
    throw StructuralError("tensor '" + name + "': shape " + shape_string(a.shape) + " vs " +
                          shape_string(b.shape));
  }
}

json header_json(const std::map<std::string, std::pair<DType, std::vector<std::int64_t>>>& layout,
                 const std::map<std::string, std::string>& metadata) {
  json h = json::object();
  if (!metadata.empty()) h["__metadata__"] = metadata;
  std::uint64_t offset = 0;
  for (const auto& [name, entry] : layout) {
    const std::uint64_t bytes = checked_numel(entry.second) * dtype_size(entry.first);
    h[name] = {{"dtype", dtype_name(entry.first)},
               {"shape", entry.second},
               {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  return h;
}

std::string padded_header(const json& h) {
  std::string s = h.dump();
  while (s.size() % 8 != 0) s += ' ';
  return s;
}

struct ParsedHeader {
  std::map<std::string, TensorInfo> info;
  std::map<std::string, std::string> metadata;
};

ParsedHeader parse_header(std::string_view text, std::uint64_t data_size) {
  json h;
  try {
    h = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("archive header is not valid JSON: ") + e.what());
  }
  if (!h.is_object()) throw DataError("archive header must be a JSON object");
  ParsedHeader out;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
  for (auto it = h.begin(); it != h.end(); ++it) {
    if (it.key() == "__metadata__") {
      if (!it->is_object()) throw DataError("__metadata__ must be an object");
      for (auto m = it->begin(); m != it->end(); ++m) {
        if (!m->is_string()) throw DataError("__metadata__ values must be strings");
        out.metadata[m.key()] = m->get<std::string>();
      }
      continue;
    }
    const json& e = *it;
    try {
      TensorInfo info;
      info.dtype = parse_dtype(e.at("dtype").get<std::string>());
      info.shape = e.at("shape").get<std::vector<std::int64_t>>();
      const auto offsets = e.at("data_offsets").get<std::vector<std::uint64_t>>();
      if (offsets.size() != 2) throw DataError("data_offsets must have two entries");
      info.begin = offsets[0];
      info.end = offsets[1];
      if (info.end < info.begin || info.end > data_size) {
        throw DataError("data_offsets out of bounds");
      }
      if (info.end - info.begin != checked_numel(info.shape) * dtype_size(info.dtype)) {
        throw DataError("data length does not match shape and dtype");
      }
      ranges.emplace_back(info.begin, info.end);
      out.info.emplace(it.key(), std::move(info));
    } catch (const json::exception& ex) {
      throw DataError("tensor '" + it.key() + "': malformed entry: " + ex.what());
    } catch (const DataError& ex) {
      throw DataError("tensor '" + it.key() + "': " + ex.what());
    }
  }
  std::sort(ranges.begin(), ranges.end());
  std::uint64_t expected = 0;
  for (const auto& [b, e] : ranges) {
    if (b != expected) throw DataError("tensor payloads overlap or leave gaps");
    expected = e;
  }
  if (expected != data_size) throw DataError("trailing bytes after the last tensor");
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t dtype_size(DType d) { return row(d).size; }
std::string_view dtype_name(DType d) { return row(d).name; }
bool is_float(DType d) { return row(d).floating; }

DType parse_dtype(std::string_view name) {
  for (const DTypeRow& r : kDTypes) {
    if (r.name == name) return r.dtype;
  }
  throw DataError("unsupported dtype " + std::string(name));
}

std::uint16_t to_f16_bits(double v) { return pack_small_float(v, 11, -14, 5, kF16Max); }
std::uint16_t to_bf16_bits(double v) { return pack_small_float(v, 8, -126, 8, kBF16Max); }
double from_f16_bits(std::uint16_t bits) { return unpack_small_float(bits, 11, -14, 5); }
double from_bf16_bits(std::uint16_t bits) { return unpack_small_float(bits, 8, -126, 8); }

std::size_t Tensor::numel() const { return checked_numel(shape); }

double Tensor::get(std::size_t i) const {
  const std::uint8_t* p = data.data() + i * dtype_size(dtype);
  switch (dtype) {
    case DType::F64:
      return load<double>(p);
    case DType::F32:
      return load<float>(p);
    case DType::F16:
      return from_f16_bits(load<std::uint16_t>(p));
    case DType::BF16:
      return from_bf16_bits(load<std::uint16_t>(p));
    default:
      throw DataError("Tensor::get on a non-float tensor");
  }
}

Tensor Tensor::from_f32(std::vector<std::int64_t> shape, std::span<const float> values) {
  Tensor t{DType::F32, std::move(shape), {}};
  if (t.numel() != values.size()) throw DataError("value count does not match shape");
  t.data.resize(values.size() * sizeof(float));
  std::memcpy(t.data.data(), values.data(), t.data.size());
  return t;
}

Tensor Tensor::from_f64(std::vector<std::int64_t> shape, std::span<const double> values) {
  Tensor t{DType::F64, std::move(shape), {}};
  if (t.numel() != values.size()) throw DataError("value count does not match shape");
  t.data.resize(values.size() * sizeof(double));
  std::memcpy(t.data.data(), values.data(), t.data.size());
  return t;
}

Tensor Tensor::from_doubles(DType dtype, std::vector<std::int64_t> shape,
                            std::span<const double> values) {
  Tensor t{dtype, std::move(shape), {}};
  if (t.numel() != values.size()) throw DataError("value count does not match shape");
  t.data.resize(values.size() * dtype_size(dtype));
  for (std::size_t i = 0; i < values.size(); ++i) put(t, i, values[i]);
  return t;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> serialize_archive(const TensorArchive& archive) {
  std::map<std::string, std::pair<DType, std::vector<std::int64_t>>> layout;
  for (const auto& [name, t] : archive.tensors) {
    if (t.data.size() != t.numel() * dtype_size(t.dtype)) {
      throw DataError("tensor '" + name + "': data length does not match shape and dtype");
    }
    layout.emplace(name, std::make_pair(t.dtype, t.shape));
  }
  const std::string header = padded_header(header_json(layout, archive.metadata));
  std::vector<std::uint8_t> out(8);
  store<std::uint64_t>(out.data(), header.size());
  out.insert(out.end(), header.begin(), header.end());
  for (const auto& [name, t] : archive.tensors) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

TensorArchive parse_archive(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw DataError("archive shorter than its 8-byte header length");
  const auto n = load<std::uint64_t>(bytes.data());
  if (n > kMaxHeaderBytes || n > bytes.size() - 8) throw DataError("archive header length invalid");
  const std::string_view text(reinterpret_cast<const char*>(bytes.data() + 8), n);
  const std::uint64_t data_size = bytes.size() - 8 - n;
  ParsedHeader header = parse_header(text, data_size);
  TensorArchive archive;
  archive.metadata = std::move(header.metadata);
  const std::uint8_t* data = bytes.data() + 8 + n;
  for (auto& [name, info] : header.info) {
    Tensor t{info.dtype, info.shape, {}};
    t.data.assign(data + info.begin, data + info.end);
    archive.tensors.emplace(name, std::move(t));
  }
  return archive;
}

TensorArchive read_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open archive: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_archive(bytes);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_archive(const std::string& path, const TensorArchive& archive) {
  const std::vector<std::uint8_t> bytes = serialize_archive(archive);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write archive: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write: " + path);
}

ArchiveReader::ArchiveReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw ConfigError("cannot open archive: " + path);
  in_.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0);
  std::uint8_t len_bytes[8];
  if (file_size < 8 || !in_.read(reinterpret_cast<char*>(len_bytes), 8)) {
    throw DataError(path + ": archive shorter than its 8-byte header length");
  }
  const auto n = load<std::uint64_t>(len_bytes);
  if (n > kMaxHeaderBytes || n > file_size - 8) throw DataError(path + ": header length invalid");
  std::string text(n, '\0');
  in_.read(text.data(), static_cast<std::streamsize>(n));
  data_start_ = 8 + n;
  try {
    ParsedHeader header = parse_header(text, file_size - data_start_);
    info_ = std::move(header.info);
    metadata_ = std::move(header.metadata);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

Tensor ArchiveReader::read(const std::string& name) {
  const auto it = info_.find(name);
  if (it == info_.end()) throw StructuralError(path_ + ": no tensor named '" + name + "'");
  const TensorInfo& info = it->second;
  Tensor t{info.dtype, info.shape, std::vector<std::uint8_t>(info.end - info.begin)};
  in_.seekg(static_cast<std::streamoff>(data_start_ + info.begin));
  if (!in_.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()))) {
    throw DataError(path_ + ": truncated payload for '" + name + "'");
  }
  return t;
}

ArchiveWriter::ArchiveWriter(
    const std::string& path,
    const std::map<std::string, std::pair<DType, std::vector<std::int64_t>>>& layout,
    const std::map<std::string, std::string>& metadata)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), layout_(layout) {
  if (!out_) throw ConfigError("cannot write archive: " + path);
  const std::string header = padded_header(header_json(layout, metadata));
  std::uint8_t len_bytes[8];
  store<std::uint64_t>(len_bytes, header.size());
  out_.write(reinterpret_cast<const char*>(len_bytes), 8);
  out_.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, _] : layout) order_.push_back(name);
}

void ArchiveWriter::write(const std::string& name, const Tensor& tensor) {
  if (next_ >= order_.size() || order_[next_] != name) {
    throw std::logic_error("ArchiveWriter: tensors must be written in name order");
  }
  const auto& [dtype, shape] = layout_.at(name);
  if (tensor.dtype != dtype || tensor.shape != shape) {
    throw StructuralError("tensor '" + name + "' does not match the declared layout");
  }
  out_.write(reinterpret_cast<const char*>(tensor.data.data()),
             static_cast<std::streamsize>(tensor.data.size()));
  ++next_;
}

void ArchiveWriter::finish() {
  if (next_ != order_.size()) throw std::logic_error("ArchiveWriter: missing tensors");
  out_.flush();
  if (!out_) throw DataError("short write: " + path_);
  out_.close();
}

// ---------------------------------------------------------------------------

Tensor soup_tensor(const std::string& name, std::span<const Tensor* const> inputs) {
  if (inputs.empty()) throw ConfigError("soup needs at least one archive");
  const Tensor& first = *inputs[0];
  for (const Tensor* t : inputs.subspan(1)) require_same_layout(name, first, *t);
  if (!is_float(first.dtype)) {
    for (const Tensor* t : inputs.subspan(1)) {
      if (t->data != first.data) {
        throw StructuralError("tensor '" + name + "': non-float tensor differs between inputs");
      }
    }
    return first;
  }
  if (inputs.size() == 1) return first;

  const std::size_t k = inputs.size();
  const std::size_t n = first.numel();
  Tensor out{first.dtype, first.shape, std::vector<std::uint8_t>(first.data.size())};
  std::vector<double> vals(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) vals[j] = inputs[j]->get(i);
    std::sort(vals.begin(), vals.end(),
              [](double a, double b) { return order_key(a) < order_key(b); });
    if (first.dtype == DType::F64) {
      const long double mean = pairwise_sum<long double>(vals.data(), k) / static_cast<long double>(k);
      put(out, i, static_cast<double>(mean));
    } else {
      put(out, i, pairwise_sum<double>(vals.data(), k) / static_cast<double>(k));
    }
  }
  return out;
}

Tensor lerp_tensor(const std::string& name, const Tensor& base, const Tensor& other, double alpha) {
  check_alpha(alpha);
  require_same_layout(name, base, other);
  if (!is_float(base.dtype)) {
    if (base.data != other.data) {
      throw StructuralError("tensor '" + name + "': non-float tensor differs between inputs");
    }
    return base;
  }
  if (alpha == 0.0) return base;
  Tensor out{base.dtype, base.shape, std::vector<std::uint8_t>(base.data.size())};
  const std::size_t n = base.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double b = base.get(i);
    const double o = other.get(i);
    if (base.dtype == DType::F64) {
      const long double lb = b;
      put(out, i, static_cast<double>(lb + static_cast<long double>(alpha) * (o - lb)));
    } else {
      put(out, i, b + alpha * (o - b));
    }
  }
  return out;
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must be in [0, 1], got " + std::to_string(alpha));
  }
}

void check_compatible(const TensorArchive& a, const TensorArchive& b) {
  auto ia = a.tensors.begin();
  auto ib = b.tensors.begin();
  while (ia != a.tensors.end() || ib != b.tensors.end()) {
    if (ib == b.tensors.end() || (ia != a.tensors.end() && ia->first < ib->first)) {
      throw StructuralError("tensor '" + ia->first + "' missing from second archive");
    }
    if (ia == a.tensors.end() || ib->first < ia->first) {
      throw StructuralError("tensor '" + ib->first + "' missing from first archive");
    }
    require_same_layout(ia->first, ia->second, ib->second);
    ++ia;
    ++ib;
  }
}

TensorArchive soup(const std::vector<TensorArchive>& archives) {
  if (archives.empty()) throw ConfigError("soup needs at least one archive");
  for (std::size_t i = 1; i < archives.size(); ++i) check_compatible(archives[0], archives[i]);
  TensorArchive out;
  out.metadata = archives[0].metadata;
  std::vector<const Tensor*> inputs(archives.size());
  for (const auto& [name, _] : archives[0].tensors) {
    for (std::size_t j = 0; j < archives.size(); ++j) inputs[j] = &archives[j].tensors.at(name);
    out.tensors.emplace(name, soup_tensor(name, inputs));
  }
  return out;
}

TensorArchive task_arithmetic(const MergeSpec& spec) {
  if (!spec.base || !spec.other) throw ConfigError("merge needs a base and an other archive");
  check_alpha(spec.alpha);
  check_compatible(*spec.base, *spec.other);
  TensorArchive out;
  out.metadata = spec.base->metadata;
  for (const auto& [name, t] : spec.base->tensors) {
    out.tensors.emplace(name, lerp_tensor(name, t, spec.other->tensors.at(name), spec.alpha));
  }
  return out;
}

std::string alpha_label(double alpha) {
  std::ostringstream s;
  s.precision(6);
  s << alpha;
  return "alpha_" + s.str();
}

std::vector<SweepEntry> alpha_sweep(const TensorArchive& base, const TensorArchive& other,
                                    const std::vector<double>& alphas) {
  for (double a : alphas) check_alpha(a);
  check_compatible(base, other);
  std::vector<SweepEntry> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    out.push_back({a, alpha_label(a), task_arithmetic({&base, &other, a})});
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

using Layout = std::map<std::string, std::pair<DType, std::vector<std::int64_t>>>;

Layout check_headers(std::vector<ArchiveReader>& readers) {
  const auto& first = readers[0].tensors();
  for (std::size_t r = 1; r < readers.size(); ++r) {
    const auto& other = readers[r].tensors();
    auto ia = first.begin();
    auto ib = other.begin();
    while (ia != first.end() || ib != other.end()) {
      if (ib == other.end() || (ia != first.end() && ia->first < ib->first)) {
        throw StructuralError("tensor '" + ia->first + "' missing from " + readers[r].path());
      }
      if (ia == first.end() || ib->first < ia->first) {
        throw StructuralError("tensor '" + ib->first + "' missing from " + readers[0].path());
      }
      if (ia->second.dtype != ib->second.dtype || ia->second.shape != ib->second.shape) {
        throw StructuralError("tensor '" + ia->first + "': layout differs in " + readers[r].path());
      }
      ++ia;
      ++ib;
    }
  }
  Layout layout;
  for (const auto& [name, info] : first) layout.emplace(name, std::make_pair(info.dtype, info.shape));
  return layout;
}

/// Streams every tensor through `kernel` in batches of `workers`.
template <class Kernel>
void stream_merge(std::vector<ArchiveReader>& readers, const std::string& output, unsigned workers,
                  Kernel&& kernel) {
  const Layout layout = check_headers(readers);
  ArchiveWriter writer(output, layout, readers[0].metadata());
  std::vector<std::string> names;
  for (const auto& [name, _] : layout) names.push_back(name);
  const std::size_t batch = std::max(1u, workers);
  for (std::size_t start = 0; start < names.size(); start += batch) {
    const std::size_t count = std::min(batch, names.size() - start);
    std::vector<std::vector<Tensor>> loaded(count);
    for (std::size_t b = 0; b < count; ++b) {
      for (ArchiveReader& r : readers) loaded[b].push_back(r.read(names[start + b]));
    }
    std::vector<Tensor> merged = parallel_map(count, workers, [&](std::size_t b) {
      return kernel(names[start + b], loaded[b]);
    });
    for (std::size_t b = 0; b < count; ++b) writer.write(names[start + b], merged[b]);
  }
  writer.finish();
}

}  // namespace

void soup_files(const std::vector<std::string>& inputs, const std::string& output,
                unsigned workers) {
  if (inputs.empty()) throw ConfigError("soup needs at least one --input");
  std::vector<ArchiveReader> readers;
  for (const std::string& p : inputs) readers.emplace_back(p);
  stream_merge(readers, output, workers, [](const std::string& name, const std::vector<Tensor>& ts) {
    std::vector<const Tensor*> ptrs;
    for (const Tensor& t : ts) ptrs.push_back(&t);
    return soup_tensor(name, ptrs);
  });
}

void task_arithmetic_files(const std::string& base, const std::string& other, double alpha,
                           const std::string& output, unsigned workers) {
  check_alpha(alpha);
  std::vector<ArchiveReader> readers;
  readers.emplace_back(base);
  readers.emplace_back(other);
  stream_merge(readers, output, workers,
               [alpha](const std::string& name, const std::vector<Tensor>& ts) {
                 return lerp_tensor(name, ts[0], ts[1], alpha);
               });
}

std::vector<std::string> alpha_sweep_files(const std::string& base, const std::string& other,
                                           const std::vector<double>& alphas,
                                           const std::string& out_dir, unsigned workers) {
  for (double a : alphas) check_alpha(a);
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> paths;
  for (double a : alphas) {
    const std::string path =
        (std::filesystem::path(out_dir) / (alpha_label(a) + ".safetensors")).string();
    task_arithmetic_files(base, other, a, path, workers);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace docrl::merge
