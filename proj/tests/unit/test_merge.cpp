#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "docrl/error.hpp"
#include "docrl/merge.hpp"
#include "support.hpp"

using namespace docrl;
using namespace docrl::merge;

namespace {

// Field-by-field decoding, written independently of the library.
double decode_small(std::uint16_t bits, int exp_bits, int mant_bits) {
  const int bias = (1 << (exp_bits - 1)) - 1;
  const int e = (bits >> mant_bits) & ((1 << exp_bits) - 1);
  const int m = bits & ((1 << mant_bits) - 1);
  const double sign = (bits >> 15) ? -1.0 : 1.0;
  if (e == (1 << exp_bits) - 1) return m ? NAN : sign * INFINITY;
  if (e == 0) return sign * m * std::pow(2.0, 1 - bias - mant_bits);
  return sign * (1.0 + m / std::pow(2.0, mant_bits)) * std::pow(2.0, e - bias);
}

/// Nearest representable value by search over the sorted finite table,
/// ties to the even bit pattern.
std::uint16_t oracle_round(double x, int exp_bits, int mant_bits) {
  static std::map<int, std::vector<std::pair<double, std::uint16_t>>> tables;
  auto& table = tables[exp_bits];
  if (table.empty()) {
    for (std::uint32_t b = 0; b < 0x8000; ++b) {
      const double v = decode_small(static_cast<std::uint16_t>(b), exp_bits, mant_bits);
      if (std::isfinite(v)) table.emplace_back(v, static_cast<std::uint16_t>(b));
    }
    std::sort(table.begin(), table.end());
  }
  const std::uint16_t sign = std::signbit(x) ? 0x8000 : 0;
  const double a = std::fabs(x);
  const double max = table.back().first;
  const double ulp_max = max - table[table.size() - 2].first;
  if (a >= max + ulp_max / 2) return sign | static_cast<std::uint16_t>(((1 << exp_bits) - 1) << mant_bits);
  auto hi = std::lower_bound(table.begin(), table.end(), std::make_pair(a, std::uint16_t{0}));
  if (hi == table.end()) return sign | table.back().second;
  if (hi->first == a || hi == table.begin()) return sign | hi->second;
  auto lo = hi - 1;
  const double dl = a - lo->first;
  const double dh = hi->first - a;
  if (dl < dh) return sign | lo->second;
  if (dh < dl) return sign | hi->second;
  return sign | ((lo->second & 1) == 0 ? lo->second : hi->second);
}

TensorArchive synthetic_archive(unsigned seed, std::size_t count = 120) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  TensorArchive a;
  a.metadata["format"] = "pt";
  const DType dtypes[] = {DType::F32, DType::F16, DType::BF16, DType::F64, DType::I64};
  for (std::size_t i = 0; i < count; ++i) {
    const DType d = dtypes[i % 5];
    std::vector<std::int64_t> shape = {static_cast<std::int64_t>(1 + i % 7), 3};
    std::vector<double> values(static_cast<std::size_t>(shape[0] * shape[1]));
    for (double& v : values) v = normal(rng);
    Tensor t;
    if (d == DType::I64) {
      t = Tensor{d, shape, std::vector<std::uint8_t>(values.size() * 8)};
      for (std::size_t k = 0; k < values.size(); ++k) {
        const std::int64_t v = static_cast<std::int64_t>(k) * 3 - 7;
        std::memcpy(t.data.data() + 8 * k, &v, 8);
      }
    } else {
      t = Tensor::from_doubles(d, shape, values);
    }
    a.tensors.emplace("layer." + std::to_string(i) + ".weight", std::move(t));
  }
  return a;
}

TensorArchive perturb(const TensorArchive& base, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  TensorArchive out = base;
  for (auto& [name, t] : out.tensors) {
    if (!is_float(t.dtype)) continue;
    std::vector<double> v(t.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.get(i) + normal(rng);
    t = Tensor::from_doubles(t.dtype, t.shape, v);
  }
  return out;
}

}  // namespace

TEST_CASE("dtype table") {
  CHECK(dtype_size(DType::BF16) == 2);
  CHECK(dtype_name(DType::Bool) == "BOOL");
  CHECK(parse_dtype("F64") == DType::F64);
  CHECK_THROWS_AS(parse_dtype("F8_E4M3"), DataError);
}

TEST_CASE("half and bfloat16 decode every pattern like the field oracle") {
  for (std::uint32_t b = 0; b < 0x10000; ++b) {
    const auto bits = static_cast<std::uint16_t>(b);
    const double h = decode_small(bits, 5, 10);
    const double f = from_f16_bits(bits);
    if (std::isnan(h)) {
      CHECK(std::isnan(f));
    } else {
      REQUIRE(f == h);
      if (h != 0.0 || !std::signbit(h)) CHECK(to_f16_bits(h) == bits);
    }
    const double bh = decode_small(bits, 8, 7);
    if (!std::isnan(bh)) REQUIRE(from_bf16_bits(bits) == bh);
  }
}

TEST_CASE("rounding to half and bfloat16 matches nearest-even search") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> ex(-30, 18);
  for (int i = 0; i < 200000; ++i) {
    const double x = std::ldexp(mant(rng), ex(rng));
    REQUIRE(to_f16_bits(x) == oracle_round(x, 5, 10));
  }
  std::uniform_int_distribution<int> exb(-140, 130);
  for (int i = 0; i < 200000; ++i) {
    const double x = std::ldexp(mant(rng), exb(rng));
    REQUIRE(to_bf16_bits(x) == oracle_round(x, 8, 7));
  }
  // Exact ties between neighbours.
  CHECK(to_f16_bits(1.0 + std::ldexp(1.0, -11)) == 0x3C00);
  CHECK(to_f16_bits(1.0 + 3 * std::ldexp(1.0, -11)) == 0x3C02);
  CHECK(to_f16_bits(65520.0) == 0x7C00);
  CHECK(to_f16_bits(65519.0) == 0x7BFF);
}

TEST_CASE("archive round trip") {
  const TensorArchive a = synthetic_archive(1, 20);
  const std::vector<std::uint8_t> bytes = serialize_archive(a);
  std::uint64_t n = 0;
  std::memcpy(&n, bytes.data(), 8);
  CHECK(n % 8 == 0);
  CHECK(parse_archive(bytes) == a);

  testing::TempDir dir;
  write_archive(dir.file("a.safetensors"), a);
  CHECK(read_archive(dir.file("a.safetensors")) == a);
  ArchiveReader reader(dir.file("a.safetensors"));
  CHECK(reader.tensors().size() == 20);
  CHECK(reader.metadata().at("format") == "pt");
  CHECK(reader.read("layer.3.weight") == a.tensors.at("layer.3.weight"));
}

TEST_CASE("malformed archives") {
  CHECK_THROWS_AS(parse_archive(std::vector<std::uint8_t>{1, 2, 3}), DataError);
  std::vector<std::uint8_t> bytes = serialize_archive(synthetic_archive(2, 3));
  bytes.pop_back();
  CHECK_THROWS_AS(parse_archive(bytes), DataError);
  std::vector<std::uint8_t> huge(16, 0);
  huge[7] = 0x7F;
  CHECK_THROWS_AS(parse_archive(huge), DataError);
}

TEST_CASE("task arithmetic") {
  const TensorArchive base = synthetic_archive(3);
  const TensorArchive other = perturb(base, 4);
  CHECK(task_arithmetic({&base, &other, 0.0}) == base);
  CHECK(task_arithmetic({&base, &other, 1.0}) == other);

  const TensorArchive half = task_arithmetic({&base, &other, 0.5});
  const Tensor& b = base.tensors.at("layer.0.weight");
  const Tensor& o = other.tensors.at("layer.0.weight");
  const Tensor& h = half.tensors.at("layer.0.weight");
  for (std::size_t i = 0; i < b.numel(); ++i) {
    CHECK(h.get(i) == static_cast<float>(b.get(i) + 0.5 * (o.get(i) - b.get(i))));
  }
  CHECK_THROWS_AS(task_arithmetic({&base, &other, 1.5}), ConfigError);
  CHECK_THROWS_AS(task_arithmetic({&base, &other, NAN}), ConfigError);

  TensorArchive missing = other;
  missing.tensors.erase(missing.tensors.begin());
  CHECK_THROWS_AS(task_arithmetic({&base, &missing, 0.5}), StructuralError);
  TensorArchive reshaped = other;
  reshaped.tensors.begin()->second.shape = {99};
  CHECK_THROWS_AS(task_arithmetic({&base, &reshaped, 0.5}), StructuralError);
}

TEST_CASE("soup") {
  const TensorArchive a = synthetic_archive(5);
  CHECK(soup({a, a, a}) == a);
  const TensorArchive b = perturb(a, 6);
  const TensorArchive c = perturb(a, 7);
  const TensorArchive abc = soup({a, b, c});
  CHECK(soup({c, a, b}) == abc);
  CHECK(soup({b, c, a}) == abc);

  const Tensor& ta = a.tensors.at("layer.3.weight");  // F64
  const Tensor& tb = b.tensors.at("layer.3.weight");
  const TensorArchive ab = soup({a, b});
  const Tensor& mean = ab.tensors.at("layer.3.weight");
  for (std::size_t i = 0; i < ta.numel(); ++i) {
    CHECK(mean.get(i) == doctest::Approx((ta.get(i) + tb.get(i)) / 2).epsilon(1e-15));
  }

  TensorArchive bad = b;
  Tensor& ints = bad.tensors.at("layer.4.weight");
  ints.data[0] ^= 1;
  CHECK_THROWS_AS(soup({a, bad}), StructuralError);
}

TEST_CASE("streaming file operations match in-memory results") {
  testing::TempDir dir;
  const TensorArchive a = synthetic_archive(8);
  const TensorArchive b = perturb(a, 9);
  const TensorArchive c = perturb(a, 10);
  write_archive(dir.file("a"), a);
  write_archive(dir.file("b"), b);
  write_archive(dir.file("c"), c);

  for (unsigned workers : {1u, 4u}) {
    soup_files({dir.file("a"), dir.file("b"), dir.file("c")}, dir.file("soup"), workers);
    CHECK(read_archive(dir.file("soup")) == soup({a, b, c}));
    task_arithmetic_files(dir.file("a"), dir.file("b"), 0.4, dir.file("ta"), workers);
    CHECK(read_archive(dir.file("ta")) == task_arithmetic({&a, &b, 0.4}));
  }
  const auto paths = alpha_sweep_files(dir.file("a"), dir.file("b"), {0.0, 0.1, 1.0},
                                       dir.file("sweep"), 2);
  REQUIRE(paths.size() == 3);
  CHECK(paths[1].find("alpha_0.1.safetensors") != std::string::npos);
  CHECK(read_archive(paths[0]) == a);
  CHECK(read_archive(paths[2]) == b);
  CHECK(alpha_label(0.4) == "alpha_0.4");
}
