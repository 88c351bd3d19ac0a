#include "dgp/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "dgp/error.hpp"

namespace dgp {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'D', 'G', 'P', 'T'};

template <typename UInt>
void put_le(std::vector<std::uint8_t>& out, UInt v) {
  for (std::size_t b = 0; b < sizeof(UInt); ++b) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
}

template <typename UInt>
UInt get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  UInt v = 0;
  for (std::size_t b = 0; b < sizeof(UInt); ++b) {
    v |= static_cast<UInt>(in[offset + b]) << (8 * b);
  }
  return v;
}

std::uint64_t element_count(std::span<const std::uint64_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1},
                         [](std::uint64_t a, std::uint64_t b) { return a * b; });
}

std::string shape_string(std::span<const std::uint64_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

void validate_shape(std::span<const std::uint64_t> shape) {
  if (shape.empty() || shape.size() > kMaxTensorRank) {
    throw Error(ErrorKind::InvalidShape,
                "rank must be 1.." + std::to_string(kMaxTensorRank) + ", got " +
                    std::to_string(shape.size()));
  }
  for (auto extent : shape) {
    if (extent == 0) throw Error(ErrorKind::InvalidShape, "zero extent in " + shape_string(shape));
  }
}

DenseTensor::DenseTensor(std::vector<std::uint64_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (element_count(shape_) != size()) {
    throw Error(ErrorKind::InvalidShape, "shape " + shape_string(shape_) + " does not match " +
                                             std::to_string(size()) + " elements");
  }
}

DenseTensor::DenseTensor(std::vector<std::uint64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (element_count(shape_) != size()) {
    throw Error(ErrorKind::InvalidShape, "shape " + shape_string(shape_) + " does not match " +
                                             std::to_string(size()) + " elements");
  }
}

DType DenseTensor::dtype() const noexcept {
  return std::holds_alternative<std::vector<float>>(data_) ? DType::F32 : DType::F64;
}

std::size_t DenseTensor::size() const noexcept {
  return std::visit([](const auto& v) { return v.size(); }, data_);
}

double DenseTensor::at(std::size_t i) const {
  return std::visit([i](const auto& v) { return static_cast<double>(v.at(i)); }, data_);
}

std::vector<double> DenseTensor::to_doubles() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, data_);
}

std::vector<std::uint8_t> encode_tensor(const DenseTensor& tensor) {
  validate_shape(tensor.shape());
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(out, kTensorFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dtype()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
  for (auto extent : tensor.shape()) put_le<std::uint64_t>(out, extent);

  std::visit(
      [&out](const auto& values) {
        using T = typename std::decay_t<decltype(values)>::value_type;
        using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
        out.reserve(out.size() + values.size() * sizeof(T));
        for (T v : values) put_le<Bits>(out, std::bit_cast<Bits>(v));
      },
      tensor.storage());
  return out;
}

DenseTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kFixedHeader = 16;
  if (bytes.size() < kMagic.size() ||
      !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorKind::BadMagic, "missing DGPT magic");
  }
  if (bytes.size() < kFixedHeader) throw Error(ErrorKind::TruncatedPayload, "header truncated");

  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kTensorFormatVersion) {
    throw Error(ErrorKind::UnsupportedVersion, "version " + std::to_string(version));
  }
  const auto dtype = get_le<std::uint32_t>(bytes, 8);
  if (dtype > static_cast<std::uint32_t>(DType::F64)) {
    throw Error(ErrorKind::UnsupportedDtype, "dtype code " + std::to_string(dtype));
  }
  const auto ndim = get_le<std::uint32_t>(bytes, 12);
  if (ndim == 0 || ndim > kMaxTensorRank) {
    throw Error(ErrorKind::InvalidShape, "rank " + std::to_string(ndim));
  }
  if (bytes.size() < kFixedHeader + 8 * ndim) {
    throw Error(ErrorKind::TruncatedPayload, "extents truncated");
  }
  std::vector<std::uint64_t> shape(ndim);
  for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = get_le<std::uint64_t>(bytes, kFixedHeader + 8 * d);
  validate_shape(shape);

  const std::size_t offset = kFixedHeader + 8 * ndim;
  const std::size_t elem = dtype == 0 ? 4 : 8;
  const std::size_t available = bytes.size() - offset;
  std::uint64_t count = 1;
  bool overflow = false;
  for (auto extent : shape) overflow |= __builtin_mul_overflow(count, extent, &count);
  if (overflow || count > available / elem || available != count * elem) {
    throw Error(ErrorKind::TruncatedPayload,
                "shape " + shape_string(shape) + " declares " + std::to_string(count) +
                    " elements, payload holds " + std::to_string(available) + " bytes");
  }

  if (dtype == 0) {
    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) {
      data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset + 4 * i));
    }
    return DenseTensor(std::move(shape), std::move(data));
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset + 8 * i));
  }
  return DenseTensor(std::move(shape), std::move(data));
}

DenseTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const Error& e) {
    throw e.with_context(path.string());
  }
}

void save_tensor(const DenseTensor& tensor, const std::filesystem::path& path) {
  const auto bytes = encode_tensor(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

DenseTensor to_tensor(const Eigen::Ref<const Eigen::MatrixXd>& m, DType dtype) {
  std::vector<std::uint64_t> shape{static_cast<std::uint64_t>(m.rows()),
                                   static_cast<std::uint64_t>(m.cols())};
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  if (dtype == DType::F32) {
    std::vector<float> data(rm.size());
    for (Eigen::Index i = 0; i < rm.size(); ++i) data[i] = static_cast<float>(rm.data()[i]);
    return DenseTensor(std::move(shape), std::move(data));
  }
  return DenseTensor(std::move(shape), std::vector<double>(rm.data(), rm.data() + rm.size()));
}

Eigen::MatrixXd to_matrix(const DenseTensor& t) {
  if (t.rank() != 2) {
    throw Error(ErrorKind::ShapeMismatch, "expected a 2-D tensor, got rank " + std::to_string(t.rank()));
  }
  const auto rows = static_cast<Eigen::Index>(t.shape()[0]);
  const auto cols = static_cast<Eigen::Index>(t.shape()[1]);
  const auto values = t.to_doubles();
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> to_mask(const DenseTensor& t) {
  if (t.rank() != 2) {
    throw Error(ErrorKind::InvalidMask, "mask must be 2-D, got rank " + std::to_string(t.rank()));
  }
  const auto rows = static_cast<Eigen::Index>(t.shape()[0]);
  const auto cols = static_cast<Eigen::Index>(t.shape()[1]);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double v = t.at(static_cast<std::size_t>(r * cols + c));
      if (v != 0.0 && v != 1.0) {
        throw Error(ErrorKind::InvalidMask, "value " + std::to_string(v) + " at (" +
                                                std::to_string(r) + "," + std::to_string(c) + ")");
      }
      mask(r, c) = v == 1.0;
    }
  }
  return mask;
}

DenseTensor from_mask(const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask) {
  std::vector<float> data(static_cast<std::size_t>(mask.size()));
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      data[static_cast<std::size_t>(r * mask.cols() + c)] = mask(r, c) ? 1.0f : 0.0f;
    }
  }
  return DenseTensor({static_cast<std::uint64_t>(mask.rows()), static_cast<std::uint64_t>(mask.cols())},
                     std::move(data));
}

}  // namespace dgp
