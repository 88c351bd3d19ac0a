#pragma once

// Minimal binary tensor container (.dgpt).
//
// Layout, all integers little-endian:
//   magic    4 bytes  "DGPT"
//   version  u32      1
//   dtype    u32      0 = f32, 1 = f64
//   ndim     u32      1..4
//   extents  ndim x u64
//   payload  row-major elements, little-endian IEEE-754

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace dgp {

enum class DType : std::uint32_t { F32 = 0, F64 = 1 };

inline constexpr std::uint32_t kTensorFormatVersion = 1;
inline constexpr std::size_t kMaxTensorRank = 4;

class DenseTensor {
 public:
  using Storage = std::variant<std::vector<float>, std::vector<double>>;

  DenseTensor() = default;

  /// Throws invalid-shape when the shape is empty, has more than four
  /// extents, contains a zero extent, or disagrees with the element count.
  DenseTensor(std::vector<std::uint64_t> shape, std::vector<float> data);
  DenseTensor(std::vector<std::uint64_t> shape, std::vector<double> data);

  DType dtype() const noexcept;
  const std::vector<std::uint64_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept;
  const Storage& storage() const noexcept { return data_; }

  /// Element `i` of the row-major buffer, promoted to double.
  double at(std::size_t i) const;

  /// All elements promoted to double.
  std::vector<double> to_doubles() const;

  bool operator==(const DenseTensor& other) const = default;

 private:
  std::vector<std::uint64_t> shape_;
  Storage data_;
};

/// Throws invalid-shape if `shape` violates the rank/extent rules.
void validate_shape(std::span<const std::uint64_t> shape);

DenseTensor load_tensor(const std::filesystem::path& path);
void save_tensor(const DenseTensor& tensor, const std::filesystem::path& path);

/// Serialized bytes exactly as `save_tensor` writes them.
std::vector<std::uint8_t> encode_tensor(const DenseTensor& tensor);
DenseTensor decode_tensor(std::span<const std::uint8_t> bytes);

// Matrix bridges. A 2-D tensor maps to a row-major matrix of the same shape.

DenseTensor to_tensor(const Eigen::Ref<const Eigen::MatrixXd>& m, DType dtype = DType::F64);
Eigen::MatrixXd to_matrix(const DenseTensor& t);

/// Binary mask tensor [H, W] (f32, values in {0, 1}) to a boolean array.
/// Throws invalid-mask on any other value.
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> to_mask(const DenseTensor& t);
DenseTensor from_mask(const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask);

}  // namespace dgp
