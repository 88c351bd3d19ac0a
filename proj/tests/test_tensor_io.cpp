#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "dgp/error.hpp"
#include "dgp/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace dgp;

namespace {

class TensorIoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dgp_tensor_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::vector<std::uint8_t> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }

  ErrorKind load_error(const fs::path& p) {
    try {
      load_tensor(p);
    } catch (const Error& e) {
      return e.kind();
    }
    ADD_FAILURE() << "load_tensor did not throw";
    return ErrorKind::Io;
  }

  fs::path dir_;
};

TEST_F(TensorIoTest, LoadsF32Matrix) {
  const DenseTensor t({2, 2}, std::vector<float>{1, 2, 3, 4});
  save_tensor(t, dir_ / "a.dgpt");
  const DenseTensor back = load_tensor(dir_ / "a.dgpt");
  EXPECT_EQ(back.dtype(), DType::F32);
  EXPECT_EQ(back.shape(), (std::vector<std::uint64_t>{2, 2}));
  EXPECT_EQ(std::get<std::vector<float>>(back.storage()), (std::vector<float>{1, 2, 3, 4}));
}

TEST_F(TensorIoTest, HeaderLayoutIsLittleEndian) {
  const DenseTensor t({1}, std::vector<double>{0.0});
  const auto bytes = encode_tensor(t);
  const std::vector<std::uint8_t> header{'D', 'G', 'P', 'T', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0,
                                         1, 0, 0, 0, 0, 0, 0, 0};
  ASSERT_EQ(bytes.size(), header.size() + 8);
  EXPECT_TRUE(std::equal(header.begin(), header.end(), bytes.begin()));
  EXPECT_TRUE(std::all_of(bytes.begin() + 24, bytes.end(), [](auto b) { return b == 0; }));

  // 1.0f is 0x3F800000, stored low byte first.
  const auto f = encode_tensor(DenseTensor({1}, std::vector<float>{1.0f}));
  EXPECT_EQ(std::vector<std::uint8_t>(f.end() - 4, f.end()), (std::vector<std::uint8_t>{0, 0, 0x80, 0x3F}));
}

TEST_F(TensorIoTest, RandomRoundTripIsIdentity) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::uint64_t> extent(1, 6);
  std::uniform_int_distribution<std::size_t> rank(1, 4);
  std::normal_distribution<double> value(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint64_t> shape(rank(rng));
    std::size_t n = 1;
    for (auto& e : shape) n *= (e = extent(rng));
    DenseTensor t;
    if (trial % 2) {
      std::vector<float> d(n);
      for (auto& v : d) v = static_cast<float>(value(rng));
      t = DenseTensor(shape, d);
    } else {
      std::vector<double> d(n);
      for (auto& v : d) v = value(rng);
      t = DenseTensor(shape, d);
    }
    const fs::path p = dir_ / "r.dgpt";
    save_tensor(t, p);
    const auto first = read_bytes(p);
    EXPECT_EQ(load_tensor(p), t);
    save_tensor(load_tensor(p), p);
    EXPECT_EQ(read_bytes(p), first) << "re-save not byte identical";
  }
}

TEST_F(TensorIoTest, F64RoundTrip357) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> d(3 * 5 * 7);
  for (auto& v : d) v = u(rng);
  const DenseTensor t({3, 5, 7}, d);
  save_tensor(t, dir_ / "t.dgpt");
  EXPECT_EQ(load_tensor(dir_ / "t.dgpt"), t);
}

TEST_F(TensorIoTest, SavesAreDeterministic) {
  const DenseTensor t({2, 3}, std::vector<double>{1, -2, 3.5, 4, 5, 6e-300});
  save_tensor(t, dir_ / "a.dgpt");
  save_tensor(t, dir_ / "b.dgpt");
  EXPECT_EQ(read_bytes(dir_ / "a.dgpt"), read_bytes(dir_ / "b.dgpt"));
}

TEST_F(TensorIoTest, TruncatedPayload) {
  auto bytes = encode_tensor(DenseTensor({8}, std::vector<float>(8, 1.0f)));
  bytes.resize(bytes.size() - 4);  // 7 elements stored
  write_bytes(dir_ / "t.dgpt", bytes);
  EXPECT_EQ(load_error(dir_ / "t.dgpt"), ErrorKind::TruncatedPayload);

  bytes.resize(20);  // inside the extents
  write_bytes(dir_ / "t.dgpt", bytes);
  EXPECT_EQ(load_error(dir_ / "t.dgpt"), ErrorKind::TruncatedPayload);
}

TEST_F(TensorIoTest, TrailingBytesRejected) {
  auto bytes = encode_tensor(DenseTensor({2}, std::vector<float>{1, 2}));
  bytes.push_back(0);
  write_bytes(dir_ / "t.dgpt", bytes);
  EXPECT_EQ(load_error(dir_ / "t.dgpt"), ErrorKind::TruncatedPayload);
}

TEST_F(TensorIoTest, HeaderErrors) {
  const auto good = encode_tensor(DenseTensor({2}, std::vector<float>{1, 2}));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  write_bytes(dir_ / "m.dgpt", bad_magic);
  EXPECT_EQ(load_error(dir_ / "m.dgpt"), ErrorKind::BadMagic);

  auto bad_version = good;
  bad_version[4] = 2;
  write_bytes(dir_ / "v.dgpt", bad_version);
  EXPECT_EQ(load_error(dir_ / "v.dgpt"), ErrorKind::UnsupportedVersion);

  auto bad_dtype = good;
  bad_dtype[8] = 7;
  write_bytes(dir_ / "d.dgpt", bad_dtype);
  EXPECT_EQ(load_error(dir_ / "d.dgpt"), ErrorKind::UnsupportedDtype);

  write_bytes(dir_ / "e.dgpt", {});
  EXPECT_EQ(load_error(dir_ / "e.dgpt"), ErrorKind::BadMagic);

  EXPECT_EQ(load_error(dir_ / "missing.dgpt"), ErrorKind::Io);
}

TEST_F(TensorIoTest, ShapeInvariants) {
  try {
    DenseTensor({1, 1, 1, 1, 1}, std::vector<float>{0});
    FAIL() << "rank 5 accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidShape);
  }
  EXPECT_THROW(DenseTensor({}, std::vector<float>{}), Error);
  EXPECT_THROW(DenseTensor({2, 0}, std::vector<float>{}), Error);
  EXPECT_THROW(DenseTensor({2, 2}, std::vector<float>{1, 2, 3}), Error);
  EXPECT_FALSE(fs::exists(dir_ / "never.dgpt"));
}

TEST_F(TensorIoTest, MaskValidation) {
  const DenseTensor ok({2, 2}, std::vector<float>{0, 1, 1, 0});
  const auto m = to_mask(ok);
  EXPECT_TRUE(m(0, 1));
  EXPECT_FALSE(m(1, 1));
  EXPECT_TRUE(from_mask(m) == ok);

  const DenseTensor bad({2, 2}, std::vector<float>{0, 0.5f, 1, 0});
  try {
    to_mask(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidMask);
  }
}

TEST_F(TensorIoTest, MatrixBridge) {
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const DenseTensor t = to_tensor(m);
  EXPECT_EQ(t.at(1), 2.0);
  EXPECT_EQ(t.at(3), 4.0);
  EXPECT_EQ(to_matrix(t), m);
}

}  // namespace
