#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "sparse_sr/dictionary.hpp"
#include "sparse_sr/errors.hpp"

using namespace sparse_sr;
namespace fs = std::filesystem;

namespace {

CoupledDictionary sample_dictionary(std::uint64_t seed)
{
    Rng rng(seed);
    const MatD stacked = oracle::gaussian_unit_columns(9 + 36, 12, rng);
    CoupledDictionary cd;
    cd.d_hr = stacked.topRows(9) * 3.0;
    cd.d_lr = stacked.bottomRows(36) * 6.0;
    cd.scale = 3;
    cd.patch_size_hr = 3;
    cd.overlap_hr = 1;
    cd.sparsity_k = 2;
    cd.seed = 0x0123456789ABCDEFULL;
    return cd;
}

fs::path temp_path(const std::string& name)
{
    return fs::temp_directory_path() / ("sparse_sr_io_" + name);
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t off)
{
    return std::uint32_t(b[off]) | std::uint32_t(b[off + 1]) << 8 | std::uint32_t(b[off + 2]) << 16 |
           std::uint32_t(b[off + 3]) << 24;
}

}  // namespace

TEST_CASE("save/load round trip is bit-exact")
{
    const CoupledDictionary cd = sample_dictionary(1);
    const fs::path path = temp_path("roundtrip.cdl");
    save_dictionary(cd, path);
    const CoupledDictionary back = load_dictionary(path);
    CHECK(back.scale == cd.scale);
    CHECK(back.patch_size_hr == cd.patch_size_hr);
    CHECK(back.overlap_hr == cd.overlap_hr);
    CHECK(back.sparsity_k == cd.sparsity_k);
    CHECK(back.seed == cd.seed);
    CHECK(back.feature_spec_id == cd.feature_spec_id);
    REQUIRE(back.d_hr.rows() == cd.d_hr.rows());
    REQUIRE(back.d_lr.cols() == cd.d_lr.cols());
    CHECK(std::memcmp(back.d_hr.data(), cd.d_hr.data(), sizeof(double) * cd.d_hr.size()) == 0);
    CHECK(std::memcmp(back.d_lr.data(), cd.d_lr.data(), sizeof(double) * cd.d_lr.size()) == 0);
    CHECK(encode_dictionary(back) == encode_dictionary(cd));
    fs::remove(path);
}

TEST_CASE("header layout")
{
    const CoupledDictionary cd = sample_dictionary(2);
    const auto bytes = encode_dictionary(cd);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CDL1");
    CHECK(read_u32(bytes, 4) == 1);    // version
    CHECK(read_u32(bytes, 8) == 12);   // m
    CHECK(read_u32(bytes, 12) == 9);   // hr_rows
    CHECK(read_u32(bytes, 16) == 36);  // lr_rows
    CHECK(read_u32(bytes, 20) == 3);   // scale
    CHECK(read_u32(bytes, 24) == 3);   // patch_size_hr
    CHECK(read_u32(bytes, 28) == 1);   // overlap_hr
    CHECK(read_u32(bytes, 32) == 2);   // sparsity_k
    CHECK(bytes[36] == 0xEF);          // seed, little-endian
    CHECK(bytes[43] == 0x01);
    CHECK(read_u32(bytes, 44) == 8);   // "grad4-v1"
    CHECK(std::string(bytes.begin() + 48, bytes.begin() + 56) == "grad4-v1");
    CHECK(bytes.size() == 56 + 8 * 12 * (9 + 36));
    double first = 0;
    std::memcpy(&first, bytes.data() + 56, 8);
    CHECK(first == cd.d_hr(0, 0));
}

TEST_CASE("malformed files are rejected")
{
    const auto good = encode_dictionary(sample_dictionary(3));

    auto bad_magic = good;
    std::memcpy(bad_magic.data(), "XXXX", 4);
    CHECK_THROWS_AS(decode_dictionary(bad_magic), FormatError);

    auto bad_version = good;
    bad_version[4] = 2;
    CHECK_THROWS_AS(decode_dictionary(bad_version), FormatError);

    for (std::size_t cut : {std::size_t{2}, std::size_t{30}, std::size_t{50}, good.size() - 1}) {
        const std::vector<std::uint8_t> truncated(good.begin(), good.begin() + static_cast<long>(cut));
        CHECK_THROWS_AS(decode_dictionary(truncated), FormatError);
    }

    auto trailing = good;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_dictionary(trailing), FormatError);

    auto bad_dims = good;
    bad_dims[12] = 10;  // hr_rows no longer patch_size_hr²
    CHECK_THROWS_AS(decode_dictionary(bad_dims), FormatError);
}

TEST_CASE("non-normalized stacked atoms are reported as corruption")
{
    CoupledDictionary cd = sample_dictionary(4);
    cd.d_hr.col(5) *= 1.01;
    const fs::path path = temp_path("corrupt.cdl");
    save_dictionary(cd, path);
    CHECK_THROWS_AS(load_dictionary(path), CorruptionError);
    fs::remove(path);
}

TEST_CASE("I/O failures name the path")
{
    const fs::path missing = temp_path("does/not/exist.cdl");
    try {
        save_dictionary(sample_dictionary(5), missing);
        FAIL("expected an I/O error");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find(missing.string()) != std::string::npos);
    }
    CHECK_THROWS_AS(load_dictionary(missing), IoError);
}
