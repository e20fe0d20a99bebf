#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sparse_sr/dictionary.hpp"
#include "sparse_sr/errors.hpp"

namespace sparse_sr {

namespace {

constexpr char kMagic[4] = {'C', 'D', 'L', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr double kNormTolerance = 1e-6;

class Writer {
public:
    void bytes(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }

    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

    void need(std::size_t n) const
    {
        if (in_.size() - pos_ < n) {
            throw FormatError("CDL1: truncated file (need " + std::to_string(n) + " bytes at offset " +
                              std::to_string(pos_) + ", have " + std::to_string(in_.size() - pos_) + ")");
        }
    }

    void bytes(void* dst, std::size_t n)
    {
        need(n);
        std::memcpy(dst, in_.data() + pos_, n);
        pos_ += n;
    }

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::size_t remaining() const { return in_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

std::uint32_t checked_u32(Index v, const char* what)
{
    if (v < 0 || v > static_cast<Index>(UINT32_MAX)) {
        throw InvalidArgument(std::string("CDL1: ") + what + " does not fit in u32");
    }
    return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_dictionary(const CoupledDictionary& cd)
{
    if (cd.d_hr.cols() != cd.d_lr.cols()) {
        throw DimensionError("CDL1: d_hr and d_lr have different atom counts");
    }
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(checked_u32(cd.d_hr.cols(), "atom count"));
    w.u32(checked_u32(cd.d_hr.rows(), "hr_rows"));
    w.u32(checked_u32(cd.d_lr.rows(), "lr_rows"));
    w.u32(cd.scale);
    w.u32(cd.patch_size_hr);
    w.u32(cd.overlap_hr);
    w.u32(cd.sparsity_k);
    w.u64(cd.seed);
    w.u32(checked_u32(static_cast<Index>(cd.feature_spec_id.size()), "feature_spec_id length"));
    w.bytes(cd.feature_spec_id.data(), cd.feature_spec_id.size());
    for (Index i = 0; i < cd.d_hr.size(); ++i) w.f64(cd.d_hr.data()[i]);
    for (Index i = 0; i < cd.d_lr.size(); ++i) w.f64(cd.d_lr.data()[i]);
    return w.take();
}

void save_dictionary(const CoupledDictionary& cd, const std::filesystem::path& path)
{
    const auto bytes = encode_dictionary(cd);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

CoupledDictionary decode_dictionary(const std::vector<std::uint8_t>& bytes)
{
    Reader r(bytes);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("CDL1: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kVersion) throw FormatError("CDL1: unsupported version " + std::to_string(version));

    const std::uint32_t m = r.u32();
    const std::uint32_t hr_rows = r.u32();
    const std::uint32_t lr_rows = r.u32();
    CoupledDictionary cd;
    cd.scale = r.u32();
    cd.patch_size_hr = r.u32();
    cd.overlap_hr = r.u32();
    cd.sparsity_k = r.u32();
    cd.seed = r.u64();
    const std::uint32_t id_len = r.u32();
    cd.feature_spec_id.resize(id_len);
    r.bytes(cd.feature_spec_id.data(), id_len);

    if (m == 0 || hr_rows == 0 || lr_rows == 0) throw FormatError("CDL1: zero dimension");
    if (static_cast<std::uint64_t>(cd.patch_size_hr) * cd.patch_size_hr != hr_rows) {
        throw FormatError("CDL1: hr_rows " + std::to_string(hr_rows) + " != patch_size_hr² (patch_size_hr " +
                          std::to_string(cd.patch_size_hr) + ")");
    }
    if (lr_rows % 4 != 0) throw FormatError("CDL1: lr_rows is not 4q²");
    if (cd.overlap_hr >= cd.patch_size_hr) throw FormatError("CDL1: overlap_hr must be smaller than patch_size_hr");
    if (cd.scale < 2) throw FormatError("CDL1: scale must be >= 2");

    const std::uint64_t doubles = static_cast<std::uint64_t>(m) * (static_cast<std::uint64_t>(hr_rows) + lr_rows);
    if (r.remaining() != doubles * 8) {
        if (r.remaining() < doubles * 8) throw FormatError("CDL1: truncated atom data");
        throw FormatError("CDL1: trailing bytes after atom data");
    }
    cd.d_hr.resize(hr_rows, m);
    cd.d_lr.resize(lr_rows, m);
    for (Index i = 0; i < cd.d_hr.size(); ++i) cd.d_hr.data()[i] = r.f64();
    for (Index i = 0; i < cd.d_lr.size(); ++i) cd.d_lr.data()[i] = r.f64();

    double defect = 0.0;
    try {
        defect = cd.stacked_norm_defect();
    } catch (const DimensionError& e) {
        throw FormatError(std::string("CDL1: ") + e.what());
    }
    if (!(defect <= kNormTolerance)) {
        throw CorruptionError("CDL1: stacked atom norm off by " + std::to_string(defect));
    }
    return cd;
}

CoupledDictionary load_dictionary(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_dictionary(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const CorruptionError& e) {
        throw CorruptionError(path.string() + ": " + e.what());
    }
}

}  // namespace sparse_sr
