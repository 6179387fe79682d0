#include "gradguide/serialize.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace gradguide {

namespace {

constexpr char kParameterMagic[4] = {'G', 'G', 'P', 'M'};

}  // namespace

BinaryWriter::BinaryWriter(const std::string& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
}

void BinaryWriter::magic(const char tag[4]) { out_.write(tag, 4); }

void BinaryWriter::u32(std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) {
        bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    }
    out_.write(bytes, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) {
        bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    }
    out_.write(bytes, 8);
}

void BinaryWriter::i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::f64_array(std::span<const double> values) {
    for (double v : values) {
        f64(v);
    }
    if (!out_) {
        throw std::runtime_error("write failure on '" + path_ + "'");
    }
}

void BinaryWriter::i32_array(std::span<const int> values) {
    for (int v : values) {
        i32(v);
    }
}

BinaryReader::BinaryReader(const std::string& path)
    : in_(path, std::ios::binary), path_(path) {
    if (!in_) {
        throw std::runtime_error("cannot open '" + path + "' for reading");
    }
}

void BinaryReader::fail(const std::string& message) const {
    throw std::runtime_error("malformed file '" + path_ + "': " + message);
}

void BinaryReader::read_bytes(void* dst, std::size_t count) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in_.gcount()) != count) {
        fail("unexpected end of file");
    }
}

void BinaryReader::expect_magic(const char tag[4], const std::string& what) {
    char found[4];
    read_bytes(found, 4);
    if (std::memcmp(found, tag, 4) != 0) {
        fail("not a " + what + " file (bad magic)");
    }
}

std::uint32_t BinaryReader::u32() {
    unsigned char bytes[4];
    read_bytes(bytes, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    }
    return v;
}

std::uint64_t BinaryReader::u64() {
    unsigned char bytes[8];
    read_bytes(bytes, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    }
    return v;
}

std::int32_t BinaryReader::i32() { return static_cast<std::int32_t>(u32()); }

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str(std::size_t max_len) {
    const std::uint32_t len = u32();
    if (len > max_len) {
        fail("string length " + std::to_string(len) + " exceeds limit");
    }
    std::string s(len, '\0');
    if (len > 0) {
        read_bytes(s.data(), len);
    }
    return s;
}

std::vector<double> BinaryReader::f64_array(std::size_t count) {
    std::vector<double> out(count);
    for (double& v : out) {
        v = f64();
    }
    return out;
}

std::vector<int> BinaryReader::i32_array(std::size_t count) {
    std::vector<int> out(count);
    for (int& v : out) {
        v = i32();
    }
    return out;
}

void BinaryReader::expect_eof(const std::string& what) {
    char extra;
    in_.read(&extra, 1);
    if (!in_.eof()) {
        fail("trailing bytes after " + what + " payload");
    }
}

void check_format_version(const BinaryReader& reader, std::uint32_t found,
                          std::uint32_t supported, const std::string& what) {
    if (found != supported) {
        throw std::runtime_error("unsupported " + what + " format version " +
                                 std::to_string(found) + " in '" + reader.path() +
                                 "' (this build reads version " + std::to_string(supported) +
                                 ")");
    }
}

void write_tensor(BinaryWriter& writer, const Tensor& t) {
    writer.u32(static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) {
        writer.u32(static_cast<std::uint32_t>(d));
    }
    writer.f64_array(t.data());
}

Tensor read_tensor(BinaryReader& reader) {
    const std::uint32_t rank = reader.u32();
    if (rank > 8) {
        reader.fail("tensor rank " + std::to_string(rank) + " exceeds limit");
    }
    std::vector<int> shape(rank);
    std::int64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t d = reader.u32();
        if (d == 0 || d > (1u << 24)) {
            reader.fail("invalid tensor dimension " + std::to_string(d));
        }
        shape[i] = static_cast<int>(d);
        count *= d;
    }
    return Tensor(std::move(shape), reader.f64_array(static_cast<std::size_t>(count)));
}

void save_parameters(const ParameterSet& params, const std::string& path) {
    BinaryWriter writer(path);
    writer.magic(kParameterMagic);
    writer.u32(kParameterFormatVersion);
    writer.u32(static_cast<std::uint32_t>(params.count()));
    for (const auto& [name, value] : params.entries()) {
        writer.str(name);
        writer.u32(params.is_trainable(name) ? 1 : 0);
        write_tensor(writer, value);
    }
}

ParameterSet load_parameters(const std::string& path) {
    BinaryReader reader(path);
    reader.expect_magic(kParameterMagic, "parameter");
    check_format_version(reader, reader.u32(), kParameterFormatVersion, "parameter");
    const std::uint32_t count = reader.u32();
    ParameterSet params;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = reader.str();
        const bool trainable = reader.u32() != 0;
        params.insert(name, read_tensor(reader), trainable);
    }
    reader.expect_eof("parameter");
    return params;
}

}  // namespace gradguide
