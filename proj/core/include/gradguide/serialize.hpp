#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "gradguide/model.hpp"

namespace gradguide {

/// Little-endian binary writer for the on-disk container formats.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path);

    void magic(const char tag[4]);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i32(std::int32_t v);
    void f64(double v);
    void str(const std::string& s);          // u32 length + bytes
    void f64_array(std::span<const double> values);
    void i32_array(std::span<const int> values);

private:
    std::ofstream out_;
    std::string path_;
};

/// Matching reader; any truncation or tag mismatch raises a malformed-file
/// error naming the path.
class BinaryReader {
public:
    explicit BinaryReader(const std::string& path);

    void expect_magic(const char tag[4], const std::string& what);
    std::uint32_t u32();
    std::uint64_t u64();
    std::int32_t i32();
    double f64();
    std::string str(std::size_t max_len = 1 << 20);
    std::vector<double> f64_array(std::size_t count);
    std::vector<int> i32_array(std::size_t count);
    void expect_eof(const std::string& what);

    const std::string& path() const { return path_; }
    [[noreturn]] void fail(const std::string& message) const;

private:
    void read_bytes(void* dst, std::size_t count);

    std::ifstream in_;
    std::string path_;
};

/// Version gate shared by every container format: rejects files written by
/// a newer format, naming both versions.
void check_format_version(const BinaryReader& reader, std::uint32_t found,
                          std::uint32_t supported, const std::string& what);

inline constexpr std::uint32_t kParameterFormatVersion = 1;

/// Flat binary container: name -> shape -> little-endian 64-bit reals,
/// with a format-version header and the trainable flag per entry.
void save_parameters(const ParameterSet& params, const std::string& path);
ParameterSet load_parameters(const std::string& path);

Tensor read_tensor(BinaryReader& reader);
void write_tensor(BinaryWriter& writer, const Tensor& t);

}  // namespace gradguide
