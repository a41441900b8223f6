// Shared plumbing: error types, seeded RNG substreams, content hashing,
// little-endian binary IO with byte-offset error reporting.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace arna {

// Parse or serialization failure. Carries the byte offset at which the
// reader/writer gave up so truncated or corrupt files are diagnosable.
class io_error : public std::runtime_error {
public:
    io_error(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Invalid user-supplied configuration (bad grid, missing field, out-of-range
// hyperparameter). The CLI maps this to exit code 2.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// splitmix64 step; used to decorrelate seed/stream pairs before seeding the
// main generator. Never used as the experiment RNG itself.
std::uint64_t splitmix64(std::uint64_t& state);

// Deterministic substream generator: same (seed, stream) always yields the
// same sequence, distinct streams are statistically independent. Every
// per-sample or per-worker RNG in the project is made through this, so
// results do not depend on iteration or thread order.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0);

// FNV-1a 64-bit content hash; report provenance for input artifacts.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

// Runs body(0..count-1), fanning out to hardware threads when more than one
// is available. Each index writes only its own output slot, so the result is
// identical to the sequential order.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

// Little-endian binary writer. x86-64 only; asserted at compile time in the
// implementation so the on-disk format never silently changes byte order.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::filesystem::path& path);

    void bytes(const void* data, std::size_t len);
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i32(std::int32_t v);
    void f64(double v);
    void f64_array(const std::vector<double>& v);
    void str(const std::string& s);  // u32 length + bytes
    std::size_t offset() const noexcept { return offset_; }

private:
    std::ofstream out_;
    std::filesystem::path path_;
    std::size_t offset_ = 0;
};

// Matching reader. Throws io_error naming the current byte offset on any
// short read or value that fails validation at the call site.
class BinaryReader {
public:
    explicit BinaryReader(const std::filesystem::path& path);

    void bytes(void* data, std::size_t len);
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int32_t i32();
    double f64();
    std::vector<double> f64_array(std::size_t count);
    std::string str(std::size_t max_len = 1 << 20);
    std::size_t offset() const noexcept { return offset_; }
    [[noreturn]] void fail(const std::string& what) const { throw io_error(what, offset_); }

private:
    std::ifstream in_;
    std::filesystem::path path_;
    std::size_t offset_ = 0;
};

}  // namespace arna
