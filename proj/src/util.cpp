#include "arna/util.hpp"

#include <bit>
#include <cstring>
#include <thread>

static_assert(std::endian::native == std::endian::little,
              "binary artifact format is defined little-endian");
static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559,
              "binary artifact format stores IEEE-754 binary64");

namespace arna {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    // Mix seed and stream through splitmix64 so neighbouring streams do not
    // produce correlated mt19937 states.
    std::uint64_t s = seed ^ 0x2545f4914f6cdd1dull;
    std::uint64_t a = splitmix64(s);
    s ^= stream * 0x9e3779b97f4a7c15ull + 0x632be59bd9b4e019ull;
    std::uint64_t b = splitmix64(s);
    std::uint64_t c = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    return std::mt19937_64(seq);
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string(), 0);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (!in) break;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return s;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers =
        std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw io_error("cannot open " + path.string() + " for writing", 0);
}

void BinaryWriter::bytes(const void* data, std::size_t len) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!out_) throw io_error("write failed on " + path_.string(), offset_);
    offset_ += len;
}

void BinaryWriter::u8(std::uint8_t v) { bytes(&v, 1); }
void BinaryWriter::u32(std::uint32_t v) { bytes(&v, 4); }
void BinaryWriter::u64(std::uint64_t v) { bytes(&v, 8); }
void BinaryWriter::i32(std::int32_t v) { bytes(&v, 4); }
void BinaryWriter::f64(double v) { bytes(&v, 8); }

void BinaryWriter::f64_array(const std::vector<double>& v) {
    if (!v.empty()) bytes(v.data(), v.size() * sizeof(double));
}

void BinaryWriter::str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    if (!s.empty()) bytes(s.data(), s.size());
}

BinaryReader::BinaryReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw io_error("cannot open " + path.string(), 0);
}

void BinaryReader::bytes(void* data, std::size_t len) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
    if (in_.gcount() != static_cast<std::streamsize>(len))
        throw io_error("unexpected end of file in " + path_.string(),
                       offset_ + static_cast<std::size_t>(in_.gcount()));
    offset_ += len;
}

std::uint8_t BinaryReader::u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
}

std::uint32_t BinaryReader::u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
}

std::uint64_t BinaryReader::u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
}

std::int32_t BinaryReader::i32() {
    std::int32_t v;
    bytes(&v, 4);
    return v;
}

double BinaryReader::f64() {
    double v;
    bytes(&v, 8);
    return v;
}

std::vector<double> BinaryReader::f64_array(std::size_t count) {
    std::vector<double> v(count);
    if (count) bytes(v.data(), count * sizeof(double));
    return v;
}

std::string BinaryReader::str(std::size_t max_len) {
    std::uint32_t len = u32();
    if (len > max_len) fail("string length " + std::to_string(len) + " exceeds limit");
    std::string s(len, '\0');
    if (len) bytes(s.data(), len);
    return s;
}

}  // namespace arna
