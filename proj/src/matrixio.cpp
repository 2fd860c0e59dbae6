#include "selm/matrixio.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace selm {

namespace {

constexpr std::uint64_t kMaxElements = 1ULL << 33; // refuse absurd headers

void put_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    put_bytes(os, b, 8);
}

void put_f32(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(os, u);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    put_u64(os, u);
}

bool get_bytes(std::istream& is, void* p, size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    return static_cast<size_t>(is.gcount()) == n;
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!get_bytes(is, b, 4)) throw std::runtime_error(path + ": truncated payload");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!get_bytes(is, b, 8)) throw std::runtime_error(path + ": truncated payload");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

float get_f32(std::istream& is, const std::string& path) {
    std::uint32_t u = get_u32(is, path);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

double get_f64(std::istream& is, const std::string& path) {
    std::uint64_t u = get_u64(is, path);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

} // namespace

void write_matrix(const std::string& path, std::uint64_t rows, std::uint64_t cols,
                  const float* values) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot open for writing");
    os.write("SELM", 4);
    put_u32(os, 1);
    put_u64(os, rows);
    put_u64(os, cols);
    for (std::uint64_t i = 0; i < rows * cols; ++i) put_f32(os, values[i]);
    if (!os) throw std::runtime_error(path + ": write failed");
}

void write_matrix(const std::string& path, const Tensor& t) {
    const std::uint64_t rows = t.ndim() >= 1 ? static_cast<std::uint64_t>(t.extent(0)) : 1;
    const std::uint64_t cols = rows ? static_cast<std::uint64_t>(t.numel()) / rows : 0;
    std::vector<float> vals(t.data.begin(), t.data.end());
    write_matrix(path, rows, cols, vals.data());
}

MatrixFile read_matrix(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    char magic[4];
    if (!get_bytes(is, magic, 4) || std::memcmp(magic, "SELM", 4) != 0)
        throw std::runtime_error(path + ": bad magic, not a SELM matrix file");
    const std::uint32_t version = get_u32(is, path);
    if (version != 1)
        throw std::runtime_error(path + ": unsupported matrix version " + std::to_string(version));
    MatrixFile mf;
    mf.rows = get_u64(is, path);
    mf.cols = get_u64(is, path);
    if (mf.rows * mf.cols > kMaxElements || (mf.cols != 0 && mf.rows > kMaxElements / mf.cols))
        throw std::runtime_error(path + ": dimension overflow in header");
    mf.values.resize(static_cast<size_t>(mf.rows * mf.cols));
    for (auto& v : mf.values) v = get_f32(is, path);
    return mf;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot open for writing");
    os.write("SELC", 4);
    put_u32(os, 1);
    put_u64(os, ckpt.seed);
    put_u64(os, ckpt.config_text.size());
    put_bytes(os, ckpt.config_text.data(), ckpt.config_text.size());
    put_u32(os, static_cast<std::uint32_t>(ckpt.entries.size()));
    for (const auto& e : ckpt.entries) {
        put_u32(os, static_cast<std::uint32_t>(e.name.size()));
        put_bytes(os, e.name.data(), e.name.size());
        const unsigned char tr = e.trainable ? 1 : 0;
        put_bytes(os, &tr, 1);
        put_u32(os, static_cast<std::uint32_t>(e.tensor.ndim()));
        for (int d : e.tensor.shape) put_u64(os, static_cast<std::uint64_t>(d));
        for (Real v : e.tensor.data) put_f64(os, static_cast<double>(v));
    }
    if (!os) throw std::runtime_error(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    char magic[4];
    if (!get_bytes(is, magic, 4) || std::memcmp(magic, "SELC", 4) != 0)
        throw std::runtime_error(path + ": bad magic, not a SELM checkpoint");
    const std::uint32_t version = get_u32(is, path);
    if (version != 1)
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    Checkpoint ckpt;
    ckpt.seed = get_u64(is, path);
    const std::uint64_t cfg_len = get_u64(is, path);
    if (cfg_len > kMaxElements) throw std::runtime_error(path + ": dimension overflow in header");
    ckpt.config_text.resize(static_cast<size_t>(cfg_len));
    if (cfg_len && !get_bytes(is, ckpt.config_text.data(), ckpt.config_text.size()))
        throw std::runtime_error(path + ": truncated payload");
    const std::uint32_t count = get_u32(is, path);
    ckpt.entries.resize(count);
    for (auto& e : ckpt.entries) {
        const std::uint32_t name_len = get_u32(is, path);
        e.name.resize(name_len);
        if (name_len && !get_bytes(is, e.name.data(), e.name.size()))
            throw std::runtime_error(path + ": truncated payload");
        unsigned char tr = 0;
        if (!get_bytes(is, &tr, 1)) throw std::runtime_error(path + ": truncated payload");
        e.trainable = tr != 0;
        const std::uint32_t ndim = get_u32(is, path);
        std::vector<int> shape(ndim);
        std::uint64_t total = 1;
        for (auto& d : shape) {
            const std::uint64_t v = get_u64(is, path);
            if (v > kMaxElements || total > kMaxElements / std::max<std::uint64_t>(v, 1))
                throw std::runtime_error(path + ": dimension overflow in header");
            total *= std::max<std::uint64_t>(v, 1);
            d = static_cast<int>(v);
        }
        e.tensor = Tensor(shape);
        for (Real& v : e.tensor.data) v = static_cast<Real>(get_f64(is, path));
    }
    return ckpt;
}

} // namespace selm
