#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "selm/tensor.hpp"

namespace selm {

/// Portable matrix file: magic "SELM", version u32 = 1, rows u64, cols u64,
/// then row-major IEEE-754 float32, all little-endian.
struct MatrixFile {
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    std::vector<float> values;
};

void write_matrix(const std::string& path, std::uint64_t rows, std::uint64_t cols,
                  const float* values);
void write_matrix(const std::string& path, const Tensor& t); // flattens to 2-d [rows, rest]
MatrixFile read_matrix(const std::string& path);

/// Checkpoint container: every named parameter at full precision, the
/// resolved config echo and the run seed. Reloading reproduces forward
/// outputs bit-exactly, which is why tensors are stored as f64 here rather
/// than in the f32 exchange format above.
struct CheckpointEntry {
    std::string name;
    bool trainable = false;
    Tensor tensor;
};

struct Checkpoint {
    std::uint64_t seed = 0;
    std::string config_text;
    std::vector<CheckpointEntry> entries;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

} // namespace selm
