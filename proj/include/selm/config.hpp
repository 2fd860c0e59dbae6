#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "selm/data.hpp"
#include "selm/model.hpp"
#include "selm/training.hpp"

namespace selm {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat-key run configuration ("section.key = value" lines, '#' comments).
/// Every key has a schema default; unknown keys are rejected by name. The
/// SEFC_SEED environment variable overrides the seed for CI runs.
class RunConfig {
public:
    static RunConfig defaults();
    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text, const std::string& origin = "<text>");

    void set(const std::string& key, const std::string& value); // key must exist in the schema

    i64 get_int(const std::string& key) const;
    double get_real(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;

    /// Sorted key=value dump, written next to every run's outputs.
    std::string resolved_text() const;

    ModelConfig model_config() const;
    TrainConfig train_config() const;
    WindowSpec window_spec() const;
    SplitCounts split_counts(i64 total_rows) const;
    int threads() const;

private:
    std::map<std::string, std::string> values_;
    void apply_env_overrides();
};

} // namespace selm
