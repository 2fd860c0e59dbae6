#include "selm/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace selm {

namespace {

const std::map<std::string, std::string>& schema() {
    static const std::map<std::string, std::string> defaults = {
        {"seed", "42"},
        {"threads", "0"},
        {"out", "runs"},
        {"data.context_length", "672"},
        {"data.horizon", "96"},
        {"data.segment_length", "96"},
        {"data.stride", "1"},
        {"data.channel_independent", "true"},
        {"data.split_train", "0"},
        {"data.split_val", "0"},
        {"data.split_test", "0"},
        {"data.eps", "1e-5"},
        {"model.d_model", "64"},
        {"model.encoder_hidden", "0"},
        {"model.vocab_size", "1000"},
        {"model.vocab_width", "0"},
        {"model.prototypes", "32"},
        {"model.embedding_path", ""},
        {"model.layers", "2"},
        {"model.heads", "4"},
        {"model.d_llm", "64"},
        {"model.ffn_width", "256"},
        {"model.max_positions", "64"},
        {"model.frozen", "true"},
        {"model.decoder_hidden", "0"},
        {"model.decoder_mode", "flatten"},
        {"tscc.enabled", "true"},
        {"tscc.heads", "4"},
        {"tscc.k_top", "5"},
        {"tscc.vae_hidden", "0"},
        {"tscc.vae_latent", "0"},
        {"adapter.enabled", "true"},
        {"adapter.rank", "0"},
        {"adapter.hidden", "0"},
        {"adapter.scale", "1.0"},
        {"adapter.topology", "sequential"},
        {"train.lr", "1e-3"},
        {"train.batch_size", "32"},
        {"train.max_epochs", "10"},
        {"train.patience", "3"},
        {"train.clip_norm", "1.0"},
        {"train.kl_weight", "0"},
        {"eval.seasonal_period", "1"},
    };
    return defaults;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.values_ = schema();
    c.apply_env_overrides();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(path + ": cannot open config file");
    std::stringstream buf;
    buf << is.rdbuf();
    return from_text(buf.str(), path);
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& origin) {
    RunConfig c;
    c.values_ = schema();
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!c.values_.count(key))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key +
                              "'");
        c.values_[key] = value;
    }
    c.apply_env_overrides();
    return c;
}

void RunConfig::apply_env_overrides() {
    if (const char* env = std::getenv("SEFC_SEED")) values_["seed"] = env;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("unknown key '" + key + "'");
    values_[key] = value;
}

i64 RunConfig::get_int(const std::string& key) const {
    const std::string& v = get_string(key);
    try {
        size_t pos = 0;
        const long long r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<i64>(r);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
    }
}

double RunConfig::get_real(const std::string& key) const {
    const std::string& v = get_string(key);
    try {
        size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected real, got '" + v + "'");
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    std::string v = get_string(key);
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected boolean, got '" + v + "'");
}

std::string RunConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
    return it->second;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
    const std::string& v = get_string(key);
    try {
        size_t pos = 0;
        const unsigned long long r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(r);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
}

std::string RunConfig::resolved_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
    return os.str();
}

ModelConfig RunConfig::model_config() const {
    ModelConfig m;
    m.context_length = static_cast<int>(get_int("data.context_length"));
    m.horizon = static_cast<int>(get_int("data.horizon"));
    m.segment_length = static_cast<int>(get_int("data.segment_length"));
    m.d_model = static_cast<int>(get_int("model.d_model"));
    m.encoder_hidden = static_cast<int>(get_int("model.encoder_hidden"));
    m.vocab_size = static_cast<int>(get_int("model.vocab_size"));
    m.vocab_width = static_cast<int>(get_int("model.vocab_width"));
    m.prototypes = static_cast<int>(get_int("model.prototypes"));
    m.embedding_path = get_string("model.embedding_path");
    m.use_tscc = get_bool("tscc.enabled");
    m.tscc_heads = static_cast<int>(get_int("tscc.heads"));
    m.k_top = static_cast<int>(get_int("tscc.k_top"));
    m.vae_hidden = static_cast<int>(get_int("tscc.vae_hidden"));
    m.vae_latent = static_cast<int>(get_int("tscc.vae_latent"));
    m.layers = static_cast<int>(get_int("model.layers"));
    m.heads = static_cast<int>(get_int("model.heads"));
    m.d_llm = static_cast<int>(get_int("model.d_llm"));
    m.ffn_width = static_cast<int>(get_int("model.ffn_width"));
    m.max_positions = static_cast<int>(get_int("model.max_positions"));
    m.frozen = get_bool("model.frozen");
    m.use_adapter = get_bool("adapter.enabled");
    m.adapter_rank = static_cast<int>(get_int("adapter.rank"));
    m.adapter_hidden = static_cast<int>(get_int("adapter.hidden"));
    m.adapter_scale = static_cast<Real>(get_real("adapter.scale"));
    m.adapter_topology = get_string("adapter.topology");
    m.decoder_hidden = static_cast<int>(get_int("model.decoder_hidden"));
    m.decoder_mode = get_string("model.decoder_mode");
    m.eps = static_cast<Real>(get_real("data.eps"));
    m.seed = get_u64("seed");
    return m;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.lr = static_cast<Real>(get_real("train.lr"));
    t.batch_size = static_cast<int>(get_int("train.batch_size"));
    t.max_epochs = static_cast<int>(get_int("train.max_epochs"));
    t.patience = static_cast<int>(get_int("train.patience"));
    t.clip_norm = static_cast<Real>(get_real("train.clip_norm"));
    t.kl_weight = static_cast<Real>(get_real("train.kl_weight"));
    t.seed = get_u64("seed");
    return t;
}

WindowSpec RunConfig::window_spec() const {
    WindowSpec w;
    w.context_length = static_cast<int>(get_int("data.context_length"));
    w.horizon = static_cast<int>(get_int("data.horizon"));
    w.stride = static_cast<int>(get_int("data.stride"));
    w.segment_length = static_cast<int>(get_int("data.segment_length"));
    return w;
}

SplitCounts RunConfig::split_counts(i64 total_rows) const {
    SplitCounts s;
    s.train = get_int("data.split_train");
    s.val = get_int("data.split_val");
    s.test = get_int("data.split_test");
    if (s.train == 0 && s.val == 0 && s.test == 0) {
        s.train = static_cast<i64>(0.7 * static_cast<double>(total_rows));
        s.val = static_cast<i64>(0.1 * static_cast<double>(total_rows));
        s.test = total_rows - s.train - s.val;
    }
    return s;
}

int RunConfig::threads() const { return static_cast<int>(get_int("threads")); }

} // namespace selm
