#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace smmkg {

struct Embedding {
    std::vector<double> values;
    bool normalized = false;

    std::size_t dim() const { return values.size(); }
};

// dot(a,b) / (|a||b|); 0 when either norm is 0. Throws contract on dim mismatch.
double cosine(const Embedding& a, const Embedding& b);

// Deterministic offline embedder: character trigrams of " text " feature-hashed
// into `dim` buckets, counts L2-normalized. All components are non-negative.
Embedding trigram_embedding(const std::string& text, std::size_t dim);

enum class ProviderMode { fixture, http };

struct ProviderConfig {
    ProviderMode mode = ProviderMode::fixture;
    std::string endpoint;      // http mode
    int timeout_ms = 5000;
    std::string fixture_path;  // fixture mode
    int max_retries = 2;
    std::size_t dim = 256;     // embedding dimension

    static ProviderConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

using EmbedFn = std::function<Embedding(const std::string&)>;

// Handle to the completion + embedding endpoints. Immutable after construction
// and safe to share across threads; each call honors timeout/retry on its own.
class Provider {
public:
    // Applies the SCENE_MMKG_PROVIDER env override ("fixture"/"http") before
    // loading the fixture map.
    explicit Provider(ProviderConfig cfg);

    // Ordered candidate outputs for a prompt. Fixture mode looks the prompt up
    // as a key; a miss is a config error naming the key.
    std::vector<std::string> complete(const std::string& prompt) const;

    Embedding embed(const std::string& text) const;

    EmbedFn embedder() const;

    const ProviderConfig& config() const { return cfg_; }

private:
    ProviderConfig cfg_;
    std::map<std::string, std::vector<std::string>> fixture_;
};

} // namespace smmkg
