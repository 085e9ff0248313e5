#include "smmkg/provider.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <httplib.h>

#include "smmkg/error.hpp"
#include "util.hpp"

namespace smmkg {

double cosine(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim())
        raise(ErrorKind::contract, "cosine: dimension mismatch " +
                                       std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    double value = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(value, -1.0, 1.0);
}

Embedding trigram_embedding(const std::string& text, std::size_t dim) {
    if (text.empty()) raise(ErrorKind::precondition, "trigram_embedding: empty text");
    if (dim == 0) raise(ErrorKind::precondition, "trigram_embedding: dim must be >= 1");

    std::string padded = " " + text + " ";
    Embedding e;
    e.values.assign(dim, 0.0);
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        uint64_t h = fnv1a64(std::string_view(padded).substr(i, 3));
        e.values[h % dim] += 1.0;
    }
    double norm = 0.0;
    for (double v : e.values) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& v : e.values) v /= norm;
    e.normalized = true;
    return e;
}

ProviderConfig ProviderConfig::from_json(const nlohmann::json& j) {
    ProviderConfig cfg;
    std::string mode = j.value("mode", "fixture");
    if (mode == "fixture")
        cfg.mode = ProviderMode::fixture;
    else if (mode == "http")
        cfg.mode = ProviderMode::http;
    else
        raise(ErrorKind::config, "provider: unknown mode '" + mode + "'");
    cfg.endpoint = j.value("endpoint", "");
    cfg.timeout_ms = j.value("timeout_ms", 5000);
    cfg.fixture_path = j.value("fixture_path", "");
    cfg.max_retries = j.value("max_retries", 2);
    cfg.dim = j.value("dim", std::size_t{256});
    if (cfg.timeout_ms <= 0) raise(ErrorKind::config, "provider: timeout_ms must be > 0");
    return cfg;
}

nlohmann::json ProviderConfig::to_json() const {
    nlohmann::json j;
    j["mode"] = mode == ProviderMode::fixture ? "fixture" : "http";
    j["endpoint"] = endpoint;
    j["timeout_ms"] = timeout_ms;
    j["fixture_path"] = fixture_path;
    j["max_retries"] = max_retries;
    j["dim"] = dim;
    return j;
}

namespace {

struct Endpoint {
    std::string host_port; // scheme://host:port
    std::string path;
};

Endpoint parse_endpoint(const std::string& uri) {
    auto scheme_end = uri.find("://");
    if (scheme_end == std::string::npos)
        raise(ErrorKind::config, "provider: endpoint is not a URI: " + uri);
    auto path_start = uri.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {uri, "/"};
    return {uri.substr(0, path_start), uri.substr(path_start)};
}

nlohmann::json post_json(const ProviderConfig& cfg, const nlohmann::json& body) {
    Endpoint ep = parse_endpoint(cfg.endpoint);
    httplib::Client client(ep.host_port);
    client.set_connection_timeout(0, cfg.timeout_ms * 1000);
    client.set_read_timeout(0, cfg.timeout_ms * 1000);

    std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        auto res = client.Post(ep.path, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        auto parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) {
            last_error = "invalid JSON in response";
            continue;
        }
        return parsed;
    }
    raise(ErrorKind::transport,
          "provider: endpoint " + cfg.endpoint + " failed after " +
              std::to_string(cfg.max_retries + 1) + " attempts: " + last_error);
}

} // namespace

Provider::Provider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
    if (const char* env = std::getenv("SCENE_MMKG_PROVIDER")) {
        std::string mode(env);
        if (mode == "fixture")
            cfg_.mode = ProviderMode::fixture;
        else if (mode == "http")
            cfg_.mode = ProviderMode::http;
        else if (!mode.empty())
            raise(ErrorKind::config, "SCENE_MMKG_PROVIDER: unknown mode '" + mode + "'");
    }
    if (cfg_.mode == ProviderMode::fixture) {
        if (cfg_.fixture_path.empty())
            raise(ErrorKind::config, "provider: fixture mode requires fixture_path");
        nlohmann::json j = nlohmann::json::parse(read_text_file(cfg_.fixture_path), nullptr, false);
        if (j.is_discarded() || !j.is_object())
            raise(ErrorKind::config, "provider: fixture file is not a JSON object: " + cfg_.fixture_path);
        for (auto& [key, value] : j.items()) {
            std::vector<std::string> candidates;
            if (value.is_array())
                for (auto& c : value) candidates.push_back(c.get<std::string>());
            else
                candidates.push_back(value.get<std::string>());
            fixture_[key] = std::move(candidates);
        }
    } else if (cfg_.endpoint.empty()) {
        raise(ErrorKind::config, "provider: http mode requires endpoint");
    }
}

std::vector<std::string> Provider::complete(const std::string& prompt) const {
    if (prompt.empty()) raise(ErrorKind::precondition, "complete: empty prompt");
    if (cfg_.mode == ProviderMode::fixture) {
        auto it = fixture_.find(prompt);
        if (it == fixture_.end())
            raise(ErrorKind::config, "fixture miss for prompt key: \"" + prompt + "\"");
        return it->second;
    }
    nlohmann::json res = post_json(cfg_, {{"prompt", prompt}});
    if (!res.contains("candidates") || !res["candidates"].is_array())
        raise(ErrorKind::transport, "provider: response has no candidates array");
    std::vector<std::string> out;
    for (auto& c : res["candidates"]) out.push_back(c.get<std::string>());
    return out;
}

Embedding Provider::embed(const std::string& text) const {
    if (text.empty()) raise(ErrorKind::precondition, "embed: empty text");
    if (cfg_.mode == ProviderMode::fixture) return trigram_embedding(text, cfg_.dim);

    nlohmann::json res = post_json(cfg_, {{"input", text}});
    if (!res.contains("embedding") || !res["embedding"].is_array())
        raise(ErrorKind::transport, "provider: response has no embedding array");
    Embedding e;
    for (auto& v : res["embedding"]) e.values.push_back(v.get<double>());
    double norm = 0.0;
    for (double v : e.values) norm += v * v;
    e.normalized = std::abs(std::sqrt(norm) - 1.0) <= 1e-6;
    return e;
}

EmbedFn Provider::embedder() const {
    return [this](const std::string& text) { return embed(text); };
}

} // namespace smmkg
