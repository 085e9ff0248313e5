#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smmkg/graph.hpp"
#include "smmkg/provider.hpp"

namespace smmkg {

struct Query {
    std::string text;                      // instruction text
    std::optional<Embedding> observation;  // observation feature O_t
    std::size_t k = 1;
};

struct GcnParameters {
    enum class Activation { relu, identity };

    std::size_t layers = 0;           // n
    std::vector<std::size_t> dims;    // layers + 1 entries; dims[0] = input dim
    Activation activation = Activation::relu;
    std::vector<std::vector<double>> weights; // row-major dims[m] x dims[m+1]

    void validate() const; // throws contract on inconsistent shapes
    nlohmann::json to_json() const;
    static GcnParameters from_json(const nlohmann::json& j);
    static GcnParameters load(const std::filesystem::path& path);
};

struct FeatureMatrix {
    std::vector<std::string> node_ids; // canonical (sorted) node order
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major

    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Top-k entities by cosine between the query vector (text embedding, else the
// observation) and entity-label embeddings; ties broken by ascending id.
std::vector<ScoredAnchor> retrieve(const Query& query, const SceneMMKG& graph,
                                   const EmbedFn& embed);

// Union of hop-bounded neighborhoods around the anchors, partitioned into
// textual and visual triples.
RetrievedSubgraph expand(const std::vector<ScoredAnchor>& anchors, const SceneMMKG& graph,
                         int hops = 1);

// Keeps a visual element iff cosine(observation, element embedding) >= gamma3;
// rejected elements are removed outright. Textual triples are untouched. The
// visual-node embedding is the caption when present, else the asset uri
// basename.
RetrievedSubgraph denoise(const RetrievedSubgraph& subgraph, const Embedding& observation,
                          double gamma3, const SceneMMKG& graph, const EmbedFn& embed);

// n-layer GCN forward with symmetric normalization over the subgraph's
// undirected adjacency plus self-loops; rows follow canonical node order.
FeatureMatrix encode(const RetrievedSubgraph& subgraph, const SceneMMKG& graph,
                     const GcnParameters& params, const EmbedFn& embed);

// The bare forward pass: H^{m+1} = act(D^-1/2 (A+I) D^-1/2 · H^m · W_m).
// Exposed for direct testing; `edges` are undirected index pairs.
FeatureMatrix gcn_forward(const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                          FeatureMatrix h0, const GcnParameters& params);

// Optional pooling for downstream single-token consumers: mean of anchor rows.
Embedding pool_anchor_mean(const FeatureMatrix& features,
                           const std::vector<ScoredAnchor>& anchors);

nlohmann::json feature_matrix_to_json(const FeatureMatrix& m);
std::string feature_matrix_to_csv(const FeatureMatrix& m);

} // namespace smmkg
