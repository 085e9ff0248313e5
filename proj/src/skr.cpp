#include "smmkg/skr.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "smmkg/error.hpp"
#include "util.hpp"

namespace smmkg {

void GcnParameters::validate() const {
    if (dims.size() != layers + 1)
        raise(ErrorKind::contract, "gcn: dims must have layers+1 entries");
    if (weights.size() != layers)
        raise(ErrorKind::contract, "gcn: weights must have one matrix per layer");
    for (std::size_t m = 0; m < layers; ++m) {
        if (weights[m].size() != dims[m] * dims[m + 1])
            raise(ErrorKind::contract, "gcn: layer " + std::to_string(m) + " weight shape mismatch");
        for (double w : weights[m])
            if (!std::isfinite(w))
                raise(ErrorKind::contract, "gcn: non-finite weight in layer " + std::to_string(m));
    }
}

nlohmann::json GcnParameters::to_json() const {
    return {{"n", layers},
            {"dims", dims},
            {"activation", activation == Activation::relu ? "relu" : "identity"},
            {"weights", weights}};
}

GcnParameters GcnParameters::from_json(const nlohmann::json& j) {
    GcnParameters p;
    p.layers = j.at("n").get<std::size_t>();
    for (const auto& d : j.at("dims")) p.dims.push_back(d.get<std::size_t>());
    std::string act = j.value("activation", "relu");
    if (act == "relu")
        p.activation = Activation::relu;
    else if (act == "identity")
        p.activation = Activation::identity;
    else
        raise(ErrorKind::config, "gcn: unknown activation '" + act + "'");
    for (const auto& w : j.value("weights", nlohmann::json::array()))
        p.weights.push_back(w.get<std::vector<double>>());
    p.validate();
    return p;
}

GcnParameters GcnParameters::load(const std::filesystem::path& path) {
    return from_json(nlohmann::json::parse(read_text_file(path)));
}

std::vector<ScoredAnchor> retrieve(const Query& query, const SceneMMKG& graph,
                                   const EmbedFn& embed) {
    if (query.text.empty() && !query.observation)
        raise(ErrorKind::contract, "retrieve: query needs text or observation");
    if (query.k < 1) raise(ErrorKind::precondition, "retrieve: k must be >= 1");
    if (!graph.frozen()) raise(ErrorKind::precondition, "retrieve: graph must be frozen");
    if (graph.entities().empty()) raise(ErrorKind::retrieval, "retrieve: graph has no entities");

    Embedding query_vec = query.text.empty() ? *query.observation : embed(query.text);

    std::vector<ScoredAnchor> scored;
    scored.reserve(graph.entities().size());
    for (const auto& [id, e] : graph.entities())
        scored.push_back({id, cosine(query_vec, embed(e.label))});

    std::sort(scored.begin(), scored.end(), [](const ScoredAnchor& a, const ScoredAnchor& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (scored.size() > query.k) scored.resize(query.k);
    return scored;
}

RetrievedSubgraph expand(const std::vector<ScoredAnchor>& anchors, const SceneMMKG& graph,
                         int hops) {
    RetrievedSubgraph result;
    result.anchors = anchors;
    std::set<TripleKey> seen;
    for (const auto& anchor : anchors) {
        RetrievedSubgraph part = graph.neighbors(anchor.id, hops);
        for (auto& t : part.textual)
            if (seen.insert(key_of(t)).second) result.textual.push_back(std::move(t));
        for (auto& t : part.visual)
            if (seen.insert(key_of(t)).second) result.visual.push_back(std::move(t));
    }
    return result;
}

namespace {

std::string uri_basename(const std::string& uri) {
    auto pos = uri.find_last_of('/');
    return pos == std::string::npos ? uri : uri.substr(pos + 1);
}

std::string visual_node_text(const SceneMMKG& graph, const Triple& t) {
    const ImageAsset* asset = graph.find_asset(t.tail.value);
    if (!asset) raise(ErrorKind::integrity, "visual triple with unknown asset: " + t.tail.value);
    return asset->caption.empty() ? uri_basename(asset->uri) : asset->caption;
}

} // namespace

RetrievedSubgraph denoise(const RetrievedSubgraph& subgraph, const Embedding& observation,
                          double gamma3, const SceneMMKG& graph, const EmbedFn& embed) {
    RetrievedSubgraph result;
    result.anchors = subgraph.anchors;
    result.textual = subgraph.textual;
    for (const auto& t : subgraph.visual) {
        double sim = cosine(observation, embed(visual_node_text(graph, t)));
        if (sim >= gamma3) {
            result.visual.push_back(t);
            result.visual_scores.push_back(sim);
        }
    }
    return result;
}

FeatureMatrix gcn_forward(const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                          FeatureMatrix h0, const GcnParameters& params) {
    params.validate();
    if (h0.cols != params.dims.front())
        raise(ErrorKind::contract, "gcn: input feature dim " + std::to_string(h0.cols) +
                                       " != dims[0] " + std::to_string(params.dims.front()));
    const std::size_t n = h0.rows;

    // Symmetric normalization with self-loops over the binary adjacency.
    std::vector<std::set<std::size_t>> adj(n);
    for (const auto& [u, v] : edges) {
        if (u >= n || v >= n) raise(ErrorKind::contract, "gcn: edge index out of range");
        adj[u].insert(v);
        adj[v].insert(u);
    }
    for (std::size_t i = 0; i < n; ++i) adj[i].insert(i);
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i)
        inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(adj[i].size()));

    std::vector<double> current = std::move(h0.data);
    std::size_t cur_cols = h0.cols;
    for (std::size_t m = 0; m < params.layers; ++m) {
        const std::size_t in_dim = params.dims[m];
        const std::size_t out_dim = params.dims[m + 1];

        // propagated = Â · H
        std::vector<double> propagated(n * in_dim, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j : adj[i]) {
                double coeff = inv_sqrt_deg[i] * inv_sqrt_deg[j];
                const double* row = current.data() + j * in_dim;
                double* out = propagated.data() + i * in_dim;
                for (std::size_t c = 0; c < in_dim; ++c) out[c] += coeff * row[c];
            }

        // next = act(propagated · W)
        std::vector<double> next(n * out_dim, 0.0);
        const auto& w = params.weights[m];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < in_dim; ++c) {
                double value = propagated[i * in_dim + c];
                if (value == 0.0) continue;
                const double* wrow = w.data() + c * out_dim;
                double* out = next.data() + i * out_dim;
                for (std::size_t o = 0; o < out_dim; ++o) out[o] += value * wrow[o];
            }
        if (params.activation == GcnParameters::Activation::relu)
            for (double& v : next) v = std::max(0.0, v);

        current = std::move(next);
        cur_cols = out_dim;
    }

    for (double v : current)
        if (!std::isfinite(v)) raise(ErrorKind::numeric, "gcn: non-finite feature produced");

    FeatureMatrix out;
    out.node_ids = std::move(h0.node_ids);
    out.rows = n;
    out.cols = cur_cols;
    out.data = std::move(current);
    return out;
}

FeatureMatrix encode(const RetrievedSubgraph& subgraph, const SceneMMKG& graph,
                     const GcnParameters& params, const EmbedFn& embed) {
    params.validate();

    // Node set: anchors plus heads and tails of the retained triples. Literal
    // tails become one node per distinct value; visual tails resolve to their
    // asset.
    std::map<std::string, std::string> node_text; // node key -> text to embed
    auto add_entity_node = [&](const std::string& id) {
        const Entity* e = graph.find_entity(id);
        if (!e) raise(ErrorKind::lookup, "encode: unknown entity " + id);
        node_text.emplace(id, e->label);
    };
    for (const auto& a : subgraph.anchors) add_entity_node(a.id);
    auto add_triple_nodes = [&](const Triple& t) {
        add_entity_node(t.head);
        switch (t.tail.kind) {
            case TailKind::entity:
                add_entity_node(t.tail.value);
                break;
            case TailKind::literal:
                node_text.emplace("lit:" + t.tail.value, t.tail.value);
                break;
            case TailKind::image:
                node_text.emplace(t.tail.value, visual_node_text(graph, t));
                break;
        }
    };
    for (const auto& t : subgraph.textual) add_triple_nodes(t);
    for (const auto& t : subgraph.visual) add_triple_nodes(t);
    if (node_text.empty()) raise(ErrorKind::contract, "encode: empty subgraph");

    FeatureMatrix h0;
    h0.rows = node_text.size();
    h0.cols = params.dims.empty() ? 0 : params.dims.front();
    std::map<std::string, std::size_t> index;
    for (const auto& [key, text] : node_text) {
        index.emplace(key, h0.node_ids.size());
        h0.node_ids.push_back(key);
    }
    h0.data.resize(h0.rows * h0.cols);
    for (const auto& [key, text] : node_text) {
        Embedding e = embed(text);
        if (e.dim() != h0.cols)
            raise(ErrorKind::contract, "encode: embedding dim " + std::to_string(e.dim()) +
                                           " != dims[0] " + std::to_string(h0.cols));
        std::copy(e.values.begin(), e.values.end(), h0.data.begin() + index.at(key) * h0.cols);
    }

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    auto add_edge = [&](const Triple& t) {
        std::string tail_key = t.tail.kind == TailKind::literal ? "lit:" + t.tail.value
                                                                : t.tail.value;
        edges.emplace_back(index.at(t.head), index.at(tail_key));
    };
    for (const auto& t : subgraph.textual) add_edge(t);
    for (const auto& t : subgraph.visual) add_edge(t);

    return gcn_forward(edges, std::move(h0), params);
}

Embedding pool_anchor_mean(const FeatureMatrix& features,
                           const std::vector<ScoredAnchor>& anchors) {
    if (anchors.empty()) raise(ErrorKind::precondition, "pool: no anchors");
    Embedding out;
    out.values.assign(features.cols, 0.0);
    std::size_t found = 0;
    for (const auto& anchor : anchors) {
        auto it = std::find(features.node_ids.begin(), features.node_ids.end(), anchor.id);
        if (it == features.node_ids.end()) continue;
        std::size_t row = static_cast<std::size_t>(it - features.node_ids.begin());
        for (std::size_t c = 0; c < features.cols; ++c) out.values[c] += features.at(row, c);
        ++found;
    }
    if (found == 0) raise(ErrorKind::lookup, "pool: no anchor rows in feature matrix");
    for (double& v : out.values) v /= static_cast<double>(found);
    return out;
}

nlohmann::json feature_matrix_to_json(const FeatureMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
        rows.push_back(std::move(row));
    }
    return {{"nodes", m.node_ids}, {"rows", m.rows}, {"cols", m.cols}, {"features", rows}};
}

std::string feature_matrix_to_csv(const FeatureMatrix& m) {
    std::string out = "node";
    for (std::size_t c = 0; c < m.cols; ++c) out += ",f" + std::to_string(c);
    out += '\n';
    for (std::size_t r = 0; r < m.rows; ++r) {
        out += m.node_ids[r];
        for (std::size_t c = 0; c < m.cols; ++c) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.12g", m.at(r, c));
            out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

} // namespace smmkg
