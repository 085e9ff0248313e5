#include "smmkg/clustering.hpp"

#include <algorithm>

#include "smmkg/error.hpp"

namespace smmkg {

MergeResult fixpoint_merge(const std::vector<std::string>& labels, double gamma,
                           const EmbedFn& embed, const HypernymPredicate& is_hypernym) {
    if (gamma < 0.0 || gamma > 1.0)
        raise(ErrorKind::precondition, "fixpoint_merge: gamma must be in [0,1]");

    MergeResult result;
    std::vector<std::string> active;
    for (const auto& label : labels) {
        if (result.clusters.emplace(label, std::set<std::string>{label}).second)
            active.push_back(label);
    }
    std::sort(active.begin(), active.end());

    std::map<std::string, Embedding> vectors;
    for (const auto& label : active) vectors.emplace(label, embed(label));

    // Cluster embeddings equal their canonical label's embedding, so the
    // pairwise similarities are fixed for the whole run; each merge only
    // removes the losing label from the active set.
    struct Pair {
        double sim;
        std::string a, b; // a < b
    };
    std::vector<Pair> pairs;
    pairs.reserve(active.size() * (active.size() + 1) / 2);
    for (std::size_t i = 0; i < active.size(); ++i)
        for (std::size_t j = i + 1; j < active.size(); ++j) {
            double sim = cosine(vectors.at(active[i]), vectors.at(active[j]));
            if (sim >= gamma) pairs.push_back({sim, active[i], active[j]});
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
        if (x.sim != y.sim) return x.sim > y.sim;
        return std::tie(x.a, x.b) < std::tie(y.a, y.b);
    });

    std::set<std::string> alive(active.begin(), active.end());
    for (const auto& pair : pairs) {
        if (!alive.count(pair.a) || !alive.count(pair.b)) continue;
        std::string canonical, other;
        if (is_hypernym && is_hypernym(pair.a, pair.b)) {
            canonical = pair.a;
            other = pair.b;
        } else if (is_hypernym && is_hypernym(pair.b, pair.a)) {
            canonical = pair.b;
            other = pair.a;
        } else {
            canonical = std::min(pair.a, pair.b);
            other = std::max(pair.a, pair.b);
        }
        auto& members = result.clusters.at(canonical);
        for (const auto& m : result.clusters.at(other)) members.insert(m);
        result.clusters.erase(other);
        alive.erase(other);
        ++result.merges;
    }

    for (const auto& [canonical, members] : result.clusters)
        for (const auto& m : members)
            if (m != canonical) result.alias_to_canonical[m] = canonical;
    return result;
}

} // namespace smmkg
