#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "smmkg/provider.hpp"

namespace smmkg {

// Returns true when `a` is a lexical hypernym of `b`.
using HypernymPredicate = std::function<bool(const std::string&, const std::string&)>;

struct MergeResult {
    // canonical label -> every member label (canonical included)
    std::map<std::string, std::set<std::string>> clusters;
    // non-canonical member -> its canonical label
    std::map<std::string, std::string> alias_to_canonical;
    int merges = 0;
};

// Shared fixpoint-merge used for concept clustering and attribute aggregation:
// while any surviving pair's label-embedding cosine >= gamma, merge the
// highest-similarity pair (ties broken lexicographically). The merged cluster
// keeps the hypernym label when the predicate says one subsumes the other,
// else the lexicographically smaller label; the cluster embedding is the
// canonical label's embedding, so pair similarities never change mid-run.
MergeResult fixpoint_merge(const std::vector<std::string>& labels, double gamma,
                           const EmbedFn& embed, const HypernymPredicate& is_hypernym = {});

} // namespace smmkg
