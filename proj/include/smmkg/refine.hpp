#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "smmkg/graph.hpp"
#include "smmkg/provider.hpp"

namespace smmkg {

// Drives subdivide(): part labels vs. general attribute labels, disjoint.
struct PartLexicon {
    std::set<std::string> parts;
    std::set<std::string> general_attributes;

    static PartLexicon from_json(const nlohmann::json& j);
    static PartLexicon load(const std::filesystem::path& path);
};

struct Subdivision {
    bool subdividable = false;
    std::vector<std::string> parts;         // P_i, in attribute order
    std::vector<std::string> general_attrs; // AP_i, in attribute order
};

// Whitespace tokenization with longest-match against part labels first, then
// general attribute labels. Subdividable iff both sides are non-empty.
Subdivision subdivide(const std::string& attribute, const PartLexicon& lex);

struct HierarchicalAttributeSet {
    std::set<std::string> direct;                             // kept as-is
    std::set<std::string> parts;                              // linked to the entity
    std::map<std::string, std::set<std::string>> part_attrs;  // part -> general attrs
    // output element key ("direct:a" | "part:p" | "attr:p:ap") -> inputs
    std::map<std::string, std::set<std::string>> origin;
};

HierarchicalAttributeSet hierarchicalize(const std::set<std::string>& attributes,
                                         const PartLexicon& lex);

struct AggregationResult {
    std::set<std::string> canonical;
    std::map<std::string, std::string> aliases; // alias -> canonical
};

// Same fixpoint-merge semantics as concept clustering, applied to attribute
// names; merged keys become aliases of one canonical key.
AggregationResult aggregate_attributes(const std::set<std::string>& keys, double gamma2,
                                       const EmbedFn& embed);

struct CdfPoint {
    std::size_t rank = 0;
    double cumulative_fraction = 0.0;
};

using CdfSeries = std::vector<CdfPoint>;

// Attribute usage frequencies (triples per attribute key) sorted descending;
// cumulative fraction per rank. Empty attribute set -> empty series.
CdfSeries attribute_cdf(const SceneMMKG& graph);

nlohmann::json cdf_to_json(const CdfSeries& series);
std::string cdf_to_csv(const CdfSeries& series);

struct QcrReport {
    uint64_t edges_before = 0;
    uint64_t edges_after = 0;
    uint64_t distinct_attrs_before = 0;
    uint64_t distinct_attrs_after = 0;
    CdfSeries cdf_before;
    CdfSeries cdf_after;

    nlohmann::json to_json() const;
};

// Quality control & refinement: hierarchicalize every entity's attribute
// triples, then aggregate attribute keys and rewrite aliased triples. The
// input graph is untouched; the refined graph comes back frozen.
std::pair<SceneMMKG, QcrReport> qcr(const SceneMMKG& graph, const PartLexicon& lex,
                                    double gamma2, const EmbedFn& embed);

// Relation used to mount a part node onto its owning entity.
inline constexpr const char* kHasPartRelation = "has_part";

} // namespace smmkg
