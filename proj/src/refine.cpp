#include "smmkg/refine.hpp"

#include <algorithm>
#include <sstream>

#include "smmkg/clustering.hpp"
#include "smmkg/error.hpp"
#include "util.hpp"

namespace smmkg {

PartLexicon PartLexicon::from_json(const nlohmann::json& j) {
    PartLexicon lex;
    for (const auto& p : j.value("parts", nlohmann::json::array()))
        lex.parts.insert(normalize_label(p.get<std::string>()));
    for (const auto& a : j.value("general_attributes", nlohmann::json::array()))
        lex.general_attributes.insert(normalize_label(a.get<std::string>()));
    for (const auto& p : lex.parts)
        if (lex.general_attributes.count(p))
            raise(ErrorKind::config, "part lexicon: '" + p + "' is both part and attribute");
    return lex;
}

PartLexicon PartLexicon::load(const std::filesystem::path& path) {
    return from_json(nlohmann::json::parse(read_text_file(path)));
}

namespace {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string token;
    while (in >> token) tokens.push_back(token);
    return tokens;
}

std::string join(const std::vector<std::string>& tokens, std::size_t begin, std::size_t count) {
    std::string out;
    for (std::size_t i = begin; i < begin + count; ++i) {
        if (!out.empty()) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

// Greedy longest-match of token spans against a label set.
void match_spans(const std::vector<std::string>& tokens, std::vector<bool>& used,
                 const std::set<std::string>& labels, std::vector<std::string>& out) {
    std::size_t max_span = 1;
    for (const auto& l : labels)
        max_span = std::max(max_span, static_cast<std::size_t>(
                                          std::count(l.begin(), l.end(), ' ') + 1));
    for (std::size_t i = 0; i < tokens.size();) {
        if (used[i]) {
            ++i;
            continue;
        }
        std::size_t longest = 0;
        for (std::size_t span = std::min(max_span, tokens.size() - i); span >= 1; --span) {
            bool free = true;
            for (std::size_t k = i; k < i + span; ++k)
                if (used[k]) free = false;
            if (!free) continue;
            if (labels.count(join(tokens, i, span))) {
                longest = span;
                break;
            }
        }
        if (longest > 0) {
            out.push_back(join(tokens, i, longest));
            for (std::size_t k = i; k < i + longest; ++k) used[k] = true;
            i += longest;
        } else {
            ++i;
        }
    }
}

} // namespace

Subdivision subdivide(const std::string& attribute, const PartLexicon& lex) {
    Subdivision result;
    std::vector<std::string> tokens = tokenize(attribute);
    std::vector<bool> used(tokens.size(), false);
    match_spans(tokens, used, lex.parts, result.parts);
    match_spans(tokens, used, lex.general_attributes, result.general_attrs);
    result.subdividable = !result.parts.empty() && !result.general_attrs.empty();
    if (!result.subdividable) {
        result.parts.clear();
        result.general_attrs.clear();
    }
    return result;
}

HierarchicalAttributeSet hierarchicalize(const std::set<std::string>& attributes,
                                         const PartLexicon& lex) {
    HierarchicalAttributeSet out;
    for (const auto& attribute : attributes) {
        Subdivision sub = subdivide(attribute, lex);
        if (!sub.subdividable) {
            out.direct.insert(attribute);
            out.origin["direct:" + attribute].insert(attribute);
            continue;
        }
        for (const auto& part : sub.parts) {
            out.parts.insert(part);
            out.origin["part:" + part].insert(attribute);
            // Every general attribute co-occurring in this composite belongs
            // to each of its parts.
            for (const auto& attr : sub.general_attrs) {
                out.part_attrs[part].insert(attr);
                out.origin["attr:" + part + ":" + attr].insert(attribute);
            }
        }
    }
    return out;
}

AggregationResult aggregate_attributes(const std::set<std::string>& keys, double gamma2,
                                       const EmbedFn& embed) {
    if (gamma2 < 0.0 || gamma2 > 1.0)
        raise(ErrorKind::precondition, "aggregate_attributes: gamma2 must be in [0,1]");
    MergeResult merged =
        fixpoint_merge(std::vector<std::string>(keys.begin(), keys.end()), gamma2, embed);
    AggregationResult result;
    for (const auto& [canonical, members] : merged.clusters) result.canonical.insert(canonical);
    result.aliases = merged.alias_to_canonical;
    return result;
}

CdfSeries attribute_cdf(const SceneMMKG& graph) {
    std::map<std::string, uint64_t> freq;
    for (const auto& [key, t] : graph.triples())
        if (t.tail.kind == TailKind::literal) ++freq[t.relation];
    if (freq.empty()) return {};

    std::vector<std::pair<std::string, uint64_t>> ordered(freq.begin(), freq.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    uint64_t total = 0;
    for (const auto& [name, f] : ordered) total += f;

    CdfSeries series;
    series.reserve(ordered.size());
    uint64_t cumulative = 0;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        cumulative += ordered[i].second;
        series.push_back({i + 1, static_cast<double>(cumulative) / static_cast<double>(total)});
    }
    return series;
}

nlohmann::json cdf_to_json(const CdfSeries& series) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : series)
        j.push_back({{"rank", p.rank}, {"cumulative_fraction", p.cumulative_fraction}});
    return j;
}

std::string cdf_to_csv(const CdfSeries& series) {
    std::string out = "rank,cumulative_fraction\n";
    for (const auto& p : series) {
        out += std::to_string(p.rank);
        out += ',';
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.10g", p.cumulative_fraction);
        out += buf;
        out += '\n';
    }
    return out;
}

nlohmann::json QcrReport::to_json() const {
    return {{"edges_before", edges_before},
            {"edges_after", edges_after},
            {"distinct_attrs_before", distinct_attrs_before},
            {"distinct_attrs_after", distinct_attrs_after},
            {"cdf_before", cdf_to_json(cdf_before)},
            {"cdf_after", cdf_to_json(cdf_after)}};
}

std::pair<SceneMMKG, QcrReport> qcr(const SceneMMKG& graph, const PartLexicon& lex,
                                    double gamma2, const EmbedFn& embed) {
    if (!graph.frozen()) raise(ErrorKind::precondition, "qcr: input graph must be frozen");

    QcrReport report;
    report.edges_before = graph.triples().size();
    report.distinct_attrs_before = graph.stats().distinct_attributes;
    report.cdf_before = attribute_cdf(graph);

    // Pass 1: hierarchicalize literal-tailed attribute triples.
    SceneMMKG staged(graph.schema());
    for (const auto& [id, e] : graph.entities()) staged.add_entity(e);
    for (const auto& [id, a] : graph.assets()) staged.add_asset(a);

    std::set<std::string> part_level_keys;
    for (const auto& [key, t] : graph.triples()) {
        if (t.tail.kind != TailKind::literal) {
            staged.add_triple(t);
            continue;
        }
        Subdivision sub = subdivide(t.relation, lex);
        if (!sub.subdividable) {
            staged.add_triple(t);
            continue;
        }
        const Entity* owner = graph.find_entity(t.head);
        for (const auto& part : sub.parts) {
            Entity part_node;
            part_node.id = stable_id("part", t.head + "/" + part);
            part_node.label = part;
            part_node.concept_id = owner ? owner->concept_id : "";
            std::string part_id = staged.add_entity(std::move(part_node));

            Triple mount;
            mount.head = t.head;
            mount.relation = kHasPartRelation;
            mount.tail = {TailKind::entity, part_id};
            mount.source = t.source;
            mount.provenance = t.provenance;
            staged.add_triple(std::move(mount));

            for (const auto& attr : sub.general_attrs) {
                Triple leaf;
                leaf.head = part_id;
                leaf.relation = attr;
                leaf.tail = t.tail;
                leaf.source = t.source;
                leaf.provenance = t.provenance;
                staged.add_triple(std::move(leaf));
                part_level_keys.insert(attr);
            }
        }
    }

    // Pass 2: aggregate attribute key names and rewrite aliased triples.
    std::set<std::string> keys;
    for (const auto& [key, t] : staged.triples())
        if (t.tail.kind == TailKind::literal) keys.insert(t.relation);
    AggregationResult agg = aggregate_attributes(keys, gamma2, embed);

    SceneMMKG refined(graph.schema());
    for (const auto& [id, e] : staged.entities()) refined.add_entity(e);
    for (const auto& [id, a] : staged.assets()) refined.add_asset(a);
    for (const auto& [key, t] : staged.triples()) {
        Triple rewritten = t;
        if (t.tail.kind == TailKind::literal) {
            auto alias = agg.aliases.find(t.relation);
            if (alias != agg.aliases.end()) rewritten.relation = alias->second;
        }
        refined.add_triple(std::move(rewritten));
    }
    for (const auto& name : part_level_keys) {
        std::string canonical = name;
        if (auto it = agg.aliases.find(name); it != agg.aliases.end()) canonical = it->second;
        auto keys_it = refined.attribute_keys().find(canonical);
        if (keys_it != refined.attribute_keys().end()) {
            AttributeKey k = keys_it->second;
            k.level = AttrLevel::part_level;
            refined.register_attribute(std::move(k));
        }
    }
    for (const auto& [alias, canonical] : agg.aliases)
        refined.register_attribute({alias, AttrLevel::entity_level, false, canonical});

    for (const auto& entry : graph.build_log()) refined.log_stage(entry.stage, entry.details);

    report.edges_after = refined.triples().size();
    report.distinct_attrs_after = refined.stats().distinct_attributes;
    report.cdf_after = attribute_cdf(refined);
    refined.log_stage("qcr", {{"edges_before", report.edges_before},
                              {"edges_after", report.edges_after},
                              {"distinct_attrs_before", report.distinct_attrs_before},
                              {"distinct_attrs_after", report.distinct_attrs_after}});
    refined.freeze();
    return {std::move(refined), std::move(report)};
}

} // namespace smmkg
