#include "smmkg/schema.hpp"

#include <algorithm>
#include <deque>

#include "smmkg/clustering.hpp"
#include "smmkg/error.hpp"
#include "util.hpp"

namespace smmkg {

SceneProfile SceneProfile::from_json(const nlohmann::json& j) {
    SceneProfile p;
    p.scene = j.at("scene").get<std::string>();
    for (const auto& w : j.at("profiles")) p.profiles.push_back(w.get<std::string>());
    if (p.profiles.empty()) raise(ErrorKind::config, "scene profile: profiles must be non-empty");
    for (const auto& w : p.profiles)
        if (w.empty()) raise(ErrorKind::config, "scene profile: empty profile entry");
    return p;
}

SceneProfile SceneProfile::load(const std::filesystem::path& path) {
    return from_json(nlohmann::json::parse(read_text_file(path)));
}

nlohmann::json ConceptProvenance::to_json() const {
    nlohmann::json j;
    switch (kind) {
        case Kind::prompt:
            j["kind"] = "prompt";
            j["prompt_index"] = prompt_index;
            break;
        case Kind::hypernym_of:
            j["kind"] = "hypernym_of";
            j["source_id"] = source_id;
            break;
        case Kind::hyponym_of:
            j["kind"] = "hyponym_of";
            j["source_id"] = source_id;
            break;
        case Kind::merged:
            j["kind"] = "merged";
            j["merged_ids"] = merged_ids;
            break;
    }
    return j;
}

ConceptProvenance ConceptProvenance::from_json(const nlohmann::json& j) {
    ConceptProvenance p;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "prompt") {
        p.kind = Kind::prompt;
        p.prompt_index = j.value("prompt_index", -1);
    } else if (kind == "hypernym_of") {
        p.kind = Kind::hypernym_of;
        p.source_id = j.value("source_id", "");
    } else if (kind == "hyponym_of") {
        p.kind = Kind::hyponym_of;
        p.source_id = j.value("source_id", "");
    } else if (kind == "merged") {
        p.kind = Kind::merged;
        for (const auto& id : j.value("merged_ids", nlohmann::json::array()))
            p.merged_ids.push_back(id.get<std::string>());
    } else {
        raise(ErrorKind::config, "concept provenance: unknown kind '" + kind + "'");
    }
    return p;
}

namespace {
const std::set<std::string> kEmptySet;
}

const std::set<std::string>& LexicalKB::hypernyms_of(const std::string& label) const {
    auto it = hypernyms.find(label);
    return it == hypernyms.end() ? kEmptySet : it->second;
}

const std::set<std::string>& LexicalKB::hyponyms_of(const std::string& label) const {
    auto it = hyponyms.find(label);
    return it == hyponyms.end() ? kEmptySet : it->second;
}

bool LexicalKB::is_hypernym(const std::string& a, const std::string& b) const {
    if (hypernyms_of(b).count(a)) return true;
    if (hyponyms_of(a).count(b)) return true;
    return false;
}

LexicalKB LexicalKB::from_json(const nlohmann::json& j) {
    LexicalKB lex;
    auto read_map = [](const nlohmann::json& m, std::map<std::string, std::set<std::string>>& out) {
        for (const auto& [label, values] : m.items()) {
            std::set<std::string> set;
            for (const auto& v : values) set.insert(normalize_label(v.get<std::string>()));
            out[normalize_label(label)] = std::move(set);
        }
    };
    if (j.contains("hypernyms")) read_map(j["hypernyms"], lex.hypernyms);
    if (j.contains("hyponyms")) read_map(j["hyponyms"], lex.hyponyms);
    return lex;
}

LexicalKB LexicalKB::load(const std::filesystem::path& path) {
    return from_json(nlohmann::json::parse(read_text_file(path)));
}

const Concept* SceneSchema::match(const std::string& normalized_label) const {
    for (const auto& [id, c] : concepts) {
        if (c.label == normalized_label) return &c;
        if (c.aliases.count(normalized_label)) return &c;
    }
    return nullptr;
}

nlohmann::json SceneSchema::to_json() const {
    nlohmann::json j;
    j["scene"] = scene;
    j["gamma1"] = gamma1;
    nlohmann::json concept_list = nlohmann::json::array();
    for (const auto& [id, c] : concepts) {
        nlohmann::json cj;
        cj["id"] = c.id;
        cj["label"] = c.label;
        cj["stage"] = c.stage == ConceptStage::raw        ? "raw"
                      : c.stage == ConceptStage::expanded ? "expanded"
                                                          : "canonical";
        cj["aliases"] = c.aliases;
        cj["provenance"] = c.provenance.to_json();
        concept_list.push_back(std::move(cj));
    }
    j["concepts"] = std::move(concept_list);
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [child, parent] : hierarchy)
        edges.push_back({{"child", child}, {"parent", parent}});
    j["hierarchy"] = std::move(edges);
    return j;
}

SceneSchema SceneSchema::from_json(const nlohmann::json& j) {
    SceneSchema s;
    s.scene = j.value("scene", "");
    s.gamma1 = j.value("gamma1", 0.7);
    for (const auto& cj : j.value("concepts", nlohmann::json::array())) {
        Concept c;
        c.id = cj.at("id").get<std::string>();
        c.label = cj.at("label").get<std::string>();
        std::string stage = cj.value("stage", "canonical");
        c.stage = stage == "raw"        ? ConceptStage::raw
                  : stage == "expanded" ? ConceptStage::expanded
                                        : ConceptStage::canonical;
        for (const auto& a : cj.value("aliases", nlohmann::json::array()))
            c.aliases.insert(a.get<std::string>());
        if (cj.contains("provenance")) c.provenance = ConceptProvenance::from_json(cj["provenance"]);
        s.concepts[c.id] = std::move(c);
    }
    for (const auto& e : j.value("hierarchy", nlohmann::json::array()))
        s.hierarchy.emplace_back(e.at("child").get<std::string>(), e.at("parent").get<std::string>());
    return s;
}

SceneSchema SceneSchema::load(const std::filesystem::path& path) {
    return from_json(nlohmann::json::parse(read_text_file(path)));
}

void SceneSchema::save(const std::filesystem::path& path) const {
    write_text_file_atomic(path, to_json().dump(2) + "\n");
}

std::string build_prompt(const std::string& prompt_template, const std::string& scene,
                         const std::string& profile) {
    auto count = [&](const std::string& slot) {
        std::size_t n = 0;
        for (std::size_t pos = prompt_template.find(slot); pos != std::string::npos;
             pos = prompt_template.find(slot, pos + slot.size()))
            ++n;
        return n;
    };
    if (count("{S}") != 1)
        raise(ErrorKind::template_slot, "template must contain {S} exactly once");
    if (count("{W}") != 1)
        raise(ErrorKind::template_slot, "template must contain {W} exactly once");

    std::string out = prompt_template;
    out.replace(out.find("{S}"), 3, scene);
    out.replace(out.find("{W}"), 3, profile);
    return out;
}

std::vector<std::string> build_prompts(const SceneProfile& profile,
                                       const std::string& prompt_template) {
    std::vector<std::string> prompts;
    prompts.reserve(profile.profiles.size());
    for (const auto& w : profile.profiles)
        prompts.push_back(build_prompt(prompt_template, profile.scene, w));
    return prompts;
}

std::vector<std::string> parse_candidate_labels(const std::string& text) {
    std::vector<std::string> labels;
    for (const auto& piece : split_any(text, "\n,")) {
        std::string label = normalize_label(strip_list_marker(piece));
        if (!label.empty()) labels.push_back(std::move(label));
    }
    return labels;
}

std::vector<Concept> mine_concepts(const SceneProfile& profile,
                                   const std::string& prompt_template,
                                   const Provider& provider) {
    std::vector<Concept> concepts;
    std::set<std::string> seen;
    auto prompts = build_prompts(profile, prompt_template);
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        for (const auto& candidate : provider.complete(prompts[i])) {
            for (auto& label : parse_candidate_labels(candidate)) {
                if (!seen.insert(label).second) continue;
                Concept c;
                c.id = stable_id("concept", label);
                c.label = label;
                c.stage = ConceptStage::raw;
                c.provenance.kind = ConceptProvenance::Kind::prompt;
                c.provenance.prompt_index = static_cast<int>(i);
                concepts.push_back(std::move(c));
            }
        }
    }
    return concepts;
}

std::vector<Concept> expand_concepts(const std::vector<Concept>& raw, const LexicalKB& lex,
                                     int max_depth) {
    if (max_depth < 0) raise(ErrorKind::precondition, "expand_concepts: max_depth must be >= 0");

    std::vector<Concept> out;
    std::set<std::string> seen;
    for (const auto& c : raw) {
        if (!seen.insert(c.label).second) continue;
        Concept kept = c;
        kept.stage = ConceptStage::expanded;
        out.push_back(std::move(kept));
    }

    // Breadth-first closure through both lexicon directions.
    struct Frontier {
        std::string label;
        std::string source_id;
        int depth;
    };
    std::deque<Frontier> queue;
    for (const auto& c : raw) queue.push_back({c.label, c.id, 0});

    while (!queue.empty()) {
        Frontier f = queue.front();
        queue.pop_front();
        if (f.depth >= max_depth) continue;
        auto visit = [&](const std::string& label, ConceptProvenance::Kind kind) {
            std::string normalized = normalize_label(label);
            if (normalized.empty() || seen.count(normalized)) return;
            seen.insert(normalized);
            Concept c;
            c.id = stable_id("concept", normalized);
            c.label = normalized;
            c.stage = ConceptStage::expanded;
            c.provenance.kind = kind;
            c.provenance.source_id = f.source_id;
            out.push_back(c);
            queue.push_back({normalized, c.id, f.depth + 1});
        };
        for (const auto& h : lex.hypernyms_of(f.label)) visit(h, ConceptProvenance::Kind::hypernym_of);
        for (const auto& h : lex.hyponyms_of(f.label)) visit(h, ConceptProvenance::Kind::hyponym_of);
    }
    return out;
}

SceneSchema cluster_concepts(const std::string& scene, const std::vector<Concept>& expanded,
                             double gamma1, const EmbedFn& embed, const LexicalKB& lex) {
    if (gamma1 < 0.0 || gamma1 > 1.0)
        raise(ErrorKind::precondition, "cluster_concepts: gamma1 must be in [0,1]");

    std::map<std::string, Concept> by_label;
    std::vector<std::string> labels;
    for (const auto& c : expanded) {
        if (by_label.emplace(c.label, c).second) labels.push_back(c.label);
    }

    auto is_hyper = [&lex](const std::string& a, const std::string& b) {
        return lex.is_hypernym(a, b);
    };
    MergeResult merged = fixpoint_merge(labels, gamma1, embed, is_hyper);

    SceneSchema schema;
    schema.scene = scene;
    schema.gamma1 = gamma1;
    for (const auto& [canonical, members] : merged.clusters) {
        Concept c = by_label.at(canonical);
        c.stage = ConceptStage::canonical;
        if (members.size() > 1) {
            ConceptProvenance p;
            p.kind = ConceptProvenance::Kind::merged;
            for (const auto& m : members) p.merged_ids.push_back(by_label.at(m).id);
            c.provenance = std::move(p);
            for (const auto& m : members) {
                if (m == canonical) continue;
                c.aliases.insert(m);
                const auto& member_aliases = by_label.at(m).aliases;
                c.aliases.insert(member_aliases.begin(), member_aliases.end());
            }
        }
        schema.concepts[c.id] = std::move(c);
    }

    // Hierarchy: direct lexicon hypernym edges among canonical concepts,
    // skipping any edge that would close a cycle (edges processed in sorted
    // order for determinism).
    std::map<std::string, std::string> label_to_id;
    for (const auto& [id, c] : schema.concepts) label_to_id[c.label] = id;
    std::map<std::string, std::set<std::string>> parents; // child id -> parent ids
    auto reaches = [&](const std::string& from, const std::string& target) {
        std::deque<std::string> q{from};
        std::set<std::string> visited;
        while (!q.empty()) {
            std::string cur = q.front();
            q.pop_front();
            if (cur == target) return true;
            if (!visited.insert(cur).second) continue;
            for (const auto& p : parents[cur]) q.push_back(p);
        }
        return false;
    };
    for (const auto& [child_label, child_id] : label_to_id) {
        for (const auto& parent_label : lex.hypernyms_of(child_label)) {
            auto it = label_to_id.find(parent_label);
            if (it == label_to_id.end() || it->second == child_id) continue;
            if (reaches(it->second, child_id)) continue;
            if (parents[child_id].insert(it->second).second)
                schema.hierarchy.emplace_back(child_id, it->second);
        }
    }
    std::sort(schema.hierarchy.begin(), schema.hierarchy.end());
    return schema;
}

} // namespace smmkg
