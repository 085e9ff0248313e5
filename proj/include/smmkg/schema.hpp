#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "smmkg/provider.hpp"

namespace smmkg {

// Natural-language descriptions characterizing one scene.
struct SceneProfile {
    std::string scene;
    std::vector<std::string> profiles;

    static SceneProfile from_json(const nlohmann::json& j);
    static SceneProfile load(const std::filesystem::path& path);
};

enum class ConceptStage { raw, expanded, canonical };

struct ConceptProvenance {
    enum class Kind { prompt, hypernym_of, hyponym_of, merged };
    Kind kind = Kind::prompt;
    int prompt_index = -1;                // kind == prompt
    std::string source_id;                // kind == hypernym_of / hyponym_of
    std::vector<std::string> merged_ids;  // kind == merged

    nlohmann::json to_json() const;
    static ConceptProvenance from_json(const nlohmann::json& j);
};

struct Concept {
    std::string id;
    std::string label;
    ConceptStage stage = ConceptStage::raw;
    std::set<std::string> aliases;
    ConceptProvenance provenance;
};

// Hypernym/hyponym lookup maps; lookups are total (missing label -> empty).
struct LexicalKB {
    std::map<std::string, std::set<std::string>> hypernyms;
    std::map<std::string, std::set<std::string>> hyponyms;

    const std::set<std::string>& hypernyms_of(const std::string& label) const;
    const std::set<std::string>& hyponyms_of(const std::string& label) const;

    // True when `a` is a hypernym of `b` per either map.
    bool is_hypernym(const std::string& a, const std::string& b) const;

    static LexicalKB from_json(const nlohmann::json& j);
    static LexicalKB load(const std::filesystem::path& path);
};

// Canonical concept set + hypernym hierarchy; the boundary of admitted
// knowledge during population.
struct SceneSchema {
    std::string scene;
    std::map<std::string, Concept> concepts; // by id, all canonical
    std::vector<std::pair<std::string, std::string>> hierarchy; // (child id, parent id)
    double gamma1 = 0.7;

    // Matches a normalized label against canonical labels and aliases.
    const Concept* match(const std::string& normalized_label) const;

    nlohmann::json to_json() const;
    static SceneSchema from_json(const nlohmann::json& j);
    static SceneSchema load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

// Fills the {S} and {W} slots; each slot must appear exactly once.
std::string build_prompt(const std::string& prompt_template, const std::string& scene,
                         const std::string& profile);

std::vector<std::string> build_prompts(const SceneProfile& profile,
                                       const std::string& prompt_template);

// Splits an LLM candidate on newlines/commas, strips list markers, normalizes.
std::vector<std::string> parse_candidate_labels(const std::string& text);

// One prompt per profile entry; union of parsed candidate labels, deduped by
// label, each carrying the index of the prompt that produced it.
std::vector<Concept> mine_concepts(const SceneProfile& profile,
                                   const std::string& prompt_template,
                                   const Provider& provider);

// Hypernym/hyponym closure up to max_depth; dedupe by label keeps the first
// provenance encountered.
std::vector<Concept> expand_concepts(const std::vector<Concept>& raw, const LexicalKB& lex,
                                     int max_depth = 2);

// Fixpoint merge of concepts whose label-embedding cosine reaches gamma1.
// The hypernym (per lex) survives a merge; otherwise the lexicographically
// smaller label does. Returns the schema with hierarchy edges drawn from lex.
SceneSchema cluster_concepts(const std::string& scene, const std::vector<Concept>& expanded,
                             double gamma1, const EmbedFn& embed, const LexicalKB& lex = {});

} // namespace smmkg
