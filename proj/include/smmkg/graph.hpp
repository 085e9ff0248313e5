#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "smmkg/schema.hpp"

namespace smmkg {

enum class TripleSource { general, scene };
enum class TailKind { entity, literal, image };
enum class ImageKind { synthetic, real_world };
enum class AttrLevel { entity_level, part_level };

const char* to_string(TripleSource s);
const char* to_string(TailKind k);
const char* to_string(ImageKind k);
const char* to_string(AttrLevel l);

struct Entity {
    std::string id;
    std::string label;
    std::string concept_id; // empty = not bound to a schema concept
    std::set<std::string> aliases;
};

struct Tail {
    TailKind kind = TailKind::literal;
    std::string value; // entity id, literal text, or image asset id

    friend auto operator<=>(const Tail&, const Tail&) = default;
};

struct Triple {
    std::string head; // entity id
    std::string relation;
    Tail tail;
    TripleSource source = TripleSource::general;
    std::set<std::string> provenance; // source record locators
};

struct ImageAsset {
    std::string id;
    std::string uri;
    std::string checksum; // sha256 of content when the file is present
    ImageKind kind = ImageKind::synthetic;
    std::string caption;
};

struct AttributeKey {
    std::string name;
    AttrLevel level = AttrLevel::entity_level;
    bool canonical = true;
    std::string alias_of; // canonical key name when !canonical
};

struct BuildLogEntry {
    std::string stage;
    nlohmann::json details;
};

struct GraphStats {
    uint64_t nodes = 0;
    uint64_t edges = 0;
    uint64_t images = 0;
    uint64_t distinct_attributes = 0;
    uint64_t general_edges = 0;
    uint64_t scene_edges = 0;

    nlohmann::json to_json() const;
};

struct NeighborFilter {
    std::optional<TripleSource> source;
    std::set<std::string> relations; // empty = any relation

    bool pass(const Triple& t) const;
};

struct ScoredAnchor {
    std::string id;
    double score = 0.0;
};

// H = (H_t, H_v): textual triples plus visual (image-tailed) triples anchored
// at retrieved entities. visual_scores aligns with visual once denoised.
struct RetrievedSubgraph {
    std::vector<ScoredAnchor> anchors;
    std::vector<Triple> textual;
    std::vector<Triple> visual;
    std::vector<double> visual_scores;
};

using TripleKey = std::tuple<std::string, std::string, TailKind, std::string>;

TripleKey key_of(const Triple& t);

// Typed multimodal graph store. Single writer while mutable; immutable and
// freely shareable once frozen.
class SceneMMKG {
public:
    SceneMMKG() = default;
    explicit SceneMMKG(SceneSchema schema) : schema_(std::move(schema)) {}

    const SceneSchema& schema() const { return schema_; }

    // Mutations: throw mutation error when frozen, integrity error on dangling
    // references. add_triple dedupes (head, relation, tail), merging provenance
    // and keeping scene as the source when the duplicates disagree.
    std::string add_entity(Entity entity);
    void add_triple(Triple triple);
    std::string add_asset(ImageAsset asset);
    void register_attribute(AttributeKey key);

    void freeze() { frozen_ = true; } // idempotent
    bool frozen() const { return frozen_; }
    void log_stage(const std::string& stage, nlohmann::json details);

    const std::map<std::string, Entity>& entities() const { return entities_; }
    const std::map<TripleKey, Triple>& triples() const { return triples_; }
    const std::map<std::string, ImageAsset>& assets() const { return assets_; }
    const std::map<std::string, AttributeKey>& attribute_keys() const { return attribute_keys_; }
    const std::vector<BuildLogEntry>& build_log() const { return build_log_; }

    const Entity* find_entity(const std::string& id) const;
    const ImageAsset* find_asset(const std::string& id) const;

    GraphStats stats() const;

    // All triples reachable within `hops` undirected steps from the entity,
    // partitioned into textual and visual parts. Literal and image tails are
    // leaves; traversal continues through entity tails only.
    RetrievedSubgraph neighbors(const std::string& entity_id, int hops,
                                const NeighborFilter& filter = {}) const;

    // Full-scan referential integrity check; throws integrity error.
    void check_integrity() const;

private:
    SceneSchema schema_;
    std::map<std::string, Entity> entities_;
    std::map<TripleKey, Triple> triples_;
    std::map<std::string, ImageAsset> assets_;
    std::map<std::string, AttributeKey> attribute_keys_;
    std::vector<BuildLogEntry> build_log_;
    bool frozen_ = false;

    void require_mutable() const;

    friend SceneMMKG load_graph(const std::filesystem::path& dir);
};

// Canonical on-disk layout: manifest.json + entities.jsonl + triples.jsonl +
// assets.jsonl + attributes.jsonl + schema.json, records sorted by kind then
// id, so save-load-save round-trips byte-identically. Returns the manifest.
nlohmann::json save_graph(const SceneMMKG& graph, const std::filesystem::path& dir);

// Verifies per-file checksums (corruption error naming the file) and the
// manifest version before reconstructing the graph.
SceneMMKG load_graph(const std::filesystem::path& dir);

} // namespace smmkg
