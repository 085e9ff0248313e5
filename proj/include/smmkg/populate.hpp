#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smmkg/graph.hpp"
#include "smmkg/schema.hpp"

namespace smmkg {

struct ImageDescriptor {
    std::string uri;
    std::optional<ImageKind> kind; // mandatory at ingest; reject when absent
    std::string caption;
};

// One ingest record from a general-KB extract or a scene collection.
struct SourceRecord {
    std::string head;
    std::string relation;
    TailKind tail_kind = TailKind::literal;
    std::string tail_text;                 // entity label or literal value
    std::optional<ImageDescriptor> image;  // tail_kind == image
    std::string source_id;
    TripleSource source_kind = TripleSource::general;

    nlohmann::json to_json() const;
    static SourceRecord from_json(const nlohmann::json& j);
};

// relation -> functional / multi_valued; total with default multi_valued.
struct RelationPolicy {
    std::map<std::string, bool> functional;

    bool is_functional(const std::string& relation) const {
        auto it = functional.find(relation);
        return it != functional.end() && it->second;
    }

    static RelationPolicy from_json(const nlohmann::json& j);
    static RelationPolicy load(const std::filesystem::path& path);
};

struct RejectEntry {
    nlohmann::json record;
    std::string reason;
};

struct PopulateReport {
    std::size_t admitted = 0;
    std::size_t filtered = 0; // head outside the schema boundary
    std::size_t rejected = 0; // malformed or invariant-violating records
    std::vector<RejectEntry> rejects;
};

// JSONL reader; malformed lines become rejects and the stream continues.
std::vector<SourceRecord> read_source_records(const std::filesystem::path& path,
                                              std::vector<RejectEntry>* rejects = nullptr);

void write_reject_log(const std::filesystem::path& path, const std::vector<RejectEntry>& rejects);

// Schema-filtered ingest of general-KB records: a record is admitted iff its
// normalized head label matches a canonical concept or alias.
SceneMMKG populate_general(const SceneSchema& schema, const std::vector<SourceRecord>& records,
                           PopulateReport* report = nullptr);

// Scene-oriented multimodal ingest over the intermediate graph, followed by
// scene-wins deconflicting. Returns the frozen graph.
SceneMMKG populate_scene(SceneMMKG graph, const std::vector<SourceRecord>& records,
                         const RelationPolicy& policy, PopulateReport* report = nullptr);

// Conflict = same (head, relation) with differing tails on a functional
// relation; all general tails for a contested pair are dropped. Identical
// triples from both sides dedupe to one scene-sourced triple.
std::vector<Triple> deconflict(const std::vector<Triple>& general,
                               const std::vector<Triple>& scene, const RelationPolicy& policy);

} // namespace smmkg
