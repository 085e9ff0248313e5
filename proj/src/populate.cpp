#include "smmkg/populate.hpp"

#include <fstream>
#include <sstream>

#include "smmkg/error.hpp"
#include "util.hpp"

namespace smmkg {

nlohmann::json SourceRecord::to_json() const {
    nlohmann::json j;
    j["head"] = head;
    j["relation"] = relation;
    switch (tail_kind) {
        case TailKind::entity:
            j["tail"] = {{"entity", tail_text}};
            break;
        case TailKind::literal:
            j["tail"] = {{"literal", tail_text}};
            break;
        case TailKind::image: {
            nlohmann::json img;
            img["uri"] = image ? image->uri : "";
            if (image && image->kind) img["kind"] = to_string(*image->kind);
            if (image && !image->caption.empty()) img["caption"] = image->caption;
            j["tail"] = {{"image", img}};
            break;
        }
    }
    j["source_id"] = source_id;
    j["source_kind"] = to_string(source_kind);
    return j;
}

SourceRecord SourceRecord::from_json(const nlohmann::json& j) {
    SourceRecord r;
    r.head = j.at("head").get<std::string>();
    r.relation = j.at("relation").get<std::string>();
    const auto& tail = j.at("tail");
    if (!tail.is_object() || tail.size() != 1)
        raise(ErrorKind::config, "record tail must be one of entity/literal/image");
    if (tail.contains("entity")) {
        r.tail_kind = TailKind::entity;
        r.tail_text = tail["entity"].get<std::string>();
    } else if (tail.contains("literal")) {
        r.tail_kind = TailKind::literal;
        r.tail_text = tail["literal"].get<std::string>();
    } else if (tail.contains("image")) {
        r.tail_kind = TailKind::image;
        ImageDescriptor d;
        const auto& img = tail["image"];
        d.uri = img.at("uri").get<std::string>();
        if (img.contains("kind")) {
            std::string kind = img["kind"].get<std::string>();
            if (kind == "synthetic")
                d.kind = ImageKind::synthetic;
            else if (kind == "real_world")
                d.kind = ImageKind::real_world;
            else
                raise(ErrorKind::config, "image kind must be synthetic or real_world");
        }
        d.caption = img.value("caption", "");
        r.image = std::move(d);
    } else {
        raise(ErrorKind::config, "record tail must be one of entity/literal/image");
    }
    r.source_id = j.at("source_id").get<std::string>();
    std::string sk = j.at("source_kind").get<std::string>();
    if (sk == "general")
        r.source_kind = TripleSource::general;
    else if (sk == "scene")
        r.source_kind = TripleSource::scene;
    else
        raise(ErrorKind::config, "source_kind must be general or scene");
    if (r.head.empty() || r.relation.empty())
        raise(ErrorKind::config, "record head and relation must be non-empty");
    return r;
}

RelationPolicy RelationPolicy::from_json(const nlohmann::json& j) {
    RelationPolicy p;
    for (const auto& [relation, value] : j.items()) {
        std::string v = value.get<std::string>();
        if (v == "functional")
            p.functional[relation] = true;
        else if (v == "multi_valued")
            p.functional[relation] = false;
        else
            raise(ErrorKind::config, "relation policy for '" + relation +
                                         "' must be functional or multi_valued");
    }
    return p;
}

RelationPolicy RelationPolicy::load(const std::filesystem::path& path) {
    return from_json(nlohmann::json::parse(read_text_file(path)));
}

std::vector<SourceRecord> read_source_records(const std::filesystem::path& path,
                                              std::vector<RejectEntry>* rejects) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::io, "cannot read records: " + path.string());
    std::vector<SourceRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            if (rejects)
                rejects->push_back({nlohmann::json{{"line", line_no}, {"raw", line}},
                                    "invalid JSON"});
            continue;
        }
        try {
            records.push_back(SourceRecord::from_json(j));
        } catch (const std::exception& e) {
            if (rejects) rejects->push_back({j, e.what()});
        }
    }
    return records;
}

void write_reject_log(const std::filesystem::path& path, const std::vector<RejectEntry>& rejects) {
    std::string body;
    for (const auto& r : rejects) {
        body += nlohmann::json{{"record", r.record}, {"reason", r.reason}}.dump();
        body += '\n';
    }
    write_text_file_atomic(path, body);
}

namespace {

// Creates (or reuses) the entity for a label, binding it to its schema
// concept when one matches.
std::string upsert_entity(SceneMMKG& graph, const SceneSchema& schema, const std::string& label) {
    std::string normalized = normalize_label(label);
    Entity e;
    e.label = normalized;
    if (const Concept* c = schema.match(normalized)) e.concept_id = c->id;
    return graph.add_entity(std::move(e));
}

// Shared filter + record-shape validation for both population passes.
// Returns true when the record was staged as a triple.
bool ingest_record(SceneMMKG& graph, const SourceRecord& record, bool allow_images,
                   std::vector<Triple>* staged, PopulateReport& report) {
    std::string head = normalize_label(record.head);
    if (head.empty()) {
        report.rejects.push_back({record.to_json(), "empty head"});
        ++report.rejected;
        return false;
    }
    const Concept* matched = graph.schema().match(head);
    if (!matched) {
        report.rejects.push_back({record.to_json(), "head outside schema boundary: " + head});
        ++report.filtered;
        return false;
    }
    if (record.tail_kind == TailKind::image) {
        if (!allow_images) {
            report.rejects.push_back(
                {record.to_json(), "image tails not permitted for general records"});
            ++report.rejected;
            return false;
        }
        if (!record.image || record.image->uri.empty()) {
            report.rejects.push_back({record.to_json(), "image tail missing uri"});
            ++report.rejected;
            return false;
        }
        if (!record.image->kind) {
            report.rejects.push_back({record.to_json(), "image tail missing kind"});
            ++report.rejected;
            return false;
        }
    }

    Triple t;
    t.head = upsert_entity(graph, graph.schema(), record.head);
    t.relation = normalize_label(record.relation);
    t.source = record.source_kind;
    t.provenance.insert(record.source_id);
    switch (record.tail_kind) {
        case TailKind::entity:
            t.tail = {TailKind::entity, upsert_entity(graph, graph.schema(), record.tail_text)};
            break;
        case TailKind::literal:
            t.tail = {TailKind::literal, record.tail_text};
            break;
        case TailKind::image: {
            ImageAsset asset;
            asset.uri = record.image->uri;
            asset.kind = *record.image->kind;
            asset.caption = record.image->caption;
            if (std::filesystem::exists(asset.uri)) asset.checksum = sha256_file(asset.uri);
            t.tail = {TailKind::image, graph.add_asset(std::move(asset))};
            break;
        }
    }
    if (staged)
        staged->push_back(std::move(t));
    else
        graph.add_triple(std::move(t));
    ++report.admitted;
    return true;
}

} // namespace

SceneMMKG populate_general(const SceneSchema& schema, const std::vector<SourceRecord>& records,
                           PopulateReport* report) {
    SceneMMKG graph(schema);
    PopulateReport local;
    for (const auto& record : records) {
        if (record.source_kind != TripleSource::general)
            raise(ErrorKind::precondition, "populate_general: record with scene source_kind");
        ingest_record(graph, record, /*allow_images=*/false, nullptr, local);
    }
    graph.log_stage("populate_general", {{"admitted", local.admitted},
                                         {"filtered", local.filtered},
                                         {"rejected", local.rejected}});
    if (report) *report = std::move(local);
    return graph;
}

SceneMMKG populate_scene(SceneMMKG graph, const std::vector<SourceRecord>& records,
                         const RelationPolicy& policy, PopulateReport* report) {
    if (graph.frozen()) raise(ErrorKind::precondition, "populate_scene: graph already frozen");
    PopulateReport local;
    std::vector<Triple> scene_triples;
    for (const auto& record : records) {
        if (record.source_kind != TripleSource::scene)
            raise(ErrorKind::precondition, "populate_scene: record with general source_kind");
        ingest_record(graph, record, /*allow_images=*/true, &scene_triples, local);
    }

    std::vector<Triple> general_triples;
    for (const auto& [key, t] : graph.triples()) general_triples.push_back(t);

    std::vector<Triple> merged = deconflict(general_triples, scene_triples, policy);

    SceneMMKG result(graph.schema());
    for (const auto& [id, e] : graph.entities()) result.add_entity(e);
    for (const auto& [id, a] : graph.assets()) result.add_asset(a);
    for (const auto& t : merged) result.add_triple(t);
    for (const auto& entry : graph.build_log()) result.log_stage(entry.stage, entry.details);
    result.log_stage("populate_scene", {{"admitted", local.admitted},
                                        {"filtered", local.filtered},
                                        {"rejected", local.rejected}});
    result.freeze();
    if (report) *report = std::move(local);
    return result;
}

std::vector<Triple> deconflict(const std::vector<Triple>& general,
                               const std::vector<Triple>& scene, const RelationPolicy& policy) {
    // Tail sets per (head, relation) decide functional conflicts.
    std::map<std::pair<std::string, std::string>, std::set<Tail>> scene_tails, all_tails;
    for (const auto& t : scene) {
        scene_tails[{t.head, t.relation}].insert(t.tail);
        all_tails[{t.head, t.relation}].insert(t.tail);
    }
    for (const auto& t : general) all_tails[{t.head, t.relation}].insert(t.tail);

    std::map<TripleKey, Triple> merged;
    auto upsert = [&](const Triple& t) {
        auto [it, inserted] = merged.emplace(key_of(t), t);
        if (!inserted) {
            it->second.provenance.insert(t.provenance.begin(), t.provenance.end());
            if (t.source == TripleSource::scene) it->second.source = TripleSource::scene;
        }
    };

    for (const auto& t : general) {
        auto key = std::make_pair(t.head, t.relation);
        if (policy.is_functional(t.relation)) {
            auto it = scene_tails.find(key);
            bool contested = it != scene_tails.end() && all_tails.at(key).size() > 1;
            if (contested) continue; // scene wins; drop every general tail
        }
        upsert(t);
    }
    for (const auto& t : scene) upsert(t);

    std::vector<Triple> out;
    out.reserve(merged.size());
    for (auto& [key, t] : merged) out.push_back(std::move(t));
    return out;
}

} // namespace smmkg
