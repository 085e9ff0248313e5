#include <fstream>

#include "smmkg/error.hpp"
#include "smmkg/graph.hpp"
#include "util.hpp"

namespace smmkg {

namespace {

constexpr int kLayoutVersion = 1;

nlohmann::json entity_to_json(const Entity& e) {
    return {{"id", e.id}, {"label", e.label}, {"concept_id", e.concept_id}, {"aliases", e.aliases}};
}

Entity entity_from_json(const nlohmann::json& j) {
    Entity e;
    e.id = j.at("id").get<std::string>();
    e.label = j.at("label").get<std::string>();
    e.concept_id = j.value("concept_id", "");
    for (const auto& a : j.value("aliases", nlohmann::json::array()))
        e.aliases.insert(a.get<std::string>());
    return e;
}

nlohmann::json triple_to_json(const Triple& t) {
    return {{"head", t.head},
            {"relation", t.relation},
            {"tail", {{"kind", to_string(t.tail.kind)}, {"value", t.tail.value}}},
            {"source", to_string(t.source)},
            {"provenance", t.provenance}};
}

TailKind tail_kind_from_string(const std::string& s) {
    if (s == "entity") return TailKind::entity;
    if (s == "literal") return TailKind::literal;
    if (s == "image") return TailKind::image;
    raise(ErrorKind::corruption, "unknown tail kind: " + s);
}

Triple triple_from_json(const nlohmann::json& j) {
    Triple t;
    t.head = j.at("head").get<std::string>();
    t.relation = j.at("relation").get<std::string>();
    t.tail.kind = tail_kind_from_string(j.at("tail").at("kind").get<std::string>());
    t.tail.value = j.at("tail").at("value").get<std::string>();
    t.source = j.at("source").get<std::string>() == "scene" ? TripleSource::scene
                                                            : TripleSource::general;
    for (const auto& p : j.value("provenance", nlohmann::json::array()))
        t.provenance.insert(p.get<std::string>());
    return t;
}

nlohmann::json asset_to_json(const ImageAsset& a) {
    return {{"id", a.id},
            {"uri", a.uri},
            {"checksum", a.checksum},
            {"kind", to_string(a.kind)},
            {"caption", a.caption}};
}

ImageAsset asset_from_json(const nlohmann::json& j) {
    ImageAsset a;
    a.id = j.at("id").get<std::string>();
    a.uri = j.at("uri").get<std::string>();
    a.checksum = j.value("checksum", "");
    a.kind = j.at("kind").get<std::string>() == "real_world" ? ImageKind::real_world
                                                             : ImageKind::synthetic;
    a.caption = j.value("caption", "");
    return a;
}

nlohmann::json attribute_to_json(const AttributeKey& k) {
    return {{"name", k.name},
            {"level", to_string(k.level)},
            {"canonical", k.canonical},
            {"alias_of", k.alias_of}};
}

AttributeKey attribute_from_json(const nlohmann::json& j) {
    AttributeKey k;
    k.name = j.at("name").get<std::string>();
    k.level = j.at("level").get<std::string>() == "part_level" ? AttrLevel::part_level
                                                               : AttrLevel::entity_level;
    k.canonical = j.value("canonical", true);
    k.alias_of = j.value("alias_of", "");
    return k;
}

std::string file_checksum_or_raise(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) raise(ErrorKind::io, "missing graph file: " + path.string());
    return sha256_file(path);
}

} // namespace

nlohmann::json save_graph(const SceneMMKG& graph, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::path tmp = dir;
    tmp += ".tmp";
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    auto write_jsonl = [&](const std::string& name, const std::vector<nlohmann::json>& records) {
        std::string body;
        for (const auto& r : records) {
            body += r.dump();
            body += '\n';
        }
        std::ofstream out(tmp / name, std::ios::binary | std::ios::trunc);
        if (!out) raise(ErrorKind::io, "cannot write " + (tmp / name).string());
        out << body;
    };

    std::vector<nlohmann::json> entities, triples, assets, attributes;
    for (const auto& [id, e] : graph.entities()) entities.push_back(entity_to_json(e));
    for (const auto& [key, t] : graph.triples()) triples.push_back(triple_to_json(t));
    for (const auto& [id, a] : graph.assets()) assets.push_back(asset_to_json(a));
    for (const auto& [name, k] : graph.attribute_keys()) attributes.push_back(attribute_to_json(k));

    write_jsonl("entities.jsonl", entities);
    write_jsonl("triples.jsonl", triples);
    write_jsonl("assets.jsonl", assets);
    write_jsonl("attributes.jsonl", attributes);
    {
        std::ofstream out(tmp / "schema.json", std::ios::binary | std::ios::trunc);
        out << graph.schema().to_json().dump(2) << "\n";
    }

    nlohmann::json manifest;
    manifest["version"] = kLayoutVersion;
    manifest["frozen"] = graph.frozen();
    manifest["counts"] = {{"entities", graph.entities().size()},
                          {"triples", graph.triples().size()},
                          {"assets", graph.assets().size()},
                          {"attribute_keys", graph.attribute_keys().size()}};
    nlohmann::json files;
    for (const char* name :
         {"entities.jsonl", "triples.jsonl", "assets.jsonl", "attributes.jsonl", "schema.json"})
        files[name] = sha256_file(tmp / name);
    manifest["files"] = std::move(files);
    nlohmann::json log = nlohmann::json::array();
    for (const auto& entry : graph.build_log())
        log.push_back({{"stage", entry.stage}, {"details", entry.details}});
    manifest["build_log"] = std::move(log);
    {
        std::ofstream out(tmp / "manifest.json", std::ios::binary | std::ios::trunc);
        out << manifest.dump(2) << "\n";
    }

    fs::remove_all(dir);
    fs::rename(tmp, dir);
    return manifest;
}

SceneMMKG load_graph(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path))
        raise(ErrorKind::io, "missing graph manifest: " + manifest_path.string());

    nlohmann::json manifest = nlohmann::json::parse(read_text_file(manifest_path), nullptr, false);
    if (manifest.is_discarded())
        raise(ErrorKind::corruption, "manifest is not valid JSON: " + manifest_path.string());
    int version = manifest.value("version", -1);
    if (version != kLayoutVersion)
        raise(ErrorKind::version, "unknown graph layout version " + std::to_string(version));

    for (const auto& [name, expected] : manifest.at("files").items()) {
        std::string actual = file_checksum_or_raise(dir / name);
        if (actual != expected.get<std::string>())
            raise(ErrorKind::corruption, "checksum mismatch in " + name);
    }

    SceneMMKG graph(SceneSchema::load(dir / "schema.json"));

    auto each_line = [&](const std::string& name, auto&& fn) {
        std::ifstream in(dir / name, std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded())
                raise(ErrorKind::corruption, "bad record in " + name);
            fn(j);
        }
    };

    each_line("entities.jsonl", [&](const nlohmann::json& j) { graph.add_entity(entity_from_json(j)); });
    each_line("assets.jsonl", [&](const nlohmann::json& j) { graph.add_asset(asset_from_json(j)); });
    each_line("triples.jsonl", [&](const nlohmann::json& j) { graph.add_triple(triple_from_json(j)); });
    each_line("attributes.jsonl",
              [&](const nlohmann::json& j) { graph.register_attribute(attribute_from_json(j)); });

    for (const auto& entry : manifest.value("build_log", nlohmann::json::array()))
        graph.log_stage(entry.at("stage").get<std::string>(),
                        entry.value("details", nlohmann::json::object()));

    if (manifest.value("frozen", false)) graph.freeze();
    graph.check_integrity();
    return graph;
}

} // namespace smmkg
