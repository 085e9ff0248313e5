#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "smmkg/error.hpp"
#include "smmkg/populate.hpp"
#include "test_support.hpp"
#include "util.hpp"

using namespace smmkg;
using namespace smmkg_test;

namespace {

SceneSchema toy_schema() {
    SceneSchema schema;
    schema.scene = "kitchen";
    for (const char* label : {"mug", "stove", "sink", "plate"}) {
        Concept c;
        c.id = stable_id("concept", label);
        c.label = label;
        c.stage = ConceptStage::canonical;
        schema.concepts[c.id] = c;
    }
    // "cup" resolves to mug through an alias.
    Concept& mug = schema.concepts[stable_id("concept", "mug")];
    mug.aliases.insert("cup");
    return schema;
}

SourceRecord literal_record(const std::string& head, const std::string& rel,
                            const std::string& value, TripleSource kind,
                            const std::string& source_id) {
    SourceRecord r;
    r.head = head;
    r.relation = rel;
    r.tail_kind = TailKind::literal;
    r.tail_text = value;
    r.source_id = source_id;
    r.source_kind = kind;
    return r;
}

SourceRecord image_record(const std::string& head, const std::string& uri,
                          std::optional<ImageKind> kind, const std::string& source_id) {
    SourceRecord r;
    r.head = head;
    r.relation = "has_image";
    r.tail_kind = TailKind::image;
    ImageDescriptor d;
    d.uri = uri;
    d.kind = kind;
    r.image = std::move(d);
    r.source_id = source_id;
    r.source_kind = TripleSource::scene;
    return r;
}

Triple literal_triple(const std::string& head_label, const std::string& rel,
                      const std::string& value, TripleSource src) {
    Triple t;
    t.head = stable_id("entity", head_label);
    t.relation = rel;
    t.tail = {TailKind::literal, value};
    t.source = src;
    t.provenance = {std::string(to_string(src)) + ":" + head_label + ":" + rel + ":" + value};
    return t;
}

std::set<TripleKey> keys_of(const std::vector<Triple>& ts) {
    std::set<TripleKey> out;
    for (const auto& t : ts) out.insert(key_of(t));
    return out;
}

} // namespace

TEST_CASE("schema boundary admits matching heads and filters the rest") {
    auto schema = toy_schema();
    PopulateReport report;
    std::vector<SourceRecord> records{
        literal_record("mug", "color", "red", TripleSource::general, "g1"),
        literal_record("Cup", "color", "blue", TripleSource::general, "g2"), // alias, normalized
        literal_record("carburetor", "part_of", "engine", TripleSource::general, "g3"),
    };
    auto graph = populate_general(schema, records, &report);

    CHECK(report.admitted == 2);
    CHECK(report.filtered == 1);
    REQUIRE(report.rejects.size() == 1);
    CHECK(report.rejects[0].reason.find("carburetor") != std::string::npos);
    CHECK(graph.stats().edges == 2);

    // Every head label sits inside the schema boundary.
    for (const auto& [key, t] : graph.triples()) {
        const Entity* head = graph.find_entity(t.head);
        REQUIRE(head != nullptr);
        CHECK(graph.schema().match(head->label) != nullptr);
    }
}

TEST_CASE("general records with image tails are rejected per-record") {
    auto schema = toy_schema();
    SourceRecord bad = image_record("mug", "m.png", ImageKind::synthetic, "g1");
    bad.source_kind = TripleSource::general;
    PopulateReport report;
    auto graph = populate_general(schema, {bad}, &report);
    CHECK(report.rejected == 1);
    CHECK(graph.stats().edges == 0);
}

TEST_CASE("populate_general requires general source_kind") {
    auto schema = toy_schema();
    CHECK_THROWS_AS(
        populate_general(schema, {literal_record("mug", "c", "v", TripleSource::scene, "s")}),
        Error);
}

TEST_CASE("admitted set equals the head/schema intersection oracle") {
    auto schema = toy_schema();
    std::mt19937 rng(41);
    std::vector<std::string> heads{"mug", "cup", "stove", "sink", "plate",
                                   "carburetor", "piston", "lamp"};
    std::uniform_int_distribution<int> pick(0, static_cast<int>(heads.size()) - 1);
    std::vector<SourceRecord> records;
    std::size_t oracle_admitted = 0;
    for (int i = 0; i < 1000; ++i) {
        std::string head = heads[pick(rng)];
        records.push_back(literal_record(head, "attr" + std::to_string(i % 7),
                                         "v" + std::to_string(i), TripleSource::general,
                                         "g" + std::to_string(i)));
        if (schema.match(head) != nullptr) ++oracle_admitted;
    }
    PopulateReport report;
    populate_general(schema, records, &report);
    CHECK(report.admitted == oracle_admitted);
    CHECK(report.filtered == records.size() - oracle_admitted);
}

TEST_CASE("scene image descriptors become assets with mandatory kind") {
    auto schema = toy_schema();
    auto intermediate = populate_general(schema, {});
    PopulateReport report;
    RelationPolicy policy;
    auto graph = populate_scene(std::move(intermediate),
                                {image_record("mug", "images/mug.png", ImageKind::synthetic, "s1"),
                                 image_record("stove", "images/stove.jpg", std::nullopt, "s2")},
                                policy, &report);

    CHECK(report.admitted == 1);
    CHECK(report.rejected == 1);
    REQUIRE(report.rejects.size() == 1);
    CHECK(report.rejects[0].reason.find("kind") != std::string::npos);

    REQUIRE(graph.assets().size() == 1);
    const ImageAsset& asset = graph.assets().begin()->second;
    CHECK(asset.uri == "images/mug.png");
    CHECK(asset.kind == ImageKind::synthetic);
    REQUIRE(graph.stats().edges == 1);
    CHECK(graph.triples().begin()->second.tail.kind == TailKind::image);
    CHECK(graph.triples().begin()->second.tail.value == asset.id);
    CHECK(graph.frozen());
}

TEST_CASE("scene heads outside the schema are filtered") {
    auto schema = toy_schema();
    auto graph = populate_scene(populate_general(schema, {}),
                                {literal_record("toaster", "color", "silver",
                                                TripleSource::scene, "s1")},
                                RelationPolicy{});
    CHECK(graph.stats().edges == 0);
}

TEST_CASE("deconflict keeps the scene tail for contested functional relations") {
    RelationPolicy policy;
    policy.functional["color"] = true;
    std::vector<Triple> general{literal_triple("mug", "color", "red", TripleSource::general)};
    std::vector<Triple> scene{literal_triple("mug", "color", "white", TripleSource::scene)};
    auto merged = deconflict(general, scene, policy);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].tail.value == "white");
    CHECK(merged[0].source == TripleSource::scene);
}

TEST_CASE("deconflict unions disjoint relations") {
    RelationPolicy policy;
    policy.functional["color"] = true;
    std::vector<Triple> general{literal_triple("mug", "color", "red", TripleSource::general)};
    std::vector<Triple> scene{literal_triple("mug", "has_use", "drinking", TripleSource::scene)};
    auto merged = deconflict(general, scene, policy);
    CHECK(merged.size() == 2);
}

TEST_CASE("identical triples from both sources dedupe to scene") {
    RelationPolicy policy;
    policy.functional["color"] = true;
    Triple g = literal_triple("mug", "color", "red", TripleSource::general);
    Triple s = literal_triple("mug", "color", "red", TripleSource::scene);
    auto merged = deconflict({g}, {s}, policy);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].source == TripleSource::scene);
    // provenance from both sides survives the dedupe
    CHECK(merged[0].provenance.size() == 2);
}

TEST_CASE("multi_valued relations union rather than conflict") {
    RelationPolicy policy; // default multi_valued
    std::vector<Triple> general{literal_triple("mug", "has_use", "drinking", TripleSource::general)};
    std::vector<Triple> scene{literal_triple("mug", "has_use", "serving soup", TripleSource::scene)};
    auto merged = deconflict(general, scene, policy);
    CHECK(merged.size() == 2);
}

TEST_CASE("scene-wins holds over randomized conflict corpora") {
    std::mt19937 rng(43);
    std::uniform_int_distribution<int> head(0, 9);
    std::uniform_int_distribution<int> rel(0, 4);
    std::uniform_int_distribution<int> value(0, 3);
    RelationPolicy policy;
    policy.functional["r0"] = true;
    policy.functional["r1"] = true;

    for (int round = 0; round < 100; ++round) {
        std::vector<Triple> general, scene;
        for (int i = 0; i < 30; ++i)
            general.push_back(literal_triple("h" + std::to_string(head(rng)),
                                             "r" + std::to_string(rel(rng)),
                                             "v" + std::to_string(value(rng)),
                                             TripleSource::general));
        for (int i = 0; i < 15; ++i)
            scene.push_back(literal_triple("h" + std::to_string(head(rng)),
                                           "r" + std::to_string(rel(rng)),
                                           "v" + std::to_string(value(rng)),
                                           TripleSource::scene));
        auto merged = deconflict(general, scene, policy);

        // For every contested functional (head, relation): no general tail.
        std::map<std::pair<std::string, std::string>, std::set<std::string>> scene_tails;
        std::map<std::pair<std::string, std::string>, std::set<std::string>> all_tails;
        for (const auto& t : scene) {
            scene_tails[{t.head, t.relation}].insert(t.tail.value);
            all_tails[{t.head, t.relation}].insert(t.tail.value);
        }
        for (const auto& t : general) all_tails[{t.head, t.relation}].insert(t.tail.value);

        std::set<TripleKey> scene_keys = keys_of(scene);
        for (const auto& t : merged) {
            if (!policy.is_functional(t.relation)) continue;
            auto key = std::make_pair(t.head, t.relation);
            auto it = scene_tails.find(key);
            bool contested = it != scene_tails.end() && all_tails.at(key).size() > 1;
            if (contested) CHECK(scene_keys.count(key_of(t)) == 1);
        }

        // Idempotence: re-deconflicting the output's parts is a no-op.
        std::vector<Triple> out_general, out_scene;
        for (const auto& t : merged)
            (t.source == TripleSource::general ? out_general : out_scene).push_back(t);
        auto again = deconflict(out_general, out_scene, policy);
        CHECK(keys_of(again) == keys_of(merged));
        CHECK(again.size() == merged.size());
    }
}

TEST_CASE("populate is insensitive to record order") {
    TempDir dir("poporder");
    auto schema = toy_schema();
    std::vector<SourceRecord> general{
        literal_record("mug", "color", "red", TripleSource::general, "g1"),
        literal_record("stove", "color", "black", TripleSource::general, "g2"),
        literal_record("plate", "material", "porcelain", TripleSource::general, "g3"),
        literal_record("mug", "has_use", "drinking", TripleSource::general, "g4"),
    };
    std::vector<SourceRecord> scene{
        literal_record("mug", "color", "white", TripleSource::scene, "s1"),
        image_record("mug", "images/mug.png", ImageKind::synthetic, "s2"),
        literal_record("sink", "material", "steel", TripleSource::scene, "s3"),
    };
    RelationPolicy policy;
    policy.functional["color"] = true;

    auto build = [&](std::vector<SourceRecord> g, std::vector<SourceRecord> s,
                     const fs::path& out) {
        auto graph = populate_scene(populate_general(schema, g), s, policy);
        save_graph(graph, out);
    };
    build(general, scene, dir.path() / "a");
    std::reverse(general.begin(), general.end());
    std::reverse(scene.begin(), scene.end());
    build(general, scene, dir.path() / "b");

    for (const char* name : {"entities.jsonl", "triples.jsonl", "assets.jsonl",
                             "attributes.jsonl", "schema.json"})
        CHECK(slurp(dir.path() / "a" / name) == slurp(dir.path() / "b" / name));
}

TEST_CASE("record JSONL reader logs malformed lines and continues") {
    TempDir dir("popio");
    auto path = dir.path() / "records.jsonl";
    std::ofstream(path) << R"({"head":"mug","relation":"color","tail":{"literal":"red"},"source_id":"g1","source_kind":"general"})"
                        << "\n"
                        << "not json at all\n"
                        << R"({"head":"mug","relation":"x","tail":{"bogus":"y"},"source_id":"g2","source_kind":"general"})"
                        << "\n";
    std::vector<RejectEntry> rejects;
    auto records = read_source_records(path, &rejects);
    CHECK(records.size() == 1);
    CHECK(rejects.size() == 2);
}

TEST_CASE("source records round-trip through JSON") {
    auto r = image_record("mug", "images/mug.png", ImageKind::real_world, "s9");
    r.image->caption = "a mug";
    auto back = SourceRecord::from_json(r.to_json());
    CHECK(back.head == r.head);
    CHECK(back.tail_kind == TailKind::image);
    REQUIRE(back.image.has_value());
    CHECK(back.image->uri == r.image->uri);
    CHECK(back.image->kind == ImageKind::real_world);
    CHECK(back.image->caption == "a mug");
}
