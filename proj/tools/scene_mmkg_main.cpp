// scene-mmkg: batch pipeline driver
//   schema -> populate -> refine -> stats -> retrieve/encode -> export

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "smmkg/error.hpp"
#include "smmkg/graph.hpp"
#include "smmkg/populate.hpp"
#include "smmkg/provider.hpp"
#include "smmkg/refine.hpp"
#include "smmkg/schema.hpp"
#include "smmkg/skr.hpp"
#include "util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(smmkg::ErrorKind kind) {
    switch (kind) {
        case smmkg::ErrorKind::io:
        case smmkg::ErrorKind::config:
        case smmkg::ErrorKind::template_slot:
        case smmkg::ErrorKind::precondition:
            return 2;
        case smmkg::ErrorKind::transport:
            return 3;
        case smmkg::ErrorKind::integrity:
        case smmkg::ErrorKind::corruption:
        case smmkg::ErrorKind::version:
        case smmkg::ErrorKind::mutation:
            return 4;
        default:
            return 1;
    }
}

struct PipelineConfig {
    std::string scene_profile;
    std::string prompt_template;
    std::string lexical_kb;
    std::string part_lexicon;
    std::string relation_policy;
    std::string general_records;
    std::string scene_records;
    std::string schema_path;
    std::string graph_dir;
    std::string refined_dir;
    std::string report_path;
    json provider = {{"mode", "fixture"}};
    double gamma1 = 0.7;
    double gamma2 = 0.7;
    double gamma3 = 0.3;
};

// Flag overrides use the dotted name of each config field; flags win over the
// config file.
struct Overrides {
    std::map<std::string, std::string> strings;
    std::map<std::string, double> doubles;
};

PipelineConfig load_config(const std::string& path, const Overrides& ov) {
    json j = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) smmkg::raise(smmkg::ErrorKind::io, "cannot read config: " + path);
        j = json::parse(in, nullptr, false);
        if (j.is_discarded())
            smmkg::raise(smmkg::ErrorKind::config, "config is not valid JSON: " + path);
    }
    // Paths in the config resolve relative to the config file's directory.
    fs::path base = path.empty() ? fs::path(".") : fs::path(path).parent_path();
    auto resolve = [&](std::string value) {
        if (value.empty() || fs::path(value).is_absolute()) return value;
        return (base / value).lexically_normal().string();
    };

    PipelineConfig cfg;
    auto pick = [&](const char* key, std::string& out, bool is_path = true) {
        if (j.contains(key)) out = is_path ? resolve(j[key].get<std::string>()) : j[key].get<std::string>();
        if (auto it = ov.strings.find(key); it != ov.strings.end()) out = it->second;
    };
    pick("scene_profile", cfg.scene_profile);
    pick("template", cfg.prompt_template);
    pick("lexical_kb", cfg.lexical_kb);
    pick("part_lexicon", cfg.part_lexicon);
    pick("relation_policy", cfg.relation_policy);
    pick("general_records", cfg.general_records);
    pick("scene_records", cfg.scene_records);
    pick("schema_path", cfg.schema_path);
    pick("graph_dir", cfg.graph_dir);
    pick("refined_dir", cfg.refined_dir);
    pick("report_path", cfg.report_path);

    if (j.contains("provider")) cfg.provider = j["provider"];
    for (const char* key : {"provider.mode", "provider.endpoint", "provider.fixture_path"}) {
        if (auto it = ov.strings.find(key); it != ov.strings.end())
            cfg.provider[std::string(key).substr(9)] = it->second;
    }
    if (cfg.provider.contains("fixture_path"))
        cfg.provider["fixture_path"] = resolve(cfg.provider["fixture_path"].get<std::string>());

    if (j.contains("thresholds")) {
        cfg.gamma1 = j["thresholds"].value("gamma1", cfg.gamma1);
        cfg.gamma2 = j["thresholds"].value("gamma2", cfg.gamma2);
        cfg.gamma3 = j["thresholds"].value("gamma3", cfg.gamma3);
    }
    if (auto it = ov.doubles.find("thresholds.gamma1"); it != ov.doubles.end()) cfg.gamma1 = it->second;
    if (auto it = ov.doubles.find("thresholds.gamma2"); it != ov.doubles.end()) cfg.gamma2 = it->second;
    if (auto it = ov.doubles.find("thresholds.gamma3"); it != ov.doubles.end()) cfg.gamma3 = it->second;

    if (cfg.gamma1 < 0 || cfg.gamma1 > 1 || cfg.gamma2 < 0 || cfg.gamma2 > 1)
        smmkg::raise(smmkg::ErrorKind::config, "gamma1/gamma2 must be in [0,1]");
    if (cfg.gamma3 < -1 || cfg.gamma3 > 1)
        smmkg::raise(smmkg::ErrorKind::config, "gamma3 must be in [-1,1]");
    return cfg;
}

void require_file(const std::string& path, const char* what) {
    if (path.empty())
        smmkg::raise(smmkg::ErrorKind::config, std::string("config missing ") + what);
    if (!fs::exists(path))
        smmkg::raise(smmkg::ErrorKind::io, std::string(what) + " not found: " + path);
}

smmkg::Provider make_provider(const PipelineConfig& cfg) {
    return smmkg::Provider(smmkg::ProviderConfig::from_json(cfg.provider));
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_schema(const PipelineConfig& cfg) {
    require_file(cfg.scene_profile, "scene_profile");
    require_file(cfg.prompt_template, "template");
    require_file(cfg.lexical_kb, "lexical_kb");
    if (cfg.schema_path.empty())
        smmkg::raise(smmkg::ErrorKind::config, "config missing schema_path");

    auto profile = smmkg::SceneProfile::load(cfg.scene_profile);
    std::string prompt_template = smmkg::read_text_file_trimmed(cfg.prompt_template);
    auto lex = smmkg::LexicalKB::load(cfg.lexical_kb);
    auto provider = make_provider(cfg);

    auto raw = smmkg::mine_concepts(profile, prompt_template, provider);
    auto expanded = smmkg::expand_concepts(raw, lex);
    auto schema =
        smmkg::cluster_concepts(profile.scene, expanded, cfg.gamma1, provider.embedder(), lex);

    fs::create_directories(fs::path(cfg.schema_path).parent_path());
    schema.save(cfg.schema_path);
    emit({{"schema_path", cfg.schema_path},
          {"raw_concepts", raw.size()},
          {"expanded_concepts", expanded.size()},
          {"canonical_concepts", schema.concepts.size()}});
    return 0;
}

int cmd_populate(const PipelineConfig& cfg) {
    require_file(cfg.schema_path, "schema_path");
    require_file(cfg.general_records, "general_records");
    require_file(cfg.scene_records, "scene_records");
    require_file(cfg.relation_policy, "relation_policy");
    if (cfg.graph_dir.empty()) smmkg::raise(smmkg::ErrorKind::config, "config missing graph_dir");

    auto schema = smmkg::SceneSchema::load(cfg.schema_path);
    auto policy = smmkg::RelationPolicy::load(cfg.relation_policy);

    std::vector<smmkg::RejectEntry> parse_rejects;
    auto general = smmkg::read_source_records(cfg.general_records, &parse_rejects);
    auto scene = smmkg::read_source_records(cfg.scene_records, &parse_rejects);

    smmkg::PopulateReport general_report, scene_report;
    auto intermediate = smmkg::populate_general(schema, general, &general_report);
    auto graph = smmkg::populate_scene(std::move(intermediate), scene, policy, &scene_report);
    graph.check_integrity();

    smmkg::save_graph(graph, cfg.graph_dir);

    std::vector<smmkg::RejectEntry> all_rejects = std::move(parse_rejects);
    for (auto& r : general_report.rejects) all_rejects.push_back(std::move(r));
    for (auto& r : scene_report.rejects) all_rejects.push_back(std::move(r));
    smmkg::write_reject_log(fs::path(cfg.graph_dir) / "rejects.jsonl", all_rejects);

    emit({{"graph_dir", cfg.graph_dir},
          {"stats", graph.stats().to_json()},
          {"general", {{"admitted", general_report.admitted}, {"filtered", general_report.filtered}, {"rejected", general_report.rejected}}},
          {"scene", {{"admitted", scene_report.admitted}, {"filtered", scene_report.filtered}, {"rejected", scene_report.rejected}}}});
    return 0;
}

int cmd_refine(const PipelineConfig& cfg, const std::string& csv_path) {
    if (cfg.graph_dir.empty()) smmkg::raise(smmkg::ErrorKind::config, "config missing graph_dir");
    require_file(cfg.graph_dir, "graph_dir");
    require_file(cfg.part_lexicon, "part_lexicon");
    if (cfg.refined_dir.empty())
        smmkg::raise(smmkg::ErrorKind::config, "config missing refined_dir");

    auto graph = smmkg::load_graph(cfg.graph_dir);
    auto lex = smmkg::PartLexicon::load(cfg.part_lexicon);
    auto provider = make_provider(cfg);

    auto [refined, report] = smmkg::qcr(graph, lex, cfg.gamma2, provider.embedder());
    smmkg::save_graph(refined, cfg.refined_dir);

    std::string report_path = cfg.report_path.empty()
                                  ? (fs::path(cfg.refined_dir) / "report.json").string()
                                  : cfg.report_path;
    fs::create_directories(fs::path(report_path).parent_path());
    smmkg::write_text_file_atomic(report_path, report.to_json().dump(2) + "\n");
    if (!csv_path.empty())
        smmkg::write_text_file_atomic(csv_path, smmkg::cdf_to_csv(report.cdf_after));

    emit({{"refined_dir", cfg.refined_dir}, {"report_path", report_path}, {"report", report.to_json()}});
    return 0;
}

int cmd_stats(const std::string& graph_dir) {
    require_file(graph_dir, "graph_dir");
    auto graph = smmkg::load_graph(graph_dir);
    emit(graph.stats().to_json());
    return 0;
}

smmkg::Query make_query(const std::string& text, const std::string& observation_file,
                        std::size_t k) {
    smmkg::Query q;
    q.text = text;
    q.k = k;
    if (!observation_file.empty()) {
        json j = json::parse(smmkg::read_text_file(observation_file));
        smmkg::Embedding obs;
        for (const auto& v : j) obs.values.push_back(v.get<double>());
        q.observation = std::move(obs);
    }
    return q;
}

int cmd_retrieve(const PipelineConfig& cfg, const std::string& graph_dir, const std::string& query,
                 const std::string& observation_file, std::size_t k, double gamma3, int hops) {
    require_file(graph_dir, "graph_dir");
    auto graph = smmkg::load_graph(graph_dir);
    auto provider = make_provider(cfg);
    auto embed = provider.embedder();

    smmkg::Query q = make_query(query, observation_file, k);
    auto anchors = smmkg::retrieve(q, graph, embed);
    auto subgraph = smmkg::expand(anchors, graph, hops);
    smmkg::Embedding observation =
        q.observation ? *q.observation : embed(q.text);
    subgraph = smmkg::denoise(subgraph, observation, gamma3, graph, embed);

    json anchor_list = json::array();
    for (const auto& a : anchors) {
        const smmkg::Entity* e = graph.find_entity(a.id);
        anchor_list.push_back({{"id", a.id}, {"label", e ? e->label : ""}, {"score", a.score}});
    }
    auto triple_list = [&](const std::vector<smmkg::Triple>& ts) {
        json out = json::array();
        for (const auto& t : ts) {
            json tj = {{"head", t.head},
                       {"relation", t.relation},
                       {"tail", {{"kind", smmkg::to_string(t.tail.kind)}, {"value", t.tail.value}}},
                       {"source", smmkg::to_string(t.source)}};
            out.push_back(std::move(tj));
        }
        return out;
    };
    json scores = json::array();
    for (double s : subgraph.visual_scores) scores.push_back(s);
    emit({{"anchors", anchor_list},
          {"h_t", triple_list(subgraph.textual)},
          {"h_v", triple_list(subgraph.visual)},
          {"h_v_scores", scores}});
    return 0;
}

int cmd_encode(const PipelineConfig& cfg, const std::string& graph_dir, const std::string& query,
               const std::string& observation_file, const std::string& params_path,
               const std::string& out_path, const std::string& format, std::size_t k,
               double gamma3, int hops, bool pool) {
    require_file(graph_dir, "graph_dir");
    require_file(params_path, "params");
    auto graph = smmkg::load_graph(graph_dir);
    auto params = smmkg::GcnParameters::load(params_path);
    auto provider = make_provider(cfg);
    auto embed = provider.embedder();

    smmkg::Query q = make_query(query, observation_file, k);
    auto anchors = smmkg::retrieve(q, graph, embed);
    auto subgraph = smmkg::expand(anchors, graph, hops);
    smmkg::Embedding observation = q.observation ? *q.observation : embed(q.text);
    subgraph = smmkg::denoise(subgraph, observation, gamma3, graph, embed);

    auto features = smmkg::encode(subgraph, graph, params, embed);

    std::string body;
    if (format == "csv") {
        body = smmkg::feature_matrix_to_csv(features);
    } else {
        json j = smmkg::feature_matrix_to_json(features);
        if (pool) {
            auto pooled = smmkg::pool_anchor_mean(features, anchors);
            j["pooled"] = pooled.values;
        }
        body = j.dump(2) + "\n";
    }
    if (fs::path(out_path).has_parent_path())
        fs::create_directories(fs::path(out_path).parent_path());
    smmkg::write_text_file_atomic(out_path, body);
    emit({{"out", out_path}, {"rows", features.rows}, {"cols", features.cols}});
    return 0;
}

int cmd_export(const std::string& graph_dir, const std::string& format,
               const std::string& out_path) {
    require_file(graph_dir, "graph_dir");
    auto graph = smmkg::load_graph(graph_dir);

    std::string body;
    if (format == "csv") {
        body = "head,relation,tail_kind,tail,source\n";
        auto escape = [](const std::string& s) {
            if (s.find_first_of(",\"\n") == std::string::npos) return s;
            std::string out = "\"";
            for (char c : s) {
                if (c == '"') out += "\"\"";
                else out.push_back(c);
            }
            out += "\"";
            return out;
        };
        for (const auto& [key, t] : graph.triples()) {
            body += escape(t.head) + "," + escape(t.relation) + "," +
                    smmkg::to_string(t.tail.kind) + "," + escape(t.tail.value) + "," +
                    smmkg::to_string(t.source) + "\n";
        }
    } else if (format == "jsonl") {
        for (const auto& [id, e] : graph.entities()) {
            json j = {{"kind", "entity"}, {"id", e.id}, {"label", e.label},
                      {"concept_id", e.concept_id}, {"aliases", e.aliases}};
            body += j.dump() + "\n";
        }
        for (const auto& [id, a] : graph.assets()) {
            json j = {{"kind", "asset"}, {"id", a.id}, {"uri", a.uri},
                      {"checksum", a.checksum}, {"image_kind", smmkg::to_string(a.kind)},
                      {"caption", a.caption}};
            body += j.dump() + "\n";
        }
        for (const auto& [key, t] : graph.triples()) {
            json j = {{"kind", "triple"}, {"head", t.head}, {"relation", t.relation},
                      {"tail", {{"kind", smmkg::to_string(t.tail.kind)}, {"value", t.tail.value}}},
                      {"source", smmkg::to_string(t.source)}, {"provenance", t.provenance}};
            body += j.dump() + "\n";
        }
    } else {
        smmkg::raise(smmkg::ErrorKind::config, "export format must be jsonl or csv");
    }
    if (fs::path(out_path).has_parent_path())
        fs::create_directories(fs::path(out_path).parent_path());
    smmkg::write_text_file_atomic(out_path, body);
    emit({{"out", out_path}, {"format", format}});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scene-driven multimodal knowledge graph pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Pipeline config JSON");
        for (const char* key :
             {"scene_profile", "template", "lexical_kb", "part_lexicon", "relation_policy",
              "general_records", "scene_records", "schema_path", "graph_dir", "refined_dir",
              "report_path", "provider.mode", "provider.endpoint", "provider.fixture_path"}) {
            cmd->add_option_function<std::string>(
                std::string("--") + key,
                [&overrides, key](const std::string& v) { overrides.strings[key] = v; });
        }
        for (const char* key : {"thresholds.gamma1", "thresholds.gamma2", "thresholds.gamma3"}) {
            cmd->add_option_function<double>(
                std::string("--") + key,
                [&overrides, key](double v) { overrides.doubles[key] = v; });
        }
    };

    auto* schema_cmd = app.add_subcommand("schema", "Mine, expand, and cluster the scene schema");
    add_common(schema_cmd);

    auto* populate_cmd = app.add_subcommand("populate", "Populate the graph from record streams");
    add_common(populate_cmd);

    auto* refine_cmd = app.add_subcommand("refine", "Quality control & refinement");
    add_common(refine_cmd);
    std::string refine_csv;
    refine_cmd->add_option("--csv", refine_csv, "Optional CDF CSV output path");

    std::string graph_dir, query, observation_file, params_path, out_path, format = "json";
    std::size_t top_k = 1;
    double gamma3 = 0.3;
    int hops = 1;
    bool pool = false;

    auto* stats_cmd = app.add_subcommand("stats", "Graph statistics");
    stats_cmd->add_option("--graph", graph_dir, "Graph directory")->required();

    auto* retrieve_cmd = app.add_subcommand("retrieve", "Retrieve a scored subgraph for a query");
    add_common(retrieve_cmd);
    retrieve_cmd->add_option("--graph", graph_dir, "Graph directory")->required();
    retrieve_cmd->add_option("--query", query, "Query text");
    retrieve_cmd->add_option("--observation-file", observation_file, "JSON array observation vector");
    retrieve_cmd->add_option("--k", top_k, "Top-k anchors");
    retrieve_cmd->add_option("--gamma3", gamma3, "Denoise threshold");
    retrieve_cmd->add_option("--hops", hops, "Expansion hops");

    auto* encode_cmd = app.add_subcommand("encode", "Encode retrieved knowledge with the GCN");
    add_common(encode_cmd);
    encode_cmd->add_option("--graph", graph_dir, "Graph directory")->required();
    encode_cmd->add_option("--query", query, "Query text");
    encode_cmd->add_option("--observation-file", observation_file, "JSON array observation vector");
    encode_cmd->add_option("--params", params_path, "GCN parameters JSON")->required();
    encode_cmd->add_option("--out", out_path, "Output file")->required();
    encode_cmd->add_option("--format", format, "json or csv");
    encode_cmd->add_option("--k", top_k, "Top-k anchors");
    encode_cmd->add_option("--gamma3", gamma3, "Denoise threshold");
    encode_cmd->add_option("--hops", hops, "Expansion hops");
    encode_cmd->add_flag("--pool", pool, "Add mean-over-anchor-rows pooled vector");

    auto* export_cmd = app.add_subcommand("export", "Export the graph as jsonl or csv");
    export_cmd->add_option("--graph", graph_dir, "Graph directory")->required();
    export_cmd->add_option("--format", format, "jsonl or csv")->required();
    export_cmd->add_option("--out", out_path, "Output file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (schema_cmd->parsed()) return cmd_schema(load_config(config_path, overrides));
        if (populate_cmd->parsed()) return cmd_populate(load_config(config_path, overrides));
        if (refine_cmd->parsed())
            return cmd_refine(load_config(config_path, overrides), refine_csv);
        if (stats_cmd->parsed()) return cmd_stats(graph_dir);
        if (retrieve_cmd->parsed())
            return cmd_retrieve(load_config(config_path, overrides), graph_dir, query,
                                observation_file, top_k, gamma3, hops);
        if (encode_cmd->parsed())
            return cmd_encode(load_config(config_path, overrides), graph_dir, query,
                              observation_file, params_path, out_path, format, top_k, gamma3,
                              hops, pool);
        if (export_cmd->parsed()) return cmd_export(graph_dir, format, out_path);
    } catch (const smmkg::Error& e) {
        json err = {{"error", {{"kind", smmkg::to_string(e.kind())}, {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        json err = {{"error", {{"kind", "internal"}, {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
