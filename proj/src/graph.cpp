#include "smmkg/graph.hpp"

#include <deque>

#include "smmkg/error.hpp"
#include "util.hpp"

namespace smmkg {

const char* to_string(TripleSource s) {
    return s == TripleSource::general ? "general" : "scene";
}

const char* to_string(TailKind k) {
    switch (k) {
        case TailKind::entity: return "entity";
        case TailKind::literal: return "literal";
        case TailKind::image: return "image";
    }
    return "literal";
}

const char* to_string(ImageKind k) {
    return k == ImageKind::synthetic ? "synthetic" : "real_world";
}

const char* to_string(AttrLevel l) {
    return l == AttrLevel::entity_level ? "entity_level" : "part_level";
}

nlohmann::json GraphStats::to_json() const {
    return {{"nodes", nodes},
            {"edges", edges},
            {"images", images},
            {"distinct_attributes", distinct_attributes},
            {"general_edges", general_edges},
            {"scene_edges", scene_edges}};
}

bool NeighborFilter::pass(const Triple& t) const {
    if (source && *source != t.source) return false;
    if (!relations.empty() && !relations.count(t.relation)) return false;
    return true;
}

TripleKey key_of(const Triple& t) {
    return {t.head, t.relation, t.tail.kind, t.tail.value};
}

void SceneMMKG::require_mutable() const {
    if (frozen_) raise(ErrorKind::mutation, "graph is frozen");
}

std::string SceneMMKG::add_entity(Entity entity) {
    require_mutable();
    if (entity.id.empty()) entity.id = stable_id("entity", entity.label);
    if (!entity.concept_id.empty() && !schema_.concepts.count(entity.concept_id))
        raise(ErrorKind::integrity,
              "entity " + entity.label + ": concept " + entity.concept_id + " not in schema");
    auto [it, inserted] = entities_.emplace(entity.id, entity);
    if (!inserted) {
        it->second.aliases.insert(entity.aliases.begin(), entity.aliases.end());
        if (it->second.concept_id.empty()) it->second.concept_id = entity.concept_id;
    }
    return it->first;
}

void SceneMMKG::add_triple(Triple triple) {
    require_mutable();
    if (!entities_.count(triple.head))
        raise(ErrorKind::integrity, "triple head not found: " + triple.head);
    switch (triple.tail.kind) {
        case TailKind::entity:
            if (!entities_.count(triple.tail.value))
                raise(ErrorKind::integrity, "triple tail entity not found: " + triple.tail.value);
            break;
        case TailKind::image:
            if (!assets_.count(triple.tail.value))
                raise(ErrorKind::integrity, "triple tail asset not found: " + triple.tail.value);
            break;
        case TailKind::literal:
            break;
    }

    auto [it, inserted] = triples_.emplace(key_of(triple), triple);
    if (!inserted) {
        it->second.provenance.insert(triple.provenance.begin(), triple.provenance.end());
        if (triple.source == TripleSource::scene) it->second.source = TripleSource::scene;
    }

    // Literal-valued relations are the graph's attribute keys.
    if (triple.tail.kind == TailKind::literal && !attribute_keys_.count(it->second.relation))
        attribute_keys_.emplace(it->second.relation,
                                AttributeKey{it->second.relation, AttrLevel::entity_level, true, ""});
}

std::string SceneMMKG::add_asset(ImageAsset asset) {
    require_mutable();
    if (asset.id.empty()) asset.id = stable_id("asset", asset.uri);
    std::string id = asset.id;
    assets_.emplace(id, std::move(asset));
    return id;
}

void SceneMMKG::register_attribute(AttributeKey key) {
    require_mutable();
    if (!key.canonical) {
        if (key.alias_of.empty())
            raise(ErrorKind::integrity, "alias attribute key without target: " + key.name);
        auto it = attribute_keys_.find(key.alias_of);
        if (it != attribute_keys_.end() && !it->second.canonical)
            raise(ErrorKind::integrity, "alias chain through non-canonical key: " + key.alias_of);
    }
    attribute_keys_[key.name] = std::move(key);
}

void SceneMMKG::log_stage(const std::string& stage, nlohmann::json details) {
    build_log_.push_back({stage, std::move(details)});
}

const Entity* SceneMMKG::find_entity(const std::string& id) const {
    auto it = entities_.find(id);
    return it == entities_.end() ? nullptr : &it->second;
}

const ImageAsset* SceneMMKG::find_asset(const std::string& id) const {
    auto it = assets_.find(id);
    return it == assets_.end() ? nullptr : &it->second;
}

GraphStats SceneMMKG::stats() const {
    GraphStats s;
    s.nodes = entities_.size();
    s.edges = triples_.size();
    s.images = assets_.size();
    for (const auto& [name, key] : attribute_keys_)
        if (key.canonical) ++s.distinct_attributes;
    for (const auto& [key, t] : triples_) {
        if (t.source == TripleSource::general)
            ++s.general_edges;
        else
            ++s.scene_edges;
    }
    return s;
}

RetrievedSubgraph SceneMMKG::neighbors(const std::string& entity_id, int hops,
                                       const NeighborFilter& filter) const {
    if (!entities_.count(entity_id)) raise(ErrorKind::lookup, "unknown entity: " + entity_id);
    if (hops < 0) raise(ErrorKind::precondition, "neighbors: hops must be >= 0");

    // Undirected adjacency over entity-to-entity links; literal and image
    // tails hang off their head entity.
    std::map<std::string, std::vector<const Triple*>> incident;
    for (const auto& [key, t] : triples_) {
        incident[t.head].push_back(&t);
        if (t.tail.kind == TailKind::entity) incident[t.tail.value].push_back(&t);
    }

    std::map<std::string, int> dist{{entity_id, 0}};
    std::deque<std::string> frontier{entity_id};
    std::set<TripleKey> collected;
    RetrievedSubgraph result;
    result.anchors.push_back({entity_id, 1.0});

    while (!frontier.empty()) {
        std::string node = frontier.front();
        frontier.pop_front();
        int d = dist[node];
        if (d >= hops) continue;
        auto it = incident.find(node);
        if (it == incident.end()) continue;
        for (const Triple* t : it->second) {
            if (!filter.pass(*t)) continue;
            if (collected.insert(key_of(*t)).second) {
                if (t->tail.kind == TailKind::image)
                    result.visual.push_back(*t);
                else
                    result.textual.push_back(*t);
            }
            auto reach = [&](const std::string& other) {
                if (!dist.count(other)) {
                    dist[other] = d + 1;
                    frontier.push_back(other);
                }
            };
            reach(t->head);
            if (t->tail.kind == TailKind::entity) reach(t->tail.value);
        }
    }
    return result;
}

void SceneMMKG::check_integrity() const {
    for (const auto& [id, e] : entities_) {
        if (!e.concept_id.empty() && !schema_.concepts.count(e.concept_id))
            raise(ErrorKind::integrity, "entity " + id + ": dangling concept " + e.concept_id);
    }
    for (const auto& [key, t] : triples_) {
        if (!entities_.count(t.head))
            raise(ErrorKind::integrity, "triple head dangling: " + t.head);
        if (t.tail.kind == TailKind::entity && !entities_.count(t.tail.value))
            raise(ErrorKind::integrity, "triple tail entity dangling: " + t.tail.value);
        if (t.tail.kind == TailKind::image && !assets_.count(t.tail.value))
            raise(ErrorKind::integrity, "triple tail asset dangling: " + t.tail.value);
    }
    for (const auto& [name, key] : attribute_keys_) {
        if (key.canonical) continue;
        auto it = attribute_keys_.find(key.alias_of);
        if (it == attribute_keys_.end())
            raise(ErrorKind::integrity, "attribute alias dangling: " + name);
        if (!it->second.canonical)
            raise(ErrorKind::integrity, "attribute alias chain not canonical: " + name);
    }
}

} // namespace smmkg
