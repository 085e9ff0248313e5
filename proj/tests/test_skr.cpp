#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "smmkg/error.hpp"
#include "smmkg/skr.hpp"
#include "test_support.hpp"
#include "util.hpp"

using namespace smmkg;
using namespace smmkg_test;

namespace {

std::string add_labeled(SceneMMKG& g, const std::string& label) {
    Entity e;
    e.label = label;
    return g.add_entity(std::move(e));
}

GcnParameters identity_params(std::size_t dim) {
    GcnParameters p;
    p.layers = 1;
    p.dims = {dim, dim};
    p.activation = GcnParameters::Activation::identity;
    p.weights.emplace_back(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) p.weights[0][i * dim + i] = 1.0;
    return p;
}

FeatureMatrix matrix_of(std::vector<std::vector<double>> rows) {
    FeatureMatrix m;
    m.rows = rows.size();
    m.cols = rows.empty() ? 0 : rows[0].size();
    for (std::size_t i = 0; i < m.rows; ++i) {
        m.node_ids.push_back("n" + std::to_string(i));
        for (double v : rows[i]) m.data.push_back(v);
    }
    return m;
}

// Graph fixture with a mug that has a caption-bearing image, one text
// attribute, and a linked entity.
SceneMMKG mug_graph(std::string* mug_id_out = nullptr) {
    SceneMMKG g;
    auto mug = add_labeled(g, "mug");
    auto shelf = add_labeled(g, "shelf");
    ImageAsset a1;
    a1.uri = "images/mug_front.png";
    a1.kind = ImageKind::synthetic;
    a1.caption = "white ceramic mug";
    auto asset1 = g.add_asset(std::move(a1));
    ImageAsset a2;
    a2.uri = "images/clutter.png";
    a2.kind = ImageKind::real_world;
    a2.caption = "cluttered drawer full of tools";
    auto asset2 = g.add_asset(std::move(a2));

    Triple t1;
    t1.head = mug;
    t1.relation = "color";
    t1.tail = {TailKind::literal, "white"};
    t1.source = TripleSource::scene;
    t1.provenance = {"s1"};
    g.add_triple(std::move(t1));

    Triple t2;
    t2.head = mug;
    t2.relation = "on";
    t2.tail = {TailKind::entity, shelf};
    t2.source = TripleSource::scene;
    t2.provenance = {"s2"};
    g.add_triple(std::move(t2));

    Triple t3;
    t3.head = mug;
    t3.relation = "has_image";
    t3.tail = {TailKind::image, asset1};
    t3.source = TripleSource::scene;
    t3.provenance = {"s3"};
    g.add_triple(std::move(t3));

    Triple t4;
    t4.head = mug;
    t4.relation = "has_image";
    t4.tail = {TailKind::image, asset2};
    t4.source = TripleSource::scene;
    t4.provenance = {"s4"};
    g.add_triple(std::move(t4));

    g.freeze();
    if (mug_id_out) *mug_id_out = mug;
    return g;
}

EmbedFn offline(std::size_t dim) {
    return [dim](const std::string& text) { return trigram_embedding(text, dim); };
}

} // namespace

TEST_CASE("self-query ranks the matching entity first with score 1") {
    std::string mug_id;
    auto g = mug_graph(&mug_id);
    Query q;
    q.text = "mug";
    q.k = 1;
    auto anchors = retrieve(q, g, offline(64));
    REQUIRE(anchors.size() == 1);
    CHECK(anchors[0].id == mug_id);
    CHECK(anchors[0].score == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("retrieval preconditions and errors") {
    SceneMMKG empty;
    empty.freeze();
    Query q;
    q.text = "mug";
    try {
        retrieve(q, empty, offline(16));
        FAIL("expected retrieval error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::retrieval);
    }

    SceneMMKG unfrozen;
    add_labeled(unfrozen, "mug");
    CHECK_THROWS_AS(retrieve(q, unfrozen, offline(16)), Error);

    auto g = mug_graph();
    Query no_content;
    try {
        retrieve(no_content, g, offline(16));
        FAIL("expected contract error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::contract);
    }
}

TEST_CASE("observation vectors drive retrieval when no text is given") {
    std::string mug_id;
    auto g = mug_graph(&mug_id);
    Query q;
    q.observation = trigram_embedding("mug", 64);
    q.k = 2;
    auto anchors = retrieve(q, g, offline(64));
    REQUIRE(anchors.size() == 2);
    CHECK(anchors[0].id == mug_id);
}

TEST_CASE("retrieve matches the full-scan oracle on random graphs") {
    std::mt19937 rng(71);
    std::uniform_int_distribution<int> word_len(3, 9);
    std::uniform_int_distribution<int> ch('a', 'z');
    auto embed = offline(64);

    for (int round = 0; round < 10; ++round) {
        SceneMMKG g;
        int n = 50 + round * 15;
        for (int i = 0; i < n; ++i) {
            std::string label;
            for (int k = word_len(rng); k-- > 0;) label.push_back(static_cast<char>(ch(rng)));
            label += std::to_string(i); // unique
            add_labeled(g, label);
        }
        g.freeze();

        Query q;
        q.text = "query target";
        for (std::size_t k : {std::size_t(1), std::size_t(5), std::size_t(10)}) {
            q.k = k;
            auto got = retrieve(q, g, embed);
            auto expected = oracle_top_k(g, embed(q.text), embed, k);
            REQUIRE(got.size() == expected.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].id == expected[i].id);
                CHECK(got[i].score == doctest::Approx(expected[i].score).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("equal scores break ties by ascending entity id") {
    SceneMMKG g;
    // duplicate labels -> identical scores
    Entity a;
    a.label = "twin";
    a.id = "0000000000000000000000000000000b";
    g.add_entity(a);
    Entity b;
    b.label = "twin";
    b.id = "0000000000000000000000000000000a";
    g.add_entity(b);
    g.freeze();
    Query q;
    q.text = "twin";
    q.k = 2;
    auto anchors = retrieve(q, g, offline(32));
    REQUIRE(anchors.size() == 2);
    CHECK(anchors[0].id < anchors[1].id);
}

TEST_CASE("expand partitions textual and visual triples") {
    std::string mug_id;
    auto g = mug_graph(&mug_id);

    auto h0 = expand({{mug_id, 1.0}}, g, 0);
    CHECK(h0.textual.empty());
    CHECK(h0.visual.empty());
    CHECK(h0.anchors.size() == 1);

    auto h1 = expand({{mug_id, 1.0}}, g, 1);
    CHECK(h1.textual.size() == 2); // literal + entity tails
    CHECK(h1.visual.size() == 2);  // both image tails

    CHECK_THROWS_AS(expand({{"missing", 1.0}}, g, 1), Error);
}

TEST_CASE("expand equals the BFS oracle on random graphs") {
    std::mt19937 rng(73);
    for (int round = 0; round < 10; ++round) {
        SceneMMKG g;
        std::vector<std::string> ids;
        for (int i = 0; i < 40; ++i) ids.push_back(add_labeled(g, "n" + std::to_string(i)));
        std::uniform_int_distribution<int> pick(0, 39);
        std::vector<Triple> all;
        for (int i = 0; i < 90; ++i) {
            Triple t;
            t.head = ids[pick(rng)];
            t.relation = "r" + std::to_string(i % 4);
            t.tail = {TailKind::entity, ids[pick(rng)]};
            t.source = TripleSource::general;
            t.provenance = {"p" + std::to_string(i)};
            all.push_back(t);
            g.add_triple(std::move(t));
        }
        g.freeze();

        std::vector<Triple> stored;
        for (const auto& [k, t] : g.triples()) stored.push_back(t);
        for (int hops : {1, 2}) {
            auto got = expand({{ids[0], 1.0}}, g, hops);
            std::set<TripleKey> got_keys;
            for (const auto& t : got.textual) got_keys.insert(key_of(t));
            CHECK(got_keys == oracle_bfs_triples(stored, ids[0], hops));
        }
    }
}

TEST_CASE("denoise bounds: gamma=-1 keeps all, gamma>1 empties the visual side") {
    std::string mug_id;
    auto g = mug_graph(&mug_id);
    auto h = expand({{mug_id, 1.0}}, g, 1);
    auto embed = offline(64);
    Embedding obs = trigram_embedding("white ceramic mug", 64);

    auto keep_all = denoise(h, obs, -1.0, g, embed);
    CHECK(keep_all.visual.size() == h.visual.size());
    CHECK(keep_all.textual.size() == h.textual.size());

    auto drop_all = denoise(h, obs, 1.0 + 1e-9, g, embed);
    CHECK(drop_all.visual.empty());
    CHECK(drop_all.textual.size() == h.textual.size()); // H_t invariant
}

TEST_CASE("denoise retention is nested and matches the filter oracle") {
    std::mt19937 rng(79);
    for (int round = 0; round < 20; ++round) {
        SceneMMKG g;
        auto hub = add_labeled(g, "hub");
        std::map<std::string, Embedding> table;
        std::vector<std::string> captions;
        for (int i = 0; i < 12; ++i) {
            ImageAsset a;
            a.uri = "img/" + std::to_string(round) + "_" + std::to_string(i) + ".png";
            a.kind = ImageKind::synthetic;
            a.caption = "cap" + std::to_string(round) + "_" + std::to_string(i);
            captions.push_back(a.caption);
            auto id = g.add_asset(std::move(a));
            Triple t;
            t.head = hub;
            t.relation = "has_image";
            t.tail = {TailKind::image, id};
            t.source = TripleSource::scene;
            t.provenance = {"p"};
            g.add_triple(std::move(t));
            table[captions.back()] = seeded_unit_vector(captions.back(), 8, round);
        }
        g.freeze();
        table["obs"] = seeded_unit_vector("obs", 8, round);
        auto embed = injected(table, 8);
        auto h = expand({{hub, 1.0}}, g, 1);
        Embedding obs = table["obs"];

        std::set<std::string> prev_assets;
        bool first = true;
        for (double gamma : {-0.5, 0.0, 0.25, 0.5, 0.9}) {
            auto kept = denoise(h, obs, gamma, g, embed);
            // oracle: direct filter over captions
            std::set<std::string> expected;
            for (const auto& t : h.visual) {
                const ImageAsset* asset = g.find_asset(t.tail.value);
                if (cosine(obs, embed(asset->caption)) >= gamma) expected.insert(t.tail.value);
            }
            std::set<std::string> got;
            for (const auto& t : kept.visual) got.insert(t.tail.value);
            CHECK(got == expected);
            // nested under increasing gamma
            if (!first)
                CHECK(std::includes(prev_assets.begin(), prev_assets.end(), got.begin(),
                                    got.end()));
            prev_assets = got;
            first = false;
            // scores align with retained elements and sit in [-1,1]
            REQUIRE(kept.visual_scores.size() == kept.visual.size());
            for (double s : kept.visual_scores) {
                CHECK(s >= -1.0);
                CHECK(s <= 1.0);
                CHECK(s >= gamma);
            }
        }
    }
}

TEST_CASE("denoise dimension mismatch is a contract error") {
    std::string mug_id;
    auto g = mug_graph(&mug_id);
    auto h = expand({{mug_id, 1.0}}, g, 1);
    Embedding obs = trigram_embedding("mug", 32); // embedder below uses 64
    CHECK_THROWS_AS(denoise(h, obs, 0.0, g, offline(64)), Error);
}

TEST_CASE("zero layers return H0 exactly") {
    std::string mug_id;
    auto g = mug_graph(&mug_id);
    auto h = expand({{mug_id, 1.0}}, g, 1);
    GcnParameters p;
    p.layers = 0;
    p.dims = {64};
    auto embed = offline(64);
    auto out = encode(h, g, p, embed);
    CHECK(out.cols == 64);
    // each row equals the provider embedding of its node text
    for (std::size_t r = 0; r < out.rows; ++r) {
        const std::string& key = out.node_ids[r];
        std::string text;
        if (const Entity* e = g.find_entity(key))
            text = e->label;
        else if (const ImageAsset* a = g.find_asset(key))
            text = a->caption;
        else
            text = key.substr(4); // "lit:" prefix
        auto expected = embed(text);
        for (std::size_t c = 0; c < out.cols; ++c)
            CHECK(out.at(r, c) == doctest::Approx(expected.values[c]).epsilon(1e-12));
    }
}

TEST_CASE("single node with identity weights is the identity map") {
    SceneMMKG g;
    auto solo = add_labeled(g, "solo");
    g.freeze();
    auto h = expand({{solo, 1.0}}, g, 0);
    auto embed = offline(8);
    auto out = encode(h, g, identity_params(8), embed);
    REQUIRE(out.rows == 1);
    auto expected = embed("solo");
    for (std::size_t c = 0; c < 8; ++c)
        CHECK(out.at(0, c) == doctest::Approx(expected.values[c]).epsilon(1e-9));
}

TEST_CASE("three-node path matches the hand-computed forward") {
    GcnParameters p;
    p.layers = 1;
    p.dims = {2, 2};
    p.activation = GcnParameters::Activation::identity;
    p.weights = {{1, 2, 3, 4}}; // [[1,2],[3,4]] row-major

    FeatureMatrix h0 = matrix_of({{1, 0}, {0, 1}, {1, 1}});
    auto out = gcn_forward({{0, 1}, {1, 2}}, std::move(h0), p);

    const double expected[3][2] = {{1.724744871392, 2.632993161855},
                                   {3.041241452319, 4.599319657044},
                                   {3.224744871392, 4.632993161855}};
    REQUIRE(out.rows == 3);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(out.at(r, c) == doctest::Approx(expected[r][c]).epsilon(1e-9));
}

TEST_CASE("forward agrees with the dense oracle on random graphs") {
    std::mt19937 rng(83);
    for (int round = 0; round < 15; ++round) {
        std::uniform_int_distribution<int> n_dist(2, 12);
        std::size_t n = n_dist(rng);
        std::uniform_real_distribution<double> val(-1, 1);

        std::vector<std::pair<std::size_t, std::size_t>> edges;
        std::uniform_int_distribution<std::size_t> node(0, n - 1);
        for (std::size_t i = 0; i < n; ++i) edges.emplace_back(node(rng), node(rng));

        std::vector<std::vector<double>> h(n, std::vector<double>(3));
        for (auto& row : h)
            for (auto& v : row) v = val(rng);

        GcnParameters p;
        p.layers = 2;
        p.dims = {3, 4, 2};
        p.activation = GcnParameters::Activation::relu;
        p.weights.resize(2);
        p.weights[0].resize(12);
        p.weights[1].resize(8);
        for (auto& w : p.weights[0]) w = val(rng);
        for (auto& w : p.weights[1]) w = val(rng);

        std::vector<std::vector<std::vector<double>>> w_nested(2);
        w_nested[0].assign(3, std::vector<double>(4));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j) w_nested[0][i][j] = p.weights[0][i * 4 + j];
        w_nested[1].assign(4, std::vector<double>(2));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 2; ++j) w_nested[1][i][j] = p.weights[1][i * 2 + j];

        FeatureMatrix h0 = matrix_of(h);
        auto got = gcn_forward(edges, std::move(h0), p);
        auto expected = oracle_gcn_forward(n, edges, h, w_nested, true);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < 2; ++c)
                CHECK(got.at(r, c) == doctest::Approx(expected[r][c]).epsilon(1e-9));
    }
}

TEST_CASE("permutation equivariance on random small graphs") {
    std::mt19937 rng(89);
    for (int round = 0; round < 50; ++round) {
        std::uniform_int_distribution<int> n_dist(2, 20);
        std::size_t n = n_dist(rng);
        std::uniform_real_distribution<double> val(-1, 1);
        std::uniform_int_distribution<std::size_t> node(0, n - 1);

        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
        for (int i = 0; i < 5; ++i) edges.emplace_back(node(rng), node(rng));

        std::vector<std::vector<double>> h(n, std::vector<double>(3));
        for (auto& row : h)
            for (auto& v : row) v = val(rng);

        GcnParameters p;
        p.layers = 1;
        p.dims = {3, 3};
        p.activation = GcnParameters::Activation::relu;
        p.weights.emplace_back(9);
        for (auto& w : p.weights[0]) w = val(rng);

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);

        auto base = gcn_forward(edges, matrix_of(h), p);

        std::vector<std::vector<double>> h_perm(n);
        for (std::size_t i = 0; i < n; ++i) h_perm[perm[i]] = h[i];
        std::vector<std::pair<std::size_t, std::size_t>> edges_perm;
        for (auto [u, v] : edges) edges_perm.emplace_back(perm[u], perm[v]);
        auto permuted = gcn_forward(edges_perm, matrix_of(h_perm), p);

        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < 3; ++c)
                CHECK(permuted.at(perm[i], c) == doctest::Approx(base.at(i, c)).epsilon(1e-9));
    }
}

TEST_CASE("identity weights over self-loops-only graphs return H0") {
    FeatureMatrix h0 = matrix_of({{0.5, -1.0}, {2.0, 0.25}, {0.0, 3.0}});
    auto out = gcn_forward({}, matrix_of({{0.5, -1.0}, {2.0, 0.25}, {0.0, 3.0}}),
                           identity_params(2));
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(out.at(r, c) == doctest::Approx(h0.at(r, c)).epsilon(1e-12));
}

TEST_CASE("encode is deterministic and validates dimensions") {
    std::string mug_id;
    auto g = mug_graph(&mug_id);
    auto h = expand({{mug_id, 1.0}}, g, 1);
    auto embed = offline(8);
    auto a = encode(h, g, identity_params(8), embed);
    auto b = encode(h, g, identity_params(8), embed);
    CHECK(a.data == b.data);
    CHECK(a.node_ids == b.node_ids);

    // provider dim 16 against dims[0] == 8
    CHECK_THROWS_AS(encode(h, g, identity_params(8), offline(16)), Error);

    GcnParameters bad;
    bad.layers = 1;
    bad.dims = {8, 4};
    bad.weights.emplace_back(3, 0.0); // wrong size
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("pooling averages the anchor rows") {
    FeatureMatrix m = matrix_of({{1, 2}, {3, 4}});
    auto pooled = pool_anchor_mean(m, {{"n0", 1.0}, {"n1", 0.5}});
    REQUIRE(pooled.values.size() == 2);
    CHECK(pooled.values[0] == doctest::Approx(2.0));
    CHECK(pooled.values[1] == doctest::Approx(3.0));
}

TEST_CASE("gcn parameters round-trip through JSON") {
    auto p = identity_params(4);
    auto q = GcnParameters::from_json(p.to_json());
    CHECK(q.layers == p.layers);
    CHECK(q.dims == p.dims);
    CHECK(q.weights == p.weights);
}
