#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "dsteval/metrics.hpp"
#include "dsteval/synth.hpp"
#include "support.hpp"

using namespace dsteval;
using Catch::Matchers::WithinAbs;

// Every domain-slot combination the generator can emit.
static Ontology full_vocabulary(const SynthConfig& config) {
    std::vector<DomainSlot> pairs;
    for (int d = 0; d < config.domain_count; ++d) {
        for (int s = 0; s < config.slot_count; ++s) {
            pairs.push_back({"domain" + std::to_string(d), "slot" + std::to_string(s)});
        }
    }
    return Ontology(std::move(pairs));
}

TEST_CASE("same seed, same corpus") {
    SynthConfig config;
    config.seed = 7;
    config.conversations = 25;
    config.p_type1 = 0.2;
    config.p_drop = 0.1;
    config.p_spurious = 0.1;
    config.p_overwrite = 0.2;
    CHECK(generate(config) == generate(config));

    SynthConfig other = config;
    other.seed = 8;
    CHECK(generate(other) != generate(config));
}

TEST_CASE("error-free config reproduces the ground truth") {
    SynthConfig config;
    config.seed = 3;
    config.conversations = 20;
    config.p_overwrite = 0.3;
    const auto convs = generate(config);
    for (const Conversation& conv : convs) {
        for (const Turn& turn : conv.turns) {
            CHECK(turn.ground_truth == turn.prediction);
        }
    }
    MetricConfig mc;
    mc.lambdas = {Lambda(0.5)};
    CHECK(evaluate_dataset(convs, mc).jga == 1.0);
}

TEST_CASE("drop-everything predictions satisfy the null-prediction law") {
    SynthConfig config;
    config.seed = 11;
    config.conversations = 30;
    config.p_drop = 1.0;
    const auto convs = generate(config);
    const Ontology ont = full_vocabulary(config);
    const auto total = static_cast<double>(ont.size());
    for (const Conversation& conv : convs) {
        for (const Turn& turn : conv.turns) {
            REQUIRE(turn.prediction.empty());
            const double expected = (total - static_cast<double>(turn.ground_truth.size())) / total;
            CHECK(slot_accuracy_turn(turn.ground_truth, turn.prediction, ont) == expected);
        }
    }
}

TEST_CASE("generated ground truth is cumulative up to overwrites") {
    SynthConfig config;
    config.seed = 5;
    config.conversations = 40;
    config.p_overwrite = 0.5;
    config.p_type1 = 0.3;
    for (const Conversation& conv : generate(config)) {
        for (std::size_t t = 1; t < conv.turns.size(); ++t) {
            const BeliefState& prev = conv.turns[t - 1].ground_truth;
            const BeliefState& cur = conv.turns[t].ground_truth;
            for (const Triplet& lost : set_difference(prev, cur)) {
                // A vanished triplet means its pair was overwritten, never dropped.
                CHECK(cur.has_pair(pair_of(lost)));
                CHECK_FALSE(cur.contains(lost));
            }
        }
    }
}

TEST_CASE("generated corpora have well-formed shapes") {
    SynthConfig config;
    config.seed = 13;
    config.conversations = 12;
    config.min_turns = 2;
    config.max_turns = 9;
    const auto convs = generate(config);
    REQUIRE(convs.size() == 12);
    CHECK(convs[0].id == "synth-00000");
    CHECK(convs[11].id == "synth-00011");

    std::set<std::string> ids;
    for (const Conversation& conv : convs) {
        ids.insert(conv.id);
        REQUIRE(!conv.turns.empty());
        CHECK(conv.turns.size() >= 2);
        CHECK(conv.turns.size() <= 9);
        CHECK_FALSE(conv.turns[0].ground_truth.empty());
        for (std::size_t t = 0; t < conv.turns.size(); ++t) {
            CHECK(conv.turns[t].index == static_cast<int>(t));
            CHECK(conv.turns[t].user_utterance.has_value());
            CHECK(conv.turns[t].system_utterance.has_value() == (t > 0));
        }
    }
    CHECK(ids.size() == convs.size());
}

TEST_CASE("synth config validation") {
    SynthConfig config;
    config.conversations = 0;
    CHECK_THROWS_AS(generate(config), ConfigError);
    config = {};
    config.min_turns = 0;
    CHECK_THROWS_AS(generate(config), ConfigError);
    config = {};
    config.min_turns = 5;
    config.max_turns = 4;
    CHECK_THROWS_AS(generate(config), ConfigError);
    config = {};
    config.p_drop = 1.5;
    CHECK_THROWS_AS(generate(config), ConfigError);
    config = {};
    config.p_type1 = -0.01;
    CHECK_THROWS_AS(generate(config), ConfigError);
    config = {};
    config.value_count = 0;
    CHECK_THROWS_AS(generate(config), ConfigError);
}

TEST_CASE("oracle agrees with the streaming pass on the fixture") {
    const Conversation conv = testsupport::load_fixture("f1.json")[0];
    CHECK_THAT(oracle_fga(conv, Lambda(0.5)), WithinAbs(0.464490, 1e-6));
    CHECK(oracle_fga(conv, Lambda(0.5)) == fga_conversation(conv, Lambda(0.5)));
    CHECK(oracle_fga(conv, Lambda(0.0)) == fga_conversation(conv, Lambda(0.0)));
}

TEST_CASE("oracle on an all-exact conversation") {
    const Conversation conv = testsupport::perfect_conversation("ok", 6);
    CHECK(oracle_fga(conv, Lambda(0.7)) == 1.0);
    CHECK_THROWS_AS(oracle_fga(Conversation{}, Lambda(0.5)), DomainError);
}

TEST_CASE("splitmix streams differ per conversation") {
    SplitMix64 a(detail::stream_seed(42, 0));
    SplitMix64 b(detail::stream_seed(42, 1));
    CHECK(a.next() != b.next());
    const double u = SplitMix64(99).unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
}
