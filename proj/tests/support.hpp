#pragma once
// Shared helpers for the test binaries: fixture loading and tiny builders.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsteval/dsteval.hpp"

namespace testsupport {

inline std::string fixture_path(const std::string& name) {
    return std::string(DSTEVAL_FIXTURE_DIR) + "/" + name;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::vector<dsteval::Conversation> load_fixture(const std::string& name) {
    return dsteval::parse_predictions(slurp(fixture_path(name))).conversations;
}

inline dsteval::Ontology load_ontology(const std::string& name) {
    return dsteval::parse_ontology(slurp(fixture_path(name)));
}

// A conversation whose prediction equals the ground truth at every turn.
inline dsteval::Conversation perfect_conversation(const std::string& id, int turns) {
    dsteval::Conversation conv;
    conv.id = id;
    dsteval::BeliefState state;
    for (int t = 0; t < turns; ++t) {
        state.insert({"domain" + std::to_string(t % 3), "slot" + std::to_string(t), "value"});
        dsteval::Turn turn;
        turn.index = t;
        turn.ground_truth = state;
        turn.prediction = state;
        conv.turns.push_back(std::move(turn));
    }
    return conv;
}

}  // namespace testsupport
