#pragma once
// Per-conversation error traces and corpus-level propagation statistics:
// makes the forgetting metric inspectable turn by turn.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsteval/core.hpp"
#include "dsteval/metrics.hpp"

namespace dsteval {

struct TraceEntry {
    int turn_index = 0;
    TurnClass cls;
    std::optional<int> active_error_turn;  // most recent Type1 turn so far
    std::vector<double> weights;           // one per trace lambda

    bool operator==(const TraceEntry&) const = default;
};

struct ErrorTrace {
    std::string conversation_id;
    std::vector<double> lambdas;
    std::vector<TraceEntry> entries;  // one per turn

    bool operator==(const ErrorTrace&) const = default;
};

// Re-expose the classification pass with the running error marker and the
// per-lambda turn credits.
inline ErrorTrace trace_conversation(const Conversation& conv, std::span<const Lambda> lambdas) {
    if (lambdas.empty()) throw ConfigError("trace needs at least one lambda");
    ErrorTrace trace;
    trace.conversation_id = conv.id;
    for (const Lambda& lam : lambdas) trace.lambdas.push_back(lam.value());
    const std::vector<TurnClass> classes = classify_turns(conv);
    std::optional<int> active;
    trace.entries.reserve(classes.size());
    for (std::size_t t = 0; t < classes.size(); ++t) {
        if (classes[t].kind == TurnKind::Type1) active = static_cast<int>(t);
        TraceEntry entry;
        entry.turn_index = static_cast<int>(t);
        entry.cls = classes[t];
        entry.active_error_turn = active;
        entry.weights.reserve(lambdas.size());
        for (const Lambda& lam : lambdas) entry.weights.push_back(turn_weight(classes[t], lam));
        trace.entries.push_back(std::move(entry));
    }
    return trace;
}

struct PropagationStats {
    long exact_turns = 0;
    long type1_turns = 0;
    long type2_turns = 0;
    // Index of the first non-exact turn -> number of conversations.
    std::map<int, long> first_error_turn;
    // Length of a maximal consecutive non-exact span -> number of spans.
    // An error run ends at the first subsequent exact match; Type2 turns
    // extend the run.
    std::map<int, long> error_run_length;

    bool operator==(const PropagationStats&) const = default;
};

inline PropagationStats propagation_stats(std::span<const Conversation> convs) {
    PropagationStats stats;
    for (const Conversation& conv : convs) {
        const std::vector<TurnClass> classes = classify_turns(conv);
        bool seen_error = false;
        int run = 0;
        for (std::size_t t = 0; t < classes.size(); ++t) {
            switch (classes[t].kind) {
                case TurnKind::Exact: ++stats.exact_turns; break;
                case TurnKind::Type1: ++stats.type1_turns; break;
                case TurnKind::Type2: ++stats.type2_turns; break;
            }
            if (classes[t].kind == TurnKind::Exact) {
                if (run > 0) ++stats.error_run_length[run];
                run = 0;
            } else {
                if (!seen_error) {
                    ++stats.first_error_turn[static_cast<int>(t)];
                    seen_error = true;
                }
                ++run;
            }
        }
        if (run > 0) ++stats.error_run_length[run];
    }
    return stats;
}

}  // namespace dsteval
