#pragma once
// Deterministic synthetic corpora with controllable error injection, plus a
// brute-force flexible-goal-accuracy oracle that re-derives every turn from
// scratch instead of streaming. The generator injects prediction errors at
// the turn level and then accumulates them, because trackers emit cumulative
// states whose mistakes persist.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsteval/core.hpp"
#include "dsteval/metrics.hpp"

namespace dsteval {

// Counter-based splittable generator (splitmix64). One independent stream
// per conversation keeps generation deterministic under parallel execution.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound).
    std::uint64_t below(std::uint64_t bound) { return next() % bound; }

    // Uniform in [0, 1).
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool chance(double p) { return unit() < p; }

private:
    std::uint64_t state_;
};

struct SynthConfig {
    std::uint64_t seed = 1;
    int conversations = 10;
    int min_turns = 4;
    int max_turns = 10;
    int domain_count = 3;
    int slot_count = 5;
    int value_count = 8;
    double p_type1 = 0.0;     // chance a turn's local prediction swaps in a wrong value
    double p_drop = 0.0;      // chance each new ground-truth triplet is missed
    double p_spurious = 0.0;  // chance a turn invents a triplet outside the ground truth
    double p_overwrite = 0.0; // chance a turn overwrites an existing slot's value
};

namespace detail {

inline void validate(const SynthConfig& config) {
    if (config.conversations < 1) throw ConfigError("conversations must be >= 1");
    if (config.min_turns < 1) throw ConfigError("turns range must start at >= 1");
    if (config.max_turns < config.min_turns) throw ConfigError("turns range is inverted");
    if (config.domain_count < 1 || config.slot_count < 1 || config.value_count < 1) {
        throw ConfigError("vocabulary counts must be >= 1");
    }
    for (double p : {config.p_type1, config.p_drop, config.p_spurious, config.p_overwrite}) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("probabilities must lie in [0, 1]");
    }
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 mixer(seed ^ (0x9E3779B97F4A7C15ull * (index + 1)));
    return mixer.next();
}

// Apply a turn-level update with one-value-per-pair semantics.
inline void apply_update(BeliefState& state, const std::vector<Triplet>& update) {
    for (const Triplet& t : update) {
        state.erase_pair(pair_of(t));
        state.insert(t);
    }
}

inline Conversation generate_conversation(const SynthConfig& config, int index) {
    SplitMix64 rng(stream_seed(config.seed, static_cast<std::uint64_t>(index)));
    auto token = [](const char* prefix, std::uint64_t i) { return std::string(prefix) + std::to_string(i); };
    auto random_value = [&] { return token("value", rng.below(static_cast<std::uint64_t>(config.value_count))); };

    Conversation conv;
    {
        std::string id = std::to_string(index);
        conv.id = "synth-" + std::string(5 - std::min<std::size_t>(5, id.size()), '0') + id;
    }
    const int turn_count =
        config.min_turns + static_cast<int>(rng.below(static_cast<std::uint64_t>(config.max_turns - config.min_turns + 1)));

    BeliefState gt;
    BeliefState pred;
    for (int t = 0; t < turn_count; ++t) {
        std::vector<Triplet> gt_update;

        if (t > 0 && !gt.empty() && rng.chance(config.p_overwrite) && config.value_count > 1) {
            const Triplet& victim = gt.items()[rng.below(gt.size())];
            std::string fresh = random_value();
            while (fresh == victim.value) fresh = random_value();
            gt_update.push_back({victim.domain, victim.slot, fresh});
        }

        const int additions = t == 0 ? 1 + static_cast<int>(rng.below(3)) : static_cast<int>(rng.below(4));
        for (int a = 0; a < additions; ++a) {
            // Fresh pairs only; a saturated vocabulary simply stops growing.
            for (int attempt = 0; attempt < 32; ++attempt) {
                Triplet candidate{token("domain", rng.below(static_cast<std::uint64_t>(config.domain_count))),
                                  token("slot", rng.below(static_cast<std::uint64_t>(config.slot_count))),
                                  random_value()};
                const DomainSlot pair = pair_of(candidate);
                bool taken = gt.has_pair(pair);
                for (const Triplet& u : gt_update) taken = taken || pair_of(u) == pair;
                if (!taken) {
                    gt_update.push_back(std::move(candidate));
                    break;
                }
            }
        }

        apply_update(gt, gt_update);

        // Turn-local prediction of the update, with injected mistakes.
        std::size_t corrupt_at = gt_update.size();
        if (!gt_update.empty() && config.value_count > 1 && rng.chance(config.p_type1)) {
            corrupt_at = rng.below(gt_update.size());
        }
        std::vector<Triplet> pred_update;
        for (std::size_t i = 0; i < gt_update.size(); ++i) {
            if (rng.chance(config.p_drop)) continue;
            Triplet predicted = gt_update[i];
            if (i == corrupt_at) {
                std::string wrong = random_value();
                while (gt.contains({predicted.domain, predicted.slot, wrong})) wrong = random_value();
                predicted.value = std::move(wrong);
            }
            pred_update.push_back(std::move(predicted));
        }
        if (rng.chance(config.p_spurious)) {
            for (int attempt = 0; attempt < 32; ++attempt) {
                Triplet ghost{token("domain", rng.below(static_cast<std::uint64_t>(config.domain_count))),
                              token("slot", rng.below(static_cast<std::uint64_t>(config.slot_count))),
                              random_value()};
                if (!gt.contains(ghost)) {
                    pred_update.push_back(std::move(ghost));
                    break;
                }
            }
        }
        apply_update(pred, pred_update);

        Turn turn;
        turn.index = t;
        turn.ground_truth = gt;
        turn.prediction = pred;
        if (t > 0) turn.system_utterance = "system turn " + std::to_string(t);
        turn.user_utterance = "user turn " + std::to_string(t);
        conv.turns.push_back(std::move(turn));
    }
    return conv;
}

}  // namespace detail

// Same seed, same corpus, independent of evaluation order.
inline std::vector<Conversation> generate(const SynthConfig& config) {
    detail::validate(config);
    std::vector<Conversation> convs;
    convs.reserve(static_cast<std::size_t>(config.conversations));
    for (int i = 0; i < config.conversations; ++i) {
        convs.push_back(detail::generate_conversation(config, i));
    }
    return convs;
}

// Brute-force re-derivation of the flexible-goal score. Every turn rebuilds
// its turn-level states from the raw belief states and rescans the whole
// prefix for the most recent Type1 turn; nothing is carried between turns.
inline double oracle_fga(const Conversation& conv, Lambda lam) {
    if (conv.turns.empty()) throw DomainError("conversation has no turns");
    const auto& turns = conv.turns;

    auto mismatch_at = [&](int t) { return !(turns[t].ground_truth == turns[t].prediction); };
    auto type1_at = [&](int t) {
        if (!mismatch_at(t)) return false;
        if (t == 0) return true;
        const BeliefState gt_new = set_difference(turns[t].ground_truth, turns[t - 1].ground_truth);
        const BeliefState pred_new = set_difference(turns[t].prediction, turns[t - 1].prediction);
        return !is_subset(pred_new, turns[t].ground_truth) || !is_subset(gt_new, turns[t].prediction);
    };

    double f = 0.0;
    const int n = static_cast<int>(turns.size());
    for (int t = 0; t < n; ++t) {
        double w = 1.0;
        if (mismatch_at(t)) {
            if (type1_at(t)) {
                w = 0.0;
            } else {
                std::optional<int> latest;
                for (int s = 0; s < t; ++s) {
                    if (type1_at(s)) latest = s;
                }
                if (lam.value() == 0.0) {
                    w = 0.0;
                } else if (!latest.has_value()) {
                    w = 1.0;
                } else {
                    w = 1.0 - std::exp(-lam.value() * static_cast<double>(t - *latest));
                }
            }
        }
        f += w;
    }
    return f / static_cast<double>(n);
}

}  // namespace dsteval
