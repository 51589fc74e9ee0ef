#pragma once
// Metric kernels over belief states: exact match (joint goal accuracy), slot
// accuracy with the double-count correction, average goal accuracy in recall
// and Jaccard forms, and flexible goal accuracy with its exponential
// forgetting weight. Pure functions of immutable inputs throughout.

#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dsteval/core.hpp"

namespace dsteval {

// Forgetting strength for flexible goal accuracy. 0 is legal and collapses
// the metric to strict exact-match scoring; large values approach plain
// turn-level accuracy.
class Lambda {
public:
    explicit Lambda(double value) : value_(value) {
        if (!std::isfinite(value) || value < 0.0) {
            throw DomainError("lambda must be a finite non-negative real");
        }
    }

    double value() const noexcept { return value_; }

    bool operator==(const Lambda&) const = default;

private:
    double value_;
};

enum class TurnKind { Exact, Type1, Type2 };

// Classification of one turn. Type1: the turn's own local prediction is
// wrong. Type2: the turn mismatches but is locally correct, so the error
// originates earlier; `distance` counts turns back to that causal Type1 turn
// and is nullopt when no Type1 turn exists yet (the error clock starts at
// minus infinity; such turns earn full credit).
struct TurnClass {
    TurnKind kind = TurnKind::Exact;
    std::optional<int> distance{};  // Type2 only, >= 1 when set

    bool operator==(const TurnClass&) const = default;
};

inline bool exact_match(const BeliefState& gt, const BeliefState& pred) {
    return gt == pred;
}

// Turn-level belief state T_t: intents expressed at this turn only.
inline BeliefState turn_delta(const BeliefState& current, const BeliefState& previous) {
    return set_difference(current, previous);
}

// A turn is locally correct when everything the user just said was detected
// and nothing was invented: T'_t subset of B_t and T_t subset of B'_t.
// Turn 0 has no previous state, so local correctness there is exact match.
// Plain T_t == T'_t would be wrong: it refuses credit for error corrections.
inline bool local_match(int turn_index, const BeliefState& gt_cur, const BeliefState& pred_cur,
                        const BeliefState& gt_prev, const BeliefState& pred_prev) {
    if (turn_index == 0) return exact_match(gt_cur, pred_cur);
    const BeliefState gt_new = turn_delta(gt_cur, gt_prev);
    const BeliefState pred_new = turn_delta(pred_cur, pred_prev);
    return is_subset(pred_new, gt_cur) && is_subset(gt_new, pred_cur);
}

// Credit for a locally-correct mismatch `distance` turns after its causal
// error: the exponential CDF 1 - exp(-lambda * x). An unbounded distance
// (nullopt: no causal turn on record) earns exactly 1. Lambda 0 yields
// exactly 0 so that the metric degenerates to exact-match scoring.
inline double fga_weight(std::optional<int> distance, Lambda lam) {
    if (lam.value() == 0.0) return 0.0;
    if (!distance.has_value()) return 1.0;
    return 1.0 - std::exp(-lam.value() * static_cast<double>(*distance));
}

inline double turn_weight(const TurnClass& cls, Lambda lam) {
    switch (cls.kind) {
        case TurnKind::Exact: return 1.0;
        case TurnKind::Type1: return 0.0;
        case TurnKind::Type2: return fga_weight(cls.distance, lam);
    }
    return 0.0;
}

// Single streaming pass over a conversation. The last-error marker is never
// reset by exact matches: consecutive Type2 turns measure their distance from
// the most recent Type1 turn, not from the most recent mismatch.
inline std::vector<TurnClass> classify_turns(const Conversation& conv) {
    if (conv.turns.empty()) throw DomainError("conversation has no turns");
    std::vector<TurnClass> classes;
    classes.reserve(conv.turns.size());
    const BeliefState empty;
    std::optional<int> last_error_turn;
    for (std::size_t t = 0; t < conv.turns.size(); ++t) {
        const Turn& cur = conv.turns[t];
        const BeliefState& gt_prev = t == 0 ? empty : conv.turns[t - 1].ground_truth;
        const BeliefState& pred_prev = t == 0 ? empty : conv.turns[t - 1].prediction;
        TurnClass cls;
        if (exact_match(cur.ground_truth, cur.prediction)) {
            cls.kind = TurnKind::Exact;
        } else if (!local_match(static_cast<int>(t), cur.ground_truth, cur.prediction, gt_prev, pred_prev)) {
            cls.kind = TurnKind::Type1;
            last_error_turn = static_cast<int>(t);
        } else {
            cls.kind = TurnKind::Type2;
            if (last_error_turn.has_value()) cls.distance = static_cast<int>(t) - *last_error_turn;
        }
        classes.push_back(cls);
    }
    return classes;
}

// Mean turn credit for one conversation: 1 for exact matches, 0 for Type1
// turns, the decayed weight for Type2 turns.
inline double fga_conversation(const Conversation& conv, Lambda lam) {
    const std::vector<TurnClass> classes = classify_turns(conv);
    double f = 0.0;
    for (const TurnClass& cls : classes) f += turn_weight(cls, lam);
    return f / static_cast<double>(classes.size());
}

// (|S| - |X| - |Y| + |P cap Q|) / |S| where X and Y are the false negatives
// and false positives and P, Q their pair projections. The |P cap Q| term
// undoes the double count when a pair's value is wrong (it lands in both X
// and Y). A negative numerator means the data holds more distinct errors than
// the ontology has pairs, which is a diagnosis, not a score.
inline double slot_accuracy_turn(const BeliefState& gt, const BeliefState& pred, const Ontology& ont) {
    if (ont.empty()) throw OntologyEmptyError("slot accuracy needs a non-empty ontology");
    const BeliefState false_neg = set_difference(gt, pred);
    const BeliefState false_pos = set_difference(pred, gt);
    const std::vector<DomainSlot> p = project_pairs(false_neg);
    const std::vector<DomainSlot> q = project_pairs(false_pos);
    const auto errors = static_cast<long>(false_neg.size() + false_pos.size() - intersection_size(p, q));
    const auto total = static_cast<long>(ont.size());
    if (errors > total) {
        throw DomainError("slot errors (" + std::to_string(errors) + ") exceed ontology size " +
                          std::to_string(total));
    }
    return static_cast<double>(total - errors) / static_cast<double>(total);
}

// Triplets of the ground truth that carry an actual assignment.
inline BeliefState nonempty_goals(const BeliefState& gt, const NormalizationPolicy& policy) {
    std::vector<Triplet> kept;
    for (const Triplet& t : gt) {
        if (!policy.is_empty_value(t.value)) kept.push_back(t);
    }
    return BeliefState(std::move(kept));
}

// Recall of non-empty ground-truth triplets: |N_t cap pred| / |N_t|. Turns
// with N_t empty carry no signal and are reported as nullopt.
inline std::optional<double> aga_turn(const BeliefState& gt, const BeliefState& pred,
                                      const NormalizationPolicy& policy = {}) {
    const BeliefState goals = nonempty_goals(gt, policy);
    if (goals.empty()) return std::nullopt;
    return static_cast<double>(intersection_size(goals, pred)) / static_cast<double>(goals.size());
}

// Jaccard form |N_t cap pred| / |N_t union pred|: unlike the recall form it
// pays for extraneous predictions. nullopt only when both sides are empty.
inline std::optional<double> aga_turn_jaccard(const BeliefState& gt, const BeliefState& pred,
                                              const NormalizationPolicy& policy = {}) {
    const BeliefState goals = nonempty_goals(gt, policy);
    if (goals.empty() && pred.empty()) return std::nullopt;
    return static_cast<double>(intersection_size(goals, pred)) /
           static_cast<double>(union_size(goals, pred));
}

// lambda = -ln(1 - p) / t_f: the strength at which a mistake is forgotten by
// factor p within t_f turns.
inline Lambda lambda_from_forgetting(int forget_turns, double forget_fraction) {
    if (forget_turns < 1) throw DomainError("forgetting horizon must be a positive number of turns");
    if (!(forget_fraction >= 0.0) || forget_fraction >= 1.0) {
        throw DomainError("forgetting fraction must lie in [0, 1)");
    }
    return Lambda(-std::log1p(-forget_fraction) / static_cast<double>(forget_turns));
}

struct MetricConfig {
    std::vector<Lambda> lambdas;        // at least one
    NormalizationPolicy policy{};
    std::optional<Ontology> ontology{}; // required for slot accuracy only
    unsigned threads = 0;               // worker cap; 0 = hardware concurrency
};

// One model's numbers over a corpus: counts, rates, and one flexible-goal
// column per lambda. Rates are kept at full precision; rendering rounds.
struct DatasetMetrics {
    long n_turns = 0;
    long m1 = 0;  // exact-match turns
    long m2 = 0;  // locally correct turns (exact or Type2)
    double jga = 0.0;
    std::optional<double> sa;           // unset when no ontology was supplied
    std::optional<double> aga;          // unset when every turn had empty goals
    std::optional<double> aga_jaccard;  // unset when every turn was empty on both sides
    std::vector<double> lambdas;        // echo of the config, in order
    std::vector<double> fga;            // aligned with lambdas
    long ignored_turns = 0;             // turns skipped by the recall rule

    bool operator==(const DatasetMetrics&) const = default;
};

namespace detail {

// Neumaier-compensated accumulator, so that the cross-conversation fold is
// reproducible and insensitive to magnitude ordering.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }

    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct ConversationTally {
    long n_turns = 0;
    long m1 = 0;
    long m2 = 0;
    long ignored = 0;
    std::int64_t aga_hits = 0;
    std::int64_t aga_goals = 0;
    std::int64_t jac_hits = 0;
    std::int64_t jac_pool = 0;
    double sa_sum = 0.0;            // per-turn slot accuracies, added in turn order
    std::vector<double> fga_sum;    // per lambda: sum of turn weights, in turn order
};

inline ConversationTally tally_conversation(const Conversation& conv, const MetricConfig& config) {
    ConversationTally tally;
    tally.fga_sum.assign(config.lambdas.size(), 0.0);
    tally.n_turns = static_cast<long>(conv.turns.size());
    const std::vector<TurnClass> classes = classify_turns(conv);
    for (std::size_t t = 0; t < conv.turns.size(); ++t) {
        const Turn& turn = conv.turns[t];
        const TurnClass& cls = classes[t];
        if (cls.kind == TurnKind::Exact) ++tally.m1;
        if (cls.kind != TurnKind::Type1) ++tally.m2;
        for (std::size_t k = 0; k < config.lambdas.size(); ++k) {
            tally.fga_sum[k] += turn_weight(cls, config.lambdas[k]);
        }
        if (config.ontology.has_value()) {
            try {
                tally.sa_sum += slot_accuracy_turn(turn.ground_truth, turn.prediction, *config.ontology);
            } catch (const DomainError& e) {
                throw DomainError("dialogue " + conv.id + " turn " + std::to_string(turn.index) + ": " +
                                  e.what());
            }
        }
        const BeliefState goals = nonempty_goals(turn.ground_truth, config.policy);
        const auto hits = static_cast<std::int64_t>(intersection_size(goals, turn.prediction));
        if (goals.empty()) {
            ++tally.ignored;
        } else {
            tally.aga_hits += hits;
            tally.aga_goals += static_cast<std::int64_t>(goals.size());
        }
        if (!goals.empty() || !turn.prediction.empty()) {
            tally.jac_hits += hits;
            tally.jac_pool += static_cast<std::int64_t>(union_size(goals, turn.prediction));
        }
    }
    return tally;
}

}  // namespace detail

// Corpus-level aggregation, Table style. M1/M2 and the goal counters are
// integer sums; slot accuracy is the unweighted mean over turns; average goal
// accuracy is micro (summed numerators over summed denominators); each
// flexible-goal column is the summed per-conversation credit over the total
// turn count. Conversations are independent units of work: tallies may be
// computed on parallel workers, and the fold walks them in conversation order
// so the result is bit-identical to a sequential run.
inline DatasetMetrics evaluate_dataset(std::span<const Conversation> convs, const MetricConfig& config) {
    if (convs.empty()) throw ConfigError("evaluation needs at least one conversation");
    if (config.lambdas.empty()) throw ConfigError("evaluation needs at least one lambda");

    std::vector<detail::ConversationTally> tallies(convs.size());
    unsigned workers = config.threads != 0 ? config.threads : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min<unsigned>(workers, static_cast<unsigned>(convs.size()));

    if (workers <= 1) {
        for (std::size_t i = 0; i < convs.size(); ++i) {
            tallies[i] = detail::tally_conversation(convs[i], config);
        }
    } else {
        std::vector<std::exception_ptr> failures(convs.size());
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < convs.size(); i += workers) {
                    try {
                        tallies[i] = detail::tally_conversation(convs[i], config);
                    } catch (...) {
                        failures[i] = std::current_exception();
                    }
                }
            });
        }
        for (std::thread& th : pool) th.join();
        for (const std::exception_ptr& failure : failures) {
            if (failure) std::rethrow_exception(failure);
        }
    }

    DatasetMetrics out;
    for (const Lambda& lam : config.lambdas) out.lambdas.push_back(lam.value());
    std::int64_t aga_hits = 0, aga_goals = 0, jac_hits = 0, jac_pool = 0;
    detail::CompensatedSum sa_sum;
    std::vector<detail::CompensatedSum> fga_sums(config.lambdas.size());
    for (const detail::ConversationTally& tally : tallies) {
        out.n_turns += tally.n_turns;
        out.m1 += tally.m1;
        out.m2 += tally.m2;
        out.ignored_turns += tally.ignored;
        aga_hits += tally.aga_hits;
        aga_goals += tally.aga_goals;
        jac_hits += tally.jac_hits;
        jac_pool += tally.jac_pool;
        sa_sum.add(tally.sa_sum);
        for (std::size_t k = 0; k < fga_sums.size(); ++k) fga_sums[k].add(tally.fga_sum[k]);
    }

    out.jga = static_cast<double>(out.m1) / static_cast<double>(out.n_turns);
    if (config.ontology.has_value()) {
        out.sa = sa_sum.value() / static_cast<double>(out.n_turns);
    }
    if (aga_goals > 0) {
        out.aga = static_cast<double>(aga_hits) / static_cast<double>(aga_goals);
    }
    if (jac_pool > 0) {
        out.aga_jaccard = static_cast<double>(jac_hits) / static_cast<double>(jac_pool);
    }
    out.fga.reserve(fga_sums.size());
    for (const detail::CompensatedSum& f : fga_sums) {
        out.fga.push_back(f.value() / static_cast<double>(out.n_turns));
    }
    return out;
}

}  // namespace dsteval
