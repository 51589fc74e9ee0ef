#pragma once
// Domain model shared by every metric kernel: (domain, slot, value) triplets,
// belief states with set semantics, conversations, ontologies, and the token
// normalization policy.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dsteval {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A triplet whose domain or slot normalized to an empty token.
struct EmptyFieldError : Error {
    using Error::Error;
};

// Slot accuracy asked to divide by an empty ontology.
struct OntologyEmptyError : Error {
    using Error::Error;
};

// Out-of-range metric argument (negative lambda, p outside [0,1), ...).
struct DomainError : Error {
    using Error::Error;
};

// Invalid generator or evaluation configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed input document.
struct ParseError : Error {
    using Error::Error;
};

// Well-formed document that violates the schema (missing field,
// non-contiguous turn indices, duplicate dialogue id, ...).
struct SchemaError : Error {
    using Error::Error;
};

// One (domain, slot, slot-value) intent unit. Fields are compared verbatim;
// run raw tokens through a NormalizationPolicy first.
struct Triplet {
    std::string domain;
    std::string slot;
    std::string value;

    auto operator<=>(const Triplet&) const = default;
};

// A (domain, slot) pair: a Triplet with the value dropped.
struct DomainSlot {
    std::string domain;
    std::string slot;

    auto operator<=>(const DomainSlot&) const = default;
};

inline DomainSlot pair_of(const Triplet& t) {
    return {t.domain, t.slot};
}

// Token folding applied before any comparison, plus the vocabulary of
// slot-values that mean "no assignment". Applying the policy twice equals
// applying it once.
struct NormalizationPolicy {
    bool lowercase = true;
    bool trim_whitespace = true;
    std::vector<std::string> empty_values{"", "none"};

    std::string apply(std::string_view raw) const {
        std::string_view v = raw;
        if (trim_whitespace) {
            while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
            while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
        }
        std::string out(v);
        if (lowercase) {
            for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        return out;
    }

    // True when a normalized slot-value counts as "no assignment".
    bool is_empty_value(std::string_view normalized_value) const {
        for (const auto& entry : empty_values) {
            if (normalized_value == apply(entry)) return true;
        }
        return false;
    }
};

// Fold a raw (domain, slot, value) through the policy. Domain and slot must
// survive non-empty; a value may normalize to "" and then reads as "no
// assignment" under the policy's empty-value vocabulary.
inline Triplet normalize_triplet(std::string_view domain, std::string_view slot, std::string_view value,
                                 const NormalizationPolicy& policy = {}) {
    Triplet t{policy.apply(domain), policy.apply(slot), policy.apply(value)};
    if (t.domain.empty()) throw EmptyFieldError("triplet domain is empty after normalization");
    if (t.slot.empty()) throw EmptyFieldError("triplet slot is empty after normalization");
    return t;
}

// A set of triplets: the cumulative ground truth B_t or a model's prediction
// of it. Stored sorted and deduplicated. Several values for one (domain,
// slot) pair are representable; that is what makes value conflicts visible.
class BeliefState {
public:
    BeliefState() = default;

    explicit BeliefState(std::vector<Triplet> triplets) : triplets_(std::move(triplets)) {
        std::sort(triplets_.begin(), triplets_.end());
        triplets_.erase(std::unique(triplets_.begin(), triplets_.end()), triplets_.end());
    }

    BeliefState(std::initializer_list<Triplet> triplets)
        : BeliefState(std::vector<Triplet>(triplets)) {}

    void insert(Triplet t) {
        auto it = std::lower_bound(triplets_.begin(), triplets_.end(), t);
        if (it == triplets_.end() || *it != t) triplets_.insert(it, std::move(t));
    }

    // Drop every value held for the pair (used for overwrites).
    void erase_pair(const DomainSlot& p) {
        std::erase_if(triplets_, [&](const Triplet& t) { return pair_of(t) == p; });
    }

    bool contains(const Triplet& t) const {
        return std::binary_search(triplets_.begin(), triplets_.end(), t);
    }

    bool has_pair(const DomainSlot& p) const {
        return std::any_of(triplets_.begin(), triplets_.end(),
                           [&](const Triplet& t) { return pair_of(t) == p; });
    }

    std::size_t size() const noexcept { return triplets_.size(); }
    bool empty() const noexcept { return triplets_.empty(); }
    const std::vector<Triplet>& items() const noexcept { return triplets_; }
    auto begin() const noexcept { return triplets_.begin(); }
    auto end() const noexcept { return triplets_.end(); }

    bool operator==(const BeliefState&) const = default;

private:
    std::vector<Triplet> triplets_;  // sorted, unique
};

// {x in a : x not in b}
inline BeliefState set_difference(const BeliefState& a, const BeliefState& b) {
    std::vector<Triplet> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return BeliefState(std::move(out));
}

inline BeliefState set_intersection(const BeliefState& a, const BeliefState& b) {
    std::vector<Triplet> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return BeliefState(std::move(out));
}

inline BeliefState set_union(const BeliefState& a, const BeliefState& b) {
    std::vector<Triplet> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return BeliefState(std::move(out));
}

// True when every element of inner is also in outer.
inline bool is_subset(const BeliefState& inner, const BeliefState& outer) {
    return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

template <typename T>
std::size_t intersection_size(const std::vector<T>& a, const std::vector<T>& b) {
    std::size_t n = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++n, ++ia, ++ib;
        }
    }
    return n;
}

inline std::size_t intersection_size(const BeliefState& a, const BeliefState& b) {
    return intersection_size(a.items(), b.items());
}

inline std::size_t union_size(const BeliefState& a, const BeliefState& b) {
    return a.size() + b.size() - intersection_size(a, b);
}

// Image of the state under value-dropping: the unique (domain, slot) pairs.
inline std::vector<DomainSlot> project_pairs(const BeliefState& s) {
    std::vector<DomainSlot> out;
    out.reserve(s.size());
    for (const Triplet& t : s) out.push_back(pair_of(t));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct Turn {
    int index = 0;
    BeliefState ground_truth;
    BeliefState prediction;
    std::optional<std::string> system_utterance;
    std::optional<std::string> user_utterance;

    bool operator==(const Turn&) const = default;
};

struct Conversation {
    std::string id;
    std::vector<Turn> turns;  // index values 0..N-1, contiguous

    bool operator==(const Conversation&) const = default;
};

// The universe S of (domain, slot) pairs a dataset can talk about. |S| is the
// slot-accuracy denominator.
class Ontology {
public:
    Ontology() = default;

    explicit Ontology(std::vector<DomainSlot> pairs) : pairs_(std::move(pairs)) {
        std::sort(pairs_.begin(), pairs_.end());
        pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());
    }

    std::size_t size() const noexcept { return pairs_.size(); }
    bool empty() const noexcept { return pairs_.empty(); }
    const std::vector<DomainSlot>& pairs() const noexcept { return pairs_; }

    bool operator==(const Ontology&) const = default;

private:
    std::vector<DomainSlot> pairs_;  // sorted, unique
};

}  // namespace dsteval
