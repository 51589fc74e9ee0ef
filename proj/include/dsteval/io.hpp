#pragma once
// Prediction-file and ontology readers, report assembly, and the renderers.
// The interchange format is JSON: a versioned document of dialogues, each a
// list of turns carrying ground-truth and predicted triplets as 3-element
// string arrays. Machine formats carry full precision; table and markdown
// render rates as percentages rounded to two decimals at display time only.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dsteval/core.hpp"
#include "dsteval/metrics.hpp"
#include "dsteval/trace.hpp"

namespace dsteval {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kFormatVersion = "1";

struct ParseOutcome {
    std::vector<Conversation> conversations;
    std::vector<std::string> warnings;
};

namespace detail {

using Json = nlohmann::ordered_json;

inline BeliefState read_state(const Json& node, const NormalizationPolicy& policy, const std::string& where,
                              const char* field, std::vector<std::string>& warnings) {
    if (!node.is_array()) throw SchemaError(where + ": " + field + " must be an array of triplets");
    std::vector<Triplet> triplets;
    triplets.reserve(node.size());
    for (const Json& item : node) {
        if (!item.is_array() || item.size() != 3 || !item[0].is_string() || !item[1].is_string() ||
            !item[2].is_string()) {
            throw SchemaError(where + ": every " + std::string(field) +
                              " entry must be a [domain, slot, value] string triple");
        }
        try {
            triplets.push_back(normalize_triplet(item[0].get<std::string>(), item[1].get<std::string>(),
                                                 item[2].get<std::string>(), policy));
        } catch (const EmptyFieldError& e) {
            throw SchemaError(where + ": " + e.what());
        }
    }
    const std::size_t raw_count = triplets.size();
    BeliefState state(std::move(triplets));
    if (state.size() < raw_count) {
        warnings.push_back(where + ": duplicate " + std::string(field) + " triplets collapsed");
    }
    return state;
}

inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline std::string format_percent(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", rate * 100.0);
    return buf;
}

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace detail

// 64-bit FNV-1a over the raw input bytes; good enough to audit that two
// reports were produced from the same file.
inline std::string content_digest(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline ParseOutcome parse_predictions(std::string_view text, const NormalizationPolicy& policy = {}) {
    detail::Json doc;
    try {
        doc = detail::Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("predictions: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("predictions: top level must be an object");
    if (!doc.contains("version") || !doc["version"].is_string()) {
        throw SchemaError("predictions: missing version string");
    }
    if (doc["version"].get<std::string>() != kFormatVersion) {
        throw SchemaError("predictions: unsupported format version '" + doc["version"].get<std::string>() +
                          "'");
    }
    if (!doc.contains("dialogues") || !doc["dialogues"].is_array()) {
        throw SchemaError("predictions: missing dialogues array");
    }

    ParseOutcome outcome;
    std::vector<std::string> seen_ids;
    for (const detail::Json& dlg : doc["dialogues"]) {
        if (!dlg.is_object() || !dlg.contains("dialogue_id") || !dlg["dialogue_id"].is_string()) {
            throw SchemaError("predictions: every dialogue needs a dialogue_id string");
        }
        Conversation conv;
        conv.id = dlg["dialogue_id"].get<std::string>();
        const std::string where = "dialogue " + conv.id;
        for (const std::string& prior : seen_ids) {
            if (prior == conv.id) throw SchemaError(where + ": duplicate dialogue_id");
        }
        seen_ids.push_back(conv.id);
        if (!dlg.contains("turns") || !dlg["turns"].is_array() || dlg["turns"].empty()) {
            throw SchemaError(where + ": needs a non-empty turns array");
        }
        int expected = 0;
        for (const detail::Json& turn_node : dlg["turns"]) {
            const std::string turn_where = where + " turn " + std::to_string(expected);
            if (!turn_node.is_object() || !turn_node.contains("turn_index") ||
                !turn_node["turn_index"].is_number_integer()) {
                throw SchemaError(turn_where + ": missing integer turn_index");
            }
            Turn turn;
            turn.index = turn_node["turn_index"].get<int>();
            if (turn.index != expected) {
                throw SchemaError(where + ": turn_index " + std::to_string(turn.index) +
                                  " breaks the contiguous 0.." + "N-1 order (expected " +
                                  std::to_string(expected) + ")");
            }
            ++expected;
            if (!turn_node.contains("ground_truth")) throw SchemaError(turn_where + ": missing ground_truth");
            if (!turn_node.contains("prediction")) throw SchemaError(turn_where + ": missing prediction");
            turn.ground_truth =
                detail::read_state(turn_node["ground_truth"], policy, turn_where, "ground_truth", outcome.warnings);
            turn.prediction =
                detail::read_state(turn_node["prediction"], policy, turn_where, "prediction", outcome.warnings);
            if (turn.ground_truth.empty()) outcome.warnings.push_back(turn_where + ": ground_truth is empty");
            for (const char* field : {"system_utterance", "user_utterance"}) {
                if (!turn_node.contains(field)) continue;
                if (!turn_node[field].is_string()) {
                    throw SchemaError(turn_where + ": " + field + " must be a string");
                }
                auto text_value = turn_node[field].get<std::string>();
                if (field[0] == 's') {
                    turn.system_utterance = std::move(text_value);
                } else {
                    turn.user_utterance = std::move(text_value);
                }
            }
            conv.turns.push_back(std::move(turn));
        }
        outcome.conversations.push_back(std::move(conv));
    }
    return outcome;
}

// Ontology document: a JSON array (bare, or under a "pairs" key) whose
// entries are {"domain": ..., "slot": ...} records or "domain-slot" strings.
inline Ontology parse_ontology(std::string_view text, const NormalizationPolicy& policy = {}) {
    detail::Json doc;
    try {
        doc = detail::Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("ontology: ") + e.what());
    }
    const detail::Json* list = &doc;
    if (doc.is_object()) {
        if (!doc.contains("pairs") || !doc["pairs"].is_array()) {
            throw SchemaError("ontology: expected an array or an object with a pairs array");
        }
        list = &doc["pairs"];
    } else if (!doc.is_array()) {
        throw SchemaError("ontology: expected an array or an object with a pairs array");
    }
    std::vector<DomainSlot> pairs;
    for (const detail::Json& entry : *list) {
        std::string domain, slot;
        if (entry.is_string()) {
            const auto text_entry = entry.get<std::string>();
            const auto dash = text_entry.find('-');
            if (dash == std::string::npos) {
                throw SchemaError("ontology: entry '" + text_entry + "' is not of the form domain-slot");
            }
            domain = text_entry.substr(0, dash);
            slot = text_entry.substr(dash + 1);
        } else if (entry.is_object() && entry.contains("domain") && entry.contains("slot") &&
                   entry["domain"].is_string() && entry["slot"].is_string()) {
            domain = entry["domain"].get<std::string>();
            slot = entry["slot"].get<std::string>();
        } else {
            throw SchemaError("ontology: entries must be domain-slot strings or {domain, slot} records");
        }
        domain = policy.apply(domain);
        slot = policy.apply(slot);
        if (domain.empty() || slot.empty()) {
            throw SchemaError("ontology: domain and slot must be non-empty");
        }
        pairs.push_back({std::move(domain), std::move(slot)});
    }
    if (pairs.empty()) throw SchemaError("ontology: lists no domain-slot pairs");
    return Ontology(std::move(pairs));
}

inline std::string serialize_predictions(std::span<const Conversation> convs) {
    detail::Json doc;
    doc["version"] = std::string(kFormatVersion);
    doc["dialogues"] = detail::Json::array();
    for (const Conversation& conv : convs) {
        detail::Json dlg;
        dlg["dialogue_id"] = conv.id;
        dlg["turns"] = detail::Json::array();
        for (const Turn& turn : conv.turns) {
            detail::Json node;
            node["turn_index"] = turn.index;
            auto state_node = [](const BeliefState& state) {
                detail::Json arr = detail::Json::array();
                for (const Triplet& t : state) arr.push_back({t.domain, t.slot, t.value});
                return arr;
            };
            node["ground_truth"] = state_node(turn.ground_truth);
            node["prediction"] = state_node(turn.prediction);
            if (turn.system_utterance) node["system_utterance"] = *turn.system_utterance;
            if (turn.user_utterance) node["user_utterance"] = *turn.user_utterance;
            dlg["turns"].push_back(std::move(node));
        }
        doc["dialogues"].push_back(std::move(dlg));
    }
    return doc.dump(2) + "\n";
}

enum class ReportFormat { Table, Csv, JsonLines, Markdown };

struct ModelRow {
    std::string model;
    DatasetMetrics metrics;
    std::string input_digest;

    bool operator==(const ModelRow&) const = default;
};

struct MetricReport {
    std::vector<ModelRow> rows;
    std::string config_echo;
    std::string tool_version{kToolVersion};

    bool operator==(const MetricReport&) const = default;
};

inline std::string echo_config(const MetricConfig& config) {
    detail::Json echo;
    echo["lambdas"] = config.lambdas.empty() ? detail::Json::array() : [&] {
        detail::Json arr = detail::Json::array();
        for (const Lambda& lam : config.lambdas) arr.push_back(lam.value());
        return arr;
    }();
    echo["lowercase"] = config.policy.lowercase;
    echo["trim_whitespace"] = config.policy.trim_whitespace;
    echo["empty_values"] = config.policy.empty_values;
    echo["ontology_pairs"] = config.ontology ? static_cast<std::int64_t>(config.ontology->size()) : 0;
    return echo.dump();
}

namespace detail {

inline std::vector<std::string> report_header(const DatasetMetrics& metrics) {
    std::vector<std::string> header{"model", "n_turns", "m1", "m2", "jga", "sa", "aga", "aga_jaccard"};
    for (double lam : metrics.lambdas) header.push_back("fga_" + format_double(lam));
    header.push_back("ignored_turns");
    return header;
}

inline std::vector<std::string> report_cells(const ModelRow& row, bool percent) {
    auto rate = [&](const std::optional<double>& v) -> std::string {
        if (!v.has_value()) return percent ? "n/a" : "";
        return percent ? format_percent(*v) : format_double(*v);
    };
    std::vector<std::string> cells{row.model,
                                   std::to_string(row.metrics.n_turns),
                                   std::to_string(row.metrics.m1),
                                   std::to_string(row.metrics.m2),
                                   rate(row.metrics.jga),
                                   rate(row.metrics.sa),
                                   rate(row.metrics.aga),
                                   rate(row.metrics.aga_jaccard)};
    for (double v : row.metrics.fga) cells.push_back(rate(v));
    cells.push_back(std::to_string(row.metrics.ignored_turns));
    return cells;
}

inline std::string provenance_line(const MetricReport& report) {
    std::string line = "# tool dst-eval " + std::string(report.tool_version);
    for (const ModelRow& row : report.rows) line += "  " + row.model + "=" + row.input_digest;
    if (!report.config_echo.empty()) line += "  config " + report.config_echo;
    return line;
}

}  // namespace detail

// Deterministic bytes for a finished report. Table and markdown show rates as
// two-decimal percentages and append a provenance footer; csv sticks to the
// fixed column set; jsonlines carries provenance fields inline per row.
inline std::string render_report(const MetricReport& report, ReportFormat format) {
    if (report.rows.empty()) throw ConfigError("report has no rows");
    const std::vector<std::string> header = detail::report_header(report.rows.front().metrics);

    if (format == ReportFormat::Csv) {
        std::string out;
        for (std::size_t i = 0; i < header.size(); ++i) {
            out += (i ? "," : "") + header[i];
        }
        out += '\n';
        for (const ModelRow& row : report.rows) {
            const auto cells = detail::report_cells(row, false);
            for (std::size_t i = 0; i < cells.size(); ++i) {
                out += (i ? "," : "") + detail::csv_escape(cells[i]);
            }
            out += '\n';
        }
        return out;
    }

    if (format == ReportFormat::JsonLines) {
        std::string out;
        for (const ModelRow& row : report.rows) {
            detail::Json line;
            line["model"] = row.model;
            line["n_turns"] = row.metrics.n_turns;
            line["m1"] = row.metrics.m1;
            line["m2"] = row.metrics.m2;
            line["jga"] = row.metrics.jga;
            auto opt = [](const std::optional<double>& v) {
                return v ? detail::Json(*v) : detail::Json(nullptr);
            };
            line["sa"] = opt(row.metrics.sa);
            line["aga"] = opt(row.metrics.aga);
            line["aga_jaccard"] = opt(row.metrics.aga_jaccard);
            for (std::size_t k = 0; k < row.metrics.fga.size(); ++k) {
                line["fga_" + detail::format_double(row.metrics.lambdas[k])] = row.metrics.fga[k];
            }
            line["ignored_turns"] = row.metrics.ignored_turns;
            line["input_digest"] = row.input_digest;
            line["config"] = report.config_echo;
            line["tool_version"] = std::string(report.tool_version);
            out += line.dump() + "\n";
        }
        return out;
    }

    std::vector<std::vector<std::string>> grid;
    grid.push_back(header);
    for (const ModelRow& row : report.rows) grid.push_back(detail::report_cells(row, true));

    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& cells : grid) {
        for (std::size_t i = 0; i < cells.size(); ++i) widths[i] = std::max(widths[i], cells[i].size());
    }

    std::string out;
    if (format == ReportFormat::Markdown) {
        for (std::size_t r = 0; r < grid.size(); ++r) {
            out += "|";
            for (std::size_t i = 0; i < grid[r].size(); ++i) {
                out += " " + grid[r][i] + std::string(widths[i] - grid[r][i].size(), ' ') + " |";
            }
            out += '\n';
            if (r == 0) {
                out += "|";
                for (std::size_t i = 0; i < widths.size(); ++i) {
                    out += std::string(widths[i] + 1, '-') + (i == 0 ? ":" : "-") + "|";
                }
                out += '\n';
            }
        }
        out += "\n" + detail::provenance_line(report) + "\n";
        return out;
    }

    for (const auto& cells : grid) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const bool last = i + 1 == cells.size();
            if (i == 0) {
                out += cells[i] + std::string(widths[i] - cells[i].size(), ' ');
            } else {
                out += std::string(widths[i] - cells[i].size(), ' ') + cells[i];
            }
            out += last ? "\n" : "  ";
        }
    }
    out += detail::provenance_line(report) + "\n";
    return out;
}

enum class TraceFormat { Text, JsonLines };

inline const char* class_code(TurnKind kind) {
    switch (kind) {
        case TurnKind::Exact: return "E";
        case TurnKind::Type1: return "1";
        case TurnKind::Type2: return "2";
    }
    return "?";
}

inline const char* class_name(TurnKind kind) {
    switch (kind) {
        case TurnKind::Exact: return "exact";
        case TurnKind::Type1: return "type1";
        case TurnKind::Type2: return "type2";
    }
    return "?";
}

// One line per turn: class code, active error turn, and the per-lambda
// credits at four decimals.
inline std::string render_trace(const ErrorTrace& trace, TraceFormat format) {
    if (format == TraceFormat::JsonLines) {
        std::string out;
        for (const TraceEntry& entry : trace.entries) {
            detail::Json line;
            line["conversation"] = trace.conversation_id;
            line["turn"] = entry.turn_index;
            line["class"] = class_name(entry.cls.kind);
            line["t_err"] = entry.active_error_turn ? detail::Json(*entry.active_error_turn)
                                                    : detail::Json(nullptr);
            line["distance"] = entry.cls.kind == TurnKind::Type2 && entry.cls.distance
                                   ? detail::Json(*entry.cls.distance)
                                   : detail::Json(nullptr);
            detail::Json weights;
            for (std::size_t k = 0; k < trace.lambdas.size(); ++k) {
                weights[detail::format_double(trace.lambdas[k])] = entry.weights[k];
            }
            line["weights"] = std::move(weights);
            out += line.dump() + "\n";
        }
        return out;
    }

    std::string out = "# conversation " + trace.conversation_id + "\n";
    out += "turn  class  t_err";
    for (double lam : trace.lambdas) out += "  w@" + detail::format_double(lam);
    out += '\n';
    for (const TraceEntry& entry : trace.entries) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%4d  %5s  ", entry.turn_index, class_code(entry.cls.kind));
        out += buf;
        out += entry.active_error_turn ? std::to_string(*entry.active_error_turn) : "-";
        for (std::size_t k = 0; k < entry.weights.size(); ++k) {
            std::snprintf(buf, sizeof buf, "  %.4f", entry.weights[k]);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

}  // namespace dsteval
