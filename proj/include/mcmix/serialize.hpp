#pragma once

/* File formats.
 *
 *   sessions CSV   session_id,student_id,states      (states space-separated,
 *                                                     e.g. "S Qr Qw_c E")
 *   labels CSV     session_id,generator_index,label
 *   assignments    session_id,chain_index,log_likelihood
 *   model JSON     states, edge set, k, config echo, chains (8x8 row-major,
 *                  rows/columns in `states` order), diagnostics
 *   DOT            one digraph per chain, pruned by cumulative mass
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "mcmix/clustering.hpp"
#include "mcmix/error.hpp"
#include "mcmix/ingest.hpp"
#include "mcmix/sequence.hpp"

namespace mcmix {

using ordered_json = nlohmann::ordered_json;

inline constexpr std::string_view kModelFormat = "mcmix.model";
inline constexpr int kModelVersion = 1;

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

// ---------------------------------------------------------------- sessions

struct SessionRecord {
    std::string session_id;
    std::string student_id;
    EncodedSequence sequence;
};

inline std::string states_to_text(const EncodedSequence& seq) {
    std::string out;
    for (auto s : seq.states()) {
        if (!out.empty()) out += ' ';
        out += label(s);
    }
    return out;
}

inline EncodedSequence states_from_text(std::string_view text, std::string source_id) {
    std::vector<State> states;
    std::size_t pos = 0;
    while (pos < text.size()) {
        while (pos < text.size() && text[pos] == ' ') ++pos;
        if (pos >= text.size()) break;
        const auto end = std::min(text.find(' ', pos), text.size());
        const auto tok = text.substr(pos, end - pos);
        const auto st = state_from_label(tok);
        if (!st) throw data_error("unknown state label '" + std::string(tok) + "'");
        states.push_back(*st);
        pos = end;
    }
    return EncodedSequence(std::move(states), std::move(source_id));
}

inline void write_sessions(std::ostream& out, const std::vector<SessionRecord>& records) {
    out << "session_id,student_id,states\n";
    for (const auto& r : records) out << r.session_id << ',' << r.student_id << ',' << states_to_text(r.sequence) << '\n';
}

inline std::vector<SessionRecord> read_sessions(std::istream& in) {
    if (!in) throw io_error("sessions stream is not readable");
    std::vector<SessionRecord> out;
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "session_id,student_id,states")
        throw data_error("sessions file: missing header 'session_id,student_id,states'");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        const auto f = detail::split(t, ',');
        if (f.size() != 3) throw data_error("sessions file line " + std::to_string(lineno) + ": expected 3 fields");
        SessionRecord r{std::string(f[0]), std::string(f[1]), {}};
        try {
            r.sequence = states_from_text(f[2], r.session_id);
        } catch (const Error& e) {
            throw data_error("sessions file line " + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(std::move(r));
    }
    if (in.bad()) throw io_error("read error on sessions stream");
    return out;
}

// ---------------------------------------------------------------- labels

struct LabelRecord {
    std::string session_id;
    std::size_t generator_index = 0;
    std::size_t label = 0;
};

inline void write_labels(std::ostream& out, const std::vector<LabelRecord>& labels) {
    out << "session_id,generator_index,label\n";
    for (const auto& l : labels) out << l.session_id << ',' << l.generator_index << ',' << l.label << '\n';
}

// Reads session_id -> value of `column` from a labels CSV.
inline std::map<std::string, std::size_t> read_label_column(std::istream& in, const std::string& column) {
    if (!in) throw io_error("labels stream is not readable");
    std::string line;
    if (!std::getline(in, line)) throw data_error("labels file is empty");
    const auto header = detail::split(detail::trim(line), ',');
    std::size_t id_col = header.size(), val_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "session_id") id_col = i;
        if (header[i] == column) val_col = i;
    }
    if (id_col == header.size() || val_col == header.size())
        throw data_error("labels file lacks columns session_id and " + column);
    std::map<std::string, std::size_t> out;
    while (std::getline(in, line)) {
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        const auto f = detail::split(t, ',');
        int v = 0;
        if (f.size() != header.size() || !detail::read_int(f[val_col], v))
            throw data_error("labels file: malformed line '" + std::string(t) + "'");
        out[std::string(f[id_col])] = std::size_t(v);
    }
    return out;
}

// ---------------------------------------------------------------- model

inline ordered_json edge_set_json() {
    ordered_json edges = ordered_json::object();
    for (auto from : kAllStates) {
        ordered_json targets = ordered_json::array();
        for (auto to : kAllStates)
            if (allowed_edge(from, to)) targets.push_back(std::string(label(to)));
        edges[std::string(label(from))] = std::move(targets);
    }
    return edges;
}

inline ordered_json states_json() {
    ordered_json s = ordered_json::array();
    for (auto l : kStateLabels) s.push_back(std::string(l));
    return s;
}

inline ordered_json chain_json(const MarkovChain& c) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : c.matrix()) rows.push_back(r);
    return rows;
}

inline ordered_json config_json(const ClusterConfig& c) {
    return {{"k", c.k},
            {"restarts", c.restarts},
            {"convergence_fraction", c.convergence_fraction},
            {"max_iterations", c.max_iterations},
            {"smoothing", c.smoothing},
            {"rng_seed", c.rng_seed}};
}

inline ordered_json model_json(const ClusterModel& m) {
    ordered_json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["states"] = states_json();
    j["edges"] = edge_set_json();
    j["k"] = m.chains.size();
    j["config"] = config_json(m.config);
    ordered_json chains = ordered_json::array();
    for (const auto& c : m.chains) chains.push_back(chain_json(c));
    j["chains"] = std::move(chains);

    ordered_json runs = ordered_json::array();
    for (std::size_t r = 0; r < m.runs.size(); ++r) {
        const auto& d = m.runs[r];
        runs.push_back({{"restart", r},
                        {"sum_log_likelihood", d.sum_log_likelihood},
                        {"iterations", d.iterations},
                        {"unsupported_count", d.unsupported_count},
                        {"reseeded_clusters", d.reseeded_clusters},
                        {"reassignment_history", d.reassignment_history},
                        {"log_likelihood_history", d.log_likelihood_history}});
    }
    j["diagnostics"] = {{"sum_log_likelihood", m.sum_log_likelihood},
                        {"iterations_run", m.iterations_run},
                        {"unsupported_count", m.unsupported_count},
                        {"reseeded_clusters", m.reseeded_clusters},
                        {"selected_restart", m.selected_restart},
                        {"reassignment_history", m.reassignment_history},
                        {"log_likelihood_history", m.log_likelihood_history},
                        {"runs", std::move(runs)}};
    return j;
}

// Bare chain set (e.g. synthetic generators) in the model layout.
inline ordered_json chains_json(const std::vector<MarkovChain>& chains) {
    ordered_json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["states"] = states_json();
    j["edges"] = edge_set_json();
    j["k"] = chains.size();
    ordered_json cs = ordered_json::array();
    for (const auto& c : chains) cs.push_back(chain_json(c));
    j["chains"] = std::move(cs);
    return j;
}

struct LoadedModel {
    std::vector<MarkovChain> chains;
    ordered_json document;
};

inline LoadedModel read_model(std::istream& in) {
    if (!in) throw io_error("model stream is not readable");
    LoadedModel out;
    try {
        out.document = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(std::string("model file is not valid JSON: ") + e.what());
    }
    const auto& j = out.document;
    if (!j.is_object() || !j.contains("states") || !j.contains("chains"))
        throw data_error("model file lacks 'states' or 'chains'");
    if (j["states"] != states_json())
        throw data_error("model state labels do not match " + states_json().dump());
    try {
        for (const auto& c : j["chains"]) {
            TransitionMatrix p{};
            if (c.size() != kNumStates) throw data_error("chain must have 8 rows");
            for (std::size_t r = 0; r < kNumStates; ++r) {
                if (c[r].size() != kNumStates) throw data_error("chain row must have 8 entries");
                for (std::size_t col = 0; col < kNumStates; ++col) p[r][col] = c[r][col].get<double>();
            }
            out.chains.emplace_back(p);
        }
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("model chains malformed: ") + e.what());
    }
    if (out.chains.empty()) throw data_error("model has no chains");
    if (j.contains("k") && j["k"] != out.chains.size()) throw data_error("model 'k' disagrees with chain count");
    return out;
}

// ---------------------------------------------------------------- DOT

struct DotEdge {
    State from;
    State to;
    double probability;
};

namespace detail {

// Sorted descending by probability, ties by canonical state order; emits
// until the running sum first reaches coverage * total.
template <typename Key>
std::vector<DotEdge> take_until_covered(std::vector<DotEdge> edges, double coverage, Key tie_key) {
    std::stable_sort(edges.begin(), edges.end(), [&](const DotEdge& a, const DotEdge& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        return index(tie_key(a)) < index(tie_key(b));
    });
    double total = 0.0;
    for (const auto& e : edges) total += e.probability;
    std::vector<DotEdge> out;
    double cum = 0.0;
    const double target = coverage * total * (1.0 - 1e-12);
    for (const auto& e : edges) {
        out.push_back(e);
        cum += e.probability;
        if (cum >= target) break;
    }
    return out;
}

} // namespace detail

/// Edges drawn for a chain. For every state except E: nonzero outgoing
/// edges, excluding edges into E, covering `coverage` of that outgoing mass.
/// For E: nonzero incoming edges covering `coverage` of the incoming mass.
inline std::vector<DotEdge> select_dot_edges(const MarkovChain& chain, double coverage) {
    if (!(coverage > 0.0 && coverage <= 1.0)) throw usage_error("coverage must lie in (0, 1]");
    std::vector<DotEdge> selected;
    for (auto from : kAllStates) {
        if (from == State::E) continue;
        std::vector<DotEdge> out;
        for (auto to : kAllStates)
            if (to != State::E && chain(from, to) > 0.0) out.push_back({from, to, chain(from, to)});
        auto kept = detail::take_until_covered(std::move(out), coverage, [](const DotEdge& e) { return e.to; });
        selected.insert(selected.end(), kept.begin(), kept.end());
    }
    std::vector<DotEdge> into_end;
    for (auto from : kAllStates)
        if (chain(from, State::E) > 0.0) into_end.push_back({from, State::E, chain(from, State::E)});
    auto kept = detail::take_until_covered(std::move(into_end), coverage, [](const DotEdge& e) { return e.from; });
    selected.insert(selected.end(), kept.begin(), kept.end());
    return selected;
}

inline constexpr double kPenWidthScale = 10.0;

inline std::string to_dot(const MarkovChain& chain, std::size_t chain_index, double coverage) {
    const auto edges = select_dot_edges(chain, coverage);
    std::ostringstream os;
    os << "digraph chain_" << chain_index << " {\n";
    os << "  rankdir=LR;\n";
    os << "  node [shape=circle];\n";
    for (auto s : kAllStates) os << "  \"" << label(s) << "\";\n";
    char buf[128];
    for (const auto& e : edges) {
        std::snprintf(buf, sizeof buf, "  \"%s\" -> \"%s\" [label=\"%.3f\", penwidth=%.3f];\n",
                      std::string(label(e.from)).c_str(), std::string(label(e.to)).c_str(), e.probability,
                      kPenWidthScale * e.probability);
        os << buf;
    }
    os << "}\n";
    return os.str();
}

} // namespace mcmix
