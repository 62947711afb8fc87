#pragma once

/* Event log ingestion and sessionization.
 *
 * Input records are CSV lines
 *
 *     student_id,timestamp,kind,correct,topic_id
 *
 * with an RFC 3339 timestamp (second resolution; fractions are truncated),
 * kind "lesson" or "question", and correct "1"/"0" for questions, empty for
 * lessons. A student's events split into a new session whenever the gap to
 * the previous event is at least the session gap (15 minutes by default).
 */

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcmix/error.hpp"
#include "mcmix/sequence.hpp"

namespace mcmix {

using Timestamp = std::chrono::sys_seconds;

inline constexpr std::chrono::seconds kDefaultSessionGap{15 * 60};

struct ActionEvent {
    std::string student_id;
    Timestamp timestamp{};
    Action action;
};

struct Session {
    std::string student_id;
    std::size_t session_index = 0;
    std::vector<ActionEvent> events;

    std::string session_id() const { return student_id + "#" + std::to_string(session_index); }
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline bool read_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

} // namespace detail

// Parses "YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)" to UTC seconds.
inline std::optional<Timestamp> parse_rfc3339(std::string_view s) {
    using namespace std::chrono;
    if (s.size() < 20) return std::nullopt;
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
        s[13] != ':' || s[16] != ':')
        return std::nullopt;
    int y, mo, d, h, mi, sec;
    if (!detail::read_int(s.substr(0, 4), y) || !detail::read_int(s.substr(5, 2), mo) ||
        !detail::read_int(s.substr(8, 2), d) || !detail::read_int(s.substr(11, 2), h) ||
        !detail::read_int(s.substr(14, 2), mi) || !detail::read_int(s.substr(17, 2), sec))
        return std::nullopt;
    if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
    const year_month_day ymd{year{y}, month{unsigned(mo)}, day{unsigned(d)}};
    if (!ymd.ok()) return std::nullopt;

    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        const auto start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == start) return std::nullopt;
    }
    if (pos >= s.size()) return std::nullopt;
    int offset_minutes = 0;
    if (s[pos] == 'Z' || s[pos] == 'z') {
        ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
        if (s.size() - pos != 6 || s[pos + 3] != ':') return std::nullopt;
        int oh, om;
        if (!detail::read_int(s.substr(pos + 1, 2), oh) || !detail::read_int(s.substr(pos + 4, 2), om) ||
            oh > 23 || om > 59)
            return std::nullopt;
        offset_minutes = (s[pos] == '+' ? 1 : -1) * (oh * 60 + om);
        pos += 6;
    } else {
        return std::nullopt;
    }
    if (pos != s.size()) return std::nullopt;
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_minutes};
}

inline std::optional<ActionEvent> parse_event_line(std::string_view line) {
    const auto fields = detail::split(line, ',');
    if (fields.size() != 5) return std::nullopt;
    ActionEvent ev;
    const auto student = detail::trim(fields[0]);
    const auto topic = detail::trim(fields[4]);
    if (student.empty() || topic.empty()) return std::nullopt;
    ev.student_id = std::string(student);
    ev.action.topic = std::string(topic);

    const auto ts = parse_rfc3339(detail::trim(fields[1]));
    if (!ts) return std::nullopt;
    ev.timestamp = *ts;

    const auto kind = detail::trim(fields[2]);
    const auto correct = detail::trim(fields[3]);
    if (kind == "lesson") {
        if (!correct.empty()) return std::nullopt;
        ev.action.kind = ActionKind::lesson;
    } else if (kind == "question") {
        ev.action.kind = ActionKind::question;
        if (correct == "1")
            ev.action.correct = true;
        else if (correct == "0")
            ev.action.correct = false;
        else
            return std::nullopt;
    } else {
        return std::nullopt;
    }
    return ev;
}

struct ParseResult {
    std::vector<ActionEvent> events;
    std::size_t records = 0;    // non-blank data lines seen
    std::size_t malformed = 0;  // of which rejected
};

inline constexpr double kMaxMalformedFraction = 0.5;

/// Reads every non-blank line; malformed lines are counted and skipped.
/// Throws io_error on a stream failure and data_error when more than half
/// the records are malformed.
inline ParseResult parse_events(std::istream& in, bool has_header = false) {
    if (!in) throw io_error("input stream is not readable");
    ParseResult result;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
            if (has_header) continue;
        }
        if (detail::trim(line).empty()) continue;
        ++result.records;
        if (auto ev = parse_event_line(line))
            result.events.push_back(std::move(*ev));
        else
            ++result.malformed;
    }
    if (in.bad()) throw io_error("read error on input stream");
    if (result.records > 0 && double(result.malformed) > kMaxMalformedFraction * double(result.records))
        throw data_error("too many malformed lines: " + std::to_string(result.malformed) + " of " +
                         std::to_string(result.records));
    return result;
}

/// Groups events per student (students in lexicographic order), stable-sorts
/// each student's events by timestamp and cuts a new session wherever the
/// gap to the previous event is >= gap.
inline std::vector<Session> sessionize(std::vector<ActionEvent> events,
                                       std::chrono::seconds gap = kDefaultSessionGap) {
    std::map<std::string, std::vector<ActionEvent>> by_student;
    for (auto& ev : events) by_student[ev.student_id].push_back(std::move(ev));

    std::vector<Session> sessions;
    for (auto& [student, evs] : by_student) {
        std::stable_sort(evs.begin(), evs.end(),
                         [](const ActionEvent& a, const ActionEvent& b) { return a.timestamp < b.timestamp; });
        std::size_t idx = 0;
        Session current{student, idx, {}};
        for (auto& ev : evs) {
            if (!current.events.empty() && ev.timestamp - current.events.back().timestamp >= gap) {
                sessions.push_back(std::move(current));
                current = Session{student, ++idx, {}};
            }
            current.events.push_back(std::move(ev));
        }
        if (!current.events.empty()) sessions.push_back(std::move(current));
    }
    return sessions;
}

inline EncodedSequence encode(const Session& session) {
    std::vector<Action> actions;
    actions.reserve(session.events.size());
    for (const auto& ev : session.events) actions.push_back(ev.action);
    return encode_session(actions, session.session_id());
}

struct CorpusStats {
    std::size_t n_sequences = 0;
    std::size_t n_actions = 0;
    std::size_t n_lessons = 0;
    std::size_t n_correct = 0;
    std::size_t n_wrong = 0;
    std::map<std::size_t, std::size_t> length_histogram;
    std::map<std::string, std::size_t> sessions_per_student;

    void add(const Session& s) {
        ++n_sequences;
        ++length_histogram[s.events.size()];
        ++sessions_per_student[s.student_id];
        for (const auto& ev : s.events) {
            ++n_actions;
            if (ev.action.kind == ActionKind::lesson)
                ++n_lessons;
            else if (*ev.action.correct)
                ++n_correct;
            else
                ++n_wrong;
        }
    }

    // Associative and commutative.
    CorpusStats& merge(const CorpusStats& o) {
        n_sequences += o.n_sequences;
        n_actions += o.n_actions;
        n_lessons += o.n_lessons;
        n_correct += o.n_correct;
        n_wrong += o.n_wrong;
        for (const auto& [len, c] : o.length_histogram) length_histogram[len] += c;
        for (const auto& [st, c] : o.sessions_per_student) sessions_per_student[st] += c;
        return *this;
    }

    std::size_t n_students() const noexcept { return sessions_per_student.size(); }

    double mean_sessions_per_student() const noexcept {
        if (sessions_per_student.empty()) return 0.0;
        double sum = 0.0;
        for (const auto& [_, c] : sessions_per_student) sum += double(c);
        return sum / double(sessions_per_student.size());
    }

    // Population standard deviation.
    double stddev_sessions_per_student() const noexcept {
        if (sessions_per_student.empty()) return 0.0;
        const double mean = mean_sessions_per_student();
        double ss = 0.0;
        for (const auto& [_, c] : sessions_per_student) ss += (double(c) - mean) * (double(c) - mean);
        return std::sqrt(ss / double(sessions_per_student.size()));
    }
};

inline CorpusStats corpus_stats(const std::vector<Session>& sessions) {
    CorpusStats stats;
    for (const auto& s : sessions) stats.add(s);
    return stats;
}

} // namespace mcmix
