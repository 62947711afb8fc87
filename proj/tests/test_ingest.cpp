#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "mcmix/mcmix.hpp"

using namespace mcmix;
using namespace std::chrono_literals;

namespace {

ActionEvent event(const std::string& student, long long t, ActionKind kind = ActionKind::question,
                  std::optional<bool> correct = true, const std::string& topic = "t1") {
    return {student, Timestamp{std::chrono::seconds{t}}, {kind, correct, topic}};
}

} // namespace

TEST(ParseEvents, QuestionLine) {
    std::istringstream in("s1,2016-09-01T10:00:00Z,question,1,t7\n");
    const auto r = parse_events(in);
    ASSERT_EQ(r.events.size(), 1u);
    const auto& ev = r.events[0];
    EXPECT_EQ(ev.student_id, "s1");
    EXPECT_EQ(ev.action.kind, ActionKind::question);
    EXPECT_EQ(ev.action.correct, std::optional<bool>(true));
    EXPECT_EQ(ev.action.topic, "t7");
    const auto expected = std::chrono::sys_days{std::chrono::year{2016} / 9 / 1} + 10h;
    EXPECT_EQ(ev.timestamp, expected);
}

TEST(ParseEvents, LessonLineHasNoCorrectness) {
    std::istringstream in("s1,2016-09-01T10:00:00Z,lesson,,t7\n");
    const auto r = parse_events(in);
    ASSERT_EQ(r.events.size(), 1u);
    EXPECT_EQ(r.events[0].action.kind, ActionKind::lesson);
    EXPECT_FALSE(r.events[0].action.correct.has_value());
}

TEST(ParseEvents, MalformedLinesAreCounted) {
    std::istringstream in(
        "s1,2016-09-01T10:00:00Z,lesson,,t7\n"
        "s1,notatime,lesson,,t7\n"
        "s1,2016-09-01T10:01:00Z,question,0,t7\n");
    const auto r = parse_events(in);
    EXPECT_EQ(r.events.size(), 2u);
    EXPECT_EQ(r.malformed, 1u);
    EXPECT_EQ(r.records, 3u);
}

TEST(ParseEvents, RejectsStructurallyBadRecords) {
    for (const char* line : {"s1,2016-09-01T10:00:00Z,question,,t7",     // question without flag
                             "s1,2016-09-01T10:00:00Z,lesson,1,t7",       // lesson with flag
                             "s1,2016-09-01T10:00:00Z,video,,t7",         // unknown kind
                             "s1,2016-09-01T10:00:00Z,question,1",        // missing column
                             ",2016-09-01T10:00:00Z,question,1,t7",       // empty student
                             "s1,2016-02-30T10:00:00Z,question,1,t7",     // impossible date
                             "s1,2016-09-01T10:00:00,question,1,t7",      // no zone
                             "s1,2016-09-01T25:00:00Z,question,1,t7"}) {  // bad hour
        EXPECT_FALSE(parse_event_line(line).has_value()) << line;
    }
}

TEST(ParseEvents, OffsetsAndFractionsNormalizeToUtc) {
    const auto z = parse_rfc3339("2016-09-01T10:00:00Z");
    ASSERT_TRUE(z);
    EXPECT_EQ(parse_rfc3339("2016-09-01T12:00:00+02:00"), z);
    EXPECT_EQ(parse_rfc3339("2016-09-01T09:30:00-00:30"), z);
    EXPECT_EQ(parse_rfc3339("2016-09-01T10:00:00.999Z"), z);
}

TEST(ParseEvents, MajorityMalformedIsFatal) {
    std::istringstream in(
        "s1,2016-09-01T10:00:00Z,lesson,,t7\n"
        "garbage\n"
        "more garbage\n");
    try {
        parse_events(in);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
    }
}

TEST(ParseEvents, ExactlyHalfMalformedIsTolerated) {
    std::istringstream in("s1,2016-09-01T10:00:00Z,lesson,,t7\ngarbage\n");
    EXPECT_EQ(parse_events(in).malformed, 1u);
}

TEST(ParseEvents, HeaderAndBlankLinesSkipped) {
    std::istringstream in("student_id,timestamp,kind,correct,topic_id\n\ns1,2016-09-01T10:00:00Z,lesson,,t7\n\n");
    const auto r = parse_events(in, true);
    EXPECT_EQ(r.events.size(), 1u);
    EXPECT_EQ(r.malformed, 0u);
}

TEST(Sessionize, GapJustUnderFifteenMinutesStaysTogether) {
    const auto s = sessionize({event("a", 0), event("a", 899)});
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].events.size(), 2u);
}

TEST(Sessionize, GapOfExactlyFifteenMinutesSplits) {
    const auto s = sessionize({event("a", 0), event("a", 900)});
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].events.size(), 1u);
    EXPECT_EQ(s[1].events.size(), 1u);
    EXPECT_EQ(s[1].session_index, 1u);
}

TEST(Sessionize, SingleEvent) {
    const auto s = sessionize({event("a", 42)});
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].events.size(), 1u);
}

TEST(Sessionize, CustomGap) {
    EXPECT_EQ(sessionize({event("a", 0), event("a", 120)}, 60s).size(), 2u);
}

TEST(Sessionize, SortsStablyAndGroupsByStudent) {
    std::vector<ActionEvent> evs{event("b", 100, ActionKind::lesson, std::nullopt, "x"),
                                 event("a", 50), event("b", 10),
                                 event("b", 100, ActionKind::question, false, "y")};
    const auto s = sessionize(evs);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].student_id, "a");
    ASSERT_EQ(s[1].events.size(), 3u);
    EXPECT_EQ(s[1].events[0].timestamp.time_since_epoch().count(), 10);
    // Equal timestamps keep input order.
    EXPECT_EQ(s[1].events[1].action.topic, "x");
    EXPECT_EQ(s[1].events[2].action.topic, "y");
}

TEST(Sessionize, PartitionProperty) {
    Rng rng = make_rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ActionEvent> evs;
        const auto n = 1 + uniform_index(rng, 200);
        for (std::size_t i = 0; i < n; ++i) {
            auto ev = event("s" + std::to_string(uniform_index(rng, 5)), (long long)uniform_index(rng, 20000));
            ev.action.topic = "t" + std::to_string(i);  // unique tag to track identity
            evs.push_back(ev);
        }
        const auto sessions = sessionize(evs);

        std::map<std::string, std::vector<ActionEvent>> expected;
        for (const auto& e : evs) expected[e.student_id].push_back(e);
        for (auto& [_, v] : expected)
            std::stable_sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.timestamp < b.timestamp; });

        std::map<std::string, std::vector<ActionEvent>> rebuilt;
        for (const auto& s : sessions) {
            for (std::size_t i = 1; i < s.events.size(); ++i)
                EXPECT_LT(s.events[i].timestamp - s.events[i - 1].timestamp, kDefaultSessionGap);
            auto& v = rebuilt[s.student_id];
            if (!v.empty()) {
                EXPECT_GE(s.events.front().timestamp - v.back().timestamp, kDefaultSessionGap);
            }
            v.insert(v.end(), s.events.begin(), s.events.end());
        }
        ASSERT_EQ(rebuilt.size(), expected.size());
        for (const auto& [student, v] : expected) {
            const auto& r = rebuilt[student];
            ASSERT_EQ(r.size(), v.size());
            for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(r[i].action.topic, v[i].action.topic);
        }
    }
}

TEST(CorpusStats, SingleCorrectQuestion) {
    const auto st = corpus_stats(sessionize({event("a", 0)}));
    EXPECT_EQ(st.n_sequences, 1u);
    EXPECT_EQ(st.n_actions, 1u);
    EXPECT_EQ(st.n_correct, 1u);
    EXPECT_EQ(st.length_histogram.at(1), 1u);
}

TEST(CorpusStats, LessonAndWrongAnswer) {
    const auto st = corpus_stats(
        sessionize({event("a", 0, ActionKind::lesson, std::nullopt), event("a", 5000, ActionKind::question, false)}));
    EXPECT_EQ(st.n_sequences, 2u);
    EXPECT_EQ(st.n_lessons, 1u);
    EXPECT_EQ(st.n_wrong, 1u);
    EXPECT_EQ(st.n_actions, 2u);
}

TEST(CorpusStats, SessionsPerStudentMeanAndStddev) {
    std::vector<ActionEvent> evs;
    for (int i = 0; i < 2; ++i) evs.push_back(event("a", i * 10000));
    for (int i = 0; i < 4; ++i) evs.push_back(event("b", i * 10000));
    const auto st = corpus_stats(sessionize(evs));
    EXPECT_DOUBLE_EQ(st.mean_sessions_per_student(), 3.0);
    EXPECT_DOUBLE_EQ(st.stddev_sessions_per_student(), 1.0);
}

TEST(CorpusStats, IdentityAndMergeProperty) {
    Rng rng = make_rng(123);
    std::vector<ActionEvent> evs;
    for (int i = 0; i < 500; ++i) {
        const auto kind = uniform_index(rng, 3);
        evs.push_back(event("s" + std::to_string(uniform_index(rng, 7)), (long long)uniform_index(rng, 100000),
                            kind == 0 ? ActionKind::lesson : ActionKind::question,
                            kind == 0 ? std::nullopt : std::optional<bool>(kind == 1)));
    }
    const auto sessions = sessionize(evs);
    const auto whole = corpus_stats(sessions);
    EXPECT_EQ(whole.n_actions, whole.n_lessons + whole.n_correct + whole.n_wrong);
    EXPECT_EQ(whole.n_actions, 500u);

    const auto mid = sessions.begin() + std::ptrdiff_t(sessions.size() / 2);
    auto left = corpus_stats({sessions.begin(), mid});
    auto right = corpus_stats({mid, sessions.end()});
    auto lr = left;
    lr.merge(right);
    auto rl = right;
    rl.merge(left);
    for (const auto* m : {&lr, &rl}) {
        EXPECT_EQ(m->n_sequences, whole.n_sequences);
        EXPECT_EQ(m->n_actions, whole.n_actions);
        EXPECT_EQ(m->length_histogram, whole.length_histogram);
        EXPECT_EQ(m->sessions_per_student, whole.sessions_per_student);
    }
}

TEST(Encode, SessionUsesTopicChanges) {
    const auto s = sessionize({event("a", 0, ActionKind::question, true, "1"),
                               event("a", 10, ActionKind::lesson, std::nullopt, "2")});
    const auto enc = encode(s.at(0));
    EXPECT_EQ(enc.states(), (std::vector<State>{State::S, State::Qr, State::L_c, State::E}));
    EXPECT_EQ(enc.source_id(), "a#0");
}
