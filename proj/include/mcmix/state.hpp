#pragma once

/* The eight-state session model.
 *
 *   S    start sentinel           E     end sentinel
 *   L    lesson, same topic       L_c   lesson, changed topic
 *   Qr   right answer, same       Qr_c  right answer, changed topic
 *   Qw   wrong answer, same       Qw_c  wrong answer, changed topic
 *
 * Edge set: S -> {L, Qr, Qw}; every action state -> all six action states
 * and E; E is absorbing with no outgoing edges.
 */

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace mcmix {

enum class State : std::uint8_t { S = 0, E, L, Qr, Qw, L_c, Qr_c, Qw_c };

inline constexpr std::size_t kNumStates = 8;

inline constexpr std::array<State, kNumStates> kAllStates = {
    State::S, State::E, State::L, State::Qr, State::Qw, State::L_c, State::Qr_c, State::Qw_c};

inline constexpr std::array<State, 6> kActionStates = {
    State::L, State::Qr, State::Qw, State::L_c, State::Qr_c, State::Qw_c};

inline constexpr std::array<std::string_view, kNumStates> kStateLabels = {
    "S", "E", "L", "Qr", "Qw", "L_c", "Qr_c", "Qw_c"};

constexpr std::size_t index(State s) noexcept { return static_cast<std::size_t>(s); }

constexpr std::string_view label(State s) noexcept { return kStateLabels[index(s)]; }

constexpr std::optional<State> state_from_label(std::string_view text) noexcept {
    for (std::size_t i = 0; i < kNumStates; ++i)
        if (kStateLabels[i] == text) return static_cast<State>(i);
    return std::nullopt;
}

constexpr bool is_action(State s) noexcept { return s != State::S && s != State::E; }

constexpr bool is_topic_change(State s) noexcept {
    return s == State::L_c || s == State::Qr_c || s == State::Qw_c;
}

constexpr bool allowed_edge(State from, State to) noexcept {
    if (from == State::E || to == State::S) return false;
    if (from == State::S) return to == State::L || to == State::Qr || to == State::Qw;
    return true;
}

// Allowed targets of `from`, in canonical state order.
inline constexpr std::array<std::array<bool, kNumStates>, kNumStates> kEdgeMask = [] {
    std::array<std::array<bool, kNumStates>, kNumStates> mask{};
    for (auto from : kAllStates)
        for (auto to : kAllStates) mask[index(from)][index(to)] = allowed_edge(from, to);
    return mask;
}();

constexpr std::size_t out_degree(State from) noexcept {
    std::size_t n = 0;
    for (auto to : kAllStates) n += allowed_edge(from, to) ? 1 : 0;
    return n;
}

static_assert(out_degree(State::S) == 3);
static_assert(out_degree(State::Qr) == 7);
static_assert(out_degree(State::E) == 0);

} // namespace mcmix
