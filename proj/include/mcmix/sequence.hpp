#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcmix/chain.hpp"
#include "mcmix/error.hpp"
#include "mcmix/state.hpp"

namespace mcmix {

enum class ActionKind { lesson, question };

struct Action {
    ActionKind kind = ActionKind::lesson;
    std::optional<bool> correct;  // present iff kind == question
    std::string topic;
};

/// A session rendered as a path S -> ... -> E through the model states.
class EncodedSequence {
public:
    EncodedSequence() = default;

    EncodedSequence(std::vector<State> states, std::string source_id = {})
        : states_(std::move(states)), source_id_(std::move(source_id)) {
        if (states_.size() < 3) throw data_error("encoded sequence needs at least S, one action, E");
        if (states_.front() != State::S || states_.back() != State::E)
            throw data_error("encoded sequence must start with S and end with E");
        for (std::size_t i = 1; i + 1 < states_.size(); ++i)
            if (!is_action(states_[i]))
                throw data_error("sentinel state inside encoded sequence");
        if (is_topic_change(states_[1])) throw data_error("encoded sequence cannot open with a topic change");
    }

    const std::vector<State>& states() const noexcept { return states_; }
    const std::string& source_id() const noexcept { return source_id_; }

    std::size_t transitions() const noexcept { return states_.empty() ? 0 : states_.size() - 1; }
    std::size_t interior_length() const noexcept { return states_.empty() ? 0 : states_.size() - 2; }

    std::span<const State> interior() const noexcept {
        return std::span<const State>(states_).subspan(1, interior_length());
    }

    friend bool operator==(const EncodedSequence&, const EncodedSequence&) = default;

private:
    std::vector<State> states_;
    std::string source_id_;
};

inline EncodedSequence encode_session(std::span<const Action> actions, std::string source_id = {}) {
    if (actions.empty()) throw data_error("empty session");
    std::vector<State> states;
    states.reserve(actions.size() + 2);
    states.push_back(State::S);
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const auto& a = actions[i];
        const bool changed = i > 0 && a.topic != actions[i - 1].topic;
        if (a.kind == ActionKind::lesson) {
            if (a.correct) throw data_error("malformed action: lesson with correctness flag");
            states.push_back(changed ? State::L_c : State::L);
        } else {
            if (!a.correct) throw data_error("malformed action: question without correctness flag");
            if (*a.correct)
                states.push_back(changed ? State::Qr_c : State::Qr);
            else
                states.push_back(changed ? State::Qw_c : State::Qw);
        }
    }
    states.push_back(State::E);
    return EncodedSequence(std::move(states), std::move(source_id));
}

/// Log-space likelihood; -inf marks a path through a zero-probability edge.
struct LogLikelihood {
    double value = 0.0;

    bool supported() const noexcept { return value != -std::numeric_limits<double>::infinity(); }

    static LogLikelihood impossible() noexcept {
        return {-std::numeric_limits<double>::infinity()};
    }

    friend auto operator<=>(const LogLikelihood&, const LogLikelihood&) = default;
};

inline LogLikelihood log_likelihood(const EncodedSequence& seq, const LogChain& chain) noexcept {
    const auto& s = seq.states();
    double total = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double lp = chain.logp[index(s[i - 1])][index(s[i])];
        if (lp == -std::numeric_limits<double>::infinity()) return LogLikelihood::impossible();
        total += lp;
    }
    return {total};
}

inline LogLikelihood log_likelihood(const EncodedSequence& seq, const MarkovChain& chain) {
    return log_likelihood(seq, LogChain(chain));
}

struct ChainChoice {
    std::size_t index = 0;
    LogLikelihood log_likelihood;
    bool supported() const noexcept { return log_likelihood.supported(); }
};

// Smallest index wins ties; an unsupported sequence reports index 0.
inline ChainChoice most_likely_chain(const EncodedSequence& seq, std::span<const LogChain> chains) {
    if (chains.empty()) throw usage_error("most_likely_chain: empty chain list");
    ChainChoice best{0, log_likelihood(seq, chains[0])};
    for (std::size_t j = 1; j < chains.size(); ++j) {
        const auto ll = log_likelihood(seq, chains[j]);
        if (ll.value > best.log_likelihood.value) best = {j, ll};
    }
    return best;
}

inline std::vector<LogChain> to_log_chains(std::span<const MarkovChain> chains) {
    std::vector<LogChain> out;
    out.reserve(chains.size());
    for (const auto& c : chains) out.emplace_back(c);
    return out;
}

inline ChainChoice most_likely_chain(const EncodedSequence& seq, std::span<const MarkovChain> chains) {
    if (chains.empty()) throw usage_error("most_likely_chain: empty chain list");
    return most_likely_chain(seq, std::span<const LogChain>(to_log_chains(chains)));
}

} // namespace mcmix
