#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "mcmix/error.hpp"
#include "mcmix/state.hpp"

namespace mcmix {

using TransitionMatrix = std::array<std::array<double, kNumStates>, kNumStates>;

inline constexpr double kRowSumTolerance = 1e-9;

// Returns a description of the first violated invariant, or nullopt.
inline std::optional<std::string> check_chain(const TransitionMatrix& p) {
    for (auto from : kAllStates) {
        double sum = 0.0;
        for (auto to : kAllStates) {
            const double v = p[index(from)][index(to)];
            if (!(v >= 0.0 && v <= 1.0))
                return "entry [" + std::string(label(from)) + "][" + std::string(label(to)) +
                       "] outside [0,1]";
            if (!allowed_edge(from, to) && v != 0.0)
                return "disallowed edge " + std::string(label(from)) + "->" +
                       std::string(label(to)) + " has nonzero probability";
            sum += v;
        }
        if (from != State::E && std::abs(sum - 1.0) > kRowSumTolerance)
            return "row " + std::string(label(from)) + " sums to " + std::to_string(sum);
    }
    return std::nullopt;
}

/// Row-stochastic transition structure over the eight model states,
/// indexed [from][to]. Immutable once built; construction validates.
class MarkovChain {
public:
    explicit MarkovChain(const TransitionMatrix& p) : p_(p) {
        if (auto err = check_chain(p_)) throw data_error("invalid Markov chain: " + *err);
    }

    // Every non-E row spread evenly over its allowed targets.
    static MarkovChain uniform() {
        TransitionMatrix p{};
        for (auto from : kAllStates) {
            const auto deg = out_degree(from);
            for (auto to : kAllStates)
                if (allowed_edge(from, to)) p[index(from)][index(to)] = 1.0 / double(deg);
        }
        return MarkovChain(p);
    }

    double operator()(State from, State to) const noexcept { return p_[index(from)][index(to)]; }
    const TransitionMatrix& matrix() const noexcept { return p_; }

    friend bool operator==(const MarkovChain&, const MarkovChain&) = default;

private:
    TransitionMatrix p_;
};

/// Entrywise natural log of a chain; zero probabilities become -inf.
struct LogChain {
    TransitionMatrix logp{};

    explicit LogChain(const MarkovChain& c) {
        for (std::size_t i = 0; i < kNumStates; ++i)
            for (std::size_t j = 0; j < kNumStates; ++j) {
                const double v = c.matrix()[i][j];
                logp[i][j] = v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
            }
    }
};

} // namespace mcmix
