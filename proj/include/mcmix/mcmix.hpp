#pragma once

#include "mcmix/state.hpp"
#include "mcmix/chain.hpp"
#include "mcmix/sequence.hpp"
#include "mcmix/random.hpp"
#include "mcmix/ingest.hpp"
#include "mcmix/clustering.hpp"
#include "mcmix/evaluation.hpp"
#include "mcmix/synthetic.hpp"
#include "mcmix/serialize.hpp"

namespace mcmix {
inline constexpr const char* kVersion = "0.1.0";
}
