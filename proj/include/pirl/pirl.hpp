#pragma once

// Umbrella header: learning and validating long-horizon safety probabilities
// of controlled diffusions with a physics-informed deep Q-network.

#include "pirl/augmented.hpp"
#include "pirl/config.hpp"
#include "pirl/evaluation.hpp"
#include "pirl/harness.hpp"
#include "pirl/network.hpp"
#include "pirl/optimizer.hpp"
#include "pirl/replay.hpp"
#include "pirl/rng.hpp"
#include "pirl/sampling.hpp"
#include "pirl/system.hpp"
#include "pirl/trainer.hpp"
