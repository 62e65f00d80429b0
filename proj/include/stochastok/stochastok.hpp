#pragma once

// Umbrella header.

#include "stochastok/analysis.hpp"
#include "stochastok/bpe.hpp"
#include "stochastok/dataset.hpp"
#include "stochastok/errors.hpp"
#include "stochastok/expand.hpp"
#include "stochastok/pipeline.hpp"
#include "stochastok/rng.hpp"
#include "stochastok/shard.hpp"
#include "stochastok/splits.hpp"
#include "stochastok/version.hpp"
#include "stochastok/vocab.hpp"
