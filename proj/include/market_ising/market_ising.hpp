#pragma once

#include "market_ising/errors.hpp"
#include "market_ising/rng.hpp"
#include "market_ising/lattice.hpp"
#include "market_ising/market_dynamics.hpp"
#include "market_ising/ga_optimizer.hpp"
#include "market_ising/topology_analysis.hpp"
#include "market_ising/experiment.hpp"
