#pragma once

#include "echoopt/bench.hpp"
#include "echoopt/common.hpp"
#include "echoopt/data_io.hpp"
#include "echoopt/engine.hpp"
#include "echoopt/losses.hpp"
#include "echoopt/optim.hpp"
#include "echoopt/oracles.hpp"
#include "echoopt/rng.hpp"
#include "echoopt/svg.hpp"
#include "echoopt/verify.hpp"
