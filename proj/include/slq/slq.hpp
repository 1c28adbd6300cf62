#pragma once

#include "slq/error.hpp"
#include "slq/tree.hpp"
#include "slq/adapted.hpp"
#include "slq/monte_carlo.hpp"
#include "slq/galerkin.hpp"
#include "slq/forward.hpp"
#include "slq/backward.hpp"
#include "slq/krylov.hpp"
#include "slq/lq_core.hpp"
#include "slq/game.hpp"
#include "slq/random.hpp"
