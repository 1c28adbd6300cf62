#pragma once

// Configuration, reporting and command workflows (needs nlohmann/json).

#include "slq/io/config.hpp"
#include "slq/io/report.hpp"
#include "slq/io/oracle.hpp"
#include "slq/io/commands.hpp"
