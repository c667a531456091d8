#pragma once
// Umbrella header.

#include "hbtk/aft.hpp"
#include "hbtk/continuation.hpp"
#include "hbtk/elements.hpp"
#include "hbtk/epmc.hpp"
#include "hbtk/error.hpp"
#include "hbtk/harmonics.hpp"
#include "hbtk/hbm.hpp"
#include "hbtk/io.hpp"
#include "hbtk/model.hpp"
#include "hbtk/rom.hpp"
#include "hbtk/solvers.hpp"
#include "hbtk/systems.hpp"
#include "hbtk/vprnm.hpp"
