#pragma once

#include "lnamc/crn.hpp"
#include "lnamc/error.hpp"
#include "lnamc/format.hpp"
#include "lnamc/gaussian.hpp"
#include "lnamc/lna.hpp"
#include "lnamc/model_lang.hpp"
#include "lnamc/ode.hpp"
#include "lnamc/rng.hpp"
#include "lnamc/sel.hpp"
#include "lnamc/ssa.hpp"
#include "lnamc/uniformisation.hpp"

namespace lnamc {
inline constexpr const char* kVersion = "0.1.0";
}
