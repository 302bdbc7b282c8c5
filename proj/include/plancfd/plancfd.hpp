#pragma once

#include "plancfd/errors.hpp"
#include "plancfd/parallel.hpp"
#include "plancfd/mesh.hpp"
#include "plancfd/stencil.hpp"
#include "plancfd/physics.hpp"
#include "plancfd/plan.hpp"
#include "plancfd/kernels.hpp"
#include "plancfd/diagnostics.hpp"
#include "plancfd/timeloop.hpp"
#include "plancfd/bench.hpp"
#include "plancfd/config.hpp"
