#ifndef MFKL_MFKL_HPP
#define MFKL_MFKL_HPP

#include "mfkl/builtin_models.hpp"
#include "mfkl/chain.hpp"
#include "mfkl/core.hpp"
#include "mfkl/grid_density.hpp"
#include "mfkl/lyapunov.hpp"
#include "mfkl/model.hpp"
#include "mfkl/oracle.hpp"
#include "mfkl/parallel.hpp"
#include "mfkl/risk.hpp"
#include "mfkl/rng.hpp"
#include "mfkl/theory.hpp"
#include "mfkl/harness/config.hpp"
#include "mfkl/harness/experiments.hpp"
#include "mfkl/harness/io.hpp"
#include "mfkl/harness/report.hpp"

#endif  // MFKL_MFKL_HPP
