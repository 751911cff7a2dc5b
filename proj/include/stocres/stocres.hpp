#pragma once

#include "stocres/commands.hpp"
#include "stocres/config.hpp"
#include "stocres/errors.hpp"
#include "stocres/io.hpp"
#include "stocres/linalg.hpp"
#include "stocres/model.hpp"
#include "stocres/parallel.hpp"
#include "stocres/pde.hpp"
#include "stocres/portfolio.hpp"
#include "stocres/projection.hpp"
#include "stocres/rng.hpp"
#include "stocres/simulate.hpp"
#include "stocres/stats.hpp"
