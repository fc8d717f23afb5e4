#pragma once

// adiakit: spectral analysis, propagation and error bounds for time-dependent
// Lindblad generators.

#include "adiakit/types.hpp"
#include "adiakit/numerics.hpp"
#include "adiakit/superop.hpp"
#include "adiakit/family.hpp"
#include "adiakit/spectral.hpp"
#include "adiakit/propagate.hpp"
#include "adiakit/davies.hpp"
#include "adiakit/models.hpp"
#include "adiakit/bounds.hpp"
#include "adiakit/experiments.hpp"
