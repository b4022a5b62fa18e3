#pragma once

// Umbrella header: the whole library.

#include "spn/error.hpp"
#include "spn/logspace.hpp"
#include "spn/model.hpp"
#include "spn/evaluate.hpp"
#include "spn/derivatives.hpp"
#include "spn/validate.hpp"
#include "spn/induced.hpp"
#include "spn/mpe.hpp"
#include "spn/rng.hpp"
#include "spn/sample.hpp"
#include "spn/dataset.hpp"
#include "spn/stats.hpp"
#include "spn/fit.hpp"
#include "spn/learnspn.hpp"
#include "spn/augment.hpp"
#include "spn/model_io.hpp"
