#pragma once

#include "cost_kernel.hpp"
#include "estimates.hpp"
#include "experiment.hpp"
#include "io.hpp"
#include "lemma_suite.hpp"
#include "monotone_core.hpp"
#include "quadrature.hpp"
#include "regularity.hpp"
#include "sampled_map.hpp"
#include "transport_gen.hpp"
#include "types.hpp"
