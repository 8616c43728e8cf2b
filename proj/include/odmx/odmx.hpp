#ifndef ODMX_ODMX_HPP
#define ODMX_ODMX_HPP

#include "odmx/algorithms.hpp"
#include "odmx/commands.hpp"
#include "odmx/config.hpp"
#include "odmx/errors.hpp"
#include "odmx/exact_oracle.hpp"
#include "odmx/intensity.hpp"
#include "odmx/io.hpp"
#include "odmx/latent.hpp"
#include "odmx/likelihood.hpp"
#include "odmx/markov_basis.hpp"
#include "odmx/matrix.hpp"
#include "odmx/metrics.hpp"
#include "odmx/rng.hpp"
#include "odmx/synth.hpp"
#include "odmx/table.hpp"
#include "odmx/table_samplers.hpp"

#endif  // ODMX_ODMX_HPP
