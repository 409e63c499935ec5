#pragma once

#include "fplearn/grid.hpp"
#include "fplearn/data_model.hpp"
#include "fplearn/convolution.hpp"
#include "fplearn/kde.hpp"
#include "fplearn/test_functions.hpp"
#include "fplearn/library.hpp"
#include "fplearn/weakform.hpp"
#include "fplearn/regression.hpp"
#include "fplearn/empirical_stats.hpp"
#include "fplearn/nondim.hpp"
#include "fplearn/sde_sim.hpp"
#include "fplearn/pipeline.hpp"
