#pragma once

#include "lsi/behavior_metrics.hpp"
#include "lsi/cma_es.hpp"
#include "lsi/error.hpp"
#include "lsi/experiment.hpp"
#include "lsi/generator.hpp"
#include "lsi/level_model.hpp"
#include "lsi/optimizers.hpp"
#include "lsi/platformer_sim.hpp"
#include "lsi/qd_core.hpp"
