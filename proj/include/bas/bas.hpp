#pragma once

#include "bas/acquisition.hpp"
#include "bas/corpus.hpp"
#include "bas/costmodel.hpp"
#include "bas/csv.hpp"
#include "bas/engine.hpp"
#include "bas/error.hpp"
#include "bas/experiment.hpp"
#include "bas/learner.hpp"
#include "bas/metrics.hpp"
#include "bas/protocol.hpp"
#include "bas/rng.hpp"
#include "bas/synth.hpp"
#include "bas/toy_learner.hpp"
