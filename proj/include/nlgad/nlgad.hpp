#pragma once

#include "autodiff.hpp"
#include "commands.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "injection.hpp"
#include "matrix.hpp"
#include "model.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "run_config.hpp"
#include "rwr.hpp"
#include "scoring.hpp"
#include "synth.hpp"
