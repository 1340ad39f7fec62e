#pragma once

#include "alc/acquisition.hpp"
#include "alc/core.hpp"
#include "alc/correction_loop.hpp"
#include "alc/cost_model.hpp"
#include "alc/error.hpp"
#include "alc/metrics.hpp"
#include "alc/png.hpp"
#include "alc/pool.hpp"
#include "alc/predictor.hpp"
#include "alc/query.hpp"
#include "alc/rng.hpp"
#include "alc/service.hpp"
#include "alc/synth.hpp"
#include "alc/tensor_io.hpp"
