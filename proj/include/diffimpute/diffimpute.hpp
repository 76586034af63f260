#pragma once

#include "diffimpute/baselines.hpp"
#include "diffimpute/bench.hpp"
#include "diffimpute/checkpoint.hpp"
#include "diffimpute/data.hpp"
#include "diffimpute/denoiser.hpp"
#include "diffimpute/metrics.hpp"
#include "diffimpute/sampling.hpp"
#include "diffimpute/schedule.hpp"
#include "diffimpute/training.hpp"
#include "diffimpute/pipeline.hpp"
#include "diffimpute/run_config.hpp"
