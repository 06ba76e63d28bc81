#pragma once

#include "cardiowave/common.hpp"
#include "cardiowave/ecg.hpp"
#include "cardiowave/radar_sim.hpp"
#include "cardiowave/beamform.hpp"
#include "cardiowave/micromotion.hpp"
#include "cardiowave/focus.hpp"
#include "cardiowave/spatial_filter.hpp"
#include "cardiowave/eval_metrics.hpp"
#include "cardiowave/io.hpp"
#include "cardiowave/config.hpp"
#include "cardiowave/pipeline.hpp"
