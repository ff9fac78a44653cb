#pragma once

#include "groundfit/config.hpp"
#include "groundfit/elevation.hpp"
#include "groundfit/error.hpp"
#include "groundfit/fit.hpp"
#include "groundfit/io.hpp"
#include "groundfit/loss.hpp"
#include "groundfit/metrics.hpp"
#include "groundfit/optim.hpp"
#include "groundfit/pipeline.hpp"
#include "groundfit/pointcloud.hpp"
#include "groundfit/ransac.hpp"
#include "groundfit/synth.hpp"
