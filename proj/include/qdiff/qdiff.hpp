#pragma once

// Umbrella header.

#include "qdiff/error.hpp"
#include "qdiff/special.hpp"
#include "qdiff/qstats.hpp"
#include "qdiff/series.hpp"
#include "qdiff/decompose.hpp"
#include "qdiff/optimize.hpp"
#include "qdiff/estimate.hpp"
#include "qdiff/regimes.hpp"
#include "qdiff/trend_forecast.hpp"
#include "qdiff/io.hpp"
#include "qdiff/config.hpp"
#include "qdiff/pipeline.hpp"
#include "qdiff/synthetic.hpp"
