#pragma once

#include "msr/error.hpp"
#include "msr/geometry.hpp"
#include "msr/raster.hpp"
#include "msr/sphere_histogram.hpp"
#include "msr/kmedoids.hpp"
#include "msr/warp.hpp"
#include "msr/synthetic.hpp"
#include "msr/metrics.hpp"
#include "msr/rectifier.hpp"
#include "msr/png_io.hpp"
#include "msr/dataset_io.hpp"
#include "msr/serialization.hpp"
