#pragma once

// Umbrella header.

#include "error.hpp"
#include "random.hpp"
#include "geometry.hpp"
#include "tags.hpp"
#include "matrix.hpp"
#include "rating.hpp"
#include "taskgen.hpp"
#include "detection.hpp"
#include "disaster.hpp"
#include "store.hpp"
#include "simulate.hpp"
#include "config.hpp"
