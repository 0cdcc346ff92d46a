#pragma once

#include "gmtlab/core.hpp"
#include "gmtlab/density.hpp"
#include "gmtlab/fibration.hpp"
#include "gmtlab/grassmann.hpp"
#include "gmtlab/planefield.hpp"
#include "gmtlab/sampling.hpp"
#include "gmtlab/setlib.hpp"
