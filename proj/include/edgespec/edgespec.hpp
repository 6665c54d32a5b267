#pragma once

#include "edgespec/error.hpp"
#include "edgespec/eigcore.hpp"
#include "edgespec/band.hpp"
#include "edgespec/moments.hpp"
#include "edgespec/geometry.hpp"
#include "edgespec/effsymbol.hpp"
#include "edgespec/quantize.hpp"
#include "edgespec/strip.hpp"
