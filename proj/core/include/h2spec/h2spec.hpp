#pragma once

#include "h2spec/compress.hpp"
#include "h2spec/dense.hpp"
#include "h2spec/errors.hpp"
#include "h2spec/geometry.hpp"
#include "h2spec/gldl.hpp"
#include "h2spec/parallel.hpp"
#include "h2spec/partition.hpp"
#include "h2spec/spectrum.hpp"
