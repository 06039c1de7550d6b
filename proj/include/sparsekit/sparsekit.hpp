#pragma once

#include "sparsekit/classify.hpp"
#include "sparsekit/convex.hpp"
#include "sparsekit/core.hpp"
#include "sparsekit/dictlearn.hpp"
#include "sparsekit/greedy.hpp"
#include "sparsekit/imaging.hpp"
#include "sparsekit/io.hpp"
#include "sparsekit/parallel.hpp"
#include "sparsekit/reweight.hpp"
#include "sparsekit/rng.hpp"
#include "sparsekit/types.hpp"
