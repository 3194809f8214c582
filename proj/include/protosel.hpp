#pragma once

#include "protosel/baselines.hpp"
#include "protosel/dataset.hpp"
#include "protosel/dissim.hpp"
#include "protosel/dspace.hpp"
#include "protosel/error.hpp"
#include "protosel/fitness.hpp"
#include "protosel/ga.hpp"
#include "protosel/harness.hpp"
#include "protosel/hashing.hpp"
#include "protosel/matrix.hpp"
#include "protosel/rng.hpp"
