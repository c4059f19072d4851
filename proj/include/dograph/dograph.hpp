#pragma once

// Umbrella header for the dograph library.

#include "dograph/config.hpp"
#include "dograph/domains.hpp"
#include "dograph/geometry.hpp"
#include "dograph/io.hpp"
#include "dograph/linalg.hpp"
#include "dograph/matrix.hpp"
#include "dograph/model.hpp"
#include "dograph/partition.hpp"
#include "dograph/rng.hpp"
#include "dograph/scheduler.hpp"
#include "dograph/verify.hpp"
#include "dograph/weights.hpp"
