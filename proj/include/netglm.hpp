#pragma once

#include "netglm/error.hpp"
#include "netglm/rng.hpp"
#include "netglm/hypergraph.hpp"
#include "netglm/mrf.hpp"
#include "netglm/mple.hpp"
#include "netglm/qp.hpp"
#include "netglm/normal.hpp"
#include "netglm/projection.hpp"
#include "netglm/inference.hpp"
#include "netglm/io.hpp"
#include "netglm/harness.hpp"
