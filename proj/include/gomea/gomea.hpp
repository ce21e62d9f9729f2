#pragma once

#include "gomea/distribution.hpp"
#include "gomea/graph.hpp"
#include "gomea/harness.hpp"
#include "gomea/linkage.hpp"
#include "gomea/optimizer.hpp"
#include "gomea/parallel.hpp"
#include "gomea/problems.hpp"
#include "gomea/random.hpp"
#include "gomea/rates.hpp"
