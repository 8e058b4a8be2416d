#pragma once

#include "geolearn/errors.hpp"
#include "geolearn/geometry.hpp"
#include "geolearn/pauli.hpp"
#include "geolearn/eigensolver.hpp"
#include "geolearn/hamiltonian.hpp"
#include "geolearn/shadows.hpp"
#include "geolearn/features.hpp"
#include "geolearn/lasso.hpp"
#include "geolearn/paulinorm.hpp"
#include "geolearn/harness/seeds.hpp"
#include "geolearn/harness/parallel.hpp"
#include "geolearn/harness/config.hpp"
#include "geolearn/harness/io.hpp"
#include "geolearn/harness/data.hpp"
#include "geolearn/harness/learning.hpp"
#include "geolearn/harness/experiment.hpp"
