#pragma once

#include "wcps/numerics/cp_map.hpp"
#include "wcps/numerics/eig.hpp"
#include "wcps/numerics/linalg.hpp"
#include "wcps/numerics/matrix.hpp"
#include "wcps/numerics/placement.hpp"
#include "wcps/numerics/riccati.hpp"
