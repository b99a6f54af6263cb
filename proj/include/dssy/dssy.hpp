#pragma once

#include "dssy/errors.hpp"
#include "dssy/geometry.hpp"
#include "dssy/element.hpp"
#include "dssy/quadrature.hpp"
#include "dssy/mesh.hpp"
#include "dssy/assembly.hpp"
#include "dssy/experiment.hpp"
