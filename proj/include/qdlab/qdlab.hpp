// umbrella header
#pragma once

#include "qdlab/common.hpp"
#include "qdlab/commutator.hpp"
#include "qdlab/dynamics.hpp"
#include "qdlab/fitting.hpp"
#include "qdlab/greens.hpp"
#include "qdlab/lattice_operator.hpp"
#include "qdlab/quadrature.hpp"
#include "qdlab/report_io.hpp"
#include "qdlab/runner.hpp"
#include "qdlab/scenario.hpp"
#include "qdlab/version.hpp"
