#pragma once

#include "facetflow/config.hpp"
#include "facetflow/core.hpp"
#include "facetflow/density.hpp"
#include "facetflow/diagnostics.hpp"
#include "facetflow/grid.hpp"
#include "facetflow/report.hpp"
#include "facetflow/scenarios.hpp"
#include "facetflow/solver.hpp"
#include "facetflow/truncation.hpp"
#include "facetflow/verification.hpp"
