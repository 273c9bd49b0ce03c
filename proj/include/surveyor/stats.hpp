#pragma once

#include "surveyor/stats/correlation.hpp"
#include "surveyor/stats/descriptive.hpp"
#include "surveyor/stats/distributions.hpp"
#include "surveyor/stats/manova.hpp"
#include "surveyor/stats/regression.hpp"
